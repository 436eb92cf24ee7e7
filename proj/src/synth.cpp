#include "posestitch/synth.hpp"

#include <cmath>
#include <queue>

namespace posestitch {

TrajectoryKind parse_trajectory(const std::string& text) {
    if (text == "smoothstep") return TrajectoryKind::Smoothstep;
    if (text == "sinusoidal") return TrajectoryKind::Sinusoidal;
    throw Error("trajectory: expected 'smoothstep' or 'sinusoidal', got '" + text + "'");
}

std::string trajectory_name(TrajectoryKind k) {
    return k == TrajectoryKind::Smoothstep ? "smoothstep" : "sinusoidal";
}

void CorpusConfig::validate() const {
    skeleton.validate();
    if (sequence_count < 1) throw ConfigError("sequence_count", "must be positive");
    if (keypose_count < 1) throw ConfigError("keypose_count", "must be positive");
    if (pool_size < 1) throw ConfigError("pool_size", "must be positive");
    if (frames_per_sequence < 2 * keypose_count)
        throw ConfigError("frames_per_sequence",
                          "must be at least twice keypose_count");
    if (noise_amplitude < 0.0) throw ConfigError("noise_amplitude", "must be nonnegative");
}

std::vector<Rowd> keypose_pool(const CorpusConfig& cfg) {
    const int n = cfg.skeleton.joint_count;
    // Adjacency for a BFS walk out from the root.
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (auto [a, b] : cfg.skeleton.edges) {
        adj[std::size_t(a)].push_back(b);
        adj[std::size_t(b)].push_back(a);
    }
    Rng rng(cfg.seed);
    std::vector<Rowd> pool;
    pool.reserve(std::size_t(cfg.pool_size));
    for (int p = 0; p < cfg.pool_size; ++p) {
        Rowd pose = Rowd::Zero(3 * n);
        std::vector<char> placed(std::size_t(n), 0);
        placed[std::size_t(cfg.skeleton.root)] = 1;
        std::queue<int> frontier;
        frontier.push(cfg.skeleton.root);
        while (!frontier.empty()) {
            int j = frontier.front();
            frontier.pop();
            for (int k : adj[std::size_t(j)]) {
                if (placed[std::size_t(k)]) continue;
                placed[std::size_t(k)] = 1;
                Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
                double len = dir.norm();
                if (len < 1e-9) dir = Eigen::Vector3d::UnitX(); else dir /= len;
                pose.segment(3 * k, 3) = pose.segment(3 * j, 3) + dir.transpose();
                frontier.push(k);
            }
        }
        pool.push_back(std::move(pose));
    }
    return pool;
}

namespace {

double ease(double u, TrajectoryKind kind) {
    if (kind == TrajectoryKind::Smoothstep) return u * u * (3.0 - 2.0 * u);
    return 0.5 * (1.0 - std::cos(M_PI * u));
}

}  // namespace

Matd ease_trajectory(const Matd& waypoints, int frames, TrajectoryKind kind) {
    const int K = int(waypoints.rows());
    if (K < 1) throw Error("ease_trajectory: need at least one waypoint");
    if (frames < 1) throw Error("ease_trajectory: need at least one frame");
    Matd out(frames, waypoints.cols());
    if (K == 1 || frames == 1) {
        for (int f = 0; f < frames; ++f) out.row(f) = waypoints.row(0);
        return out;
    }
    // Waypoint k anchors at fractional frame k * (F-1)/(K-1).
    const double span = double(frames - 1) / double(K - 1);
    for (int f = 0; f < frames; ++f) {
        int k = std::min(int(double(f) / span), K - 2);
        double u = (double(f) - k * span) / span;
        u = std::min(std::max(u, 0.0), 1.0);
        out.row(f) =
            waypoints.row(k) + ease(u, kind) * (waypoints.row(k + 1) - waypoints.row(k));
    }
    return out;
}

std::vector<PoseSequence> generate_corpus(const CorpusConfig& cfg) {
    cfg.validate();
    std::vector<Rowd> pool = keypose_pool(cfg);
    Rng rng(cfg.seed + 1);
    std::vector<PoseSequence> corpus;
    corpus.reserve(std::size_t(cfg.sequence_count));
    for (int s = 0; s < cfg.sequence_count; ++s) {
        Matd keys(cfg.keypose_count, 3 * cfg.skeleton.joint_count);
        int prev = -1;
        for (int k = 0; k < cfg.keypose_count; ++k) {
            int pick = int(rng.below(std::uint64_t(pool.size())));
            // Avoid a flat span when the pool allows it.
            if (pick == prev && pool.size() > 1)
                pick = int((pick + 1 + rng.below(std::uint64_t(pool.size() - 1))) % pool.size());
            keys.row(k) = pool[std::size_t(pick)];
            prev = pick;
        }
        Matd frames = ease_trajectory(keys, cfg.frames_per_sequence, cfg.trajectory);
        if (cfg.noise_amplitude > 0.0)
            for (Eigen::Index i = 0; i < frames.rows(); ++i)
                for (Eigen::Index j = 0; j < frames.cols(); ++j)
                    frames(i, j) += rng.uniform(-cfg.noise_amplitude, cfg.noise_amplitude);
        PoseSequence seq{cfg.skeleton, std::move(frames)};
        corpus.push_back(normalize(seq));
    }
    return corpus;
}

CarveResult carve_protocol(const PoseSequence& seq, int observe, int predict) {
    if (observe < 1 || predict < 1)
        throw Error("carve_protocol: segment lengths must be at least 1");
    const int F = seq.frame_count();
    if (F < observe + predict + observe)
        throw Error("carve_protocol: sequence too short (" + std::to_string(F) +
                    " frames, need at least " + std::to_string(2 * observe + predict) + ")");
    CarveResult result;
    result.segments.gap_length = predict;
    int at = 0;
    while (F - at >= observe + predict + observe) {
        result.segments.segments.push_back(
            PoseSequence{seq.skeleton, seq.frames.middleRows(at, observe)});
        result.gaps.push_back(
            PoseSequence{seq.skeleton, seq.frames.middleRows(at + observe, predict)});
        result.gap_starts.push_back(at + observe);
        at += observe + predict;
    }
    result.segments.segments.push_back(
        PoseSequence{seq.skeleton, seq.frames.middleRows(at, F - at)});
    return result;
}

}  // namespace posestitch
