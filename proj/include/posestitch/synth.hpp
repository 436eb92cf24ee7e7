#pragma once

// Deterministic synthetic pose corpus: sequences that ease between random
// keyposes drawn from a seeded pool, with bounded noise. Stands in for real
// motion data and supplies ground-truth transitions for evaluation.

#include "posestitch/common.hpp"
#include "posestitch/pose.hpp"
#include "posestitch/stitch.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace posestitch {

enum class TrajectoryKind { Smoothstep, Sinusoidal };

TrajectoryKind parse_trajectory(const std::string& text);
std::string trajectory_name(TrajectoryKind k);

struct CorpusConfig {
    Skeleton skeleton = Skeleton::chain(5);
    int sequence_count = 32;
    int frames_per_sequence = 60;
    int keypose_count = 4;
    int pool_size = 12;
    TrajectoryKind trajectory = TrajectoryKind::Smoothstep;
    double noise_amplitude = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

// The seeded keypose pool: unit-length bones in random directions, root at
// the origin. Depends only on (skeleton, pool_size, seed).
std::vector<Rowd> keypose_pool(const CorpusConfig& cfg);

// Eases through the given waypoints (rows), placing them evenly across
// `frames` output frames. Smoothstep easing is 3u^2 - 2u^3 per span, so the
// steepest per-frame coordinate change is 1.5x the straight-line rate.
Matd ease_trajectory(const Matd& waypoints, int frames, TrajectoryKind kind);

std::vector<PoseSequence> generate_corpus(const CorpusConfig& cfg);

// Alternating observed/held-out split of one sequence: observed segments of
// length `observe`, gaps of length `predict`, starting observed; frames
// that do not fill one more observe+gap+observe period stay in the final
// observed segment. The pieces partition the input exactly.
struct CarveResult {
    SegmentList segments;            // observed segments, gap_length = predict
    std::vector<PoseSequence> gaps;  // held-out ground-truth transitions
    std::vector<int> gap_starts;     // index of each gap's first frame
};

CarveResult carve_protocol(const PoseSequence& seq, int observe, int predict);

}  // namespace posestitch
