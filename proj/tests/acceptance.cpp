// Acceptance battery: one line per criterion, exit code = failure count.
//
// Each criterion is verified against independently computed oracles or
// pinned tolerances (stated inline next to each check). Criterion 6 runs
// the full desk-scale pipeline twice through the public CLI entry point to
// verify training progress, held-out gap quality, and byte determinism.

#include "helpers.hpp"

#include "posestitch/autodiff.hpp"
#include "posestitch/cli.hpp"
#include "posestitch/diffusion.hpp"
#include "posestitch/metrics.hpp"
#include "posestitch/model.hpp"
#include "posestitch/pose.hpp"
#include "posestitch/stitch.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace posestitch;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void ensure(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return std::string(buf);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run_criterion(int number, const std::string& label,
                  const std::function<std::string()>& body) {
    try {
        std::string detail = body();
        std::printf("[PASS] criterion %d: %s (%s)\n", number, label.c_str(), detail.c_str());
        std::fflush(stdout);
        return 0;
    } catch (const std::exception& e) {
        std::printf("[FAIL] criterion %d: %s -- %s\n", number, label.c_str(), e.what());
        std::fflush(stdout);
        return 1;
    }
}

NetworkConfig toy_config() {
    NetworkConfig cfg;
    cfg.input_dim = 9;
    cfg.latent_dim = 16;
    cfg.head_count = 4;
    cfg.feed_forward_dim = 32;
    cfg.encoder_layers = 1;
    cfg.decoder_layers = 1;
    cfg.denoiser_blocks = 1;
    cfg.max_sequence_length = 64;
    return cfg;
}

// ------------------------------------------------------------- criterion 1

std::string criterion_gradients() {
    auto start = std::chrono::steady_clock::now();
    const double tol = 1e-4;  // max relative error, reverse mode vs central differences
    NetworkConfig cfg = toy_config();
    NamedTensors<double> params = init_params<double>(cfg, 3);

    Rng rng(4);
    Matd x = rng.normal_matrix<double>(6, 9);
    Matd z = rng.normal_matrix<double>(6, 16);
    Matd latent_target = rng.normal_matrix<double>(6, 16);
    Matd frame_target = rng.normal_matrix<double>(6, 9);

    // L_diff ingredients, exactly as the trainer builds them: clean latent,
    // mask-conditioned context, and a noised sample from the schedule.
    NoiseSchedule sched = make_schedule(6);
    Matd z0 = rng.normal_matrix<double>(6, 16);
    Matd eps = rng.normal_matrix<double>(6, 16);
    FrameMask mask;
    mask.length = 6;
    mask.masked = {2, 3};
    const int t = 3;
    Matd zt = q_sample(z0, t, eps, sched);
    Matd cond = build_condition(z0, mask);

    std::vector<std::pair<std::string, LossBuilder>> losses = {
        {"encoder",
         [&](Graph<double>& g, const NamedTensors<double>& p) {
             ParamCache<double> P{g, p};
             return g.mean_abs_err(encoder_graph(P, g.input(x), cfg), latent_target);
         }},
        {"decoder",
         [&](Graph<double>& g, const NamedTensors<double>& p) {
             ParamCache<double> P{g, p};
             return g.mean_abs_err(decoder_graph(P, g.input(z), cfg), frame_target);
         }},
        {"denoiser",
         [&](Graph<double>& g, const NamedTensors<double>& p) {
             ParamCache<double> P{g, p};
             return g.mean_abs_err(denoiser_graph(P, g.input(zt), t - 1, g.input(cond), cfg),
                                   latent_target);
         }},
        {"L_pre",
         [&](Graph<double>& g, const NamedTensors<double>& p) {
             ParamCache<double> P{g, p};
             return g.mean_abs_err(decoder_graph(P, encoder_graph(P, g.input(x), cfg), cfg), x);
         }},
        {"L_diff",
         [&](Graph<double>& g, const NamedTensors<double>& p) {
             ParamCache<double> P{g, p};
             return g.mean_abs_err(denoiser_graph(P, g.input(zt), t - 1, g.input(cond), cfg),
                                   z0);
         }},
    };

    double worst = 0.0;
    for (const auto& [name, build] : losses) {
        double err = grad_check(build, params, 50, 11);
        ensure(err < tol, name + " gradient error " + fmt("%.3g exceeds 1e-4", err));
        worst = std::max(worst, err);
    }
    double elapsed = seconds_since(start);
    ensure(elapsed < 60.0, fmt("took %.1fs, limit 60s", elapsed));
    return fmt("max rel err %.2g over 5 losses, %.1fs", worst, elapsed);
}

// ------------------------------------------------------------- criterion 2

std::string criterion_diffusion_identities() {
    auto start = std::chrono::steady_clock::now();
    NoiseSchedule sched = make_schedule(100);

    // Cumulative coefficients are running products of the per-step ones.
    ensure(std::abs(sched.cumulative(0) - 1.0) <= 1e-12, "cumulative(0) != 1");
    double running = 1.0;
    double cum_err = 0.0;
    for (int t = 1; t <= sched.T; ++t) {
        running *= sched.retention(t);
        cum_err = std::max(cum_err, std::abs(sched.cumulative(t) - running));
    }
    ensure(cum_err <= 1e-12, fmt("cumulative product drifts by %.3g > 1e-12", cum_err));

    // Variance preservation: unit-variance input stays unit-variance (+-0.1)
    // at 10^4 samples.
    Rng rng(6);
    Matd z0 = rng.normal_matrix<double>(100, 100);
    double var_lo = 1.0, var_hi = 1.0;
    for (int t : {sched.T / 2, sched.T}) {
        Matd noise = rng.normal_matrix<double>(100, 100);
        Matd zt = q_sample(z0, t, noise, sched);
        double mean = zt.mean();
        double var = (zt.array() - mean).square().sum() / double(zt.size() - 1);
        ensure(var > 0.9 && var < 1.1, fmt("variance %.4f at t=%d outside [0.9, 1.1]",
                                           var, double(t)));
        var_lo = std::min(var_lo, var);
        var_hi = std::max(var_hi, var);
    }

    // Oracle denoiser: injecting the true clean latent with eps = 0 at every
    // reverse step must walk the chain back to exactly that latent.
    Matd clean = rng.normal_matrix<double>(10, 8);
    Matd zero = Matd::Zero(10, 8);
    Matd zt = sched.cumulative(sched.T) * clean;
    for (int t = sched.T; t >= 1; --t) zt = reverse_step(clean, zt, t, zero, sched);
    double roundtrip = (zt - clean).cwiseAbs().maxCoeff();
    ensure(roundtrip < 1e-5, fmt("oracle round trip error %.3g >= 1e-5", roundtrip));

    double elapsed = seconds_since(start);
    ensure(elapsed < 60.0, fmt("took %.1fs, limit 60s", elapsed));
    return fmt("cumprod err %.1g, variance in [%.3f", cum_err, var_lo) +
           fmt(", %.3f], ", var_hi) + fmt("round trip %.2g, %.1fs", roundtrip, elapsed);
}

// ------------------------------------------------------------- criterion 3

std::string criterion_padding_oracle() {
    Rng rng(5);
    Rowd start = rng.normal_matrix<double>(1, 3);
    Rowd end = rng.normal_matrix<double>(1, 3);
    double worst = 0.0;
    for (int gap = 1; gap <= 50; ++gap) {
        Matd got = pad_transition(start, end, gap, PadStrategy::Eq8);

        // Independent brute force: weight frame i by its normalized partial
        // harmonic sum and blend the endpoints.
        double harmonic_gap = 0.0;
        for (int k = 1; k <= gap; ++k) harmonic_gap += 1.0 / double(k);
        for (int i = 0; i < gap; ++i) {
            double h = 0.0;
            for (int k = 0; k <= i; ++k) h += 1.0 / double(k + 1);
            Rowd want = start * (1.0 - h / gap) + end * (h / gap);
            worst = std::max(worst, (got.row(i) - want).cwiseAbs().maxCoeff());
        }

        // Structural facts: f(0) = 1 puts the first frame one delta-step in,
        // and the final frame lands at p_s + delta * H_G / G.
        Rowd first_want = start + (end - start) / double(gap);
        Rowd last_want = start + (end - start) * (harmonic_gap / double(gap));
        worst = std::max(worst, (got.row(0) - first_want).cwiseAbs().maxCoeff());
        worst = std::max(worst, (got.row(gap - 1) - last_want).cwiseAbs().maxCoeff());
    }
    ensure(worst <= 1e-12, fmt("harmonic fill deviates by %.3g > 1e-12", worst));
    return fmt("max deviation %.2g over G in 1..50", worst);
}

// ------------------------------------------------------------- criterion 4

double exhaustive_dtw(const Matd& a, const Matd& b, Eigen::Index i, Eigen::Index j) {
    double d = (a.row(i) - b.row(j)).norm();
    if (i == 0 && j == 0) return d;
    double best = std::numeric_limits<double>::infinity();
    if (i > 0) best = std::min(best, exhaustive_dtw(a, b, i - 1, j));
    if (j > 0) best = std::min(best, exhaustive_dtw(a, b, i, j - 1));
    if (i > 0 && j > 0) best = std::min(best, exhaustive_dtw(a, b, i - 1, j - 1));
    return d + best;
}

std::string criterion_metric_oracles() {
    // DTW: dynamic program equals exhaustive path enumeration, exactly.
    Rng rng(7);
    for (int n = 1; n <= 5; ++n)
        for (int m = 1; m <= 5; ++m) {
            Matd a = rng.normal_matrix<double>(n, 3);
            Matd b = rng.normal_matrix<double>(m, 3);
            double want = exhaustive_dtw(a, b, n - 1, m - 1);
            ensure(dtw(a, b).raw == want,
                   fmt("dtw mismatch at %gx%g", double(n), double(m)));
        }

    // Frechet closed forms (tolerance 1e-8): pure mean shift gives ||v||^2,
    // and zero-mean 4I vs I in dimension p gives exactly p.
    FeatureStats unit_a, unit_b;
    unit_a.mean = Eigen::VectorXd::Zero(2);
    unit_a.covariance = Matd::Identity(2, 2);
    unit_b.mean = Eigen::VectorXd(2);
    unit_b.mean << 1.0, 2.0;
    unit_b.covariance = Matd::Identity(2, 2);
    double shift = frechet_distance(unit_a, unit_b);
    ensure(std::abs(shift - 5.0) < 1e-8, fmt("mean-shift case %.10f != 5", shift));

    const int p = 4;
    FeatureStats four, one;
    four.mean = Eigen::VectorXd::Zero(p);
    four.covariance = 4.0 * Matd::Identity(p, p);
    one.mean = Eigen::VectorXd::Zero(p);
    one.covariance = Matd::Identity(p, p);
    double scaled = frechet_distance(four, one);
    ensure(std::abs(scaled - double(p)) < 1e-8, fmt("4I-vs-I case %.10f != %g",
                                                    scaled, double(p)));

    // MPJPE hand cases, exact: a (3,4,0) offset on every joint is distance 5;
    // moving one of five joints by 2 averages to 2/5.
    PoseSequence base = testutil::random_sequence(5, 4, 8);
    PoseSequence moved = base;
    for (int j = 0; j < 4; ++j) {
        moved.frames.col(3 * j).array() += 3.0;
        moved.frames.col(3 * j + 1).array() += 4.0;
    }
    ensure(mpjpe(base, moved) == 5.0, "uniform offset case is not exactly 5");
    ensure(mpjpe(base, base) == 0.0, "identical sequences give nonzero error");

    PoseSequence five = testutil::random_sequence(4, 5, 9);
    PoseSequence nudged = five;
    nudged.frames.col(3 * 2 + 2).array() += 2.0;
    ensure(mpjpe(five, nudged) == 2.0 / 5.0, "single-joint case is not exactly 2/5");

    return "dtw exact on 25 shapes, frechet within 1e-8, mpjpe exact";
}

// ------------------------------------------------------------- criterion 5

std::string criterion_mask_protocol() {
    // Block protocol: observe 20, then mask 10, repeating. At F=30 that is
    // exactly frames 20..29.
    MaskProtocol block = MaskProtocol::parse("block(20,10)");
    FrameMask bm = sample_mask(30, 0.3, block, 1);
    std::set<int> want;
    for (int f = 20; f < 30; ++f) want.insert(f);
    ensure(bm.masked == want, "block(20,10) at F=30 is not frames 20..29");

    // Uniform protocol at r=0.3, F=30: every draw hides exactly 9 frames,
    // and each index is hidden with frequency 0.30 +- 0.02 over 10^4 draws.
    const int draws = 10000, F = 30;
    std::vector<int> hits(F, 0);
    Rng rng(777);
    for (int d = 0; d < draws; ++d) {
        FrameMask m = sample_mask(F, 0.3, MaskProtocol{}, rng);
        ensure(int(m.masked.size()) == 9, fmt("draw %g masked %g frames, expected 9",
                                              double(d), double(m.masked.size())));
        for (int f : m.masked) ++hits[std::size_t(f)];
    }
    double lo = 1.0, hi = 0.0;
    for (int f = 0; f < F; ++f) {
        double freq = double(hits[std::size_t(f)]) / draws;
        lo = std::min(lo, freq);
        hi = std::max(hi, freq);
        ensure(std::abs(freq - 0.3) <= 0.02,
               fmt("index %g frequency %.4f outside 0.30 +- 0.02", double(f), freq));
    }
    return fmt("block exact, uniform count always 9, frequency in [%.3f, %.3f]", lo, hi);
}

// ------------------------------------------------------------- criterion 6

std::vector<double> read_loss_history(const std::string& path) {
    std::istringstream in(testutil::read_text(path));
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) values.push_back(std::stod(line));
    ensure(!values.empty(), "empty loss history at " + path);
    return values;
}

std::map<std::string, double> read_report(const std::string& path) {
    std::istringstream in(testutil::read_text(path));
    std::map<std::string, double> rows;
    std::string key, value;
    while (in >> key >> value) rows[key] = std::stod(value);
    ensure(!rows.empty(), "empty report at " + path);
    return rows;
}

double window_mean(const std::vector<double>& v, bool first, std::size_t n) {
    ensure(v.size() >= n, "loss history shorter than the comparison window");
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += first ? v[i] : v[v.size() - 1 - i];
    return sum / double(n);
}

void run_pipeline(const std::string& dir) {
    auto cli = [&](std::vector<std::string> args, const std::string& what) {
        ensure(run_cli(args) == 0, what + " exited nonzero");
    };
    cli({"gen-corpus", "--corpus.dir", dir + "/train", "--corpus.count", "32", "--seed", "11"},
        "gen-corpus (train)");
    cli({"gen-corpus", "--corpus.dir", dir + "/full", "--corpus.count", "40", "--seed", "11"},
        "gen-corpus (full)");
    cli({"pretrain-ae", "--corpus.dir", dir + "/train", "--paths.ae", dir + "/ae.params",
         "--pretrain.steps", "3000", "--seed", "11"},
        "pretrain-ae");
    cli({"train-diff", "--corpus.dir", dir + "/train", "--paths.ae", dir + "/ae.params",
         "--paths.model", dir + "/model.params", "--diff.steps", "4000", "--sched.steps",
         "100", "--diff.protocol", "block(20,10)", "--seed", "11"},
        "train-diff");
    // Held-out split: the 40-sequence corpus shares the training corpus as
    // its prefix (same seed), so skipping 32 evaluates on 8 unseen sequences.
    cli({"eval", "--eval.corpus", dir + "/full", "--eval.skip", "32", "--paths.model",
         dir + "/model.params", "--eval.out", dir + "/report.txt", "--eval.observe", "20",
         "--eval.predict", "10", "--sched.steps", "100", "--seed", "11"},
        "eval");
}

std::string criterion_end_to_end(const std::string& dir) {
    auto start = std::chrono::steady_clock::now();
    run_pipeline(dir + "/run1");

    // (a) Both losses decrease between the first and last 50-step windows.
    for (const char* name : {"/run1/ae.params.loss", "/run1/model.params.loss"}) {
        std::vector<double> h = read_loss_history(dir + name);
        double head = window_mean(h, true, 50), tail = window_mean(h, false, 50);
        ensure(head > tail, std::string(name) + fmt(": first window %.4f <= last %.4f",
                                                    head, tail));
    }

    // (b) On held-out observe-20/predict-10 gaps, the model beats pure
    // harmonic padding on gap MPJPE, and harmonic init beats zero init on
    // whole-sequence DTW.
    std::map<std::string, double> rows = read_report(dir + "/run1/report.txt");
    auto row = [&](const std::string& key) {
        ensure(rows.count(key) != 0, "report lacks row " + key);
        return rows[key];
    };
    double model_mpjpe = row("padding.eq8.refine-all.mpjpe");
    double padding_mpjpe = row("baseline.eq8.mpjpe");
    ensure(model_mpjpe <= padding_mpjpe,
           fmt("gap mpjpe %.4f exceeds padding-only %.4f", model_mpjpe, padding_mpjpe));
    double eq8_dtw = row("padding.eq8.refine-all.dtw");
    double none_dtw = row("padding.none.refine-all.dtw");
    ensure(eq8_dtw < none_dtw, fmt("eq8 dtw %.4f not below none dtw %.4f", eq8_dtw, none_dtw));

    // (c) The rerun reproduces every artifact byte for byte.
    run_pipeline(dir + "/run2");
    for (const char* name : {"ae.params", "ae.params.loss", "model.params",
                             "model.params.loss", "report.txt"}) {
        ensure(testutil::read_text(dir + "/run1/" + name) ==
                   testutil::read_text(dir + "/run2/" + name),
               std::string("rerun differs in ") + name);
    }

    double elapsed = seconds_since(start);
    ensure(elapsed <= 600.0, fmt("took %.0fs, limit 600s", elapsed));
    return fmt("mpjpe %.3f <= padded %.3f; ", model_mpjpe, padding_mpjpe) +
           fmt("dtw %.4f < %.4f; ", eq8_dtw, none_dtw) + fmt("deterministic; %.0fs", elapsed);
}

// ------------------------------------------------------------- criterion 7

std::string criterion_report_grid(const std::string& report_path) {
    ensure(fs::exists(report_path), "pipeline report was not produced");
    std::map<std::string, double> rows = read_report(report_path);
    auto present = [&](const std::string& key) {
        ensure(rows.count(key) != 0, "report lacks row " + key);
        ensure(std::isfinite(rows[key]), "report row " + key + " is not finite");
    };
    int grid = 0;
    for (const std::string strat : {"none", "front", "linear", "back"}) {
        for (const std::string mode : {"refine-all", "hard-replace"})
            for (const std::string metric : {"mpjpe", "dtw", "dtw_raw", "frechet"}) {
                present("padding." + strat + "." + mode + "." + metric);
                ++grid;
            }
        for (const std::string metric : {"mpjpe", "dtw", "dtw_raw", "frechet"})
            present("baseline." + strat + "." + metric);
    }
    for (const std::string ratio : {"0.1", "0.3", "0.5"})
        for (const std::string metric : {"mpjpe", "dtw", "frechet"})
            present("maskratio." + ratio + "." + metric);
    present("default_mask_ratio");
    ensure(rows["default_mask_ratio"] == 0.3,
           fmt("default_mask_ratio %.2f != 0.3", rows["default_mask_ratio"]));
    return fmt("%g strategy/mode rows, 9 mask-ratio rows, default r=0.3", double(grid));
}

}  // namespace

int main() {
    // The pipeline must see only its pinned seeds.
    ::unsetenv("POSESTITCH_SEED");
    testutil::TempDir work("accept");

    int failures = 0;
    failures += run_criterion(1, "gradient correctness of all network losses",
                              criterion_gradients);
    failures += run_criterion(2, "noise schedule and sampler identities",
                              criterion_diffusion_identities);
    failures += run_criterion(3, "harmonic padding matches brute force",
                              criterion_padding_oracle);
    failures += run_criterion(4, "metric oracles (dtw, frechet, mpjpe)",
                              criterion_metric_oracles);
    failures += run_criterion(5, "mask protocols (block and uniform)",
                              criterion_mask_protocol);
    failures += run_criterion(6, "end-to-end training, held-out gaps, determinism",
                              [&] { return criterion_end_to_end(work.path.string()); });
    failures += run_criterion(7, "evaluation grid covers strategies, modes, ratios", [&] {
        return criterion_report_grid(work.path.string() + "/run1/report.txt");
    });

    if (failures == 0) std::printf("all 7 criteria passed\n");
    return failures;
}
