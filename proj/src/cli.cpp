#include "posestitch/cli.hpp"

#include "posestitch/config.hpp"
#include "posestitch/diffusion.hpp"
#include "posestitch/metrics.hpp"
#include "posestitch/model.hpp"
#include "posestitch/params.hpp"
#include "posestitch/pose.hpp"
#include "posestitch/render.hpp"
#include "posestitch/stitch.hpp"
#include "posestitch/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace posestitch {

namespace fs = std::filesystem;

namespace {

// ----------------------------------------------------------------- helpers

NetworkConfig network_config_from(const RunConfig& cfg, int input_dim) {
    NetworkConfig net;
    net.input_dim = input_dim;
    net.latent_dim = int(cfg.get_int("net.latent_dim", 64));
    net.head_count = int(cfg.get_int("net.head_count", 4));
    net.feed_forward_dim = int(cfg.get_int("net.feed_forward_dim", 128));
    net.encoder_layers = int(cfg.get_int("net.encoder_layers", 2));
    net.decoder_layers = int(cfg.get_int("net.decoder_layers", 2));
    net.denoiser_blocks = int(cfg.get_int("net.denoiser_blocks", 2));
    net.max_sequence_length = int(cfg.get_int("net.max_sequence_length", 256));
    net.validate();
    return net;
}

NoiseSchedule schedule_from(const RunConfig& cfg) {
    return make_schedule(int(cfg.get_int("sched.steps", 100)),
                         cfg.get_str("sched.kind", "linear-vp"));
}

CorpusConfig corpus_config_from(const RunConfig& cfg) {
    CorpusConfig c;
    c.skeleton = Skeleton::chain(int(cfg.get_int("corpus.joints", 5)));
    c.sequence_count = int(cfg.get_int("corpus.count", 32));
    c.frames_per_sequence = int(cfg.get_int("corpus.frames", 60));
    c.keypose_count = int(cfg.get_int("corpus.keyposes", 4));
    c.pool_size = int(cfg.get_int("corpus.pool", 12));
    c.trajectory = parse_trajectory(cfg.get_str("corpus.trajectory", "smoothstep"));
    c.noise_amplitude = cfg.get_double("corpus.noise", 0.01);
    c.seed = cfg.seed();
    c.validate();
    return c;
}

std::vector<PoseSequence> load_corpus_dir(const std::string& dir) {
    std::vector<std::string> files;
    fs::path manifest = fs::path(dir) / "manifest.txt";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        std::string line;
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            std::string key, value;
            if (ls >> key >> value && key == "file")
                files.push_back((fs::path(dir) / value).string());
        }
    } else {
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".poseseq") files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
    }
    if (files.empty()) throw Error("corpus: no sequences found in '" + dir + "'");
    std::vector<PoseSequence> corpus;
    corpus.reserve(files.size());
    for (const auto& f : files) corpus.push_back(load_pose_sequence(f));
    return corpus;
}

void write_loss_history(const std::string& path, const std::vector<double>& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    for (double v : history) out << format_coord(v) << "\n";
}

double mask_ratio_from(const RunConfig& cfg) {
    double r = cfg.get_double("diff.mask_ratio", 0.3);
    if (r < 0.0 || r > 1.0) throw ConfigError("diff.mask_ratio", "must lie in [0,1]");
    return r;
}

std::uint64_t per_item_seed(std::uint64_t base, int item) {
    return base * 1000003ull + std::uint64_t(item) * 8191ull + 1ull;
}

// ---------------------------------------------------------------- commands

int cmd_gen_corpus(const RunConfig& cfg) {
    CorpusConfig corpus_cfg = corpus_config_from(cfg);
    std::string dir = cfg.require_str("corpus.dir");
    auto corpus = generate_corpus(corpus_cfg);
    fs::create_directories(dir);
    std::ostringstream manifest;
    manifest << "joints " << corpus_cfg.skeleton.joint_count << "\n"
             << "sequences " << corpus_cfg.sequence_count << "\n"
             << "frames " << corpus_cfg.frames_per_sequence << "\n"
             << "keyposes " << corpus_cfg.keypose_count << "\n"
             << "pool " << corpus_cfg.pool_size << "\n"
             << "trajectory " << trajectory_name(corpus_cfg.trajectory) << "\n"
             << "noise " << format_coord(corpus_cfg.noise_amplitude) << "\n"
             << "seed " << corpus_cfg.seed << "\n";
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "seq_%04zu.poseseq", i);
        save_pose_sequence(corpus[i], (fs::path(dir) / name).string());
        manifest << "file " << name << "\n";
    }
    std::ofstream mf(fs::path(dir) / "manifest.txt", std::ios::binary);
    if (!mf) throw Error("cannot write manifest in '" + dir + "'");
    mf << manifest.str();
    std::cout << "wrote " << corpus.size() << " sequences to " << dir << "\n";
    return 0;
}

int cmd_pretrain_ae(const RunConfig& cfg) {
    cfg.require_path_exists("corpus.dir");
    std::string out = cfg.require_str("paths.ae");
    auto corpus = load_corpus_dir(cfg.require_str("corpus.dir"));
    NetworkConfig net = network_config_from(cfg, int(corpus.front().frames.cols()));
    TrainOptions opts;
    opts.steps = cfg.get_int("pretrain.steps", 500);
    opts.batch_size = int(cfg.get_int("pretrain.batch", 4));
    opts.learning_rate = cfg.get_double("pretrain.lr", 1e-3);
    auto result = pretrain_autoencoder<float>(corpus, net, opts, cfg.seed());
    save_params(result.params, out);
    write_loss_history(out + ".loss", result.loss_history);
    std::cout << "wrote " << out << " (final loss " << format_coord(result.final_loss) << ")\n";
    return 0;
}

int cmd_train_diff(const RunConfig& cfg) {
    cfg.require_path_exists("corpus.dir");
    cfg.require_path_exists("paths.ae");
    std::string out = cfg.require_str("paths.model");
    auto corpus = load_corpus_dir(cfg.require_str("corpus.dir"));
    auto ae = load_params<float>(cfg.require_str("paths.ae"));
    NetworkConfig net = config_from_params(ae);
    NoiseSchedule sched = schedule_from(cfg);
    double ratio = mask_ratio_from(cfg);
    MaskProtocol protocol = MaskProtocol::parse(cfg.get_str("diff.protocol", "uniform"));
    TrainOptions opts;
    opts.steps = cfg.get_int("diff.steps", 1500);
    opts.batch_size = int(cfg.get_int("diff.batch", 4));
    opts.learning_rate = cfg.get_double("diff.lr", 1e-3);
    auto result = train_diffusion<float>(corpus, ae, net, sched, ratio, protocol, opts,
                                         cfg.seed());
    save_params(result.params, out);
    write_loss_history(out + ".loss", result.loss_history);
    std::cout << "wrote " << out << " (final loss " << format_coord(result.final_loss) << ")\n";
    return 0;
}

int cmd_stitch(const RunConfig& cfg) {
    cfg.require_path_exists("stitch.segments");
    cfg.require_path_exists("paths.model");
    std::string out = cfg.require_str("stitch.out");

    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(cfg.require_str("stitch.segments")))
        if (entry.path().extension() == ".poseseq") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    SegmentList list;
    for (const auto& f : files) list.segments.push_back(load_pose_sequence(f));
    list.gap_length = int(cfg.get_int("stitch.gap", 10));

    auto params = load_params<float>(cfg.require_str("paths.model"));
    NoiseSchedule sched = schedule_from(cfg);
    PadStrategy strategy = parse_pad_strategy(cfg.get_str("stitch.strategy", "eq8"));
    InpaintMode mode = parse_inpaint_mode(cfg.get_str("stitch.mode", "refine-all"));
    StitchResult result = stitch(list, params, params, sched, strategy, mode, cfg.seed());
    save_pose_sequence(result.pose, out);
    std::cout << "wrote " << out << " (" << result.pose.frame_count() << " frames, "
              << list.segments.size() << " segments)\n";
    return 0;
}

struct MetricAccumulator {
    double mpjpe_sum = 0.0, dtw_sum = 0.0, dtw_raw_sum = 0.0;
    int count = 0;
    std::vector<Matd> latents;

    void add(double mp, const DtwResult& d, Matd latent) {
        mpjpe_sum += mp;
        dtw_sum += d.normalized;
        dtw_raw_sum += d.raw;
        latents.push_back(std::move(latent));
        ++count;
    }
};

int cmd_eval(const RunConfig& cfg) {
    cfg.require_path_exists("eval.corpus");
    cfg.require_path_exists("paths.model");
    std::string out = cfg.require_str("eval.out");

    auto corpus = load_corpus_dir(cfg.require_str("eval.corpus"));
    // eval.skip drops the leading sequences, so one corpus can serve as a
    // train/eval split: train on a prefix, evaluate on the held-out tail.
    long skip = cfg.get_int("eval.skip", 0);
    if (skip < 0) throw ConfigError("eval.skip", "must be nonnegative");
    if (std::size_t(skip) >= corpus.size())
        throw ConfigError("eval.skip", "skips the whole corpus");
    corpus.erase(corpus.begin(), corpus.begin() + skip);
    long limit = cfg.get_int("eval.count", 0);
    if (limit > 0 && std::size_t(limit) < corpus.size()) corpus.resize(std::size_t(limit));

    auto params = load_params<float>(cfg.require_str("paths.model"));
    NetworkConfig net = config_from_params(params);
    NoiseSchedule sched = schedule_from(cfg);
    const int observe = int(cfg.get_int("eval.observe", 20));
    const int predict = int(cfg.get_int("eval.predict", 10));
    if (observe < 1) throw ConfigError("eval.observe", "must be positive");
    if (predict < 1) throw ConfigError("eval.predict", "must be positive");
    const std::uint64_t seed = cfg.seed();

    auto encode_features = [&](const PoseSequence& seq) -> Matd {
        return encode(Matf(seq.frames.cast<float>()), params, net).cast<double>();
    };

    std::vector<Matd> ref_latents;
    for (const auto& seq : corpus) ref_latents.push_back(encode_features(seq));
    FeatureStats ref_stats = feature_stats(ref_latents);

    std::vector<std::pair<std::string, std::string>> lines;
    auto emit = [&](const std::string& key, double value) {
        lines.emplace_back(key, format_coord(value));
    };
    lines.emplace_back("eval_sequences", std::to_string(corpus.size()));
    lines.emplace_back("observe", std::to_string(observe));
    lines.emplace_back("predict", std::to_string(predict));
    emit("default_mask_ratio", 0.3);

    const std::vector<PadStrategy> strategies = {PadStrategy::None, PadStrategy::Front,
                                                 PadStrategy::Back, PadStrategy::Eq8,
                                                 PadStrategy::PureLinear};
    const std::vector<InpaintMode> modes = {InpaintMode::RefineAll, InpaintMode::HardReplace};
    // Captured for the Table-2-style "linear" alias rows (eq8 is the
    // harmonically weighted fill the source tables call linear padding).
    std::map<std::string, double> eq8_rows;

    for (PadStrategy strategy : strategies) {
        const std::string sname = pad_strategy_name(strategy);
        MetricAccumulator baseline;
        for (InpaintMode mode : modes) {
            const std::string mname =
                mode == InpaintMode::RefineAll ? "refine-all" : "hard-replace";
            MetricAccumulator acc;
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                const PoseSequence& seq = corpus[i];
                CarveResult carve = carve_protocol(seq, observe, predict);
                StitchResult res = stitch(carve.segments, params, params, sched, strategy,
                                          mode, per_item_seed(seed, int(i)));
                std::vector<int> gap_idx = res.mask.masked_indices();
                double mp = mpjpe(res.pose, seq, gap_idx, gap_idx);
                acc.add(mp, dtw(res.pose.frames, seq.frames), encode_features(res.pose));
                if (mode == InpaintMode::RefineAll) {
                    double bmp = mpjpe(res.padded, seq, gap_idx, gap_idx);
                    baseline.add(bmp, dtw(res.padded.frames, seq.frames),
                                 encode_features(res.padded));
                }
            }
            const std::string prefix = "padding." + sname + "." + mname + ".";
            double fd = frechet_distance(feature_stats(acc.latents), ref_stats);
            emit(prefix + "mpjpe", acc.mpjpe_sum / acc.count);
            emit(prefix + "dtw", acc.dtw_sum / acc.count);
            emit(prefix + "dtw_raw", acc.dtw_raw_sum / acc.count);
            emit(prefix + "frechet", fd);
            if (strategy == PadStrategy::Eq8) {
                eq8_rows["padding.linear." + mname + ".mpjpe"] = acc.mpjpe_sum / acc.count;
                eq8_rows["padding.linear." + mname + ".dtw"] = acc.dtw_sum / acc.count;
                eq8_rows["padding.linear." + mname + ".dtw_raw"] = acc.dtw_raw_sum / acc.count;
                eq8_rows["padding.linear." + mname + ".frechet"] = fd;
            }
        }
        const std::string bprefix = "baseline." + sname + ".";
        double bfd = frechet_distance(feature_stats(baseline.latents), ref_stats);
        emit(bprefix + "mpjpe", baseline.mpjpe_sum / baseline.count);
        emit(bprefix + "dtw", baseline.dtw_sum / baseline.count);
        emit(bprefix + "dtw_raw", baseline.dtw_raw_sum / baseline.count);
        emit(bprefix + "frechet", bfd);
        if (strategy == PadStrategy::Eq8) {
            eq8_rows["baseline.linear.mpjpe"] = baseline.mpjpe_sum / baseline.count;
            eq8_rows["baseline.linear.dtw"] = baseline.dtw_sum / baseline.count;
            eq8_rows["baseline.linear.dtw_raw"] = baseline.dtw_raw_sum / baseline.count;
            eq8_rows["baseline.linear.frechet"] = bfd;
        }
    }
    for (const auto& [key, value] : eq8_rows) emit(key, value);

    // Masking-ratio sweep: hide a uniform fraction of each sequence, fill
    // with the default strategy, and let the model restore the hidden frames.
    for (double ratio : {0.1, 0.3, 0.5}) {
        MetricAccumulator acc;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const PoseSequence& seq = corpus[i];
            const int F = seq.frame_count();
            std::uint64_t s = per_item_seed(seed, int(i)) + 999331ull;
            FrameMask mask = sample_mask(F, ratio, MaskProtocol{}, s);
            if (mask.masked.empty()) {
                acc.add(0.0, DtwResult{}, encode_features(seq));
                continue;
            }
            Matd padded = pad_masked_frames(seq.frames, mask, PadStrategy::Eq8);
            Matf x = padded.cast<float>();
            Matf init = encode(x, params, net);
            Matf latent = ddpm_inpaint(init, mask, params, net, sched, init,
                                       InpaintMode::RefineAll, s);
            Matf decoded = decode(latent, params, net);
            PoseSequence restored{seq.skeleton, decoded.cast<double>()};
            std::vector<int> idx = mask.masked_indices();
            acc.add(mpjpe(restored, seq, idx, idx), dtw(restored.frames, seq.frames),
                    encode_features(restored));
        }
        char label[32];
        std::snprintf(label, sizeof label, "maskratio.%.1f.", ratio);
        emit(std::string(label) + "mpjpe", acc.mpjpe_sum / acc.count);
        emit(std::string(label) + "dtw", acc.dtw_sum / acc.count);
        emit(std::string(label) + "frechet",
             frechet_distance(feature_stats(acc.latents), ref_stats));
    }

    std::ofstream rf(out, std::ios::binary);
    if (!rf) throw Error("cannot write '" + out + "'");
    for (const auto& [key, value] : lines) rf << key << " " << value << "\n";
    std::cout << "wrote " << out << " (" << lines.size() << " rows)\n";
    return 0;
}

int cmd_render(const RunConfig& cfg) {
    cfg.require_path_exists("render.in");
    std::string out_dir = cfg.require_str("render.out");
    PoseSequence seq = load_pose_sequence(cfg.require_str("render.in"));
    int n = render_sequence(seq, out_dir);
    std::cout << "wrote " << n << " frames to " << out_dir << "\n";
    return 0;
}

}  // namespace

const char* cli_usage() {
    return "usage: posestitch <command> [--config FILE] [--KEY VALUE]...\n"
           "\n"
           "commands:\n"
           "  gen-corpus   generate a synthetic pose corpus (corpus.dir)\n"
           "  pretrain-ae  pre-train the pose autoencoder (corpus.dir -> paths.ae)\n"
           "  train-diff   train the masked denoiser (paths.ae -> paths.model)\n"
           "  stitch       join segments with synthesized transitions\n"
           "               (stitch.segments, paths.model -> stitch.out)\n"
           "  eval         strategy/mode/mask-ratio metric grid on held-out data\n"
           "               (eval.corpus, paths.model -> eval.out)\n"
           "  render       one SVG per frame (render.in -> render.out)\n"
           "\n"
           "Config file holds `key = value` lines; every key can be overridden\n"
           "with --key value. POSESTITCH_SEED overrides the seed key.\n";
}

int run_cli(const std::vector<std::string>& args) {
    if (args.empty()) {
        std::cerr << cli_usage();
        return 2;
    }
    const std::string& command = args[0];
    static const std::map<std::string, int (*)(const RunConfig&)> commands = {
        {"gen-corpus", cmd_gen_corpus}, {"pretrain-ae", cmd_pretrain_ae},
        {"train-diff", cmd_train_diff}, {"stitch", cmd_stitch},
        {"eval", cmd_eval},             {"render", cmd_render},
    };
    auto cmd = commands.find(command);
    if (cmd == commands.end()) {
        std::cerr << "unknown command '" << command << "'\n\n" << cli_usage();
        return 2;
    }

    try {
        RunConfig cfg;
        // First pass for --config, then overrides in order.
        for (std::size_t i = 1; i + 1 < args.size(); i += 2)
            if (args[i] == "--config") cfg = RunConfig::load(args[i + 1]);
        for (std::size_t i = 1; i < args.size(); i += 2) {
            const std::string& flag = args[i];
            if (flag.rfind("--", 0) != 0 || flag.size() <= 2) {
                std::cerr << "malformed argument '" << flag << "'\n\n" << cli_usage();
                return 2;
            }
            if (i + 1 >= args.size()) {
                std::cerr << "missing value for '" << flag << "'\n\n" << cli_usage();
                return 2;
            }
            if (flag != "--config") cfg.set(flag.substr(2), args[i + 1]);
        }
        return cmd->second(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace posestitch
