#pragma once

// Sequence networks: a pose encoder/decoder pair and a conditioned denoiser,
// all small pre-norm transformers built on the Graph tape.
//
// Encoder:  F x D poses -> project to W -> positional encoding -> blocks
//           (self-attention + feed-forward) -> final norm. The normalized
//           output is the latent sequence the diffusion process runs in.
// Decoder:  mirror image, ending in a projection back to D.
// Denoiser: takes a noisy latent, a timestep, and a condition sequence of
//           width W+1 (masked latent plus a mask indicator column). Blocks
//           are self-attention + cross-attention over the projected
//           condition + feed-forward; predicts the clean latent.
//
// Parameters live in a flat NamedTensors map. The map also carries the
// architecture as 1x1 "cfg.*" entries so a checkpoint is self-describing;
// those entries are never touched by the optimizer.

#include "posestitch/autodiff.hpp"
#include "posestitch/common.hpp"
#include "posestitch/params.hpp"
#include "posestitch/pose.hpp"

#include <string>
#include <vector>

namespace posestitch {

struct NetworkConfig {
    int input_dim = 0;  // pose features per frame (3 * joint count)
    int latent_dim = 64;
    int head_count = 4;
    int feed_forward_dim = 128;
    int encoder_layers = 2;
    int decoder_layers = 2;
    int denoiser_blocks = 2;
    int max_sequence_length = 256;

    void validate() const {
        if (input_dim < 1) throw ConfigError("input_dim", "must be positive");
        if (latent_dim < 1) throw ConfigError("latent_dim", "must be positive");
        if (head_count < 1) throw ConfigError("head_count", "must be positive");
        if (latent_dim % head_count != 0)
            throw ConfigError("head_count", "must divide latent_dim");
        if (feed_forward_dim < 1) throw ConfigError("feed_forward_dim", "must be positive");
        if (encoder_layers < 1) throw ConfigError("encoder_layers", "must be positive");
        if (decoder_layers < 1) throw ConfigError("decoder_layers", "must be positive");
        if (denoiser_blocks < 1) throw ConfigError("denoiser_blocks", "must be positive");
        if (max_sequence_length < 1)
            throw ConfigError("max_sequence_length", "must be positive");
    }
};

namespace detail {

inline const std::vector<std::pair<const char*, int NetworkConfig::*>>& config_fields() {
    static const std::vector<std::pair<const char*, int NetworkConfig::*>> f = {
        {"cfg.input_dim", &NetworkConfig::input_dim},
        {"cfg.latent_dim", &NetworkConfig::latent_dim},
        {"cfg.head_count", &NetworkConfig::head_count},
        {"cfg.feed_forward_dim", &NetworkConfig::feed_forward_dim},
        {"cfg.encoder_layers", &NetworkConfig::encoder_layers},
        {"cfg.decoder_layers", &NetworkConfig::decoder_layers},
        {"cfg.denoiser_blocks", &NetworkConfig::denoiser_blocks},
        {"cfg.max_sequence_length", &NetworkConfig::max_sequence_length},
    };
    return f;
}

}  // namespace detail

template <class S>
void embed_config(NamedTensors<S>& params, const NetworkConfig& cfg) {
    for (const auto& [name, member] : detail::config_fields()) {
        MatX<S> v(1, 1);
        v(0, 0) = S(cfg.*member);
        params[name] = std::move(v);
    }
}

template <class S>
NetworkConfig config_from_params(const NamedTensors<S>& params) {
    NetworkConfig cfg;
    for (const auto& [name, member] : detail::config_fields()) {
        auto it = params.find(name);
        if (it == params.end())
            throw ConfigError(name, "missing from checkpoint");
        cfg.*member = int(it->second(0, 0));
    }
    cfg.validate();
    return cfg;
}

// Raises when a checkpoint was produced under a different architecture.
template <class S>
void require_config_match(const NamedTensors<S>& params, const NetworkConfig& cfg) {
    NetworkConfig stored = config_from_params(params);
    for (const auto& [name, member] : detail::config_fields())
        if (stored.*member != cfg.*member)
            throw ConfigError(name, "checkpoint was built with " +
                                        std::to_string(stored.*member) + ", expected " +
                                        std::to_string(cfg.*member));
}

// Standard sinusoidal table: row f, column 2i = sin(f / 10000^{2i/W}),
// column 2i+1 the matching cosine.
template <class S>
MatX<S> positional_encoding(int frames, int width) {
    MatX<S> pe(frames, width);
    for (int f = 0; f < frames; ++f)
        for (int c = 0; c < width; ++c) {
            double freq = std::pow(10000.0, -double(c - c % 2) / double(width));
            double angle = double(f) * freq;
            pe(f, c) = S(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    return pe;
}

// The same sinusoid evaluated at a single position; feeds the timestep
// projection in the denoiser.
template <class S>
MatX<S> timestep_embedding(int t, int width) {
    MatX<S> e(1, width);
    for (int c = 0; c < width; ++c) {
        double freq = std::pow(10000.0, -double(c - c % 2) / double(width));
        double angle = double(t) * freq;
        e(0, c) = S(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Parameter schema

namespace detail {

// Collects every weight shape in the model. Keeps initialization and
// structural validation in one place.
inline std::vector<std::pair<std::string, std::pair<int, int>>> parameter_shapes(
    const NetworkConfig& cfg) {
    std::vector<std::pair<std::string, std::pair<int, int>>> out;
    auto add = [&](const std::string& name, int r, int c) {
        out.emplace_back(name, std::make_pair(r, c));
    };
    const int D = cfg.input_dim, W = cfg.latent_dim, FF = cfg.feed_forward_dim;
    auto add_ln = [&](const std::string& p) {
        add(p + ".g", 1, W);
        add(p + ".b", 1, W);
    };
    auto add_attn = [&](const std::string& p) {
        add(p + ".wq", W, W);
        add(p + ".wk", W, W);
        add(p + ".wv", W, W);
        add(p + ".wo", W, W);
    };
    auto add_ff = [&](const std::string& p) {
        add(p + ".w1", W, FF);
        add(p + ".b1", 1, FF);
        add(p + ".w2", FF, W);
        add(p + ".b2", 1, W);
    };

    add("enc.in.w", D, W);
    add("enc.in.b", 1, W);
    for (int l = 0; l < cfg.encoder_layers; ++l) {
        std::string p = "enc.l" + std::to_string(l);
        add_ln(p + ".ln1");
        add_attn(p + ".attn");
        add_ln(p + ".ln2");
        add_ff(p + ".ff");
    }
    add_ln("enc.lnf");

    add("dec.in.w", W, W);
    add("dec.in.b", 1, W);
    for (int l = 0; l < cfg.decoder_layers; ++l) {
        std::string p = "dec.l" + std::to_string(l);
        add_ln(p + ".ln1");
        add_attn(p + ".attn");
        add_ln(p + ".ln2");
        add_ff(p + ".ff");
    }
    add_ln("dec.lnf");
    add("dec.out.w", W, D);
    add("dec.out.b", 1, D);

    add("den.in.w", W, W);
    add("den.in.b", 1, W);
    add("den.t.w", W, W);
    add("den.t.b", 1, W);
    add("den.cond.w", W + 1, W);
    add("den.cond.b", 1, W);
    for (int b = 0; b < cfg.denoiser_blocks; ++b) {
        std::string p = "den.b" + std::to_string(b);
        add_ln(p + ".ln1");
        add_attn(p + ".self");
        add_ln(p + ".ln2");
        add_attn(p + ".cross");
        add_ln(p + ".ln3");
        add_ff(p + ".ff");
    }
    add_ln("den.lnf");
    add("den.out.w", W, W);
    add("den.out.b", 1, W);
    return out;
}

}  // namespace detail

// Seeded initialization: weight matrices uniform in +-sqrt(6/(fan_in+fan_out)),
// normalization gains 1, every bias 0. Also embeds the cfg.* entries.
template <class S>
NamedTensors<S> init_params(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    NamedTensors<S> params;
    for (const auto& [name, shape] : detail::parameter_shapes(cfg)) {
        auto [rows, cols] = shape;
        MatX<S> t(rows, cols);
        std::string leaf = name.substr(name.rfind('.') + 1);
        bool is_gain = leaf == "g";
        bool is_bias = !leaf.empty() && leaf[0] == 'b';
        if (is_gain) {
            t.setOnes();
        } else if (is_bias) {
            t.setZero();
        } else {
            double limit = std::sqrt(6.0 / double(rows + cols));
            for (Eigen::Index i = 0; i < t.rows(); ++i)
                for (Eigen::Index j = 0; j < t.cols(); ++j)
                    t(i, j) = S(rng.uniform(-limit, limit));
        }
        params[name] = std::move(t);
    }
    embed_config(params, cfg);
    return params;
}

// ---------------------------------------------------------------------------
// Graph builders (shared by training and inference paths)

// Hands out node ids for named parameters, registering each name once so
// gradients from repeated uses accumulate on a single node.
template <class S>
struct ParamCache {
    Graph<S>& g;
    const NamedTensors<S>& tensors;

    ParamCache(Graph<S>& graph, const NamedTensors<S>& t) : g(graph), tensors(t) {}

    int operator()(const std::string& name) {
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        auto jt = tensors.find(name);
        if (jt == tensors.end()) throw Error("missing parameter '" + name + "'");
        int id = g.tracking() ? g.param(name, jt->second) : g.input(jt->second);
        ids_.emplace(name, id);
        return id;
    }

private:
    std::map<std::string, int> ids_;
};

namespace detail {

// Multi-head attention; queries from q_src, keys/values from kv_src
// (pass the same node for self-attention).
template <class S>
int mha_graph(ParamCache<S>& P, int q_src, int kv_src, const std::string& prefix,
              const NetworkConfig& cfg) {
    Graph<S>& g = P.g;
    int q = g.matmul(q_src, P(prefix + ".wq"));
    int k = g.matmul(kv_src, P(prefix + ".wk"));
    int v = g.matmul(kv_src, P(prefix + ".wv"));
    const int hd = cfg.latent_dim / cfg.head_count;
    std::vector<int> heads;
    heads.reserve(std::size_t(cfg.head_count));
    for (int h = 0; h < cfg.head_count; ++h) {
        int qs = g.slice_cols(q, h * hd, hd);
        int ks = g.slice_cols(k, h * hd, hd);
        int vs = g.slice_cols(v, h * hd, hd);
        heads.push_back(g.attention(qs, ks, vs));
    }
    return g.matmul(g.concat_cols(heads), P(prefix + ".wo"));
}

template <class S>
int ff_graph(ParamCache<S>& P, int x, const std::string& prefix) {
    Graph<S>& g = P.g;
    int h = g.gelu(g.add_row(g.matmul(x, P(prefix + ".w1")), P(prefix + ".b1")));
    return g.add_row(g.matmul(h, P(prefix + ".w2")), P(prefix + ".b2"));
}

template <class S>
int ln_graph(ParamCache<S>& P, int x, const std::string& prefix) {
    return P.g.layer_norm(x, P(prefix + ".g"), P(prefix + ".b"));
}

// Pre-norm block: x += Attn(LN(x)); x += FF(LN(x)).
template <class S>
int encoder_block(ParamCache<S>& P, int x, const std::string& prefix,
                  const NetworkConfig& cfg) {
    Graph<S>& g = P.g;
    int n1 = ln_graph(P, x, prefix + ".ln1");
    x = g.add(x, mha_graph(P, n1, n1, prefix + ".attn", cfg));
    x = g.add(x, ff_graph(P, ln_graph(P, x, prefix + ".ln2"), prefix + ".ff"));
    return x;
}

}  // namespace detail

// x: F x input_dim node -> F x latent_dim node.
template <class S>
int encoder_graph(ParamCache<S>& P, int x, const NetworkConfig& cfg) {
    Graph<S>& g = P.g;
    int h = g.add_row(g.matmul(x, P("enc.in.w")), P("enc.in.b"));
    h = g.add(h, g.input(positional_encoding<S>(int(g.value(x).rows()), cfg.latent_dim)));
    for (int l = 0; l < cfg.encoder_layers; ++l)
        h = detail::encoder_block(P, h, "enc.l" + std::to_string(l), cfg);
    return detail::ln_graph(P, h, "enc.lnf");
}

// z: F x latent_dim node -> F x input_dim node.
template <class S>
int decoder_graph(ParamCache<S>& P, int z, const NetworkConfig& cfg) {
    Graph<S>& g = P.g;
    int h = g.add_row(g.matmul(z, P("dec.in.w")), P("dec.in.b"));
    h = g.add(h, g.input(positional_encoding<S>(int(g.value(z).rows()), cfg.latent_dim)));
    for (int l = 0; l < cfg.decoder_layers; ++l)
        h = detail::encoder_block(P, h, "dec.l" + std::to_string(l), cfg);
    h = detail::ln_graph(P, h, "dec.lnf");
    return g.add_row(g.matmul(h, P("dec.out.w")), P("dec.out.b"));
}

// zt: F x latent_dim node; cond: F x (latent_dim + 1) node; t >= 0.
// Timestep enters as a learned projection of the sinusoid added to every
// frame row; the condition enters only through cross-attention.
template <class S>
int denoiser_graph(ParamCache<S>& P, int zt, int t, int cond, const NetworkConfig& cfg) {
    Graph<S>& g = P.g;
    if (t < 0) throw Error("denoiser: timestep index must be nonnegative");
    const int F = int(g.value(zt).rows());
    int h = g.add_row(g.matmul(zt, P("den.in.w")), P("den.in.b"));
    h = g.add(h, g.input(positional_encoding<S>(F, cfg.latent_dim)));
    int temb = g.add_row(g.matmul(g.input(timestep_embedding<S>(t, cfg.latent_dim)),
                                  P("den.t.w")),
                         P("den.t.b"));
    h = g.add_row(h, temb);
    int mem = g.add_row(g.matmul(cond, P("den.cond.w")), P("den.cond.b"));
    mem = g.add(mem, g.input(positional_encoding<S>(F, cfg.latent_dim)));
    for (int b = 0; b < cfg.denoiser_blocks; ++b) {
        std::string p = "den.b" + std::to_string(b);
        int n1 = detail::ln_graph(P, h, p + ".ln1");
        h = g.add(h, detail::mha_graph(P, n1, n1, p + ".self", cfg));
        h = g.add(h, detail::mha_graph(P, detail::ln_graph(P, h, p + ".ln2"), mem,
                                       p + ".cross", cfg));
        h = g.add(h, detail::ff_graph(P, detail::ln_graph(P, h, p + ".ln3"), p + ".ff"));
    }
    h = detail::ln_graph(P, h, "den.lnf");
    return g.add_row(g.matmul(h, P("den.out.w")), P("den.out.b"));
}

// ---------------------------------------------------------------------------
// Inference wrappers

namespace detail {

inline void check_length(Eigen::Index frames, const NetworkConfig& cfg) {
    if (frames > cfg.max_sequence_length)
        throw Error("sequence too long: " + std::to_string(frames) + " frames exceeds " +
                    std::to_string(cfg.max_sequence_length));
}

}  // namespace detail

template <class S>
MatX<S> encode(const MatX<S>& x, const NamedTensors<S>& params, const NetworkConfig& cfg) {
    detail::check_length(x.rows(), cfg);
    if (x.cols() != cfg.input_dim)
        throw Error("encode: expected " + std::to_string(cfg.input_dim) + " features, got " +
                    std::to_string(x.cols()));
    Graph<S> g(false);
    ParamCache<S> P{g, params};
    return g.value(encoder_graph(P, g.input(x), cfg));
}

template <class S>
MatX<S> decode(const MatX<S>& z, const NamedTensors<S>& params, const NetworkConfig& cfg) {
    detail::check_length(z.rows(), cfg);
    if (z.cols() != cfg.latent_dim)
        throw Error("decode: expected " + std::to_string(cfg.latent_dim) + " features, got " +
                    std::to_string(z.cols()));
    Graph<S> g(false);
    ParamCache<S> P{g, params};
    return g.value(decoder_graph(P, g.input(z), cfg));
}

template <class S>
MatX<S> denoise_step_net(const MatX<S>& zt, int t, const MatX<S>& cond,
                         const NamedTensors<S>& params, const NetworkConfig& cfg) {
    detail::check_length(zt.rows(), cfg);
    if (zt.cols() != cfg.latent_dim) throw Error("denoiser: latent width mismatch");
    if (cond.rows() != zt.rows() || cond.cols() != cfg.latent_dim + 1)
        throw Error("denoiser: condition must be F x (latent_dim + 1)");
    if (t < 0) throw Error("denoiser: timestep index must be nonnegative");
    Graph<S> g(false);
    ParamCache<S> P{g, params};
    return g.value(denoiser_graph(P, g.input(zt), t, g.input(cond), cfg));
}

// ---------------------------------------------------------------------------
// Pre-training

struct TrainOptions {
    long steps = 500;
    int batch_size = 4;
    double learning_rate = 1e-3;
};

template <class S>
struct TrainResult {
    NamedTensors<S> params;
    double final_loss = 0.0;  // last step's batch loss; 0 when no steps ran
    std::vector<double> loss_history;
};

// Reconstruction pre-training of the encoder/decoder pair. Loss is the
// per-coordinate mean absolute error of decode(encode(x)) against x,
// averaged over the batch. Deterministic given the seed; aborts with the
// step index if the loss stops being finite.
template <class S>
TrainResult<S> pretrain_autoencoder(const std::vector<PoseSequence>& corpus,
                                    const NetworkConfig& cfg, const TrainOptions& opts,
                                    std::uint64_t seed) {
    cfg.validate();
    if (corpus.empty()) throw Error("pretrain: empty corpus");
    for (const auto& seq : corpus) {
        if (seq.frames.cols() != cfg.input_dim)
            throw Error("pretrain: sequence feature width disagrees with input_dim");
        detail::check_length(seq.frames.rows(), cfg);
    }
    TrainResult<S> result;
    result.params = init_params<S>(cfg, seed);
    Rng rng(seed + 1);
    AdamState<S> adam;
    adam.learning_rate = opts.learning_rate;
    for (long step = 0; step < opts.steps; ++step) {
        NamedTensors<S> total;
        double loss_sum = 0.0;
        try {
            for (int b = 0; b < opts.batch_size; ++b) {
                const auto& seq = corpus[rng.below(corpus.size())];
                MatX<S> x = seq.frames.template cast<S>();
                Graph<S> g(true);
                ParamCache<S> P{g, result.params};
                int xin = g.input(x);
                int loss = g.mean_abs_err(decoder_graph(P, encoder_graph(P, xin, cfg), cfg), x);
                loss_sum += double(g.value(loss)(0, 0));
                g.backward(loss);
                for (auto& [name, grad] : g.param_grads()) {
                    auto [it, fresh] = total.try_emplace(name, grad);
                    if (!fresh) it->second += grad;
                }
            }
        } catch (const Error&) {
            throw TrainError(step, "pre-training loss went non-finite");
        }
        double batch_loss = loss_sum / opts.batch_size;
        if (!std::isfinite(batch_loss))
            throw TrainError(step, "pre-training loss went non-finite");
        for (auto& [name, grad] : total) grad /= S(opts.batch_size);
        adam_step(result.params, total, adam);
        result.loss_history.push_back(batch_loss);
    }
    if (!result.loss_history.empty()) result.final_loss = result.loss_history.back();
    return result;
}

}  // namespace posestitch
