#pragma once

// Variance-preserving diffusion in latent space.
//
// Forward process (one step):  z_t = a_t z_{t-1} + sqrt(1 - a_t^2) eps,
// which telescopes to          z_t = A_t z_0 + sqrt(1 - A_t^2) eps
// with A_t the running product of the a_s. The denoiser predicts the clean
// latent; the sampler converts that prediction into the posterior mean
//   mu = A_{t-1}(1-a_t^2)/(1-A_t^2) * Zhat_0 + a_t(1-A_{t-1}^2)/(1-A_t^2) * z_t
// and steps z_{t-1} = mu + sigma_t eps (no noise at t=1).
//
// Masked training draws a frame mask, noises the full latent, and asks the
// denoiser to reconstruct it given the surviving frames; inpainting runs
// the reverse chain with the same conditioning, optionally re-clamping the
// observed frames to their known values after every step.

#include "posestitch/common.hpp"
#include "posestitch/model.hpp"
#include "posestitch/pose.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace posestitch {

struct NoiseSchedule {
    int T = 0;
    std::vector<double> a;                 // retention a_t, entry t-1 holds step t
    std::vector<double> A;                 // cumulative products, same indexing
    std::vector<double> reverse_variance;  // sigma_t^2, zero at t=1

    double retention(int t) const { return a.at(std::size_t(t - 1)); }
    // Cumulative retention with the A_0 = 1 convention.
    double cumulative(int t) const { return t == 0 ? 1.0 : A.at(std::size_t(t - 1)); }
    double variance(int t) const { return reverse_variance.at(std::size_t(t - 1)); }

    // Posterior-mean weights on (clean prediction, current sample).
    std::pair<double, double> posterior_coeffs(int t) const {
        double at = retention(t), At = cumulative(t), Ap = cumulative(t - 1);
        double denom = 1.0 - At * At;
        return {Ap * (1.0 - at * at) / denom, at * (1.0 - Ap * Ap) / denom};
    }

    void validate() const;
};

// kind "linear-vp": effective betas start from a linear 1e-4..0.02 ramp and
// are doubled (capped at 0.9999) until the terminal cumulative retention
// drops below 0.05, so z_T is nearly pure noise at any T.
NoiseSchedule make_schedule(int T, const std::string& kind = "linear-vp");

namespace detail {

inline void check_t(int t, int lo, int hi, const char* what) {
    if (t < lo || t > hi)
        throw Error(std::string(what) + ": step " + std::to_string(t) + " outside " +
                    std::to_string(lo) + ".." + std::to_string(hi));
}

}  // namespace detail

template <class S>
MatX<S> q_step(const MatX<S>& z_prev, int t, const MatX<S>& noise, const NoiseSchedule& sched) {
    detail::check_t(t, 1, sched.T, "q_step");
    if (noise.rows() != z_prev.rows() || noise.cols() != z_prev.cols())
        throw Error("q_step: noise shape mismatch");
    double at = sched.retention(t);
    return S(at) * z_prev + S(std::sqrt(1.0 - at * at)) * noise;
}

// Closed-form jump to step t. Accepts t = 0 as an exact identity so callers
// can clamp observed frames with the same expression at the end of the
// reverse chain.
template <class S>
MatX<S> q_sample(const MatX<S>& z0, int t, const MatX<S>& noise, const NoiseSchedule& sched) {
    detail::check_t(t, 0, sched.T, "q_sample");
    if (t == 0) return z0;
    if (noise.rows() != z0.rows() || noise.cols() != z0.cols())
        throw Error("q_sample: noise shape mismatch");
    double At = sched.cumulative(t);
    return S(At) * z0 + S(std::sqrt(1.0 - At * At)) * noise;
}

// ---------------------------------------------------------------------------
// Frame masking

struct MaskProtocol {
    enum class Kind { Uniform, Block };
    Kind kind = Kind::Uniform;
    int observe = 0, gap = 0;  // block pattern lengths

    // "uniform" or "block(o,g)".
    static MaskProtocol parse(const std::string& text);
    std::string str() const;
};

FrameMask sample_mask(int frames, double ratio, const MaskProtocol& protocol, Rng& rng);

inline FrameMask sample_mask(int frames, double ratio, const MaskProtocol& protocol,
                             std::uint64_t seed) {
    Rng rng(seed);
    return sample_mask(frames, ratio, protocol, rng);
}

// Condition fed to the denoiser: the latent with masked rows zeroed,
// plus a trailing indicator column (1 = masked).
template <class S>
MatX<S> build_condition(const MatX<S>& latent, const FrameMask& mask) {
    if (int(latent.rows()) != mask.length)
        throw Error("build_condition: mask length disagrees with latent");
    MatX<S> cond(latent.rows(), latent.cols() + 1);
    cond.leftCols(latent.cols()) = latent;
    cond.col(latent.cols()).setZero();
    for (int f : mask.masked_indices()) {
        cond.row(f).head(latent.cols()).setZero();
        cond(f, latent.cols()) = S(1);
    }
    return cond;
}

// ---------------------------------------------------------------------------
// Masked denoiser training (encoder/decoder frozen)

template <class S>
TrainResult<S> train_diffusion(const std::vector<PoseSequence>& corpus,
                               const NamedTensors<S>& autoencoder_params,
                               const NetworkConfig& cfg, const NoiseSchedule& sched,
                               double mask_ratio, const MaskProtocol& protocol,
                               const TrainOptions& opts, std::uint64_t seed) {
    cfg.validate();
    sched.validate();
    if (corpus.empty()) throw Error("train_diffusion: empty corpus");
    require_config_match(autoencoder_params, cfg);

    TrainResult<S> result;
    result.params = autoencoder_params;
    {
        // Fresh denoiser weights; everything else is carried over untouched.
        NamedTensors<S> fresh = init_params<S>(cfg, seed);
        for (auto& [name, tensor] : fresh)
            if (name.rfind("den.", 0) == 0) result.params[name] = std::move(tensor);
    }

    Rng rng(seed + 1);
    AdamState<S> adam;
    adam.learning_rate = opts.learning_rate;
    for (long step = 0; step < opts.steps; ++step) {
        NamedTensors<S> total;
        double loss_sum = 0.0;
        try {
            for (int b = 0; b < opts.batch_size; ++b) {
                const auto& seq = corpus[rng.below(corpus.size())];
                const int F = seq.frame_count();
                MatX<S> frames = seq.frames.template cast<S>();
                MatX<S> z0 = encode(frames, result.params, cfg);
                FrameMask mask = sample_mask(F, mask_ratio, protocol, rng);
                int t = 1 + int(rng.below(std::uint64_t(sched.T)));
                MatX<S> eps = rng.normal_matrix<S>(F, cfg.latent_dim);
                MatX<S> zt = q_sample(z0, t, eps, sched);
                MatX<S> cond = build_condition(z0, mask);

                Graph<S> g(true);
                ParamCache<S> P{g, result.params};
                int pred = denoiser_graph(P, g.input(zt), t - 1, g.input(cond), cfg);
                int loss = g.mean_abs_err(pred, z0);
                loss_sum += double(g.value(loss)(0, 0));
                g.backward(loss);
                for (auto& [name, grad] : g.param_grads()) {
                    auto [it, fresh] = total.try_emplace(name, grad);
                    if (!fresh) it->second += grad;
                }
            }
        } catch (const Error&) {
            throw TrainError(step, "diffusion loss went non-finite");
        }
        double batch_loss = loss_sum / opts.batch_size;
        if (!std::isfinite(batch_loss)) throw TrainError(step, "diffusion loss went non-finite");
        for (auto& [name, grad] : total) grad /= S(opts.batch_size);
        adam_step(result.params, total, adam);
        result.loss_history.push_back(batch_loss);
    }
    if (!result.loss_history.empty()) result.final_loss = result.loss_history.back();
    return result;
}

// ---------------------------------------------------------------------------
// Conditioned reverse sampling

enum class InpaintMode { RefineAll, HardReplace };

InpaintMode parse_inpaint_mode(const std::string& text);

// Injected denoiser: (z_t, zero-based step index, condition) -> clean
// prediction. Lets tests drive the sampler with a closed-form oracle.
template <class S>
using DenoiseFn = std::function<MatX<S>(const MatX<S>&, int, const MatX<S>&)>;

// One reverse-chain update: fold the clean prediction for step t back into
// z_{t-1}. The noise term is skipped at t = 1 where the posterior variance
// is zero, so the chain ends deterministically in the prediction.
template <class S>
MatX<S> reverse_step(const MatX<S>& zhat0, const MatX<S>& z_t, int t, const MatX<S>& noise,
                     const NoiseSchedule& sched) {
    detail::check_t(t, 1, sched.T, "reverse_step");
    if (zhat0.rows() != z_t.rows() || zhat0.cols() != z_t.cols())
        throw Error("reverse_step: prediction shape disagrees with sample");
    if (noise.rows() != z_t.rows() || noise.cols() != z_t.cols())
        throw Error("reverse_step: noise shape mismatch");
    auto [c_clean, c_noisy] = sched.posterior_coeffs(t);
    MatX<S> mu = S(c_clean) * zhat0 + S(c_noisy) * z_t;
    if (t == 1) return mu;
    return mu + S(std::sqrt(sched.variance(t))) * noise;
}

// Reverse chain from t = T down to 1. `observed` supplies the conditioning
// values and, in hard-replace mode, the per-step clamp targets for observed
// frames; `init` supplies the starting values for all frames (padding for
// masked frames). The final step clamps observed frames exactly.
template <class S>
MatX<S> ddpm_inpaint(const MatX<S>& observed, const FrameMask& mask,
                     const DenoiseFn<S>& denoise, const NoiseSchedule& sched,
                     const MatX<S>& init, InpaintMode mode, std::uint64_t seed) {
    sched.validate();
    if (observed.rows() != init.rows() || observed.cols() != init.cols())
        throw Error("ddpm_inpaint: init shape disagrees with observed latent");
    if (int(observed.rows()) != mask.length)
        throw Error("ddpm_inpaint: mask length disagrees with latent");
    const auto F = observed.rows(), W = observed.cols();
    MatX<S> cond = build_condition(observed, mask);
    std::vector<int> obs = mask.observed_indices();

    Rng rng(seed);
    MatX<S> z = q_sample(init, sched.T, rng.normal_matrix<S>(F, W), sched);
    for (int t = sched.T; t >= 1; --t) {
        MatX<S> zhat0 = denoise(z, t - 1, cond);
        if (zhat0.rows() != F || zhat0.cols() != W)
            throw Error("ddpm_inpaint: denoiser output shape mismatch");
        z = reverse_step(zhat0, z, t, rng.normal_matrix<S>(F, W), sched);
        if (mode == InpaintMode::HardReplace) {
            MatX<S> clamped = q_sample(observed, t - 1, rng.normal_matrix<S>(F, W), sched);
            for (int f : obs) z.row(f) = clamped.row(f);
        }
    }
    return z;
}

template <class S>
MatX<S> ddpm_inpaint(const MatX<S>& observed, const FrameMask& mask,
                     const NamedTensors<S>& params, const NetworkConfig& cfg,
                     const NoiseSchedule& sched, const MatX<S>& init, InpaintMode mode,
                     std::uint64_t seed) {
    DenoiseFn<S> net = [&](const MatX<S>& zt, int t, const MatX<S>& c) {
        return denoise_step_net(zt, t, c, params, cfg);
    };
    return ddpm_inpaint(observed, mask, net, sched, init, mode, seed);
}

}  // namespace posestitch
