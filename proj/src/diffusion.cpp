#include "posestitch/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace posestitch {

void NoiseSchedule::validate() const {
    if (T < 1) throw Error("schedule: T must be at least 1");
    if (int(a.size()) != T || int(A.size()) != T || int(reverse_variance.size()) != T)
        throw Error("schedule: array lengths disagree with T");
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
        double at = retention(t);
        if (!(at > 0.0 && at <= 1.0)) throw Error("schedule: retention outside (0,1]");
        if (std::abs(cumulative(t) - prev * at) > 1e-12)
            throw Error("schedule: cumulative product inconsistent");
        if (cumulative(t) > prev) throw Error("schedule: cumulative retention increased");
        if (variance(t) < 0.0) throw Error("schedule: negative reverse variance");
        prev = cumulative(t);
    }
    if (prev >= 0.05) throw Error("schedule: terminal retention too high");
}

NoiseSchedule make_schedule(int T, const std::string& kind) {
    if (T < 1) throw Error("make_schedule: T must be at least 1");
    if (kind != "linear-vp") throw Error("make_schedule: unknown kind '" + kind + "'");

    const double beta_cap = 0.9999;
    std::vector<double> base(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
        double frac = T == 1 ? 1.0 : double(t - 1) / double(T - 1);
        base[std::size_t(t - 1)] = 1e-4 + (0.02 - 1e-4) * frac;
    }

    NoiseSchedule s;
    s.T = T;
    // Double the ramp until the endpoint marginal is nearly pure noise.
    for (double factor = 1.0;; factor *= 2.0) {
        s.a.assign(std::size_t(T), 0.0);
        s.A.assign(std::size_t(T), 0.0);
        double cum = 1.0;
        for (int t = 1; t <= T; ++t) {
            double beta = std::min(beta_cap, factor * base[std::size_t(t - 1)]);
            s.a[std::size_t(t - 1)] = std::sqrt(1.0 - beta);
            cum *= s.a[std::size_t(t - 1)];
            s.A[std::size_t(t - 1)] = cum;
        }
        if (cum < 0.05) break;
        if (factor > 1e18) throw Error("make_schedule: could not reach terminal noise level");
    }
    s.reverse_variance.assign(std::size_t(T), 0.0);
    for (int t = 1; t <= T; ++t) {
        double beta = 1.0 - s.retention(t) * s.retention(t);
        double Ap = s.cumulative(t - 1), At = s.cumulative(t);
        s.reverse_variance[std::size_t(t - 1)] =
            (1.0 - Ap * Ap) / (1.0 - At * At) * beta;
    }
    s.validate();
    return s;
}

MaskProtocol MaskProtocol::parse(const std::string& text) {
    MaskProtocol p;
    if (text == "uniform") {
        p.kind = Kind::Uniform;
        return p;
    }
    if (text.rfind("block(", 0) == 0 && text.back() == ')') {
        std::string inner = text.substr(6, text.size() - 7);
        auto comma = inner.find(',');
        if (comma != std::string::npos) {
            try {
                p.kind = Kind::Block;
                p.observe = std::stoi(inner.substr(0, comma));
                p.gap = std::stoi(inner.substr(comma + 1));
            } catch (const std::exception&) {
                throw Error("mask protocol: bad block lengths in '" + text + "'");
            }
            if (p.observe < 1 || p.gap < 1)
                throw Error("mask protocol: block lengths must be at least 1");
            return p;
        }
    }
    throw Error("mask protocol: expected 'uniform' or 'block(o,g)', got '" + text + "'");
}

std::string MaskProtocol::str() const {
    if (kind == Kind::Uniform) return "uniform";
    return "block(" + std::to_string(observe) + "," + std::to_string(gap) + ")";
}

FrameMask sample_mask(int frames, double ratio, const MaskProtocol& protocol, Rng& rng) {
    if (frames < 1) throw Error("sample_mask: need at least one frame");
    FrameMask mask;
    mask.length = frames;
    if (protocol.kind == MaskProtocol::Kind::Uniform) {
        if (ratio < 0.0 || ratio > 1.0) throw Error("sample_mask: ratio outside [0,1]");
        int count = int(std::floor(ratio * frames));
        std::vector<int> idx(static_cast<std::size_t>(frames));
        std::iota(idx.begin(), idx.end(), 0);
        // Partial Fisher-Yates: the first `count` entries are a uniform
        // draw without replacement.
        for (int i = 0; i < count; ++i) {
            int j = i + int(rng.below(std::uint64_t(frames - i)));
            std::swap(idx[std::size_t(i)], idx[std::size_t(j)]);
            mask.masked.insert(idx[std::size_t(i)]);
        }
    } else {
        int period = protocol.observe + protocol.gap;
        for (int f = 0; f < frames; ++f)
            if (f % period >= protocol.observe) mask.masked.insert(f);
    }
    mask.validate();
    return mask;
}

InpaintMode parse_inpaint_mode(const std::string& text) {
    if (text == "refine-all") return InpaintMode::RefineAll;
    if (text == "hard-replace") return InpaintMode::HardReplace;
    throw Error("inpaint mode: expected 'refine-all' or 'hard-replace', got '" + text + "'");
}

}  // namespace posestitch
