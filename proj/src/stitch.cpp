#include "posestitch/stitch.hpp"

#include "posestitch/model.hpp"

#include <algorithm>

namespace posestitch {

PadStrategy parse_pad_strategy(const std::string& text) {
    if (text == "none") return PadStrategy::None;
    if (text == "front") return PadStrategy::Front;
    if (text == "back") return PadStrategy::Back;
    if (text == "eq8") return PadStrategy::Eq8;
    if (text == "pure-linear") return PadStrategy::PureLinear;
    throw Error("padding strategy: expected one of none, front, back, eq8, pure-linear; got '" +
                text + "'");
}

std::string pad_strategy_name(PadStrategy s) {
    switch (s) {
        case PadStrategy::None: return "none";
        case PadStrategy::Front: return "front";
        case PadStrategy::Back: return "back";
        case PadStrategy::Eq8: return "eq8";
        case PadStrategy::PureLinear: return "pure-linear";
    }
    throw Error("padding strategy: bad enum value");
}

Matd pad_transition(const Rowd& start, const Rowd& end, int gap, PadStrategy strategy) {
    if (gap < 1) throw Error("pad_transition: gap must be at least 1 frame");
    if (start.cols() != end.cols()) throw Error("pad_transition: frame widths disagree");
    Matd out(gap, start.cols());
    switch (strategy) {
        case PadStrategy::None:
            out.setZero();
            break;
        case PadStrategy::Front:
            out = start.replicate(gap, 1);
            break;
        case PadStrategy::Back:
            out = end.replicate(gap, 1);
            break;
        case PadStrategy::Eq8: {
            // Harmonically weighted fill: frame i sits at (f(i)/G) of the
            // way along the difference, f(i) the (i+1)-th harmonic number.
            Rowd delta = (end - start) / double(gap);
            double f = 0.0;
            for (int i = 0; i < gap; ++i) {
                f += 1.0 / double(i + 1);
                out.row(i) = start + delta * f;
            }
            break;
        }
        case PadStrategy::PureLinear:
            for (int i = 0; i < gap; ++i)
                out.row(i) = start + (end - start) * (double(i + 1) / double(gap + 1));
            break;
    }
    return out;
}

Matd pad_masked_frames(const Matd& frames, const FrameMask& mask, PadStrategy strategy) {
    if (int(frames.rows()) != mask.length)
        throw Error("pad_masked_frames: mask length disagrees with frames");
    Matd out = frames;
    const int F = int(frames.rows());
    int i = 0;
    while (i < F) {
        if (!mask.is_masked(i)) {
            ++i;
            continue;
        }
        int run_start = i;
        while (i < F && mask.is_masked(i)) ++i;
        int run_end = i;  // exclusive
        int gap = run_end - run_start;
        bool has_left = run_start > 0, has_right = run_end < F;
        if (strategy == PadStrategy::None || (!has_left && !has_right)) {
            out.middleRows(run_start, gap).setZero();
        } else if (!has_left) {
            out.middleRows(run_start, gap) = frames.row(run_end).replicate(gap, 1);
        } else if (!has_right) {
            out.middleRows(run_start, gap) = frames.row(run_start - 1).replicate(gap, 1);
        } else {
            out.middleRows(run_start, gap) = pad_transition(
                frames.row(run_start - 1), frames.row(run_end), gap, strategy);
        }
    }
    return out;
}

void SegmentList::validate() const {
    if (segments.size() < 2) throw Error("segment list: need at least 2 segments to stitch");
    if (gap_length < 1) throw Error("segment list: gap length must be at least 1");
    const int joints = segments.front().joint_count();
    for (const auto& seg : segments) {
        seg.validate();
        if (seg.joint_count() != joints)
            throw Error("segment list: segments disagree on joint count");
    }
}

int SegmentList::stitched_length() const {
    int total = int(segments.size() - 1) * gap_length;
    for (const auto& seg : segments) total += seg.frame_count();
    return total;
}

std::pair<Matd, FrameMask> assemble_padded(const SegmentList& list, PadStrategy strategy) {
    list.validate();
    const int total = list.stitched_length();
    const auto width = list.segments.front().frames.cols();
    Matd frames = Matd::Zero(total, width);
    FrameMask mask;
    mask.length = total;
    int at = 0;
    for (std::size_t s = 0; s < list.segments.size(); ++s) {
        const Matd& seg = list.segments[s].frames;
        frames.middleRows(at, seg.rows()) = seg;
        at += int(seg.rows());
        if (s + 1 < list.segments.size()) {
            for (int g = 0; g < list.gap_length; ++g) mask.masked.insert(at + g);
            at += list.gap_length;
        }
    }
    frames = pad_masked_frames(frames, mask, strategy);
    return {std::move(frames), std::move(mask)};
}

StitchResult stitch(const SegmentList& list, const NamedTensors<float>& autoencoder_params,
                    const NamedTensors<float>& denoiser_params, const NoiseSchedule& sched,
                    PadStrategy strategy, InpaintMode mode, std::uint64_t seed) {
    NetworkConfig cfg = config_from_params(autoencoder_params);
    require_config_match(denoiser_params, cfg);

    auto [padded, mask] = assemble_padded(list, strategy);
    if (padded.cols() != cfg.input_dim)
        throw Error("stitch: segments have " + std::to_string(padded.cols()) +
                    " features per frame, model expects " + std::to_string(cfg.input_dim));
    if (int(padded.rows()) > cfg.max_sequence_length)
        throw Error("sequence too long: stitched length " + std::to_string(padded.rows()) +
                    " exceeds " + std::to_string(cfg.max_sequence_length));

    StitchResult result;
    result.mask = mask;
    result.padded = PoseSequence{list.segments.front().skeleton, padded};

    Matf x = padded.cast<float>();
    result.init_latent = encode(x, autoencoder_params, cfg);
    result.latent = ddpm_inpaint(result.init_latent, mask, denoiser_params, cfg, sched,
                                 result.init_latent, mode, seed);
    Matf decoded = decode(result.latent, autoencoder_params, cfg);
    result.pose = PoseSequence{list.segments.front().skeleton, decoded.cast<double>()};
    return result;
}

}  // namespace posestitch
