#pragma once

// Inference pipeline: join discrete pose segments into one sequence,
// initialize the gaps with a padding strategy, then let the diffusion
// model refine the gap frames in latent space.

#include "posestitch/common.hpp"
#include "posestitch/diffusion.hpp"
#include "posestitch/pose.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace posestitch {

// Gap initialization strategies. "eq8" fills with harmonically weighted
// steps f(i) = sum_{k<=i} 1/(k+1), which front-loads motion and leaves the
// gap endpoint short of the target frame; "pure-linear" is ordinary evenly
// spaced interpolation; the rest are constant fills.
enum class PadStrategy { None, Front, Back, Eq8, PureLinear };

PadStrategy parse_pad_strategy(const std::string& text);
std::string pad_strategy_name(PadStrategy s);

// G frames bridging start -> end (exclusive of both).
Matd pad_transition(const Rowd& start, const Rowd& end, int gap, PadStrategy strategy);

// Replaces every masked frame, run by run. Interior runs use the strategy
// against their two neighboring observed frames; a run touching the front
// (no left neighbor) is filled with its right neighbor, one touching the
// back with its left neighbor, and a fully masked sequence with zeros.
// "none" zero-fills regardless.
Matd pad_masked_frames(const Matd& frames, const FrameMask& mask, PadStrategy strategy);

struct SegmentList {
    std::vector<PoseSequence> segments;
    int gap_length = 10;

    void validate() const;
    int stitched_length() const;  // sum of segment lengths + gaps
};

// The concatenated sequence with gap frames filled by the strategy, plus
// the mask marking those gap frames.
std::pair<Matd, FrameMask> assemble_padded(const SegmentList& list, PadStrategy strategy);

struct StitchResult {
    PoseSequence pose;      // refined output
    PoseSequence padded;    // padding-only initialization, decoded from nothing
                            // (same frames that seeded the latent init)
    Matf init_latent;       // encoder output on the padded sequence
    Matf latent;            // latent after diffusion refinement
    FrameMask mask;         // gap frames
};

// Full pipeline. The two parameter maps may be the same object; they must
// describe the same architecture. Deterministic given the seed.
StitchResult stitch(const SegmentList& list, const NamedTensors<float>& autoencoder_params,
                    const NamedTensors<float>& denoiser_params, const NoiseSchedule& sched,
                    PadStrategy strategy = PadStrategy::Eq8,
                    InpaintMode mode = InpaintMode::RefineAll, std::uint64_t seed = 0);

}  // namespace posestitch
