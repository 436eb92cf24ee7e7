#pragma once

// Frame-by-frame SVG rendering: skeleton edges as line segments under an
// orthographic x-y projection, joints as dots, frame index stamped in the
// corner. One file per frame, zero-padded names (frame_000000.svg ...).

#include "posestitch/pose.hpp"

#include <string>

namespace posestitch {

// The SVG document for one frame. The viewport is fitted to the whole
// sequence so playback does not jitter.
std::string render_frame_svg(const PoseSequence& seq, int frame);

// Renders every frame into out_dir (created if missing); returns the number
// of files written.
int render_sequence(const PoseSequence& seq, const std::string& out_dir);

}  // namespace posestitch
