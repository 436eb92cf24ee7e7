#pragma once

// Pose-sequence data model and POSESEQ v1 file I/O.
//
// POSESEQ v1 is a plain 7-bit text format with LF line endings:
//   line 1:  POSESEQ 1 <F> <N>
//   line 2:  EDGES <root> <p0> <c0> <p1> <c1> ...
//   then F lines, each 3N space-separated decimals, joint-major
//   (x y z of joint 0, then joint 1, ...).
// Coordinates are written with 9 significant digits.

#include "posestitch/common.hpp"

#include <set>
#include <string>
#include <vector>

namespace posestitch {

// Joint tree. Edges are (parent, child) pairs that must form a connected
// tree over all joints.
struct Skeleton {
    int joint_count = 0;
    std::vector<std::pair<int, int>> edges;
    int root = 0;

    // Throws Error if the edge list is not a connected tree over all joints.
    void validate() const;

    bool operator==(const Skeleton& o) const {
        return joint_count == o.joint_count && edges == o.edges && root == o.root;
    }

    // Simple chain 0-1-2-...-(n-1), rooted at 0.
    static Skeleton chain(int joints);
};

// F frames of N joints in 3D, stored row-per-frame in joint-major order
// (columns 3j..3j+2 hold joint j), so the frame matrix doubles as the
// flattened F x 3N feature matrix.
struct PoseSequence {
    Skeleton skeleton;
    Matd frames;  // F x 3N

    int frame_count() const { return int(frames.rows()); }
    int joint_count() const { return skeleton.joint_count; }

    Eigen::Vector3d joint(int frame, int j) const {
        return frames.block<1, 3>(frame, 3 * j).transpose();
    }

    // Throws Error on shape mismatch, empty sequence, or non-finite values.
    void validate() const;
};

// Per-frame binary mask; `masked` holds the hidden frame indices.
struct FrameMask {
    int length = 0;
    std::set<int> masked;

    bool is_masked(int f) const { return masked.count(f) != 0; }

    std::vector<int> masked_indices() const {
        return std::vector<int>(masked.begin(), masked.end());
    }
    std::vector<int> observed_indices() const {
        std::vector<int> out;
        for (int f = 0; f < length; ++f)
            if (!is_masked(f)) out.push_back(f);
        return out;
    }

    void validate() const;
};

PoseSequence load_pose_sequence(const std::string& path);
void save_pose_sequence(const PoseSequence& seq, const std::string& path);

// Root-center every frame and divide by the sequence-mean bone length, so
// the output's mean bone length is 1. Throws on degenerate input (mean
// bone length zero or a skeleton without edges).
PoseSequence normalize(const PoseSequence& seq);

// Mean bone length over all frames and edges.
double mean_bone_length(const PoseSequence& seq);

// F x 3N feature matrix, joint-major per row. Exact inverse pair.
Matd flatten(const PoseSequence& seq);
PoseSequence unflatten(const Matd& features, const Skeleton& skeleton);

// One coordinate with 9 significant digits, shortest form ("%.9g").
std::string format_coord(double v);

}  // namespace posestitch
