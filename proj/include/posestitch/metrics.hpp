#pragma once

// Coherence metrics: mean per-joint position error, dynamic time warping,
// and a Fréchet distance over frame-feature statistics. All double
// precision, all pure functions.

#include "posestitch/common.hpp"
#include "posestitch/pose.hpp"

#include <vector>

namespace posestitch {

// Mean Euclidean distance between corresponding joints, averaged over
// frames and joints. The two-subset form compares A's listed frames with
// B's (same count); the no-subset form requires equal frame counts.
double mpjpe(const PoseSequence& a, const PoseSequence& b);
double mpjpe(const PoseSequence& a, const PoseSequence& b, const std::vector<int>& frames_a,
             const std::vector<int>& frames_b);

struct DtwResult {
    double raw = 0.0;         // cumulative alignment cost
    double normalized = 0.0;  // raw / (len(A) + len(B))
};

// Classic DP alignment with Euclidean frame distance; permitted steps are
// (-1,0), (0,-1), (-1,-1), boundary to boundary.
DtwResult dtw(const Matd& a, const Matd& b);

struct FeatureStats {
    Eigen::VectorXd mean;
    Matd covariance;

    int width() const { return int(mean.size()); }
    void validate() const;  // symmetry within 1e-9, eigenvalues >= -1e-8
};

// Gaussian fit over all frames of all sequences; covariance uses the
// unbiased (n-1) denominator and is explicitly symmetrized.
FeatureStats feature_stats(const std::vector<Matd>& latents);

// ||mu_A - mu_B||^2 + Tr(S_A + S_B - 2 (S_A^{1/2} S_B S_A^{1/2})^{1/2}),
// square roots by symmetric eigendecomposition with negative eigenvalues
// clamped to zero.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

}  // namespace posestitch
