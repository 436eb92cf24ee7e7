#include "posestitch/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>

namespace posestitch {

namespace {

double frame_mpjpe(const Eigen::Ref<const Rowd>& fa, const Eigen::Ref<const Rowd>& fb) {
    const int joints = int(fa.cols()) / 3;
    double sum = 0.0;
    for (int j = 0; j < joints; ++j)
        sum += (fa.segment(3 * j, 3) - fb.segment(3 * j, 3)).norm();
    return sum / joints;
}

}  // namespace

double mpjpe(const PoseSequence& a, const PoseSequence& b) {
    if (a.frame_count() != b.frame_count())
        throw Error("mpjpe: frame counts disagree (" + std::to_string(a.frame_count()) + " vs " +
                    std::to_string(b.frame_count()) + ")");
    std::vector<int> all(static_cast<std::size_t>(a.frame_count()));
    for (int i = 0; i < a.frame_count(); ++i) all[std::size_t(i)] = i;
    return mpjpe(a, b, all, all);
}

double mpjpe(const PoseSequence& a, const PoseSequence& b, const std::vector<int>& frames_a,
             const std::vector<int>& frames_b) {
    if (a.joint_count() != b.joint_count()) throw Error("mpjpe: joint counts disagree");
    if (frames_a.size() != frames_b.size()) throw Error("mpjpe: frame subsets disagree in length");
    if (frames_a.empty()) throw Error("mpjpe: empty frame subset");
    double sum = 0.0;
    for (std::size_t i = 0; i < frames_a.size(); ++i) {
        int fa = frames_a[i], fb = frames_b[i];
        if (fa < 0 || fa >= a.frame_count() || fb < 0 || fb >= b.frame_count())
            throw Error("mpjpe: frame index out of range");
        sum += frame_mpjpe(a.frames.row(fa), b.frames.row(fb));
    }
    return sum / double(frames_a.size());
}

DtwResult dtw(const Matd& a, const Matd& b) {
    if (a.rows() == 0 || b.rows() == 0) throw Error("dtw: empty sequence");
    if (a.cols() != b.cols()) throw Error("dtw: feature widths disagree");
    const Eigen::Index n = a.rows(), m = b.rows();
    const double inf = std::numeric_limits<double>::infinity();
    Matd cost(n + 1, m + 1);
    cost.setConstant(inf);
    cost(0, 0) = 0.0;
    for (Eigen::Index i = 1; i <= n; ++i)
        for (Eigen::Index j = 1; j <= m; ++j) {
            double d = (a.row(i - 1) - b.row(j - 1)).norm();
            cost(i, j) = d + std::min({cost(i - 1, j), cost(i, j - 1), cost(i - 1, j - 1)});
        }
    DtwResult r;
    r.raw = cost(n, m);
    r.normalized = r.raw / double(n + m);
    return r;
}

void FeatureStats::validate() const {
    if (mean.size() == 0) throw Error("feature stats: empty");
    if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
        throw Error("feature stats: covariance shape disagrees with mean");
    double asym = (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9) throw Error("feature stats: covariance asymmetric beyond tolerance");
    Eigen::SelfAdjointEigenSolver<Matd> es(covariance, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8)
        throw Error("feature stats: covariance has a negative eigenvalue beyond tolerance");
}

FeatureStats feature_stats(const std::vector<Matd>& latents) {
    Eigen::Index total = 0, width = -1;
    for (const auto& l : latents) {
        if (l.rows() == 0) continue;
        if (width < 0) width = l.cols();
        if (l.cols() != width) throw Error("feature_stats: feature widths disagree");
        total += l.rows();
    }
    if (total < 2) throw Error("feature_stats: need at least 2 frames");
    Matd all(total, width);
    Eigen::Index at = 0;
    for (const auto& l : latents) {
        if (l.rows() == 0) continue;
        all.middleRows(at, l.rows()) = l;
        at += l.rows();
    }
    FeatureStats s;
    s.mean = all.colwise().mean().transpose();
    Matd centered = all.rowwise() - s.mean.transpose();
    s.covariance = centered.transpose() * centered / double(total - 1);
    s.covariance = ((s.covariance + s.covariance.transpose()) * 0.5).eval();
    return s;
}

namespace {

Matd psd_sqrt(const Matd& m) {
    Eigen::SelfAdjointEigenSolver<Matd> es(m);
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
    a.validate();
    b.validate();
    if (a.width() != b.width()) throw Error("frechet_distance: widths disagree");
    Matd ra = psd_sqrt(a.covariance);
    Matd inner = psd_sqrt(ra * b.covariance * ra);
    double mean_term = (a.mean - b.mean).squaredNorm();
    double trace_term = (a.covariance + b.covariance - 2.0 * inner).trace();
    return mean_term + trace_term;
}

}  // namespace posestitch
