#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace posestitch {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using RowX = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using Matd = MatX<double>;
using Matf = MatX<float>;
using Rowd = RowX<double>;

// Base error for everything the library throws.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration problem tied to a named field; the CLI maps these to exit 1.
struct ConfigError : Error {
    std::string field;
    ConfigError(std::string f, const std::string& msg)
        : Error("config field '" + f + "': " + msg), field(std::move(f)) {}
};

// Training abort, carries the step at which the loss went non-finite.
struct TrainError : Error {
    long step;
    TrainError(long s, const std::string& msg)
        : Error(msg + " (step " + std::to_string(s) + ")"), step(s) {}
};

// Deterministic random stream. Wraps a fixed 64-bit generator with
// hand-pinned uniform/normal transforms so draws do not depend on the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller; one value per call, no caching.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    template <class S>
    MatX<S> normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        MatX<S> m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = S(normal());
        return m;
    }

private:
    std::uint64_t state_;
};

}  // namespace posestitch
