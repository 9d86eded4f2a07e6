#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace lowrank {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Raised when an input violates a structural or semantic contract.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a model does not induce a stochastic transition kernel.
class InvalidModelError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Raised for inconsistent algorithm configuration (e.g. an infinite omega).
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Raised when an iterative solver exceeds its iteration budget.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised on file-system failures; the message carries the offending path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A real number that may be +infinity, kept as a tag so that infinity never
/// enters linear algebra.
class ExtendedReal {
public:
    constexpr ExtendedReal() = default;
    constexpr explicit ExtendedReal(double v) : value_(v) {}

    static constexpr ExtendedReal infinity() {
        ExtendedReal r;
        r.infinite_ = true;
        return r;
    }

    [[nodiscard]] constexpr bool is_infinite() const { return infinite_; }
    [[nodiscard]] constexpr bool is_finite() const { return !infinite_; }

    [[nodiscard]] double value() const {
        if (infinite_) throw std::logic_error("ExtendedReal: value() on infinity");
        return value_;
    }

    /// Float view for reporting only.
    [[nodiscard]] double to_double() const {
        return infinite_ ? std::numeric_limits<double>::infinity() : value_;
    }

    friend constexpr bool operator<=(const ExtendedReal& a, const ExtendedReal& b) {
        if (b.infinite_) return true;
        if (a.infinite_) return false;
        return a.value_ <= b.value_;
    }

private:
    double value_ = 0.0;
    bool infinite_ = false;
};

/// Uniform draw on [0, 1) with 53 random bits; independent of the standard
/// library's distribution implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::size_t n, Rng& rng) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

/// Inverse-CDF categorical draw. Trailing zero-probability entries are never
/// returned even when round-off leaves the cumulative sum short of one.
template <typename Probs>
std::size_t sample_categorical(const Probs& probs, Rng& rng) {
    const auto n = static_cast<std::size_t>(probs.size());
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = probs[static_cast<Eigen::Index>(i)];
        if (p > 0.0) last_positive = i;
        acc += p;
        if (u < acc) return i;
    }
    return last_positive;
}

inline Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }
inline Eigen::Index idx(int i) { return static_cast<Eigen::Index>(i); }

}  // namespace lowrank
