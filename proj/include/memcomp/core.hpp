#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

namespace memcomp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A parameter vector fell outside the family's cleared domain.
class ParameterOutOfRange : public Error {
  public:
    using Error::Error;
};

/// A caller-supplied argument violates an operation's precondition.
class ArgumentError : public Error {
  public:
    using Error::Error;
};

/// A model assumption (PSD covariance, positive definite J) does not hold.
class ModelAssumptionError : public Error {
  public:
    using Error::Error;
};

/// A rejection sampler could not produce a draw inside the domain.
class SamplingFailure : public Error {
  public:
    using Error::Error;
};

/// Quadrature failed to converge or the request is beyond what it supports.
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// The strictly lossless regime was requested from an almost-lossless formula.
class InfinitePenalty : public Error {
  public:
    using Error::Error;
};

inline constexpr double kLn2 = std::numbers::ln2;
inline constexpr double kLog2E = std::numbers::log2e;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kE = std::numbers::e;

/// -p log2 p with the 0 log 0 = 0 convention.
inline double plogp(double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; }

/// Shannon entropy in bits of a probability vector.
inline double shannon_entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs) h += plogp(p);
    return h;
}

/// log(sum(exp(v))) in natural log units; -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

/// Number formatting shared by all CSV and JSON output (printf "%.12g").
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
    return buf;
}

}  // namespace memcomp
