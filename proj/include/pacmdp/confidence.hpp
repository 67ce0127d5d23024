#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pacmdp {

/// Inputs of a deviation-radius query: a probability, a sample count and the
/// log term L1 = log(2/delta1).
struct ConfidenceQuery {
    double prob = 0.0;
    long long count = 0;
    double log_term = 1.0;
};

/// Returned when count = 0: the empirical estimate is unconstrained and the
/// induced probability interval is all of [0,1].
inline constexpr double kUnconstrainedRadius = std::numeric_limits<double>::infinity();

namespace detail {

inline void check_query(const ConfidenceQuery& q) {
    if (!(q.prob >= 0.0 && q.prob <= 1.0)) throw std::invalid_argument("ConfidenceQuery: prob outside [0,1]");
    if (!(q.log_term > 0.0)) throw std::invalid_argument("ConfidenceQuery: log_term must be positive");
    if (q.count < 0) throw std::invalid_argument("ConfidenceQuery: negative count");
}

} // namespace detail

/// sqrt(L1 / (2n)); variance-free deviation bound.
inline double hoeffding_radius(const ConfidenceQuery& q) {
    detail::check_query(q);
    if (q.count == 0) return kUnconstrainedRadius;
    const double n = static_cast<double>(q.count);
    return std::sqrt(q.log_term / (2.0 * n));
}

/// sqrt(2 L1 p(1-p) / n) + 2 L1 / (3n); variance-sensitive deviation bound.
inline double bernstein_radius(const ConfidenceQuery& q) {
    detail::check_query(q);
    if (q.count == 0) return kUnconstrainedRadius;
    const double n = static_cast<double>(q.count);
    return std::sqrt(2.0 * q.log_term * q.prob * (1.0 - q.prob) / n) + 2.0 * q.log_term / (3.0 * n);
}

/// The algorithm's interval width: the better of the two bounds above.
inline double confidence_radius(const ConfidenceQuery& q) {
    detail::check_query(q);
    if (q.count == 0) return kUnconstrainedRadius;
    return std::min(bernstein_radius(q), hoeffding_radius(q));
}

/// Bound on |p - p_tilde| when both p and p_tilde lie within confidence_radius
/// of the same empirical estimate:
///   sqrt(8 L1 p(1-p)/n) + 2 (L1/n)^(3/4) + 4 L1 / (3n),
/// evaluated at p = p_tilde.
inline double combined_radius(const ConfidenceQuery& q) {
    detail::check_query(q);
    if (q.count == 0) return kUnconstrainedRadius;
    const double n = static_cast<double>(q.count);
    return std::sqrt(8.0 * q.log_term * q.prob * (1.0 - q.prob) / n) +
           2.0 * std::pow(q.log_term / n, 0.75) + 4.0 * q.log_term / (3.0 * n);
}

} // namespace pacmdp
