#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pacmdp {

/// Transition row with at most two reachable successors: mass `plus_prob` on
/// `plus_state`, the remainder on `minus_state`.
struct TwoSupportTransition {
    int plus_state = 0;
    int minus_state = 0;
    double plus_prob = 0.0;
};

using DenseTransition = std::vector<double>;
using TransitionRow = std::variant<DenseTransition, TwoSupportTransition>;

/// Finite discounted MDP with state-dependent rewards in [0,1].
/// Transition rows are stored per (state, action), row-major in the action index.
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> rewards;            // [s]
    double discount = 0.0;                  // gamma in (0,1)
    std::vector<TransitionRow> transitions; // [s * num_actions + a]

    const TransitionRow& row(int s, int a) const { return transitions[static_cast<std::size_t>(s) * num_actions + a]; }
    TransitionRow& row(int s, int a) { return transitions[static_cast<std::size_t>(s) * num_actions + a]; }
};

struct StationaryPolicy {
    std::vector<int> action_of; // [s]
};

/// Value function vector; moment_order d tags the moment-recurrence level so the
/// bound values[s] <= (1/(1-gamma))^(d+1) can be checked.
struct ValueVector {
    std::vector<double> values;
    int moment_order = 0;
};

/// Expected discounted visit counts w(s) from a fixed start state; sums to 1/(1-gamma).
struct OccupancyWeights {
    int start_state = 0;
    std::vector<double> weights;
};

/// Value moments V_d and local variances sigma_d^2 along the recurrence
/// r_{2d+2} = sigma_d^2, for the orders listed in `orders` (increasing).
struct MomentStack {
    std::vector<int> orders;
    std::vector<ValueVector> values_by_order;
    std::vector<std::vector<double>> variances_by_order;
};

inline constexpr double kDistributionTolerance = 1e-12;

namespace detail {

inline void check_state(const TabularMdp& mdp, int s, const char* what) {
    if (s < 0 || s >= mdp.num_states)
        throw std::invalid_argument(std::string(what) + ": state index " + std::to_string(s) + " out of range");
}

inline void check_action(const TabularMdp& mdp, int a, const char* what) {
    if (a < 0 || a >= mdp.num_actions)
        throw std::invalid_argument(std::string(what) + ": action index " + std::to_string(a) + " out of range");
}

} // namespace detail

/// Applies `fn(successor, prob)` over the positive-probability entries of a row.
template <typename Fn>
void for_each_successor(const TransitionRow& row, Fn&& fn) {
    if (const auto* dense = std::get_if<DenseTransition>(&row)) {
        for (int s2 = 0; s2 < static_cast<int>(dense->size()); ++s2)
            if ((*dense)[s2] > 0.0) fn(s2, (*dense)[s2]);
    } else {
        const auto& two = std::get<TwoSupportTransition>(row);
        if (two.plus_prob > 0.0) fn(two.plus_state, two.plus_prob);
        if (two.plus_prob < 1.0) fn(two.minus_state, 1.0 - two.plus_prob);
    }
}

inline double transition_prob(const TabularMdp& mdp, int s, int a, int s2) {
    double p = 0.0;
    for_each_successor(mdp.row(s, a), [&](int t, double q) { if (t == s2) p += q; });
    return p;
}

inline bool is_two_support(const TabularMdp& mdp) {
    for (const auto& row : mdp.transitions)
        if (!std::holds_alternative<TwoSupportTransition>(row)) return false;
    return true;
}

/// Checks every structural invariant; throws std::invalid_argument on the first violation.
inline void validate(const TabularMdp& mdp) {
    if (mdp.num_states <= 0 || mdp.num_actions <= 0)
        throw std::invalid_argument("TabularMdp: num_states and num_actions must be positive");
    if (!(mdp.discount > 0.0 && mdp.discount < 1.0))
        throw std::invalid_argument("TabularMdp: discount must lie strictly inside (0,1)");
    if (static_cast<int>(mdp.rewards.size()) != mdp.num_states)
        throw std::invalid_argument("TabularMdp: rewards size mismatch");
    for (double r : mdp.rewards)
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("TabularMdp: reward outside [0,1]");
    if (mdp.transitions.size() != static_cast<std::size_t>(mdp.num_states) * mdp.num_actions)
        throw std::invalid_argument("TabularMdp: transitions size mismatch");
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            const auto& row = mdp.row(s, a);
            if (const auto* dense = std::get_if<DenseTransition>(&row)) {
                if (static_cast<int>(dense->size()) != mdp.num_states)
                    throw std::invalid_argument("TabularMdp: dense row size mismatch");
                double sum = 0.0;
                for (double p : *dense) {
                    if (p < 0.0) throw std::invalid_argument("TabularMdp: negative transition probability");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > kDistributionTolerance)
                    throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
            } else {
                const auto& two = std::get<TwoSupportTransition>(row);
                detail::check_state(mdp, two.plus_state, "TabularMdp");
                detail::check_state(mdp, two.minus_state, "TabularMdp");
                if (!(two.plus_prob >= 0.0 && two.plus_prob <= 1.0))
                    throw std::invalid_argument("TabularMdp: plus_prob outside [0,1]");
                if (two.plus_state == two.minus_state && two.plus_prob != 0.0 && two.plus_prob != 1.0)
                    throw std::invalid_argument("TabularMdp: degenerate two-support pair with interior probability");
            }
        }
    }
}

inline void validate(const TabularMdp& mdp, const StationaryPolicy& policy) {
    if (static_cast<int>(policy.action_of.size()) != mdp.num_states)
        throw std::invalid_argument("StationaryPolicy: size mismatch with MDP");
    for (int a : policy.action_of)
        if (a < 0 || a >= mdp.num_actions) throw std::invalid_argument("StationaryPolicy: action out of range");
}

// ---------------------------------------------------------------------------
// Random number generation

using Rng = std::mt19937_64;

/// Uniform double in [0,1) consuming exactly one engine draw.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Draws the next state from p_{s,a}. Advances the generator exactly once per call.
inline int sample_step(const TabularMdp& mdp, int state, int action, Rng& rng) {
    detail::check_state(mdp, state, "sample_step");
    detail::check_action(mdp, action, "sample_step");
    const double u = uniform01(rng);
    const auto& row = mdp.row(state, action);
    if (const auto* two = std::get_if<TwoSupportTransition>(&row))
        return u < two->plus_prob ? two->plus_state : two->minus_state;
    const auto& dense = std::get<DenseTransition>(row);
    double acc = 0.0;
    int last = 0;
    for (int s2 = 0; s2 < static_cast<int>(dense.size()); ++s2) {
        if (dense[s2] <= 0.0) continue;
        acc += dense[s2];
        last = s2;
        if (u < acc) return s2;
    }
    return last; // u landed in the rounding slack at the top of the CDF
}

} // namespace pacmdp
