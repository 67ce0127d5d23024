#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>

#include "pacmdp/mdp.hpp"

namespace pacmdp {

inline constexpr double kBellmanResidualBound = 1e-10;

namespace detail {

inline Eigen::MatrixXd policy_matrix(const TabularMdp& mdp, const StationaryPolicy& policy) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s)
        for_each_successor(mdp.row(s, policy.action_of[s]), [&](int s2, double p) { P(s, s2) += p; });
    return P;
}

/// Solves (I - gamma*P) x = b by LU with one step of iterative refinement.
inline Eigen::VectorXd solve_bellman_system(const Eigen::MatrixXd& P, double gamma, const Eigen::VectorXd& b) {
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(P.rows(), P.cols()) - gamma * P;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd x = lu.solve(b);
    x += lu.solve(b - A * x);
    return x;
}

} // namespace detail

/// Exact policy evaluation: the unique fixed point of V = r + gamma*P_pi*V,
/// computed by direct linear solve. `reward_override` substitutes the reward
/// vector (used by the moment recurrence); `moment_order` tags the result.
inline ValueVector evaluate_policy(const TabularMdp& mdp, const StationaryPolicy& policy,
                                   const std::vector<double>* reward_override = nullptr,
                                   int moment_order = 0) {
    validate(mdp, policy);
    const std::vector<double>& r = reward_override ? *reward_override : mdp.rewards;
    if (static_cast<int>(r.size()) != mdp.num_states)
        throw std::invalid_argument("evaluate_policy: reward vector size mismatch");

    const Eigen::MatrixXd P = detail::policy_matrix(mdp, policy);
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(r.data(), mdp.num_states);
    const Eigen::VectorXd V = detail::solve_bellman_system(P, mdp.discount, b);

    const double residual = (V - b - mdp.discount * P * V).lpNorm<Eigen::Infinity>();
    const double scale = std::max(1.0, V.lpNorm<Eigen::Infinity>());
    if (residual > kBellmanResidualBound * scale)
        throw std::runtime_error("evaluate_policy: Bellman residual exceeds bound");

    ValueVector out;
    out.moment_order = moment_order;
    out.values.assign(V.data(), V.data() + V.size());
    return out;
}

/// Value iteration to within `tolerance` of V*, then greedy extraction and exact
/// re-evaluation of the greedy policy. The returned value is a true policy value,
/// so V_returned <= V* and V* - V_returned <= tolerance.
inline std::pair<ValueVector, StationaryPolicy> solve_optimal(const TabularMdp& mdp, double tolerance) {
    validate(mdp);
    if (!(tolerance > 0.0)) throw std::invalid_argument("solve_optimal: tolerance must be positive");
    const double gamma = mdp.discount;
    const double stop = tolerance * (1.0 - gamma) / (2.0 * gamma);

    std::vector<double> V(mdp.num_states, 0.0), next(mdp.num_states, 0.0);
    while (true) {
        double change = 0.0;
        for (int s = 0; s < mdp.num_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < mdp.num_actions; ++a) {
                double q = 0.0;
                for_each_successor(mdp.row(s, a), [&](int s2, double p) { q += p * V[s2]; });
                q = mdp.rewards[s] + gamma * q;
                best = std::max(best, q);
            }
            next[s] = best;
            change = std::max(change, std::abs(next[s] - V[s]));
        }
        V.swap(next);
        if (change <= stop) break;
    }

    StationaryPolicy policy;
    policy.action_of.resize(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        int best_a = 0;
        for (int a = 0; a < mdp.num_actions; ++a) {
            double q = 0.0;
            for_each_successor(mdp.row(s, a), [&](int s2, double p) { q += p * V[s2]; });
            q = mdp.rewards[s] + gamma * q;
            if (q > best) { best = q; best_a = a; }
        }
        policy.action_of[s] = best_a;
    }
    return {evaluate_policy(mdp, policy), policy};
}

/// Discounted occupancy weights w(s) = sum_t gamma^t P(s_t = s | s_0 = start)
/// under `policy`, by direct solve of (I - gamma*P^T) w = e_start.
inline OccupancyWeights occupancy_weights(const TabularMdp& mdp, const StationaryPolicy& policy, int start_state) {
    validate(mdp, policy);
    detail::check_state(mdp, start_state, "occupancy_weights");
    const Eigen::MatrixXd P = detail::policy_matrix(mdp, policy);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(mdp.num_states);
    e(start_state) = 1.0;
    const Eigen::VectorXd w = detail::solve_bellman_system(P.transpose(), mdp.discount, e);

    OccupancyWeights out;
    out.start_state = start_state;
    out.weights.assign(w.data(), w.data() + w.size());
    for (double& x : out.weights)
        if (x < 0.0 && x > -1e-12) x = 0.0;
    return out;
}

/// Local variance of the next-state value: sigma^2(s) = E[V(s')^2] - E[V(s')]^2
/// under p_{s,pi(s)}. Entries are clamped at zero to absorb cancellation.
inline std::vector<double> local_variance(const TabularMdp& mdp, const StationaryPolicy& policy,
                                          const ValueVector& value) {
    validate(mdp, policy);
    if (static_cast<int>(value.values.size()) != mdp.num_states)
        throw std::invalid_argument("local_variance: value dimension mismatch");
    std::vector<double> out(mdp.num_states, 0.0);
    for (int s = 0; s < mdp.num_states; ++s) {
        double first = 0.0, second = 0.0;
        for_each_successor(mdp.row(s, policy.action_of[s]), [&](int s2, double p) {
            first += p * value.values[s2];
            second += p * value.values[s2] * value.values[s2];
        });
        out[s] = std::max(0.0, second - first * first);
    }
    return out;
}

/// Moment recurrence: V_0 from the true rewards, then r_{2d+2} = sigma_d^2 and
/// V_{2d+2} by policy evaluation. `orders` must start at 0, be increasing, and
/// contain the predecessor (o-2)/2 of every nonzero entry.
inline MomentStack moment_values(const TabularMdp& mdp, const StationaryPolicy& policy,
                                 const std::vector<int>& orders) {
    if (orders.empty() || orders.front() != 0)
        throw std::invalid_argument("moment_values: order set must start at 0");
    for (std::size_t i = 1; i < orders.size(); ++i) {
        if (orders[i] <= orders[i - 1])
            throw std::invalid_argument("moment_values: order set must be strictly increasing");
        const int pred = (orders[i] - 2) / 2;
        if (orders[i] % 2 != 0 || std::find(orders.begin(), orders.end(), pred) == orders.end())
            throw std::invalid_argument("moment_values: order " + std::to_string(orders[i]) +
                                        " lacks its predecessor in the recurrence");
    }

    MomentStack stack;
    stack.orders = orders;
    std::vector<double> reward = mdp.rewards;
    for (std::size_t i = 0; i < orders.size(); ++i) {
        const int d = orders[i];
        ValueVector vd = evaluate_policy(mdp, policy, &reward, d);
        std::vector<double> var = local_variance(mdp, policy, vd);
        stack.values_by_order.push_back(std::move(vd));
        stack.variances_by_order.push_back(var);
        reward = std::move(var); // becomes r_{2d+2} for the next order
    }
    return stack;
}

/// Both sides of the value-difference identity
///   V_a(start) - V_b(start) = gamma * sum_s w_a(s) (p_a - p_b)_{s,pi} . V_b
/// computed independently (lhs by two evaluations, rhs by occupancy + dot products).
inline std::pair<double, double> value_difference_decomposition(const TabularMdp& mdp_a, const TabularMdp& mdp_b,
                                                                const StationaryPolicy& policy, int start_state) {
    if (mdp_a.num_states != mdp_b.num_states || mdp_a.num_actions != mdp_b.num_actions ||
        mdp_a.rewards != mdp_b.rewards || mdp_a.discount != mdp_b.discount)
        throw std::invalid_argument("value_difference_decomposition: MDPs differ outside transitions");
    detail::check_state(mdp_a, start_state, "value_difference_decomposition");

    const ValueVector va = evaluate_policy(mdp_a, policy);
    const ValueVector vb = evaluate_policy(mdp_b, policy);
    const double lhs = va.values[start_state] - vb.values[start_state];

    const OccupancyWeights wa = occupancy_weights(mdp_a, policy, start_state);
    double rhs = 0.0;
    for (int s = 0; s < mdp_a.num_states; ++s) {
        const int a = policy.action_of[s];
        double dot = 0.0;
        for_each_successor(mdp_a.row(s, a), [&](int s2, double p) { dot += p * vb.values[s2]; });
        for_each_successor(mdp_b.row(s, a), [&](int s2, double p) { dot -= p * vb.values[s2]; });
        rhs += wa.weights[s] * dot;
    }
    rhs *= mdp_a.discount;
    return {lhs, rhs};
}

} // namespace pacmdp
