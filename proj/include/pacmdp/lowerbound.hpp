#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "pacmdp/history_policy.hpp"
#include "pacmdp/mdp.hpp"
#include "pacmdp/solve.hpp"

namespace pacmdp {

// State layout of the hard instance.
inline constexpr int kHardDelayState = 0;   // "0": absorbing-ish, no reward
inline constexpr int kHardBanditState = 1;  // "1": the embedded bandit decision
inline constexpr int kHardRewardState = 2;  // "+": reward 1
inline constexpr int kHardPenaltyState = 3; // "-": reward 0
inline constexpr int kHardStatesPerCopy = 4;

/// Parameters of the 4-state lower-bound construction. The self-loop rates
/// p = 1/(2-gamma) and q = 2-1/gamma are determined by the discount; the
/// optimal arm's edge toward the reward state is eps_star = 16*epsilon*(1-gamma).
struct HardMdpSpec {
    int num_actions = 2;
    double epsilon = 0.0;
    double discount = 0.0;
    int optimal_arm = 0;

    double p() const { return 1.0 / (2.0 - discount); }
    double q() const { return 2.0 - 1.0 / discount; }
    double eps_star() const { return 16.0 * epsilon * (1.0 - discount); }
};

inline void validate(const HardMdpSpec& spec) {
    if (spec.num_actions < 2) throw std::invalid_argument("HardMdpSpec: at least two actions required");
    if (!(spec.discount > 0.75 && spec.discount < 1.0))
        throw std::invalid_argument("HardMdpSpec: discount must lie in (3/4, 1)");
    if (!(spec.epsilon >= 0.0) || spec.eps_star() > 0.5)
        throw std::invalid_argument("HardMdpSpec: epsilon must satisfy 16*epsilon*(1-gamma) <= 1/2");
    if (spec.optimal_arm < 0 || spec.optimal_arm >= spec.num_actions)
        throw std::invalid_argument("HardMdpSpec: optimal_arm out of range");
}

/// The 4-state hard MDP: a delaying state 0 feeding a bandit state 1 whose
/// actions split mass between an almost-absorbing reward state and its
/// mirror-image penalty state. All rows are two-support.
inline TabularMdp build_hard_mdp(const HardMdpSpec& spec) {
    validate(spec);
    TabularMdp mdp;
    mdp.num_states = kHardStatesPerCopy;
    mdp.num_actions = spec.num_actions;
    mdp.discount = spec.discount;
    mdp.rewards = {0.0, 0.0, 1.0, 0.0};
    mdp.transitions.resize(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions);
    for (int a = 0; a < spec.num_actions; ++a) {
        const double eps_a = a == spec.optimal_arm ? spec.eps_star() : 0.0;
        mdp.row(kHardDelayState, a) = TwoSupportTransition{kHardDelayState, kHardBanditState, spec.p()};
        mdp.row(kHardBanditState, a) = TwoSupportTransition{kHardRewardState, kHardPenaltyState, 0.5 + eps_a};
        mdp.row(kHardRewardState, a) = TwoSupportTransition{kHardRewardState, kHardDelayState, spec.q()};
        mdp.row(kHardPenaltyState, a) = TwoSupportTransition{kHardPenaltyState, kHardDelayState, spec.q()};
    }
    validate(mdp);
    return mdp;
}

/// `optimal_arms.size()` disjoint hard copies, with each copy's reward/penalty
/// exits rerouted to the NEXT copy's delay state (cyclically). Copy i occupies
/// states [4i, 4i+4) in the layout above and keeps its own optimal arm.
inline TabularMdp chain_hard_mdps(const HardMdpSpec& spec, const std::vector<int>& optimal_arms) {
    if (optimal_arms.empty()) throw std::invalid_argument("chain_hard_mdps: at least one copy required");
    const int copies = static_cast<int>(optimal_arms.size());
    TabularMdp mdp;
    mdp.num_states = kHardStatesPerCopy * copies;
    mdp.num_actions = spec.num_actions;
    mdp.discount = spec.discount;
    mdp.rewards.assign(mdp.num_states, 0.0);
    mdp.transitions.resize(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions);
    for (int c = 0; c < copies; ++c) {
        HardMdpSpec copy_spec = spec;
        copy_spec.optimal_arm = optimal_arms[c];
        validate(copy_spec);
        const int base = kHardStatesPerCopy * c;
        const int next_base = kHardStatesPerCopy * ((c + 1) % copies);
        mdp.rewards[base + kHardRewardState] = 1.0;
        for (int a = 0; a < spec.num_actions; ++a) {
            const double eps_a = a == copy_spec.optimal_arm ? spec.eps_star() : 0.0;
            mdp.row(base + kHardDelayState, a) =
                TwoSupportTransition{base + kHardDelayState, base + kHardBanditState, spec.p()};
            mdp.row(base + kHardBanditState, a) =
                TwoSupportTransition{base + kHardRewardState, base + kHardPenaltyState, 0.5 + eps_a};
            mdp.row(base + kHardRewardState, a) =
                TwoSupportTransition{base + kHardRewardState, next_base + kHardDelayState, spec.q()};
            mdp.row(base + kHardPenaltyState, a) =
                TwoSupportTransition{base + kHardPenaltyState, next_base + kHardDelayState, spec.q()};
        }
    }
    validate(mdp);
    return mdp;
}

struct Bandit {
    std::vector<double> arm_probs;
};

/// p(a) = 1/2 everywhere except the optimal arm, which gets 1/2 + epsilon.
inline Bandit hard_bandit_instance(int num_actions, double epsilon, int optimal_arm) {
    if (num_actions < 1) throw std::invalid_argument("hard_bandit_instance: need at least one arm");
    if (!(epsilon >= 0.0 && epsilon <= 0.5)) throw std::invalid_argument("hard_bandit_instance: epsilon outside [0, 1/2]");
    if (optimal_arm < 0 || optimal_arm >= num_actions)
        throw std::invalid_argument("hard_bandit_instance: optimal_arm out of range");
    Bandit bandit;
    bandit.arm_probs.assign(num_actions, 0.5);
    bandit.arm_probs[optimal_arm] = 0.5 + epsilon;
    return bandit;
}

/// Action weights at a time the policy sits in state 0:
///   w(a) = sum_k p^k (1-p) gamma^k [pi(history 0^k 1) = a],
/// evaluated on forked copies so the live policy is untouched. The series is
/// truncated at K = ceil(log(tail_tol (1-p*gamma)/(1-p)) / log(p*gamma)), which
/// keeps the dropped tail below tail_tol; the total mass is exactly 1/2 before
/// truncation.
inline std::vector<double> action_weights(const HistoryPolicy& policy, const HardMdpSpec& spec, double tail_tol) {
    if (!(tail_tol > 0.0)) throw std::invalid_argument("action_weights: tail_tol must be positive");
    if (policy.last_state() != kHardDelayState)
        throw std::invalid_argument("action_weights: history must end in state 0");

    const double p = spec.p(), gamma = spec.discount;
    const double ratio = p * gamma;
    const double arg = tail_tol * (1.0 - ratio) / (1.0 - p);
    long long terms = 1;
    if (arg < 1.0) terms = static_cast<long long>(std::ceil(std::log(arg) / std::log(ratio)));

    std::vector<double> weights(spec.num_actions, 0.0);
    std::unique_ptr<HistoryPolicy> base = policy.fork();
    double coeff = 1.0 - p; // p^k (1-p) gamma^k at k = 0
    for (long long k = 0; k < terms; ++k) {
        std::unique_ptr<HistoryPolicy> probe = base->fork();
        const int action = probe->on_state(kHardBanditState);
        if (action < 0 || action >= spec.num_actions)
            throw std::invalid_argument("action_weights: policy returned an action out of range");
        weights[action] += coeff;
        coeff *= ratio;
        base->on_state(kHardDelayState);
    }
    return weights;
}

/// Leading constants of the nominal phase budget. The analysis does not
/// determine them; these defaults are arbitrary placeholders and experiments
/// should set the budget directly.
struct PhaseBudgetConstants {
    double c1 = 0.01;
    double c2 = 1.0;
};

/// Symbolic budget c1 * A / (eps^2 (1-gamma)^2) * log(c2 / delta).
inline double nominal_phase_budget(int num_actions, double epsilon, double delta, double discount,
                                   PhaseBudgetConstants constants = {}) {
    if (num_actions < 1) throw std::invalid_argument("nominal_phase_budget: need at least one arm");
    if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || !(discount > 0.0 && discount < 1.0))
        throw std::invalid_argument("nominal_phase_budget: parameters out of range");
    const double one_minus = 1.0 - discount;
    return constants.c1 * num_actions / (epsilon * epsilon * one_minus * one_minus) *
           std::log(constants.c2 / delta);
}

struct LearnBanditResult {
    int best_arm = 0;
    std::vector<long long> phase_votes; // per arm, how many phase starts voted for it
    long long steps = 0;
};

/// The bandit reduction: run the policy on the hard-MDP dynamics, but resolve
/// state-1 outcomes by pulling the bandit (reward 1 -> state +, else state -).
/// At each phase start the per-arm weights are measured and their argmax
/// recorded; after 2N completed phases the majority arm wins. All ties break
/// toward the lowest arm index.
inline LearnBanditResult learn_bandit(HistoryPolicy& policy, const Bandit& bandit, const HardMdpSpec& spec,
                                      long long num_phases, Rng& rng, double tail_tol = 1e-9) {
    if (num_phases < 1) throw std::invalid_argument("learn_bandit: num_phases must be at least 1");
    if (static_cast<int>(bandit.arm_probs.size()) != spec.num_actions)
        throw std::invalid_argument("learn_bandit: bandit arm count mismatch");

    LearnBanditResult result;
    result.phase_votes.assign(spec.num_actions, 0);
    const long long total_phases = 2 * num_phases;

    auto record_phase_start = [&]() {
        const std::vector<double> w = action_weights(policy, spec, tail_tol);
        int best = 0;
        for (int a = 1; a < spec.num_actions; ++a)
            if (w[a] > w[best]) best = a;
        ++result.phase_votes[best];
    };

    long long completed = 0;
    int state = kHardDelayState;
    int action = policy.on_state(state);
    record_phase_start(); // the run begins in state 0
    while (completed < total_phases) {
        int next;
        const double u = uniform01(rng);
        if (state == kHardBanditState) {
            next = u < bandit.arm_probs[action] ? kHardRewardState : kHardPenaltyState;
            ++completed;
        } else if (state == kHardDelayState) {
            next = u < spec.p() ? kHardDelayState : kHardBanditState;
        } else {
            next = u < spec.q() ? state : kHardDelayState;
        }
        ++result.steps;
        action = policy.on_state(next);
        if (next == kHardDelayState && state != kHardDelayState && completed < total_phases)
            record_phase_start();
        state = next;
    }

    int best = 0;
    for (int a = 1; a < spec.num_actions; ++a)
        if (result.phase_votes[a] > result.phase_votes[best]) best = a;
    result.best_arm = best;
    return result;
}

/// One phase of a trace on the hard MDP: the maximal run of steps in state 0
/// ending just before state 1 is entered, with the length/weight indicator
/// events attached.
struct PhaseRecord {
    int index = 0;       // 1-based
    long long start = 0; // inclusive positions into the trace (0-based)
    long long end = 0;
    long long length = 0;
    bool x_event = false; // length >= 1/(4(1-gamma))
    bool a_event = false; // length >= 1/(16(1-gamma)) and suboptimal weight >= 1/4
    double suboptimal_weight = std::numeric_limits<double>::quiet_NaN();
};

/// Segments a state trace into completed phases. `suboptimal_weights` holds
/// sum_{a != a*} w(a) at each phase start; pass an empty vector to skip the
/// weight-dependent event (it is then reported false with weight NaN).
inline std::vector<PhaseRecord> phase_statistics(const std::vector<int>& state_trace,
                                                 const std::vector<double>& suboptimal_weights,
                                                 const HardMdpSpec& spec) {
    if (state_trace.empty() || state_trace.front() != kHardDelayState)
        throw std::invalid_argument("phase_statistics: trace must begin in state 0");
    const double x_threshold = 1.0 / (4.0 * (1.0 - spec.discount));
    const double a_threshold = 1.0 / (16.0 * (1.0 - spec.discount));

    std::vector<PhaseRecord> phases;
    const long long T = static_cast<long long>(state_trace.size());
    long long pos = 0;
    while (pos < T) {
        // find the next phase start: entry into state 0
        if (state_trace[pos] != kHardDelayState ||
            (pos > 0 && state_trace[pos - 1] == kHardDelayState)) {
            ++pos;
            continue;
        }
        long long end = pos;
        while (end + 1 < T && state_trace[end + 1] == kHardDelayState) ++end;
        if (end + 1 >= T || state_trace[end + 1] != kHardBanditState) break; // phase not completed

        PhaseRecord rec;
        rec.index = static_cast<int>(phases.size()) + 1;
        rec.start = pos;
        rec.end = end;
        rec.length = end - pos + 1;
        rec.x_event = static_cast<double>(rec.length) >= x_threshold;
        if (!suboptimal_weights.empty()) {
            if (suboptimal_weights.size() < phases.size() + 1)
                throw std::invalid_argument("phase_statistics: fewer weights than phases");
            rec.suboptimal_weight = suboptimal_weights[phases.size()];
            rec.a_event = static_cast<double>(rec.length) >= a_threshold && rec.suboptimal_weight >= 0.25;
        }
        phases.push_back(rec);
        pos = end + 1;
    }
    return phases;
}

/// Exact value gap at the bandit state between the optimal arm and a fixed
/// suboptimal arm, via two exact policy evaluations. Analytically this equals
/// 32*gamma*epsilon/(4 - gamma^2).
inline double suboptimality_gap_check(const HardMdpSpec& spec, int suboptimal_action) {
    validate(spec);
    if (suboptimal_action == spec.optimal_arm)
        throw std::invalid_argument("suboptimality_gap_check: action must differ from the optimal arm");
    if (suboptimal_action < 0 || suboptimal_action >= spec.num_actions)
        throw std::invalid_argument("suboptimality_gap_check: action out of range");
    const TabularMdp mdp = build_hard_mdp(spec);
    StationaryPolicy best{std::vector<int>(mdp.num_states, spec.optimal_arm)};
    StationaryPolicy sub{std::vector<int>(mdp.num_states, suboptimal_action)};
    const ValueVector v_best = evaluate_policy(mdp, best);
    const ValueVector v_sub = evaluate_policy(mdp, sub);
    return v_best.values[kHardBanditState] - v_sub.values[kHardBanditState];
}

} // namespace pacmdp
