#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "pacmdp/confidence.hpp"
#include "pacmdp/constants.hpp"
#include "pacmdp/mdp.hpp"
#include "pacmdp/solve.hpp"

namespace pacmdp {

/// Cumulative (n) and in-episode (v) visit counts. v folds into n at Update.
struct VisitCounts {
    int num_states = 0;
    int num_actions = 0;
    std::vector<long long> n;        // [(s,a)]
    std::vector<long long> n_triple; // [(s,a,s')]
    std::vector<long long> v;        // [(s,a)]
    std::vector<long long> v_triple; // [(s,a,s')]

    VisitCounts() = default;
    VisitCounts(int states, int actions)
        : num_states(states), num_actions(actions),
          n(static_cast<std::size_t>(states) * actions, 0),
          n_triple(static_cast<std::size_t>(states) * actions * states, 0),
          v(static_cast<std::size_t>(states) * actions, 0),
          v_triple(static_cast<std::size_t>(states) * actions * states, 0) {}

    std::size_t pair_index(int s, int a) const { return static_cast<std::size_t>(s) * num_actions + a; }
    std::size_t triple_index(int s, int a, int s2) const { return pair_index(s, a) * num_states + s2; }

    void record(int s, int a, int s2) {
        ++v[pair_index(s, a)];
        ++v_triple[triple_index(s, a, s2)];
    }
    void fold() {
        for (std::size_t i = 0; i < n.size(); ++i) { n[i] += v[i]; v[i] = 0; }
        for (std::size_t i = 0; i < n_triple.size(); ++i) { n_triple[i] += v_triple[i]; v_triple[i] = 0; }
    }
};

/// The per-(s,a) data defining the model class: designated successor pairs,
/// empirical plus-probabilities and the counts the radii are evaluated at.
struct ModelClass {
    int num_states = 0;
    int num_actions = 0;
    std::vector<TwoSupportTransition> pairs; // plus/minus states per (s,a); plus_prob unused
    std::vector<double> p_hat;               // [(s,a)]
    VisitCounts counts;
    double log_term = 0.0; // L1

    std::size_t pair_index(int s, int a) const { return static_cast<std::size_t>(s) * num_actions + a; }
};

/// Empirical model from counts: p_hat = n(s,a,sa+) / max{1, n(s,a)}.
inline ModelClass make_model_class(const TabularMdp& skeleton, const VisitCounts& counts, double log_term) {
    if (!is_two_support(skeleton))
        throw std::invalid_argument("make_model_class: skeleton must satisfy the two-successor assumption");
    ModelClass model;
    model.num_states = skeleton.num_states;
    model.num_actions = skeleton.num_actions;
    model.counts = counts;
    model.log_term = log_term;
    model.pairs.resize(static_cast<std::size_t>(skeleton.num_states) * skeleton.num_actions);
    model.p_hat.resize(model.pairs.size());
    for (int s = 0; s < skeleton.num_states; ++s) {
        for (int a = 0; a < skeleton.num_actions; ++a) {
            const auto& two = std::get<TwoSupportTransition>(skeleton.row(s, a));
            const std::size_t i = model.pair_index(s, a);
            model.pairs[i] = two;
            const long long n = counts.n[i];
            const long long n_plus = counts.n_triple[counts.triple_index(s, a, two.plus_state)];
            model.p_hat[i] = static_cast<double>(n_plus) / static_cast<double>(std::max<long long>(1, n));
        }
    }
    return model;
}

struct FeasibleInterval {
    double lo = 0.0;
    double hi = 1.0;
};

/// The connected component around p_hat of
///   { p in [0,1] : |p - p_hat| <= confidence_radius(p, n) },
/// found by bisection on each side to 1e-12. n = 0 gives [0,1].
inline FeasibleInterval feasible_interval(double p_hat, long long n, double log_term) {
    if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw std::invalid_argument("feasible_interval: p_hat outside [0,1]");
    if (n < 0) throw std::invalid_argument("feasible_interval: negative count");
    if (n == 0) return {0.0, 1.0};

    auto radius = [&](double p) { return confidence_radius({p, n, log_term}); };
    auto bisect = [](double feasible, double infeasible, auto&& ok) {
        for (int i = 0; i < 80; ++i) {
            const double mid = 0.5 * (feasible + infeasible);
            (ok(mid) ? feasible : infeasible) = mid;
            if (std::abs(feasible - infeasible) < 1e-13) break;
        }
        return feasible;
    };

    FeasibleInterval out;
    auto hi_ok = [&](double p) { return p - p_hat <= radius(p); };
    out.hi = hi_ok(1.0) ? 1.0 : bisect(p_hat, 1.0, hi_ok);
    auto lo_ok = [&](double p) { return p_hat - p <= radius(p); };
    out.lo = lo_ok(0.0) ? 0.0 : bisect(p_hat, 0.0, lo_ok);
    return out;
}

struct EviResult {
    TabularMdp optimistic_mdp;
    ValueVector value; // exact evaluation of `policy` in `optimistic_mdp`
    StationaryPolicy policy;
};

/// Extended value iteration over the two-support confidence set. Each backup
/// puts the plus-probability at the interval endpoint favouring the larger of
/// V(sa+), V(sa-) (ties to hi), iterating until the successive change falls
/// below tolerance*(1-gamma)/(2*gamma). The MDP assembled from the final
/// choices is returned with the greedy policy (ties to the lowest action) and
/// its exact evaluation.
inline EviResult extended_value_iteration(const ModelClass& model, const TabularMdp& skeleton, double tolerance) {
    if (!(tolerance > 0.0)) throw std::invalid_argument("extended_value_iteration: tolerance must be positive");
    if (skeleton.num_states != model.num_states || skeleton.num_actions != model.num_actions)
        throw std::invalid_argument("extended_value_iteration: skeleton/model shape mismatch");
    const double gamma = skeleton.discount;
    const int S = skeleton.num_states, A = skeleton.num_actions;

    std::vector<FeasibleInterval> intervals(model.pairs.size());
    for (std::size_t i = 0; i < intervals.size(); ++i)
        intervals[i] = feasible_interval(model.p_hat[i], model.counts.n[i], model.log_term);

    auto optimistic_prob = [&](std::size_t i, const std::vector<double>& V) {
        const auto& pair = model.pairs[i];
        return V[pair.plus_state] >= V[pair.minus_state] ? intervals[i].hi : intervals[i].lo;
    };

    const double stop = tolerance * (1.0 - gamma) / (2.0 * gamma);
    std::vector<double> V(S, 0.0), next(S, 0.0);
    while (true) {
        double change = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                const std::size_t i = model.pair_index(s, a);
                const auto& pair = model.pairs[i];
                const double p = optimistic_prob(i, V);
                const double q = skeleton.rewards[s] +
                                 gamma * (p * V[pair.plus_state] + (1.0 - p) * V[pair.minus_state]);
                best = std::max(best, q);
            }
            next[s] = best;
            change = std::max(change, std::abs(next[s] - V[s]));
        }
        V.swap(next);
        if (change <= stop) break;
    }

    EviResult result;
    result.optimistic_mdp = skeleton;
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const std::size_t i = model.pair_index(s, a);
            auto pair = model.pairs[i];
            pair.plus_prob = optimistic_prob(i, V);
            if (pair.plus_state == pair.minus_state) pair.plus_prob = 1.0;
            result.optimistic_mdp.row(s, a) = pair;
        }
    }
    result.policy.action_of.resize(S);
    for (int s = 0; s < S; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        int best_a = 0;
        for (int a = 0; a < A; ++a) {
            const auto& pair = std::get<TwoSupportTransition>(result.optimistic_mdp.row(s, a));
            const double q = skeleton.rewards[s] +
                             gamma * (pair.plus_prob * V[pair.plus_state] +
                                      (1.0 - pair.plus_prob) * V[pair.minus_state]);
            if (q > best) { best = q; best_a = a; }
        }
        result.policy.action_of[s] = best_a;
    }
    result.value = evaluate_policy(result.optimistic_mdp, result.policy);
    return result;
}

/// Whether the given two-support MDP lies inside the model class:
/// |p - p_hat| <= confidence_radius(p, n) at every (s,a), with p the true
/// plus-probability. Throws if the designated pairs differ.
inline bool model_membership_check(const TabularMdp& true_mdp, const ModelClass& model) {
    if (!is_two_support(true_mdp)) throw std::invalid_argument("model_membership_check: MDP is not two-support");
    if (true_mdp.num_states != model.num_states || true_mdp.num_actions != model.num_actions)
        throw std::invalid_argument("model_membership_check: shape mismatch");
    for (int s = 0; s < true_mdp.num_states; ++s) {
        for (int a = 0; a < true_mdp.num_actions; ++a) {
            const std::size_t i = model.pair_index(s, a);
            const auto& two = std::get<TwoSupportTransition>(true_mdp.row(s, a));
            if (two.plus_state != model.pairs[i].plus_state || two.minus_state != model.pairs[i].minus_state)
                throw std::invalid_argument("model_membership_check: designated successor pair mismatch");
            if (two.plus_state == two.minus_state) continue; // point mass, no free parameter
            const long long n = model.counts.n[i];
            if (n == 0) continue;
            const double radius = confidence_radius({two.plus_prob, n, model.log_term});
            if (std::abs(two.plus_prob - model.p_hat[i]) > radius) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// The episode/delay/update state machine

enum class AgentPhase { Acting, Delaying };

/// Per-episode record kept for diagnostics: length, the forced delay block and
/// the (s,a,iota) whose knownness change triggered the update.
struct EpisodeLog {
    int episode = 0;
    long long acting_steps = 0;
    long long delay_steps = 0;
    int trigger_state = -1;
    int trigger_action = -1;
    int trigger_iota = -1;
    // visits accumulated this episode, bucketed by (kappa, iota) at the
    // episode's frozen counts (one histogram row per iota level)
    std::vector<std::pair<std::pair<int, int>, long long>> useful_visits;
};

struct AgentConfig {
    double evi_tolerance = 1e-6;
    std::optional<double> m_override;
    bool keep_episode_logs = true;
};

/// Full state of the learner: counts, the current optimistic model, its policy
/// and exact value, and the delay/update bookkeeping. Copyable; a copy is an
/// independent fork.
struct AgentState {
    UcrlConstants constants;
    AgentConfig config;
    TabularMdp skeleton; // pairs + rewards + discount; transition probabilities zeroed
    VisitCounts counts;
    int episode = 1;
    TabularMdp optimistic_mdp;
    StationaryPolicy policy;
    ValueVector optimistic_value;
    int current_state = 0;
    long long time = 1;
    AgentPhase phase = AgentPhase::Acting;
    long long delay_remaining = 0;
    long long update_count = 0;
    long long episode_acting_steps = 0;
    int trigger_state = -1, trigger_action = -1, trigger_iota = -1;
    std::vector<EpisodeLog> episode_logs;

    int action_at(int s) const { return policy.action_of[s]; }
};

namespace detail {

/// Skeleton visible to the agent: structure and rewards only.
inline TabularMdp strip_probabilities(const TabularMdp& env) {
    TabularMdp skeleton = env;
    for (auto& row : skeleton.transitions) {
        auto two = std::get<TwoSupportTransition>(row);
        two.plus_prob = two.plus_state == two.minus_state ? 1.0 : 0.0;
        row = two;
    }
    return skeleton;
}

inline void agent_recompute_model(AgentState& agent) {
    const ModelClass model = make_model_class(agent.skeleton, agent.counts, agent.constants.L1);
    EviResult evi = extended_value_iteration(model, agent.skeleton, agent.config.evi_tolerance);
    agent.optimistic_mdp = std::move(evi.optimistic_mdp);
    agent.policy = std::move(evi.policy);
    agent.optimistic_value = std::move(evi.value);
}

/// Knownness change test for one pair after folding its v into n.
/// Exact as a global test because v changes only at visited pairs and the
/// condition resets when v is zeroed at Update.
inline std::optional<int> knownness_change_iota(const AgentState& agent, int s, int a) {
    const std::size_t i = agent.counts.pair_index(s, a);
    const long long n = agent.counts.n[i];
    const long long v = agent.counts.v[i];
    for (int iota : agent.constants.iota_set)
        if (knownness(iota, n + v, agent.constants, agent.config.m_override) !=
            knownness(iota, n, agent.constants, agent.config.m_override))
            return iota;
    return std::nullopt;
}

inline void agent_log_episode(AgentState& agent) {
    if (!agent.config.keep_episode_logs) return;
    EpisodeLog log;
    log.episode = agent.episode;
    log.acting_steps = agent.episode_acting_steps;
    log.delay_steps = agent.constants.H;
    log.trigger_state = agent.trigger_state;
    log.trigger_action = agent.trigger_action;
    log.trigger_iota = agent.trigger_iota;
    for (int s = 0; s < agent.counts.num_states; ++s) {
        for (int a = 0; a < agent.counts.num_actions; ++a) {
            const std::size_t i = agent.counts.pair_index(s, a);
            if (agent.counts.v[i] == 0) continue;
            for (int iota : agent.constants.iota_set) {
                const int kappa = knownness(iota, agent.counts.n[i], agent.constants, agent.config.m_override);
                log.useful_visits.push_back({{kappa, iota}, agent.counts.v[i]});
            }
        }
    }
    agent.episode_logs.push_back(std::move(log));
}

inline void agent_update(AgentState& agent) {
    agent_log_episode(agent);
    agent.counts.fold();
    ++agent.episode;
    ++agent.update_count;
    agent.phase = AgentPhase::Acting;
    agent.episode_acting_steps = 0;
    agent.trigger_state = agent.trigger_action = agent.trigger_iota = -1;
    agent_recompute_model(agent);
}

/// Records one observed transition and advances the delay/update machinery.
/// Returns true when an Update completed on this step.
inline bool agent_observe(AgentState& agent, int s, int a, int s2) {
    const auto& pair = std::get<TwoSupportTransition>(agent.skeleton.row(s, a));
    if (s2 != pair.plus_state && s2 != pair.minus_state)
        throw std::invalid_argument("ucrl: observed successor outside the designated pair");
    agent.counts.record(s, a, s2);

    if (agent.phase == AgentPhase::Delaying) {
        if (--agent.delay_remaining == 0) {
            agent_update(agent);
            return true;
        }
        return false;
    }
    ++agent.episode_acting_steps;
    if (auto iota = knownness_change_iota(agent, s, a)) {
        agent.phase = AgentPhase::Delaying;
        agent.delay_remaining = agent.constants.H;
        agent.trigger_state = s;
        agent.trigger_action = a;
        agent.trigger_iota = *iota;
    }
    return false;
}

} // namespace detail

/// Fresh agent: zero counts, the fully optimistic model over the unconstrained
/// class, and its greedy policy.
inline AgentState make_agent(const TabularMdp& env_structure, const UcrlConstants& constants, int start_state,
                             AgentConfig config = {}) {
    if (!is_two_support(env_structure))
        throw std::invalid_argument(
            "make_agent: environment must satisfy the two-successor assumption; apply split_to_two_support first");
    validate(env_structure);
    if (env_structure.num_states != constants.num_states || env_structure.num_actions != constants.num_actions)
        throw std::invalid_argument("make_agent: constants were derived for a different shape");
    detail::check_state(env_structure, start_state, "make_agent");

    AgentState agent;
    agent.constants = constants;
    agent.config = config;
    agent.skeleton = detail::strip_probabilities(env_structure);
    agent.counts = VisitCounts(env_structure.num_states, env_structure.num_actions);
    agent.current_state = start_state;
    detail::agent_recompute_model(agent);
    return agent;
}

struct StepOutcome {
    long long time = 0;
    int episode = 0;
    int state = 0;
    int action = 0;
    int next_state = 0;
    bool delay_step = false; // step executed inside a delay phase
    bool updated = false;    // an Update completed at the end of this step
};

/// One time-step of the algorithm: Act with the current policy, record the
/// transition, and run the delay/update state machine. Delay phases last
/// exactly H steps and end in an Update that folds v into n, recomputes the
/// empirical model and replans; the new policy takes effect next step.
inline StepOutcome ucrl_step(AgentState& agent, const TabularMdp& env, Rng& rng) {
    if (env.num_states != agent.skeleton.num_states || env.num_actions != agent.skeleton.num_actions)
        throw std::invalid_argument("ucrl_step: environment shape mismatch");
    const int s = agent.current_state;
    const int a = agent.action_at(s);
    if (!std::holds_alternative<TwoSupportTransition>(env.row(s, a)))
        throw std::invalid_argument(
            "ucrl_step: environment violates the two-successor assumption; apply split_to_two_support first");

    StepOutcome out;
    out.time = agent.time;
    out.episode = agent.episode;
    out.state = s;
    out.action = a;
    out.delay_step = agent.phase == AgentPhase::Delaying;
    out.next_state = sample_step(env, s, a, rng);
    out.updated = detail::agent_observe(agent, s, a, out.next_state);
    agent.current_state = out.next_state;
    ++agent.time;
    return out;
}

} // namespace pacmdp
