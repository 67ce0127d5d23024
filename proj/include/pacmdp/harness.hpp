#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pacmdp/constants.hpp"
#include "pacmdp/mdp.hpp"
#include "pacmdp/mdp_io.hpp"
#include "pacmdp/solve.hpp"
#include "pacmdp/split.hpp"
#include "pacmdp/ucrl.hpp"

namespace pacmdp {

enum class MistakeEstimator { StationaryProxy, MonteCarloFork };

struct ChainedHardSpec {
    HardMdpSpec base;
    std::vector<int> optimal_arms;
};

/// Where the environment comes from: an MDP file, a hard-instance spec, or a
/// chained hard spec.
using MdpSource = std::variant<std::string, HardMdpSpec, ChainedHardSpec>;

struct ExperimentConfig {
    MdpSource mdp_source;
    double epsilon = 0.1;
    double delta = 0.1;
    double discount = 0.0; // 0 = take the environment's
    long long horizon = 0; // T
    std::uint64_t seed = 0;
    int start_state = 0;
    std::optional<double> m_override;
    MistakeEstimator estimator = MistakeEstimator::StationaryProxy;
    int rollout_count = 32;
    long long rollout_depth = 0; // 0 = default to H
    double evi_tolerance = 1e-6;
    std::string trace_path;  // empty = keep in memory only
    std::string report_path;
};

/// One experiment step. v_policy is the exact stationary value of the episode
/// policy in the true environment; v_estimate is the estimator value the
/// mistake flag was computed from (equal to v_policy under the stationary
/// proxy).
struct TraceRow {
    long long t = 0;
    int episode = 0;
    int state = 0;
    int action = 0;
    bool delay = false;
    double v_star = 0.0;
    double v_policy = 0.0;
    double v_estimate = 0.0;
    double v_optimistic = 0.0;
    bool mistake = false;
    bool exploration_start = false;
};

struct MistakeReport {
    long long total_steps = 0;
    long long mistake_count = 0;
    long long update_count = 0;
    long long delay_steps = 0;
    long long exploration_phases = 0;
    double mistake_bound = 0.0; // H * (U_max + E_max)
    bool bound_respected = false;
    double mc_mean_standard_error = 0.0; // sampling error of the fork estimator, 0 under the proxy
    UcrlConstants constants;
    std::uint64_t seed = 0;
    MistakeEstimator estimator = MistakeEstimator::StationaryProxy;
    std::vector<EpisodeLog> episodes;
};

struct ExperimentResult {
    std::vector<TraceRow> trace;
    MistakeReport report;
};

/// Exploration-phase starts per the inductive definition: times t where the
/// optimistic-vs-true value gap of the episode policy reaches epsilon/2, t is
/// not a delay step, and t lies at least H after the previous start.
inline std::vector<long long> detect_exploration_phases(const std::vector<TraceRow>& trace, double epsilon,
                                                        long long H) {
    std::vector<long long> starts;
    long long prev = std::numeric_limits<long long>::min() / 2;
    for (const TraceRow& row : trace) {
        if (row.delay) continue;
        if (row.v_optimistic - row.v_policy < epsilon / 2.0) continue;
        if (row.t < prev + H) continue;
        starts.push_back(row.t);
        prev = row.t;
    }
    return starts;
}

/// The active set and its partition into knownness cells.
struct KnownPartition {
    std::vector<int> active;                                 // X_t, ascending
    std::vector<int> iota_of;                                // per state, -1 if inactive
    std::vector<int> kappa_of;                               // per state, -1 if inactive
    std::map<std::pair<int, int>, std::vector<int>> cells;   // (kappa, iota) -> states
};

/// X_t = {s : w_t(s) > w_min}; each active state lands in the dyadic weight
/// bucket w_t(s) in [w_iota, 2 w_iota) and the knownness cell of its visit
/// count under the current policy.
inline KnownPartition partition_known_states(const OccupancyWeights& weights, const VisitCounts& counts,
                                             const StationaryPolicy& policy, const UcrlConstants& constants,
                                             std::optional<double> m_override = std::nullopt) {
    KnownPartition out;
    const int S = static_cast<int>(weights.weights.size());
    out.iota_of.assign(S, -1);
    out.kappa_of.assign(S, -1);
    for (int s = 0; s < S; ++s) {
        const double w = weights.weights[s];
        if (!(w > constants.w_min)) continue;
        int iota = 0;
        while (iota < constants.iota_max && constants.w_iota(iota + 1) <= w) ++iota;
        const long long n = counts.n[counts.pair_index(s, policy.action_of[s])];
        const int kappa = knownness(iota, n, constants, m_override);
        out.active.push_back(s);
        out.iota_of[s] = iota;
        out.kappa_of[s] = kappa;
        out.cells[{kappa, iota}].push_back(s);
    }
    return out;
}

namespace detail {

inline TabularMdp build_environment(const MdpSource& source) {
    if (const auto* path = std::get_if<std::string>(&source)) return load_mdp(*path);
    if (const auto* hard = std::get_if<HardMdpSpec>(&source)) return build_hard_mdp(*hard);
    const auto& chain = std::get<ChainedHardSpec>(source);
    return chain_hard_mdps(chain.base, chain.optimal_arms);
}

/// Discounted return of `depth` forked steps of the live agent in the live
/// environment, starting at the agent's current state.
inline double fork_rollout(const AgentState& agent, const TabularMdp& env, long long depth, Rng& rng) {
    AgentState fork = agent;
    double total = 0.0, discount = 1.0;
    for (long long j = 0; j < depth; ++j) {
        total += discount * env.rewards[fork.current_state];
        discount *= env.discount;
        ucrl_step(fork, env, rng);
    }
    return total;
}

} // namespace detail

inline void emit_trace(const std::vector<TraceRow>& trace, const MistakeReport& report,
                       const std::string& trace_path, const std::string& report_path);

/// Runs the learner for config.horizon steps and assembles the trace and the
/// mistake report. Deterministic: identical configs (seed included) produce
/// byte-identical trace and report files.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    if (config.horizon < 0) throw std::invalid_argument("run_experiment: horizon must be non-negative");
    if (!(config.epsilon > 0.0 && config.epsilon < 1.0))
        throw std::invalid_argument("run_experiment: epsilon must lie in (0,1)");
    if (!(config.delta > 0.0 && config.delta < 1.0))
        throw std::invalid_argument("run_experiment: delta must lie in (0,1)");

    TabularMdp env = detail::build_environment(config.mdp_source);
    if (config.discount > 0.0 && std::abs(config.discount - env.discount) > 1e-15)
        throw std::invalid_argument("run_experiment: config discount disagrees with the environment");
    if (!is_two_support(env)) {
        std::cerr << "run-ucrl: environment has rows with more than two successors; applying the"
                     " two-support transform\n";
        env = split_to_two_support(env).mdp;
    }

    const UcrlConstants constants =
        derive_constants(env.num_states, env.num_actions, config.epsilon, config.delta, env.discount);

    AgentConfig agent_config;
    agent_config.evi_tolerance = config.evi_tolerance;
    agent_config.m_override = config.m_override;
    AgentState agent = make_agent(env, constants, config.start_state, agent_config);

    const ValueVector v_star = solve_optimal(env, 1e-9).first;
    const long long rollout_depth = config.rollout_depth > 0 ? config.rollout_depth : constants.H;
    if (config.estimator == MistakeEstimator::MonteCarloFork && rollout_depth < constants.H)
        throw std::invalid_argument("run_experiment: rollout_depth must be at least H");

    Rng rng(config.seed);
    ExperimentResult result;
    result.trace.reserve(static_cast<std::size_t>(config.horizon));

    std::vector<double> v_policy;
    int evaluated_episode = 0;
    double total_standard_error = 0.0;
    for (long long t = 1; t <= config.horizon; ++t) {
        if (agent.episode != evaluated_episode) {
            v_policy = evaluate_policy(env, agent.policy).values;
            evaluated_episode = agent.episode;
        }
        TraceRow row;
        row.state = agent.current_state;
        row.v_star = v_star.values[row.state];
        row.v_policy = v_policy[row.state];
        row.v_optimistic = agent.optimistic_value.values[row.state];

        if (config.estimator == MistakeEstimator::MonteCarloFork) {
            double sum = 0.0, sum_sq = 0.0;
            for (int i = 0; i < config.rollout_count; ++i) {
                Rng fork_rng(splitmix64(config.seed ^ splitmix64(static_cast<std::uint64_t>(t) * 0x10001ull + i)));
                const double ret = detail::fork_rollout(agent, env, rollout_depth, fork_rng);
                sum += ret;
                sum_sq += ret * ret;
            }
            const double n = config.rollout_count;
            row.v_estimate = sum / n;
            const double variance = std::max(0.0, sum_sq / n - row.v_estimate * row.v_estimate);
            total_standard_error += std::sqrt(variance / n);
        } else {
            row.v_estimate = row.v_policy;
        }
        row.mistake = row.v_star - row.v_estimate > config.epsilon;

        const StepOutcome step = ucrl_step(agent, env, rng);
        row.t = step.time;
        row.episode = step.episode;
        row.action = step.action;
        row.delay = step.delay_step;
        result.trace.push_back(row);
    }

    for (long long t : detect_exploration_phases(result.trace, config.epsilon, constants.H))
        result.trace[static_cast<std::size_t>(t - 1)].exploration_start = true;

    MistakeReport& report = result.report;
    report.total_steps = config.horizon;
    for (const TraceRow& row : result.trace) {
        report.mistake_count += row.mistake;
        report.delay_steps += row.delay;
        report.exploration_phases += row.exploration_start;
    }
    report.update_count = agent.update_count;
    report.mistake_bound = static_cast<double>(constants.H) * (static_cast<double>(constants.U_max) + constants.E_max);
    report.bound_respected = static_cast<double>(report.mistake_count) <= report.mistake_bound;
    if (config.estimator == MistakeEstimator::MonteCarloFork && config.horizon > 0)
        report.mc_mean_standard_error = total_standard_error / static_cast<double>(config.horizon);
    report.constants = constants;
    report.seed = config.seed;
    report.estimator = config.estimator;
    report.episodes = agent.episode_logs;

    if (!config.trace_path.empty() || !config.report_path.empty())
        emit_trace(result.trace, report, config.trace_path, config.report_path);
    return result;
}

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

} // namespace detail

inline Json to_json(const UcrlConstants& c) {
    Json j;
    j["epsilon"] = c.epsilon;
    j["delta"] = c.delta;
    j["discount"] = c.discount;
    j["num_states"] = c.num_states;
    j["num_actions"] = c.num_actions;
    j["w_min"] = c.w_min;
    j["iota_max"] = c.iota_max;
    j["kappa_set"] = c.kappa_set;
    j["beta"] = c.beta;
    j["d_set"] = c.d_set;
    j["H"] = c.H;
    j["delta1"] = c.delta1;
    j["L1"] = c.L1;
    j["m"] = c.m;
    j["N"] = c.N;
    j["U_max"] = c.U_max;
    j["E_max"] = c.E_max;
    return j;
}

inline const char* estimator_name(MistakeEstimator e) {
    return e == MistakeEstimator::StationaryProxy ? "stationary_proxy" : "monte_carlo_fork";
}

inline Json to_json(const MistakeReport& report) {
    Json j;
    j["total_steps"] = report.total_steps;
    j["mistake_count"] = report.mistake_count;
    j["update_count"] = report.update_count;
    j["delay_steps"] = report.delay_steps;
    j["exploration_phases"] = report.exploration_phases;
    j["mistake_bound"] = report.mistake_bound;
    j["bound_respected"] = report.bound_respected;
    j["mc_mean_standard_error"] = report.mc_mean_standard_error;
    j["seed"] = report.seed;
    j["estimator"] = estimator_name(report.estimator);
    j["constants"] = to_json(report.constants);
    Json episodes = Json::array();
    for (const EpisodeLog& log : report.episodes) {
        Json e;
        e["episode"] = log.episode;
        e["acting_steps"] = log.acting_steps;
        e["delay_steps"] = log.delay_steps;
        e["trigger"] = Json{{"state", log.trigger_state}, {"action", log.trigger_action}, {"iota", log.trigger_iota}};
        Json visits = Json::object();
        std::map<std::pair<int, int>, long long> merged;
        for (const auto& [cell, count] : log.useful_visits) merged[cell] += count;
        for (const auto& [cell, count] : merged)
            visits[std::to_string(cell.first) + "," + std::to_string(cell.second)] = count;
        e["useful_visits"] = std::move(visits);
        episodes.push_back(std::move(e));
    }
    j["episodes"] = std::move(episodes);
    return j;
}

/// Writes the delimited trace (12 significant digits for reals) and the JSON
/// report. Either path may be empty to skip that file.
inline void emit_trace(const std::vector<TraceRow>& trace, const MistakeReport& report,
                       const std::string& trace_path, const std::string& report_path) {
    if (!trace_path.empty()) {
        std::ofstream out(trace_path);
        if (!out) throw std::runtime_error("emit_trace: cannot open " + trace_path);
        out << "t,episode,state,action,delay,v_star,v_policy,v_estimate,v_optimistic,mistake,exploration_start\n";
        for (const TraceRow& row : trace) {
            out << row.t << ',' << row.episode << ',' << row.state << ',' << row.action << ','
                << (row.delay ? 1 : 0) << ',' << detail::format_real(row.v_star) << ','
                << detail::format_real(row.v_policy) << ',' << detail::format_real(row.v_estimate) << ','
                << detail::format_real(row.v_optimistic) << ',' << (row.mistake ? 1 : 0) << ','
                << (row.exploration_start ? 1 : 0) << '\n';
        }
        if (!out) throw std::runtime_error("emit_trace: write failed for " + trace_path);
    }
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw std::runtime_error("emit_trace: cannot open " + report_path);
        out << to_json(report).dump(2) << '\n';
        if (!out) throw std::runtime_error("emit_trace: write failed for " + report_path);
    }
}

// ---------------------------------------------------------------------------
// Config files (field-for-field mirror of ExperimentConfig)

inline MistakeEstimator estimator_from_name(const std::string& name) {
    if (name == "stationary_proxy") return MistakeEstimator::StationaryProxy;
    if (name == "monte_carlo_fork") return MistakeEstimator::MonteCarloFork;
    throw std::invalid_argument("unknown mistake estimator: " + name);
}

inline Json to_json(const ExperimentConfig& config) {
    Json j;
    if (const auto* path = std::get_if<std::string>(&config.mdp_source)) {
        j["mdp"] = Json{{"file", *path}};
    } else if (const auto* hard = std::get_if<HardMdpSpec>(&config.mdp_source)) {
        j["mdp"] = Json{{"hard", to_json(*hard)}};
    } else {
        const auto& chain = std::get<ChainedHardSpec>(config.mdp_source);
        Json c = to_json(chain.base);
        c.erase("optimal_arm");
        c["optimal_arms"] = chain.optimal_arms;
        j["mdp"] = Json{{"chain", std::move(c)}};
    }
    j["epsilon"] = config.epsilon;
    j["delta"] = config.delta;
    if (config.discount > 0.0) j["discount"] = config.discount;
    j["horizon"] = config.horizon;
    j["seed"] = config.seed;
    j["start_state"] = config.start_state;
    if (config.m_override) j["m_override"] = *config.m_override;
    j["estimator"] = estimator_name(config.estimator);
    j["rollout_count"] = config.rollout_count;
    j["rollout_depth"] = config.rollout_depth;
    j["evi_tolerance"] = config.evi_tolerance;
    if (!config.trace_path.empty()) j["trace_path"] = config.trace_path;
    if (!config.report_path.empty()) j["report_path"] = config.report_path;
    return j;
}

inline ExperimentConfig experiment_config_from_json(const Json& j) {
    ExperimentConfig config;
    const Json& mdp = j.at("mdp");
    if (mdp.contains("file")) {
        config.mdp_source = mdp.at("file").get<std::string>();
    } else if (mdp.contains("hard")) {
        config.mdp_source = hard_spec_from_json(mdp.at("hard"));
    } else if (mdp.contains("chain")) {
        const Json& c = mdp.at("chain");
        ChainedHardSpec chain;
        chain.optimal_arms = c.at("optimal_arms").get<std::vector<int>>();
        Json base = c;
        base.erase("optimal_arms");
        base["optimal_arm"] = chain.optimal_arms.empty() ? 0 : chain.optimal_arms.front();
        chain.base = hard_spec_from_json(base);
        config.mdp_source = std::move(chain);
    } else {
        throw std::invalid_argument("experiment config: mdp must contain file, hard or chain");
    }
    config.epsilon = j.at("epsilon").get<double>();
    config.delta = j.at("delta").get<double>();
    config.discount = j.value("discount", 0.0);
    config.horizon = j.at("horizon").get<long long>();
    config.seed = j.value("seed", std::uint64_t{0});
    config.start_state = j.value("start_state", 0);
    if (j.contains("m_override")) config.m_override = j.at("m_override").get<double>();
    config.estimator = estimator_from_name(j.value("estimator", std::string("stationary_proxy")));
    config.rollout_count = j.value("rollout_count", 32);
    config.rollout_depth = j.value("rollout_depth", static_cast<long long>(0));
    config.evi_tolerance = j.value("evi_tolerance", 1e-6);
    config.trace_path = j.value("trace_path", std::string());
    config.report_path = j.value("report_path", std::string());
    return config;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_experiment_config: cannot open " + path);
    return experiment_config_from_json(Json::parse(in));
}

} // namespace pacmdp
