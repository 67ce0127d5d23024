// Command-line front end: constants calculator, MDP solver, hard-instance
// generators, the two-support transform, experiment runner and the bandit
// reduction.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pacmdp/harness.hpp"
#include "pacmdp/history_policy.hpp"
#include "pacmdp/lowerbound.hpp"
#include "pacmdp/mdp_io.hpp"
#include "pacmdp/split.hpp"

namespace {

using namespace pacmdp;

void print_constants(const UcrlConstants& c, bool as_json) {
    if (as_json) {
        std::cout << to_json(c).dump(2) << '\n';
        return;
    }
    std::cout << "inputs: |S|=" << c.num_states << " |A|=" << c.num_actions << " epsilon=" << c.epsilon
              << " delta=" << c.delta << " gamma=" << c.discount << '\n';
    std::cout << "w_min=" << c.w_min << "  iota_max=" << c.iota_max << "  |I|=" << c.iota_set.size() << '\n';
    std::cout << "kappa_set={";
    for (std::size_t i = 0; i < c.kappa_set.size(); ++i) std::cout << (i ? "," : "") << c.kappa_set[i];
    std::cout << "}  beta=" << c.beta << "  d_set={";
    for (std::size_t i = 0; i < c.d_set.size(); ++i) std::cout << (i ? "," : "") << c.d_set[i];
    std::cout << "}\n";
    std::cout << "H=" << c.H << "  delta1=" << c.delta1 << "  L1=" << c.L1 << '\n';
    std::cout << "m=" << c.m << "  N=" << c.N << "  U_max=" << c.U_max << "  E_max=" << c.E_max << '\n';
}

int run(int argc, char** argv) {
    CLI::App app{"Tabular-MDP experiment harness for optimistic PAC reinforcement learning"};
    app.require_subcommand(1);

    // constants
    auto* cmd_constants = app.add_subcommand("constants", "Print the derived algorithm constants");
    int states = 4, actions = 2;
    double epsilon = 0.1, delta = 0.1, gamma = 0.9;
    bool as_json = false;
    cmd_constants->add_option("--states", states, "Number of states")->required();
    cmd_constants->add_option("--actions", actions, "Number of actions")->required();
    cmd_constants->add_option("--epsilon", epsilon, "Accuracy parameter")->required();
    cmd_constants->add_option("--delta", delta, "Failure probability")->required();
    cmd_constants->add_option("--gamma", gamma, "Discount factor")->required();
    cmd_constants->add_flag("--json", as_json, "Emit JSON");

    // solve
    auto* cmd_solve = app.add_subcommand("solve", "Optimal value and policy of an MDP file");
    std::string mdp_path;
    double solve_tolerance = 1e-9;
    bool solve_json = false;
    cmd_solve->add_option("--mdp", mdp_path, "MDP file")->required();
    cmd_solve->add_option("--tolerance", solve_tolerance, "Value-iteration accuracy");
    cmd_solve->add_flag("--json", solve_json, "Emit JSON");

    // hard-mdp
    auto* cmd_hard = app.add_subcommand("hard-mdp", "Emit the 4-state hard instance as an MDP file");
    int hard_actions = 2, optimal_arm = 0;
    double hard_epsilon = 0.01, hard_gamma = 0.9;
    std::string out_path;
    cmd_hard->add_option("--actions", hard_actions, "Number of actions");
    cmd_hard->add_option("--epsilon", hard_epsilon, "Gap parameter");
    cmd_hard->add_option("--gamma", hard_gamma, "Discount factor");
    cmd_hard->add_option("--optimal-arm", optimal_arm, "Index of the optimal action");
    cmd_hard->add_option("--out", out_path, "Output MDP file")->required();

    // chain
    auto* cmd_chain = app.add_subcommand("chain", "Emit chained hard copies as an MDP file");
    int chain_copies = 2;
    std::vector<int> chain_arms;
    std::uint64_t chain_seed = 0;
    bool chain_seed_set = false;
    cmd_chain->add_option("--copies", chain_copies, "Number of copies");
    cmd_chain->add_option("--actions", hard_actions, "Number of actions");
    cmd_chain->add_option("--epsilon", hard_epsilon, "Gap parameter");
    cmd_chain->add_option("--gamma", hard_gamma, "Discount factor");
    cmd_chain->add_option("--optimal-arms", chain_arms, "Optimal arm per copy (comma separated)")->delimiter(',');
    cmd_chain->add_option("--seed", chain_seed, "Draw the per-copy arms from this seed")
        ->each([&](const std::string&) { chain_seed_set = true; });
    cmd_chain->add_option("--out", out_path, "Output MDP file")->required();

    // split
    auto* cmd_split = app.add_subcommand("split", "Rewrite an MDP into two-support form");
    std::string split_in, split_out;
    cmd_split->add_option("--mdp", split_in, "Input MDP file")->required();
    cmd_split->add_option("--out", split_out, "Output MDP file")->required();

    // run-ucrl
    auto* cmd_run = app.add_subcommand("run-ucrl", "Run a full experiment from a config file");
    std::string config_path, run_out;
    double run_epsilon = 0, run_delta = 0, run_gamma = 0, run_m_override = 0;
    long long run_steps = 0;
    std::uint64_t run_seed = 0;
    bool run_seed_set = false, run_m_set = false;
    std::string run_estimator;
    cmd_run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    cmd_run->add_option("--epsilon", run_epsilon, "Override: accuracy parameter");
    cmd_run->add_option("--delta", run_delta, "Override: failure probability");
    cmd_run->add_option("--gamma", run_gamma, "Override: discount");
    cmd_run->add_option("--steps", run_steps, "Override: horizon T");
    cmd_run->add_option("--seed", run_seed, "Override: RNG seed")
        ->each([&](const std::string&) { run_seed_set = true; });
    cmd_run->add_option("--m-override", run_m_override, "Override: knownness denominator m")
        ->each([&](const std::string&) { run_m_set = true; });
    cmd_run->add_option("--estimator", run_estimator, "Override: stationary_proxy | monte_carlo_fork");
    cmd_run->add_option("--out", run_out, "Override: output prefix (PREFIX.trace.csv, PREFIX.report.json)");

    // learn-bandit
    auto* cmd_bandit = app.add_subcommand("learn-bandit", "Bandit reduction driven by the learning agent");
    int bandit_arms = 2, bandit_best = 0;
    double bandit_epsilon = 0.2, bandit_gamma = 0.8, agent_epsilon = 0.2, agent_delta = 0.2;
    long long bandit_phases = 50;
    std::uint64_t bandit_seed = 0;
    double bandit_m_override = 0;
    bool bandit_m_set = false;
    cmd_bandit->add_option("--arms", bandit_arms, "Number of arms");
    cmd_bandit->add_option("--epsilon", bandit_epsilon, "Bandit gap (optimal arm pays 1/2 + epsilon)");
    cmd_bandit->add_option("--gamma", bandit_gamma, "Discount of the surrounding dynamics");
    cmd_bandit->add_option("--optimal-arm", bandit_best, "Index of the optimal arm");
    cmd_bandit->add_option("--phases", bandit_phases, "N; the reduction votes over 2N phases");
    cmd_bandit->add_option("--seed", bandit_seed, "RNG seed");
    cmd_bandit->add_option("--agent-epsilon", agent_epsilon, "Agent accuracy parameter");
    cmd_bandit->add_option("--agent-delta", agent_delta, "Agent failure probability");
    cmd_bandit->add_option("--m-override", bandit_m_override, "Agent knownness denominator m")
        ->each([&](const std::string&) { bandit_m_set = true; });
    PhaseBudgetConstants budget_constants;
    cmd_bandit->add_option("--c1", budget_constants.c1, "Leading constant of the nominal phase budget");
    cmd_bandit->add_option("--c2", budget_constants.c2, "Log-term constant of the nominal phase budget");

    CLI11_PARSE(app, argc, argv);

    if (cmd_constants->parsed()) {
        print_constants(derive_constants(states, actions, epsilon, delta, gamma), as_json);
        return 0;
    }

    if (cmd_solve->parsed()) {
        const TabularMdp mdp = load_mdp(mdp_path);
        const auto [value, policy] = solve_optimal(mdp, solve_tolerance);
        if (solve_json) {
            Json j;
            j["value"] = value.values;
            j["policy"] = policy.action_of;
            std::cout << j.dump(2) << '\n';
        } else {
            for (int s = 0; s < mdp.num_states; ++s)
                std::cout << "state " << s << ": V* = " << value.values[s] << "  action = " << policy.action_of[s]
                          << '\n';
        }
        return 0;
    }

    if (cmd_hard->parsed()) {
        HardMdpSpec spec{hard_actions, hard_epsilon, hard_gamma, optimal_arm};
        save_mdp(build_hard_mdp(spec), out_path);
        std::cout << "wrote " << out_path << '\n';
        return 0;
    }

    if (cmd_chain->parsed()) {
        HardMdpSpec spec{hard_actions, hard_epsilon, hard_gamma, 0};
        std::vector<int> arms = chain_arms;
        if (arms.empty()) {
            Rng rng(chain_seed_set ? chain_seed : 0);
            for (int i = 0; i < chain_copies; ++i)
                arms.push_back(static_cast<int>(uniform01(rng) * hard_actions));
        }
        if (static_cast<int>(arms.size()) != chain_copies)
            throw std::invalid_argument("chain: --optimal-arms must list one arm per copy");
        save_mdp(chain_hard_mdps(spec, arms), out_path);
        std::cout << "wrote " << out_path << '\n';
        return 0;
    }

    if (cmd_split->parsed()) {
        const SplitResult split = split_to_two_support(load_mdp(split_in));
        save_mdp(split.mdp, split_out);
        std::cout << "wrote " << split_out << " (" << split.mdp.num_states << " states)\n";
        return 0;
    }

    if (cmd_run->parsed()) {
        ExperimentConfig config = load_experiment_config(config_path);
        if (run_epsilon > 0) config.epsilon = run_epsilon;
        if (run_delta > 0) config.delta = run_delta;
        if (run_gamma > 0) config.discount = run_gamma;
        if (run_steps > 0) config.horizon = run_steps;
        if (run_seed_set) config.seed = run_seed;
        if (run_m_set) config.m_override = run_m_override;
        if (!run_estimator.empty()) config.estimator = estimator_from_name(run_estimator);
        if (!run_out.empty()) {
            config.trace_path = run_out + ".trace.csv";
            config.report_path = run_out + ".report.json";
        }
        const ExperimentResult result = run_experiment(config);
        std::cout << "steps=" << result.report.total_steps << " mistakes=" << result.report.mistake_count
                  << " updates=" << result.report.update_count << " delay_steps=" << result.report.delay_steps
                  << " exploration_phases=" << result.report.exploration_phases << '\n';
        if (!config.trace_path.empty()) std::cout << "trace:  " << config.trace_path << '\n';
        if (!config.report_path.empty()) std::cout << "report: " << config.report_path << '\n';
        return 0;
    }

    if (cmd_bandit->parsed()) {
        HardMdpSpec spec{bandit_arms, 0.0, bandit_gamma, bandit_best};
        spec.epsilon = std::min(bandit_epsilon / 16.0, 0.5 / (16.0 * (1.0 - bandit_gamma)));
        const TabularMdp skeleton = build_hard_mdp(spec);
        const UcrlConstants constants =
            derive_constants(skeleton.num_states, skeleton.num_actions, agent_epsilon, agent_delta, bandit_gamma);
        AgentConfig agent_config;
        if (bandit_m_set) agent_config.m_override = bandit_m_override;
        agent_config.keep_episode_logs = false;
        UcrlHistoryPolicy policy(make_agent(skeleton, constants, kHardDelayState, agent_config));
        const Bandit bandit = hard_bandit_instance(bandit_arms, bandit_epsilon, bandit_best);
        Rng rng(bandit_seed);
        const LearnBanditResult result = learn_bandit(policy, bandit, spec, bandit_phases, rng);
        std::cout << "chosen arm: " << result.best_arm << " (optimal " << bandit_best << ")\n";
        std::cout << "phase votes:";
        for (long long v : result.phase_votes) std::cout << ' ' << v;
        std::cout << "\nsimulated steps: " << result.steps << '\n';
        std::cout << "nominal phase budget (c1=" << budget_constants.c1 << ", c2=" << budget_constants.c2
                  << ", placeholders): "
                  << nominal_phase_budget(bandit_arms, bandit_epsilon, agent_delta, bandit_gamma, budget_constants)
                  << "; this run used N = " << bandit_phases << '\n';
        return 0;
    }

    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
