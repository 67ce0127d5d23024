#include "catch_amalgamated.hpp"

#include <cmath>

#include "pacmdp/history_policy.hpp"
#include "pacmdp/lowerbound.hpp"
#include "pacmdp/solve.hpp"
#include "test_util.hpp"

using namespace pacmdp;
using Catch::Approx;

namespace {

// deterministic pseudo-random behavior: hash of the full history
FunctionHistoryPolicy hashed_policy(std::uint64_t seed, int num_actions) {
    return FunctionHistoryPolicy([seed, num_actions](const std::vector<int>& history) {
        std::uint64_t h = seed;
        for (int s : history) h = splitmix64(h ^ static_cast<std::uint64_t>(s + 1));
        return static_cast<int>(h % static_cast<std::uint64_t>(num_actions));
    });
}

// plays `zero_arm` when the number of 0s since the last non-zero prefix is even
FunctionHistoryPolicy parity_policy(int even_arm, int odd_arm) {
    return FunctionHistoryPolicy([even_arm, odd_arm](const std::vector<int>& history) {
        // histories used by the weight functional look like [0, 0^k, 1]
        const long long k = static_cast<long long>(history.size()) - 2;
        return k % 2 == 0 ? even_arm : odd_arm;
    });
}

} // namespace

TEST_CASE("hard spec: derived rates and validation") {
    HardMdpSpec spec{2, 0.01, 0.9, 0};
    REQUIRE(spec.p() == Approx(1.0 / 1.1).margin(1e-15));
    REQUIRE(spec.q() == Approx(2.0 - 1.0 / 0.9).margin(1e-15));
    REQUIRE(spec.eps_star() == Approx(0.016).margin(1e-15));
    REQUIRE_NOTHROW(validate(spec));

    REQUIRE_THROWS_AS(validate(HardMdpSpec{2, 0.01, 0.7, 0}), std::invalid_argument);  // discount too small
    REQUIRE_THROWS_AS(validate(HardMdpSpec{2, 0.2, 0.8, 0}), std::invalid_argument);   // eps_star > 1/2
    REQUIRE_THROWS_AS(validate(HardMdpSpec{1, 0.01, 0.9, 0}), std::invalid_argument);  // one arm
    REQUIRE_THROWS_AS(validate(HardMdpSpec{2, 0.01, 0.9, 5}), std::invalid_argument);  // arm out of range
}

TEST_CASE("build_hard_mdp: structure matches the construction") {
    const HardMdpSpec spec{3, 0.01, 0.9, 1};
    const TabularMdp mdp = build_hard_mdp(spec);
    REQUIRE(mdp.num_states == 4);
    REQUIRE(is_two_support(mdp));
    REQUIRE(mdp.rewards == std::vector<double>{0.0, 0.0, 1.0, 0.0});

    for (int a = 0; a < 3; ++a) {
        const auto& delay = std::get<TwoSupportTransition>(mdp.row(kHardDelayState, a));
        REQUIRE(delay.plus_prob == Approx(1.0 / 1.1).margin(1e-15));
        REQUIRE(delay.plus_state == kHardDelayState);
        REQUIRE(delay.minus_state == kHardBanditState);
        const auto& reward = std::get<TwoSupportTransition>(mdp.row(kHardRewardState, a));
        REQUIRE(reward.plus_prob == Approx(spec.q()).margin(1e-15));
    }
    const auto& best = std::get<TwoSupportTransition>(mdp.row(kHardBanditState, 1));
    REQUIRE(best.plus_prob == Approx(0.5 + spec.eps_star()).margin(1e-15));
    // suboptimal rows are identical for all other actions
    const auto& sub0 = std::get<TwoSupportTransition>(mdp.row(kHardBanditState, 0));
    const auto& sub2 = std::get<TwoSupportTransition>(mdp.row(kHardBanditState, 2));
    REQUIRE(sub0.plus_prob == 0.5);
    REQUIRE(sub2.plus_prob == 0.5);
    REQUIRE(sub0.plus_state == sub2.plus_state);
    REQUIRE(sub0.minus_state == sub2.minus_state);
}

TEST_CASE("build_hard_mdp: the designated arm is optimal at the bandit state") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    const auto [value, policy] = solve_optimal(build_hard_mdp(spec), 1e-10);
    REQUIRE(policy.action_of[kHardBanditState] == 0);
    const HardMdpSpec spec2{4, 0.005, 0.95, 3};
    const auto [value2, policy2] = solve_optimal(build_hard_mdp(spec2), 1e-10);
    REQUIRE(policy2.action_of[kHardBanditState] == 3);
}

TEST_CASE("chain_hard_mdps: one copy is the plain hard instance") {
    const HardMdpSpec spec{2, 0.01, 0.9, 1};
    const TabularMdp single = build_hard_mdp(spec);
    const TabularMdp chained = chain_hard_mdps(spec, {1});
    REQUIRE(chained.num_states == single.num_states);
    REQUIRE(chained.rewards == single.rewards);
    for (std::size_t i = 0; i < single.transitions.size(); ++i) {
        const auto& a = std::get<TwoSupportTransition>(single.transitions[i]);
        const auto& b = std::get<TwoSupportTransition>(chained.transitions[i]);
        REQUIRE(a.plus_state == b.plus_state);
        REQUIRE(a.minus_state == b.minus_state);
        REQUIRE(a.plus_prob == b.plus_prob);
    }
}

TEST_CASE("chain_hard_mdps: three copies, twelve two-support states") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    const TabularMdp mdp = chain_hard_mdps(spec, {0, 1, 0});
    REQUIRE(mdp.num_states == 12);
    REQUIRE(is_two_support(mdp));
    validate(mdp);
    // exits of copy 0 feed copy 1's delay state
    const auto& exit = std::get<TwoSupportTransition>(mdp.row(kHardRewardState, 0));
    REQUIRE(exit.minus_state == 4 + kHardDelayState);
}

TEST_CASE("chain_hard_mdps: per-copy optimal arms are recovered by the exact solver") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    const std::vector<int> arms = {1, 0};
    const auto [value, policy] = solve_optimal(chain_hard_mdps(spec, arms), 1e-10);
    REQUIRE(policy.action_of[0 * 4 + kHardBanditState] == 1);
    REQUIRE(policy.action_of[1 * 4 + kHardBanditState] == 0);
}

TEST_CASE("hard_bandit_instance: arm layout and sampling") {
    const Bandit uniform = hard_bandit_instance(3, 0.0, 1);
    REQUIRE(uniform.arm_probs == std::vector<double>{0.5, 0.5, 0.5});
    const Bandit bandit = hard_bandit_instance(3, 0.1, 2);
    REQUIRE(bandit.arm_probs == std::vector<double>{0.5, 0.5, 0.6});
    REQUIRE_THROWS_AS(hard_bandit_instance(3, 0.6, 0), std::invalid_argument);

    Rng rng(3);
    long long wins = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) wins += uniform01(rng) < bandit.arm_probs[2];
    REQUIRE(std::abs(static_cast<double>(wins) / n - 0.6) < 0.005);
}

TEST_CASE("action_weights: a constant policy concentrates the full half mass") {
    const HardMdpSpec spec{3, 0.01, 0.9, 0};
    FunctionHistoryPolicy policy([](const std::vector<int>&) { return 2; });
    policy.on_state(kHardDelayState);
    const std::vector<double> w = action_weights(policy, spec, 1e-10);
    REQUIRE(w[2] == Approx(0.5).margin(1e-9));
    REQUIRE(w[0] == 0.0);
    REQUIRE(w[1] == 0.0);
}

TEST_CASE("action_weights: total mass is one half for arbitrary deterministic policies") {
    const HardMdpSpec spec{4, 0.01, 0.9, 0};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        FunctionHistoryPolicy policy = hashed_policy(seed, 4);
        policy.on_state(kHardDelayState);
        const std::vector<double> w = action_weights(policy, spec, 1e-10);
        double sum = 0.0;
        for (double x : w) sum += x;
        REQUIRE(sum <= 0.5 + 1e-12);
        REQUIRE(sum >= 0.5 - 1e-9);
    }
}

TEST_CASE("action_weights: parity policy matches the split geometric series") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    FunctionHistoryPolicy policy = parity_policy(0, 1);
    policy.on_state(kHardDelayState);
    const std::vector<double> w = action_weights(policy, spec, 1e-12);
    const double p = spec.p(), g = spec.discount;
    const double even = (1.0 - p) / (1.0 - p * g * p * g);
    const double odd = even * p * g;
    REQUIRE(w[0] == Approx(even).margin(1e-9));
    REQUIRE(w[1] == Approx(odd).margin(1e-9));
    REQUIRE(w[0] == Approx(0.275).margin(1e-9)); // 11/40 at gamma = 0.9
    REQUIRE(w[1] == Approx(0.225).margin(1e-9)); // 9/40
}

TEST_CASE("action_weights: requires a history ending in state 0") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    FunctionHistoryPolicy policy([](const std::vector<int>&) { return 0; });
    REQUIRE_THROWS_AS(action_weights(policy, spec, 1e-9), std::invalid_argument); // no history yet
    policy.on_state(kHardBanditState);
    REQUIRE_THROWS_AS(action_weights(policy, spec, 1e-9), std::invalid_argument);
    REQUIRE_THROWS_AS(action_weights(policy, spec, 0.0), std::invalid_argument);
}

TEST_CASE("action_weights: queries do not perturb the live policy") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    FunctionHistoryPolicy policy = hashed_policy(5, 2);
    policy.on_state(kHardDelayState);
    const std::vector<double> first = action_weights(policy, spec, 1e-10);
    const std::vector<double> second = action_weights(policy, spec, 1e-10);
    REQUIRE(first == second);
    REQUIRE(policy.last_state() == kHardDelayState);
}

TEST_CASE("weight persistence: high suboptimal mass at a phase start stays above 1/8") {
    // the discount must be close to 1 for the window to be non-trivial
    const HardMdpSpec spec{2, 0.001, 0.99, 0};
    const long long window = static_cast<long long>(1.0 / (16.0 * (1.0 - spec.discount))); // k <= 6
    REQUIRE(window >= 4);

    std::vector<FunctionHistoryPolicy> adversaries;
    adversaries.push_back(FunctionHistoryPolicy([](const std::vector<int>&) { return 1; }));
    adversaries.push_back(parity_policy(1, 0));
    adversaries.push_back(parity_policy(1, 1));
    for (std::uint64_t seed = 0; seed < 6; ++seed) adversaries.push_back(hashed_policy(seed, 2));

    for (auto& policy : adversaries) {
        policy.on_state(kHardDelayState);
        std::vector<double> w = action_weights(policy, spec, 1e-10);
        if (w[1] < 0.25) continue; // premise of the persistence claim
        std::unique_ptr<HistoryPolicy> walk = policy.fork();
        for (long long k = 0; k <= window; ++k) {
            const std::vector<double> wk = action_weights(*walk, spec, 1e-10);
            REQUIRE(wk[1] >= 0.125 - 1e-9);
            walk->on_state(kHardDelayState);
        }
    }
}

TEST_CASE("learn_bandit: a constant-arm policy wins every phase vote") {
    const HardMdpSpec spec{3, 0.01, 0.9, 0};
    FunctionHistoryPolicy policy([](const std::vector<int>&) { return 2; });
    const Bandit bandit = hard_bandit_instance(3, 0.1, 0);
    Rng rng(9);
    const LearnBanditResult result = learn_bandit(policy, bandit, spec, 5, rng);
    REQUIRE(result.best_arm == 2);
    REQUIRE(result.phase_votes[2] == 10);
    REQUIRE(result.phase_votes[0] == 0);
}

TEST_CASE("learn_bandit: N = 1 takes the majority of two phases") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    FunctionHistoryPolicy policy([](const std::vector<int>&) { return 0; });
    const Bandit bandit = hard_bandit_instance(2, 0.1, 1);
    Rng rng(10);
    const LearnBanditResult result = learn_bandit(policy, bandit, spec, 1, rng);
    REQUIRE(result.best_arm == 0);
    REQUIRE(result.phase_votes[0] == 2);
}

TEST_CASE("learn_bandit: deterministic given policy and seed") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    const Bandit bandit = hard_bandit_instance(2, 0.2, 1);
    FunctionHistoryPolicy a = hashed_policy(3, 2);
    FunctionHistoryPolicy b = hashed_policy(3, 2);
    Rng rng_a(77), rng_b(77);
    const LearnBanditResult ra = learn_bandit(a, bandit, spec, 10, rng_a);
    const LearnBanditResult rb = learn_bandit(b, bandit, spec, 10, rng_b);
    REQUIRE(ra.best_arm == rb.best_arm);
    REQUIRE(ra.phase_votes == rb.phase_votes);
    REQUIRE(ra.steps == rb.steps);
}

TEST_CASE("learn_bandit: the learning agent identifies the better arm in most seeds") {
    const int arms = 2;
    const double bandit_gap = 0.2, gamma = 0.8;
    // construction epsilon only shapes the skeleton; the bandit drives state 1
    const HardMdpSpec spec{arms, 0.05, gamma, 0};
    const TabularMdp skeleton = build_hard_mdp(spec);
    const UcrlConstants constants = derive_constants(4, arms, 0.2, 0.2, gamma);
    const Bandit bandit = hard_bandit_instance(arms, bandit_gap, 1);

    int correct = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        AgentConfig config;
        config.m_override = 5.0;
        config.keep_episode_logs = false;
        UcrlHistoryPolicy policy(make_agent(skeleton, constants, kHardDelayState, config));
        Rng rng(seed);
        const LearnBanditResult result = learn_bandit(policy, bandit, spec, 50, rng);
        correct += result.best_arm == 1;
    }
    REQUIRE(correct > 10);
}

TEST_CASE("phase_statistics: hand-segmented traces") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    // 0 0 0 1 + - 0 0 1: two completed phases of lengths 3 and 2
    const std::vector<int> trace = {0, 0, 0, 1, 2, 3, 0, 0, 1};
    const auto phases = phase_statistics(trace, {}, spec);
    REQUIRE(phases.size() == 2);
    REQUIRE(phases[0].start == 0);
    REQUIRE(phases[0].end == 2);
    REQUIRE(phases[0].length == 3);
    REQUIRE(phases[1].start == 6);
    REQUIRE(phases[1].length == 2);
    REQUIRE(std::isnan(phases[0].suboptimal_weight));
    REQUIRE_FALSE(phases[0].a_event);

    // an incomplete trailing phase is dropped
    const auto partial = phase_statistics({0, 0, 1, 2, 0, 0}, {}, spec);
    REQUIRE(partial.size() == 1);

    REQUIRE_THROWS_AS(phase_statistics({1, 0, 1}, {}, spec), std::invalid_argument);
    REQUIRE_THROWS_AS(phase_statistics({}, {}, spec), std::invalid_argument);
}

TEST_CASE("phase_statistics: threshold boundaries for the X and A events") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    const long long x_len = static_cast<long long>(std::ceil(1.0 / (4.0 * (1.0 - 0.9))));   // 3
    const long long a_len = static_cast<long long>(std::ceil(1.0 / (16.0 * (1.0 - 0.9))));  // 1

    std::vector<int> trace;
    for (long long i = 0; i < x_len; ++i) trace.push_back(0);
    trace.push_back(1);
    auto phases = phase_statistics(trace, {0.3}, spec);
    REQUIRE(phases.size() == 1);
    REQUIRE(phases[0].x_event);
    REQUIRE(phases[0].a_event);

    std::vector<int> shorter;
    for (long long i = 0; i < x_len - 1; ++i) shorter.push_back(0);
    shorter.push_back(1);
    phases = phase_statistics(shorter, {0.2}, spec);
    REQUIRE_FALSE(phases[0].x_event);
    REQUIRE(phases[0].length >= a_len);
    REQUIRE_FALSE(phases[0].a_event); // weight below 1/4
}

TEST_CASE("phase_statistics: long-run X fraction beats two thirds") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    const TabularMdp mdp = build_hard_mdp(spec);
    Rng rng(55);
    std::vector<int> trace = {0};
    int phases_seen = 0;
    while (phases_seen < 10000) {
        const int s = trace.back();
        const int next = sample_step(mdp, s, 0, rng);
        if (s != 0 && next == 0) ++phases_seen;
        trace.push_back(next);
    }
    const auto phases = phase_statistics(trace, {}, spec);
    REQUIRE(phases.size() >= 10000);
    long long x_count = 0;
    for (const auto& rec : phases) x_count += rec.x_event;
    const double fraction = static_cast<double>(x_count) / phases.size();
    REQUIRE(fraction >= 2.0 / 3.0);
    // P(X) = p^(ceil(1/(4(1-g))) - 1) for the integer-valued phase length
    const double threshold = std::ceil(1.0 / (4.0 * (1.0 - spec.discount)));
    const double exact = std::pow(spec.p(), threshold - 1.0);
    REQUIRE(fraction == Approx(exact).margin(0.02));
    REQUIRE(exact > 0.75);
}

TEST_CASE("suboptimality_gap_check: zero gap at zero epsilon") {
    const HardMdpSpec spec{2, 0.0, 0.9, 0};
    REQUIRE(suboptimality_gap_check(spec, 1) == Approx(0.0).margin(1e-12));
}

TEST_CASE("suboptimality_gap_check: exact closed form 32*g*eps/(4 - g^2)") {
    for (double gamma : {0.8, 0.85, 0.9, 0.95, 0.99}) {
        for (double eps : {0.005, 0.01}) {
            const HardMdpSpec spec{2, eps, gamma, 0};
            const double gap = suboptimality_gap_check(spec, 1);
            REQUIRE(gap == Approx(32.0 * gamma * eps / (4.0 - gamma * gamma)).margin(1e-10));
        }
    }
}

TEST_CASE("suboptimality_gap_check: at least 8*eps for discounts above 2(sqrt(2)-1)") {
    for (double gamma : {0.9, 0.95}) {
        for (double eps : {0.005, 0.01}) {
            const HardMdpSpec spec{2, eps, gamma, 0};
            REQUIRE(suboptimality_gap_check(spec, 1) >= 8.0 * eps);
        }
    }
    REQUIRE(suboptimality_gap_check(HardMdpSpec{2, 0.01, 0.9, 0}, 1) >= 0.08);
    REQUIRE(suboptimality_gap_check(HardMdpSpec{2, 0.005, 0.95, 0}, 1) >= 0.04);
}

TEST_CASE("suboptimality_gap_check: argument validation") {
    const HardMdpSpec spec{2, 0.01, 0.9, 0};
    REQUIRE_THROWS_AS(suboptimality_gap_check(spec, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(suboptimality_gap_check(spec, 2), std::invalid_argument);
}

TEST_CASE("nominal_phase_budget: symbolic form with placeholder constants") {
    REQUIRE(nominal_phase_budget(2, 0.1, 0.2, 0.8) ==
            Approx(0.01 * 2 / (0.01 * 0.04) * std::log(1.0 / 0.2)).margin(1e-12));
    const PhaseBudgetConstants constants{1.0, 4.0};
    REQUIRE(nominal_phase_budget(3, 0.2, 0.5, 0.9, constants) ==
            Approx(1.0 * 3 / (0.04 * 0.01) * std::log(8.0)).margin(1e-9));
    REQUIRE_THROWS_AS(nominal_phase_budget(0, 0.1, 0.2, 0.8), std::invalid_argument);
    REQUIRE_THROWS_AS(nominal_phase_budget(2, 0.0, 0.2, 0.8), std::invalid_argument);
}

TEST_CASE("geometric identities of the hard construction") {
    for (double gamma : {0.76, 0.8, 0.9, 0.95, 0.99}) {
        const double p = 1.0 / (2.0 - gamma);
        // closed form of sum_t p^t (1-p) gamma^t
        REQUIRE((1.0 - p) / (1.0 - p * gamma) == Approx(0.5).margin(1e-12));
        // direct summation to numerical convergence
        double sum = 0.0, term = 1.0 - p;
        while (term > 1e-18) {
            sum += term;
            term *= p * gamma;
        }
        REQUIRE(sum == Approx(0.5).margin(1e-12));
        REQUIRE(std::pow(p, 1.0 / (4.0 * (1.0 - gamma))) > 0.75);
    }
}
