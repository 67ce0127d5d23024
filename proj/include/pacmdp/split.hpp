#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "pacmdp/mdp.hpp"

namespace pacmdp {

struct SplitResult {
    TabularMdp mdp;
    std::vector<int> state_map; // original state -> state in the split MDP
};

namespace detail {

struct SupportEntry {
    int state;
    double mass;
};

inline int row_support_size(const TransitionRow& row) {
    int n = 0;
    for_each_successor(row, [&](int, double) { ++n; });
    return n;
}

} // namespace detail

/// Rewrites an arbitrary finite MDP into an equivalent one where every (s,a)
/// reaches at most two successors. Each row becomes a balanced binary routing
/// tree of depth D = ceil(log2(max out-degree)) over the padded successor list:
/// the first binary choice happens at (s,a) itself, internal nodes carry reward
/// 0 and action-independent rows, branch probabilities are conditional masses,
/// and the discount becomes gamma^(1/D) so a full traversal discounts by
/// exactly gamma. Zero-mass branches route to a reward-0 absorbing sink;
/// single-successor segments become probability-1 chains, keeping every
/// positive-probability path at length exactly D. Stationary-policy values
/// agree at mapped states with the original MDP.
///
/// An input whose rows all have at most two successors is returned with the
/// identity map (rows already in TwoSupportTransition form are kept verbatim;
/// dense rows are rewritten in two-support form without changing probabilities).
inline SplitResult split_to_two_support(const TabularMdp& input) {
    validate(input);

    int max_degree = 0;
    for (const auto& row : input.transitions)
        max_degree = std::max(max_degree, detail::row_support_size(row));

    SplitResult result;
    result.state_map.resize(input.num_states);
    for (int s = 0; s < input.num_states; ++s) result.state_map[s] = s;

    if (max_degree <= 2) {
        result.mdp = input;
        for (auto& row : result.mdp.transitions) {
            if (std::holds_alternative<TwoSupportTransition>(row)) continue;
            std::vector<detail::SupportEntry> support;
            for_each_successor(row, [&](int s2, double p) { support.push_back({s2, p}); });
            if (support.size() == 2)
                row = TwoSupportTransition{support[0].state, support[1].state, support[0].mass};
            else
                row = TwoSupportTransition{support[0].state, support[0].state, 1.0};
        }
        return result;
    }

    const int depth = static_cast<int>(std::ceil(std::log2(static_cast<double>(max_degree))));

    const int sink = input.num_states;
    std::vector<double> rewards = input.rewards;
    rewards.push_back(0.0);
    std::vector<TwoSupportTransition> node_rows; // routing nodes, appended after the sink
    auto new_node = [&](const TwoSupportTransition& row) {
        node_rows.push_back(row);
        rewards.push_back(0.0);
        return sink + 1 + static_cast<int>(node_rows.size()) - 1;
    };

    // Descends `levels` more steps into the slot segment [lo, hi), creating
    // routing nodes as needed; zero-mass segments collapse to the sink.
    auto build = [&](auto&& self, const std::vector<detail::SupportEntry>& slots, int lo, int hi,
                     int levels) -> int {
        double mass = 0.0;
        for (int i = lo; i < hi; ++i) mass += slots[i].mass;
        if (mass <= 0.0) return sink;
        if (levels == 0) return slots[lo].state;
        const int mid = lo + (hi - lo) / 2;
        double left_mass = 0.0;
        for (int i = lo; i < mid; ++i) left_mass += slots[i].mass;
        const int left = self(self, slots, lo, mid, levels - 1);
        const int right = self(self, slots, mid, hi, levels - 1);
        return new_node({left, right, left_mass / mass});
    };

    std::vector<TwoSupportTransition> root_rows(static_cast<std::size_t>(input.num_states) * input.num_actions);
    for (int s = 0; s < input.num_states; ++s) {
        for (int a = 0; a < input.num_actions; ++a) {
            std::vector<detail::SupportEntry> slots;
            for_each_successor(input.row(s, a), [&](int s2, double p) { slots.push_back({s2, p}); });
            slots.resize(static_cast<std::size_t>(1) << depth, {sink, 0.0});

            const int n_slots = static_cast<int>(slots.size());
            const int mid = n_slots / 2;
            double left_mass = 0.0, total = 0.0;
            for (int i = 0; i < n_slots; ++i) {
                total += slots[i].mass;
                if (i < mid) left_mass += slots[i].mass;
            }
            const int left = build(build, slots, 0, mid, depth - 1);
            const int right = build(build, slots, mid, n_slots, depth - 1);
            root_rows[static_cast<std::size_t>(s) * input.num_actions + a] = {left, right, left_mass / total};
        }
    }

    TabularMdp out;
    out.num_actions = input.num_actions;
    out.discount = std::pow(input.discount, 1.0 / depth);
    out.num_states = sink + 1 + static_cast<int>(node_rows.size());
    out.rewards = std::move(rewards);
    out.transitions.assign(static_cast<std::size_t>(out.num_states) * out.num_actions, TransitionRow{});
    for (int s = 0; s < input.num_states; ++s)
        for (int a = 0; a < input.num_actions; ++a)
            out.row(s, a) = root_rows[static_cast<std::size_t>(s) * input.num_actions + a];
    for (int a = 0; a < out.num_actions; ++a) out.row(sink, a) = TwoSupportTransition{sink, sink, 1.0};
    for (int i = 0; i < static_cast<int>(node_rows.size()); ++i)
        for (int a = 0; a < out.num_actions; ++a) out.row(sink + 1 + i, a) = node_rows[i];

    validate(out);
    result.mdp = std::move(out);
    return result;
}

} // namespace pacmdp
