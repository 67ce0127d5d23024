#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "pacmdp/lowerbound.hpp"
#include "pacmdp/mdp.hpp"

namespace pacmdp {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// MDP file format
//
// {
//   "num_states": 2, "num_actions": 1, "discount": 0.9,
//   "rewards": [1.0, 0.0],
//   "transitions": [                       // [state][action]
//     [ {"dense": [0.9, 0.1]} ],
//     [ {"plus": 1, "minus": 0, "p": 0.8} ]
//   ]
// }
//
// Real values round-trip losslessly (shortest representation that parses back
// to the identical double).

inline Json to_json(const TabularMdp& mdp) {
    Json j;
    j["num_states"] = mdp.num_states;
    j["num_actions"] = mdp.num_actions;
    j["discount"] = mdp.discount;
    j["rewards"] = mdp.rewards;
    Json rows = Json::array();
    for (int s = 0; s < mdp.num_states; ++s) {
        Json per_action = Json::array();
        for (int a = 0; a < mdp.num_actions; ++a) {
            const auto& row = mdp.row(s, a);
            Json cell;
            if (const auto* dense = std::get_if<DenseTransition>(&row)) {
                cell["dense"] = *dense;
            } else {
                const auto& two = std::get<TwoSupportTransition>(row);
                cell["plus"] = two.plus_state;
                cell["minus"] = two.minus_state;
                cell["p"] = two.plus_prob;
            }
            per_action.push_back(std::move(cell));
        }
        rows.push_back(std::move(per_action));
    }
    j["transitions"] = std::move(rows);
    return j;
}

inline TabularMdp mdp_from_json(const Json& j) {
    TabularMdp mdp;
    mdp.num_states = j.at("num_states").get<int>();
    mdp.num_actions = j.at("num_actions").get<int>();
    mdp.discount = j.at("discount").get<double>();
    mdp.rewards = j.at("rewards").get<std::vector<double>>();
    const Json& rows = j.at("transitions");
    if (static_cast<int>(rows.size()) != mdp.num_states)
        throw std::invalid_argument("mdp_from_json: transitions outer size mismatch");
    mdp.transitions.resize(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions);
    for (int s = 0; s < mdp.num_states; ++s) {
        if (static_cast<int>(rows[s].size()) != mdp.num_actions)
            throw std::invalid_argument("mdp_from_json: transitions inner size mismatch");
        for (int a = 0; a < mdp.num_actions; ++a) {
            const Json& cell = rows[s][a];
            if (cell.contains("dense")) {
                mdp.row(s, a) = cell.at("dense").get<DenseTransition>();
            } else {
                mdp.row(s, a) = TwoSupportTransition{cell.at("plus").get<int>(), cell.at("minus").get<int>(),
                                                     cell.at("p").get<double>()};
            }
        }
    }
    validate(mdp);
    return mdp;
}

inline void save_mdp(const TabularMdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_mdp: cannot open " + path);
    out << to_json(mdp).dump(2) << '\n';
    if (!out) throw std::runtime_error("save_mdp: write failed for " + path);
}

inline TabularMdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_mdp: cannot open " + path);
    Json j = Json::parse(in);
    return mdp_from_json(j);
}

// ---------------------------------------------------------------------------
// Hard-instance specs

inline Json to_json(const HardMdpSpec& spec) {
    return Json{{"num_actions", spec.num_actions},
                {"epsilon", spec.epsilon},
                {"discount", spec.discount},
                {"optimal_arm", spec.optimal_arm}};
}

inline HardMdpSpec hard_spec_from_json(const Json& j) {
    HardMdpSpec spec;
    spec.num_actions = j.at("num_actions").get<int>();
    spec.epsilon = j.at("epsilon").get<double>();
    spec.discount = j.at("discount").get<double>();
    spec.optimal_arm = j.value("optimal_arm", 0);
    validate(spec);
    return spec;
}

} // namespace pacmdp
