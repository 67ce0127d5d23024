#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pacmdp {

/// The progression z_i = 2^i - 2 up to and including the first element >= bound.
inline std::vector<int> z_progression(int bound) {
    if (bound < 0) throw std::domain_error("z_progression: bound must be non-negative");
    std::vector<int> zs;
    for (int i = 1;; ++i) {
        const int z = (1 << i) - 2;
        zs.push_back(z);
        if (z >= bound) break;
    }
    return zs;
}

/// Every derived constant of the algorithm. The fields follow the constants
/// table exactly; natural logarithms throughout.
struct UcrlConstants {
    // inputs
    double epsilon = 0.0;
    double delta = 0.0;
    double discount = 0.0;
    int num_states = 0;
    int num_actions = 0;
    // derived
    double w_min = 0.0;           // epsilon(1-gamma)/(4|S|)
    int iota_max = 0;             // ceil(log2(8|S| / (epsilon(1-gamma)^2)))
    std::vector<int> iota_set;    // {0, ..., iota_max}
    std::vector<int> kappa_set;   // Z(|S|)
    int beta = 0;                 // ceil(log(1/(1-gamma)) / (2 log 2))
    std::vector<int> d_set;       // Z(beta)
    long long H = 0;              // ceil((1/(1-gamma)) log(8|S|/(epsilon(1-gamma))))
    double delta1 = 0.0;          // delta / (2|SxA|^2 |KxI|)
    double L1 = 0.0;              // log(2/delta1)
    double m = 0.0;               // 20 L1 |KxI| |D|^2 / (epsilon^2 (1-gamma)^(2+2/beta))
    double N = 0.0;               // 6 |SxA| m
    long long U_max = 0;          // |SxA| |KxI|   (product form)
    double E_max = 0.0;           // 4 N |KxI|

    long long kappa_iota_count() const {
        return static_cast<long long>(kappa_set.size()) * static_cast<long long>(iota_set.size());
    }
    double w_iota(int iota) const { return std::ldexp(w_min, iota); }
};

inline UcrlConstants derive_constants(int num_states, int num_actions, double epsilon, double delta,
                                      double discount) {
    if (num_states < 1 || num_actions < 1)
        throw std::domain_error("derive_constants: num_states and num_actions must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("derive_constants: epsilon must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("derive_constants: delta must lie in (0,1)");
    if (!(discount > 0.0 && discount < 1.0)) throw std::domain_error("derive_constants: discount must lie in (0,1)");

    UcrlConstants c;
    c.epsilon = epsilon;
    c.delta = delta;
    c.discount = discount;
    c.num_states = num_states;
    c.num_actions = num_actions;

    const double S = num_states;
    const double one_minus = 1.0 - discount;
    c.w_min = epsilon * one_minus / (4.0 * S);
    c.iota_max = static_cast<int>(std::ceil(std::log(8.0 * S / (epsilon * one_minus * one_minus)) / std::log(2.0)));
    c.iota_set.resize(c.iota_max + 1);
    for (int i = 0; i <= c.iota_max; ++i) c.iota_set[i] = i;
    c.kappa_set = z_progression(num_states);
    c.beta = static_cast<int>(std::ceil(std::log(1.0 / one_minus) / (2.0 * std::log(2.0))));
    c.beta = std::max(c.beta, 1);
    c.d_set = z_progression(c.beta);
    c.H = static_cast<long long>(std::ceil(std::log(8.0 * S / (epsilon * one_minus)) / one_minus));

    const double sa = static_cast<double>(num_states) * num_actions;
    const double ki = static_cast<double>(c.kappa_iota_count());
    c.delta1 = delta / (2.0 * sa * sa * ki);
    c.L1 = std::log(2.0 / c.delta1);
    const double d_count = static_cast<double>(c.d_set.size());
    c.m = 20.0 * c.L1 * ki * d_count * d_count /
          (epsilon * epsilon * std::pow(one_minus, 2.0 + 2.0 / c.beta));
    c.N = 6.0 * sa * c.m;
    c.U_max = static_cast<long long>(num_states) * num_actions * c.kappa_iota_count();
    c.E_max = 4.0 * c.N * ki;
    return c;
}

/// Knownness index kappa(iota, n) = max{z in K : z <= n / (w_iota * m)}.
/// `m_override` substitutes m for desk-scale experiments; the constants object
/// always reports the faithful m.
inline int knownness(int iota, long long n, const UcrlConstants& c,
                     std::optional<double> m_override = std::nullopt) {
    if (iota < 0 || iota > c.iota_max) throw std::invalid_argument("knownness: iota outside the index set");
    if (n < 0) throw std::invalid_argument("knownness: negative count");
    const double m_eff = m_override.value_or(c.m);
    const double ratio = static_cast<double>(n) / (c.w_iota(iota) * m_eff);
    int best = c.kappa_set.front();
    for (int z : c.kappa_set)
        if (z <= ratio) best = z;
    return best;
}

} // namespace pacmdp
