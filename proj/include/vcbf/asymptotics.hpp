#pragma once

#include <optional>
#include <string>

#include "vcbf/bayes_factor.hpp"
#include "vcbf/data_model.hpp"

namespace vcbf {

enum class ScenarioKind {
    RGrows,    // p fixed, r -> inf
    PGrows,    // r fixed, p -> inf
    BothGrow,  // p, r -> inf
};

struct Scenario {
    ScenarioKind kind = ScenarioKind::BothGrow;
    int fixed = 0;  // p for RGrows, r for PGrows, unused otherwise

    static Scenario r_grows(int p);
    static Scenario p_grows(int r);
    static Scenario both_grow() { return {}; }

    // 1, 2 or 3 in the order above
    int number() const noexcept;
    std::string describe() const;
};

struct ConsistencyVerdict {
    Scenario scenario;
    Model true_model = Model::M0;
    double variance_ratio = 0.0;
    bool consistent = true;
    bool indeterminate = false;  // variance ratio exactly on the boundary
    std::optional<double> boundary_value;
};

// r^(1/(r-1)) - 1: below this variance ratio the Bayes factor picks the
// no-effects model as p grows with r fixed. Throws DomainError for r < 2.
double h(long long r);

ConsistencyVerdict consistency_verdict(const Scenario& scenario, Model true_model,
                                       double variance_ratio);

// Probability limit of the scenario's sums-of-squares statistic (see
// scenario_statistic). RGrows under M1 needs aux = c1, the realized chi-square
// (p-1) spread of the unit effects; RGrows under M0 has no deterministic
// limit and throws NoDeterministicLimit.
double ratio_limit(const Scenario& scenario, Model true_model, const ModelParams& params,
                   std::optional<double> aux = {});

// RGrows: W_E/W_T. PGrows: (W_H/W_E)(n-p)/(p-1). BothGrow: (W_E/W_T) r/(r-1).
double scenario_statistic(const Scenario& scenario, const SufficientStats& stats);

// W_E/W_T implied by a value of the scenario's statistic at this design;
// used to pin the exact Bayes factor to a probability limit.
double ratio_from_statistic(const Scenario& scenario, const BalancedDesign& design, double statistic);

// Large-sample approximation of the closed-form log BF along the scenario.
// RGrows needs aux: W_H under M0, c1 under M1.
double asymptotic_log_bf(const Scenario& scenario, Model true_model, const BalancedDesign& design,
                         double alpha, const ModelParams& params, std::optional<double> aux = {});

}  // namespace vcbf
