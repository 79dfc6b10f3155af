#include "vcbf/asymptotics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "vcbf/core_math.hpp"
#include "vcbf/error.hpp"

namespace vcbf {

Scenario Scenario::r_grows(int p) {
    if (p < 2) throw Error(ErrorKind::InvalidArgument, "scenario 1 needs a fixed p >= 2");
    return {ScenarioKind::RGrows, p};
}

Scenario Scenario::p_grows(int r) {
    if (r < 2) throw Error(ErrorKind::InvalidArgument, "scenario 2 needs a fixed r >= 2");
    return {ScenarioKind::PGrows, r};
}

int Scenario::number() const noexcept {
    switch (kind) {
        case ScenarioKind::RGrows: return 1;
        case ScenarioKind::PGrows: return 2;
        case ScenarioKind::BothGrow: return 3;
    }
    return 0;
}

std::string Scenario::describe() const {
    switch (kind) {
        case ScenarioKind::RGrows: return "r grows, p=" + std::to_string(fixed);
        case ScenarioKind::PGrows: return "p grows, r=" + std::to_string(fixed);
        case ScenarioKind::BothGrow: return "p and r grow";
    }
    return "";
}

double h(long long r) {
    if (r < 2) {
        throw Error(ErrorKind::DomainError, "h(r) needs r >= 2, got " + std::to_string(r));
    }
    if (r == 2) return 1.0;
    const double x = static_cast<double>(r);
    return std::expm1(std::log(x) / (x - 1.0));
}

namespace {

void check_truth(Model true_model, double variance_ratio) {
    if (!(variance_ratio >= 0.0) || !std::isfinite(variance_ratio)) {
        std::ostringstream msg;
        msg << "variance ratio must be finite and >= 0, got " << variance_ratio;
        throw Error(ErrorKind::InvalidArgument, msg.str());
    }
    if (true_model == Model::M1 && variance_ratio == 0.0) {
        throw Error(ErrorKind::InvalidArgument, "M1 as the true model needs sigma_a2 > 0");
    }
    if (true_model == Model::M0 && variance_ratio != 0.0) {
        throw Error(ErrorKind::InvalidArgument, "M0 as the true model needs sigma_a2 = 0");
    }
}

double require_aux(std::optional<double> aux, const char* what) {
    if (!aux || !std::isfinite(*aux) || *aux < 0.0) {
        throw Error(ErrorKind::InvalidArgument,
                    std::string("scenario 1 needs a finite, non-negative ") + what);
    }
    return *aux;
}

}  // namespace

ConsistencyVerdict consistency_verdict(const Scenario& scenario, Model true_model,
                                       double variance_ratio) {
    check_truth(true_model, variance_ratio);
    ConsistencyVerdict v;
    v.scenario = scenario;
    v.true_model = true_model;
    v.variance_ratio = variance_ratio;
    if (scenario.kind == ScenarioKind::PGrows) {
        const double boundary = h(scenario.fixed);
        v.boundary_value = boundary;
        if (true_model == Model::M1) {
            v.consistent = variance_ratio > boundary;
            v.indeterminate = variance_ratio == boundary;
        }
    }
    return v;
}

double ratio_limit(const Scenario& scenario, Model true_model, const ModelParams& params,
                   std::optional<double> aux) {
    params.validate();
    const double tau = params.variance_ratio();
    check_truth(true_model, tau);
    switch (scenario.kind) {
        case ScenarioKind::RGrows: {
            if (true_model == Model::M0) {
                throw Error(ErrorKind::NoDeterministicLimit,
                            "with p fixed and r growing, W_E/W_T under M0 tends to 1 at a random "
                            "rate set by W_H; compare the simulated log BF instead");
            }
            const double c1 = require_aux(aux, "c1 (chi-square spread of the unit effects)");
            return 1.0 / (1.0 + tau * c1 / scenario.fixed);
        }
        case ScenarioKind::PGrows:
            return true_model == Model::M0 ? 1.0 : 1.0 + scenario.fixed * tau;
        case ScenarioKind::BothGrow:
            return true_model == Model::M0 ? 1.0 : 1.0 / (1.0 + tau);
    }
    return 0.0;
}

double scenario_statistic(const Scenario& scenario, const SufficientStats& stats) {
    const double n = stats.design.n();
    const double p = stats.design.p();
    const double r = stats.design.r();
    switch (scenario.kind) {
        case ScenarioKind::RGrows: return stats.w_e / stats.w_t;
        case ScenarioKind::PGrows: return stats.w_h / stats.w_e * (n - p) / (p - 1.0);
        case ScenarioKind::BothGrow: return stats.w_e / stats.w_t * r / (r - 1.0);
    }
    return 0.0;
}

double ratio_from_statistic(const Scenario& scenario, const BalancedDesign& design, double statistic) {
    const double n = design.n();
    const double p = design.p();
    const double r = design.r();
    switch (scenario.kind) {
        case ScenarioKind::RGrows: return statistic;
        case ScenarioKind::PGrows: return 1.0 / (1.0 + statistic * (p - 1.0) / (n - p));
        case ScenarioKind::BothGrow: return statistic * (r - 1.0) / r;
    }
    return 0.0;
}

double asymptotic_log_bf(const Scenario& scenario, Model true_model, const BalancedDesign& design,
                         double alpha, const ModelParams& params, std::optional<double> aux) {
    params.validate();
    const double tau = params.variance_ratio();
    check_truth(true_model, tau);
    const double p = design.p();
    const double r = design.r();
    const double n = design.n();
    const double a = alpha;
    const bool m0 = true_model == Model::M0;

    switch (scenario.kind) {
        case ScenarioKind::RGrows: {
            if (scenario.fixed != design.p()) {
                throw Error(ErrorKind::InvalidArgument, "design p differs from the scenario's fixed p");
            }
            const double head = log_gamma(0.5 * p + a + 0.5) - log_gamma(a + 1.0);
            if (m0) {
                const double w_h = require_aux(aux, "W_H");
                return head - 0.5 * (p - 1.0) * std::log(0.5 * n) + w_h / (2.0 * params.sigma2);
            }
            const double c1 = require_aux(aux, "c1 (chi-square spread of the unit effects)");
            return head - 0.5 * (p - 1.0) * (std::log(0.5 * p) + std::log(r)) +
                   0.5 * r * p * std::log1p(c1 * tau / p);
        }
        case ScenarioKind::PGrows: {
            if (scenario.fixed != design.r()) {
                throw Error(ErrorKind::InvalidArgument, "design r differs from the scenario's fixed r");
            }
            // ln c2 with c2 = sqrt(2 pi) r / (Gamma(alpha+1) sqrt(r-1))
            const double log_c2 = 0.5 * std::log(2.0 * std::numbers::pi) + std::log(r) -
                                  log_gamma(a + 1.0) - 0.5 * std::log(r - 1.0);
            if (m0) {
                return log_c2 + (a + 0.5) * std::log(0.5) - (1.0 + a) * std::log1p(1.0 / (r - 1.0)) +
                       (a + 0.5) * std::log(p) - 0.5 * p * std::log(r) - (r - 1.0) / (2.0 * r);
            }
            return log_c2 + (a + 0.5) * std::log(0.5 * p) +
                   (1.0 + a) * std::log((r - 1.0) / (r * (1.0 + tau))) +
                   0.5 * p * ((r - 1.0) * std::log1p(tau) - std::log(r)) -
                   (1.0 + r * tau) * (r - 1.0) / (2.0 * r * (1.0 + tau));
        }
        case ScenarioKind::BothGrow: {
            // ln c3 with c3 = sqrt(2 pi) / (2^(alpha+1/2) Gamma(alpha+1))
            const double log_c3 = 0.5 * std::log(2.0 * std::numbers::pi) -
                                  (a + 0.5) * std::numbers::ln2 - log_gamma(a + 1.0);
            const double common = log_c3 + (a + 0.5) * std::log(p) + (a + 0.5) * std::log1p(-1.0 / r);
            if (m0) return common - 0.5 * (p - 1.0) * std::log(r);
            return common + (0.5 - (1.0 + a) / (r - 1.0)) * std::log(r) +
                   (0.5 * (n - p) - (1.0 + a)) * (std::log1p(tau) - std::log(r) / (r - 1.0));
        }
    }
    return 0.0;
}

}  // namespace vcbf
