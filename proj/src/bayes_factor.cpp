#include "vcbf/bayes_factor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "vcbf/error.hpp"

namespace vcbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_stats(const SufficientStats& stats) {
    if (!(stats.w_t >= 0.0) || !(stats.w_e >= 0.0) || !(stats.w_h >= 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "sums of squares must be non-negative");
    }
    if (stats.w_t == 0.0) {
        throw Error(ErrorKind::DegenerateData,
                    "all observations are identical (W_T = 0); the Bayes factor is undefined");
    }
}

}  // namespace

void PearsonTypeVI::validate() const {
    if (alpha > -1.0 && beta > -1.0 && kappa > 0.0 && std::isfinite(alpha) &&
        std::isfinite(beta) && std::isfinite(kappa)) {
        return;
    }
    std::ostringstream msg;
    msg << "prior needs alpha > -1, beta > -1, kappa > 0; got alpha=" << alpha
        << ", beta=" << beta << ", kappa=" << kappa;
    throw Error(ErrorKind::HyperparameterOutOfRange, msg.str());
}

std::string_view to_string(Method m) noexcept {
    return m == Method::ClosedForm ? "closed_form" : "quadrature";
}

std::string_view to_string(Model m) noexcept { return m == Model::M0 ? "M0" : "M1"; }

void ModelParams::validate() const {
    if (!std::isfinite(mu) || !(sigma2 > 0.0) || !std::isfinite(sigma2) || !(sigma_a2 >= 0.0) ||
        !std::isfinite(sigma_a2)) {
        std::ostringstream msg;
        msg << "model parameters need finite mu, sigma2 > 0, sigma_a2 >= 0; got mu=" << mu
            << ", sigma2=" << sigma2 << ", sigma_a2=" << sigma_a2;
        throw Error(ErrorKind::InvalidArgument, msg.str());
    }
}

double closed_form_beta(const BalancedDesign& design, double alpha) {
    return 0.5 * (design.n() - design.p()) - alpha - 2.0;
}

void validate_closed_form_alpha(const BalancedDesign& design, double alpha) {
    const double beta = closed_form_beta(design, alpha);
    if (alpha > -1.0 && beta > -1.0 && std::isfinite(alpha)) return;
    std::ostringstream msg;
    msg << "alpha=" << alpha << " gives beta=" << beta << " for p=" << design.p()
        << ", r=" << design.r() << "; the prior needs alpha > -1 and beta > -1 (alpha < "
        << 0.5 * (design.n() - design.p()) - 1.0 << ")";
    throw Error(ErrorKind::HyperparameterOutOfRange, msg.str());
}

double closed_form_log_bf_from_ratio(const BalancedDesign& design, double alpha, double ratio) {
    const double n = design.n();
    const double p = design.p();
    const double exponent = alpha - 0.5 * (n - p - 2.0);
    const double constant = log_gamma(0.5 * p + alpha + 0.5) + log_gamma(0.5 * (n - p)) -
                            log_gamma(0.5 * (n - 1.0)) - log_gamma(alpha + 1.0);
    if (ratio == 1.0) return constant;
    return constant + exponent * std::log(ratio);
}

BayesFactorResult closed_form_log_bf(const SufficientStats& stats, double alpha,
                                     double prior_prob_m1) {
    validate_closed_form_alpha(stats.design, alpha);
    check_stats(stats);
    if (stats.w_e == 0.0) return make_result(kInf, Method::ClosedForm, true, prior_prob_m1);
    const double ratio = std::min(1.0, stats.w_e / stats.w_t);
    return make_result(closed_form_log_bf_from_ratio(stats.design, alpha, ratio),
                       Method::ClosedForm, false, prior_prob_m1);
}

double pearson_vi_log_pdf(double tau, const PearsonTypeVI& prior) {
    prior.validate();
    if (!(tau > 0.0)) {
        std::ostringstream msg;
        msg << "prior density needs tau > 0, got " << tau;
        throw Error(ErrorKind::DomainError, msg.str());
    }
    const double t = prior.kappa * tau;
    return std::log(prior.kappa) + prior.beta * std::log(t) -
           (prior.alpha + prior.beta + 2.0) * std::log1p(t) -
           log_beta(prior.alpha + 1.0, prior.beta + 1.0);
}

BayesFactorResult quadrature_log_bf(const SufficientStats& stats, const PearsonTypeVI& prior,
                                    const QuadratureSpec& spec, double prior_prob_m1) {
    prior.validate();
    spec.validate();
    check_stats(stats);
    if (stats.w_e == 0.0) return make_result(kInf, Method::Quadrature, true, prior_prob_m1);

    const double n = stats.design.n();
    const double p = stats.design.p();
    const double ratio = std::min(1.0, stats.w_e / stats.w_t);
    const double rho = stats.design.r() / prior.kappa;
    const double up = 0.5 * (n - p);
    const double down = 0.5 * (n - 1.0);
    const double a = prior.alpha;
    const double b = prior.beta;
    const double log_norm = log_beta(a + 1.0, b + 1.0);

    // With t = kappa tau and u = t / (1 + t) the prior becomes a Beta(beta+1,
    // alpha+1) density in u and the likelihood ratio is
    // (1 + rho t)^((n-p)/2) (1 + rho t W_E/W_T)^(-(n-1)/2).
    auto integrand = [=](double u, double v) {
        const double t = u / v;
        return b * std::log(u) + a * std::log(v) - log_norm + up * std::log1p(rho * t) -
               down * std::log1p(rho * t * ratio);
    };
    const LogDomainValue bf = integrate_unit_interval(integrand, spec);
    return make_result(bf.log_magnitude, Method::Quadrature, false, prior_prob_m1);
}

double posterior_prob_m1(double log_bf10, double prior_prob_m1) {
    if (!(prior_prob_m1 > 0.0 && prior_prob_m1 < 1.0)) {
        std::ostringstream msg;
        msg << "prior probability of M1 must lie in (0, 1), got " << prior_prob_m1;
        throw Error(ErrorKind::DomainError, msg.str());
    }
    if (std::isnan(log_bf10)) throw Error(ErrorKind::DomainError, "log Bayes factor is NaN");
    const double logit = log_bf10 + std::log(prior_prob_m1) - std::log1p(-prior_prob_m1);
    if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
    const double e = std::exp(logit);
    return e / (1.0 + e);
}

BayesFactorResult make_result(double log_bf10, Method method, bool degenerate,
                              double prior_prob_m1) {
    BayesFactorResult res;
    res.log_bf10 = log_bf10;
    res.bf10 = std::exp(log_bf10);
    res.posterior_prob_m1 = posterior_prob_m1(log_bf10, prior_prob_m1);
    res.method = method;
    res.decision = res.bf10 > 1.0 ? Model::M1 : Model::M0;
    res.degenerate = degenerate;
    return res;
}

}  // namespace vcbf
