#pragma once

#include <string_view>

#include "vcbf/core_math.hpp"
#include "vcbf/data_model.hpp"

namespace vcbf {

// Scaled beta-prime prior on the variance ratio tau:
// kappa (kappa tau)^beta (1 + kappa tau)^(-alpha-beta-2) / B(alpha+1, beta+1).
struct PearsonTypeVI {
    double alpha = -0.5;
    double beta = 0.0;
    double kappa = 1.0;

    // Throws HyperparameterOutOfRange unless alpha > -1, beta > -1, kappa > 0.
    void validate() const;
};

enum class Method { ClosedForm, Quadrature };
enum class Model { M0, M1 };

std::string_view to_string(Method m) noexcept;
std::string_view to_string(Model m) noexcept;

struct BayesFactorResult {
    double log_bf10 = 0.0;
    double bf10 = 1.0;
    double posterior_prob_m1 = 0.5;
    Method method = Method::ClosedForm;
    Model decision = Model::M0;
    bool degenerate = false;
};

// y_ij = mu + a_i + e_ij with a_i ~ N(0, sigma_a2), e_ij ~ N(0, sigma2).
struct ModelParams {
    double mu = 0.0;
    double sigma2 = 1.0;
    double sigma_a2 = 0.0;

    // Throws InvalidArgument unless sigma2 > 0, sigma_a2 >= 0, all finite.
    void validate() const;
    double variance_ratio() const { return sigma_a2 / sigma2; }
    Model truth() const { return sigma_a2 == 0.0 ? Model::M0 : Model::M1; }
};

constexpr double kDefaultAlpha = -0.5;
constexpr double kDefaultPriorProbM1 = 0.5;

// The beta that pairs with alpha in the closed form, (n - p)/2 - alpha - 2.
double closed_form_beta(const BalancedDesign& design, double alpha);

// Throws HyperparameterOutOfRange (naming the implied beta) unless
// alpha > -1 and closed_form_beta(design, alpha) > -1.
void validate_closed_form_alpha(const BalancedDesign& design, double alpha);

// Bayes factor of the random-effects model against the no-effects model under
// the prior with kappa = r and beta = closed_form_beta. Depends on the data
// only through W_E / W_T. W_T = 0 throws DegenerateData; W_E = 0 gives
// +infinity with the degenerate flag.
BayesFactorResult closed_form_log_bf(const SufficientStats& stats, double alpha,
                                     double prior_prob_m1 = kDefaultPriorProbM1);

// Same value from the ratio W_E / W_T in (0, 1]; no validation beyond alpha.
double closed_form_log_bf_from_ratio(const BalancedDesign& design, double alpha, double ratio);

double pearson_vi_log_pdf(double tau, const PearsonTypeVI& prior);

// Bayes factor for an arbitrary Pearson type VI prior by numerical
// integration over the compactified variance ratio.
BayesFactorResult quadrature_log_bf(const SufficientStats& stats, const PearsonTypeVI& prior,
                                    const QuadratureSpec& spec = {},
                                    double prior_prob_m1 = kDefaultPriorProbM1);

// Posterior probability of M1 from log BF10 and the prior probability of M1.
double posterior_prob_m1(double log_bf10, double prior_prob_m1 = kDefaultPriorProbM1);

// Fills bf10, posterior and decision from log BF10.
BayesFactorResult make_result(double log_bf10, Method method, bool degenerate,
                              double prior_prob_m1 = kDefaultPriorProbM1);

}  // namespace vcbf
