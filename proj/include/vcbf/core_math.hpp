#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <type_traits>
#include <utility>

namespace vcbf {

// A positive quantity stored as its natural log. -inf is zero, +inf is a
// divergent value.
struct LogDomainValue {
    double log_magnitude = -std::numeric_limits<double>::infinity();

    static LogDomainValue from_linear(double value);

    double linear() const { return std::exp(log_magnitude); }
    bool is_zero() const { return log_magnitude == -std::numeric_limits<double>::infinity(); }
    bool is_divergent() const { return log_magnitude == std::numeric_limits<double>::infinity(); }

    friend LogDomainValue operator*(LogDomainValue a, LogDomainValue b) {
        return {a.log_magnitude + b.log_magnitude};
    }
    friend bool operator==(const LogDomainValue&, const LogDomainValue&) = default;
};

struct QuadratureSpec {
    double rel_tolerance = 1e-8;
    double abs_tolerance = 0.0;
    int max_subdivisions = 200;

    // Throws DomainError unless rel_tolerance in (0,1), abs_tolerance >= 0 and
    // max_subdivisions >= 10.
    void validate() const;
};

double log_gamma(double x);
double log_beta(double a, double b);

// ln of sqrt(2 pi) e^{-g1 x} (g1 x)^{g1 x + g2 - 1/2}, the Stirling form of
// Gamma(g1 x + g2).
double stirling_log_gamma(double gamma1, double x, double gamma2);

// ln(e^a + e^b) without overflow; either argument may be -inf.
double log_add_exp(double a, double b);

// Log-domain integrand on (0,1). Receives u and 1-u separately so callers can
// keep full precision next to u = 1.
using LogIntegrand = std::function<double(double u, double one_minus_u)>;

struct QuadratureReport {
    LogDomainValue value;
    double log_error_estimate = -std::numeric_limits<double>::infinity();
    int evaluations = 0;
    int intervals = 0;
};

// log of the integral over (0,1) of exp(f(u)). Adaptive double-exponential
// rule on a partition seeded at the integrand's bulk; f is never evaluated at
// u = 0 or u = 1. Throws QuadratureFailure when the tolerance is not reached
// within spec.max_subdivisions intervals or when f returns NaN.
QuadratureReport integrate_unit_interval_report(const LogIntegrand& f,
                                                const QuadratureSpec& spec = {});

template <typename F>
LogDomainValue integrate_unit_interval(F&& f, const QuadratureSpec& spec = {}) {
    if constexpr (std::is_invocable_r_v<double, F, double, double>) {
        return integrate_unit_interval_report(LogIntegrand(std::forward<F>(f)), spec).value;
    } else {
        static_assert(std::is_invocable_r_v<double, F, double>,
                      "integrand must take (u) or (u, 1 - u)");
        // a node whose u rounds to 1 is dropped rather than handed to f
        return integrate_unit_interval_report(
                   [&f](double u, double) {
                       return u < 1.0 ? static_cast<double>(f(u))
                                      : -std::numeric_limits<double>::infinity();
                   },
                   spec)
            .value;
    }
}

}  // namespace vcbf
