#include "vcbf/core_math.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "vcbf/error.hpp"

namespace vcbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;
constexpr double kEulerGamma = 0.57721566490153286060651209008240;

// zeta(k) - 1 for k = 2..30
constexpr std::array<double, 29> kZetaMinusOne = {
    0.64493406684822643647,   0.2020569031595942854,    0.082323233711138191516,
    0.036927755143369926331,  0.017343061984449139715,  0.0083492773819228268398,
    0.0040773561979443393787, 0.0020083928260822144179, 0.00099457512781808533715,
    0.0004941886041194645587, 0.00024608655330804829864, 0.00012271334757848914675,
    6.1248135058704829259e-5, 3.0588236307020493552e-5, 1.5282259408651871733e-5,
    7.6371976378997622736e-6, 3.8172932649998398565e-6, 1.9082127165539389257e-6,
    9.5396203387279611315e-7, 4.7693298678780646312e-7, 2.3845050272773299e-7,
    1.1921992596531107307e-7, 5.9608189051259479612e-8, 2.9803503514652280186e-8,
    1.4901554828365041235e-8, 7.450711789835429492e-9,  3.7253340247884570548e-9,
    1.8626597235130490064e-9, 9.3132743241966818287e-10,
};

// sum_{k>=2} (-1)^k (zeta(k) - 1) z^k / k, |z| <= 1/4
double zeta_tail_series(double z) {
    double sum = 0.0;
    double zk = z;
    for (std::size_t i = 0; i < kZetaMinusOne.size(); ++i) {
        zk *= z;
        const double k = static_cast<double>(i + 2);
        const double term = kZetaMinusOne[i] * zk / k;
        sum += (i % 2 == 0) ? term : -term;
    }
    return sum;
}

double stirling_series(double x) {
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double corr =
        inv * (1.0 / 12.0 +
               inv2 * (-1.0 / 360.0 +
                       inv2 * (1.0 / 1260.0 +
                               inv2 * (-1.0 / 1680.0 +
                                       inv2 * (1.0 / 1188.0 +
                                               inv2 * (-691.0 / 360360.0 +
                                                       inv2 * (1.0 / 156.0 +
                                                               inv2 * (-3617.0 / 122400.0))))))));
    return (x - 0.5) * std::log(x) - x + kHalfLog2Pi + corr;
}

}  // namespace

LogDomainValue LogDomainValue::from_linear(double value) {
    if (!(value >= 0.0)) {
        throw Error(ErrorKind::DomainError, "LogDomainValue requires a non-negative value");
    }
    return {std::log(value)};
}

void QuadratureSpec::validate() const {
    if (!(rel_tolerance > 0.0 && rel_tolerance < 1.0)) {
        throw Error(ErrorKind::DomainError, "quadrature rel_tolerance must lie in (0, 1)");
    }
    if (!(abs_tolerance >= 0.0)) {
        throw Error(ErrorKind::DomainError, "quadrature abs_tolerance must be >= 0");
    }
    if (max_subdivisions < 10) {
        throw Error(ErrorKind::DomainError, "quadrature max_subdivisions must be >= 10");
    }
}

double log_gamma(double x) {
    if (!(x > 0.0) || std::isinf(x)) {
        if (x == kInf) return kInf;
        std::ostringstream msg;
        msg << "log_gamma requires x > 0, got " << x;
        throw Error(ErrorKind::DomainError, msg.str());
    }
    // Series around the zeros at 1 and 2 keep the relative error small there.
    if (std::fabs(x - 1.0) <= 0.25) {
        const double z = x - 1.0;
        return -kEulerGamma * z + (z - std::log1p(z)) + zeta_tail_series(z);
    }
    if (std::fabs(x - 2.0) <= 0.25) {
        const double z = x - 2.0;
        return (1.0 - kEulerGamma) * z + zeta_tail_series(z);
    }
    if (x >= 10.0) return stirling_series(x);

    double shifted = x;
    double product = 1.0;
    while (shifted < 10.0) {
        product *= shifted;
        shifted += 1.0;
    }
    return stirling_series(shifted) - std::log(product);
}

double log_beta(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) {
        std::ostringstream msg;
        msg << "log_beta requires a > 0 and b > 0, got (" << a << ", " << b << ")";
        throw Error(ErrorKind::DomainError, msg.str());
    }
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double stirling_log_gamma(double gamma1, double x, double gamma2) {
    const double base = gamma1 * x;
    if (!(base > 0.0)) {
        std::ostringstream msg;
        msg << "stirling_log_gamma needs gamma1 * x > 0, got " << base;
        throw Error(ErrorKind::DomainError, msg.str());
    }
    return kHalfLog2Pi - base + (base + gamma2 - 0.5) * std::log(base);
}

double log_add_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    if (a == b) return a + std::numbers::ln2;
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

// ---------------------------------------------------------------------------
// Adaptive tanh-sinh quadrature on (0,1)
// ---------------------------------------------------------------------------

namespace {

constexpr double kScanHalfWidth = 36.0;  // logit range probed for the bulk
constexpr int kScanPoints = 129;
constexpr double kLevelZeroStep = 0.5;
constexpr double kMaxAbscissa = 6.1;  // beyond this every node sits on an endpoint
constexpr int kInitialLevel = 2;
constexpr int kMaxLevel = 8;

double log_cosh(double q) {
    const double a = std::fabs(q);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

struct Interval {
    double a = 0.0;
    double b = 1.0;
    int level = -1;
    double log_sum = -kInf;  // log of sum(w_k f_k) over every node so far
    double log_estimate = -kInf;
    double log_error = kInf;
};

class TanhSinhIntegrator {
public:
    TanhSinhIntegrator(const LogIntegrand& f, const QuadratureSpec& spec) : f_(f), spec_(spec) {}

    QuadratureReport run() {
        const std::vector<double> cuts = initial_breakpoints();
        std::vector<Interval> intervals;
        double lo = 0.0;
        for (double cut : cuts) {
            intervals.push_back(make_interval(lo, cut));
            lo = cut;
        }
        intervals.push_back(make_interval(lo, 1.0));

        while (true) {
            double total = -kInf;
            double total_error = -kInf;
            for (const auto& iv : intervals) {
                total = log_add_exp(total, iv.log_estimate);
                total_error = log_add_exp(total_error, iv.log_error);
            }
            const double target = std::max(std::log(spec_.abs_tolerance),
                                           std::log(spec_.rel_tolerance) + total);
            if (total_error <= target || total == -kInf) {
                QuadratureReport report;
                report.value = {total};
                report.log_error_estimate = total_error;
                report.evaluations = evaluations_;
                report.intervals = static_cast<int>(intervals.size());
                return report;
            }

            auto worst = std::max_element(
                intervals.begin(), intervals.end(),
                [](const Interval& x, const Interval& y) { return x.log_error < y.log_error; });
            if (worst->level < kMaxLevel) {
                refine(*worst);
                continue;
            }
            if (static_cast<int>(intervals.size()) >= spec_.max_subdivisions) {
                std::ostringstream msg;
                msg << "quadrature did not converge within " << spec_.max_subdivisions
                    << " subdivisions (log estimate " << total << ", log error "
                    << total_error << ", log target " << target << ")";
                throw Error(ErrorKind::QuadratureFailure, msg.str());
            }
            const double a = worst->a;
            const double b = worst->b;
            const double mid = a + 0.5 * (b - a);
            if (!(mid > a && mid < b)) {
                throw Error(ErrorKind::QuadratureFailure,
                            "quadrature interval collapsed below floating point resolution");
            }
            *worst = make_interval(a, mid);
            intervals.push_back(make_interval(mid, b));
        }
    }

private:
    double eval(double u, double v) {
        ++evaluations_;
        const double y = f_(u, v);
        if (std::isnan(y)) {
            std::ostringstream msg;
            msg << "integrand returned NaN at u = " << u;
            throw Error(ErrorKind::QuadratureFailure, msg.str());
        }
        if (y == kInf) {
            std::ostringstream msg;
            msg << "integrand is infinite at interior point u = " << u;
            throw Error(ErrorKind::QuadratureFailure, msg.str());
        }
        return y;
    }

    // log of the integrand's density in z = logit(u), so the scan locates
    // where the mass is rather than where the integrand is tallest.
    double eval_logit(double z) {
        const double u = 1.0 / (1.0 + std::exp(-z));
        const double v = 1.0 / (1.0 + std::exp(z));
        if (!(u > 0.0) || !(v > 0.0)) return -kInf;
        return eval(u, v) + std::log(u) + std::log(v);
    }

    std::vector<double> initial_breakpoints() {
        std::array<double, kScanPoints> z{};
        std::array<double, kScanPoints> g{};
        const double step = 2.0 * kScanHalfWidth / (kScanPoints - 1);
        int best = -1;
        for (int k = 0; k < kScanPoints; ++k) {
            z[k] = -kScanHalfWidth + step * k;
            g[k] = eval_logit(z[k]);
            if (g[k] > -kInf && (best < 0 || g[k] > g[best])) best = k;
        }
        if (best < 0) return {};

        // golden-section refinement of the bulk location
        double lo = z[std::max(best - 1, 0)];
        double hi = z[std::min(best + 1, kScanPoints - 1)];
        const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = hi - ratio * (hi - lo);
        double x2 = lo + ratio * (hi - lo);
        double g1 = eval_logit(x1);
        double g2 = eval_logit(x2);
        while (hi - lo > 1e-4) {
            if (g1 < g2) {
                lo = x1;
                x1 = x2;
                g1 = g2;
                x2 = lo + ratio * (hi - lo);
                g2 = eval_logit(x2);
            } else {
                hi = x2;
                x2 = x1;
                g2 = g1;
                x1 = hi - ratio * (hi - lo);
                g1 = eval_logit(x1);
            }
        }
        double mode = 0.5 * (lo + hi);
        double g_mode = eval_logit(mode);
        if (g[best] > g_mode) {
            mode = z[best];
            g_mode = g[best];
        }

        double width = 1.0;
        const double h = 1e-3;
        const double curvature = -(eval_logit(mode + h) - 2.0 * g_mode + eval_logit(mode - h)) / (h * h);
        if (std::isfinite(curvature) && curvature > 0.0) {
            width = std::clamp(1.0 / std::sqrt(curvature), 1e-3, 4.0);
        }

        std::vector<double> cut_z;
        for (double k : {-8.0, -3.0, 0.0, 3.0, 8.0}) cut_z.push_back(mode + k * width);
        // other local maxima in the scan that carry comparable mass
        for (int k = 1; k + 1 < kScanPoints; ++k) {
            if (std::abs(k - best) <= 1) continue;
            if (g[k] >= g[k - 1] && g[k] >= g[k + 1] && g[k] > g_mode - 40.0) cut_z.push_back(z[k]);
        }

        std::vector<double> cuts;
        for (double c : cut_z) {
            const double u = 1.0 / (1.0 + std::exp(-c));
            if (u > 0.0 && u < 1.0) cuts.push_back(u);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        return cuts;
    }

    Interval make_interval(double a, double b) {
        Interval iv;
        iv.a = a;
        iv.b = b;
        while (iv.level < kInitialLevel) refine(iv);
        return iv;
    }

    // Adds the nodes of the next level and updates the estimate and error.
    void refine(Interval& iv) {
        const int level = iv.level + 1;
        const double step = kLevelZeroStep / static_cast<double>(1 << level);
        const double half = 0.5 * (iv.b - iv.a);
        const double log_half = std::log(half);
        const double log_half_pi = std::log(std::numbers::pi / 2.0);

        auto add_node = [&](double s) {
            const double q = (std::numbers::pi / 2.0) * std::sinh(s);
            const double e = std::exp(-2.0 * std::fabs(q));
            const double dist = 2.0 * half * e / (1.0 + e);
            if (!(dist > 0.0)) return;
            double u;
            double v;
            if (s > 0.0) {
                u = iv.b - dist;
                v = (1.0 - iv.b) + dist;
            } else if (s < 0.0) {
                u = iv.a + dist;
                v = (1.0 - iv.a) - dist;
            } else {
                u = iv.a + half;
                v = 1.0 - u;
            }
            if (!(u > 0.0) || !(v > 0.0)) return;
            const double log_w = log_half + log_half_pi + log_cosh(s) - 2.0 * log_cosh(q);
            iv.log_sum = log_add_exp(iv.log_sum, log_w + eval(u, v));
        };

        const int count = static_cast<int>(kMaxAbscissa / step);
        if (level == 0) {
            add_node(0.0);
            for (int j = 1; j <= count; ++j) {
                add_node(j * step);
                add_node(-j * step);
            }
        } else {
            for (int j = 1; j <= count; j += 2) {
                add_node(j * step);
                add_node(-j * step);
            }
        }

        const double previous = iv.log_estimate;
        iv.log_estimate = std::log(step) + iv.log_sum;
        iv.level = level;
        if (level == 0) {
            iv.log_error = kInf;
        } else if (iv.log_estimate == -kInf && previous == -kInf) {
            iv.log_error = -kInf;
        } else {
            const double hi = std::max(previous, iv.log_estimate);
            const double lo = std::min(previous, iv.log_estimate);
            // log|e^hi - e^lo|
            iv.log_error = (lo == -kInf) ? hi : hi + std::log(-std::expm1(lo - hi));
        }
    }

    const LogIntegrand& f_;
    QuadratureSpec spec_;
    int evaluations_ = 0;
};

}  // namespace

QuadratureReport integrate_unit_interval_report(const LogIntegrand& f, const QuadratureSpec& spec) {
    spec.validate();
    TanhSinhIntegrator integrator(f, spec);
    return integrator.run();
}

}  // namespace vcbf
