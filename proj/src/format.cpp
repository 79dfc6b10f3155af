#include "vcbf/format.hpp"

#include <charconv>
#include <cmath>
#include <algorithm>
#include <cstdio>

namespace vcbf {

std::string format_sig12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    std::string s(buf);
    if (std::isfinite(x) && s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

std::string format_shortest(double x) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string format_fraction(double x) {
    if (!std::isfinite(x)) return format_shortest(x);
    for (int den = 1; den <= 12; ++den) {
        const double num = std::round(x * den);
        if (std::fabs(num / den - x) <= 1e-12 * std::max(1.0, std::fabs(x))) {
            const long long n = static_cast<long long>(num);
            return den == 1 ? std::to_string(n) : std::to_string(n) + "/" + std::to_string(den);
        }
    }
    return format_shortest(x);
}

}  // namespace vcbf
