#pragma once

#include <string>

namespace vcbf {

// 12 significant digits; a trailing ".0" marks integral values ("2" -> "2.0").
std::string format_sig12(double x);

// Shortest text that parses back to the same double.
std::string format_shortest(double x);

// "-1/2", "1/10", "3" for ratios with denominators up to 12, else shortest.
std::string format_fraction(double x);

}  // namespace vcbf
