#include "vcbf/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "vcbf/error.hpp"

namespace vcbf {

BalancedDesign::BalancedDesign(int p, int r) : p_(p), r_(r) {
    if (p < 2 || r < 2) {
        std::ostringstream msg;
        msg << "balanced design needs p >= 2 and r >= 2, got p=" << p << ", r=" << r;
        throw Error(ErrorKind::InvalidArgument, msg.str());
    }
}

DataMatrix::DataMatrix(BalancedDesign design, std::vector<double> values,
                       std::vector<std::string> labels)
    : design_(design), values_(std::move(values)), labels_(std::move(labels)) {
    if (values_.size() != static_cast<std::size_t>(design_.n())) {
        std::ostringstream msg;
        msg << "data has " << values_.size() << " values, design needs " << design_.n();
        throw Error(ErrorKind::InvalidArgument, msg.str());
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!std::isfinite(values_[k])) {
            std::ostringstream msg;
            msg << "non-finite value at unit " << k / design_.r() + 1 << ", replicate "
                << k % design_.r() + 1;
            throw Error(ErrorKind::NonFiniteValue, msg.str());
        }
    }
    if (!labels_.empty() && labels_.size() != static_cast<std::size_t>(design_.p())) {
        throw Error(ErrorKind::InvalidArgument, "label count does not match the number of units");
    }
}

std::string DataMatrix::label(int i) const {
    return labels_.empty() ? std::to_string(i + 1) : labels_[static_cast<std::size_t>(i)];
}

bool operator==(const DataMatrix& a, const DataMatrix& b) {
    if (!(a.design_ == b.design_) || a.values_ != b.values_) return false;
    for (int i = 0; i < a.design_.p(); ++i) {
        if (a.label(i) != b.label(i)) return false;
    }
    return true;
}

namespace {

// Mean that is exact when every value is equal, so constant data gives
// zero sums of squares rather than rounding noise.
double stable_mean(const double* first, const double* last) {
    const auto [lo, hi] = std::minmax_element(first, last);
    if (*lo == *hi) return *lo;
    double sum = 0.0;
    for (const double* x = first; x != last; ++x) sum += *x;
    const double mean = sum / static_cast<double>(last - first);
    return std::clamp(mean, *lo, *hi);
}

}  // namespace

SufficientStats sufficient_stats(const DataMatrix& data) {
    const BalancedDesign& d = data.design();
    const double* y = data.values().data();
    SufficientStats s;
    s.design = d;
    s.grand_mean = stable_mean(y, y + d.n());
    s.group_means.resize(d.p());
    double w_h = 0.0;
    double w_e = 0.0;
    for (int i = 0; i < d.p(); ++i) {
        const double* row = y + static_cast<std::ptrdiff_t>(i) * d.r();
        const double m = stable_mean(row, row + d.r());
        s.group_means[i] = m;
        const double dev = m - s.grand_mean;
        w_h += dev * dev;
        for (int j = 0; j < d.r(); ++j) {
            const double e = row[j] - m;
            w_e += e * e;
        }
    }
    s.w_h = d.r() * w_h;
    s.w_e = w_e;
    s.w_t = s.w_h + s.w_e;
    return s;
}

SufficientStats stats_from_sums(BalancedDesign design, double w_h, double w_e) {
    if (!(w_h >= 0.0) || !(w_e >= 0.0) || !std::isfinite(w_h) || !std::isfinite(w_e)) {
        throw Error(ErrorKind::InvalidArgument, "sums of squares must be finite and >= 0");
    }
    SufficientStats s;
    s.design = design;
    s.w_h = w_h;
    s.w_e = w_e;
    s.w_t = w_h + w_e;
    return s;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

bool is_header(std::string_view line) {
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) return false;
    return iequals(trim(line.substr(0, comma)), "group") &&
           iequals(trim(line.substr(comma + 1)), "value");
}

[[noreturn]] void malformed(long line_no, const std::string& what) {
    std::ostringstream msg;
    msg << "line " << line_no << ": " << what;
    throw Error(ErrorKind::MalformedRow, msg.str());
}

}  // namespace

DataMatrix ingest_csv(std::istream& in) {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> groups;
    std::unordered_map<std::string, std::size_t> index;

    std::string raw;
    long line_no = 0;
    bool seen_header = false;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
        if (trim(line).empty()) continue;

        if (!seen_header) {
            if (!is_header(line)) malformed(line_no, "expected header 'group,value'");
            seen_header = true;
            continue;
        }
        if (is_header(line)) continue;

        const auto comma = line.find(',');
        if (comma == std::string_view::npos) malformed(line_no, "expected 2 fields, found 1");
        if (line.find(',', comma + 1) != std::string_view::npos) {
            malformed(line_no, "expected 2 fields, found " +
                                   std::to_string(std::count(line.begin(), line.end(), ',') + 1));
        }
        const std::string_view label = trim(line.substr(0, comma));
        const std::string_view field = trim(line.substr(comma + 1));
        if (label.empty()) malformed(line_no, "empty group label");
        if (field.empty()) malformed(line_no, "empty value");

        std::string_view digits = field;
        if (digits.front() == '+') digits.remove_prefix(1);
        double value = 0.0;
        const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
        if (ec == std::errc::result_out_of_range) {
            throw Error(ErrorKind::NonFiniteValue,
                        "line " + std::to_string(line_no) + ": value out of range: " + std::string(field));
        }
        if (ec != std::errc() || end != digits.data() + digits.size()) {
            malformed(line_no, "not a number: '" + std::string(field) + "'");
        }
        if (!std::isfinite(value)) {
            throw Error(ErrorKind::NonFiniteValue,
                        "line " + std::to_string(line_no) + ": non-finite value " + std::string(field));
        }

        auto [it, inserted] = index.try_emplace(std::string(label), groups.size());
        if (inserted) {
            labels.emplace_back(label);
            groups.emplace_back();
        }
        groups[it->second].push_back(value);
    }
    if (in.bad()) throw Error(ErrorKind::IoError, "read error while parsing CSV");
    if (!seen_header) malformed(1, "missing header 'group,value'");

    if (groups.size() < 2) {
        throw Error(ErrorKind::TooFewGroups,
                    "need at least 2 groups, found " + std::to_string(groups.size()));
    }
    const std::size_t r = groups.front().size();
    const bool balanced = std::all_of(groups.begin(), groups.end(),
                                      [r](const auto& g) { return g.size() == r; });
    if (!balanced) {
        std::ostringstream msg;
        msg << "groups have unequal replicate counts:";
        for (std::size_t i = 0; i < groups.size(); ++i) {
            msg << (i ? ", " : " ") << labels[i] << "=" << groups[i].size();
        }
        throw Error(ErrorKind::UnbalancedData, msg.str());
    }
    if (r < 2) {
        throw Error(ErrorKind::TooFewReplicates,
                    "need at least 2 replicates per group, found " + std::to_string(r));
    }

    std::vector<double> values;
    values.reserve(groups.size() * r);
    for (const auto& g : groups) values.insert(values.end(), g.begin(), g.end());
    return DataMatrix(BalancedDesign(static_cast<int>(groups.size()), static_cast<int>(r)),
                      std::move(values), std::move(labels));
}

DataMatrix ingest_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    return ingest_csv(in);
}

void serialize_csv(const DataMatrix& data, std::ostream& out) {
    out << "group,value\n";
    char buf[32];
    const BalancedDesign& d = data.design();
    for (int i = 0; i < d.p(); ++i) {
        for (int j = 0; j < d.r(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", data.at(i, j));
            out << data.label(i) << ',' << buf << '\n';
        }
    }
}

}  // namespace vcbf
