#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace vcbf {

// p units with r observations each. Throws InvalidArgument unless p, r >= 2.
class BalancedDesign {
public:
    BalancedDesign(int p, int r);

    int p() const noexcept { return p_; }
    int r() const noexcept { return r_; }
    int n() const noexcept { return p_ * r_; }

    friend bool operator==(const BalancedDesign&, const BalancedDesign&) = default;

private:
    int p_;
    int r_;
};

// y_ij stored row-major, one row per unit.
class DataMatrix {
public:
    // Throws InvalidArgument on a size mismatch and NonFiniteValue on NaN/inf.
    DataMatrix(BalancedDesign design, std::vector<double> values,
               std::vector<std::string> labels = {});

    const BalancedDesign& design() const noexcept { return design_; }
    double at(int i, int j) const { return values_[static_cast<std::size_t>(i) * design_.r() + j]; }
    const std::vector<double>& values() const noexcept { return values_; }
    // Label of unit i; "1".."p" unless labels were given.
    std::string label(int i) const;

    // Same design, values and unit labels.
    friend bool operator==(const DataMatrix& a, const DataMatrix& b);

private:
    BalancedDesign design_;
    std::vector<double> values_;
    std::vector<std::string> labels_;
};

struct SufficientStats {
    BalancedDesign design{2, 2};
    double w_h = 0.0;  // between units
    double w_e = 0.0;  // within units
    double w_t = 0.0;  // total, kept equal to w_h + w_e
    double grand_mean = 0.0;
    std::vector<double> group_means;
};

SufficientStats sufficient_stats(const DataMatrix& data);

// Stats from the sums of squares alone, for callers that never materialize
// the data. Throws InvalidArgument on negative or non-finite input.
SufficientStats stats_from_sums(BalancedDesign design, double w_h, double w_e);

// `group,value` CSV. Units are numbered in order of first appearance.
DataMatrix ingest_csv(std::istream& in);
DataMatrix ingest_csv_file(const std::string& path);

// Inverse of ingest_csv; values written with 17 significant digits.
void serialize_csv(const DataMatrix& data, std::ostream& out);

}  // namespace vcbf
