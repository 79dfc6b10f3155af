#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vcbf/bayes_factor.hpp"
#include "vcbf/data_model.hpp"
#include "vcbf/random.hpp"

namespace vcbf {

// y_ij = mu + a_i + e_ij. Draw order: the p unit effects first (drawn even
// when sigma_a2 = 0), then the errors row by row.
DataMatrix simulate_dataset(const BalancedDesign& design, const ModelParams& params,
                            RandomStream& stream);

struct ClosedFormRule {
    double alpha = kDefaultAlpha;
};

enum class KappaRule { Fixed, OneOverN, R };

// Pearson type VI prior evaluated by quadrature; kappa may depend on the
// design (1/n or r).
struct QuadratureRule {
    double alpha = -0.5;
    double beta = 0.0;
    KappaRule kappa_rule = KappaRule::Fixed;
    double kappa = 1.0;  // used when kappa_rule == Fixed
    QuadratureSpec spec{};

    PearsonTypeVI prior_for(const BalancedDesign& design) const;
};

using Rule = std::variant<ClosedFormRule, QuadratureRule>;

// Canonical text form, e.g. "alpha=-1/2" or "alpha=0;beta=0;kappa=1/n".
std::string rule_params(const Rule& rule);

// Throws HyperparameterOutOfRange when the rule cannot be used at the design.
void validate_rule(const Rule& rule, const BalancedDesign& design);

BayesFactorResult evaluate_rule(const Rule& rule, const SufficientStats& stats,
                                double prior_prob_m1 = kDefaultPriorProbM1);

struct CellSpec {
    BalancedDesign design{2, 2};
    double sigma_a2 = 0.0;
    Rule rule = ClosedFormRule{};
    int table_id = 0;  // 0 for cells outside the reference tables
    double mu = 0.0;
    double sigma2 = 1.0;
    double prior_prob_m1 = kDefaultPriorProbM1;
};

// FNV-1a of "table=<id>|p=<p>|r=<r>|rule=<rule_params>|sigma_a2=<shortest>".
std::string cell_key(const CellSpec& cell);
std::uint64_t cell_id(const CellSpec& cell);

struct FrequencyRow {
    int p = 0;
    int r = 0;
    std::string rule_params;
    std::string reference_label;  // row label in the reference table, if any
    double sigma_a2 = 0.0;
    bool valid = true;
    std::string invalid_reason;
    long long correct = 0;
    long long replicates_used = 0;
    long long degenerate_count = 0;
    double relative_frequency = 0.0;
    double standard_error = 0.0;
    std::optional<double> reference_value;
};

// Runs `replicates` independent datasets for one cell. Replicate k draws from
// RandomStream::for_replicate(seed, cell_id(cell), k), so the result does not
// depend on `workers`. Replicates whose data are constant (W_T = 0) are
// counted in degenerate_count and left out of the denominator.
FrequencyRow run_cell(const CellSpec& cell, long long replicates, std::uint64_t seed,
                      unsigned workers = 0);

enum class PriorSet {
    Effective,  // hyperparameters that reproduce the printed numbers
    Printed,    // hyperparameters exactly as the row labels read
};

struct ExperimentConfig {
    std::vector<BalancedDesign> design_grid;
    std::vector<double> truth_grid{0.0, 0.5, 1.0, 2.0, 3.0, 5.0};
    double mu = 0.0;
    double sigma2 = 1.0;
    std::vector<Rule> rules{ClosedFormRule{}};
    long long replicates = 10000;
    std::uint64_t seed = 0;
    double prior_prob_m1 = kDefaultPriorProbM1;
    int table_id = 0;
    std::vector<std::string> reference_labels;  // parallel to rules when table_id != 0

    // Throws InvalidArgument for an empty grid, replicates < 1 or bad values.
    void validate() const;
};

struct FrequencyTable {
    int table_id = 0;
    std::uint64_t seed = 0;
    long long replicates = 0;
    std::vector<FrequencyRow> rows;
};

// Every design x rule x sigma_a2 cell, in that nesting order. Cells whose
// rule is invalid for the design are kept with valid = false.
FrequencyTable run_experiment(const ExperimentConfig& config, unsigned workers = 0);

ExperimentConfig table_config(int table_id, long long replicates, std::uint64_t seed,
                              PriorSet prior_set = PriorSet::Effective);

FrequencyTable reproduce_table(int table_id, long long replicates, std::uint64_t seed,
                               unsigned workers = 0, PriorSet prior_set = PriorSet::Effective);

// Columns: p,r,rule_params,sigma_a2,frequency,se,replicates,degenerate.
void write_csv(const FrequencyTable& table, std::ostream& out);
std::string to_json(const FrequencyTable& table);

// Bundled reference frequency for tables 1-6, if the cell is listed.
std::optional<double> reference_value(int table_id, int p, int r, const std::string& label,
                                  double sigma_a2);

}  // namespace vcbf
