#include "vcbf/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "vcbf/error.hpp"
#include "vcbf/format.hpp"

namespace vcbf {

namespace detail {
std::string_view reference_csv(int table_id);
}

DataMatrix simulate_dataset(const BalancedDesign& design, const ModelParams& params,
                            RandomStream& stream) {
    params.validate();
    const int p = design.p();
    const int r = design.r();
    const double sd_a = std::sqrt(params.sigma_a2);
    const double sd_e = std::sqrt(params.sigma2);
    std::vector<double> effects(p);
    for (auto& a : effects) a = sd_a * stream.normal();
    std::vector<double> y(static_cast<std::size_t>(design.n()));
    std::size_t k = 0;
    for (int i = 0; i < p; ++i) {
        const double unit_mean = params.mu + effects[i];
        for (int j = 0; j < r; ++j) y[k++] = unit_mean + sd_e * stream.normal();
    }
    return DataMatrix(design, std::move(y));
}

PearsonTypeVI QuadratureRule::prior_for(const BalancedDesign& design) const {
    double k = kappa;
    if (kappa_rule == KappaRule::OneOverN) k = 1.0 / design.n();
    if (kappa_rule == KappaRule::R) k = design.r();
    return {alpha, beta, k};
}

std::string rule_params(const Rule& rule) {
    if (const auto* cf = std::get_if<ClosedFormRule>(&rule)) {
        return "alpha=" + format_fraction(cf->alpha);
    }
    const auto& q = std::get<QuadratureRule>(rule);
    std::string kappa;
    switch (q.kappa_rule) {
        case KappaRule::Fixed: kappa = format_fraction(q.kappa); break;
        case KappaRule::OneOverN: kappa = "1/n"; break;
        case KappaRule::R: kappa = "r"; break;
    }
    return "alpha=" + format_fraction(q.alpha) + ";beta=" + format_fraction(q.beta) + ";kappa=" + kappa;
}

void validate_rule(const Rule& rule, const BalancedDesign& design) {
    if (const auto* cf = std::get_if<ClosedFormRule>(&rule)) {
        validate_closed_form_alpha(design, cf->alpha);
        return;
    }
    const auto& q = std::get<QuadratureRule>(rule);
    q.prior_for(design).validate();
    q.spec.validate();
}

BayesFactorResult evaluate_rule(const Rule& rule, const SufficientStats& stats, double prior_prob_m1) {
    if (const auto* cf = std::get_if<ClosedFormRule>(&rule)) {
        return closed_form_log_bf(stats, cf->alpha, prior_prob_m1);
    }
    const auto& q = std::get<QuadratureRule>(rule);
    return quadrature_log_bf(stats, q.prior_for(stats.design), q.spec, prior_prob_m1);
}

std::string cell_key(const CellSpec& cell) {
    std::ostringstream key;
    key << "table=" << cell.table_id << "|p=" << cell.design.p() << "|r=" << cell.design.r()
        << "|rule=" << rule_params(cell.rule) << "|sigma_a2=" << format_shortest(cell.sigma_a2);
    return key.str();
}

std::uint64_t cell_id(const CellSpec& cell) { return fnv1a64(cell_key(cell)); }

namespace {

unsigned resolve_workers(unsigned workers) {
    if (workers > 0) return workers;
    return std::max(1u, std::thread::hardware_concurrency());
}

struct alignas(64) Tally {
    long long correct = 0;
    long long used = 0;
    long long degenerate = 0;
};

FrequencyRow row_skeleton(const CellSpec& cell) {
    FrequencyRow row;
    row.p = cell.design.p();
    row.r = cell.design.r();
    row.rule_params = rule_params(cell.rule);
    row.sigma_a2 = cell.sigma_a2;
    return row;
}

}  // namespace

FrequencyRow run_cell(const CellSpec& cell, long long replicates, std::uint64_t seed, unsigned workers) {
    if (replicates < 1) throw Error(ErrorKind::InvalidArgument, "replicates must be >= 1");
    const ModelParams params{cell.mu, cell.sigma2, cell.sigma_a2};
    params.validate();
    validate_rule(cell.rule, cell.design);
    posterior_prob_m1(0.0, cell.prior_prob_m1);  // validates the prior probability

    const std::uint64_t id = cell_id(cell);
    const Model truth = params.truth();
    constexpr long long kChunk = 32;
    const long long chunks = (replicates + kChunk - 1) / kChunk;
    const unsigned n_workers =
        static_cast<unsigned>(std::min<long long>(resolve_workers(workers), chunks));

    std::atomic<long long> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<Tally> tallies(n_workers);

    auto work = [&](unsigned w) {
        Tally& t = tallies[w];
        try {
            while (!failed.load(std::memory_order_relaxed)) {
                const long long begin = next.fetch_add(kChunk);
                if (begin >= replicates) break;
                const long long end = std::min(begin + kChunk, replicates);
                for (long long k = begin; k < end; ++k) {
                    RandomStream stream =
                        RandomStream::for_replicate(seed, id, static_cast<std::uint64_t>(k));
                    const SufficientStats stats =
                        sufficient_stats(simulate_dataset(cell.design, params, stream));
                    if (stats.w_t == 0.0) {
                        ++t.degenerate;
                        continue;
                    }
                    const BayesFactorResult res = evaluate_rule(cell.rule, stats, cell.prior_prob_m1);
                    ++t.used;
                    if (res.decision == truth) ++t.correct;
                }
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            failed = true;
        }
    };

    if (n_workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_workers);
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(work, w);
    }
    if (failure) std::rethrow_exception(failure);

    FrequencyRow row = row_skeleton(cell);
    for (const auto& t : tallies) {
        row.correct += t.correct;
        row.replicates_used += t.used;
        row.degenerate_count += t.degenerate;
    }
    if (row.replicates_used > 0) {
        const double f = static_cast<double>(row.correct) / static_cast<double>(row.replicates_used);
        row.relative_frequency = f;
        row.standard_error = std::sqrt(f * (1.0 - f) / static_cast<double>(row.replicates_used));
    } else {
        row.relative_frequency = std::nan("");
        row.standard_error = std::nan("");
    }
    return row;
}

void ExperimentConfig::validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); };
    if (design_grid.empty()) bad("experiment needs at least one design");
    if (truth_grid.empty()) bad("experiment needs at least one sigma_a2 value");
    if (rules.empty()) bad("experiment needs at least one rule");
    if (replicates < 1) bad("replicates must be >= 1");
    if (!reference_labels.empty() && reference_labels.size() != rules.size()) {
        bad("reference_labels must match the rules one to one");
    }
    for (double s : truth_grid) ModelParams{mu, sigma2, s}.validate();
    ModelParams{mu, sigma2, 0.0}.validate();
    posterior_prob_m1(0.0, prior_prob_m1);
}

FrequencyTable run_experiment(const ExperimentConfig& config, unsigned workers) {
    config.validate();
    FrequencyTable table;
    table.table_id = config.table_id;
    table.seed = config.seed;
    table.replicates = config.replicates;
    for (const auto& design : config.design_grid) {
        for (std::size_t i = 0; i < config.rules.size(); ++i) {
            for (double sigma_a2 : config.truth_grid) {
                CellSpec cell{design, sigma_a2, config.rules[i], config.table_id,
                              config.mu, config.sigma2, config.prior_prob_m1};
                FrequencyRow row;
                try {
                    validate_rule(cell.rule, design);
                    row = run_cell(cell, config.replicates, config.seed, workers);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::HyperparameterOutOfRange) throw;
                    row = row_skeleton(cell);
                    row.valid = false;
                    row.invalid_reason = e.what();
                    row.relative_frequency = std::nan("");
                    row.standard_error = std::nan("");
                }
                row.reference_label = config.reference_labels.empty() ? row.rule_params : config.reference_labels[i];
                if (config.table_id != 0) {
                    row.reference_value = reference_value(config.table_id, row.p, row.r, row.reference_label, sigma_a2);
                }
                table.rows.push_back(std::move(row));
            }
        }
    }
    return table;
}

namespace {

std::vector<BalancedDesign> designs_for(int table_id) {
    using D = BalancedDesign;
    switch (table_id) {
        case 1:
        case 4: return {D(2, 5), D(2, 10), D(2, 50), D(2, 100), D(2, 500)};
        case 2:
        case 5: return {D(5, 2), D(10, 2), D(50, 2), D(100, 2), D(500, 2)};
        case 3: return {D(2, 2), D(10, 5), D(5, 10), D(10, 10), D(50, 25), D(25, 50)};
        case 6: return {D(2, 2), D(10, 5), D(5, 10), D(10, 10), D(25, 50), D(50, 25)};
    }
    throw Error(ErrorKind::InvalidArgument,
                "table id must be between 1 and 6, got " + std::to_string(table_id));
}

QuadratureRule pearson(double alpha, double beta, KappaRule rule, double kappa = 1.0) {
    QuadratureRule q;
    q.alpha = alpha;
    q.beta = beta;
    q.kappa_rule = rule;
    q.kappa = kappa;
    return q;
}

}  // namespace

ExperimentConfig table_config(int table_id, long long replicates, std::uint64_t seed, PriorSet prior_set) {
    ExperimentConfig config;
    config.design_grid = designs_for(table_id);
    config.replicates = replicates;
    config.seed = seed;
    config.table_id = table_id;
    config.rules.clear();
    if (table_id <= 3) {
        for (double alpha : {-0.5, -0.25, -0.2, -0.1}) config.rules.push_back(ClosedFormRule{alpha});
        return config;
    }
    // The printed labels of rows 1 and 3 do not reproduce their numbers; the
    // effective set uses the priors that do (see README).
    const std::vector<Rule> printed = {
        pearson(-0.5, 0.0, KappaRule::Fixed),
        pearson(-0.5, 0.0, KappaRule::OneOverN),
        pearson(0.0, -0.5, KappaRule::Fixed),
        pearson(0.0, 0.0, KappaRule::R),
    };
    for (const auto& rule : printed) config.reference_labels.push_back(rule_params(rule));
    if (prior_set == PriorSet::Printed) {
        config.rules = printed;
    } else {
        config.rules = {
            pearson(0.0, 0.0, KappaRule::Fixed),
            pearson(-0.5, 0.0, KappaRule::OneOverN),
            pearson(-0.5, 0.0, KappaRule::Fixed),
            pearson(0.0, 0.0, KappaRule::R),
        };
    }
    return config;
}

FrequencyTable reproduce_table(int table_id, long long replicates, std::uint64_t seed, unsigned workers,
                               PriorSet prior_set) {
    return run_experiment(table_config(table_id, replicates, seed, prior_set), workers);
}

void write_csv(const FrequencyTable& table, std::ostream& out) {
    out << "p,r,rule_params,sigma_a2,frequency,se,replicates,degenerate\n";
    for (const auto& row : table.rows) {
        out << row.p << ',' << row.r << ',' << row.rule_params << ',' << format_sig12(row.sigma_a2) << ',';
        if (row.valid) {
            out << format_sig12(row.relative_frequency) << ',' << format_sig12(row.standard_error) << ','
                << row.replicates_used << ',' << row.degenerate_count << '\n';
        } else {
            out << "invalid,invalid,0,0\n";
        }
    }
}

std::string to_json(const FrequencyTable& table) {
    using nlohmann::json;
    json rows = json::array();
    for (const auto& row : table.rows) {
        json j;
        j["p"] = row.p;
        j["r"] = row.r;
        j["rule_params"] = row.rule_params;
        j["reference_label"] = row.reference_label;
        j["sigma_a2"] = row.sigma_a2;
        j["valid"] = row.valid;
        if (!row.valid) j["invalid_reason"] = row.invalid_reason;
        j["frequency"] = row.valid ? json(row.relative_frequency) : json(nullptr);
        j["se"] = row.valid ? json(row.standard_error) : json(nullptr);
        j["replicates"] = row.replicates_used;
        j["degenerate"] = row.degenerate_count;
        j["correct"] = row.correct;
        j["reference_value"] = row.reference_value ? json(*row.reference_value) : json(nullptr);
        rows.push_back(std::move(j));
    }
    json doc;
    doc["table_id"] = table.table_id;
    doc["seed"] = table.seed;
    doc["replicates"] = table.replicates;
    doc["rows"] = std::move(rows);
    return doc.dump(2);
}

namespace {

struct ReferenceCell {
    int p;
    int r;
    std::string label;
    double sigma_a2;
    double frequency;
};

std::vector<ReferenceCell> parse_reference(int table_id) {
    std::vector<ReferenceCell> cells;
    std::istringstream in{std::string(detail::reference_csv(table_id))};
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string p, r, label, s, f;
        std::getline(fields, p, ',');
        std::getline(fields, r, ',');
        std::getline(fields, label, ',');
        std::getline(fields, s, ',');
        std::getline(fields, f, ',');
        cells.push_back({std::stoi(p), std::stoi(r), label, std::stod(s), std::stod(f)});
    }
    return cells;
}

}  // namespace

std::optional<double> reference_value(int table_id, int p, int r, const std::string& label, double sigma_a2) {
    if (table_id < 1 || table_id > 6) return std::nullopt;
    static const std::vector<std::vector<ReferenceCell>> all = [] {
        std::vector<std::vector<ReferenceCell>> tables(7);
        for (int t = 1; t <= 6; ++t) tables[t] = parse_reference(t);
        return tables;
    }();
    for (const auto& c : all[table_id]) {
        if (c.p == p && c.r == r && c.label == label && std::fabs(c.sigma_a2 - sigma_a2) < 1e-12) {
            return c.frequency;
        }
    }
    return std::nullopt;
}

}  // namespace vcbf
