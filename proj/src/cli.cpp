#include "vcbf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vcbf/asymptotics.hpp"
#include "vcbf/bayes_factor.hpp"
#include "vcbf/data_model.hpp"
#include "vcbf/error.hpp"
#include "vcbf/format.hpp"
#include "vcbf/montecarlo.hpp"

namespace vcbf {
namespace {

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::HyperparameterOutOfRange:
        case ErrorKind::DomainError:
        case ErrorKind::QuadratureFailure:
            return 3;
        default:
            return 2;
    }
}

void report(std::ostream& err, std::string_view kind, const std::string& message) {
    nlohmann::json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    err << j.dump() << '\n';
}

// Writes to --out when given, else to the stream.
void emit(const std::string& path, std::ostream& out, const std::string& text) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream file(path, std::ios::binary);
    file << text;
    file.close();
    if (!file) throw Error(ErrorKind::IoError, "cannot write " + path);
}

// --kappa takes a number, "1/n" or "r".
void parse_kappa(const std::string& text, QuadratureRule& rule) {
    if (text == "1/n") {
        rule.kappa_rule = KappaRule::OneOverN;
    } else if (text == "r") {
        rule.kappa_rule = KappaRule::R;
    } else {
        double v = 0.0;
        std::istringstream in(text);
        if (!(in >> v) || !in.eof()) {
            throw Error(ErrorKind::InvalidArgument, "kappa must be a number, 1/n or r, got " + text);
        }
        rule.kappa_rule = KappaRule::Fixed;
        rule.kappa = v;
    }
}

struct PriorFlags {
    double alpha = kDefaultAlpha;
    std::optional<double> beta;
    std::optional<std::string> kappa;
    bool quadrature = false;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--alpha", alpha, "prior shape alpha (> -1)");
        cmd.add_option("--beta", beta, "prior shape beta; implies --quadrature");
        cmd.add_option("--kappa", kappa, "prior scale: number, 1/n or r; implies --quadrature");
        cmd.add_flag("--quadrature", quadrature, "integrate numerically instead of the closed form");
    }

    bool use_quadrature() const { return quadrature || beta || kappa; }

    // Quadrature defaults reproduce the closed-form prior (kappa = r and its
    // paired beta).
    Rule rule(const BalancedDesign& design) const {
        if (!use_quadrature()) return ClosedFormRule{alpha};
        QuadratureRule q;
        q.alpha = alpha;
        q.beta = beta ? *beta : closed_form_beta(design, alpha);
        if (kappa) {
            parse_kappa(*kappa, q);
        } else {
            q.kappa_rule = KappaRule::R;
        }
        return q;
    }
};

// Flat key=value config: keys without a section belong to the subcommand
// being run, so one file serves any subcommand.
class SubcommandConfig : public CLI::ConfigINI {
public:
    explicit SubcommandConfig(const CLI::App& app) : app_(app) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigINI::from_config(input);
        const auto active = app_.get_subcommands();
        if (active.empty()) return items;
        for (auto& item : items) {
            if (item.parents.empty()) item.parents.push_back(active.front()->get_name());
        }
        return items;
    }

private:
    const CLI::App& app_;
};

std::string csv_number(double x) { return std::isfinite(x) ? format_sig12(x) : format_shortest(x); }

// ---- bf

struct BfCommand {
    std::string input;
    PriorFlags prior;
    double prior_m1 = kDefaultPriorProbM1;
    std::string out_path;

    void run(std::ostream& out) const {
        const auto stats = sufficient_stats(ingest_csv_file(input));
        const Rule rule = prior.rule(stats.design);
        validate_rule(rule, stats.design);
        const auto result = evaluate_rule(rule, stats, prior_m1);
        nlohmann::ordered_json j;
        j["log_bf10"] = result.log_bf10;
        j["bf10"] = result.bf10;
        j["posterior_prob_m1"] = result.posterior_prob_m1;
        j["decision"] = to_string(result.decision);
        j["method"] = to_string(result.method);
        j["p"] = stats.design.p();
        j["r"] = stats.design.r();
        j["w_h"] = stats.w_h;
        j["w_e"] = stats.w_e;
        j["w_t"] = stats.w_t;
        j["degenerate"] = result.degenerate;
        emit(out_path, out, j.dump(2) + "\n");
    }
};

// ---- simulate

struct SimulateCommand {
    int p = 2;
    int r = 5;
    std::vector<double> sigma_a2{0.0, 0.5, 1.0, 2.0, 3.0, 5.0};
    double mu = 0.0;
    double sigma2 = 1.0;
    long long replicates = 10000;
    std::uint64_t seed = 0;
    PriorFlags prior;
    double prior_m1 = kDefaultPriorProbM1;
    unsigned workers = 0;
    bool dataset = false;
    bool json = false;
    std::string out_path;

    void run(std::ostream& out) const {
        const BalancedDesign design(p, r);
        std::ostringstream text;
        if (dataset) {
            // one dataset from replicate 0 of the first sigma_a2 value
            const ModelParams params{mu, sigma2, sigma_a2.empty() ? 0.0 : sigma_a2.front()};
            params.validate();
            CellSpec cell{design, params.sigma_a2, prior.rule(design)};
            cell.mu = mu;
            cell.sigma2 = sigma2;
            auto stream = RandomStream::for_replicate(seed, cell_id(cell), 0);
            serialize_csv(simulate_dataset(design, params, stream), text);
            emit(out_path, out, text.str());
            return;
        }
        ExperimentConfig config;
        config.design_grid = {design};
        config.truth_grid = sigma_a2;
        config.mu = mu;
        config.sigma2 = sigma2;
        config.rules = {prior.rule(design)};
        config.replicates = replicates;
        config.seed = seed;
        config.prior_prob_m1 = prior_m1;
        const auto table = run_experiment(config, workers);
        if (json) {
            text << to_json(table) << '\n';
        } else {
            write_csv(table, text);
        }
        emit(out_path, out, text.str());
    }
};

// ---- table

struct TableCommand {
    int table = 1;
    long long replicates = 10000;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    std::string prior_set = "effective";
    bool json = false;
    std::string out_path;

    void run(std::ostream& out, std::ostream& err) const {
        const PriorSet set = prior_set == "printed" ? PriorSet::Printed : PriorSet::Effective;
        const auto result = reproduce_table(table, replicates, seed, workers, set);
        std::ostringstream text;
        if (json) {
            text << to_json(result) << '\n';
        } else {
            write_csv(result, text);
        }
        emit(out_path, out, text.str());

        double worst = 0.0;
        const FrequencyRow* worst_row = nullptr;
        int compared = 0;
        int outside = 0;
        for (const auto& row : result.rows) {
            if (!row.valid || !row.reference_value || row.replicates_used == 0) continue;
            const double gap = std::fabs(row.relative_frequency - *row.reference_value);
            ++compared;
            if (gap > std::max(0.02, 3.0 * row.standard_error)) ++outside;
            if (gap >= worst) {
                worst = gap;
                worst_row = &row;
            }
        }
        err << "table " << table << ": " << compared << " cells with reference values, max |observed - reference| = "
            << format_sig12(worst);
        if (worst_row) {
            err << " at p=" << worst_row->p << " r=" << worst_row->r << " " << worst_row->reference_label
                << " sigma_a2=" << format_shortest(worst_row->sigma_a2);
        }
        err << "; " << outside << " beyond max(0.02, 3 SE)\n";
    }
};

// ---- region

struct RegionCommand {
    long long r_max = 1000;
    std::string out_path;

    void run(std::ostream& out) const {
        if (r_max < 2) throw Error(ErrorKind::InvalidArgument, "r-max must be >= 2");
        std::ostringstream text;
        text << "r,h\n";
        for (long long r = 2; r <= r_max; ++r) text << r << ',' << format_sig12(h(r)) << '\n';
        emit(out_path, out, text.str());
    }
};

// ---- prior-shape

struct PriorShapeCommand {
    int p = 2;
    int r = 5;
    double alpha = kDefaultAlpha;
    int grid = 2001;
    std::string out_path;

    void run(std::ostream& out) const {
        const BalancedDesign design(p, r);
        validate_closed_form_alpha(design, alpha);
        if (grid < 2) throw Error(ErrorKind::InvalidArgument, "grid needs at least 2 points");
        const PearsonTypeVI prior{alpha, closed_form_beta(design, alpha), static_cast<double>(r)};

        // In x = ln(kappa tau) the density is exp((b+1)x - (a+b+2)log(1+e^x)):
        // peaked at ln((b+1)/(a+1)) with exponential tails of rate b+1 and a+1.
        const double a1 = prior.alpha + 1.0;
        const double b1 = prior.beta + 1.0;
        const double peak = std::log(b1 / a1);
        const double spread = std::sqrt((a1 + b1) / (a1 * b1));
        const double lo = peak - std::max(10.0 * spread, 16.0 / b1);
        const double hi = peak + std::max(10.0 * spread, 16.0 / a1);

        std::ostringstream text;
        text << "tau,density\n";
        for (int k = 0; k < grid; ++k) {
            const double x = lo + (hi - lo) * k / (grid - 1);
            const double tau = std::exp(x) / prior.kappa;
            text << format_sig12(tau) << ',' << format_sig12(std::exp(pearson_vi_log_pdf(tau, prior))) << '\n';
        }
        emit(out_path, out, text.str());
    }
};

// ---- asymptotics

struct AsymptoticsCommand {
    int scenario = 3;
    std::string model = "M1";
    std::optional<double> sigma_a2;
    std::vector<int> sizes{20, 40, 80, 160};
    int fixed = 2;
    double alpha = kDefaultAlpha;
    std::uint64_t seed = 0;
    std::string out_path;

    Scenario make_scenario() const {
        switch (scenario) {
            case 1: return Scenario::r_grows(fixed);
            case 2: return Scenario::p_grows(fixed);
            case 3: return Scenario::both_grow();
            default: throw Error(ErrorKind::InvalidArgument, "scenario must be 1, 2 or 3");
        }
    }

    BalancedDesign design_at(int size) const {
        switch (scenario) {
            case 1: return {fixed, size};
            case 2: return {size, fixed};
            default: return {size, size};
        }
    }

    void run(std::ostream& out) const {
        if (model != "M0" && model != "M1") {
            throw Error(ErrorKind::InvalidArgument, "model must be M0 or M1, got " + model);
        }
        const Model truth = model == "M0" ? Model::M0 : Model::M1;
        const ModelParams params{0.0, 1.0, sigma_a2 ? *sigma_a2 : (truth == Model::M1 ? 1.0 : 0.0)};
        params.validate();
        const Scenario s = make_scenario();
        if (sizes.empty()) throw Error(ErrorKind::InvalidArgument, "sizes must not be empty");
        // fail before simulating when the combination has no deterministic limit
        if (s.kind == ScenarioKind::RGrows) {
            ratio_limit(s, truth, params, truth == Model::M1 ? std::optional<double>(1.0) : std::nullopt);
        } else {
            ratio_limit(s, truth, params);
        }

        std::ostringstream text;
        text << "size,empirical_ratio,theoretical_limit,exact_log_bf,asymptotic_log_bf\n";
        for (int size : sizes) {
            const BalancedDesign design = design_at(size);
            validate_closed_form_alpha(design, alpha);
            std::ostringstream key;
            key << "asymptotics|scenario=" << s.number() << "|fixed=" << fixed << "|model=" << model
                << "|sigma_a2=" << format_shortest(params.sigma_a2) << "|p=" << design.p() << "|r=" << design.r();
            auto stream = RandomStream::for_replicate(seed, fnv1a64(key.str()), 0);

            std::optional<double> aux;
            if (s.kind == ScenarioKind::RGrows) {
                // the unit effects come first in the draw order, so a copy of
                // the stream recovers their realized chi-square spread
                auto effects = stream;
                std::vector<double> a(design.p());
                for (double& v : a) v = effects.normal();
                double mean = 0.0;
                for (double v : a) mean += v;
                mean /= design.p();
                double c1 = 0.0;
                for (double v : a) c1 += (v - mean) * (v - mean);
                aux = c1;
            }
            const auto stats = sufficient_stats(simulate_dataset(design, params, stream));
            const double limit = ratio_limit(s, truth, params, aux);
            const double exact = closed_form_log_bf(stats, alpha).log_bf10;
            const double approx = asymptotic_log_bf(s, truth, design, alpha, params, aux);
            text << size << ',' << csv_number(scenario_statistic(s, stats)) << ',' << csv_number(limit) << ','
                 << csv_number(exact) << ',' << csv_number(approx) << '\n';
        }
        emit(out_path, out, text.str());
    }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayes factors for random effects in the balanced one-way model", "vcbf"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key=value file with the same names as the flags");
    app.config_formatter(std::make_shared<SubcommandConfig>(app));
    app.allow_config_extras(false);

    BfCommand bf;
    auto* bf_cmd = app.add_subcommand("bf", "Bayes factor for a group,value CSV");
    bf_cmd->add_option("input", bf.input, "CSV file with group,value rows")->required();
    bf.prior.add_to(*bf_cmd);
    bf_cmd->add_option("--prior-m1", bf.prior_m1, "prior probability of M1");
    bf_cmd->add_option("--out", bf.out_path, "write JSON here instead of stdout");

    SimulateCommand sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo frequency of choosing the true model for one design");
    sim_cmd->add_option("--p", sim.p, "number of units");
    sim_cmd->add_option("--r", sim.r, "observations per unit");
    sim_cmd->add_option("--sigma-a2", sim.sigma_a2, "true between-unit variances")->delimiter(',');
    sim_cmd->add_option("--mu", sim.mu, "true grand mean");
    sim_cmd->add_option("--sigma2", sim.sigma2, "true error variance");
    sim_cmd->add_option("--replicates", sim.replicates, "datasets per cell");
    sim_cmd->add_option("--seed", sim.seed, "master seed");
    sim.prior.add_to(*sim_cmd);
    sim_cmd->add_option("--prior-m1", sim.prior_m1, "prior probability of M1");
    sim_cmd->add_option("--workers", sim.workers, "threads (0 = all cores); results do not depend on it");
    sim_cmd->add_flag("--dataset", sim.dataset, "emit one simulated dataset as CSV instead");
    sim_cmd->add_flag("--json", sim.json, "JSON instead of CSV");
    sim_cmd->add_option("--out", sim.out_path, "output path");

    TableCommand table;
    auto* table_cmd = app.add_subcommand("table", "Reproduce one of the six simulation tables");
    table_cmd->add_option("--table", table.table, "table number")->check(CLI::Range(1, 6));
    table_cmd->add_option("--replicates", table.replicates, "datasets per cell");
    table_cmd->add_option("--seed", table.seed, "master seed");
    table_cmd->add_option("--workers", table.workers, "threads (0 = all cores); results do not depend on it");
    table_cmd->add_option("--prior-set", table.prior_set, "effective or printed hyperparameters (tables 4-6)")
        ->check(CLI::IsMember({"effective", "printed"}));
    table_cmd->add_flag("--json", table.json, "JSON instead of CSV");
    table_cmd->add_option("--out", table.out_path, "output path");

    RegionCommand region;
    auto* region_cmd = app.add_subcommand("region", "Inconsistency boundary h(r) for r = 2..r-max");
    region_cmd->add_option("--r-max", region.r_max, "largest r");
    region_cmd->add_option("--out", region.out_path, "output path");

    PriorShapeCommand shape;
    auto* shape_cmd = app.add_subcommand("prior-shape", "Density of the closed-form prior on the variance ratio");
    shape_cmd->add_option("--p", shape.p, "number of units");
    shape_cmd->add_option("--r", shape.r, "observations per unit");
    shape_cmd->add_option("--alpha", shape.alpha, "prior shape alpha");
    shape_cmd->add_option("--grid", shape.grid, "number of log-spaced points");
    shape_cmd->add_option("--out", shape.out_path, "output path");

    AsymptoticsCommand asym;
    auto* asym_cmd = app.add_subcommand("asymptotics", "Sums-of-squares ratios and log BF along a growing design");
    asym_cmd->add_option("--scenario", asym.scenario, "1: r grows, 2: p grows, 3: both grow");
    asym_cmd->add_option("--model", asym.model, "true model, M0 or M1");
    asym_cmd->add_option("--sigma-a2", asym.sigma_a2, "true between-unit variance (error variance is 1)");
    asym_cmd->add_option("--sizes", asym.sizes, "growing sizes: r, p, or p = r by scenario")->delimiter(',');
    asym_cmd->add_option("--fixed", asym.fixed, "the fixed p (scenario 1) or r (scenario 2)");
    asym_cmd->add_option("--alpha", asym.alpha, "prior shape alpha");
    asym_cmd->add_option("--seed", asym.seed, "master seed");
    asym_cmd->add_option("--out", asym.out_path, "output path");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        report(err, to_string(ErrorKind::InvalidArgument), e.what());
        return 2;
    }

    try {
        if (*bf_cmd) bf.run(out);
        if (*sim_cmd) sim.run(out);
        if (*table_cmd) table.run(out, err);
        if (*region_cmd) region.run(out);
        if (*shape_cmd) shape.run(out);
        if (*asym_cmd) asym.run(out);
    } catch (const Error& e) {
        report(err, to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        report(err, "InternalError", e.what());
        return 2;
    }
    return 0;
}

}  // namespace vcbf
