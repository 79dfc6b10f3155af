#include <catch_amalgamated.hpp>

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "oracles.hpp"
#include "vcbf/asymptotics.hpp"
#include "vcbf/error.hpp"
#include "vcbf/montecarlo.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using vcbf::BalancedDesign;
using vcbf::CellSpec;
using vcbf::ClosedFormRule;
using vcbf::ErrorKind;
using vcbf::QuadratureRule;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const vcbf::Error& e) {
        return e.kind();
    }
    FAIL("expected vcbf::Error");
    return ErrorKind::IoError;
}

double exact_frequency(int p, int r, double alpha, double sigma_a2) {
    const BalancedDesign d(p, r);
    const double m1 = oracle::prob_choose_m1(
        p, r, sigma_a2, [&](double ratio) { return vcbf::closed_form_log_bf_from_ratio(d, alpha, ratio); });
    return sigma_a2 == 0.0 ? 1.0 - m1 : m1;
}

}  // namespace

TEST_CASE("normal_quantile matches boost") {
    boost::math::normal_distribution<double> dist;
    for (double p = 1e-300; p < 0.5; p *= 1.7) {
        REQUIRE_THAT(vcbf::normal_quantile(p), WithinRel(boost::math::quantile(dist, p), 1e-14));
        if (1.0 - p < 1.0) {
            REQUIRE_THAT(vcbf::normal_quantile(1.0 - p), WithinRel(boost::math::quantile(dist, 1.0 - p), 1e-12));
        }
    }
    for (double p = 0.001; p < 1.0; p += 0.001) {
        REQUIRE_THAT(vcbf::normal_quantile(p), WithinAbs(boost::math::quantile(dist, p), 1e-14));
    }
    CHECK(vcbf::normal_quantile(0.5) == 0.0);
    CHECK(kind_of([] { vcbf::normal_quantile(0.0); }) == ErrorKind::DomainError);
    CHECK(kind_of([] { vcbf::normal_quantile(1.0); }) == ErrorKind::DomainError);
}

TEST_CASE("random streams are keyed and reproducible") {
    auto a = vcbf::RandomStream::for_replicate(1, 2, 3);
    auto b = vcbf::RandomStream::for_replicate(1, 2, 3);
    auto c = vcbf::RandomStream::for_replicate(1, 2, 4);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        REQUIRE(x == b.next_u64());
        if (x != c.next_u64()) differs = true;
    }
    CHECK(differs);

    vcbf::RandomStream s(99);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sq += u * u;
    }
    CHECK_THAT(sum / n, WithinAbs(0.5, 0.005));
    CHECK_THAT(sq / n - (sum / n) * (sum / n), WithinAbs(1.0 / 12.0, 0.002));
}

TEST_CASE("simulate_dataset follows the documented draw order") {
    const BalancedDesign d(3, 2);
    const vcbf::ModelParams params{1.5, 4.0, 9.0};
    auto s1 = vcbf::RandomStream::for_replicate(7, 8, 9);
    auto s2 = vcbf::RandomStream::for_replicate(7, 8, 9);
    const auto data = vcbf::simulate_dataset(d, params, s1);
    double a[3];
    for (double& x : a) x = 3.0 * s2.normal();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 2; ++j) REQUIRE(data.at(i, j) == 1.5 + a[i] + 2.0 * s2.normal());
    }
    // unit effects are drawn even when their variance is zero
    auto s3 = vcbf::RandomStream::for_replicate(7, 8, 9);
    auto s4 = vcbf::RandomStream::for_replicate(7, 8, 9);
    const auto null_data = vcbf::simulate_dataset(d, {0.0, 1.0, 0.0}, s3);
    for (int i = 0; i < 3; ++i) s4.normal();
    CHECK(null_data.at(0, 0) == s4.normal());
}

TEST_CASE("simulate_dataset moments") {
    {
        const BalancedDesign d(1000, 1000);
        auto s = vcbf::RandomStream::for_replicate(2024, 0, 0);
        const auto data = vcbf::simulate_dataset(d, {0.0, 1.0, 0.0}, s);
        double sum = 0.0;
        for (double v : data.values()) sum += v;
        const double mean = sum / d.n();
        double ss = 0.0;
        for (double v : data.values()) ss += (v - mean) * (v - mean);
        CHECK(std::fabs(mean) < 4e-3);
        CHECK_THAT(ss / (d.n() - 1), WithinRel(1.0, 0.01));
    }
    {
        const BalancedDesign d(10000, 2);
        auto s = vcbf::RandomStream::for_replicate(2024, 1, 0);
        const auto stats = vcbf::sufficient_stats(vcbf::simulate_dataset(d, {0.0, 1.0, 3.0}, s));
        CHECK_THAT(stats.w_h / (d.p() - 1), WithinRel(7.0, 0.03));
    }
    {
        const BalancedDesign d(4, 5);
        auto s1 = vcbf::RandomStream::for_replicate(5, 5, 5);
        auto s2 = vcbf::RandomStream::for_replicate(5, 5, 5);
        CHECK(vcbf::simulate_dataset(d, {0, 1, 1}, s1) == vcbf::simulate_dataset(d, {0, 1, 1}, s2));
    }
}

TEST_CASE("rule parameters and cell keys") {
    CHECK(vcbf::rule_params(ClosedFormRule{-0.5}) == "alpha=-1/2");
    CHECK(vcbf::rule_params(ClosedFormRule{-0.1}) == "alpha=-1/10");
    CHECK(vcbf::rule_params(ClosedFormRule{-0.3}) == "alpha=-3/10");
    CHECK(vcbf::rule_params(ClosedFormRule{0.123456789}) == "alpha=0.123456789");
    QuadratureRule q;
    q.alpha = -0.5;
    q.beta = 0;
    q.kappa_rule = vcbf::KappaRule::OneOverN;
    CHECK(vcbf::rule_params(q) == "alpha=-1/2;beta=0;kappa=1/n");
    CHECK(q.prior_for(BalancedDesign(2, 5)).kappa == 0.1);
    q.kappa_rule = vcbf::KappaRule::R;
    CHECK(q.prior_for(BalancedDesign(2, 5)).kappa == 5.0);

    const CellSpec cell{BalancedDesign(2, 5), 0.5, ClosedFormRule{-0.25}, 1};
    CHECK(vcbf::cell_key(cell) == "table=1|p=2|r=5|rule=alpha=-1/4|sigma_a2=0.5");
    CHECK(vcbf::cell_id(cell) == vcbf::fnv1a64("table=1|p=2|r=5|rule=alpha=-1/4|sigma_a2=0.5"));
    CHECK(vcbf::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(vcbf::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("run_cell reproduces reference cells") {
    const auto t1 = vcbf::run_cell({BalancedDesign(2, 500), 0.0, ClosedFormRule{-0.5}, 1}, 10000, 42);
    CHECK_THAT(t1.relative_frequency, WithinAbs(0.993, 0.01));
    CHECK(t1.replicates_used == 10000);
    CHECK(t1.degenerate_count == 0);
    CHECK_THAT(t1.standard_error,
               WithinRel(std::sqrt(t1.relative_frequency * (1 - t1.relative_frequency) / 10000), 1e-15));

    const auto t2 = vcbf::run_cell({BalancedDesign(500, 2), 0.5, ClosedFormRule{-0.5}, 2}, 10000, 42);
    CHECK(t2.relative_frequency <= 0.005);

    const auto t3 = vcbf::run_cell({BalancedDesign(50, 25), 1.0, ClosedFormRule{-0.25}, 3}, 10000, 42);
    CHECK(t3.relative_frequency >= 0.999);
}

TEST_CASE("run_cell agrees with the exact frequency oracle") {
    struct Case {
        int p, r;
        double alpha, sigma_a2;
    };
    for (const auto& c : {Case{2, 5, -0.5, 0.0}, Case{2, 5, -0.1, 1.0}, Case{5, 2, -0.5, 0.5}, Case{2, 2, -0.25, 2.0},
                          Case{10, 10, -0.2, 0.5}, Case{100, 2, -0.5, 1.0}}) {
        const auto row = vcbf::run_cell({BalancedDesign(c.p, c.r), c.sigma_a2, ClosedFormRule{c.alpha}}, 4000, 7);
        const double exact = exact_frequency(c.p, c.r, c.alpha, c.sigma_a2);
        const double se = std::sqrt(exact * (1 - exact) / 4000);
        INFO("p=" << c.p << " r=" << c.r << " alpha=" << c.alpha << " sigma_a2=" << c.sigma_a2 << " exact=" << exact);
        CHECK(std::fabs(row.relative_frequency - exact) <= 4.0 * se + 1e-9);
    }
}

TEST_CASE("run_cell is identical for any worker count") {
    const CellSpec closed{BalancedDesign(10, 5), 1.0, ClosedFormRule{-0.2}, 3};
    const auto one = vcbf::run_cell(closed, 3001, 11, 1);
    for (unsigned w : {2u, 4u, 16u}) {
        const auto many = vcbf::run_cell(closed, 3001, 11, w);
        REQUIRE(many.correct == one.correct);
        REQUIRE(many.relative_frequency == one.relative_frequency);
    }
    QuadratureRule q;
    q.kappa_rule = vcbf::KappaRule::OneOverN;
    const CellSpec quad{BalancedDesign(2, 10), 0.5, q, 4};
    CHECK(vcbf::run_cell(quad, 300, 3, 1).correct == vcbf::run_cell(quad, 300, 3, 16).correct);
}

TEST_CASE("run_cell errors and degenerate replicates") {
    CHECK(kind_of([] { vcbf::run_cell({BalancedDesign(2, 2), 0.0, ClosedFormRule{0.0}}, 10, 1); }) ==
          ErrorKind::HyperparameterOutOfRange);
    CHECK(kind_of([] { vcbf::run_cell({BalancedDesign(2, 2), 0.0, ClosedFormRule{-0.5}}, 0, 1); }) ==
          ErrorKind::InvalidArgument);
    CellSpec cell{BalancedDesign(2, 3), 0.0, ClosedFormRule{-0.5}};
    cell.mu = 1e20;
    cell.sigma2 = 1e-20;  // every simulated value rounds to mu
    const auto row = vcbf::run_cell(cell, 50, 1);
    CHECK(row.degenerate_count == 50);
    CHECK(row.replicates_used == 0);
    CHECK(std::isnan(row.relative_frequency));
}

TEST_CASE("adding cells does not disturb existing ones") {
    vcbf::ExperimentConfig small;
    small.design_grid = {BalancedDesign(5, 2)};
    small.truth_grid = {0.5};
    small.replicates = 500;
    small.seed = 9;
    vcbf::ExperimentConfig big = small;
    big.design_grid = {BalancedDesign(2, 5), BalancedDesign(5, 2)};
    big.truth_grid = {0.0, 0.5, 1.0};
    const auto a = vcbf::run_experiment(small);
    const auto b = vcbf::run_experiment(big);
    REQUIRE(a.rows.size() == 1);
    REQUIRE(b.rows.size() == 6);
    CHECK(b.rows[4].correct == a.rows[0].correct);
}

TEST_CASE("table layouts") {
    const auto t2 = vcbf::table_config(2, 10, 1);
    CHECK(t2.design_grid.size() == 5);
    CHECK(t2.rules.size() == 4);
    CHECK(t2.truth_grid.size() == 6);
    CHECK(vcbf::table_config(3, 10, 1).design_grid.size() == 6);

    const auto t4 = vcbf::table_config(4, 10, 1);
    CHECK(t4.reference_labels.at(1) == "alpha=-1/2;beta=0;kappa=1/n");
    CHECK(std::get<QuadratureRule>(t4.rules.at(1)).prior_for(BalancedDesign(2, 5)).kappa == 0.1);
    CHECK(vcbf::rule_params(t4.rules.at(0)) == "alpha=0;beta=0;kappa=1");
    const auto printed = vcbf::table_config(4, 10, 1, vcbf::PriorSet::Printed);
    CHECK(vcbf::rule_params(printed.rules.at(0)) == "alpha=-1/2;beta=0;kappa=1");
    CHECK(vcbf::rule_params(printed.rules.at(2)) == "alpha=0;beta=-1/2;kappa=1");
    CHECK(kind_of([] { vcbf::table_config(7, 10, 1); }) == ErrorKind::InvalidArgument);

    const auto table = vcbf::reproduce_table(2, 20, 5);
    CHECK(table.rows.size() == 120);
    for (const auto& row : table.rows) {
        REQUIRE(row.reference_value.has_value());
        REQUIRE(row.relative_frequency >= 0.0);
        REQUIRE(row.relative_frequency <= 1.0);
    }
    const auto again = vcbf::reproduce_table(2, 20, 5);
    for (std::size_t i = 0; i < table.rows.size(); ++i) REQUIRE(again.rows[i].correct == table.rows[i].correct);
}

TEST_CASE("bundled reference values") {
    CHECK(vcbf::reference_value(1, 2, 500, "alpha=-1/2", 0.0) == 0.993);
    CHECK(vcbf::reference_value(2, 500, 2, "alpha=-1/2", 0.5) == 0.0);
    CHECK(vcbf::reference_value(4, 2, 5, "alpha=-1/2;beta=0;kappa=1/n", 0.0) == 0.951);
    CHECK(vcbf::reference_value(6, 25, 50, "alpha=0;beta=0;kappa=r", 5.0).has_value());
    CHECK_FALSE(vcbf::reference_value(1, 3, 3, "alpha=-1/2", 0.0).has_value());
    CHECK_FALSE(vcbf::reference_value(9, 2, 5, "alpha=-1/2", 0.0).has_value());
}

TEST_CASE("invalid cells are marked, not skipped") {
    vcbf::ExperimentConfig config;
    config.design_grid = {BalancedDesign(2, 2), BalancedDesign(2, 3)};
    config.truth_grid = {0.0};
    config.rules = {ClosedFormRule{0.0}};
    config.replicates = 10;
    const auto table = vcbf::run_experiment(config);
    REQUIRE(table.rows.size() == 2);
    CHECK_FALSE(table.rows[0].valid);
    CHECK(table.rows[1].valid);

    std::ostringstream csv;
    vcbf::write_csv(table, csv);
    std::istringstream lines(csv.str());
    std::string header, first, second;
    std::getline(lines, header);
    std::getline(lines, first);
    std::getline(lines, second);
    CHECK(header == "p,r,rule_params,sigma_a2,frequency,se,replicates,degenerate");
    CHECK(first == "2,2,alpha=0,0.0,invalid,invalid,0,0");
    CHECK(second.rfind("2,3,alpha=0,0.0,", 0) == 0);

    const auto json = nlohmann::json::parse(vcbf::to_json(table));
    CHECK(json["rows"][0]["valid"] == false);
    CHECK(json["rows"][0]["frequency"].is_null());
    CHECK(json["rows"][1]["replicates"] == 10);
    CHECK(nlohmann::json::parse(json.dump()) == json);
}

TEST_CASE("experiment config validation") {
    vcbf::ExperimentConfig config;
    CHECK(kind_of([&] { config.validate(); }) == ErrorKind::InvalidArgument);
    config.design_grid = {BalancedDesign(2, 2)};
    config.truth_grid = {-1.0};
    CHECK(kind_of([&] { config.validate(); }) == ErrorKind::InvalidArgument);
    config.truth_grid = {0.0};
    config.replicates = 0;
    CHECK(kind_of([&] { config.validate(); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("frequency trends along the grids") {
    // inconsistency region: sigma_a2 = 0.5 < h(2) with r = 2
    double prev = 1.0;
    double prev_se = 0.0;
    for (int p : {5, 50, 500}) {
        const auto row = vcbf::run_cell({BalancedDesign(p, 2), 0.5, ClosedFormRule{-0.5}, 2}, 4000, 17);
        REQUIRE(row.relative_frequency <= prev + 2.0 * std::max(row.standard_error, prev_se));
        prev = row.relative_frequency;
        prev_se = row.standard_error;
    }
    // null model: choosing M0 gets more frequent as n grows
    prev = 0.0;
    prev_se = 0.0;
    for (int r : {5, 10, 50, 100, 500}) {
        const auto row = vcbf::run_cell({BalancedDesign(2, r), 0.0, ClosedFormRule{-0.5}, 1}, 4000, 17);
        REQUIRE(row.relative_frequency + 2.0 * std::max(row.standard_error, prev_se) >= prev);
        prev = row.relative_frequency;
        prev_se = row.standard_error;
    }
}

namespace {

struct Spread {
    double within;  // fraction of replicates inside the tolerance
    double sd;
};

Spread statistic_spread(const vcbf::Scenario& scenario, const BalancedDesign& d, double sigma_a2, double tol,
                    int reps, std::uint64_t cell) {
    const vcbf::ModelParams params{0.0, 1.0, sigma_a2};
    const auto model = sigma_a2 > 0.0 ? vcbf::Model::M1 : vcbf::Model::M0;
    const double limit = vcbf::ratio_limit(scenario, model, params);
    int close = 0;
    double ss = 0.0;
    for (int k = 0; k < reps; ++k) {
        auto s = vcbf::RandomStream::for_replicate(3, cell, k);
        const auto stats = vcbf::sufficient_stats(vcbf::simulate_dataset(d, params, s));
        const double dev = vcbf::scenario_statistic(scenario, stats) - limit;
        if (std::fabs(dev) < tol) ++close;
        ss += dev * dev;
    }
    return {static_cast<double>(close) / reps, std::sqrt(ss / reps)};
}

}  // namespace

TEST_CASE("both-grow statistic concentrates at the sampling rate") {
    // W_H / W_E has relative spread sqrt(2/(p-1)); the statistic moves a
    // quarter of that at the limit 1/2, so sd ~ 0.25 * sqrt(2/(p-1)).
    const auto scenario = vcbf::Scenario::both_grow();
    for (int size : {100, 200}) {
        const double sd = 0.25 * std::sqrt(2.0 / (size - 1));
        const auto spread = statistic_spread(scenario, BalancedDesign(size, size), 1.0, 3.0 * sd, 200, size);
        INFO("p=r=" << size << " sd=" << spread.sd);
        CHECK(spread.within >= 0.95);
        CHECK_THAT(spread.sd, WithinRel(sd, 0.2));
    }
}

TEST_CASE("p-grows statistic concentrates at the sampling rate") {
    // under M0 the statistic is F(p-1, n-p)
    const auto scenario = vcbf::Scenario::p_grows(2);
    for (int p : {500, 2000}) {
        const double sd = std::sqrt(2.0 / (p - 1) + 2.0 / p);
        const auto spread = statistic_spread(scenario, BalancedDesign(p, 2), 0.0, 3.0 * sd, 400, p);
        INFO("p=" << p << " sd=" << spread.sd);
        CHECK(spread.within >= 0.95);
        CHECK_THAT(spread.sd, WithinRel(sd, 0.15));
    }
}
