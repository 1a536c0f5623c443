#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "lkld/calibration.hpp"
#include "lkld/random.hpp"

using namespace lkld;

namespace {

// Standard Laplace quantile, written out from the CDF.
double laplace_quantile(double p) { return p < 0.5 ? std::log(2.0 * p) : -std::log(2.0 * (1.0 - p)); }

std::vector<PredictionRecord> quantile_set(std::size_t n, double scale_factor) {
    std::vector<PredictionRecord> out;
    for (std::size_t i = 1; i <= n; ++i) {
        const double p = (static_cast<double>(i) - 0.5) / static_cast<double>(n);
        out.emplace_back(laplace_quantile(p), scale_factor);
    }
    return out;
}

double ece_of(const std::vector<PredictionRecord>& r) { return calibration_report(r, default_cdf_grid()).ece; }

}  // namespace

TEST_CASE("standard score examples") {
    CHECK(standard_score(PredictionRecord(0.0, 0.5)) == 0.0);
    CHECK(standard_score(PredictionRecord(1.0, 0.5)) == 2.0);
    CHECK(standard_score(PredictionRecord(-0.3, 0.1)) == doctest::Approx(-3.0).epsilon(1e-15));
    CHECK_THROWS_AS(PredictionRecord(0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(PredictionRecord(NAN, 1.0), std::domain_error);
}

TEST_CASE("laplace cdf examples") {
    CHECK(laplace_cdf(0.0) == 0.5);
    CHECK(laplace_cdf(std::log(2.0)) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(laplace_cdf(-std::log(2.0)) == doctest::Approx(0.25).epsilon(1e-15));
    for (double z : {0.1, 1.0, 3.0, 20.0}) CHECK(laplace_cdf(z) + laplace_cdf(-z) == doctest::Approx(1.0));
    for (double p : {0.01, 0.3, 0.5, 0.9}) CHECK(laplace_cdf(laplace_quantile(p)) == doctest::Approx(p).epsilon(1e-13));
}

TEST_CASE("default grid") {
    const auto g = default_cdf_grid();
    REQUIRE(g.size() == 99);
    CHECK(g.front() == doctest::Approx(0.01));
    CHECK(g.back() == doctest::Approx(0.99));
    CHECK(std::is_sorted(g.begin(), g.end()));
}

TEST_CASE("single record boundary is inclusive") {
    const std::vector<PredictionRecord> r{PredictionRecord(0.0, 1.0)};
    const std::vector<double> grid{0.25, 0.5, 0.75};
    const auto rep = calibration_report(r, grid);
    REQUIRE(rep.curve.size() == 3);
    CHECK(rep.curve[0].observed_cdf == 0.0);
    CHECK(rep.curve[1].observed_cdf == 1.0);
    CHECK(rep.curve[2].observed_cdf == 1.0);
    CHECK(rep.ece == doctest::Approx((0.25 + 0.5 + 0.25) / 3.0));
    CHECK(rep.n == 1);
}

TEST_CASE("perfectly calibrated quantiles") {
    CHECK(ece_of(quantile_set(10000, 1.0)) < 0.001);
}

TEST_CASE("mis-scaled quantiles") {
    const auto over = quantile_set(10000, 0.5);
    const auto rep = calibration_report(over, default_cdf_grid());
    CHECK(rep.ece > 0.05);
    // overconfident: scores spread out, so fewer land below p just above the median
    for (const auto& pt : rep.curve)
        if (pt.expected_cdf > 0.5 && pt.expected_cdf < 0.6) CHECK(pt.observed_cdf < pt.expected_cdf);
    CHECK(ece_of(quantile_set(10000, 2.0)) > 0.05);
    CHECK(ece_of(quantile_set(10000, 1.0)) < ece_of(quantile_set(10000, 2.0)));
    CHECK(ece_of(quantile_set(10000, 1.0)) < ece_of(quantile_set(10000, 0.5)));
}

TEST_CASE("report invariants") {
    Rng rng(6);
    std::vector<PredictionRecord> r;
    for (int i = 0; i < 3000; ++i) r.emplace_back(rng.uniform(-3, 3), rng.uniform(0.05, 2.0));
    const auto grid = default_cdf_grid();
    const auto rep = calibration_report(r, grid);
    double gap = 0.0;
    for (std::size_t i = 0; i < rep.curve.size(); ++i) {
        gap += std::abs(rep.curve[i].observed_cdf - rep.curve[i].expected_cdf);
        if (i > 0) {
            CHECK(rep.curve[i].expected_cdf > rep.curve[i - 1].expected_cdf);
            CHECK(rep.curve[i].observed_cdf >= rep.curve[i - 1].observed_cdf);
        }
    }
    CHECK(std::abs(rep.ece - gap / static_cast<double>(rep.curve.size())) < 1e-12);
}

TEST_CASE("probability integral transform") {
    Rng rng(2718);
    const std::size_t n = 50000;
    std::vector<double> u;
    u.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double scale = std::exp(rng.uniform(-3, 1));
        const PredictionRecord r(rng.laplace(scale), scale);
        u.push_back(laplace_cdf(standard_score(r)));
    }
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
        ks = std::max({ks, std::abs(u[i] - lo), std::abs(hi - u[i])});
    }
    CHECK(ks < 0.01);
}

TEST_CASE("partitioned and serial reports agree exactly") {
    Rng rng(12);
    std::vector<PredictionRecord> r;
    for (int i = 0; i < 10007; ++i) r.emplace_back(rng.laplace(0.3), 0.3);
    const auto grid = default_cdf_grid();
    const auto ser = calibration_report_serial(r, grid);
    for (std::size_t parts : {1, 2, 3, 7, 64, 20000}) CHECK(calibration_report_partitioned(r, grid, parts) == ser);
    CHECK(calibration_report(r, grid) == ser);
}

TEST_CASE("report preconditions") {
    const std::vector<double> grid{0.5};
    CHECK_THROWS_AS(calibration_report(std::span<const PredictionRecord>{}, grid), std::invalid_argument);
    const std::vector<PredictionRecord> r{PredictionRecord(0.0, 1.0)};
    const std::vector<double> bad1{0.5, 0.5}, bad2{0.0, 0.5}, bad3{0.5, 1.0}, empty{};
    CHECK_THROWS_AS(calibration_report(r, bad1), std::invalid_argument);
    CHECK_THROWS_AS(calibration_report(r, bad2), std::invalid_argument);
    CHECK_THROWS_AS(calibration_report(r, bad3), std::invalid_argument);
    CHECK_THROWS_AS(calibration_report(r, empty), std::invalid_argument);
}

TEST_CASE("per-class reports and csv") {
    const std::string csv = "residual,scale,class_name\n0,1,car\n0.1,1,car\n-2,0.5,ped\n";
    const auto recs = prediction_records_from_csv(csv);
    REQUIRE(recs.size() == 3);
    const std::vector<double> grid{0.5};
    const auto by = calibration_by_class(recs, grid);
    REQUIRE(by.size() == 3);
    CHECK(by.at("all").n == 3);
    CHECK(by.at("car").n == 2);
    CHECK(by.at("ped").curve[0].observed_cdf == 1.0);
    const std::string out = calibration_to_csv(by);
    CHECK(out.find("class,all\nexpected_cdf,observed_cdf\n0.5,0.666666667\n") != std::string::npos);
    CHECK(out.find("class,all") < out.find("class,car"));
    CHECK(out.find("ece,") != std::string::npos);

    const auto bare = prediction_records_from_csv("residual,scale\n1,2\n");
    CHECK(bare[0].class_name().empty());
    CHECK_THROWS(prediction_records_from_csv("residual,scale\n1,0\n"));
    CHECK_THROWS(prediction_records_from_csv("r,s\n1,1\n"));
    CHECK_THROWS(prediction_records_from_csv("residual,scale\n1,abc\n"));
}
