#include "lkld/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lkld/io.hpp"
#include "lkld/parallel.hpp"

namespace lkld {

PredictionRecord::PredictionRecord(double residual, double scale, std::string class_name)
    : residual_(residual), scale_(scale), class_name_(std::move(class_name)) {
    if (!std::isfinite(residual)) throw std::domain_error("residual must be finite");
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw std::domain_error("prediction scale must be positive, got " + format_sig(scale));
}

double laplace_cdf(double z) { return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z); }

std::vector<double> default_cdf_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 99; ++i) g.push_back(i / 100.0);
    return g;
}

namespace {

void validate(std::span<const PredictionRecord> records, std::span<const double> grid) {
    if (records.empty()) throw std::invalid_argument("calibration needs at least one record");
    if (grid.empty()) throw std::invalid_argument("calibration grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0 && grid[i] < 1.0))
            throw std::invalid_argument("calibration grid points must lie in (0, 1)");
        if (i > 0 && !(grid[i - 1] < grid[i]))
            throw std::invalid_argument("calibration grid must be strictly increasing");
    }
}

CalibrationReport finish(std::span<const double> grid, const std::vector<std::size_t>& at_or_below,
                         std::size_t n) {
    CalibrationReport rep;
    rep.n = n;
    rep.curve.reserve(grid.size());
    double gap = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double observed = static_cast<double>(at_or_below[k]) / static_cast<double>(n);
        rep.curve.push_back({grid[k], observed});
        gap += std::abs(observed - grid[k]);
    }
    rep.ece = gap / static_cast<double>(grid.size());
    return rep;
}

// First grid index k with cdf <= grid[k]; grid.size() if none.
std::size_t first_bin(double cdf, std::span<const double> grid) {
    return static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), cdf) - grid.begin());
}

void count_range(std::span<const PredictionRecord> records, std::span<const double> grid,
                 std::vector<std::size_t>& hist) {
    for (const auto& r : records) ++hist[first_bin(laplace_cdf(standard_score(r)), grid)];
}

std::vector<std::size_t> cumulative(const std::vector<std::size_t>& hist, std::size_t grid_size) {
    std::vector<std::size_t> out(grid_size);
    std::size_t running = 0;
    for (std::size_t k = 0; k < grid_size; ++k) {
        running += hist[k];
        out[k] = running;
    }
    return out;
}

}  // namespace

CalibrationReport calibration_report_partitioned(std::span<const PredictionRecord> records,
                                                 std::span<const double> grid, std::size_t parts) {
    validate(records, grid);
    parts = std::clamp<std::size_t>(parts, 1, records.size());
    const std::size_t bins = grid.size() + 1;
    std::vector<std::vector<std::size_t>> partial(parts, std::vector<std::size_t>(bins, 0));
    const auto np = static_cast<std::ptrdiff_t>(parts);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::ptrdiff_t p = 0; p < np; ++p) {
        const std::size_t lo = records.size() * static_cast<std::size_t>(p) / parts;
        const std::size_t hi = records.size() * static_cast<std::size_t>(p + 1) / parts;
        count_range(records.subspan(lo, hi - lo), grid, partial[static_cast<std::size_t>(p)]);
    }
    std::vector<std::size_t> hist(bins, 0);
    for (const auto& h : partial)
        for (std::size_t k = 0; k < bins; ++k) hist[k] += h[k];
    return finish(grid, cumulative(hist, grid.size()), records.size());
}

CalibrationReport calibration_report(std::span<const PredictionRecord> records,
                                     std::span<const double> grid) {
    return calibration_report_partitioned(records, grid,
                                          static_cast<std::size_t>(std::max(1, worker_threads())));
}

CalibrationReport calibration_report_serial(std::span<const PredictionRecord> records,
                                            std::span<const double> grid) {
    validate(records, grid);
    std::vector<std::size_t> at_or_below(grid.size(), 0);
    for (std::size_t k = 0; k < grid.size(); ++k)
        for (const auto& r : records)
            if (laplace_cdf(standard_score(r)) <= grid[k]) ++at_or_below[k];
    return finish(grid, at_or_below, records.size());
}

std::map<std::string, CalibrationReport> calibration_by_class(
    std::span<const PredictionRecord> records, std::span<const double> grid) {
    std::map<std::string, std::vector<PredictionRecord>> split;
    for (const auto& r : records) split[r.class_name()].push_back(r);
    std::map<std::string, CalibrationReport> out;
    out.emplace("all", calibration_report(records, grid));
    for (const auto& [name, recs] : split) {
        if (name == "all" || name.empty()) continue;
        out.emplace(name, calibration_report(recs, grid));
    }
    return out;
}

std::vector<PredictionRecord> prediction_records_from_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw std::invalid_argument("residual CSV is empty (missing header)");
    const auto& h = rows.front();
    const bool has_class = h.size() == 3 && h[2] == "class_name";
    if (h.size() < 2 || h[0] != "residual" || h[1] != "scale" || (h.size() == 3 && !has_class) || h.size() > 3)
        throw std::invalid_argument("residual CSV header must be residual,scale[,class_name]");
    std::vector<PredictionRecord> out;
    out.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != h.size())
            throw std::invalid_argument("residual CSV row " + std::to_string(i + 1) + " has " +
                                        std::to_string(r.size()) + " fields");
        try {
            out.emplace_back(parse_real(r[0]), parse_real(r[1]), has_class ? r[2] : std::string());
        } catch (const std::domain_error& e) {
            throw std::domain_error("residual CSV row " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

std::string calibration_to_csv(const std::map<std::string, CalibrationReport>& reports) {
    std::string out = "# ece: mean |observed_cdf - expected_cdf| over the grid (summary defined by this tool)\n";
    auto block = [&out](const std::string& name, const CalibrationReport& rep) {
        out += "class," + csv_field(name) + '\n';
        out += "expected_cdf,observed_cdf\n";
        for (const auto& pt : rep.curve)
            out += format_sig(pt.expected_cdf) + ',' + format_sig(pt.observed_cdf) + '\n';
        out += "ece," + format_sig(rep.ece) + '\n';
    };
    if (auto it = reports.find("all"); it != reports.end()) block(it->first, it->second);
    for (const auto& [name, rep] : reports)
        if (name != "all") block(name, rep);
    return out;
}

}  // namespace lkld
