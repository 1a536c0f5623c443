#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lkld {

/// Realized residual (y - y_hat) and predicted Laplace scale for one
/// regressed dimension.
class PredictionRecord {
public:
    /// Throws std::domain_error unless residual is finite and scale > 0.
    PredictionRecord(double residual, double scale, std::string class_name = {});

    double residual() const { return residual_; }
    double scale() const { return scale_; }
    const std::string& class_name() const { return class_name_; }

private:
    double residual_;
    double scale_;
    std::string class_name_;
};

struct CalibrationPoint {
    double expected_cdf = 0.0;
    double observed_cdf = 0.0;
};

struct CalibrationReport {
    std::vector<CalibrationPoint> curve;
    double ece = 0.0;  // mean |observed - expected| over the curve
    std::size_t n = 0;

    friend bool operator==(const CalibrationReport& a, const CalibrationReport& b) {
        if (a.n != b.n || a.ece != b.ece || a.curve.size() != b.curve.size()) return false;
        for (std::size_t i = 0; i < a.curve.size(); ++i)
            if (a.curve[i].expected_cdf != b.curve[i].expected_cdf ||
                a.curve[i].observed_cdf != b.curve[i].observed_cdf)
                return false;
        return true;
    }
};

inline double standard_score(const PredictionRecord& r) { return r.residual() / r.scale(); }

/// CDF of the standard Laplace distribution.
double laplace_cdf(double z);

/// 0.01, 0.02, ..., 0.99.
std::vector<double> default_cdf_grid();

/// Observed CDF at each grid point p is the fraction of records whose
/// laplace_cdf(standard score) <= p. Counting is split across worker threads;
/// the result does not depend on the split.
/// Throws std::invalid_argument for empty records or a grid that is not
/// strictly increasing inside (0, 1).
CalibrationReport calibration_report(std::span<const PredictionRecord> records,
                                     std::span<const double> grid);

/// Same result with the records cut into `parts` contiguous partitions whose
/// counts are merged afterwards.
CalibrationReport calibration_report_partitioned(std::span<const PredictionRecord> records,
                                                 std::span<const double> grid, std::size_t parts);

/// Direct O(n * grid) evaluation of the definition; reference for the above.
CalibrationReport calibration_report_serial(std::span<const PredictionRecord> records,
                                            std::span<const double> grid);

/// Report per class_name plus the pooled report under the key "all".
std::map<std::string, CalibrationReport> calibration_by_class(
    std::span<const PredictionRecord> records, std::span<const double> grid);

/// Reads `residual,scale,class_name` CSV (class_name column optional).
std::vector<PredictionRecord> prediction_records_from_csv(const std::string& text);

/// Per-class blocks: `class,<name>` then `expected_cdf,observed_cdf` rows and
/// a closing `ece,<value>` line.
std::string calibration_to_csv(const std::map<std::string, CalibrationReport>& reports);

}  // namespace lkld
