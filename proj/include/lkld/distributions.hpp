#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lkld {

/// Location and scale of a univariate Laplace distribution. Used both for a
/// prediction (y_hat, b_hat) and for a label distribution (y, b).
class LaplaceParams {
public:
    /// Throws std::domain_error unless scale > 0 and both values are finite.
    LaplaceParams(double location, double scale);

    double location() const { return location_; }
    double scale() const { return scale_; }

private:
    double location_;
    double scale_;
};

/// Loss value (nats) and its partials with respect to the predicted
/// location and scale.
struct LossGrad {
    double value = 0.0;
    double d_location = 0.0;
    double d_scale = 0.0;
};

enum class LossKind { NLL, KLD };

std::string to_string(LossKind kind);
/// Accepts "nll" / "kld" (case-insensitive). Throws std::invalid_argument.
LossKind parse_loss_kind(const std::string& text);

/// Subgradient sign with sgn(0) == 0.
inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Negative log likelihood of `label_location` under the predicted Laplace:
/// log(2 b_hat) + |y - y_hat| / b_hat.
LossGrad nll_loss(double label_location, const LaplaceParams& pred);

/// KL(label || pred) for two Laplace distributions.
LossGrad kld_loss(const LaplaceParams& label, const LaplaceParams& pred);

/// The b -> 0 limit of kld_loss. The gradients are evaluated through the
/// KL partials with the label exponential terms set to zero, which makes them
/// identical to nll_loss. The true divergence is unbounded in this limit, so
/// `value` carries the NLL value instead.
LossGrad kld_loss_zero_label_scale(double label_location, const LaplaceParams& pred);

/// Dispatches on kind. For KLD a label_scale of exactly 0 routes to
/// kld_loss_zero_label_scale; label_scale is ignored for NLL.
LossGrad evaluate_loss(LossKind kind, double label_location, double label_scale,
                       const LaplaceParams& pred);

struct SurfaceGrid {
    LossKind kind = LossKind::NLL;
    double label_scale = 0.0;
    std::vector<double> error_axis;  // |y - y_hat|
    std::vector<double> scale_axis;  // b_hat
    std::vector<double> values;      // row-major, error index major

    double at(std::size_t error_index, std::size_t scale_index) const {
        return values[error_index * scale_axis.size() + scale_index];
    }
};

/// Loss surface over (error, b_hat). Rows are filled in parallel.
/// Throws std::invalid_argument on empty or non-increasing axes, a
/// non-positive scale entry, a negative error entry, or label_scale <= 0 for KLD.
SurfaceGrid surface_grid(LossKind kind, double label_scale, std::vector<double> error_axis,
                         std::vector<double> scale_axis);

/// Single-threaded reference for surface_grid.
SurfaceGrid surface_grid_serial(LossKind kind, double label_scale,
                                std::vector<double> error_axis,
                                std::vector<double> scale_axis);

/// CSV with header `error,scale,value`, one row per cell, 9 significant digits.
std::string surface_to_csv(const SurfaceGrid& grid);

}  // namespace lkld
