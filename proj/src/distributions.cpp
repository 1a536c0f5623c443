#include "lkld/distributions.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "lkld/io.hpp"
#include "lkld/parallel.hpp"

namespace lkld {

LaplaceParams::LaplaceParams(double location, double scale) : location_(location), scale_(scale) {
    if (!std::isfinite(location)) throw std::domain_error("Laplace location must be finite");
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw std::domain_error("Laplace scale must be positive and finite, got " + format_sig(scale));
}

std::string to_string(LossKind kind) { return kind == LossKind::NLL ? "nll" : "kld"; }

LossKind parse_loss_kind(const std::string& text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "nll") return LossKind::NLL;
    if (lower == "kld") return LossKind::KLD;
    throw std::invalid_argument("unknown loss kind '" + text + "' (expected nll or kld)");
}

namespace {

// Partials of KL(label || pred) given the label exponential term
// e = exp(-|y - y_hat| / b). Passing b = 0, e = 0 yields the NLL partials
// bit for bit.
void kld_partials(double residual, double b, double e, double b_hat, LossGrad& out) {
    const double abs_err = std::abs(residual);
    out.d_location = (-sgn(residual) / b_hat) * (1.0 - e);
    out.d_scale = (1.0 / b_hat) * (1.0 - (b * e + abs_err) / b_hat);
}

}  // namespace

LossGrad nll_loss(double label_location, const LaplaceParams& pred) {
    const double b_hat = pred.scale();
    const double residual = label_location - pred.location();
    const double abs_err = std::abs(residual);
    LossGrad g;
    g.value = std::log(2.0 * b_hat) + abs_err / b_hat;
    g.d_location = -sgn(residual) / b_hat;
    g.d_scale = (1.0 / b_hat) * (1.0 - abs_err / b_hat);
    return g;
}

LossGrad kld_loss(const LaplaceParams& label, const LaplaceParams& pred) {
    const double b = label.scale();
    const double b_hat = pred.scale();
    const double residual = label.location() - pred.location();
    const double abs_err = std::abs(residual);
    const double ratio = abs_err / b;

    LossGrad g;
    // log(b_hat/b) + b/b_hat - 1 written as u - log1p(u), u = b/b_hat - 1, and
    // (b*exp(-d/b) - b + d)/b_hat via expm1; both pieces are >= 0 in floating point.
    const double u = (b - b_hat) / b_hat;
    g.value = (u - std::log1p(u)) + (b * std::expm1(-ratio) + abs_err) / b_hat;
    kld_partials(residual, b, std::exp(-ratio), b_hat, g);
    return g;
}

LossGrad kld_loss_zero_label_scale(double label_location, const LaplaceParams& pred) {
    const double b_hat = pred.scale();
    const double residual = label_location - pred.location();
    LossGrad g;
    g.value = std::log(2.0 * b_hat) + std::abs(residual) / b_hat;
    kld_partials(residual, 0.0, 0.0, b_hat, g);
    return g;
}

LossGrad evaluate_loss(LossKind kind, double label_location, double label_scale,
                       const LaplaceParams& pred) {
    if (kind == LossKind::NLL) return nll_loss(label_location, pred);
    if (label_scale == 0.0) return kld_loss_zero_label_scale(label_location, pred);
    return kld_loss(LaplaceParams(label_location, label_scale), pred);
}

namespace {

void validate_axes(LossKind kind, double label_scale, const std::vector<double>& error_axis,
                   const std::vector<double>& scale_axis) {
    auto strictly_increasing = [](const std::vector<double>& v) {
        return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return !(a < b); }) ==
               v.end();
    };
    if (error_axis.empty() || scale_axis.empty())
        throw std::invalid_argument("surface axes must be non-empty");
    if (!strictly_increasing(error_axis) || !strictly_increasing(scale_axis))
        throw std::invalid_argument("surface axes must be strictly increasing");
    if (!(error_axis.front() >= 0.0) || !std::isfinite(error_axis.back()))
        throw std::invalid_argument("error axis entries must be finite and >= 0");
    if (!(scale_axis.front() > 0.0) || !std::isfinite(scale_axis.back()))
        throw std::invalid_argument("scale axis entries must be finite and > 0");
    if (kind == LossKind::KLD && !(label_scale > 0.0 && std::isfinite(label_scale)))
        throw std::invalid_argument("KLD surface needs label_scale > 0");
}

double surface_cell(LossKind kind, double label_scale, double error, double scale) {
    const LaplaceParams pred(0.0, scale);
    if (kind == LossKind::NLL) return nll_loss(error, pred).value;
    return kld_loss(LaplaceParams(error, label_scale), pred).value;
}

SurfaceGrid make_grid(LossKind kind, double label_scale, std::vector<double> error_axis,
                      std::vector<double> scale_axis) {
    validate_axes(kind, label_scale, error_axis, scale_axis);
    SurfaceGrid grid;
    grid.kind = kind;
    grid.label_scale = kind == LossKind::KLD ? label_scale : 0.0;
    grid.error_axis = std::move(error_axis);
    grid.scale_axis = std::move(scale_axis);
    grid.values.assign(grid.error_axis.size() * grid.scale_axis.size(), 0.0);
    return grid;
}

}  // namespace

SurfaceGrid surface_grid(LossKind kind, double label_scale, std::vector<double> error_axis,
                         std::vector<double> scale_axis) {
    SurfaceGrid grid = make_grid(kind, label_scale, std::move(error_axis), std::move(scale_axis));
    const auto rows = static_cast<std::ptrdiff_t>(grid.error_axis.size());
    const std::size_t cols = grid.scale_axis.size();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const double err = grid.error_axis[static_cast<std::size_t>(i)];
        double* row = grid.values.data() + static_cast<std::size_t>(i) * cols;
        for (std::size_t j = 0; j < cols; ++j)
            row[j] = surface_cell(kind, grid.label_scale, err, grid.scale_axis[j]);
    }
    return grid;
}

SurfaceGrid surface_grid_serial(LossKind kind, double label_scale,
                                std::vector<double> error_axis,
                                std::vector<double> scale_axis) {
    SurfaceGrid grid = make_grid(kind, label_scale, std::move(error_axis), std::move(scale_axis));
    for (std::size_t i = 0; i < grid.error_axis.size(); ++i)
        for (std::size_t j = 0; j < grid.scale_axis.size(); ++j)
            grid.values[i * grid.scale_axis.size() + j] =
                surface_cell(kind, grid.label_scale, grid.error_axis[i], grid.scale_axis[j]);
    return grid;
}

std::string surface_to_csv(const SurfaceGrid& grid) {
    std::string out = "error,scale,value\n";
    out.reserve(out.size() + grid.values.size() * 36);
    for (std::size_t i = 0; i < grid.error_axis.size(); ++i) {
        for (std::size_t j = 0; j < grid.scale_axis.size(); ++j) {
            out += format_sig(grid.error_axis[i]);
            out += ',';
            out += format_sig(grid.scale_axis[j]);
            out += ',';
            out += format_sig(grid.at(i, j));
            out += '\n';
        }
    }
    return out;
}

}  // namespace lkld
