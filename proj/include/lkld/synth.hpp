#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lkld/distributions.hpp"
#include "lkld/label_uncertainty.hpp"

namespace lkld {

/// Scale of the Laplace noise added to the training labels.
struct NoiseProfile {
    enum class Kind { Constant, FeatureDependent };
    Kind kind = Kind::FeatureDependent;
    double b = 0.2;        // Constant; 0 disables the noise
    double b_low = 0.1;    // FeatureDependent: scale at quality 1
    double b_high = 0.5;   // FeatureDependent: scale at quality 0

    /// Per-sample scale. FeatureDependent interpolates log-linearly, so the
    /// log of the true scale is an affine function of the features.
    double scale_at(double quality) const;

    friend bool operator==(const NoiseProfile&, const NoiseProfile&) = default;
};

/// Label scale b fed to the loss.
struct LabelScaleMode {
    enum class Kind { Zero, Constant, Oracle, Heuristic };
    Kind kind = Kind::Oracle;
    double b = 0.0;                        // Constant
    std::array<double, 3> anchors{};       // Heuristic: b at IoU 0, 0.5, 1

    std::string describe() const;
};

struct SynthConfig {
    std::size_t n_train = 24;
    std::size_t n_test = 4000;
    std::size_t feature_dim = 8;
    NoiseProfile noise;
    LabelScaleMode label_scale;
    std::uint64_t seed = 1;
    std::size_t epochs = 300;
    double learning_rate = 0.01;
    double grad_clip = 1.0;

    /// Throws std::invalid_argument for out-of-range fields.
    void validate() const;
    bool same_generator(const SynthConfig& other) const;
};

/// Row-major features plus per-sample targets.
struct Dataset {
    std::size_t feature_dim = 0;
    std::vector<double> features;
    std::vector<double> label;        // noisy annotation y
    std::vector<double> target;       // noise-free y*
    std::vector<double> noise_scale;  // true b of the annotation noise
    std::vector<double> quality;      // in [0, 1]; used as a proxy IoU

    std::size_t size() const { return label.size(); }
    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * feature_dim, feature_dim};
    }
};

struct SynthData {
    Dataset train;
    Dataset test;
};

/// Draw order from Rng(seed): feature_dim true weights and the true bias
/// (all U[-1, 1]); then for each training sample, then each test sample:
/// feature_dim features U[-1, 1] followed by one Laplace noise draw.
/// quality = (x_0 + 1) / 2 and y* = w*.x + bias*. Test labels are an
/// independent noisy annotation of y*.
SynthData generate(const SynthConfig& config);

/// Linear model with a mean head and a log-scale head.
struct Predictor {
    std::vector<double> weights_mean;
    std::vector<double> weights_logscale;
    double bias_mean = 0.0;
    double bias_logscale = 0.0;  // ln(1)

    static Predictor initial(std::size_t feature_dim);

    std::size_t parameter_count() const { return 2 * weights_mean.size() + 2; }
    /// [weights_mean..., bias_mean, weights_logscale..., bias_logscale]
    std::vector<double> flatten() const;
    void assign(std::span<const double> params);

    double mean(std::span<const double> x) const;
    double log_scale(std::span<const double> x) const;

    friend bool operator==(const Predictor&, const Predictor&) = default;
};

/// Label scale for sample i of `data` under `mode`.
double label_scale_for(const LabelScaleMode& mode, const UncertaintyMapping* mapping,
                       const Dataset& data, std::size_t i);

struct SampleGradient {
    LossGrad loss;               // w.r.t. predicted location and scale
    std::vector<double> params;  // chained to the predictor parameters (flatten() layout)
};

/// Loss and parameter gradient for one sample. Returns false when the
/// prediction is not finite (exp overflow of the scale head).
bool sample_gradient(const Predictor& model, std::span<const double> x, double label,
                     LossKind kind, double label_scale, SampleGradient& out);

struct EpochStats {
    double mean_loss = 0.0;
    double mean_abs_error = 0.0;  // training labels
    double ece = 0.0;             // training labels
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double test_mae = 0.0;  // against the noise-free targets
    double test_ece = 0.0;  // against held-out noisy annotations
    bool diverged = false;
};

struct TrainResult {
    Predictor model;
    TrainReport report;
};

/// Per-sample SGD, reshuffled every epoch from Rng(seed ^ 0x9E3779B97F4A7C15).
/// Each per-sample parameter gradient is clipped to L2 norm grad_clip. A
/// non-finite loss stops the run and sets diverged; the test metrics are then NaN.
TrainResult train(const SynthConfig& config, const Dataset& train_set, const Dataset& test_set);

/// generate() followed by train().
TrainResult run_experiment(const SynthConfig& config);

struct ComparisonRow {
    std::string mode;
    double test_mae = 0.0;
    double test_ece = 0.0;
    bool diverged = false;
};

/// One run per config (in parallel). All configs must share the generator
/// settings; throws std::invalid_argument otherwise.
std::vector<ComparisonRow> compare(std::span<const SynthConfig> configs);

struct Evaluation {
    double mae = 0.0;  // mean |y* - y_hat|
    double ece = 0.0;  // calibration of (y - y_hat, b_hat) on the default grid
};

/// Scores `model` on a dataset: MAE against the noise-free targets, ECE
/// against the noisy annotations.
Evaluation evaluate(const Predictor& model, const Dataset& data);

// JSON / CSV surfaces
SynthConfig synth_config_from_json(const std::string& text);
std::vector<SynthConfig> synth_configs_from_json(const std::string& text);
std::string synth_config_to_json(const SynthConfig& config);
std::string train_report_to_csv(const SynthConfig& config, const TrainReport& report);
std::string comparison_to_csv(std::span<const ComparisonRow> rows);

}  // namespace lkld
