#include "lkld/synth.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include <json.hpp>

#include "lkld/calibration.hpp"
#include "lkld/io.hpp"
#include "lkld/parallel.hpp"
#include "lkld/random.hpp"

namespace lkld {

double NoiseProfile::scale_at(double quality) const {
    if (kind == Kind::Constant) return b;
    return std::exp(std::log(b_high) + quality * (std::log(b_low) - std::log(b_high)));
}

std::string LabelScaleMode::describe() const {
    switch (kind) {
        case Kind::Zero: return "zero";
        case Kind::Constant: return "constant(" + format_sig(b) + ")";
        case Kind::Oracle: return "oracle";
        case Kind::Heuristic:
            return "heuristic(" + format_sig(anchors[0]) + ">" + format_sig(anchors[1]) + ">" +
                   format_sig(anchors[2]) + ")";
    }
    return "?";
}

void SynthConfig::validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (n_train < 1 || n_test < 1) throw std::invalid_argument("n_train and n_test must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
    if (!positive(learning_rate)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(grad_clip > 0.0)) throw std::invalid_argument("grad_clip must be > 0");
    if (noise.kind == NoiseProfile::Kind::Constant) {
        if (!(noise.b >= 0.0 && std::isfinite(noise.b)))
            throw std::invalid_argument("constant noise scale must be >= 0");
    } else if (!positive(noise.b_low) || !positive(noise.b_high)) {
        throw std::invalid_argument("feature-dependent noise scales must be > 0");
    }
    switch (label_scale.kind) {
        case LabelScaleMode::Kind::Constant:
            if (!positive(label_scale.b)) throw std::invalid_argument("constant label scale must be > 0");
            break;
        case LabelScaleMode::Kind::Heuristic:
            fit_mapping(label_scale.anchors[0], label_scale.anchors[1], label_scale.anchors[2]);
            break;
        default: break;
    }
}

bool SynthConfig::same_generator(const SynthConfig& o) const {
    return n_train == o.n_train && n_test == o.n_test && feature_dim == o.feature_dim &&
           noise == o.noise && seed == o.seed;
}

namespace {

void draw_samples(Rng& rng, const SynthConfig& cfg, std::span<const double> w_true, double bias_true,
                  std::size_t n, Dataset& out) {
    const std::size_t d = cfg.feature_dim;
    out.feature_dim = d;
    out.features.resize(n * d);
    out.label.resize(n);
    out.target.resize(n);
    out.noise_scale.resize(n);
    out.quality.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double* x = out.features.data() + i * d;
        double y_true = bias_true;
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = rng.uniform(-1.0, 1.0);
            y_true += w_true[k] * x[k];
        }
        const double q = 0.5 * (x[0] + 1.0);
        const double b = cfg.noise.scale_at(q);
        out.quality[i] = q;
        out.noise_scale[i] = b;
        out.target[i] = y_true;
        out.label[i] = y_true + rng.laplace(b);
    }
}

}  // namespace

SynthData generate(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);
    std::vector<double> w_true(config.feature_dim);
    for (double& w : w_true) w = rng.uniform(-1.0, 1.0);
    const double bias_true = rng.uniform(-1.0, 1.0);
    SynthData data;
    draw_samples(rng, config, w_true, bias_true, config.n_train, data.train);
    draw_samples(rng, config, w_true, bias_true, config.n_test, data.test);
    return data;
}

Predictor Predictor::initial(std::size_t feature_dim) {
    Predictor p;
    p.weights_mean.assign(feature_dim, 0.0);
    p.weights_logscale.assign(feature_dim, 0.0);
    p.bias_mean = 0.0;
    p.bias_logscale = std::log(1.0);
    return p;
}

std::vector<double> Predictor::flatten() const {
    std::vector<double> v;
    v.reserve(parameter_count());
    v.insert(v.end(), weights_mean.begin(), weights_mean.end());
    v.push_back(bias_mean);
    v.insert(v.end(), weights_logscale.begin(), weights_logscale.end());
    v.push_back(bias_logscale);
    return v;
}

void Predictor::assign(std::span<const double> params) {
    const std::size_t d = weights_mean.size();
    if (params.size() != 2 * d + 2) throw std::invalid_argument("parameter vector has the wrong length");
    std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d), weights_mean.begin());
    bias_mean = params[d];
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(d + 1),
              params.begin() + static_cast<std::ptrdiff_t>(2 * d + 1), weights_logscale.begin());
    bias_logscale = params[2 * d + 1];
}

double Predictor::mean(std::span<const double> x) const {
    double s = bias_mean;
    for (std::size_t k = 0; k < x.size(); ++k) s += weights_mean[k] * x[k];
    return s;
}

double Predictor::log_scale(std::span<const double> x) const {
    double s = bias_logscale;
    for (std::size_t k = 0; k < x.size(); ++k) s += weights_logscale[k] * x[k];
    return s;
}

double label_scale_for(const LabelScaleMode& mode, const UncertaintyMapping* mapping,
                       const Dataset& data, std::size_t i) {
    switch (mode.kind) {
        case LabelScaleMode::Kind::Zero: return 0.0;
        case LabelScaleMode::Kind::Constant: return mode.b;
        case LabelScaleMode::Kind::Oracle: return data.noise_scale[i];
        case LabelScaleMode::Kind::Heuristic:
            if (mapping == nullptr) throw std::invalid_argument("heuristic label scale needs a mapping");
            return map_iou(*mapping, data.quality[i]);
    }
    return 0.0;
}

bool sample_gradient(const Predictor& model, std::span<const double> x, double label, LossKind kind,
                     double label_scale, SampleGradient& out) {
    const double y_hat = model.mean(x);
    const double b_hat = std::exp(model.log_scale(x));
    if (!std::isfinite(y_hat) || !(b_hat > 0.0) || !std::isfinite(b_hat)) return false;

    out.loss = evaluate_loss(kind, label, label_scale, LaplaceParams(y_hat, b_hat));
    // d b_hat / d log_scale = b_hat
    const double g_mean = out.loss.d_location;
    const double g_log = out.loss.d_scale * b_hat;
    const std::size_t d = x.size();
    out.params.resize(2 * d + 2);
    for (std::size_t k = 0; k < d; ++k) {
        out.params[k] = g_mean * x[k];
        out.params[d + 1 + k] = g_log * x[k];
    }
    out.params[d] = g_mean;
    out.params[2 * d + 1] = g_log;
    return true;
}

namespace {

struct Scored {
    double mae_target = 0.0;
    double mae_label = 0.0;
    double ece = 0.0;
    bool finite = true;
};

Scored score(const Predictor& model, const Dataset& data) {
    Scored s;
    std::vector<PredictionRecord> records;
    records.reserve(data.size());
    double err_t = 0.0;
    double err_l = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.row(i);
        const double y_hat = model.mean(x);
        const double b_hat = std::exp(model.log_scale(x));
        if (!std::isfinite(y_hat) || !(b_hat > 0.0) || !std::isfinite(b_hat)) {
            s.finite = false;
            return s;
        }
        err_t += std::abs(data.target[i] - y_hat);
        err_l += std::abs(data.label[i] - y_hat);
        records.emplace_back(data.label[i] - y_hat, b_hat);
    }
    const double n = static_cast<double>(data.size());
    s.mae_target = err_t / n;
    s.mae_label = err_l / n;
    const auto grid = default_cdf_grid();
    s.ece = calibration_report_serial(records, grid).ece;
    return s;
}

}  // namespace

Evaluation evaluate(const Predictor& model, const Dataset& data) {
    const Scored s = score(model, data);
    if (!s.finite) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        return {nan, nan};
    }
    return {s.mae_target, s.ece};
}

TrainResult train(const SynthConfig& config, const Dataset& train_set, const Dataset& test_set) {
    config.validate();
    if (train_set.feature_dim != config.feature_dim || test_set.feature_dim != config.feature_dim)
        throw std::invalid_argument("dataset feature_dim does not match the config");

    std::optional<UncertaintyMapping> mapping;
    if (config.label_scale.kind == LabelScaleMode::Kind::Heuristic) {
        const auto& a = config.label_scale.anchors;
        mapping = fit_mapping(a[0], a[1], a[2]);
    }
    const LossKind kind =
        config.label_scale.kind == LabelScaleMode::Kind::Zero ? LossKind::NLL : LossKind::KLD;

    TrainResult result{Predictor::initial(config.feature_dim), {}};
    std::vector<double> params = result.model.flatten();
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
    SampleGradient g;

    for (std::size_t epoch = 0; epoch < config.epochs && !result.report.diverged; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_sum = 0.0;
        for (std::size_t idx : order) {
            const double b = label_scale_for(config.label_scale, mapping ? &*mapping : nullptr, train_set, idx);
            if (!sample_gradient(result.model, train_set.row(idx), train_set.label[idx], kind, b, g) ||
                !std::isfinite(g.loss.value)) {
                result.report.diverged = true;
                break;
            }
            loss_sum += g.loss.value;
            double norm2 = 0.0;
            for (double v : g.params) norm2 += v * v;
            const double norm = std::sqrt(norm2);
            const double factor = norm > config.grad_clip ? config.grad_clip / norm : 1.0;
            for (std::size_t k = 0; k < params.size(); ++k)
                params[k] -= config.learning_rate * factor * g.params[k];
            result.model.assign(params);
        }
        if (result.report.diverged) break;

        const Scored s = score(result.model, train_set);
        if (!s.finite || !std::isfinite(loss_sum)) {
            result.report.diverged = true;
            break;
        }
        result.report.epochs.push_back(
            {loss_sum / static_cast<double>(train_set.size()), s.mae_label, s.ece});
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (result.report.diverged) {
        result.report.test_mae = nan;
        result.report.test_ece = nan;
    } else {
        const Evaluation e = evaluate(result.model, test_set);
        result.report.test_mae = e.mae;
        result.report.test_ece = e.ece;
        if (!std::isfinite(e.mae)) result.report.diverged = true;
    }
    return result;
}

TrainResult run_experiment(const SynthConfig& config) {
    const SynthData data = generate(config);
    return train(config, data.train, data.test);
}

std::vector<ComparisonRow> compare(std::span<const SynthConfig> configs) {
    if (configs.empty()) throw std::invalid_argument("compare needs at least one config");
    for (const auto& c : configs) {
        c.validate();
        if (!c.same_generator(configs.front()))
            throw std::invalid_argument("compared configs must share seed and generator settings");
    }
    std::vector<ComparisonRow> rows(configs.size());
    const auto n = static_cast<std::ptrdiff_t>(configs.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_threads())
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto& cfg = configs[static_cast<std::size_t>(i)];
            const TrainReport rep = run_experiment(cfg).report;
            rows[static_cast<std::size_t>(i)] = {cfg.label_scale.describe(), rep.test_mae, rep.test_ece,
                                                 rep.diverged};
        } catch (...) {
#pragma omp critical(lkld_compare_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return rows;
}

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw std::invalid_argument(where + ": unknown field '" + it.key() + "'");
    }
}

double get_real(const json& obj, const char* key, double fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) throw std::invalid_argument(where + "." + key + ": expected a number");
    return it->get<double>();
}

std::size_t get_count(const json& obj, const char* key, std::size_t fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer() || it->get<long long>() < 0)
        throw std::invalid_argument(where + "." + key + ": expected a non-negative integer");
    return it->get<std::size_t>();
}

SynthConfig config_from(const json& j, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
    reject_unknown(j, {"n_train", "n_test", "feature_dim", "noise", "label_scale", "seed", "epochs",
                       "learning_rate", "grad_clip"},
                   where);
    SynthConfig c;
    c.n_train = get_count(j, "n_train", c.n_train, where);
    c.n_test = get_count(j, "n_test", c.n_test, where);
    c.feature_dim = get_count(j, "feature_dim", c.feature_dim, where);
    c.seed = get_count(j, "seed", c.seed, where);
    c.epochs = get_count(j, "epochs", c.epochs, where);
    c.learning_rate = get_real(j, "learning_rate", c.learning_rate, where);
    c.grad_clip = get_real(j, "grad_clip", c.grad_clip, where);

    if (auto it = j.find("noise"); it != j.end()) {
        const std::string w = where + ".noise";
        if (!it->is_object()) throw std::invalid_argument(w + ": expected an object");
        reject_unknown(*it, {"kind", "b", "b_low", "b_high"}, w);
        const std::string kind = it->value("kind", std::string("feature_dependent"));
        if (kind == "constant") {
            c.noise.kind = NoiseProfile::Kind::Constant;
            c.noise.b = get_real(*it, "b", c.noise.b, w);
        } else if (kind == "feature_dependent") {
            c.noise.kind = NoiseProfile::Kind::FeatureDependent;
            c.noise.b_low = get_real(*it, "b_low", c.noise.b_low, w);
            c.noise.b_high = get_real(*it, "b_high", c.noise.b_high, w);
        } else {
            throw std::invalid_argument(w + ".kind: expected constant or feature_dependent");
        }
    }
    if (auto it = j.find("label_scale"); it != j.end()) {
        const std::string w = where + ".label_scale";
        if (!it->is_object()) throw std::invalid_argument(w + ": expected an object");
        reject_unknown(*it, {"kind", "b", "anchors"}, w);
        const std::string kind = it->value("kind", std::string("oracle"));
        if (kind == "zero") {
            c.label_scale.kind = LabelScaleMode::Kind::Zero;
        } else if (kind == "constant") {
            c.label_scale.kind = LabelScaleMode::Kind::Constant;
            c.label_scale.b = get_real(*it, "b", 0.0, w);
        } else if (kind == "oracle") {
            c.label_scale.kind = LabelScaleMode::Kind::Oracle;
        } else if (kind == "heuristic") {
            c.label_scale.kind = LabelScaleMode::Kind::Heuristic;
            auto a = it->find("anchors");
            if (a == it->end() || !a->is_array() || a->size() != 3)
                throw std::invalid_argument(w + ".anchors: expected three numbers");
            for (std::size_t k = 0; k < 3; ++k) {
                if (!(*a)[k].is_number()) throw std::invalid_argument(w + ".anchors: expected numbers");
                c.label_scale.anchors[k] = (*a)[k].get<double>();
            }
        } else {
            throw std::invalid_argument(w + ".kind: expected zero, constant, oracle or heuristic");
        }
    }
    c.validate();
    return c;
}

json config_to(const SynthConfig& c) {
    json j;
    j["n_train"] = c.n_train;
    j["n_test"] = c.n_test;
    j["feature_dim"] = c.feature_dim;
    j["seed"] = c.seed;
    j["epochs"] = c.epochs;
    j["learning_rate"] = c.learning_rate;
    j["grad_clip"] = c.grad_clip;
    if (c.noise.kind == NoiseProfile::Kind::Constant)
        j["noise"] = {{"kind", "constant"}, {"b", c.noise.b}};
    else
        j["noise"] = {{"kind", "feature_dependent"}, {"b_low", c.noise.b_low}, {"b_high", c.noise.b_high}};
    switch (c.label_scale.kind) {
        case LabelScaleMode::Kind::Zero: j["label_scale"] = {{"kind", "zero"}}; break;
        case LabelScaleMode::Kind::Constant: j["label_scale"] = {{"kind", "constant"}, {"b", c.label_scale.b}}; break;
        case LabelScaleMode::Kind::Oracle: j["label_scale"] = {{"kind", "oracle"}}; break;
        case LabelScaleMode::Kind::Heuristic:
            j["label_scale"] = {{"kind", "heuristic"}, {"anchors", c.label_scale.anchors}};
            break;
    }
    return j;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

SynthConfig synth_config_from_json(const std::string& text) {
    return config_from(json::parse(text), "config");
}

std::vector<SynthConfig> synth_configs_from_json(const std::string& text) {
    const json doc = json::parse(text);
    const json* list = &doc;
    if (doc.is_object()) {
        auto it = doc.find("configs");
        if (it == doc.end()) throw std::invalid_argument("expected an array of configs or {\"configs\": [...]}");
        list = &*it;
    }
    if (!list->is_array()) throw std::invalid_argument("configs: expected an array");
    std::vector<SynthConfig> out;
    for (std::size_t i = 0; i < list->size(); ++i)
        out.push_back(config_from((*list)[i], "configs[" + std::to_string(i) + "]"));
    return out;
}

std::string synth_config_to_json(const SynthConfig& config) { return config_to(config).dump(); }

std::string train_report_to_csv(const SynthConfig& config, const TrainReport& report) {
    std::string out = "# config: " + synth_config_to_json(config) + '\n';
    out += "# rng: mt19937_64; test_mae vs noise-free targets; test_ece vs held-out noisy labels\n";
    out += "epoch,mean_loss,mean_abs_error,ece\n";
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
        const auto& s = report.epochs[e];
        out += std::to_string(e + 1) + ',' + format_sig(s.mean_loss) + ',' + format_sig(s.mean_abs_error) +
               ',' + format_sig(s.ece) + '\n';
    }
    out += "test_mae,test_ece,diverged\n";
    out += format_sig(report.test_mae) + ',' + format_sig(report.test_ece) + ',' + bool_str(report.diverged) + '\n';
    return out;
}

std::string comparison_to_csv(std::span<const ComparisonRow> rows) {
    std::string out = "mode,test_mae,test_ece,diverged\n";
    for (const auto& r : rows)
        out += csv_field(r.mode) + ',' + format_sig(r.test_mae) + ',' + format_sig(r.test_ece) + ',' +
               bool_str(r.diverged) + '\n';
    return out;
}

}  // namespace lkld
