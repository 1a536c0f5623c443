#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "lkld/calibration.hpp"
#include "lkld/distributions.hpp"
#include "lkld/io.hpp"
#include "lkld/label_uncertainty.hpp"
#include "lkld/random.hpp"
#include "lkld/synth.hpp"

namespace lkld::cli {

namespace fs = std::filesystem;

namespace {

// Domain failure carrying a ready-made diagnostic.
struct CommandError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_readable(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CommandError("cannot read '" + path + "'");
}

void require_writable(const std::string& path) {
    if (path == "-") return;
    fs::path dir = fs::path(path).parent_path();
    if (dir.empty()) dir = ".";
    if (!fs::is_directory(dir)) throw CommandError("output directory '" + dir.string() + "' does not exist");
    if (::access(dir.c_str(), W_OK) != 0) throw CommandError("output directory '" + dir.string() + "' is not writable");
}

void emit(const std::string& path, const std::string& contents, std::ostream& out) {
    if (path == "-") {
        out << contents;
        return;
    }
    write_file_atomic(path, contents);
}

std::string json_location(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

template <class F>
auto parse_json_input(const std::string& path, F&& parse) {
    const std::string text = read_text_file(path);
    try {
        return parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::string what = e.what();
        if (auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
        throw CommandError(path + ": malformed JSON at " + json_location(text, e.byte) + ": " + what);
    } catch (const nlohmann::json::exception& e) {
        throw CommandError(path + ": " + e.what());
    }
}

std::array<double, 3> parse_anchors(const std::string& text) {
    const auto v = parse_real_list(text);
    if (v.size() != 3) throw CommandError("anchors must be three comma-separated values b0,b0.5,b1");
    return {v[0], v[1], v[2]};
}

UncertaintyMapping fit_and_warn(const std::array<double, 3>& a, std::ostream& err, const std::string& label) {
    UncertaintyMapping m = fit_mapping(a[0], a[1], a[2]);
    if (m.linear)
        err << "warning: anchors " << format_sig(a[0]) << "," << format_sig(a[1]) << "," << format_sig(a[2])
            << (label.empty() ? "" : " (" + label + ")")
            << " are equally spaced; the exponential degenerates, using linear interpolation instead\n";
    return m;
}

// ---------------------------------------------------------------------------

struct LossEvalOpts {
    std::string loss = "kld";
    std::optional<double> y, pred_location, pred_scale;
    double label_scale = 0.0;
    std::string input;
    std::string output = "-";
};

int cmd_loss_eval(const LossEvalOpts& o, std::ostream& out) {
    const LossKind kind = parse_loss_kind(o.loss);
    std::string csv = "value,d_location,d_scale\n";
    auto row = [&csv](const LossGrad& g) {
        csv += format_sig(g.value) + ',' + format_sig(g.d_location) + ',' + format_sig(g.d_scale) + '\n';
    };
    if (!o.input.empty()) {
        require_readable(o.input);
        require_writable(o.output);
        const auto rows = parse_csv(read_text_file(o.input));
        if (rows.empty()) throw CommandError(o.input + ": missing header");
        const auto& h = rows.front();
        const bool has_label_scale = h.size() == 4 && h[3] == "label_scale";
        if (h.size() < 3 || h[0] != "y" || h[1] != "pred_location" || h[2] != "pred_scale" ||
            (h.size() == 4 && !has_label_scale) || h.size() > 4)
            throw CommandError(o.input + ": header must be y,pred_location,pred_scale[,label_scale]");
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (r.size() != h.size()) throw CommandError(o.input + ": row " + std::to_string(i + 1) + " has the wrong field count");
            const double b = has_label_scale ? parse_real(r[3]) : o.label_scale;
            row(evaluate_loss(kind, parse_real(r[0]), b, LaplaceParams(parse_real(r[1]), parse_real(r[2]))));
        }
    } else {
        if (!o.y || !o.pred_location || !o.pred_scale)
            throw CLI::ValidationError("loss-eval needs --input or all of --y, --pred-location, --pred-scale");
        require_writable(o.output);
        row(evaluate_loss(kind, *o.y, o.label_scale, LaplaceParams(*o.pred_location, *o.pred_scale)));
    }
    emit(o.output, csv, out);
    return kOk;
}

struct GradCheckOpts {
    std::size_t n = 10000;
    std::uint64_t seed = 1;
    double step = 1e-6;
    double tolerance = 1e-5;
    std::string output = "-";
};

int cmd_grad_check(const GradCheckOpts& o, std::ostream& out, std::ostream& err) {
    require_writable(o.output);
    Rng rng(o.seed);
    double worst[2][2] = {{0, 0}, {0, 0}};
    auto rel = [](double analytic, double numeric) {
        return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
    };
    for (std::size_t i = 0; i < o.n; ++i) {
        double y, y_hat;
        do {
            y = rng.uniform(-3.0, 3.0);
            y_hat = rng.uniform(-3.0, 3.0);
        } while (std::abs(y - y_hat) <= 1e-4);
        const double b = std::exp(rng.uniform(std::log(0.05), std::log(5.0)));
        const double b_hat = std::exp(rng.uniform(std::log(0.05), std::log(5.0)));
        const double h = o.step;
        for (int k = 0; k < 2; ++k) {
            auto value = [&](double loc, double scale) {
                return k == 0 ? nll_loss(y, LaplaceParams(loc, scale)).value
                              : kld_loss(LaplaceParams(y, b), LaplaceParams(loc, scale)).value;
            };
            const LossGrad g = k == 0 ? nll_loss(y, LaplaceParams(y_hat, b_hat))
                                      : kld_loss(LaplaceParams(y, b), LaplaceParams(y_hat, b_hat));
            const double fd_loc = (value(y_hat + h, b_hat) - value(y_hat - h, b_hat)) / (2 * h);
            const double fd_scale = (value(y_hat, b_hat + h) - value(y_hat, b_hat - h)) / (2 * h);
            worst[k][0] = std::max(worst[k][0], rel(g.d_location, fd_loc));
            worst[k][1] = std::max(worst[k][1], rel(g.d_scale, fd_scale));
        }
    }
    std::string csv = "loss,n,max_rel_err_location,max_rel_err_scale,tolerance,pass\n";
    bool all_pass = true;
    for (int k = 0; k < 2; ++k) {
        const bool pass = worst[k][0] <= o.tolerance && worst[k][1] <= o.tolerance;
        all_pass = all_pass && pass;
        csv += std::string(k == 0 ? "nll" : "kld") + ',' + std::to_string(o.n) + ',' + format_sig(worst[k][0]) +
               ',' + format_sig(worst[k][1]) + ',' + format_sig(o.tolerance) + ',' + (pass ? "true" : "false") + '\n';
    }
    emit(o.output, csv, out);
    if (!all_pass) {
        err << "error: analytic gradients disagree with finite differences beyond tolerance\n";
        return kDomainError;
    }
    return kOk;
}

struct SurfaceOpts {
    std::string loss;
    double label_scale = 0.0;
    std::string error_range;
    std::string scale_range;
    std::string output;
};

int cmd_surface(const SurfaceOpts& o, std::ostream& out) {
    require_writable(o.output);
    const LossKind kind = parse_loss_kind(o.loss);
    const SurfaceGrid grid = surface_grid(kind, o.label_scale, parse_range(o.error_range), parse_range(o.scale_range));
    emit(o.output, surface_to_csv(grid), out);
    return kOk;
}

struct LabelUncOpts {
    std::string tracks;
    std::string anchors;
    std::vector<std::string> class_anchors;
    std::string output;
    int hist_bins = 20;
    std::string hist_output;
};

int cmd_labelunc(const LabelUncOpts& o, std::ostream& out, std::ostream& err) {
    require_readable(o.tracks);
    require_writable(o.output);
    if (!o.hist_output.empty()) require_writable(o.hist_output);

    ClassMappings mappings;
    mappings.fallback = fit_and_warn(parse_anchors(o.anchors), err, "");
    for (const auto& spec : o.class_anchors) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0)
            throw CommandError("--class-anchors expects class=b0,b0.5,b1, got '" + spec + "'");
        const std::string cls = spec.substr(0, eq);
        mappings.per_class[cls] = fit_and_warn(parse_anchors(spec.substr(eq + 1)), err, cls);
    }

    const auto tracks = parse_json_input(o.tracks, [](const std::string& t) { return parse_tracks_json(t); });
    const auto records = estimate_records(tracks, mappings);
    if (!o.hist_output.empty()) {
        const auto bins = iou_histogram(records, o.hist_bins);
        emit(o.hist_output, histogram_to_csv(bins), out);
    }
    emit(o.output, records_to_csv(records), out);
    return kOk;
}

struct FitMapOpts {
    std::string anchors;
    std::string output;
};

int cmd_fit_map(const FitMapOpts& o, std::ostream& out, std::ostream& err) {
    require_writable(o.output);
    const auto a = parse_anchors(o.anchors);
    const UncertaintyMapping m = fit_and_warn(a, err, "");
    nlohmann::ordered_json j;
    j["form"] = m.linear ? "linear" : "exponential";
    j["alpha"] = round_sig(m.alpha);
    j["beta"] = round_sig(m.beta);
    j["gamma"] = round_sig(m.gamma);
    j["anchors"] = {round_sig(a[0]), round_sig(a[1]), round_sig(a[2])};
    double worst = 0.0;
    nlohmann::ordered_json trip = nlohmann::ordered_json::array();
    const double ious[3] = {0.0, 0.5, 1.0};
    for (int k = 0; k < 3; ++k) {
        const double mapped = map_iou(m, ious[k]);
        const double e = std::abs(mapped - a[static_cast<std::size_t>(k)]);
        worst = std::max(worst, e);
        trip.push_back({{"iou", ious[k]}, {"anchor", round_sig(a[static_cast<std::size_t>(k)])},
                        {"mapped", round_sig(mapped)}, {"abs_error", round_sig(e)}});
    }
    j["round_trip"] = trip;
    j["round_trip_ok"] = worst <= 1e-9;
    emit(o.output, j.dump(2) + '\n', out);
    return kOk;
}

struct IouHistOpts {
    std::string records;
    int bins = 20;
    std::string output;
};

int cmd_iou_hist(const IouHistOpts& o, std::ostream& out) {
    require_readable(o.records);
    require_writable(o.output);
    const auto records = records_from_csv(read_text_file(o.records));
    emit(o.output, histogram_to_csv(iou_histogram(records, o.bins)), out);
    return kOk;
}

struct CalibOpts {
    std::string input;
    std::string grid;
    std::string output;
};

int cmd_calib(const CalibOpts& o, std::ostream& out) {
    require_readable(o.input);
    require_writable(o.output);
    const auto records = prediction_records_from_csv(read_text_file(o.input));
    const std::vector<double> grid = o.grid.empty() ? default_cdf_grid() : parse_range(o.grid);
    emit(o.output, calibration_to_csv(calibration_by_class(records, grid)), out);
    return kOk;
}

struct TrainOpts {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string output;
};

int cmd_train(const TrainOpts& o, std::ostream& out) {
    if (!o.config.empty()) require_readable(o.config);
    require_writable(o.output);
    SynthConfig cfg;
    if (!o.config.empty())
        cfg = parse_json_input(o.config, [](const std::string& t) { return synth_config_from_json(t); });
    if (o.seed) cfg.seed = *o.seed;
    const TrainResult r = run_experiment(cfg);
    emit(o.output, train_report_to_csv(cfg, r.report), out);
    return kOk;
}

struct CompareOpts {
    std::string configs;
    std::optional<std::uint64_t> seed;
    std::string output;
};

int cmd_compare(const CompareOpts& o, std::ostream& out) {
    require_readable(o.configs);
    require_writable(o.output);
    auto configs = parse_json_input(o.configs, [](const std::string& t) { return synth_configs_from_json(t); });
    if (o.seed)
        for (auto& c : configs) c.seed = *o.seed;
    const auto rows = compare(configs);
    emit(o.output, comparison_to_csv(rows), out);
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Laplace NLL / KL-divergence losses, label-uncertainty estimation and calibration tools",
                 "lkld"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    LossEvalOpts le;
    auto* c_le = app.add_subcommand("loss-eval", "Evaluate a loss and its analytic gradient");
    c_le->add_option("--loss", le.loss, "nll or kld")->capture_default_str();
    c_le->add_option("--y", le.y, "Label location");
    c_le->add_option("--pred-location", le.pred_location, "Predicted location");
    c_le->add_option("--pred-scale", le.pred_scale, "Predicted scale (> 0)");
    c_le->add_option("--label-scale", le.label_scale, "Label scale for kld (0 = zero-noise limit)")->capture_default_str();
    c_le->add_option("--input", le.input, "CSV y,pred_location,pred_scale[,label_scale]");
    c_le->add_option("-o,--output", le.output, "Output CSV ('-' for stdout)")->capture_default_str();

    GradCheckOpts gc;
    auto* c_gc = app.add_subcommand("grad-check", "Compare analytic partials with central differences");
    c_gc->add_option("--n", gc.n, "Number of random tuples")->capture_default_str();
    c_gc->add_option("--seed", gc.seed, "RNG seed")->capture_default_str();
    c_gc->add_option("--step", gc.step, "Finite-difference step")->capture_default_str();
    c_gc->add_option("--tolerance", gc.tolerance, "Max relative error")->capture_default_str();
    c_gc->add_option("-o,--output", gc.output, "Output CSV ('-' for stdout)")->capture_default_str();

    SurfaceOpts sf;
    auto* c_sf = app.add_subcommand("surface", "Emit a loss surface over (|y - y_hat|, b_hat)");
    c_sf->add_option("--loss", sf.loss, "nll or kld")->required();
    c_sf->add_option("--label-scale", sf.label_scale, "Label scale b (kld only)");
    c_sf->add_option("--error", sf.error_range, "Error axis start:stop:step")->required();
    c_sf->add_option("--scale", sf.scale_range, "Scale axis start:stop:step")->required();
    c_sf->add_option("-o,--output", sf.output, "Output CSV")->required();

    LabelUncOpts lu;
    auto* c_lu = app.add_subcommand("labelunc", "Estimate per-label uncertainty from multi-sweep points");
    c_lu->add_option("--tracks", lu.tracks, "Tracks JSON")->required();
    c_lu->add_option("--anchors", lu.anchors, "b at IoU 0,0.5,1 for every class")->required();
    c_lu->add_option("--class-anchors", lu.class_anchors, "Per-class override class=b0,b0.5,b1 (repeatable)");
    c_lu->add_option("-o,--output", lu.output, "Records CSV")->required();
    c_lu->add_option("--hist-bins", lu.hist_bins, "Bins for --hist-out")->capture_default_str();
    c_lu->add_option("--hist-out", lu.hist_output, "Also write the IoU histogram CSV");

    FitMapOpts fm;
    auto* c_fm = app.add_subcommand("fit-map", "Fit the IoU -> label scale mapping from three anchors");
    c_fm->add_option("--anchors", fm.anchors, "b at IoU 0,0.5,1")->required();
    c_fm->add_option("-o,--output", fm.output, "Output JSON")->required();

    IouHistOpts ih;
    auto* c_ih = app.add_subcommand("iou-hist", "Histogram of IoU values from a records CSV");
    c_ih->add_option("--records", ih.records, "Records CSV from labelunc")->required();
    c_ih->add_option("--bins", ih.bins, "Number of equal-width bins")->capture_default_str();
    c_ih->add_option("-o,--output", ih.output, "Histogram CSV")->required();

    CalibOpts cb;
    auto* c_cb = app.add_subcommand("calib", "CDF calibration curves from residuals and predicted scales");
    c_cb->add_option("--input", cb.input, "CSV residual,scale[,class_name]")->required();
    c_cb->add_option("--grid", cb.grid, "Expected-CDF grid start:stop:step (default 0.01..0.99)");
    c_cb->add_option("-o,--output", cb.output, "Output CSV")->required();

    TrainOpts tr;
    auto* c_tr = app.add_subcommand("train", "Train the synthetic two-head predictor");
    c_tr->add_option("--config", tr.config, "Config JSON (defaults when omitted)");
    c_tr->add_option("--seed", tr.seed, "Override the config seed");
    c_tr->add_option("-o,--output", tr.output, "Report CSV")->required();

    CompareOpts cp;
    auto* c_cp = app.add_subcommand("compare", "Train several label-scale modes on the same data");
    c_cp->add_option("--configs", cp.configs, "JSON array of configs (or {\"configs\": [...]})")->required();
    c_cp->add_option("--seed", cp.seed, "Override every config seed");
    c_cp->add_option("-o,--output", cp.output, "Comparison CSV")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        err << "run 'lkld --help' for usage\n";
        return kUsageError;
    }

    try {
        if (*c_le) return cmd_loss_eval(le, out);
        if (*c_gc) return cmd_grad_check(gc, out, err);
        if (*c_sf) return cmd_surface(sf, out);
        if (*c_lu) return cmd_labelunc(lu, out, err);
        if (*c_fm) return cmd_fit_map(fm, out, err);
        if (*c_ih) return cmd_iou_hist(ih, out);
        if (*c_cb) return cmd_calib(cb, out);
        if (*c_tr) return cmd_train(tr, out);
        if (*c_cp) return cmd_compare(cp, out);
    } catch (const CLI::ValidationError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kDomainError;
    }
    return kUsageError;
}

}  // namespace lkld::cli
