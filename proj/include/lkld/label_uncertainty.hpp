#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lkld/geometry.hpp"

namespace lkld {

using SweepId = std::int64_t;

/// One labeled object across the sweeps where it is visible. Points are the
/// pre-filtered returns inside the label, in the global frame.
struct LabelTrack {
    std::string label_id;
    std::string class_name;
    std::map<SweepId, OrientedRect> poses;
    std::map<SweepId, std::vector<Point2>> points;

    /// Throws std::invalid_argument if poses is empty or a point sweep has no pose.
    void validate() const;
    std::size_t point_count() const;
};

/// Sweep with the most points inside the label; ties go to the smallest id.
SweepId default_reference_sweep(const LabelTrack& track);

/// Every point of every sweep moved into the reference sweep's label frame.
/// Sweeps are visited in increasing id order.
std::vector<Point2> aggregate_points(const LabelTrack& track, SweepId reference_sweep);

/// IoU between the hull of the aggregated points and the reference label box.
double label_iou(const LabelTrack& track, SweepId reference_sweep);

/// Exponential IoU -> label scale mapping alpha * exp(-beta * iou) + gamma,
/// fit through the scales at IoU 0, 0.5 and 1. Equally spaced anchors use
/// straight-line interpolation instead (`linear` is then set).
struct UncertaintyMapping {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double b_at_iou0 = 0.0;
    double b_at_iou_half = 0.0;
    double b_at_iou1 = 0.0;
    bool linear = false;
};

/// Floor applied to mapped scales (meters).
inline constexpr double kMinLabelScale = 1e-6;

/// Closed-form fit. Requires positive, strictly decreasing anchors whose
/// spacing ratio t = (b_half - b_1) / (b_0 - b_half) lies in (0, 1]; t within
/// 1e-9 of 1 selects the linear form. Throws std::invalid_argument otherwise.
UncertaintyMapping fit_mapping(double b_at_iou0, double b_at_iou_half, double b_at_iou1);

/// Mapped label scale, floored at kMinLabelScale. Throws std::invalid_argument
/// for iou outside [0, 1].
double map_iou(const UncertaintyMapping& m, double iou);

struct LabelUncertaintyRecord {
    std::string label_id;
    std::string class_name;
    double iou = 0.0;
    double scale_b = 0.0;
    std::size_t n_points = 0;
    std::size_t n_sweeps = 0;
};

/// Per-class mappings with a fallback for classes not listed.
struct ClassMappings {
    UncertaintyMapping fallback;
    std::map<std::string, UncertaintyMapping> per_class;

    const UncertaintyMapping& for_class(const std::string& class_name) const;
};

LabelUncertaintyRecord estimate_record(const LabelTrack& track, const ClassMappings& mappings);

/// Records for every track, processed in parallel and sorted by label_id.
std::vector<LabelUncertaintyRecord> estimate_records(std::span<const LabelTrack> tracks,
                                                     const ClassMappings& mappings);

/// Single-threaded reference for estimate_records.
std::vector<LabelUncertaintyRecord> estimate_records_serial(std::span<const LabelTrack> tracks,
                                                            const ClassMappings& mappings);

struct HistogramBin {
    double low = 0.0;
    double high = 0.0;
    std::size_t count = 0;
};

/// Equal-width IoU bins over [0, 1]; right-open except the last bin.
std::vector<HistogramBin> iou_histogram(std::span<const double> ious, int n_bins);
std::vector<HistogramBin> iou_histogram(std::span<const LabelUncertaintyRecord> records, int n_bins);

/// Parses the `{"tracks": [...]}` document. Throws nlohmann::json::exception on
/// malformed JSON and std::invalid_argument on schema violations.
std::vector<LabelTrack> parse_tracks_json(const std::string& text);

/// `label_id,class_name,iou,scale_b,n_points,n_sweeps` at 6 significant digits.
std::string records_to_csv(std::span<const LabelUncertaintyRecord> records);
std::vector<LabelUncertaintyRecord> records_from_csv(const std::string& text);

/// `bin_low,bin_high,count`.
std::string histogram_to_csv(std::span<const HistogramBin> bins);

}  // namespace lkld
