#include "lkld/label_uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "lkld/io.hpp"
#include "lkld/parallel.hpp"

namespace lkld {

void LabelTrack::validate() const {
    if (poses.empty()) throw std::invalid_argument("track '" + label_id + "' has no poses");
    for (const auto& [sweep, pts] : points) {
        if (!poses.contains(sweep))
            throw std::invalid_argument("track '" + label_id + "' has points for sweep " +
                                        std::to_string(sweep) + " without a pose");
    }
}

std::size_t LabelTrack::point_count() const {
    std::size_t n = 0;
    for (const auto& [sweep, pts] : points) n += pts.size();
    return n;
}

SweepId default_reference_sweep(const LabelTrack& track) {
    track.validate();
    SweepId best = track.poses.begin()->first;
    std::size_t best_count = 0;
    for (const auto& [sweep, pose] : track.poses) {
        auto it = track.points.find(sweep);
        const std::size_t count = it == track.points.end() ? 0 : it->second.size();
        if (count > best_count) {
            best = sweep;
            best_count = count;
        }
    }
    return best;
}

std::vector<Point2> aggregate_points(const LabelTrack& track, SweepId reference_sweep) {
    track.validate();
    auto ref = track.poses.find(reference_sweep);
    if (ref == track.poses.end())
        throw std::invalid_argument("reference sweep " + std::to_string(reference_sweep) +
                                    " is not in track '" + track.label_id + "'");
    const Pose2 to = ref->second.pose();
    std::vector<Point2> out;
    out.reserve(track.point_count());
    for (const auto& [sweep, pts] : track.points) {
        if (sweep == reference_sweep) {
            out.insert(out.end(), pts.begin(), pts.end());
            continue;
        }
        const Pose2 from = track.poses.at(sweep).pose();
        for (const Point2& p : pts) out.push_back(rigid_transform(p, from, to));
    }
    return out;
}

double label_iou(const LabelTrack& track, SweepId reference_sweep) {
    const std::vector<Point2> cloud = aggregate_points(track, reference_sweep);
    const ConvexPolygon hull = convex_hull(cloud);
    return iou(hull, rect_to_polygon(track.poses.at(reference_sweep)));
}

UncertaintyMapping fit_mapping(double b0, double b_half, double b1) {
    for (double b : {b0, b_half, b1}) {
        if (!(b > 0.0) || !std::isfinite(b))
            throw std::invalid_argument("mapping anchors must be positive and finite");
    }
    if (!(b0 > b_half && b_half > b1))
        throw std::invalid_argument("mapping anchors must be strictly decreasing (b0 > b0.5 > b1)");

    UncertaintyMapping m;
    m.b_at_iou0 = b0;
    m.b_at_iou_half = b_half;
    m.b_at_iou1 = b1;

    const double t = (b_half - b1) / (b0 - b_half);
    if (std::abs(t - 1.0) <= 1e-9) {
        m.linear = true;
        m.alpha = b0 - b1;
        m.beta = 0.0;
        m.gamma = b0;
        return m;
    }
    if (t > 1.0)
        throw std::invalid_argument(
            "anchors need b0 - b0.5 >= b0.5 - b1 for a decaying exponential (spacing ratio " +
            format_sig(t) + " > 1)");
    m.beta = -2.0 * std::log(t);
    m.alpha = (b0 - b_half) / (1.0 - t);
    m.gamma = b0 - m.alpha;
    return m;
}

double map_iou(const UncertaintyMapping& m, double iou) {
    if (!(iou >= 0.0 && iou <= 1.0))
        throw std::invalid_argument("IoU must lie in [0, 1], got " + format_sig(iou));
    const double b = m.linear ? m.gamma - m.alpha * iou : m.alpha * std::exp(-m.beta * iou) + m.gamma;
    return std::max(b, kMinLabelScale);
}

const UncertaintyMapping& ClassMappings::for_class(const std::string& class_name) const {
    auto it = per_class.find(class_name);
    return it == per_class.end() ? fallback : it->second;
}

LabelUncertaintyRecord estimate_record(const LabelTrack& track, const ClassMappings& mappings) {
    const SweepId ref = default_reference_sweep(track);
    LabelUncertaintyRecord rec;
    rec.label_id = track.label_id;
    rec.class_name = track.class_name;
    rec.iou = label_iou(track, ref);
    rec.scale_b = map_iou(mappings.for_class(track.class_name), rec.iou);
    rec.n_points = track.point_count();
    rec.n_sweeps = track.poses.size();
    return rec;
}

namespace {

void sort_records(std::vector<LabelUncertaintyRecord>& records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return a.label_id < b.label_id; });
}

}  // namespace

std::vector<LabelUncertaintyRecord> estimate_records(std::span<const LabelTrack> tracks,
                                                     const ClassMappings& mappings) {
    std::vector<LabelUncertaintyRecord> records(tracks.size());
    const auto n = static_cast<std::ptrdiff_t>(tracks.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16) num_threads(worker_threads())
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            records[static_cast<std::size_t>(i)] =
                estimate_record(tracks[static_cast<std::size_t>(i)], mappings);
        } catch (...) {
#pragma omp critical(lkld_records_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    sort_records(records);
    return records;
}

std::vector<LabelUncertaintyRecord> estimate_records_serial(std::span<const LabelTrack> tracks,
                                                            const ClassMappings& mappings) {
    std::vector<LabelUncertaintyRecord> records;
    records.reserve(tracks.size());
    for (const LabelTrack& t : tracks) records.push_back(estimate_record(t, mappings));
    sort_records(records);
    return records;
}

std::vector<HistogramBin> iou_histogram(std::span<const double> ious, int n_bins) {
    if (n_bins < 1) throw std::invalid_argument("histogram needs at least one bin");
    const auto n = static_cast<std::size_t>(n_bins);
    auto edge = [n](std::size_t i) { return static_cast<double>(i) / static_cast<double>(n); };
    std::vector<HistogramBin> bins(n);
    for (std::size_t i = 0; i < n; ++i) bins[i] = {edge(i), edge(i + 1), 0};
    for (double v : ious) {
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("IoU must lie in [0, 1], got " + format_sig(v));
        auto idx = static_cast<std::size_t>(std::floor(v * static_cast<double>(n)));
        if (idx >= n) idx = n - 1;
        // v * n can land on the wrong side of an edge by one rounding step
        if (idx + 1 < n && v >= edge(idx + 1)) ++idx;
        else if (idx > 0 && v < edge(idx)) --idx;
        ++bins[idx].count;
    }
    return bins;
}

std::vector<HistogramBin> iou_histogram(std::span<const LabelUncertaintyRecord> records, int n_bins) {
    std::vector<double> ious;
    ious.reserve(records.size());
    for (const auto& r : records) ious.push_back(r.iou);
    return iou_histogram(ious, n_bins);
}

namespace {

using nlohmann::json;

Point2 read_xy(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw std::invalid_argument(where + ": expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

const json& field(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw std::invalid_argument(where + ": missing field '" + key + "'");
    return *it;
}

double number(const json& obj, const char* key, const std::string& where) {
    const json& v = field(obj, key, where);
    if (!v.is_number()) throw std::invalid_argument(where + "." + key + ": expected a number");
    return v.get<double>();
}

SweepId sweep_id(const json& obj, const std::string& where) {
    const json& v = field(obj, "sweep_id", where);
    if (!v.is_number_integer()) throw std::invalid_argument(where + ".sweep_id: expected an integer");
    return v.get<SweepId>();
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
    const json& v = field(obj, key, where);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw std::invalid_argument(where + "." + key + ": expected a string");
}

}  // namespace

std::vector<LabelTrack> parse_tracks_json(const std::string& text) {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw std::invalid_argument("tracks document must be a JSON object");
    const json& list = field(doc, "tracks", "document");
    if (!list.is_array()) throw std::invalid_argument("document.tracks: expected an array");

    std::vector<LabelTrack> tracks;
    tracks.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = "tracks[" + std::to_string(i) + "]";
        const json& jt = list[i];
        if (!jt.is_object()) throw std::invalid_argument(where + ": expected an object");
        LabelTrack t;
        t.label_id = string_field(jt, "label_id", where);
        t.class_name = string_field(jt, "class_name", where);

        const json& poses = field(jt, "poses", where);
        if (!poses.is_array()) throw std::invalid_argument(where + ".poses: expected an array");
        for (std::size_t k = 0; k < poses.size(); ++k) {
            const std::string pw = where + ".poses[" + std::to_string(k) + "]";
            const json& jp = poses[k];
            if (!jp.is_object()) throw std::invalid_argument(pw + ": expected an object");
            const SweepId id = sweep_id(jp, pw);
            try {
                OrientedRect rect(read_xy(field(jp, "center", pw), pw + ".center"),
                                  number(jp, "theta", pw), number(jp, "length", pw),
                                  number(jp, "width", pw));
                if (!t.poses.emplace(id, rect).second)
                    throw std::invalid_argument(pw + ": duplicate sweep_id " + std::to_string(id));
            } catch (const std::domain_error& e) {
                throw std::invalid_argument(pw + ": " + e.what());
            }
        }

        if (auto it = jt.find("points"); it != jt.end()) {
            if (!it->is_array()) throw std::invalid_argument(where + ".points: expected an array");
            for (std::size_t k = 0; k < it->size(); ++k) {
                const std::string pw = where + ".points[" + std::to_string(k) + "]";
                const json& jp = (*it)[k];
                if (!jp.is_object()) throw std::invalid_argument(pw + ": expected an object");
                const SweepId id = sweep_id(jp, pw);
                const json& xy = field(jp, "xy", pw);
                if (!xy.is_array()) throw std::invalid_argument(pw + ".xy: expected an array");
                auto& dst = t.points[id];
                for (std::size_t m = 0; m < xy.size(); ++m) {
                    const Point2 p = read_xy(xy[m], pw + ".xy[" + std::to_string(m) + "]");
                    if (!std::isfinite(p.x) || !std::isfinite(p.y))
                        throw std::invalid_argument(pw + ": non-finite coordinate");
                    dst.push_back(p);
                }
            }
        }
        t.validate();
        tracks.push_back(std::move(t));
    }
    return tracks;
}

std::string records_to_csv(std::span<const LabelUncertaintyRecord> records) {
    std::string out = "label_id,class_name,iou,scale_b,n_points,n_sweeps\n";
    for (const auto& r : records) {
        out += csv_field(r.label_id) + ',' + csv_field(r.class_name) + ',' + format_sig(r.iou, 6) +
               ',' + format_sig(r.scale_b, 6) + ',' + std::to_string(r.n_points) + ',' +
               std::to_string(r.n_sweeps) + '\n';
    }
    return out;
}

std::vector<LabelUncertaintyRecord> records_from_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw std::invalid_argument("records CSV is empty (missing header)");
    const std::vector<std::string> header = {"label_id", "class_name", "iou", "scale_b", "n_points", "n_sweeps"};
    if (rows.front() != header)
        throw std::invalid_argument("records CSV header must be label_id,class_name,iou,scale_b,n_points,n_sweeps");
    std::vector<LabelUncertaintyRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != header.size())
            throw std::invalid_argument("records CSV row " + std::to_string(i + 1) + " has " +
                                        std::to_string(r.size()) + " fields");
        LabelUncertaintyRecord rec;
        rec.label_id = r[0];
        rec.class_name = r[1];
        rec.iou = parse_real(r[2]);
        rec.scale_b = parse_real(r[3]);
        rec.n_points = static_cast<std::size_t>(parse_real(r[4]));
        rec.n_sweeps = static_cast<std::size_t>(parse_real(r[5]));
        out.push_back(std::move(rec));
    }
    return out;
}

std::string histogram_to_csv(std::span<const HistogramBin> bins) {
    std::string out = "bin_low,bin_high,count\n";
    for (const auto& b : bins)
        out += format_sig(b.low) + ',' + format_sig(b.high) + ',' + std::to_string(b.count) + '\n';
    return out;
}

}  // namespace lkld
