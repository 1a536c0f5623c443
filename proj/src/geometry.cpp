#include "lkld/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lkld {

namespace {

constexpr double kCollinearTol = 1e-12;
constexpr double kClipTol = 1e-9;

double signed_area2(const std::vector<Point2>& v) {
    double s = 0.0;
    for (std::size_t i = 0, n = v.size(); i < n; ++i) {
        const Point2& a = v[i];
        const Point2& b = v[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    return s;
}

// Signed distance of p from the directed line a->b (positive on the left).
double side(Point2 a, Point2 b, Point2 p) {
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    return len > 0.0 ? cross(a, b, p) / len : 0.0;
}

Point2 line_intersection(Point2 s, Point2 e, Point2 a, Point2 b) {
    // segment s->e against the infinite line a->b
    const double ds = cross(a, b, s);
    const double de = cross(a, b, e);
    const double t = ds / (ds - de);
    return {s.x + t * (e.x - s.x), s.y + t * (e.y - s.y)};
}

std::vector<Point2> ccw(const ConvexPolygon& p) {
    std::vector<Point2> v = p.vertices;
    if (signed_area2(v) < 0.0) std::reverse(v.begin(), v.end());
    return v;
}

}  // namespace

double normalize_angle(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double t = std::remainder(theta, two_pi);  // [-pi, pi]
    if (t <= -std::numbers::pi) t += two_pi;
    return t;
}

OrientedRect::OrientedRect(Point2 center, double theta, double length, double width)
    : center_(center), theta_(0.0), length_(length), width_(width) {
    if (!std::isfinite(center.x) || !std::isfinite(center.y) || !std::isfinite(theta))
        throw std::domain_error("rectangle pose must be finite");
    if (!(length > 0.0) || !(width > 0.0) || !std::isfinite(length) || !std::isfinite(width))
        throw std::domain_error("rectangle length and width must be positive");
    theta_ = normalize_angle(theta);
}

Point2 rigid_transform(Point2 p, const Pose2& from, const Pose2& to) {
    const double dtheta = to.theta - from.theta;
    const double c = std::cos(dtheta);
    const double s = std::sin(dtheta);
    const Point2 d = p - from.center;
    return {c * d.x - s * d.y + to.center.x, s * d.x + c * d.y + to.center.y};
}

ConvexPolygon convex_hull(std::span<const Point2> points) {
    std::vector<Point2> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return {pts};

    std::vector<Point2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point2& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= kCollinearTol) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        const Point2& p = pts[i];
        while (k >= lower && cross(hull[k - 2], hull[k - 1], p) <= kCollinearTol) --k;
        hull[k++] = p;
    }
    hull.resize(k - 1);
    return {std::move(hull)};
}

ConvexPolygon rect_to_polygon(const OrientedRect& r) {
    const double hl = 0.5 * r.length();
    const double hw = 0.5 * r.width();
    const double c = std::cos(r.theta());
    const double s = std::sin(r.theta());
    const Point2 local[4] = {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}};
    ConvexPolygon poly;
    poly.vertices.reserve(4);
    for (const Point2& q : local)
        poly.vertices.push_back({c * q.x - s * q.y + r.center().x, s * q.x + c * q.y + r.center().y});
    return poly;
}

ConvexPolygon intersect_convex(const ConvexPolygon& a, const ConvexPolygon& b) {
    if (a.degenerate() || b.degenerate()) return {};
    if (area(a) <= 0.0 || area(b) <= 0.0) return {};

    std::vector<Point2> out = ccw(a);
    const std::vector<Point2> clip = ccw(b);
    std::vector<Point2> in;
    for (std::size_t i = 0, n = clip.size(); i < n && !out.empty(); ++i) {
        const Point2 c0 = clip[i];
        const Point2 c1 = clip[(i + 1) % n];
        in.swap(out);
        out.clear();
        for (std::size_t j = 0, m = in.size(); j < m; ++j) {
            const Point2 s = in[(j + m - 1) % m];
            const Point2 e = in[j];
            const bool s_in = side(c0, c1, s) >= -kClipTol;
            const bool e_in = side(c0, c1, e) >= -kClipTol;
            if (e_in) {
                if (!s_in) out.push_back(line_intersection(s, e, c0, c1));
                out.push_back(e);
            } else if (s_in) {
                out.push_back(line_intersection(s, e, c0, c1));
            }
        }
    }
    ConvexPolygon result = convex_hull(out);
    if (result.degenerate()) return {};
    return result;
}

double area(const ConvexPolygon& p) {
    if (p.degenerate()) return 0.0;
    return 0.5 * std::abs(signed_area2(p.vertices));
}

double iou(const ConvexPolygon& a, const ConvexPolygon& b) {
    const double inter = area(intersect_convex(a, b));
    const double uni = area(a) + area(b) - inter;
    if (!(uni > 0.0)) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

bool contains(const ConvexPolygon& poly, Point2 p, double tol) {
    const auto& v = poly.vertices;
    if (v.empty()) return false;
    if (v.size() == 1) return std::hypot(p.x - v[0].x, p.y - v[0].y) <= tol;
    if (v.size() == 2) {
        const Point2 d = v[1] - v[0];
        const double len2 = d.x * d.x + d.y * d.y;
        double t = len2 > 0.0 ? ((p.x - v[0].x) * d.x + (p.y - v[0].y) * d.y) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        return std::hypot(p.x - (v[0].x + t * d.x), p.y - (v[0].y + t * d.y)) <= tol;
    }
    const std::vector<Point2> loop = ccw(poly);
    for (std::size_t i = 0, n = loop.size(); i < n; ++i)
        if (side(loop[i], loop[(i + 1) % n], p) < -tol) return false;
    return true;
}

}  // namespace lkld
