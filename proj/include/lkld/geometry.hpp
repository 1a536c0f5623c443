#pragma once

#include <span>
#include <vector>

namespace lkld {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }

/// z-component of (a - o) x (b - o); positive for a left turn.
inline double cross(Point2 o, Point2 a, Point2 b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Center and heading of a rigid body in the plane.
struct Pose2 {
    Point2 center;
    double theta = 0.0;
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double theta);

/// Bird's-eye-view box: center, heading, extent along heading, extent across.
class OrientedRect {
public:
    /// Throws std::domain_error for non-finite fields or non-positive extents.
    OrientedRect(Point2 center, double theta, double length, double width);

    Point2 center() const { return center_; }
    double theta() const { return theta_; }
    double length() const { return length_; }
    double width() const { return width_; }
    Pose2 pose() const { return {center_, theta_}; }

private:
    Point2 center_;
    double theta_;
    double length_;
    double width_;
};

/// Counter-clockwise vertex loop. Fewer than three vertices is a degenerate
/// polygon with zero area.
struct ConvexPolygon {
    std::vector<Point2> vertices;

    bool degenerate() const { return vertices.size() < 3; }
};

/// Moves `p` rigidly with the body from `from` to `to`:
/// R(to.theta - from.theta) * (p - from.center) + to.center.
Point2 rigid_transform(Point2 p, const Pose2& from, const Pose2& to);

/// Andrew's monotone chain. Output is CCW starting at the lexicographically
/// smallest point, with duplicates and collinear boundary points removed.
ConvexPolygon convex_hull(std::span<const Point2> points);

/// Corners of the rectangle, CCW, starting at (+length/2, +width/2) in the
/// rectangle frame.
ConvexPolygon rect_to_polygon(const OrientedRect& r);

/// Clips `a` against every edge of `b` (Sutherland-Hodgman). Points within
/// 1e-9 of a clip line count as inside. Degenerate inputs give an empty result.
ConvexPolygon intersect_convex(const ConvexPolygon& a, const ConvexPolygon& b);

/// Shoelace area; 0 for degenerate polygons.
double area(const ConvexPolygon& p);

/// Intersection over union; 0 when the union has zero area.
double iou(const ConvexPolygon& a, const ConvexPolygon& b);

/// Point-in-convex-polygon test with a distance tolerance.
bool contains(const ConvexPolygon& poly, Point2 p, double tol = 1e-9);

}  // namespace lkld
