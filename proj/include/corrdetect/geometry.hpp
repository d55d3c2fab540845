#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "corrdetect/types.hpp"

namespace corrdetect {

// Pixel rectangle of segment s_xy: x indexes rows (vertical), y columns
// (horizontal). The n^2 rectangles tile the covered image area exactly.
inline BoundingBox segment_rect(const GridSpec& grid, SegmentIndex idx) {
    if (!idx.in_grid(grid.n))
        throw_data("segment_rect: index (" + std::to_string(idx.x) + "," + std::to_string(idx.y) +
                   ") out of range for n=" + std::to_string(grid.n));
    BoundingBox b;
    b.x_min = static_cast<double>(idx.y - 1) * grid.seg_width_px;
    b.y_min = static_cast<double>(idx.x - 1) * grid.seg_height_px;
    b.x_max = static_cast<double>(idx.y) * grid.seg_width_px;
    b.y_max = static_cast<double>(idx.x) * grid.seg_height_px;
    return b;
}

// Rasterized pixel membership of a polygon over a W x H image.
struct PixelMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> inside;  // row-major, 1 = pixel center inside
    long area_px = 0;
    bool degenerate = false;  // zero-area polygon

    bool contains(int px, int py) const {
        if (px < 0 || py < 0 || px >= width || py >= height) return false;
        return inside[static_cast<std::size_t>(py) * width + px] != 0;
    }
};

// Deterministic even-odd scanline fill with center-of-pixel inclusion:
// pixel (px,py) belongs to the mask iff its center (px+0.5, py+0.5) lies
// inside the polygon. Order-independent in the vertex direction.
inline PixelMask rasterize_mask(const PolygonMask& mask, const ImageDescriptor& image) {
    if (image.width_px < 1 || image.height_px < 1) throw_data("rasterize_mask: invalid image dimensions");
    PixelMask out;
    out.width = image.width_px;
    out.height = image.height_px;
    out.inside.assign(static_cast<std::size_t>(out.width) * out.height, 0);
    out.degenerate = std::abs(mask.signed_area()) == 0.0;

    const auto& v = mask.vertices();
    const std::size_t k = v.size();
    std::vector<double> xs;
    xs.reserve(k);

    const BoundingBox bb = mask.bounds();
    const int row_lo = std::max(0, static_cast<int>(std::floor(bb.y_min - 1.0)));
    const int row_hi = std::min(out.height - 1, static_cast<int>(std::ceil(bb.y_max + 1.0)));

    for (int py = row_lo; py <= row_hi; ++py) {
        const double yc = py + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < k; ++i) {
            const Point& a = v[i];
            const Point& b = v[(i + 1) % k];
            // Half-open rule on y handles vertices and skips horizontal edges.
            if ((a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y)) {
                xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
            // Pixel centers px+0.5 in [xs[i], xs[i+1]).
            int px0 = static_cast<int>(std::ceil(xs[i] - 0.5));
            int px1 = static_cast<int>(std::ceil(xs[i + 1] - 0.5));  // exclusive
            px0 = std::max(px0, 0);
            px1 = std::min(px1, out.width);
            for (int px = px0; px < px1; ++px) {
                auto& cell = out.inside[static_cast<std::size_t>(py) * out.width + px];
                if (!cell) {
                    cell = 1;
                    ++out.area_px;
                }
            }
        }
    }
    if (out.area_px == 0) out.degenerate = true;
    return out;
}

// Integer pixel range covered by a segment rectangle. Segment rects come
// from segment_rect and have exact integer corners.
struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)
    long pixel_count() const { return static_cast<long>(x1 - x0) * (y1 - y0); }
};

inline PixelRect to_pixel_rect(const BoundingBox& rect) {
    PixelRect r;
    r.x0 = static_cast<int>(std::llround(rect.x_min));
    r.y0 = static_cast<int>(std::llround(rect.y_min));
    r.x1 = static_cast<int>(std::llround(rect.x_max));
    r.y1 = static_cast<int>(std::llround(rect.y_max));
    return r;
}

// Fraction of the segment rectangle's pixels whose centers fall inside the
// already-rasterized mask. Shared by intersection_fraction and the ERC
// feature builder, which reuses one rasterization across all n^2 segments.
inline double intersection_fraction(const BoundingBox& seg_rect, const PixelMask& mask) {
    const PixelRect r = to_pixel_rect(seg_rect);
    const long total = r.pixel_count();
    if (total <= 0) throw_data("intersection_fraction: zero-area segment");
    long inside = 0;
    for (int py = r.y0; py < r.y1; ++py)
        for (int px = r.x0; px < r.x1; ++px)
            if (mask.contains(px, py)) ++inside;
    return static_cast<double>(inside) / static_cast<double>(total);
}

inline double intersection_fraction(const BoundingBox& seg_rect, const PolygonMask& mask,
                                    const ImageDescriptor& image) {
    return intersection_fraction(seg_rect, rasterize_mask(mask, image));
}

inline bool point_in_polygon(Point p, const std::vector<Point>& vertices) {
    bool inside = false;
    const std::size_t k = vertices.size();
    for (std::size_t i = 0; i < k; ++i) {
        const Point& a = vertices[i];
        const Point& b = vertices[(i + 1) % k];
        if ((a.y <= p.y && p.y < b.y) || (b.y <= p.y && p.y < a.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

inline double point_segment_distance(Point p, Point a, Point b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double qx = a.x + t * dx, qy = a.y + t * dy;
    return std::hypot(p.x - qx, p.y - qy);
}

// Distance from a point to a polygon boundary; 0 when inside.
inline double polygon_clearance(Point p, const std::vector<Point>& vertices) {
    if (point_in_polygon(p, vertices)) return 0.0;
    double best = std::numeric_limits<double>::max();
    const std::size_t k = vertices.size();
    for (std::size_t i = 0; i < k; ++i)
        best = std::min(best, point_segment_distance(p, vertices[i], vertices[(i + 1) % k]));
    return best;
}

// Andrew monotone chain; returns hull vertices in counter-clockwise order.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t k = pts.size();
    if (k < 3) return pts;
    auto cross = [](const Point& o, const Point& a, const Point& b) {
        return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    };
    std::vector<Point> hull(2 * k);
    std::size_t h = 0;
    for (std::size_t i = 0; i < k; ++i) {
        while (h >= 2 && cross(hull[h - 2], hull[h - 1], pts[i]) <= 0) --h;
        hull[h++] = pts[i];
    }
    for (std::size_t i = k - 1, t = h + 1; i-- > 0;) {
        while (h >= t && cross(hull[h - 2], hull[h - 1], pts[i]) <= 0) --h;
        hull[h++] = pts[i];
    }
    hull.resize(h - 1);
    return hull;
}

}  // namespace corrdetect
