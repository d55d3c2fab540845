#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "corrdetect/common.hpp"

namespace corrdetect {

struct ImageDescriptor {
    std::string image_id;
    int width_px = 0;
    int height_px = 0;
    int channels = 3;

    bool valid() const { return width_px >= 1 && height_px >= 1 && !image_id.empty(); }
};

// How to treat images whose dimensions are not divisible by n.
enum class GridPolicy {
    reject,  // configuration error (default)
    crop,    // drop the rightmost/bottom remainder pixels
};

// The n x n segmentation geometry of one image size.
struct GridSpec {
    int n = 0;
    int seg_width_px = 0;   // w = W/n
    int seg_height_px = 0;  // h = H/n

    static GridSpec create(int width_px, int height_px, int n, GridPolicy policy = GridPolicy::reject) {
        if (n < 1) throw_config("GridSpec: n must be >= 1, got " + std::to_string(n));
        if (width_px < n || height_px < n)
            throw_config("GridSpec: image " + std::to_string(width_px) + "x" + std::to_string(height_px) +
                         " too small for n=" + std::to_string(n));
        if (policy == GridPolicy::reject && (width_px % n != 0 || height_px % n != 0))
            throw_config("GridSpec: " + std::to_string(width_px) + "x" + std::to_string(height_px) +
                         " not divisible by n=" + std::to_string(n) +
                         " (use the crop policy to drop remainder pixels)");
        GridSpec g;
        g.n = n;
        g.seg_width_px = width_px / n;
        g.seg_height_px = height_px / n;
        return g;
    }

    int covered_width() const { return seg_width_px * n; }
    int covered_height() const { return seg_height_px * n; }
    int segment_count() const { return n * n; }
};

// 1-based (row, column) index of a segment, mirroring the x/y subscripts
// used throughout the annotation formats.
struct SegmentIndex {
    int x = 1;  // row, 1..n
    int y = 1;  // column, 1..n

    bool in_grid(int n) const { return x >= 1 && x <= n && y >= 1 && y <= n; }
    friend bool operator==(const SegmentIndex&, const SegmentIndex&) = default;
    friend auto operator<=>(const SegmentIndex&, const SegmentIndex&) = default;
};

struct BoundingBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    bool valid() const { return x_min < x_max && y_min < y_max; }
    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// n x n matrix with the 1-based (x=row, y=col) access convention of the
// annotation notation; storage is 0-based row-major.
template <typename T>
class GridMatrix {
public:
    GridMatrix() = default;
    explicit GridMatrix(int n, T fill = T{}) : n_(n), cells_(static_cast<std::size_t>(n) * n, fill) {
        if (n < 1) throw_data("GridMatrix: n must be >= 1");
    }

    static GridMatrix from_cells(int n, std::vector<T> cells) {
        if (n < 1 || cells.size() != static_cast<std::size_t>(n) * n)
            throw_data("GridMatrix: cell count does not match n=" + std::to_string(n));
        GridMatrix m;
        m.n_ = n;
        m.cells_ = std::move(cells);
        return m;
    }

    int n() const { return n_; }

    T at(int x, int y) const {
        check(x, y);
        return cells_[idx(x, y)];
    }
    T at(SegmentIndex s) const { return at(s.x, s.y); }

    void set(int x, int y, T v) {
        check(x, y);
        cells_[idx(x, y)] = v;
    }
    void set(SegmentIndex s, T v) { set(s.x, s.y, v); }

    const std::vector<T>& cells() const { return cells_; }

    friend bool operator==(const GridMatrix&, const GridMatrix&) = default;

private:
    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(x - 1) * n_ + static_cast<std::size_t>(y - 1);
    }
    void check(int x, int y) const {
        if (x < 1 || x > n_ || y < 1 || y > n_)
            throw_data("GridMatrix: index (" + std::to_string(x) + "," + std::to_string(y) +
                       ") out of range for n=" + std::to_string(n_));
    }

    int n_ = 0;
    std::vector<T> cells_;
};

class BinaryGridMatrix : public GridMatrix<std::uint8_t> {
public:
    BinaryGridMatrix() = default;
    explicit BinaryGridMatrix(int n) : GridMatrix<std::uint8_t>(n, 0) {}

    static BinaryGridMatrix from_cells(int n, std::vector<std::uint8_t> cells) {
        for (auto c : cells)
            if (c > 1) throw_data("BinaryGridMatrix: cell value must be 0 or 1");
        BinaryGridMatrix m;
        static_cast<GridMatrix<std::uint8_t>&>(m) = GridMatrix<std::uint8_t>::from_cells(n, std::move(cells));
        return m;
    }

    void set(int x, int y, std::uint8_t v) {
        if (v > 1) throw_data("BinaryGridMatrix: cell value must be 0 or 1");
        GridMatrix<std::uint8_t>::set(x, y, v);
    }
    void set(SegmentIndex s, std::uint8_t v) { set(s.x, s.y, v); }

    long sum() const {
        long s = 0;
        for (auto c : cells()) s += c;
        return s;
    }
};

class ConfidenceGridMatrix : public GridMatrix<double> {
public:
    ConfidenceGridMatrix() = default;
    explicit ConfidenceGridMatrix(int n) : GridMatrix<double>(n, 0.0) {}

    static ConfidenceGridMatrix from_cells(int n, std::vector<double> cells) {
        for (double c : cells)
            if (!(c >= 0.0 && c <= 1.0))
                throw_data("ConfidenceGridMatrix: cell value " + std::to_string(c) + " outside [0,1]");
        ConfidenceGridMatrix m;
        static_cast<GridMatrix<double>&>(m) = GridMatrix<double>::from_cells(n, std::move(cells));
        return m;
    }

    void set(int x, int y, double v) {
        if (!(v >= 0.0 && v <= 1.0))
            throw_data("ConfidenceGridMatrix: cell value " + std::to_string(v) + " outside [0,1]");
        GridMatrix<double>::set(x, y, v);
    }
    void set(SegmentIndex s, double v) { set(s.x, s.y, v); }
};

// Row-major flattening, x outer and y inner: element (x,y) lands at
// position (x-1)*n + (y-1). Inverse of unflatten.
template <typename T>
std::vector<T> flatten(const GridMatrix<T>& m) {
    return m.cells();
}

template <typename T>
GridMatrix<T> unflatten(int n, const std::vector<T>& data) {
    return GridMatrix<T>::from_cells(n, data);
}

inline BinaryGridMatrix unflatten_binary(int n, const std::vector<std::uint8_t>& data) {
    return BinaryGridMatrix::from_cells(n, data);
}

inline ConfidenceGridMatrix unflatten_confidence(int n, const std::vector<double>& data) {
    return ConfidenceGridMatrix::from_cells(n, data);
}

struct Point {
    double x = 0, y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

// Simple (non-self-intersecting) polygon in pixel coordinates.
class PolygonMask {
public:
    PolygonMask() = default;

    // Validates vertex count and simplicity; clamps vertices into the image
    // bounds when dimensions are given (0 disables clamping).
    static PolygonMask create(std::vector<Point> vertices, int image_w = 0, int image_h = 0) {
        if (vertices.size() < 3)
            throw_data("PolygonMask: need at least 3 vertices, got " + std::to_string(vertices.size()));
        if (image_w > 0 && image_h > 0) {
            for (auto& v : vertices) {
                v.x = std::clamp(v.x, 0.0, static_cast<double>(image_w));
                v.y = std::clamp(v.y, 0.0, static_cast<double>(image_h));
            }
        }
        if (self_intersects(vertices)) throw_data("PolygonMask: polygon is self-intersecting");
        PolygonMask m;
        m.vertices_ = std::move(vertices);
        return m;
    }

    const std::vector<Point>& vertices() const { return vertices_; }

    BoundingBox bounds() const {
        BoundingBox b{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
                      std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
        for (const auto& v : vertices_) {
            b.x_min = std::min(b.x_min, v.x);
            b.y_min = std::min(b.y_min, v.y);
            b.x_max = std::max(b.x_max, v.x);
            b.y_max = std::max(b.y_max, v.y);
        }
        return b;
    }

    // Shoelace area; zero for degenerate (collinear) polygons.
    double signed_area() const {
        double a = 0;
        const std::size_t k = vertices_.size();
        for (std::size_t i = 0; i < k; ++i) {
            const Point& p = vertices_[i];
            const Point& q = vertices_[(i + 1) % k];
            a += p.x * q.y - q.x * p.y;
        }
        return a / 2.0;
    }

    friend bool operator==(const PolygonMask&, const PolygonMask&) = default;

private:
    // O(k^2) proper-crossing test between non-adjacent edges. Shared
    // endpoints and collinear touches are tolerated; proper crossings are not.
    static bool self_intersects(const std::vector<Point>& v) {
        const std::size_t k = v.size();
        auto cross = [](Point o, Point a, Point b) {
            return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
        };
        for (std::size_t i = 0; i < k; ++i) {
            Point a1 = v[i], a2 = v[(i + 1) % k];
            for (std::size_t j = i + 1; j < k; ++j) {
                if (j == i || (j + 1) % k == i || (i + 1) % k == j) continue;  // adjacent share a vertex
                Point b1 = v[j], b2 = v[(j + 1) % k];
                double d1 = cross(a1, a2, b1), d2 = cross(a1, a2, b2);
                double d3 = cross(b1, b2, a1), d4 = cross(b1, b2, a2);
                if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
                    return true;
            }
        }
        return false;
    }

    std::vector<Point> vertices_;
};

}  // namespace corrdetect
