#include <catch2/catch.hpp>

#include "corrdetect/geometry.hpp"

using namespace corrdetect;

namespace {

PolygonMask rect_polygon(double x0, double y0, double x1, double y1) {
    return PolygonMask::create({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

// Independent pixel-count oracle: center-in-rectangle test, no scanline.
long rect_pixel_count(double x0, double y0, double x1, double y1, int w, int h) {
    long count = 0;
    for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px) {
            const double cx = px + 0.5, cy = py + 0.5;
            if (cx >= x0 && cx < x1 && cy >= y0 && cy < y1) ++count;
        }
    return count;
}

}  // namespace

TEST_CASE("segment_rect matches the published grid geometry") {
    const GridSpec grid = GridSpec::create(5280, 3952, 16);
    CHECK(grid.seg_width_px == 330);
    CHECK(grid.seg_height_px == 247);
    const BoundingBox b = segment_rect(grid, {1, 1});
    CHECK(b == BoundingBox{0, 0, 330, 247});
}

TEST_CASE("segment_rect identity tiling for n=1") {
    const GridSpec grid = GridSpec::create(4, 4, 1);
    CHECK(segment_rect(grid, {1, 1}) == BoundingBox{0, 0, 4, 4});
}

TEST_CASE("segment_rect rejects out-of-range indices") {
    const GridSpec grid = GridSpec::create(8, 8, 2);
    CHECK_THROWS_AS(segment_rect(grid, {0, 1}), Error);
    CHECK_THROWS_AS(segment_rect(grid, {3, 1}), Error);
    CHECK_THROWS_AS(segment_rect(grid, {1, 3}), Error);
}

TEST_CASE("segment rectangles tile the image exactly") {
    // Brute-force enumeration for the 2x2 case from first principles.
    const GridSpec grid = GridSpec::create(8, 8, 2);
    std::vector<BoundingBox> rects;
    for (int x = 1; x <= 2; ++x)
        for (int y = 1; y <= 2; ++y) rects.push_back(segment_rect(grid, {x, y}));

    double total_area = 0;
    for (const auto& r : rects) total_area += r.area();
    CHECK(total_area == 64.0);

    for (std::size_t i = 0; i < rects.size(); ++i) {
        for (std::size_t j = i + 1; j < rects.size(); ++j) {
            const double ix = std::max(0.0, std::min(rects[i].x_max, rects[j].x_max) -
                                                std::max(rects[i].x_min, rects[j].x_min));
            const double iy = std::max(0.0, std::min(rects[i].y_max, rects[j].y_max) -
                                                std::max(rects[i].y_min, rects[j].y_min));
            CHECK(ix * iy == 0.0);
        }
    }

    // Every pixel covered exactly once, over random divisible geometries.
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = rng.next_int(1, 6);
        const int w = n * rng.next_int(1, 9);
        const int h = n * rng.next_int(1, 9);
        const GridSpec g = GridSpec::create(w, h, n);
        std::vector<int> cover(static_cast<std::size_t>(w) * h, 0);
        for (int x = 1; x <= n; ++x)
            for (int y = 1; y <= n; ++y) {
                const PixelRect r = to_pixel_rect(segment_rect(g, {x, y}));
                for (int py = r.y0; py < r.y1; ++py)
                    for (int px = r.x0; px < r.x1; ++px) cover[static_cast<std::size_t>(py) * w + px]++;
            }
        for (int c : cover) REQUIRE(c == 1);
    }
}

TEST_CASE("GridSpec rejects non-divisible dimensions unless cropping") {
    CHECK_THROWS_AS(GridSpec::create(10, 10, 3), Error);
    const GridSpec g = GridSpec::create(10, 10, 3, GridPolicy::crop);
    CHECK(g.seg_width_px == 3);
    CHECK(g.covered_width() == 9);
}

TEST_CASE("flatten is row-major with x outer") {
    const auto m1 = GridMatrix<int>::from_cells(1, {7});
    CHECK(flatten(m1) == std::vector<int>{7});

    BinaryGridMatrix m2(2);
    m2.set(1, 1, 1);
    m2.set(2, 2, 1);
    CHECK(flatten(m2) == std::vector<std::uint8_t>{1, 0, 0, 1});

    const ConfidenceGridMatrix m16(16);
    CHECK(flatten(m16).size() == 256);
}

TEST_CASE("flatten then unflatten is the identity") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = rng.next_int(1, 32);
        std::vector<double> cells(static_cast<std::size_t>(n) * n);
        for (auto& c : cells) c = rng.next_double();
        const auto m = ConfidenceGridMatrix::from_cells(n, cells);
        CHECK(unflatten_confidence(n, flatten(m)) == m);
    }
}

TEST_CASE("rasterize_mask: full-image rectangle has exact area") {
    const ImageDescriptor img{"t", 10, 10, 3};
    const PixelMask m = rasterize_mask(rect_polygon(0, 0, 10, 10), img);
    CHECK(m.area_px == 100);
    CHECK_FALSE(m.degenerate);
}

TEST_CASE("rasterize_mask: right triangle area within 2% of the analytic half") {
    const ImageDescriptor img{"t", 100, 100, 3};
    const PolygonMask tri = PolygonMask::create({{0, 0}, {100, 0}, {0, 100}});
    const PixelMask m = rasterize_mask(tri, img);
    CHECK(m.area_px >= 4900);
    CHECK(m.area_px <= 5100);
}

TEST_CASE("rasterize_mask: collinear polygon is flagged degenerate") {
    const ImageDescriptor img{"t", 10, 10, 3};
    const PolygonMask degen = PolygonMask::create({{1, 1}, {5, 5}, {9, 9}});
    const PixelMask m = rasterize_mask(degen, img);
    CHECK(m.area_px == 0);
    CHECK(m.degenerate);
}

TEST_CASE("rasterize_mask: integer rectangles rasterize to their exact area") {
    Rng rng(23);
    const ImageDescriptor img{"t", 64, 48, 3};
    for (int trial = 0; trial < 50; ++trial) {
        const int x0 = rng.next_int(0, 62), y0 = rng.next_int(0, 46);
        const int x1 = rng.next_int(x0 + 1, 63), y1 = rng.next_int(y0 + 1, 47);
        const PixelMask m = rasterize_mask(rect_polygon(x0, y0, x1, y1), img);
        CHECK(m.area_px == static_cast<long>(x1 - x0) * (y1 - y0));
    }
}

TEST_CASE("rasterize_mask agrees with a brute-force center test on fractional rectangles") {
    Rng rng(29);
    const ImageDescriptor img{"t", 40, 40, 3};
    for (int trial = 0; trial < 30; ++trial) {
        const double x0 = rng.next_double(0, 20), y0 = rng.next_double(0, 20);
        const double x1 = x0 + rng.next_double(1, 19), y1 = y0 + rng.next_double(1, 19);
        const PixelMask m = rasterize_mask(rect_polygon(x0, y0, x1, y1), img);
        CHECK(m.area_px == rect_pixel_count(x0, y0, x1, y1, 40, 40));
    }
}

TEST_CASE("intersection_fraction on covering, disjoint and half-covering masks") {
    const ImageDescriptor img{"t", 8, 8, 3};
    const GridSpec grid = GridSpec::create(8, 8, 2);

    const PolygonMask full = rect_polygon(0, 0, 8, 8);
    for (int x = 1; x <= 2; ++x)
        for (int y = 1; y <= 2; ++y)
            CHECK(intersection_fraction(segment_rect(grid, {x, y}), full, img) == 1.0);

    // Disjoint: mask confined to segment (1,1), checked against (2,2).
    const PolygonMask corner = rect_polygon(0, 0, 4, 4);
    CHECK(intersection_fraction(segment_rect(grid, {2, 2}), corner, img) == 0.0);

    // Left half of segment (1,1): [0,2) of [0,4).
    const PolygonMask half = rect_polygon(0, 0, 2, 4);
    CHECK(intersection_fraction(segment_rect(grid, {1, 1}), half, img) == 0.5);
}

TEST_CASE("intersection_fraction rejects zero-area segments") {
    const ImageDescriptor img{"t", 8, 8, 3};
    const PolygonMask any = rect_polygon(0, 0, 8, 8);
    CHECK_THROWS_AS(intersection_fraction(BoundingBox{2, 2, 2, 5}, any, img), Error);
}

TEST_CASE("intersection_fraction is monotone under mask growth") {
    const ImageDescriptor img{"t", 32, 32, 3};
    const GridSpec grid = GridSpec::create(32, 32, 4);
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const double x0 = rng.next_double(0, 12), y0 = rng.next_double(0, 12);
        const double x1 = x0 + rng.next_double(2, 16), y1 = y0 + rng.next_double(2, 16);
        const double grow = rng.next_double(0.5, 6);
        const PolygonMask small = rect_polygon(x0, y0, x1, y1);
        const PolygonMask big = rect_polygon(std::max(0.0, x0 - grow), std::max(0.0, y0 - grow),
                                             std::min(32.0, x1 + grow), std::min(32.0, y1 + grow));
        for (int x = 1; x <= 4; ++x)
            for (int y = 1; y <= 4; ++y) {
                const BoundingBox seg = segment_rect(grid, {x, y});
                CHECK(intersection_fraction(seg, big, img) >= intersection_fraction(seg, small, img));
            }
    }
}

TEST_CASE("PolygonMask rejects self-intersecting and undersized polygons") {
    CHECK_THROWS_AS(PolygonMask::create({{0, 0}, {4, 4}}), Error);
    // Bowtie: edges (0,0)-(4,4) and (4,0)-(0,4) cross properly.
    CHECK_THROWS_AS(PolygonMask::create({{0, 0}, {4, 4}, {4, 0}, {0, 4}}), Error);
}

TEST_CASE("convex_hull wraps a point cloud") {
    std::vector<Point> pts{{0, 0}, {4, 0}, {4, 4}, {0, 4}, {2, 2}, {1, 3}};
    const auto hull = convex_hull(pts);
    REQUIRE(hull.size() == 4);
    for (const auto& corner : {Point{0, 0}, Point{4, 0}, Point{4, 4}, Point{0, 4}})
        CHECK(std::count(hull.begin(), hull.end(), corner) == 1);
}
