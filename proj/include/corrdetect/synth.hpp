#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "corrdetect/annotation.hpp"
#include "corrdetect/geometry.hpp"
#include "corrdetect/image.hpp"

namespace corrdetect {

// Color classes live in disjoint RGB ranges so that a pixel scan can
// recover each element of the scene exactly:
//   rust        r in [150,210], g in [55,110], b in [15,70]
//   tower       gray, all channels equal in [52,78]
//   background  all channels in [185,235]
//   clutter     r,b in [80,130], g in [140,200]
inline bool is_rust_color(Rgb c) {
    return c.r >= 150 && c.r <= 210 && c.g >= 55 && c.g <= 110 && c.b >= 15 && c.b <= 70;
}

inline bool is_tower_color(Rgb c) { return c.r == c.g && c.g == c.b && c.r >= 52 && c.r <= 78; }

struct SyntheticSpec {
    int image_count = 12;  // m
    int width = 320;
    int height = 320;
    int n = 8;

    int lattice_bar_px = 8;       // bar stroke thickness
    int patches_on_structure = 3; // rust blobs clipped to the lattice
    int patches_off_structure = 0;
    int patch_radius_min = 4;
    int patch_radius_max = 10;
    bool background_clutter = true;
    std::uint64_t seed = 1;

    void validate() const {
        if (image_count < 1) throw_config("SyntheticSpec: image_count must be >= 1");
        if (n < 1 || width % n != 0 || height % n != 0)
            throw_config("SyntheticSpec: width and height must be divisible by n");
        if (patch_radius_min < 1 || patch_radius_max < patch_radius_min)
            throw_config("SyntheticSpec: bad patch radius range");
        if (lattice_bar_px < 2) throw_config("SyntheticSpec: lattice_bar_px must be >= 2");
        if (patches_on_structure < 0 || patches_off_structure < 0)
            throw_config("SyntheticSpec: negative patch count");
    }
};

struct SyntheticImage {
    std::string image_id;
    ImageRgb pixels;
    GridAnnotation grid_annotation;          // cells touched by on-structure rust
    ObjectAnnotation object_annotation;      // tower outline polygon
    std::set<SegmentIndex> off_structure_cells;
};

struct SyntheticDataset {
    SyntheticSpec spec;
    std::vector<SyntheticImage> images;
};

namespace synth_detail {

inline void draw_thick_segment(ImageRgb& img, std::vector<std::uint8_t>& mask, Point a, Point b,
                               double thickness, Rgb color) {
    const double half = thickness / 2.0;
    const int x0 = std::max(0, int(std::floor(std::min(a.x, b.x) - half)));
    const int x1 = std::min(img.width() - 1, int(std::ceil(std::max(a.x, b.x) + half)));
    const int y0 = std::max(0, int(std::floor(std::min(a.y, b.y) - half)));
    const int y1 = std::min(img.height() - 1, int(std::ceil(std::max(a.y, b.y) + half)));
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    for (int py = y0; py <= y1; ++py) {
        for (int px = x0; px <= x1; ++px) {
            const double cx = px + 0.5, cy = py + 0.5;
            double t = len2 > 0 ? ((cx - a.x) * dx + (cy - a.y) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double qx = a.x + t * dx, qy = a.y + t * dy;
            const double dist2 = (cx - qx) * (cx - qx) + (cy - qy) * (cy - qy);
            if (dist2 <= half * half) {
                img.set(px, py, color);
                mask[static_cast<std::size_t>(py) * img.width() + px] = 1;
            }
        }
    }
}

inline SegmentIndex cell_of_pixel(int px, int py, const GridSpec& grid) {
    return {py / grid.seg_height_px + 1, px / grid.seg_width_px + 1};
}

}  // namespace synth_detail

// Paints one rust patch (a disk clipped to the structure mask when given)
// and returns the exact set of grid cells that received at least one rust
// pixel. Exposed so tests can target a specific cell.
inline std::set<SegmentIndex> draw_rust_patch(ImageRgb& img, const std::vector<std::uint8_t>* structure_mask,
                                              Point center, double radius, const GridSpec& grid, Rng& rng) {
    std::set<SegmentIndex> touched;
    const int x0 = std::max(0, int(std::floor(center.x - radius)));
    const int x1 = std::min(img.width() - 1, int(std::ceil(center.x + radius)));
    const int y0 = std::max(0, int(std::floor(center.y - radius)));
    const int y1 = std::min(img.height() - 1, int(std::ceil(center.y + radius)));
    const Rgb base{static_cast<std::uint8_t>(rng.next_int(155, 205)),
                   static_cast<std::uint8_t>(rng.next_int(60, 105)),
                   static_cast<std::uint8_t>(rng.next_int(20, 65))};
    for (int py = y0; py <= y1; ++py) {
        for (int px = x0; px <= x1; ++px) {
            const double dx = px + 0.5 - center.x, dy = py + 0.5 - center.y;
            if (dx * dx + dy * dy > radius * radius) continue;
            if (structure_mask &&
                !(*structure_mask)[static_cast<std::size_t>(py) * img.width() + px])
                continue;
            const Rgb c{static_cast<std::uint8_t>(std::clamp(int(base.r) + rng.next_int(-5, 5), 150, 210)),
                        static_cast<std::uint8_t>(std::clamp(int(base.g) + rng.next_int(-5, 5), 55, 110)),
                        static_cast<std::uint8_t>(std::clamp(int(base.b) + rng.next_int(-5, 5), 15, 70))};
            img.set(px, py, c);
            touched.insert(synth_detail::cell_of_pixel(px, py, grid));
        }
    }
    return touched;
}

inline SyntheticDataset synth_generate(const SyntheticSpec& spec) {
    spec.validate();
    const GridSpec grid = GridSpec::create(spec.width, spec.height, spec.n);
    Rng master(spec.seed);
    SyntheticDataset ds;
    ds.spec = spec;

    for (int i = 0; i < spec.image_count; ++i) {
        Rng rng = master.fork(static_cast<std::uint64_t>(i) + 1);
        SyntheticImage out;
        out.image_id = "synth_" + std::to_string(i);

        // Textured light background.
        ImageRgb img(spec.width, spec.height);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                img.set(x, y, Rgb{static_cast<std::uint8_t>(rng.next_int(185, 235)),
                                  static_cast<std::uint8_t>(rng.next_int(185, 235)),
                                  static_cast<std::uint8_t>(rng.next_int(185, 235))});

        std::vector<std::uint8_t> clutter_mask(static_cast<std::size_t>(spec.width) * spec.height, 0);
        if (spec.background_clutter) {
            const int blobs = rng.next_int(2, 5);
            for (int bidx = 0; bidx < blobs; ++bidx) {
                const Point c{rng.next_double(0, spec.width), rng.next_double(0, spec.height)};
                const double r = rng.next_double(spec.width / 20.0, spec.width / 8.0);
                const Rgb col{static_cast<std::uint8_t>(rng.next_int(80, 130)),
                              static_cast<std::uint8_t>(rng.next_int(140, 200)),
                              static_cast<std::uint8_t>(rng.next_int(80, 130))};
                synth_detail::draw_thick_segment(img, clutter_mask, c, c, 2 * r, col);
            }
        }

        // Tower: a trapezoid outline with rails, rungs and diagonal braces.
        const double ty = spec.height * 0.08, by = spec.height * 0.92;
        const double cx = spec.width * rng.next_double(0.45, 0.55);
        const double half_top = spec.width * rng.next_double(0.05, 0.08);
        const double half_bot = spec.width * rng.next_double(0.14, 0.20);
        const std::vector<Point> outline{
            {cx - half_top, ty}, {cx + half_top, ty}, {cx + half_bot, by}, {cx - half_bot, by}};

        std::vector<std::uint8_t> tower_mask(static_cast<std::size_t>(spec.width) * spec.height, 0);
        // Bars are stroked around their center line, so keep center lines a
        // full stroke width inside the outline on every side.
        const double inset = spec.lattice_bar_px;
        const double ty_in = ty + inset, by_in = by - inset;
        auto half_at = [&](double f) {
            const double y = ty_in + f * (by_in - ty_in);
            const double t = (y - ty) / (by - ty);
            return half_top + t * (half_bot - half_top);
        };
        auto left_at = [&](double f) { return Point{cx - half_at(f) + inset, ty_in + f * (by_in - ty_in)}; };
        auto right_at = [&](double f) { return Point{cx + half_at(f) - inset, ty_in + f * (by_in - ty_in)}; };
        const std::uint8_t gray = static_cast<std::uint8_t>(rng.next_int(52, 78));
        const Rgb tower_color{gray, gray, gray};
        const double bar = spec.lattice_bar_px;
        synth_detail::draw_thick_segment(img, tower_mask, left_at(0), left_at(1), bar, tower_color);
        synth_detail::draw_thick_segment(img, tower_mask, right_at(0), right_at(1), bar, tower_color);
        const int rungs = 5;
        for (int rgi = 0; rgi <= rungs; ++rgi) {
            const double f = static_cast<double>(rgi) / rungs;
            synth_detail::draw_thick_segment(img, tower_mask, left_at(f), right_at(f), bar, tower_color);
            if (rgi < rungs) {
                const double fn = static_cast<double>(rgi + 1) / rungs;
                if (rgi % 2 == 0)
                    synth_detail::draw_thick_segment(img, tower_mask, left_at(f), right_at(fn), bar, tower_color);
                else
                    synth_detail::draw_thick_segment(img, tower_mask, right_at(f), left_at(fn), bar, tower_color);
            }
        }

        std::vector<std::size_t> tower_pixels;
        for (std::size_t p = 0; p < tower_mask.size(); ++p)
            if (tower_mask[p]) tower_pixels.push_back(p);
        if (tower_pixels.empty()) throw_data("synth_generate: tower lattice has no pixels");

        // On-structure rust, clipped to the lattice.
        std::set<SegmentIndex> corroded;
        for (int p = 0; p < spec.patches_on_structure; ++p) {
            const std::size_t pick = tower_pixels[rng.next_below(tower_pixels.size())];
            const Point center{double(pick % spec.width) + 0.5, double(pick / spec.width) + 0.5};
            const double radius = rng.next_double(spec.patch_radius_min, spec.patch_radius_max);
            const auto cells = draw_rust_patch(img, &tower_mask, center, radius, grid, rng);
            corroded.insert(cells.begin(), cells.end());
        }

        // Off-structure rust, kept clear of the tower outline by more than a
        // cell diagonal so no affected cell can intersect the outline.
        const double margin = std::hypot(grid.seg_width_px, grid.seg_height_px) + 1.0;
        for (int p = 0; p < spec.patches_off_structure; ++p) {
            const double radius = rng.next_double(spec.patch_radius_min, spec.patch_radius_max);
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                const Point center{rng.next_double(radius, spec.width - radius),
                                   rng.next_double(radius, spec.height - radius)};
                const bool clear = polygon_clearance(center, outline) > radius + margin;
                if (!clear) continue;
                const auto cells = draw_rust_patch(img, nullptr, center, radius, grid, rng);
                out.off_structure_cells.insert(cells.begin(), cells.end());
                placed = true;
            }
            if (!placed)
                throw_data("synth_generate: cannot fit off-structure patch " + std::to_string(p) +
                           " in image " + out.image_id);
        }

        out.pixels = std::move(img);
        out.grid_annotation = GridAnnotation{out.image_id, spec.n, std::move(corroded)};
        ObjectAnnotation obj;
        obj.image_id = out.image_id;
        obj.label = "tower";
        obj.mask = PolygonMask::create(outline, spec.width, spec.height);
        obj.bbox = obj.mask.bounds();
        obj.image_width = spec.width;
        obj.image_height = spec.height;
        out.object_annotation = std::move(obj);
        ds.images.push_back(std::move(out));
    }
    return ds;
}

// ---- Overlay rendering ----

namespace synth_detail {

inline void draw_line(ImageRgb& img, Point a, Point b, Rgb color) {
    int x0 = int(std::lround(a.x)), y0 = int(std::lround(a.y));
    const int x1 = int(std::lround(b.x)), y1 = int(std::lround(b.y));
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        if (img.in_bounds(x0, y0)) img.set(x0, y0, color);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace synth_detail

// Corroded cells are tinted toward red and outlined inside their own
// rectangle; the object mask outline, when given, is drawn in green.
inline ImageRgb render_overlay(const ImageRgb& image, const BinaryGridMatrix& decisions,
                               const PolygonMask* mask = nullptr) {
    const int n = decisions.n();
    if (image.width() % n != 0 || image.height() % n != 0)
        throw_data("render_overlay: image dimensions do not match the decision grid");
    const GridSpec grid = GridSpec::create(image.width(), image.height(), n);
    ImageRgb out = image;
    for (int x = 1; x <= n; ++x) {
        for (int y = 1; y <= n; ++y) {
            if (!decisions.at(x, y)) continue;
            const PixelRect r = to_pixel_rect(segment_rect(grid, {x, y}));
            for (int py = r.y0; py < r.y1; ++py) {
                for (int px = r.x0; px < r.x1; ++px) {
                    const bool border = px == r.x0 || px == r.x1 - 1 || py == r.y0 || py == r.y1 - 1;
                    const Rgb c = out.get(px, py);
                    if (border) {
                        out.set(px, py, Rgb{255, 32, 32});
                    } else {
                        out.set(px, py, Rgb{static_cast<std::uint8_t>((c.r * 13 + 255 * 7) / 20),
                                            static_cast<std::uint8_t>(c.g * 13 / 20),
                                            static_cast<std::uint8_t>(c.b * 13 / 20)});
                    }
                }
            }
        }
    }
    if (mask) {
        const auto& v = mask->vertices();
        for (std::size_t i = 0; i < v.size(); ++i)
            synth_detail::draw_line(out, v[i], v[(i + 1) % v.size()], Rgb{32, 255, 32});
    }
    return out;
}

}  // namespace corrdetect
