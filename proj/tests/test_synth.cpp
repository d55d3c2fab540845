#include <catch2/catch.hpp>

#include "corrdetect/synth.hpp"

using namespace corrdetect;

namespace {

SyntheticSpec small_spec() {
    SyntheticSpec spec;
    spec.image_count = 3;
    spec.width = 160;
    spec.height = 160;
    spec.n = 8;
    spec.lattice_bar_px = 6;
    spec.patches_on_structure = 2;
    spec.patches_off_structure = 0;
    spec.patch_radius_min = 3;
    spec.patch_radius_max = 6;
    spec.seed = 42;
    return spec;
}

// Cells containing at least one rust-colored pixel, scanned from the raster.
std::set<SegmentIndex> scan_rust_cells(const ImageRgb& img, const GridSpec& grid) {
    std::set<SegmentIndex> cells;
    for (int py = 0; py < img.height(); ++py)
        for (int px = 0; px < img.width(); ++px)
            if (is_rust_color(img.get(px, py)))
                cells.insert({py / grid.seg_height_px + 1, px / grid.seg_width_px + 1});
    return cells;
}

}  // namespace

TEST_CASE("synth with zero patches yields all-clean annotations") {
    SyntheticSpec spec = small_spec();
    spec.patches_on_structure = 0;
    const SyntheticDataset ds = synth_generate(spec);
    REQUIRE(ds.images.size() == 3);
    for (const auto& img : ds.images) {
        CHECK(img.grid_annotation.corroded_cells.empty());
        CHECK_FALSE(img.grid_annotation.image_is_corroded());
    }
}

TEST_CASE("a patch drawn fully inside cell (3,4) annotates exactly that cell") {
    const GridSpec grid = GridSpec::create(320, 320, 8);  // 40 px cells
    ImageRgb img(320, 320, {200, 200, 200});
    Rng rng(7);
    // Cell (3,4): rows [80,120), columns [120,160). Center well inside.
    const auto cells = draw_rust_patch(img, nullptr, {140.0, 100.0}, 6.0, grid, rng);
    REQUIRE(cells.size() == 1);
    CHECK(cells.count({3, 4}) == 1);

    // Pixel-membership check: the scan agrees.
    CHECK(scan_rust_cells(img, grid) == cells);
}

TEST_CASE("synthetic generation is byte-identical per seed") {
    const SyntheticDataset a = synth_generate(small_spec());
    const SyntheticDataset b = synth_generate(small_spec());
    REQUIRE(a.images.size() == b.images.size());
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        CHECK(a.images[i].pixels == b.images[i].pixels);
        CHECK(a.images[i].grid_annotation == b.images[i].grid_annotation);
        CHECK(a.images[i].object_annotation.mask == b.images[i].object_annotation.mask);
    }

    SyntheticSpec other = small_spec();
    other.seed = 43;
    const SyntheticDataset c = synth_generate(other);
    CHECK(a.images[0].pixels != c.images[0].pixels);
}

TEST_CASE("recorded ground truth equals a brute-force pixel scan") {
    SyntheticSpec spec = small_spec();
    spec.image_count = 4;
    spec.patches_on_structure = 3;
    const GridSpec grid = GridSpec::create(spec.width, spec.height, spec.n);

    const SyntheticDataset on_only = synth_generate(spec);
    for (const auto& img : on_only.images)
        CHECK(scan_rust_cells(img.pixels, grid) == img.grid_annotation.corroded_cells);

    spec.patches_off_structure = 2;
    spec.seed = 11;
    const SyntheticDataset with_off = synth_generate(spec);
    for (const auto& img : with_off.images) {
        std::set<SegmentIndex> expected = img.grid_annotation.corroded_cells;
        expected.insert(img.off_structure_cells.begin(), img.off_structure_cells.end());
        CHECK(scan_rust_cells(img.pixels, grid) == expected);
        // Off-structure cells never overlap the recorded corrosion cells.
        for (const auto& c : img.off_structure_cells)
            CHECK(img.grid_annotation.corroded_cells.count(c) == 0);
    }
}

TEST_CASE("on-structure rust lands only on lattice pixels") {
    SyntheticSpec spec = small_spec();
    spec.patches_on_structure = 4;
    const SyntheticDataset ds = synth_generate(spec);
    for (const auto& img : ds.images) {
        const ImageDescriptor desc = img.pixels.descriptor(img.image_id);
        const PixelMask outline = rasterize_mask(img.object_annotation.mask, desc);
        for (int py = 0; py < img.pixels.height(); ++py)
            for (int px = 0; px < img.pixels.width(); ++px)
                if (is_rust_color(img.pixels.get(px, py))) {
                    // Inside the annotated tower outline (the lattice mask
                    // is a subset of it).
                    CHECK(outline.contains(px, py));
                }
    }
}

TEST_CASE("off-structure patches that cannot fit raise an error") {
    SyntheticSpec spec = small_spec();
    spec.width = 64;
    spec.height = 64;
    spec.n = 2;  // margin of a full cell leaves no room
    spec.patches_off_structure = 1;
    CHECK_THROWS_AS(synth_generate(spec), Error);
}

TEST_CASE("SyntheticSpec validation") {
    SyntheticSpec bad = small_spec();
    bad.width = 150;  // not divisible by 8
    CHECK_THROWS_AS(synth_generate(bad), Error);
    bad = small_spec();
    bad.patch_radius_max = 2;
    CHECK_THROWS_AS(synth_generate(bad), Error);
    bad = small_spec();
    bad.image_count = 0;
    CHECK_THROWS_AS(synth_generate(bad), Error);
}

TEST_CASE("render_overlay with no decisions and no mask is the identity") {
    const SyntheticDataset ds = synth_generate(small_spec());
    const ImageRgb& img = ds.images[0].pixels;
    const BinaryGridMatrix none(8);
    CHECK(render_overlay(img, none) == img);
}

TEST_CASE("render_overlay confines the tint to the decided cell") {
    ImageRgb img(80, 80, {100, 120, 140});
    BinaryGridMatrix decisions(4);  // 20 px cells
    decisions.set(2, 3, 1);
    const ImageRgb out = render_overlay(img, decisions);
    const GridSpec grid = GridSpec::create(80, 80, 4);
    const PixelRect r = to_pixel_rect(segment_rect(grid, {2, 3}));
    long diff = 0;
    for (int py = 0; py < 80; ++py)
        for (int px = 0; px < 80; ++px) {
            const bool changed = out.get(px, py) != img.get(px, py);
            const bool in_cell = px >= r.x0 && px < r.x1 && py >= r.y0 && py < r.y1;
            if (changed) {
                CHECK(in_cell);
                ++diff;
            }
        }
    CHECK(diff > 0);
}

TEST_CASE("render_overlay tints every cell for a full matrix and draws the mask") {
    ImageRgb img(40, 40, {200, 200, 200});
    BinaryGridMatrix all(2);
    for (int x = 1; x <= 2; ++x)
        for (int y = 1; y <= 2; ++y) all.set(x, y, 1);
    const ImageRgb out = render_overlay(img, all);
    const GridSpec grid = GridSpec::create(40, 40, 2);
    for (int x = 1; x <= 2; ++x)
        for (int y = 1; y <= 2; ++y) {
            const PixelRect r = to_pixel_rect(segment_rect(grid, {x, y}));
            bool any = false;
            for (int py = r.y0; py < r.y1 && !any; ++py)
                for (int px = r.x0; px < r.x1 && !any; ++px) any = out.get(px, py) != img.get(px, py);
            CHECK(any);
        }

    const PolygonMask mask = PolygonMask::create({{5, 5}, {35, 5}, {35, 35}});
    const BinaryGridMatrix none(2);
    const ImageRgb with_mask = render_overlay(img, none, &mask);
    CHECK(with_mask != img);  // outline drawn

    BinaryGridMatrix mismatched(3);
    CHECK_THROWS_AS(render_overlay(img, mismatched), Error);
}
