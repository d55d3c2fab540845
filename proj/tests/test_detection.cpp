#include <catch2/catch.hpp>

#include "corrdetect/detection.hpp"

using namespace corrdetect;

namespace {

json mask_doc(const std::string& image_path, double conf, const json& points,
              const std::string& shape_type = "polygon") {
    return json{{"imagePath", image_path},
                {"imageWidth", 100},
                {"imageHeight", 100},
                {"confidence", conf},
                {"shapes", json::array({json{{"label", "tower"}, {"shape_type", shape_type}, {"points", points}}})}};
}

// Independent component-size oracle: flood fill from a seed pixel.
long flood_fill_count(const ImageRgb& img, const ColorSpec& spec, int sx, int sy) {
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(img.width()) * img.height(), 0);
    std::vector<std::pair<int, int>> stack{{sx, sy}};
    long count = 0;
    while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) continue;
        auto& s = seen[static_cast<std::size_t>(y) * img.width() + x];
        if (s || !spec.matches(img.get(x, y))) continue;
        s = 1;
        ++count;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (dx || dy) stack.push_back({x + dx, y + dy});
    }
    return count;
}

void draw_rect(ImageRgb& img, int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) img.set(x, y, c);
}

// H-shaped lattice: two vertical posts and a crossbar.
void draw_lattice(ImageRgb& img, int ox, int oy, Rgb c) {
    draw_rect(img, ox, oy, ox + 6, oy + 40, c);
    draw_rect(img, ox + 24, oy, ox + 30, oy + 40, c);
    draw_rect(img, ox, oy + 17, ox + 30, oy + 23, c);
}

}  // namespace

TEST_CASE("load_external_masks at the published acceptance rate") {
    std::vector<json> docs;
    for (int i = 0; i < 194; ++i) {
        const double conf = i < 190 ? 0.95 : 0.85;
        docs.push_back(mask_doc("img" + std::to_string(i) + ".png", conf,
                                json::array({{10, 10}, {60, 10}, {60, 60}, {10, 60}})));
    }
    const auto masks = load_external_masks(docs, "tower");
    CHECK(masks.size() == 194);
    long pass = 0;
    for (const auto& [id, det] : masks)
        if (det.conf_o >= 0.9) ++pass;
    CHECK(pass == 190);
}

TEST_CASE("load_external_masks validates confidence and polygons") {
    const auto ok = mask_doc("a.png", 0.0, json::array({{0, 0}, {10, 0}, {10, 10}}));
    CHECK(load_external_masks({ok}, "tower").at("a").conf_o == 0.0);

    const auto two_points = mask_doc("b.png", 0.5, json::array({{0, 0}, {10, 10}}));
    CHECK_THROWS_AS(load_external_masks({two_points}, "tower"), Error);

    const auto out_of_range = mask_doc("c.png", 1.5, json::array({{0, 0}, {10, 0}, {10, 10}}));
    CHECK_THROWS_AS(load_external_masks({out_of_range}, "tower"), Error);

    CHECK_THROWS_AS(load_external_masks({ok, ok}, "tower"), Error);  // duplicate id
}

TEST_CASE("detected objects re-serialize losslessly") {
    const auto doc = mask_doc("rt.png", 0.75, json::array({{5, 5}, {40, 8}, {42, 50}, {4, 47}}));
    const auto det = parse_detected_object(doc, "tower");
    const json again = serialize_detected_object(det, 100, 100, "tower");
    const auto det2 = parse_detected_object(again, "tower");
    CHECK(det2.mask == det.mask);
    CHECK(det2.bbox == det.bbox);
    CHECK(det2.conf_o == det.conf_o);
    CHECK(det2.area_px == det.area_px);
}

TEST_CASE("a detected object's stored area matches its rasterization") {
    const auto doc = mask_doc("area.png", 0.9, json::array({{3, 3}, {50, 3}, {50, 30}, {3, 30}}));
    const auto det = parse_detected_object(doc, "tower");
    const ImageDescriptor desc{"area", 100, 100, 3};
    CHECK(det.area_px == rasterize_mask(det.mask, desc).area_px);
    CHECK(det.area_px == 47L * 27L);
}

TEST_CASE("baseline_detect finds a dark lattice on white") {
    ImageRgb img(100, 100, {245, 245, 245});
    const Rgb dark{60, 60, 60};
    draw_lattice(img, 30, 25, dark);

    const ColorSpec spec{dark, 30};
    const auto det = baseline_detect("lattice", img, spec);
    REQUIRE(det.has_value());

    const long component = flood_fill_count(img, spec, 32, 30);
    const ImageDescriptor desc{"lattice", 100, 100, 3};
    const PixelMask hull = rasterize_mask(det->mask, desc);
    CHECK(det->conf_o == Approx(double(component) / double(hull.area_px)));
    CHECK(det->area_px == hull.area_px);

    // Hull covers the lattice bounding box region.
    CHECK(det->bbox.x_min == 30.0);
    CHECK(det->bbox.x_max == 60.0);
    CHECK(det->bbox.y_min == 25.0);
    CHECK(det->bbox.y_max == 65.0);
}

TEST_CASE("baseline_detect returns nothing on a blank image") {
    const ImageRgb img(50, 50, {255, 255, 255});
    CHECK_FALSE(baseline_detect("blank", img, ColorSpec{{60, 60, 60}, 30}).has_value());
}

TEST_CASE("baseline_detect keeps the largest of two components") {
    ImageRgb img(100, 100, {255, 255, 255});
    const Rgb dark{50, 50, 50};
    draw_rect(img, 10, 10, 35, 30, dark);  // 500 px
    draw_rect(img, 70, 70, 74, 75, dark);  // 20 px
    const auto det = baseline_detect("two", img, ColorSpec{dark, 20});
    REQUIRE(det.has_value());
    CHECK(det->bbox == BoundingBox{10, 10, 35, 30});
    CHECK(det->area_px == 500);
    CHECK(det->conf_o == 1.0);  // solid rectangle fills its own hull
}

TEST_CASE("baseline_detect is translation-equivariant") {
    const Rgb dark{60, 60, 60};
    const ColorSpec spec{dark, 25};

    ImageRgb a(120, 120, {240, 240, 240});
    draw_lattice(a, 20, 30, dark);
    ImageRgb b(120, 120, {240, 240, 240});
    draw_lattice(b, 50, 45, dark);

    const auto da = baseline_detect("a", a, spec);
    const auto db = baseline_detect("b", b, spec);
    REQUIRE(da.has_value());
    REQUIRE(db.has_value());
    CHECK(db->bbox.x_min == da->bbox.x_min + 30);
    CHECK(db->bbox.y_min == da->bbox.y_min + 15);
    CHECK(db->bbox.x_max == da->bbox.x_max + 30);
    CHECK(db->bbox.y_max == da->bbox.y_max + 15);
    CHECK(db->area_px == da->area_px);
    CHECK(db->conf_o == da->conf_o);
}
