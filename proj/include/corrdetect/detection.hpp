#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrdetect/annotation.hpp"
#include "corrdetect/geometry.hpp"
#include "corrdetect/image.hpp"

namespace corrdetect {

// One detected target object per image (single-object setting). Absence of
// a detection is represented by an empty optional, never by a zero-confidence
// placeholder: downstream fusion must distinguish "no object" from "weak".
struct DetectedObject {
    std::string image_id;
    PolygonMask mask;
    BoundingBox bbox;    // tight bounds of mask
    double conf_o = 0.0; // in [0,1]
    long area_px = 0;    // rasterize_mask area

    static DetectedObject create(std::string image_id, PolygonMask mask, double conf_o,
                                 const ImageDescriptor& image) {
        if (!(conf_o >= 0.0 && conf_o <= 1.0))
            throw_data("DetectedObject '" + image_id + "': confidence " + std::to_string(conf_o) +
                       " outside [0,1]");
        DetectedObject d;
        d.image_id = std::move(image_id);
        d.bbox = mask.bounds();
        d.area_px = rasterize_mask(mask, image).area_px;
        d.mask = std::move(mask);
        d.conf_o = conf_o;
        return d;
    }
};

class MaskProvider {
public:
    virtual ~MaskProvider() = default;
    virtual std::optional<DetectedObject> detect(const std::string& image_id, const ImageRgb& image) const = 0;
    virtual std::string name() const = 0;
};

// ---- Predicted-mask file: LabelMe subset + top-level "confidence" ----

inline DetectedObject parse_detected_object(const json& doc, const std::string& target_label) {
    if (!doc.contains("confidence")) throw_data("mask file: missing top-level confidence");
    const double conf = doc["confidence"].get<double>();
    ObjectAnnotation ann = parse_object_annotation(doc, target_label);
    ImageDescriptor desc{ann.image_id, ann.image_width, ann.image_height, 3};
    return DetectedObject::create(ann.image_id, ann.mask, conf, desc);
}

inline std::map<std::string, DetectedObject> load_external_masks(const std::vector<json>& documents,
                                                                 const std::string& target_label) {
    std::map<std::string, DetectedObject> out;
    for (const auto& doc : documents) {
        DetectedObject det = parse_detected_object(doc, target_label);
        const std::string id = det.image_id;
        if (!out.emplace(id, std::move(det)).second)
            throw_data("mask file: duplicate prediction for image '" + id + "'");
    }
    return out;
}

inline json serialize_detected_object(const DetectedObject& det, int image_w, int image_h,
                                      const std::string& label, const std::string& image_ext = ".png") {
    ObjectAnnotation ann;
    ann.image_id = det.image_id;
    ann.label = label;
    ann.mask = det.mask;
    ann.bbox = det.bbox;
    ann.image_width = image_w;
    ann.image_height = image_h;
    json doc = serialize_object_annotation(ann, image_ext);
    doc["confidence"] = det.conf_o;
    return doc;
}

// ---- Color-threshold baseline detector ----

struct ColorSpec {
    Rgb target{60, 60, 60};
    int tolerance = 40;  // max per-channel absolute difference

    bool matches(Rgb c) const {
        return std::abs(int(c.r) - int(target.r)) <= tolerance &&
               std::abs(int(c.g) - int(target.g)) <= tolerance &&
               std::abs(int(c.b) - int(target.b)) <= tolerance;
    }
};

namespace detail {

struct Component {
    std::vector<std::pair<int, int>> pixels;  // (x, y)
};

// 8-connected components over the color-match predicate.
inline std::vector<Component> connected_components(const ImageRgb& img, const ColorSpec& spec) {
    const int w = img.width(), h = img.height();
    std::vector<std::uint8_t> matched(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (spec.matches(img.get(x, y))) matched[static_cast<std::size_t>(y) * w + x] = 1;

    std::vector<Component> comps;
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
    std::vector<std::pair<int, int>> stack;
    for (int y0 = 0; y0 < h; ++y0) {
        for (int x0 = 0; x0 < w; ++x0) {
            const std::size_t i0 = static_cast<std::size_t>(y0) * w + x0;
            if (!matched[i0] || seen[i0]) continue;
            Component comp;
            stack.assign(1, {x0, y0});
            seen[i0] = 1;
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                comp.pixels.emplace_back(x, y);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                        if (matched[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            stack.emplace_back(nx, ny);
                        }
                    }
                }
            }
            comps.push_back(std::move(comp));
        }
    }
    return comps;
}

// Hull over pixel squares: per scan row only the extreme pixels' corners
// can be hull vertices.
inline std::vector<Point> component_hull(const Component& comp) {
    std::map<int, std::pair<int, int>> row_extents;  // y -> (min_x, max_x)
    for (auto [x, y] : comp.pixels) {
        auto it = row_extents.find(y);
        if (it == row_extents.end())
            row_extents.emplace(y, std::make_pair(x, x));
        else {
            it->second.first = std::min(it->second.first, x);
            it->second.second = std::max(it->second.second, x);
        }
    }
    std::vector<Point> corners;
    corners.reserve(row_extents.size() * 4);
    for (auto& [y, ext] : row_extents) {
        corners.push_back({double(ext.first), double(y)});
        corners.push_back({double(ext.first), double(y + 1)});
        corners.push_back({double(ext.second + 1), double(y)});
        corners.push_back({double(ext.second + 1), double(y + 1)});
    }
    return convex_hull(std::move(corners));
}

}  // namespace detail

// Synthetic-test stand-in for a real instance-segmentation detector:
// threshold pixels near the target color, keep the largest 8-connected
// component, return its convex hull with conf_o = component / hull pixels.
inline std::optional<DetectedObject> baseline_detect(const std::string& image_id, const ImageRgb& image,
                                                     const ColorSpec& spec) {
    auto comps = detail::connected_components(image, spec);
    if (comps.empty()) return std::nullopt;
    const auto* largest = &comps[0];
    for (const auto& c : comps)
        if (c.pixels.size() > largest->pixels.size()) largest = &c;

    std::vector<Point> hull = detail::component_hull(*largest);
    if (hull.size() < 3) return std::nullopt;  // component too thin for a polygon

    PolygonMask mask = PolygonMask::create(std::move(hull), image.width(), image.height());
    const ImageDescriptor desc = image.descriptor(image_id);
    const PixelMask raster = rasterize_mask(mask, desc);
    if (raster.area_px == 0) return std::nullopt;
    const double conf =
        std::min(1.0, static_cast<double>(largest->pixels.size()) / static_cast<double>(raster.area_px));

    DetectedObject det;
    det.image_id = image_id;
    det.bbox = mask.bounds();
    det.mask = std::move(mask);
    det.conf_o = conf;
    det.area_px = raster.area_px;
    return det;
}

class ColorBaselineProvider : public MaskProvider {
public:
    explicit ColorBaselineProvider(ColorSpec spec) : spec_(spec) {}
    std::optional<DetectedObject> detect(const std::string& image_id, const ImageRgb& image) const override {
        return baseline_detect(image_id, image, spec_);
    }
    std::string name() const override { return "color-baseline"; }

private:
    ColorSpec spec_;
};

}  // namespace corrdetect
