#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrdetect/common.hpp"
#include "corrdetect/geometry.hpp"
#include "corrdetect/types.hpp"

namespace corrdetect {

using json = nlohmann::json;

inline json parse_json_text(const std::string& text, const std::string& context) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw_data(context + ": malformed JSON");
    return doc;
}

inline json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw_data("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_json_text(text, path);
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw_data("cannot open " + path + " for writing");
    f << text;
    if (!f) throw_data("write failed for " + path);
}

// ---- Grid annotation (canonical format, one document per image) ----
//
//   { "image_id": "img_0001", "n": 16, "corroded_cells": [[x, y], ...] }
//
// Cells are 1-based [row, column] pairs.

struct GridAnnotation {
    std::string image_id;
    int n = 0;
    std::set<SegmentIndex> corroded_cells;

    bool image_is_corroded() const { return !corroded_cells.empty(); }
    friend bool operator==(const GridAnnotation&, const GridAnnotation&) = default;
};

inline GridAnnotation parse_grid_annotation(const json& doc) {
    if (!doc.is_object() || !doc.contains("image_id") || !doc.contains("n") || !doc.contains("corroded_cells"))
        throw_data("grid annotation: missing image_id, n or corroded_cells");
    GridAnnotation ann;
    if (!doc["image_id"].is_string() || !doc["n"].is_number_integer() || !doc["corroded_cells"].is_array())
        throw_data("grid annotation: wrong field types");
    ann.image_id = doc["image_id"].get<std::string>();
    ann.n = doc["n"].get<int>();
    if (ann.image_id.empty()) throw_data("grid annotation: empty image_id");
    if (ann.n < 1) throw_data("grid annotation: n must be >= 1");
    for (const auto& cell : doc["corroded_cells"]) {
        if (!cell.is_array() || cell.size() != 2 || !cell[0].is_number_integer() || !cell[1].is_number_integer())
            throw_data("grid annotation '" + ann.image_id + "': cells must be [x,y] integer pairs");
        SegmentIndex idx{cell[0].get<int>(), cell[1].get<int>()};
        if (!idx.in_grid(ann.n))
            throw_data("grid annotation '" + ann.image_id + "': cell (" + std::to_string(idx.x) + "," +
                       std::to_string(idx.y) + ") out of range for n=" + std::to_string(ann.n));
        if (!ann.corroded_cells.insert(idx).second)
            throw_data("grid annotation '" + ann.image_id + "': duplicate cell (" + std::to_string(idx.x) + "," +
                       std::to_string(idx.y) + ")");
    }
    return ann;
}

inline GridAnnotation parse_grid_annotation_text(const std::string& text) {
    return parse_grid_annotation(parse_json_text(text, "grid annotation"));
}

inline json serialize_grid_annotation(const GridAnnotation& ann) {
    json cells = json::array();
    for (const auto& c : ann.corroded_cells) cells.push_back({c.x, c.y});
    return json{{"image_id", ann.image_id}, {"n", ann.n}, {"corroded_cells", cells}};
}

// b_xy = 1 iff the cell is annotated as corrosion.
inline BinaryGridMatrix build_label_matrix(const GridAnnotation& ann) {
    BinaryGridMatrix m(ann.n);
    for (const auto& c : ann.corroded_cells) m.set(c, 1);
    return m;
}

// ---- Object annotation (LabelMe subset) ----

struct ObjectAnnotation {
    std::string image_id;
    std::string label;
    PolygonMask mask;
    BoundingBox bbox;  // tight bounds of mask
    int image_width = 0;
    int image_height = 0;
};

namespace detail {

inline std::vector<Point> parse_labelme_points(const json& shape, const std::string& context) {
    if (!shape.contains("points") || !shape["points"].is_array())
        throw_data(context + ": shape has no points array");
    std::vector<Point> pts;
    for (const auto& p : shape["points"]) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw_data(context + ": points must be [px,py] number pairs");
        pts.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return pts;
}

inline std::vector<Point> rectangle_to_polygon(const std::vector<Point>& corners, const std::string& context) {
    if (corners.size() != 2) throw_data(context + ": rectangle shape needs exactly 2 points");
    const double x0 = std::min(corners[0].x, corners[1].x);
    const double x1 = std::max(corners[0].x, corners[1].x);
    const double y0 = std::min(corners[0].y, corners[1].y);
    const double y1 = std::max(corners[0].y, corners[1].y);
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

inline std::string image_id_from_path(const std::string& image_path) {
    return std::filesystem::path(image_path).stem().string();
}

}  // namespace detail

// Picks the polygon with the target label. When several match, the largest
// by shoelace area wins and a warning is recorded through `warn`.
inline ObjectAnnotation parse_object_annotation(const json& doc, const std::string& target_label,
                                                std::vector<std::string>* warnings = nullptr) {
    if (!doc.is_object() || !doc.contains("imagePath") || !doc.contains("shapes"))
        throw_data("object annotation: missing imagePath or shapes");
    ObjectAnnotation ann;
    ann.image_id = detail::image_id_from_path(doc["imagePath"].get<std::string>());
    ann.label = target_label;
    ann.image_width = doc.value("imageWidth", 0);
    ann.image_height = doc.value("imageHeight", 0);
    const std::string ctx = "object annotation '" + ann.image_id + "'";

    std::optional<PolygonMask> best;
    double best_area = -1.0;
    int matches = 0;
    for (const auto& shape : doc["shapes"]) {
        if (!shape.is_object() || shape.value("label", std::string{}) != target_label) continue;
        ++matches;
        std::vector<Point> pts = detail::parse_labelme_points(shape, ctx);
        const std::string shape_type = shape.value("shape_type", std::string{"polygon"});
        if (shape_type == "rectangle") {
            pts = detail::rectangle_to_polygon(pts, ctx);
        } else if (shape_type != "polygon") {
            throw_data(ctx + ": unsupported shape_type '" + shape_type + "'");
        }
        if (pts.size() < 3) throw_data(ctx + ": polygon needs at least 3 points");
        PolygonMask mask = PolygonMask::create(std::move(pts), ann.image_width, ann.image_height);
        const double area = std::abs(mask.signed_area());
        if (area > best_area) {
            best_area = area;
            best = std::move(mask);
        }
    }
    if (!best) throw_data(ctx + ": no shape labeled '" + target_label + "'");
    if (matches > 1 && warnings)
        warnings->push_back(ann.image_id + ": " + std::to_string(matches) + " shapes labeled '" + target_label +
                            "', kept the largest");
    ann.mask = *best;
    ann.bbox = ann.mask.bounds();
    return ann;
}

inline ObjectAnnotation parse_object_annotation_text(const std::string& text, const std::string& target_label,
                                                     std::vector<std::string>* warnings = nullptr) {
    return parse_object_annotation(parse_json_text(text, "object annotation"), target_label, warnings);
}

inline json serialize_object_annotation(const ObjectAnnotation& ann, const std::string& image_ext = ".png") {
    json points = json::array();
    for (const auto& v : ann.mask.vertices()) points.push_back({v.x, v.y});
    json shape{{"label", ann.label}, {"points", points}, {"shape_type", "polygon"}};
    return json{{"imagePath", ann.image_id + image_ext},
                {"imageWidth", ann.image_width},
                {"imageHeight", ann.image_height},
                {"shapes", json::array({shape})}};
}

// ---- Train/test split ----

struct DatasetSplit {
    std::vector<std::string> train_ids;  // k images
    std::vector<std::string> test_ids;   // m - k images
    std::uint64_t seed = 0;
};

inline DatasetSplit split_dataset(std::vector<std::string> ids, int k, std::uint64_t seed) {
    const int m = static_cast<int>(ids.size());
    if (k <= 0 || k >= m)
        throw_config("split_dataset: k=" + std::to_string(k) + " out of range for m=" + std::to_string(m));
    Rng rng(seed);
    rng.shuffle(ids);
    DatasetSplit split;
    split.seed = seed;
    split.train_ids.assign(ids.begin(), ids.begin() + k);
    split.test_ids.assign(ids.begin() + k, ids.end());
    return split;
}

inline json serialize_split(const DatasetSplit& split) {
    return json{{"seed", split.seed}, {"train_ids", split.train_ids}, {"test_ids", split.test_ids}};
}

inline DatasetSplit parse_split(const json& doc) {
    DatasetSplit split;
    if (!doc.contains("train_ids") || !doc.contains("test_ids")) throw_data("split: missing id lists");
    split.seed = doc.value("seed", 0ULL);
    split.train_ids = doc["train_ids"].get<std::vector<std::string>>();
    split.test_ids = doc["test_ids"].get<std::vector<std::string>>();
    return split;
}

}  // namespace corrdetect
