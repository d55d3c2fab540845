#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "corrdetect/annotation.hpp"
#include "corrdetect/ciss.hpp"
#include "corrdetect/detection.hpp"
#include "corrdetect/erc.hpp"
#include "corrdetect/metrics.hpp"
#include "corrdetect/scoring.hpp"
#include "corrdetect/synth.hpp"

namespace corrdetect {

namespace fs = std::filesystem;

// ---- Configuration ----
//
// The config file is one JSON document; every leaf is overridable on the
// command line by its dotted name (e.g. --set decision.tau_s=0.4).

struct PipelineConfig {
    // dataset
    std::string images_dir;
    std::string grid_annotations_dir;
    std::string object_annotations_dir;
    std::string target_label = "tower";
    // grid
    int n = 16;
    std::string grid_policy = "reject";  // reject | crop
    // split
    int split_k = 0;  // 0 = floor(2m/3)
    std::uint64_t split_seed = 1;
    // ciss
    std::uint64_t ciss_seed = 2;
    double train_fraction = 0.8;  // train/validation split of the CISS set
    bool ciss_write_crops = false;
    // scorer
    std::string scorer_mode = "train";  // train | import | oracle-rust
    std::string scorer_kind = "logistic";
    TrainConfig scorer_train{0.5, 30, 32, 3, 0.0, 8};
    std::string scores_import_path;
    // detector
    std::string detector_mode = "baseline";  // baseline | import
    ColorSpec detector_color{{60, 60, 60}, 40};
    std::string masks_import_dir;
    // erc
    double overlap_threshold = kDefaultOverlapThreshold;
    // ensemble
    std::string ensemble_kind = "logistic";
    TrainConfig ensemble_train{0.5, 150, 32, 4, 0.0, 8};
    int ensemble_folds = 4;
    std::string decision_feature_set = "FB";  // feature set used for decisions
    // decision
    DecisionConfig decision;
    std::string tau_i_mode = "fixed";  // fixed | derived
    // output
    std::string out_dir;

    GridPolicy policy() const {
        if (grid_policy == "reject") return GridPolicy::reject;
        if (grid_policy == "crop") return GridPolicy::crop;
        throw_config("grid.policy must be 'reject' or 'crop', got '" + grid_policy + "'");
    }
};

namespace cfgdetail {

inline json train_config_to_json(const TrainConfig& t) {
    return json{{"learning_rate", t.learning_rate}, {"epochs", t.epochs},     {"batch_size", t.batch_size},
                {"seed", t.seed},                   {"l2", t.l2},             {"hidden_units", t.hidden_units}};
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig base) {
    base.learning_rate = j.value("learning_rate", base.learning_rate);
    base.epochs = j.value("epochs", base.epochs);
    base.batch_size = j.value("batch_size", base.batch_size);
    base.seed = j.value("seed", base.seed);
    base.l2 = j.value("l2", base.l2);
    base.hidden_units = j.value("hidden_units", base.hidden_units);
    return base;
}

}  // namespace cfgdetail

inline json serialize_pipeline_config(const PipelineConfig& c) {
    return json{
        {"dataset",
         {{"images_dir", c.images_dir},
          {"grid_annotations_dir", c.grid_annotations_dir},
          {"object_annotations_dir", c.object_annotations_dir},
          {"target_label", c.target_label}}},
        {"grid", {{"n", c.n}, {"policy", c.grid_policy}}},
        {"split", {{"k", c.split_k}, {"seed", c.split_seed}}},
        {"ciss",
         {{"seed", c.ciss_seed}, {"train_fraction", c.train_fraction}, {"write_crops", c.ciss_write_crops}}},
        {"scorer",
         {{"mode", c.scorer_mode},
          {"kind", c.scorer_kind},
          {"train", cfgdetail::train_config_to_json(c.scorer_train)},
          {"import_path", c.scores_import_path}}},
        {"detector",
         {{"mode", c.detector_mode},
          {"color", {c.detector_color.target.r, c.detector_color.target.g, c.detector_color.target.b}},
          {"tolerance", c.detector_color.tolerance},
          {"masks_import_dir", c.masks_import_dir}}},
        {"erc", {{"overlap_threshold", c.overlap_threshold}}},
        {"ensemble",
         {{"kind", c.ensemble_kind},
          {"train", cfgdetail::train_config_to_json(c.ensemble_train)},
          {"folds", c.ensemble_folds},
          {"decision_feature_set", c.decision_feature_set}}},
        {"decision",
         {{"tau_s", c.decision.tau_s},
          {"tau_i", c.decision.tau_I},
          {"tau_i_mode", c.tau_i_mode},
          {"tau_o", c.decision.tau_o},
          {"iou_thresholds", c.decision.iou_thresholds}}},
        {"out_dir", c.out_dir}};
}

inline PipelineConfig parse_pipeline_config(const json& doc) {
    PipelineConfig c;
    const json empty = json::object();
    const json& ds = doc.contains("dataset") ? doc["dataset"] : empty;
    c.images_dir = ds.value("images_dir", c.images_dir);
    c.grid_annotations_dir = ds.value("grid_annotations_dir", c.grid_annotations_dir);
    c.object_annotations_dir = ds.value("object_annotations_dir", c.object_annotations_dir);
    c.target_label = ds.value("target_label", c.target_label);

    const json& grid = doc.contains("grid") ? doc["grid"] : empty;
    c.n = grid.value("n", c.n);
    c.grid_policy = grid.value("policy", c.grid_policy);

    const json& split = doc.contains("split") ? doc["split"] : empty;
    c.split_k = split.value("k", c.split_k);
    c.split_seed = split.value("seed", c.split_seed);

    const json& ciss = doc.contains("ciss") ? doc["ciss"] : empty;
    c.ciss_seed = ciss.value("seed", c.ciss_seed);
    c.train_fraction = ciss.value("train_fraction", c.train_fraction);
    c.ciss_write_crops = ciss.value("write_crops", c.ciss_write_crops);

    const json& scorer = doc.contains("scorer") ? doc["scorer"] : empty;
    c.scorer_mode = scorer.value("mode", c.scorer_mode);
    c.scorer_kind = scorer.value("kind", c.scorer_kind);
    if (scorer.contains("train")) c.scorer_train = cfgdetail::train_config_from_json(scorer["train"], c.scorer_train);
    c.scores_import_path = scorer.value("import_path", c.scores_import_path);

    const json& det = doc.contains("detector") ? doc["detector"] : empty;
    c.detector_mode = det.value("mode", c.detector_mode);
    if (det.contains("color")) {
        const auto rgb = det["color"].get<std::vector<int>>();
        if (rgb.size() != 3) throw_config("detector.color must be [r,g,b]");
        c.detector_color.target = {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                                   static_cast<std::uint8_t>(rgb[2])};
    }
    c.detector_color.tolerance = det.value("tolerance", c.detector_color.tolerance);
    c.masks_import_dir = det.value("masks_import_dir", c.masks_import_dir);

    const json& erc = doc.contains("erc") ? doc["erc"] : empty;
    c.overlap_threshold = erc.value("overlap_threshold", c.overlap_threshold);

    const json& ens = doc.contains("ensemble") ? doc["ensemble"] : empty;
    c.ensemble_kind = ens.value("kind", c.ensemble_kind);
    if (ens.contains("train")) c.ensemble_train = cfgdetail::train_config_from_json(ens["train"], c.ensemble_train);
    c.ensemble_folds = ens.value("folds", c.ensemble_folds);
    c.decision_feature_set = ens.value("decision_feature_set", c.decision_feature_set);

    const json& dec = doc.contains("decision") ? doc["decision"] : empty;
    c.decision.tau_s = dec.value("tau_s", c.decision.tau_s);
    c.decision.tau_I = dec.value("tau_i", c.decision.tau_I);
    c.tau_i_mode = dec.value("tau_i_mode", c.tau_i_mode);
    c.decision.tau_o = dec.value("tau_o", c.decision.tau_o);
    if (dec.contains("iou_thresholds"))
        c.decision.iou_thresholds = dec["iou_thresholds"].get<std::vector<double>>();

    c.out_dir = doc.value("out_dir", c.out_dir);

    c.decision.validate();
    c.policy();  // validates the string
    if (c.tau_i_mode != "fixed" && c.tau_i_mode != "derived")
        throw_config("decision.tau_i_mode must be 'fixed' or 'derived'");
    return c;
}

// Sets a leaf by dotted path, e.g. "decision.tau_s" = "0.4". Values parse
// as JSON scalars where possible, else as strings.
inline void apply_config_override(json& doc, const std::string& dotted, const std::string& value) {
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw_config("bad override path '" + dotted + "'");
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

inline std::uint64_t config_hash(const PipelineConfig& c) {
    return fnv1a64(serialize_pipeline_config(c).dump());
}

// ---- Run directory artifacts ----

struct RunPaths {
    fs::path root;
    fs::path registry() const { return root / "registry.json"; }
    fs::path split() const { return root / "split.json"; }
    fs::path ciss_manifest() const { return root / "ciss.csv"; }
    fs::path ciss_meta() const { return root / "ciss_meta.json"; }
    fs::path scorer() const { return root / "scorer.json"; }
    fs::path scorer_meta() const { return root / "scorer_meta.json"; }
    fs::path scores() const { return root / "scores.json"; }
    fs::path detections() const { return root / "detections.json"; }
    fs::path erc_fb() const { return root / "erc_fb.csv"; }
    fs::path erc_fc() const { return root / "erc_fc.csv"; }
    fs::path ensemble_model(FeatureSetKind k) const {
        return root / (k == FeatureSetKind::FB ? "ensemble_fb.json" : "ensemble_fc.json");
    }
    fs::path ensemble_eval() const { return root / "ensemble_eval.json"; }
    fs::path decisions() const { return root / "decisions.json"; }
    fs::path report_json() const { return root / "report.json"; }
    fs::path report_text() const { return root / "report.txt"; }
    fs::path overlays() const { return root / "overlays"; }
    fs::path manifest() const { return root / "run_manifest.json"; }
};

inline void require_artifact(const fs::path& path, const std::string& stage, const std::string& producer) {
    if (!fs::exists(path))
        throw_prereq("stage '" + stage + "' requires " + path.filename().string() + "; run stage '" + producer +
                     "' first");
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_data("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

inline std::uint64_t hash_file(const fs::path& path) { return fnv1a64(read_text_file(path.string())); }

// ---- Dataset registry (built by ingest) ----

struct RegistryImage {
    std::string image_id;
    std::string image_path;
    int width = 0;
    int height = 0;
    GridAnnotation grid_annotation;
    ObjectAnnotation object_annotation;

    ImageDescriptor descriptor() const { return {image_id, width, height, 3}; }
    bool image_level_truth() const { return grid_annotation.image_is_corroded(); }
};

struct Registry {
    int n = 0;
    int width = 0;
    int height = 0;
    std::string target_label;
    std::string grid_policy = "reject";
    std::vector<RegistryImage> images;

    GridSpec grid() const {
        return GridSpec::create(width, height, n,
                                grid_policy == "crop" ? GridPolicy::crop : GridPolicy::reject);
    }

    const RegistryImage& by_id(const std::string& id) const {
        for (const auto& img : images)
            if (img.image_id == id) return img;
        throw_data("registry: unknown image id '" + id + "'");
    }
};

inline json serialize_registry(const Registry& r) {
    json images = json::array();
    for (const auto& img : r.images) {
        images.push_back({{"image_id", img.image_id},
                          {"image_path", img.image_path},
                          {"width", img.width},
                          {"height", img.height},
                          {"grid_annotation", serialize_grid_annotation(img.grid_annotation)},
                          {"object_annotation", serialize_object_annotation(img.object_annotation)}});
    }
    return json{{"version", 1},     {"n", r.n},
                {"width", r.width}, {"height", r.height},
                {"target_label", r.target_label}, {"grid_policy", r.grid_policy},
                {"images", images}};
}

inline Registry parse_registry(const json& doc) {
    if (doc.value("version", 0) != 1) throw_data("registry: unsupported version");
    Registry r;
    r.n = doc.at("n").get<int>();
    r.width = doc.at("width").get<int>();
    r.height = doc.at("height").get<int>();
    r.target_label = doc.at("target_label").get<std::string>();
    r.grid_policy = doc.value("grid_policy", std::string{"reject"});
    for (const auto& item : doc.at("images")) {
        RegistryImage img;
        img.image_id = item.at("image_id").get<std::string>();
        img.image_path = item.at("image_path").get<std::string>();
        img.width = item.at("width").get<int>();
        img.height = item.at("height").get<int>();
        img.grid_annotation = parse_grid_annotation(item.at("grid_annotation"));
        img.object_annotation = parse_object_annotation(item.at("object_annotation"), r.target_label);
        r.images.push_back(std::move(img));
    }
    return r;
}

// ---- Stage implementations ----

class PipelineRun {
public:
    PipelineRun(PipelineConfig config) : cfg_(std::move(config)) {
        if (cfg_.out_dir.empty()) throw_config("out_dir is required");
        paths_.root = cfg_.out_dir;
        fs::create_directories(paths_.root);
    }

    const PipelineConfig& config() const { return cfg_; }
    const RunPaths& paths() const { return paths_; }

    void ingest() {
        if (cfg_.images_dir.empty() || cfg_.grid_annotations_dir.empty() || cfg_.object_annotations_dir.empty())
            throw_config("ingest: dataset.images_dir, grid_annotations_dir and object_annotations_dir are required");
        if (!fs::is_directory(cfg_.images_dir)) throw_config("ingest: no such directory " + cfg_.images_dir);

        std::vector<fs::path> image_files;
        for (const auto& entry : fs::directory_iterator(cfg_.images_dir)) {
            const auto ext = entry.path().extension().string();
            if (ext == ".png" || ext == ".ppm") image_files.push_back(entry.path());
        }
        std::sort(image_files.begin(), image_files.end());
        if (image_files.empty()) throw_data("ingest: no .png or .ppm images in " + cfg_.images_dir);

        Registry reg;
        reg.n = cfg_.n;
        reg.target_label = cfg_.target_label;
        reg.grid_policy = cfg_.grid_policy;
        for (const auto& path : image_files) {
            RegistryImage img;
            img.image_id = path.stem().string();
            img.image_path = path.string();
            const ImageRgb pixels = load_image(path.string());
            img.width = pixels.width();
            img.height = pixels.height();
            if (reg.width == 0) {
                reg.width = img.width;
                reg.height = img.height;
            } else if (reg.width != img.width || reg.height != img.height) {
                throw_data("ingest: image '" + img.image_id + "' is " + std::to_string(img.width) + "x" +
                           std::to_string(img.height) + " but the dataset is " + std::to_string(reg.width) +
                           "x" + std::to_string(reg.height));
            }

            const fs::path grid_path = fs::path(cfg_.grid_annotations_dir) / (img.image_id + ".json");
            if (!fs::exists(grid_path))
                throw_data("ingest: missing grid annotation " + grid_path.string());
            img.grid_annotation = parse_grid_annotation(load_json_file(grid_path.string()));
            if (img.grid_annotation.n != cfg_.n)
                throw_data("ingest: grid annotation '" + img.image_id + "' has n=" +
                           std::to_string(img.grid_annotation.n) + ", config says n=" + std::to_string(cfg_.n));
            if (img.grid_annotation.image_id != img.image_id)
                throw_data("ingest: grid annotation id '" + img.grid_annotation.image_id +
                           "' does not match file id '" + img.image_id + "'");

            const fs::path obj_path = fs::path(cfg_.object_annotations_dir) / (img.image_id + ".json");
            if (!fs::exists(obj_path))
                throw_data("ingest: missing object annotation " + obj_path.string());
            img.object_annotation =
                parse_object_annotation(load_json_file(obj_path.string()), cfg_.target_label, &warnings_);

            input_hashes_[path.string()] = hash_file(path);
            input_hashes_[grid_path.string()] = hash_file(grid_path);
            input_hashes_[obj_path.string()] = hash_file(obj_path);
            reg.images.push_back(std::move(img));
        }
        reg.grid();  // validates divisibility per policy
        write_text_file(paths_.registry().string(), serialize_registry(reg).dump(2) + "\n");
    }

    void split() {
        require_artifact(paths_.registry(), "split", "ingest");
        const Registry reg = load_registry();
        std::vector<std::string> ids;
        for (const auto& img : reg.images) ids.push_back(img.image_id);
        const int m = static_cast<int>(ids.size());
        const int k = cfg_.split_k > 0 ? cfg_.split_k : (2 * m) / 3;
        const DatasetSplit s = split_dataset(ids, k, cfg_.split_seed);
        write_text_file(paths_.split().string(), serialize_split(s).dump(2) + "\n");
    }

    void ciss_stage() {
        require_artifact(paths_.registry(), "ciss", "ingest");
        require_artifact(paths_.split(), "ciss", "split");
        const Registry reg = load_registry();
        const DatasetSplit s = load_split();
        std::vector<GridAnnotation> train_anns;
        for (const auto& id : s.train_ids) train_anns.push_back(reg.by_id(id).grid_annotation);
        const GridSpec grid = reg.grid();
        const TrainingSet ts = ciss(train_anns, grid, cfg_.ciss_seed);
        write_text_file(paths_.ciss_manifest().string(), training_set_to_csv(ts));
        if (cfg_.ciss_write_crops) {
            const fs::path crops = paths_.root / "crops";
            fs::create_directories(crops);
            std::map<std::string, ImageRgb> cache;
            for (const auto& sample : ts.samples) {
                auto it = cache.find(sample.image_id);
                if (it == cache.end())
                    it = cache.emplace(sample.image_id, load_image(reg.by_id(sample.image_id).image_path)).first;
                const ImageRgb crop = crop_segment(it->second, grid, sample.index);
                const std::string name = sample.image_id + "_" + std::to_string(sample.index.x) + "_" +
                                         std::to_string(sample.index.y) + ".png";
                save_png(crop, (crops / name).string());
            }
        }
        const json meta{{"seed", ts.seed},
                        {"n_pos", ts.n_pos},
                        {"n_neg_selected", ts.n_neg_selected},
                        {"imbalance_warning", ts.imbalance_warning},
                        {"samples", ts.samples.size()},
                        {"total_segments", total_segments(static_cast<long>(reg.images.size()), grid)},
                        {"train_segments", total_segments(static_cast<long>(s.train_ids.size()), grid)},
                        {"test_segments", total_segments(static_cast<long>(s.test_ids.size()), grid)}};
        write_text_file(paths_.ciss_meta().string(), meta.dump(2) + "\n");
    }

    void train_scorer() {
        if (cfg_.scorer_mode != "train")
            throw_config("train-scorer: scorer.mode is '" + cfg_.scorer_mode + "', nothing to train");
        require_artifact(paths_.registry(), "train-scorer", "ingest");
        require_artifact(paths_.ciss_manifest(), "train-scorer", "ciss");
        const Registry reg = load_registry();
        const GridSpec grid = reg.grid();
        const auto samples = training_set_from_csv(read_text_file(paths_.ciss_manifest().string()));
        TrainingSet ts;
        ts.samples = samples;
        ts.seed = cfg_.ciss_seed;
        const auto parts = train_validation_split(ts, cfg_.train_fraction, cfg_.ciss_seed);

        std::map<std::string, ImageRgb> cache;
        const auto lookup = [this, &reg, &cache](const std::string& id) -> const ImageRgb& {
            auto it = cache.find(id);
            if (it == cache.end()) it = cache.emplace(id, load_image(reg.by_id(id).image_path)).first;
            return it->second;
        };

        TrainReport report;
        const BaselineScorerParams params = train_baseline(parts.train, lookup, grid,
                                                           model_kind_from_string(cfg_.scorer_kind),
                                                           cfg_.scorer_train, &report);
        const BaselineScorer scorer(params);
        auto accuracy_on = [&](const std::vector<SegmentSample>& set) {
            if (set.empty()) return 0.0;
            long correct = 0;
            for (const auto& s : set) {
                const double v = scorer.score(segment_view(lookup(s.image_id), grid, s.index));
                if ((v >= 0.5) == (s.label == 1)) ++correct;
            }
            return static_cast<double>(correct) / static_cast<double>(set.size());
        };
        write_text_file(paths_.scorer().string(), serialize_model(params.model).dump(2) + "\n");
        const json meta{{"initial_loss", report.initial_loss},
                        {"final_loss", report.final_loss},
                        {"train_accuracy", accuracy_on(parts.train)},
                        {"validation_accuracy", accuracy_on(parts.validation)},
                        {"train_samples", parts.train.size()},
                        {"validation_samples", parts.validation.size()}};
        write_text_file(paths_.scorer_meta().string(), meta.dump(2) + "\n");
    }

    void import_scores() {
        if (cfg_.scores_import_path.empty()) throw_config("import-scores: scorer.import_path is required");
        require_artifact(paths_.registry(), "import-scores", "ingest");
        const Registry reg = load_registry();
        const json doc = load_json_file(cfg_.scores_import_path);
        const ExternalScores ext = load_external_scores(doc, reg.n);
        if (ext.empty_warning) warnings_.push_back("import-scores: score file contains no images");
        input_hashes_[cfg_.scores_import_path] = hash_file(cfg_.scores_import_path);
        std::vector<ImageScoreResult> results;
        for (const auto& [id, cs] : ext.per_image)
            results.push_back(make_score_result(id, cs, cfg_.decision.tau_s));
        write_text_file(paths_.scores().string(),
                        serialize_scores(results, reg.n, cfg_.decision.tau_s).dump() + "\n");
    }

    void score() {
        require_artifact(paths_.registry(), "score", "ingest");
        require_artifact(paths_.split(), "score", "split");
        if (cfg_.scorer_mode == "import") {
            require_artifact(paths_.scores(), "score", "import-scores");
            return;  // imported scores are already the stage artifact
        }
        const Registry reg = load_registry();
        const DatasetSplit s = load_split();
        const GridSpec grid = reg.grid();

        std::unique_ptr<SegmentScorer> scorer;
        if (cfg_.scorer_mode == "train") {
            require_artifact(paths_.scorer(), "score", "train-scorer");
            const Model model = parse_model(load_json_file(paths_.scorer().string()));
            scorer = std::make_unique<BaselineScorer>(BaselineScorerParams{model});
        } else if (cfg_.scorer_mode == "oracle-rust") {
            scorer = std::make_unique<FunctionScorer>("oracle-rust", [](const SegmentView& v) {
                for (int y = 0; y < v.height; ++y)
                    for (int x = 0; x < v.width; ++x)
                        if (is_rust_color(v.get(x, y))) return 1.0;
                return 0.0;
            });
        } else {
            throw_config("score: unknown scorer.mode '" + cfg_.scorer_mode + "'");
        }

        std::vector<ImageScoreResult> results;
        for (const auto& id : s.test_ids) {
            const ImageRgb pixels = load_image(reg.by_id(id).image_path);
            results.push_back(score_image(*scorer, id, pixels, grid, cfg_.decision.tau_s));
        }
        write_text_file(paths_.scores().string(),
                        serialize_scores(results, reg.n, cfg_.decision.tau_s).dump() + "\n");
    }

    void detect_baseline() {
        if (cfg_.detector_mode != "baseline")
            throw_config("detect-baseline: detector.mode is '" + cfg_.detector_mode + "'");
        require_artifact(paths_.registry(), "detect-baseline", "ingest");
        require_artifact(paths_.split(), "detect-baseline", "split");
        const Registry reg = load_registry();
        const DatasetSplit s = load_split();
        json detections = json::array();
        json missing = json::array();
        for (const auto& id : s.test_ids) {
            const RegistryImage& entry = reg.by_id(id);
            const ImageRgb pixels = load_image(entry.image_path);
            const auto det = baseline_detect(id, pixels, cfg_.detector_color);
            if (det)
                detections.push_back(
                    serialize_detected_object(*det, entry.width, entry.height, cfg_.target_label));
            else
                missing.push_back(id);
        }
        const json doc{{"version", 1}, {"target_label", cfg_.target_label}, {"detections", detections},
                       {"no_detection", missing}};
        write_text_file(paths_.detections().string(), doc.dump() + "\n");
    }

    void import_masks() {
        if (cfg_.masks_import_dir.empty()) throw_config("import-masks: detector.masks_import_dir is required");
        if (!fs::is_directory(cfg_.masks_import_dir))
            throw_config("import-masks: no such directory " + cfg_.masks_import_dir);
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(cfg_.masks_import_dir))
            if (entry.path().extension() == ".json") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        std::vector<json> docs;
        for (const auto& f : files) {
            docs.push_back(load_json_file(f.string()));
            input_hashes_[f.string()] = hash_file(f);
        }
        load_external_masks(docs, cfg_.target_label);  // validation pass
        json detections = json::array();
        for (const auto& d : docs) detections.push_back(d);
        const json doc{{"version", 1}, {"target_label", cfg_.target_label}, {"detections", detections},
                       {"no_detection", json::array()}};
        write_text_file(paths_.detections().string(), doc.dump() + "\n");
    }

    void erc_stage() {
        require_artifact(paths_.registry(), "erc", "ingest");
        require_artifact(paths_.split(), "erc", "split");
        require_artifact(paths_.scores(), "erc", "score");
        require_artifact(paths_.detections(), "erc", cfg_.detector_mode == "import" ? "import-masks"
                                                                                    : "detect-baseline");
        const Registry reg = load_registry();
        const DatasetSplit s = load_split();
        const GridSpec grid = reg.grid();
        const auto scores = load_score_map(reg.n);
        const auto detections = load_detection_map();

        std::vector<ImageDescriptor> descs;
        std::vector<BinaryGridMatrix> truths;
        std::vector<ErcInput> inputs;
        descs.reserve(s.test_ids.size());
        truths.reserve(s.test_ids.size());
        for (const auto& id : s.test_ids) {
            const auto score_it = scores.find(id);
            if (score_it == scores.end())
                throw_data("erc: no scores for test image '" + id + "' (incomplete score file?)");
            const RegistryImage& entry = reg.by_id(id);
            descs.push_back(entry.descriptor());
            truths.push_back(build_label_matrix(entry.grid_annotation));
            ErcInput in;
            in.score = &score_it->second;
            const auto det_it = detections.find(id);
            in.detection = det_it == detections.end() ? nullptr : &det_it->second;
            in.truth = &truths.back();
            in.descriptor = &descs.back();
            inputs.push_back(in);
        }
        const auto [fc, fb] = erc_features(inputs, grid, cfg_.overlap_threshold);
        write_text_file(paths_.erc_fc().string(), feature_set_to_csv(fc));
        write_text_file(paths_.erc_fb().string(), feature_set_to_csv(fb));
    }

    void train_ensemble_stage() {
        require_artifact(paths_.erc_fb(), "train-ensemble", "erc");
        require_artifact(paths_.erc_fc(), "train-ensemble", "erc");
        const ModelKind kind = model_kind_from_string(cfg_.ensemble_kind);
        json eval_doc{{"kind", cfg_.ensemble_kind}, {"folds", cfg_.ensemble_folds}};
        for (const FeatureSetKind fsk : {FeatureSetKind::FB, FeatureSetKind::FC}) {
            const auto path = fsk == FeatureSetKind::FB ? paths_.erc_fb() : paths_.erc_fc();
            const EnsembleFeatureSet fs = feature_set_from_csv(read_text_file(path.string()), fsk);
            const Model model = train_ensemble(fs, kind, cfg_.ensemble_train);
            write_text_file(paths_.ensemble_model(fsk).string(), serialize_model(model).dump(2) + "\n");
            const FoldMetrics fm = evaluate_ensemble(cfg_.ensemble_folds, fs, kind, cfg_.ensemble_train);
            json folds = json::array();
            for (const auto& f : fm.folds)
                folds.push_back({{"accuracy", f.accuracy},
                                 {"precision", f.precision},
                                 {"recall", f.recall},
                                 {"f1", f.f1}});
            eval_doc[to_string(fsk)] = {{"folds", folds},
                                        {"mean",
                                         {{"accuracy", fm.per_fold_mean.accuracy},
                                          {"precision", fm.per_fold_mean.precision},
                                          {"recall", fm.per_fold_mean.recall},
                                          {"f1", fm.per_fold_mean.f1}}}};
        }
        write_text_file(paths_.ensemble_eval().string(), eval_doc.dump(2) + "\n");
    }

    void decide() {
        require_artifact(paths_.registry(), "decide", "ingest");
        require_artifact(paths_.split(), "decide", "split");
        require_artifact(paths_.scores(), "decide", "score");
        require_artifact(paths_.detections(), "decide", "detect-baseline");
        const FeatureSetKind fsk = feature_set_kind_from_string(cfg_.decision_feature_set);
        require_artifact(paths_.ensemble_model(fsk), "decide", "train-ensemble");
        const auto erc_path = fsk == FeatureSetKind::FB ? paths_.erc_fb() : paths_.erc_fc();
        require_artifact(erc_path, "decide", "erc");

        const Registry reg = load_registry();
        const DatasetSplit s = load_split();
        const auto scores = load_score_map(reg.n);
        const auto detections = load_detection_map();
        const Model ensemble = parse_model(load_json_file(paths_.ensemble_model(fsk).string()));
        const EnsembleFeatureSet rows = feature_set_from_csv(read_text_file(erc_path.string()), fsk);

        double tau_i = cfg_.decision.tau_I;
        if (cfg_.tau_i_mode == "derived") {
            std::vector<BinaryGridMatrix> train_truths;
            for (const auto& id : s.train_ids)
                train_truths.push_back(build_label_matrix(reg.by_id(id).grid_annotation));
            tau_i = derive_tau_I(train_truths);
        }

        // Group ensemble rows per image, row-major within the image.
        std::map<std::string, EnsembleFeatureSet> rows_by_image;
        for (const auto& r : rows.rows) {
            auto& fs = rows_by_image[r.image_id];
            fs.kind = fsk;
            fs.rows.push_back(r);
        }

        json per_image = json::array();
        for (const auto& id : s.test_ids) {
            const auto score_it = scores.find(id);
            if (score_it == scores.end()) throw_data("decide: no scores for test image '" + id + "'");
            const ImageScoreResult& sr = score_it->second;
            json entry{{"image_id", id},
                       {"slp", flatten(sr.b_hat)},
                       {"conf_c", sr.conf_c},
                       {"ilp", ilp_decide(sr.conf_c, tau_i)}};
            const auto det_it = detections.find(id);
            if (det_it != detections.end()) {
                entry["conf_o"] = det_it->second.conf_o;
                entry["iop"] = iop_decide(det_it->second, cfg_.decision.tau_o);
            } else {
                entry["conf_o"] = nullptr;
                entry["iop"] = false;
            }
            const auto rows_it = rows_by_image.find(id);
            if (rows_it == rows_by_image.end())
                throw_data("decide: no fused feature rows for test image '" + id + "'");
            const auto preds = predict_ensemble(ensemble, rows_it->second);
            std::vector<std::uint8_t> cells(preds.size());
            for (std::size_t i = 0; i < preds.size(); ++i) cells[i] = preds[i].decision;
            entry["ensemble"] = cells;
            per_image.push_back(std::move(entry));
        }
        const json doc{{"version", 1},
                       {"tau_s", cfg_.decision.tau_s},
                       {"tau_i", tau_i},
                       {"tau_i_mode", cfg_.tau_i_mode},
                       {"tau_o", cfg_.decision.tau_o},
                       {"feature_set", to_string(fsk)},
                       {"per_image", per_image}};
        write_text_file(paths_.decisions().string(), doc.dump() + "\n");
    }

    void evaluate() {
        require_artifact(paths_.registry(), "evaluate", "ingest");
        require_artifact(paths_.split(), "evaluate", "split");
        require_artifact(paths_.decisions(), "evaluate", "decide");
        require_artifact(paths_.detections(), "evaluate", "detect-baseline");
        require_artifact(paths_.ensemble_eval(), "evaluate", "train-ensemble");
        const Registry reg = load_registry();
        const DatasetSplit s = load_split();
        const json decisions = load_json_file(paths_.decisions().string());
        const auto detections = load_detection_map();
        const json ens_eval = load_json_file(paths_.ensemble_eval().string());
        const GridSpec grid = reg.grid();

        ConfusionCounts slp_counts, ensemble_counts, ilp_counts;
        long iop_present = 0;
        std::vector<double> mask_ious, bbox_ious;
        std::vector<bool> accepted;
        for (const auto& entry : decisions.at("per_image")) {
            const std::string id = entry.at("image_id").get<std::string>();
            const RegistryImage& img = reg.by_id(id);
            const BinaryGridMatrix truth = build_label_matrix(img.grid_annotation);
            const auto truth_flat = flatten(truth);
            const auto slp = entry.at("slp").get<std::vector<std::uint8_t>>();
            const auto ens = entry.at("ensemble").get<std::vector<std::uint8_t>>();
            if (slp.size() != truth_flat.size() || ens.size() != truth_flat.size())
                throw_data("evaluate: decision grids do not match the dataset grid");
            for (std::size_t i = 0; i < truth_flat.size(); ++i) {
                slp_counts.add(slp[i] != 0, truth_flat[i] != 0);
                ensemble_counts.add(ens[i] != 0, truth_flat[i] != 0);
            }
            ilp_counts.add(entry.at("ilp").get<bool>(), img.image_level_truth());
            const bool iop = entry.at("iop").get<bool>();
            if (iop) ++iop_present;

            const auto det_it = detections.find(id);
            if (det_it != detections.end()) {
                const ImageDescriptor desc = img.descriptor();
                mask_ious.push_back(iou_mask(det_it->second.mask, img.object_annotation.mask, desc));
                bbox_ious.push_back(iou_bbox(det_it->second.bbox, img.object_annotation.bbox));
                accepted.push_back(iop);
            }
        }

        const ClassificationMetrics slp_m = confusion_metrics(slp_counts);
        const ClassificationMetrics ens_m = confusion_metrics(ensemble_counts);
        const ClassificationMetrics ilp_m = confusion_metrics(ilp_counts);
        const double iop_accuracy =
            static_cast<double>(iop_present) / static_cast<double>(s.test_ids.size());

        json report{{"version", 1},
                    {"config_hash", hex64(config_hash(cfg_))},
                    {"images", {{"total", reg.images.size()},
                                {"train", s.train_ids.size()},
                                {"test", s.test_ids.size()}}},
                    {"grid", {{"n", grid.n}, {"seg_width", grid.seg_width_px}, {"seg_height", grid.seg_height_px}}},
                    {"tau", {{"tau_s", decisions.at("tau_s")}, {"tau_i", decisions.at("tau_i")},
                             {"tau_o", decisions.at("tau_o")}}},
                    {"scorer_slp", metrics_json(slp_m)},
                    {"scorer_ilp", metrics_json(ilp_m)},
                    {"ensemble_slp", metrics_json(ens_m)},
                    {"ensemble_kfold", ens_eval},
                    {"iop_accuracy", iop_accuracy}};

        bool any_accepted = false;
        for (bool a : accepted) any_accepted |= a;
        std::vector<double> mask_precisions, bbox_precisions;
        if (any_accepted) {
            for (double th : cfg_.decision.iou_thresholds) {
                mask_precisions.push_back(precision_at_iou(mask_ious, accepted, th));
                bbox_precisions.push_back(precision_at_iou(bbox_ious, accepted, th));
            }
            report["iou"] = {{"thresholds", cfg_.decision.iou_thresholds},
                             {"mask_precision", mask_precisions},
                             {"bbox_precision", bbox_precisions},
                             {"ap_mask", average_precision(mask_precisions)},
                             {"ap_bbox", average_precision(bbox_precisions)}};
        } else {
            report["iou"] = nullptr;
        }

        write_text_file(paths_.report_json().string(), report.dump(2) + "\n");
        write_text_file(paths_.report_text().string(), render_text_report(report));
    }

    void render() {
        require_artifact(paths_.registry(), "render", "ingest");
        require_artifact(paths_.decisions(), "render", "decide");
        const Registry reg = load_registry();
        const json decisions = load_json_file(paths_.decisions().string());
        const auto detections = load_detection_map();
        fs::create_directories(paths_.overlays());
        for (const auto& entry : decisions.at("per_image")) {
            const std::string id = entry.at("image_id").get<std::string>();
            const RegistryImage& img = reg.by_id(id);
            const ImageRgb pixels = load_image(img.image_path);
            const auto cells = entry.at("ensemble").get<std::vector<std::uint8_t>>();
            const BinaryGridMatrix grid_decisions = unflatten_binary(reg.n, cells);
            const auto det_it = detections.find(id);
            const PolygonMask* mask = det_it == detections.end() ? nullptr : &det_it->second.mask;
            const ImageRgb overlay = render_overlay(pixels, grid_decisions, mask);
            save_png(overlay, (paths_.overlays() / (id + ".png")).string());
        }
    }

    // Merges with an existing manifest so per-stage CLI invocations keep
    // accumulating run history and input hashes.
    void write_manifest(std::vector<std::string> stages_run) {
        json inputs = json::object();
        if (fs::exists(paths_.manifest())) {
            const json old = load_json_file(paths_.manifest().string());
            if (old.contains("inputs")) inputs = old["inputs"];
            if (old.contains("stages_run")) {
                std::vector<std::string> history = old["stages_run"].get<std::vector<std::string>>();
                history.insert(history.end(), stages_run.begin(), stages_run.end());
                stages_run = std::move(history);
            }
        }
        for (const auto& [path, hash] : input_hashes_) inputs[path] = hex64(hash);
        json stage_versions = json::object();
        for (const auto& name : known_stages()) stage_versions[name] = kStageVersion;
        const json doc{{"version", 1},
                       {"config", serialize_pipeline_config(cfg_)},
                       {"config_hash", hex64(config_hash(cfg_))},
                       {"seeds",
                        {{"split", cfg_.split_seed},
                         {"ciss", cfg_.ciss_seed},
                         {"scorer", cfg_.scorer_train.seed},
                         {"ensemble", cfg_.ensemble_train.seed}}},
                       {"stage_versions", stage_versions},
                       {"stages_run", stages_run},
                       {"inputs", inputs},
                       {"warnings", warnings_}};
        write_text_file(paths_.manifest().string(), doc.dump(2) + "\n");
    }

    const std::vector<std::string>& warnings() const { return warnings_; }

    void run_stage(const std::string& name) {
        if (name == "ingest") return ingest();
        if (name == "split") return split();
        if (name == "ciss") return ciss_stage();
        if (name == "train-scorer") return train_scorer();
        if (name == "import-scores") return import_scores();
        if (name == "score") return score();
        if (name == "import-masks") return import_masks();
        if (name == "detect-baseline") return detect_baseline();
        if (name == "erc") return erc_stage();
        if (name == "train-ensemble") return train_ensemble_stage();
        if (name == "decide") return decide();
        if (name == "evaluate") return evaluate();
        if (name == "render") return render();
        throw_config("unknown stage '" + name + "'");
    }

    static const std::vector<std::string>& known_stages() {
        static const std::vector<std::string> stages{
            "ingest", "split",       "ciss",   "train-scorer",   "import-scores", "score", "import-masks",
            "detect-baseline", "erc", "train-ensemble", "decide", "evaluate", "render"};
        return stages;
    }

private:
    static constexpr const char* kStageVersion = "1";

    Registry load_registry() const { return parse_registry(load_json_file(paths_.registry().string())); }
    DatasetSplit load_split() const { return parse_split(load_json_file(paths_.split().string())); }

    std::map<std::string, ImageScoreResult> load_score_map(int n) const {
        const json doc = load_json_file(paths_.scores().string());
        const ExternalScores ext = load_external_scores(doc, n);
        const double tau = ext.tau_s.value_or(cfg_.decision.tau_s);
        std::map<std::string, ImageScoreResult> out;
        for (const auto& [id, cs] : ext.per_image) out.emplace(id, make_score_result(id, cs, tau));
        return out;
    }

    std::map<std::string, DetectedObject> load_detection_map() const {
        const json doc = load_json_file(paths_.detections().string());
        if (doc.value("version", 0) != 1) throw_data("detections.json: unsupported version");
        std::vector<json> docs;
        for (const auto& d : doc.at("detections")) docs.push_back(d);
        return load_external_masks(docs, doc.at("target_label").get<std::string>());
    }

    static json metrics_json(const ClassificationMetrics& m) {
        return json{{"accuracy", m.accuracy},
                    {"precision", m.precision},
                    {"recall", m.recall},
                    {"f1", m.f1},
                    {"degenerate", m.degenerate}};
    }

    static std::string format4(double v) {
        std::ostringstream out;
        out << std::fixed << std::setprecision(4) << v;
        return out.str();
    }

    static std::string render_text_report(const json& r) {
        std::ostringstream out;
        out << "corrdetect evaluation report\n";
        out << "============================\n\n";
        out << "config hash: " << r.at("config_hash").get<std::string>() << "\n";
        out << "images: " << r["images"]["total"] << " total, " << r["images"]["train"] << " train, "
            << r["images"]["test"] << " test\n";
        out << "grid: n=" << r["grid"]["n"] << " (" << r["grid"]["seg_width"] << "x" << r["grid"]["seg_height"]
            << " px segments)\n";
        out << "thresholds: tau_s=" << format4(r["tau"]["tau_s"].get<double>())
            << " tau_i=" << format4(r["tau"]["tau_i"].get<double>())
            << " tau_o=" << format4(r["tau"]["tau_o"].get<double>()) << "\n\n";

        auto table_row = [&out](const std::string& label, const json& m) {
            out << "  " << std::left << std::setw(14) << label << std::right;
            for (const char* key : {"accuracy", "precision", "recall", "f1"})
                out << std::setw(10) << format4(m.at(key).get<double>());
            out << "\n";
        };
        out << "segment/image-level prediction (scorer)\n";
        out << "  " << std::left << std::setw(14) << "level" << std::right << std::setw(10) << "acc"
            << std::setw(10) << "prec" << std::setw(10) << "rec" << std::setw(10) << "f1\n";
        table_row("SLP", r["scorer_slp"]);
        table_row("ILP", r["scorer_ilp"]);
        out << "\nensemble segment prediction\n";
        table_row("resub", r["ensemble_slp"]);
        for (const char* set : {"FB", "FC"}) {
            if (!r["ensemble_kfold"].contains(set)) continue;
            table_row(std::string("kfold-") + set, r["ensemble_kfold"][set]["mean"]);
        }
        out << "\nindustrial object prediction\n";
        out << "  accuracy " << format4(r.at("iop_accuracy").get<double>()) << "\n";

        if (!r.at("iou").is_null()) {
            const auto& iou = r["iou"];
            out << "\nIoU precision over thresholds (accepted detections)\n  " << std::left << std::setw(8)
                << "set" << std::right;
            for (const auto& th : iou["thresholds"]) out << std::setw(10) << format4(th.get<double>());
            out << std::setw(10) << "AP" << "\n";
            auto iou_row = [&out](const std::string& label, const json& values, double ap) {
                out << "  " << std::left << std::setw(8) << label << std::right;
                for (const auto& v : values) out << std::setw(10) << format4(v.get<double>());
                out << std::setw(10) << format4(ap) << "\n";
            };
            iou_row("mask", iou["mask_precision"], iou["ap_mask"].get<double>());
            iou_row("bbox", iou["bbox_precision"], iou["ap_bbox"].get<double>());
        } else {
            out << "\nIoU precision: no accepted detections\n";
        }
        return out.str();
    }

    PipelineConfig cfg_;
    RunPaths paths_;
    std::vector<std::string> warnings_;
    std::map<std::string, std::uint64_t> input_hashes_;
};

// Canonical dependency ordering of a requested stage list; empty input
// means the full default pipeline.
inline std::vector<std::string> order_stages(std::vector<std::string> stages) {
    if (stages.empty())
        return {"ingest", "split",          "ciss",   "score",    "detect-baseline",
                "erc",    "train-ensemble", "decide", "evaluate", "render"};
    for (const auto& requested : stages) {
        bool found = false;
        for (const auto& known : PipelineRun::known_stages()) found |= known == requested;
        if (!found) throw_config("unknown stage '" + requested + "'");
    }
    std::vector<std::string> ordered;
    for (const auto& known : PipelineRun::known_stages())
        for (const auto& requested : stages)
            if (requested == known) ordered.push_back(known);
    return ordered;
}

inline void run_pipeline(const PipelineConfig& cfg, std::vector<std::string> stages) {
    PipelineRun run(cfg);
    const std::vector<std::string> ordered = order_stages(std::move(stages));
    for (const auto& stage : ordered) run.run_stage(stage);
    run.write_manifest(ordered);
}

// Writes a generated synthetic dataset into the images/grid/object layout
// that ingest consumes.
struct SynthOutput {
    std::string images_dir;
    std::string grid_annotations_dir;
    std::string object_annotations_dir;
};

inline SynthOutput write_synthetic_dataset(const SyntheticDataset& ds, const std::string& root_dir,
                                           const std::string& image_ext = ".png") {
    const fs::path root(root_dir);
    const fs::path images = root / "images";
    const fs::path grids = root / "grid_annotations";
    const fs::path objects = root / "object_annotations";
    fs::create_directories(images);
    fs::create_directories(grids);
    fs::create_directories(objects);
    for (const auto& img : ds.images) {
        save_image(img.pixels, (images / (img.image_id + image_ext)).string());
        write_text_file((grids / (img.image_id + ".json")).string(),
                        serialize_grid_annotation(img.grid_annotation).dump(2) + "\n");
        write_text_file((objects / (img.image_id + ".json")).string(),
                        serialize_object_annotation(img.object_annotation, image_ext).dump(2) + "\n");
    }
    return {images.string(), grids.string(), objects.string()};
}

}  // namespace corrdetect
