// corrdetect: grid-based corrosion detection pipeline over drone imagery.
//
// One subcommand per pipeline stage plus `run` (several stages in order)
// and `synth` (synthetic dataset generator). Exit codes: 0 success,
// 2 configuration error, 3 missing prerequisite, 4 data validation failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "corrdetect/pipeline.hpp"

using namespace corrdetect;

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value with dotted keys
    std::optional<std::uint64_t> seed;
    std::optional<int> n;
    std::optional<double> tau_s, tau_i, tau_o;
    std::optional<std::string> out;
    std::optional<std::string> images, grid_annotations, object_annotations;
};

void add_common_flags(CLI::App& cmd, CommonFlags& flags) {
    cmd.add_option("--config", flags.config_path, "pipeline configuration file (JSON)");
    cmd.add_option("--set", flags.overrides,
                   "override a config value by dotted name, e.g. --set decision.tau_s=0.4");
    cmd.add_option("--seed", flags.seed, "master seed (derives split/ciss/scorer/ensemble seeds)");
    cmd.add_option("--n", flags.n, "segments per image side");
    cmd.add_option("--tau-s", flags.tau_s, "segment-level confidence threshold");
    cmd.add_option("--tau-i", flags.tau_i, "image-level confidence threshold");
    cmd.add_option("--tau-o", flags.tau_o, "object confidence threshold");
    cmd.add_option("--out", flags.out, "run directory");
    cmd.add_option("--images", flags.images, "dataset image directory");
    cmd.add_option("--grid-annotations", flags.grid_annotations, "grid annotation directory");
    cmd.add_option("--object-annotations", flags.object_annotations, "object annotation directory");
}

PipelineConfig build_config(const CommonFlags& flags) {
    json doc = json::object();
    if (!flags.config_path.empty()) doc = load_json_file(flags.config_path);
    for (const auto& kv : flags.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw_config("--set expects key=value, got '" + kv + "'");
        apply_config_override(doc, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (flags.seed) {
        apply_config_override(doc, "split.seed", std::to_string(*flags.seed));
        apply_config_override(doc, "ciss.seed", std::to_string(*flags.seed + 1));
        apply_config_override(doc, "scorer.train.seed", std::to_string(*flags.seed + 2));
        apply_config_override(doc, "ensemble.train.seed", std::to_string(*flags.seed + 3));
    }
    if (flags.n) apply_config_override(doc, "grid.n", std::to_string(*flags.n));
    if (flags.tau_s) apply_config_override(doc, "decision.tau_s", std::to_string(*flags.tau_s));
    if (flags.tau_i) apply_config_override(doc, "decision.tau_i", std::to_string(*flags.tau_i));
    if (flags.tau_o) apply_config_override(doc, "decision.tau_o", std::to_string(*flags.tau_o));
    if (flags.out) apply_config_override(doc, "out_dir", *flags.out);
    if (flags.images) apply_config_override(doc, "dataset.images_dir", *flags.images);
    if (flags.grid_annotations)
        apply_config_override(doc, "dataset.grid_annotations_dir", *flags.grid_annotations);
    if (flags.object_annotations)
        apply_config_override(doc, "dataset.object_annotations_dir", *flags.object_annotations);
    return parse_pipeline_config(doc);
}

int run_stages(const CommonFlags& flags, std::vector<std::string> stages) {
    const PipelineConfig cfg = build_config(flags);
    PipelineRun run(cfg);
    const std::vector<std::string> ordered = order_stages(std::move(stages));
    for (const auto& stage : ordered) {
        run.run_stage(stage);
        std::cout << "stage " << stage << ": done\n";
    }
    run.write_manifest(ordered);
    for (const auto& w : run.warnings()) std::cerr << "warning: " << w << "\n";
    std::cout << "ok -> " << cfg.out_dir << "\n";
    return 0;
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        const std::string item = csv.substr(start, comma == std::string::npos ? comma : comma - start);
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"corrdetect: grid-based structural corrosion detection pipeline"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string stages_csv;

    // Stage subcommands; each executes exactly one pipeline stage.
    struct StageCmd {
        const char* name;
        const char* desc;
    };
    const std::vector<StageCmd> stage_cmds{
        {"ingest", "scan the dataset and build the image registry"},
        {"split", "split image ids into train and test sets"},
        {"ciss", "build the balanced segment training set"},
        {"train-scorer", "train the baseline segment scorer on the CISS set"},
        {"score", "score every test image segment"},
        {"import-scores", "ingest externally computed confidence matrices"},
        {"import-masks", "ingest externally predicted object masks"},
        {"detect-baseline", "detect the target object by color thresholding"},
        {"erc", "fuse scores and object geometry into FB/FC feature sets"},
        {"train-ensemble", "train and cross-validate the fusion classifiers"},
        {"decide", "apply the SLP/ILP/IOP decision rules"},
        {"evaluate", "compute the evaluation report"},
        {"render", "render per-image corrosion overlays"},
    };
    for (const auto& sc : stage_cmds) {
        CLI::App* cmd = app.add_subcommand(sc.name, sc.desc);
        add_common_flags(*cmd, flags);
    }

    CLI::App* run_cmd = app.add_subcommand("run", "run several stages in dependency order");
    add_common_flags(*run_cmd, flags);
    run_cmd->add_option("--stages", stages_csv, "comma-separated stage list (default: all)");

    // Synthetic dataset generator.
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic annotated dataset");
    SyntheticSpec synth_spec;
    std::string synth_out;
    std::string synth_format = "png";
    synth_cmd->add_option("--out", synth_out, "output dataset directory")->required();
    synth_cmd->add_option("--m", synth_spec.image_count, "number of images");
    synth_cmd->add_option("--width", synth_spec.width, "image width in pixels");
    synth_cmd->add_option("--height", synth_spec.height, "image height in pixels");
    synth_cmd->add_option("--n", synth_spec.n, "segments per side");
    synth_cmd->add_option("--bar", synth_spec.lattice_bar_px, "lattice bar thickness");
    synth_cmd->add_option("--patches-on", synth_spec.patches_on_structure, "rust patches on the structure");
    synth_cmd->add_option("--patches-off", synth_spec.patches_off_structure, "rust patches off the structure");
    synth_cmd->add_option("--radius-min", synth_spec.patch_radius_min, "min patch radius");
    synth_cmd->add_option("--radius-max", synth_spec.patch_radius_max, "max patch radius");
    synth_cmd->add_flag("--no-clutter", [&synth_spec](std::int64_t) { synth_spec.background_clutter = false; },
                        "disable background clutter");
    synth_cmd->add_option("--seed", synth_spec.seed, "generator seed");
    synth_cmd->add_option("--format", synth_format, "image format: png or ppm")
        ->check(CLI::IsMember({"png", "ppm"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth_cmd->parsed()) {
            const SyntheticDataset ds = synth_generate(synth_spec);
            const SynthOutput dirs = write_synthetic_dataset(ds, synth_out, "." + synth_format);
            long corroded = 0;
            for (const auto& img : ds.images) corroded += static_cast<long>(img.grid_annotation.corroded_cells.size());
            std::cout << "ok: " << ds.images.size() << " images -> " << dirs.images_dir << "\n"
                      << "    " << corroded << " corroded cells, annotations in "
                      << dirs.grid_annotations_dir << " and " << dirs.object_annotations_dir << "\n";
            return 0;
        }
        if (run_cmd->parsed()) return run_stages(flags, split_csv(stages_csv));
        for (const auto& sc : stage_cmds)
            if (app.get_subcommand(sc.name)->parsed()) return run_stages(flags, {sc.name});
        throw_config("no subcommand given");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
