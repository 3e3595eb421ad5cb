// ssae - self-supervised autoencoder toolkit for visual anomaly detection.
// One subcommand per pipeline stage; stages communicate via on-disk
// artifacts under the --out run directory, each owned by one manifest.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "ssae/checkpoint.hpp"
#include "ssae/dataset.hpp"
#include "ssae/evaluation.hpp"
#include "ssae/image_io.hpp"
#include "ssae/image_ops.hpp"
#include "ssae/inference.hpp"
#include "ssae/manifest.hpp"
#include "ssae/trainer.hpp"

namespace fs = std::filesystem;
using namespace ssae;

namespace {

// Seeds omitted on the command line are generated, printed and recorded in
// the manifest so every run stays re-runnable.
uint64_t resolve_seed(int64_t flag_value) {
    if (flag_value >= 0) return static_cast<uint64_t>(flag_value);
    std::random_device rd;
    const uint64_t seed = (static_cast<uint64_t>(rd()) << 32) ^ rd();
    std::cout << "generated seed: " << seed << "\n";
    return seed;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const auto& s : split_csv(text)) out.push_back(std::stoi(s));
    return out;
}

// Categories to evaluate: explicit list, or every subdirectory of the root.
std::vector<std::string> resolve_categories(const fs::path& data, const std::string& flag) {
    if (!flag.empty() && flag != "all") return split_csv(flag);
    std::vector<std::string> cats;
    for (const auto& e : fs::directory_iterator(data))
        if (e.is_directory()) cats.push_back(e.path().filename().string());
    std::sort(cats.begin(), cats.end());
    if (cats.empty()) throw std::runtime_error("no categories under " + data.string());
    return cats;
}

struct CommonState {
    std::string from_manifest;
};

// Re-run support: --from-manifest loads the stored args as defaults; flags
// given explicitly on the command line override them.
std::vector<std::string> manifest_argv(const std::string& path, const std::string& subcmd,
                                       const std::vector<std::string>& user_args) {
    const RunManifest m = read_manifest(path);
    if (m.command != subcmd)
        throw std::runtime_error("manifest " + path + " records command '" + m.command +
                                 "', not '" + subcmd + "'");
    std::vector<std::string> argv;
    for (const auto& [k, v] : m.args) {
        if (v == "false") continue;
        if (v == "true")
            argv.push_back("--" + k);
        else
            argv.push_back("--" + k + "=" + v);
    }
    argv.insert(argv.end(), user_args.begin(), user_args.end());
    return argv;
}

void apply_threads(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
    std::string texture = "stripes";
    std::string out;
    std::string category;
    int side = 128;
    int n_train = 50;
    int n_test = 20;
    int64_t seed = -1;
    std::string defects = "blob,scratch";
    double contrast = 0.45;
    double period = 16.0;
    double amplitude = 0.35;
    double noise_std = 0.01;
    double angle = 30.0;
    double anomalous_fraction = 0.5;
    bool force = false;
};

void add_synth(CLI::App& app, SynthArgs& a) {
    app.add_option("--texture", a.texture, "Procedural texture: stripes|checker|noise")->required();
    app.add_option("--out", a.out, "Output dataset root directory")->required();
    app.add_option("--category", a.category, "Category name (default: texture name)");
    app.add_option("--side", a.side, "Image side length in pixels");
    app.add_option("--n-train", a.n_train, "Number of clean training images");
    app.add_option("--n-test", a.n_test, "Number of test images");
    app.add_option("--seed", a.seed, "RNG seed (omitted: generated and printed)");
    app.add_option("--defects", a.defects, "Comma list of injectors: blob,scratch,warp");
    app.add_option("--contrast", a.contrast, "Defect intensity shift magnitude");
    app.add_option("--period", a.period, "Texture period in pixels");
    app.add_option("--amplitude", a.amplitude, "Texture contrast around the base level");
    app.add_option("--noise-std", a.noise_std, "Per-pixel observation noise");
    app.add_option("--angle", a.angle, "Stripe direction in degrees");
    app.add_option("--anomalous-fraction", a.anomalous_fraction, "Share of test images with defects");
    app.add_flag("--force", a.force, "Overwrite an existing non-empty target");
}

int run_synth(const SynthArgs& a) {
    const uint64_t seed = resolve_seed(a.seed);
    const std::string category = a.category.empty() ? a.texture : a.category;
    const fs::path target = fs::path(a.out) / category;
    if (fs::exists(target) && !fs::is_empty(target)) {
        if (!a.force)
            throw std::runtime_error("target exists and is not empty (use --force): " +
                                     target.string());
        fs::remove_all(target);
    }

    TextureSpec spec = texture_spec_from_name(a.texture);
    spec.side = a.side;
    spec.period = a.period;
    spec.amplitude = a.amplitude;
    spec.noise_std = a.noise_std;
    spec.angle_deg = a.angle;
    spec.defect_contrast = a.contrast;
    spec.anomalous_fraction = a.anomalous_fraction;
    spec.defects.clear();
    for (const auto& d : split_csv(a.defects)) {
        if (d == "blob")
            spec.defects.push_back(DefectKind::blob);
        else if (d == "scratch")
            spec.defects.push_back(DefectKind::scratch);
        else if (d == "warp")
            spec.defects.push_back(DefectKind::warp);
        else
            throw std::invalid_argument("unknown defect injector: " + d);
    }

    const DatasetIndex index =
        make_synthetic_texture_set(spec, a.out, category, a.n_train, a.n_test, seed);
    std::cout << "wrote " << index.train.size() << " train / " << index.test.size()
              << " test images under " << target.string() << "\n";

    RunManifest m;
    m.command = "synth";
    m.args = {{"texture", a.texture},
              {"out", a.out},
              {"category", category},
              {"side", std::to_string(a.side)},
              {"n-train", std::to_string(a.n_train)},
              {"n-test", std::to_string(a.n_test)},
              {"seed", std::to_string(seed)},
              {"defects", a.defects},
              {"contrast", std::to_string(a.contrast)},
              {"period", std::to_string(a.period)},
              {"amplitude", std::to_string(a.amplitude)},
              {"noise-std", std::to_string(a.noise_std)},
              {"angle", std::to_string(a.angle)},
              {"anomalous-fraction", std::to_string(a.anomalous_fraction)},
              {"force", "true"}};
    m.artifacts = {{"dataset", category}};
    write_manifest(a.out, m);
    return 0;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
    std::string data;
    std::string category = "all";
    std::string out;
    std::string objective = "v1";
    double lambda = 0.5;
    std::string schedule = "128:667,256:667,512:666";
    double lr = 1e-4;
    int batch = 8;
    int64_t seed = -1;
    double val_fraction = 0.1;
    bool early_stop = false, no_early_stop = false;
    int patience = 5;
    int eval_interval = 50;
    int base_width = 32;
    double width_scale = 1.0;
    int input_side = 0;  // 0 = last schedule side
    std::string dilations = "1,2,4,8,16";
    int sdc_stacks = 4;
    std::string distortion = "elastic";
    int patch_min = 0, patch_max = 0;
    double alpha_min = 2.0, alpha_max = 8.0;
    double sigma_min = 4.0, sigma_max = 12.0;
    double brightness = 0.2;
    int patches_min = 1, patches_max = 1;
    std::string rotations = "0";
    bool flip_h = false, flip_v = false;
    int checkpoint_every = 0;
    bool resume = false;
    int dump_samples = 0;
    int threads = 0;
};

void add_train(CLI::App& app, TrainArgs& a) {
    app.add_option("--data", a.data, "Dataset root (MVTec layout)")->required();
    app.add_option("--category", a.category, "Category to train on (single)");
    app.add_option("--out", a.out, "Run directory")->required();
    app.add_option("--objective", a.objective, "Training objective: v1|v2|v3");
    app.add_option("--lambda", a.lambda, "Objective weighting parameter in [0,1]");
    app.add_option("--schedule", a.schedule, "Progressive schedule side:steps[,side:steps...]");
    app.add_option("--lr", a.lr, "Adam learning rate");
    app.add_option("--batch", a.batch, "Batch size");
    app.add_option("--seed", a.seed, "Master seed (omitted: generated and printed)");
    app.add_option("--val-fraction", a.val_fraction, "Held-out fraction of train/good");
    app.add_flag("--early-stop", a.early_stop, "Enable early stopping (default for v3)");
    app.add_flag("--no-early-stop", a.no_early_stop, "Disable early stopping");
    app.add_option("--patience", a.patience, "Non-improving evaluations before stopping");
    app.add_option("--eval-interval", a.eval_interval, "Steps between validation evaluations");
    app.add_option("--base-width", a.base_width, "Base channel width");
    app.add_option("--width-scale", a.width_scale, "Channel width scale for desk-scale variants");
    app.add_option("--input-side", a.input_side, "Model input side (default: last schedule side)");
    app.add_option("--dilations", a.dilations, "SDC dilation rates, comma list");
    app.add_option("--sdc-stacks", a.sdc_stacks, "Number of SDC stacks");
    app.add_option("--distortion", a.distortion, "Distortion family: elastic|black|swap");
    app.add_option("--patch-min", a.patch_min, "Min patch side in px (0 = auto)");
    app.add_option("--patch-max", a.patch_max, "Max patch side in px (0 = auto)");
    app.add_option("--alpha-min", a.alpha_min, "Min elastic displacement in px");
    app.add_option("--alpha-max", a.alpha_max, "Max elastic displacement in px");
    app.add_option("--sigma-min", a.sigma_min, "Min elastic smoothing scale in px");
    app.add_option("--sigma-max", a.sigma_max, "Max elastic smoothing scale in px");
    app.add_option("--brightness", a.brightness, "Brightness delta range for patches");
    app.add_option("--patches-min", a.patches_min, "Min patches per image");
    app.add_option("--patches-max", a.patches_max, "Max patches per image");
    app.add_option("--rotations", a.rotations, "Augmentation rotations, e.g. 0,90,180,270");
    app.add_flag("--flip-h", a.flip_h, "Enable horizontal flips");
    app.add_flag("--flip-v", a.flip_v, "Enable vertical flips");
    app.add_option("--checkpoint-every", a.checkpoint_every, "Resume snapshot interval in steps");
    app.add_flag("--resume", a.resume, "Resume from the run's snapshot");
    app.add_option("--dump-samples", a.dump_samples, "Write N distortion triptychs for audit");
    app.add_option("--threads", a.threads, "Worker threads (0 = all)");
}

int run_train(const TrainArgs& a) {
    apply_threads(a.threads);
    const uint64_t seed = resolve_seed(a.seed);

    TrainConfig cfg;
    cfg.objective.variant = objective_variant_from_name(a.objective);
    cfg.objective.lambda = a.lambda;
    cfg.objective.validate();
    cfg.learning_rate = a.lr;
    cfg.batch_size = a.batch;
    cfg.schedule = parse_schedule(a.schedule);
    cfg.seed = seed;
    cfg.val_fraction = a.val_fraction;
    cfg.early_stop = a.early_stop ||
                     (cfg.objective.variant == ObjectiveVariant::v3 && !a.no_early_stop);
    cfg.patience = a.patience;
    cfg.eval_interval = a.eval_interval;
    cfg.checkpoint_interval = a.checkpoint_every;
    cfg.dump_samples = a.dump_samples;
    cfg.dump_dir = fs::path(a.out) / "samples";

    if (a.distortion == "elastic")
        cfg.distortion.kind = DistortionKind::elastic;
    else if (a.distortion == "black")
        cfg.distortion.kind = DistortionKind::black;
    else if (a.distortion == "swap")
        cfg.distortion.kind = DistortionKind::swap;
    else
        throw std::invalid_argument("unknown distortion family: " + a.distortion);
    cfg.distortion.patch_min = a.patch_min;
    cfg.distortion.patch_max = a.patch_max;
    cfg.distortion.alpha_min = a.alpha_min;
    cfg.distortion.alpha_max = a.alpha_max;
    cfg.distortion.sigma_min = a.sigma_min;
    cfg.distortion.sigma_max = a.sigma_max;
    cfg.distortion.brightness_range = a.brightness;
    cfg.distortion.patches_min = a.patches_min;
    cfg.distortion.patches_max = a.patches_max;

    cfg.augmentation.rotations = parse_int_list(a.rotations);
    cfg.augmentation.flip_horizontal = a.flip_h;
    cfg.augmentation.flip_vertical = a.flip_v;
    cfg.validate();

    nn::ModelConfig model;
    model.input_side = a.input_side > 0 ? a.input_side : cfg.schedule.back().side;
    model.base_width = a.base_width;
    model.width_scale = a.width_scale;
    model.dilations = parse_int_list(a.dilations);
    model.sdc_stacks = a.sdc_stacks;
    model.validate();

    const auto cats = resolve_categories(a.data, a.category);
    if (cats.size() != 1)
        throw std::runtime_error("train expects exactly one category; pass --category");
    const DatasetIndex index = scan_dataset(a.data, cats[0]);

    fs::create_directories(a.out);
    const TrainResult result = train(index, model, cfg, a.out, a.resume);
    std::cout << "trained " << result.state.step << " steps, final loss "
              << (result.state.loss_history.empty() ? 0.0 : result.state.loss_history.back())
              << (result.state.early_stopped ? " (early stopped)" : "") << "\n"
              << "model checkpoint: " << (fs::path(a.out) / "model.ckpt").string() << "\n";

    RunManifest m;
    m.command = "train";
    m.args = {{"data", a.data},
              {"category", cats[0]},
              {"out", a.out},
              {"objective", a.objective},
              {"lambda", std::to_string(a.lambda)},
              {"schedule", a.schedule},
              {"lr", std::to_string(a.lr)},
              {"batch", std::to_string(a.batch)},
              {"seed", std::to_string(seed)},
              {"val-fraction", std::to_string(a.val_fraction)},
              {"early-stop", cfg.early_stop ? "true" : "false"},
              {"no-early-stop", !cfg.early_stop ? "true" : "false"},
              {"patience", std::to_string(a.patience)},
              {"eval-interval", std::to_string(a.eval_interval)},
              {"base-width", std::to_string(a.base_width)},
              {"width-scale", std::to_string(a.width_scale)},
              {"input-side", std::to_string(model.input_side)},
              {"dilations", a.dilations},
              {"sdc-stacks", std::to_string(a.sdc_stacks)},
              {"distortion", a.distortion},
              {"patch-min", std::to_string(a.patch_min)},
              {"patch-max", std::to_string(a.patch_max)},
              {"alpha-min", std::to_string(a.alpha_min)},
              {"alpha-max", std::to_string(a.alpha_max)},
              {"sigma-min", std::to_string(a.sigma_min)},
              {"sigma-max", std::to_string(a.sigma_max)},
              {"brightness", std::to_string(a.brightness)},
              {"patches-min", std::to_string(a.patches_min)},
              {"patches-max", std::to_string(a.patches_max)},
              {"rotations", a.rotations},
              {"flip-h", a.flip_h ? "true" : "false"},
              {"flip-v", a.flip_v ? "true" : "false"},
              {"checkpoint-every", std::to_string(a.checkpoint_every)},
              {"dump-samples", std::to_string(a.dump_samples)},
              {"threads", std::to_string(a.threads)}};
    m.artifacts = {{"loss_csv", "loss.csv"},
                   {"model", "model.ckpt"},
                   {"checkpoints", "checkpoints"}};
    write_manifest(a.out, m);
    return 0;
}

// -------------------------------------------------------------- calibrate

struct CalibrateArgs {
    std::string run;
    std::string data;
    std::string category;
    std::string out;
    int min_area = 16;
    double sigma = -1.0;
    int64_t seed = -1;
    double val_fraction = -1.0;
    int threads = 0;
};

void add_calibrate(CLI::App& app, CalibrateArgs& a) {
    app.add_option("--run", a.run, "Training run directory (contains model.ckpt)")->required();
    app.add_option("--data", a.data, "Dataset root (default: from the run manifest)");
    app.add_option("--category", a.category, "Category (default: from the run manifest)");
    app.add_option("--out", a.out, "Output directory (default: <run>/calibrate)");
    app.add_option("--min-area", a.min_area, "Minimum connected-component area in px");
    app.add_option("--sigma", a.sigma, "Heatmap smoothing sigma (<0 = auto)");
    app.add_option("--seed", a.seed, "Validation holdout seed (default: the training seed)");
    app.add_option("--val-fraction", a.val_fraction, "Validation fraction (default: training value)");
    app.add_option("--threads", a.threads, "Worker threads (0 = all)");
}

// The validation split must replay the training holdout, so defaults come
// from the run manifest.
void inherit_from_run(const fs::path& run, std::string& data, std::string& category, int64_t& seed,
                      double& val_fraction) {
    const RunManifest m = read_manifest(run / "manifest.json");
    if (data.empty()) data = m.args.at("data");
    if (category.empty()) category = m.args.at("category");
    if (seed < 0) seed = std::stoll(m.args.at("seed"));
    if (val_fraction < 0) val_fraction = std::stod(m.args.at("val-fraction"));
}

int run_calibrate(const CalibrateArgs& args) {
    apply_threads(args.threads);
    CalibrateArgs a = args;
    inherit_from_run(a.run, a.data, a.category, a.seed, a.val_fraction);
    const fs::path out = a.out.empty() ? fs::path(a.run) / "calibrate" : fs::path(a.out);

    auto net = load_network(fs::path(a.run) / "model.ckpt");
    DatasetIndex index = scan_dataset(a.data, a.category);
    index = hold_out_validation(index, a.val_fraction, static_cast<uint64_t>(a.seed));
    if (index.validation.empty())
        throw std::runtime_error("calibration needs a nonempty validation split");

    const int side = net->config().input_side;
    PostprocessConfig post;
    post.sigma = a.sigma;
    std::vector<AnomalyHeatmap> maps;
    for (const auto& rec : index.validation) {
        Tensor img = load_png(rec.image_path, true);
        if (img.h != side || img.w != side) img = resize_bilinear(img, side, side);
        Prediction p = predict(*net, img, post);
        maps.push_back(std::move(p.smoothed));
    }
    const double threshold = calibrate_threshold(maps, a.min_area);
    std::cout << "calibrated threshold " << threshold << " (min_area " << a.min_area << ", "
              << maps.size() << " validation images)\n";

    fs::create_directories(out);
    nlohmann::json sidecar = {{"threshold", threshold},
                              {"min_area", a.min_area},
                              {"sigma", post.sigma_for(side)},
                              {"checkpoint", (fs::path(a.run) / "model.ckpt").string()},
                              {"validation_images", maps.size()},
                              {"config_version", kConfigVersion}};
    std::ofstream(out / "threshold.json") << sidecar.dump(2) << "\n";

    RunManifest m;
    m.command = "calibrate";
    m.args = {{"run", a.run},
              {"data", a.data},
              {"category", a.category},
              {"out", out.string()},
              {"min-area", std::to_string(a.min_area)},
              {"sigma", std::to_string(a.sigma)},
              {"seed", std::to_string(a.seed)},
              {"val-fraction", std::to_string(a.val_fraction)},
              {"threads", std::to_string(a.threads)}};
    m.artifacts = {{"threshold", "threshold.json"}};
    write_manifest(out, m);
    return 0;
}

// ------------------------------------------------------------------ infer

struct InferArgs {
    std::string run;
    std::vector<std::string> inputs;
    std::string data;
    std::string category;
    std::string split = "test";
    std::string out;
    double threshold = -1.0;
    int min_area = 0;
    double sigma = -2.0;  // -2 = from sidecar / auto
    int threads = 0;
};

void add_infer(CLI::App& app, InferArgs& a) {
    app.add_option("--run", a.run, "Training run directory (contains model.ckpt)")->required();
    app.add_option("--input", a.inputs, "Input image(s); alternative to --data");
    app.add_option("--data", a.data, "Dataset root to read images from");
    app.add_option("--category", a.category, "Category inside --data");
    app.add_option("--split", a.split, "Dataset split to run on: test|train");
    app.add_option("--out", a.out, "Output directory (default: <run>/infer)");
    app.add_option("--threshold", a.threshold, "Anomaly score threshold (default: calibrated)");
    app.add_option("--min-area", a.min_area, "Minimum component area (default: calibrated)");
    app.add_option("--sigma", a.sigma, "Heatmap smoothing sigma (default: calibrated/auto)");
    app.add_option("--threads", a.threads, "Worker threads (0 = all)");
}

int run_infer(const InferArgs& args) {
    apply_threads(args.threads);
    InferArgs a = args;
    const fs::path out = a.out.empty() ? fs::path(a.run) / "infer" : fs::path(a.out);
    auto net = load_network(fs::path(a.run) / "model.ckpt");
    const int side = net->config().input_side;

    PostprocessConfig post;
    const fs::path sidecar = fs::path(a.run) / "calibrate" / "threshold.json";
    if (a.threshold >= 0.0) {
        post.threshold = a.threshold;
        post.min_area = a.min_area > 0 ? a.min_area : 16;
        post.sigma = a.sigma >= -1.0 ? a.sigma : -1.0;
    } else {
        if (!fs::exists(sidecar))
            throw std::runtime_error(
                "no threshold available: run `ssae calibrate --run " + a.run +
                "` first, or pass --threshold explicitly");
        nlohmann::json j;
        std::ifstream(sidecar) >> j;
        post.threshold = j.at("threshold").get<double>();
        post.min_area = a.min_area > 0 ? a.min_area : j.at("min_area").get<int>();
        post.sigma = a.sigma >= -1.0 ? a.sigma : j.at("sigma").get<double>();
    }

    std::vector<fs::path> images;
    for (const auto& p : a.inputs) images.emplace_back(p);
    if (images.empty()) {
        if (a.data.empty())
            throw std::runtime_error("pass --input images or --data/--category");
        const auto cats = resolve_categories(a.data, a.category);
        for (const auto& cat : cats) {
            const DatasetIndex index = scan_dataset(a.data, cat);
            const auto& recs = a.split == "train" ? index.train : index.test;
            for (const auto& rec : recs) images.push_back(rec.image_path);
        }
    }
    if (images.empty()) throw std::runtime_error("nothing to infer on");

    fs::create_directories(out);
    int flagged = 0;
    for (const auto& path : images) {
        Tensor img = load_png(path, true);
        if (img.h != side || img.w != side) img = resize_bilinear(img, side, side);
        const Prediction p = predict(*net, img, post);
        const std::string stem = path.stem().string();
        save_png(out / (stem + "_recon.png"), p.reconstruction);
        save_png(out / (stem + "_heatmap.png"), colorize_heatmap(p.smoothed.scores));
        save_npy(out / (stem + "_heatmap.npy"), p.smoothed.scores);
        save_png(out / (stem + "_seg.png"), p.detection.segmentation);
        nlohmann::json comps = nlohmann::json::array();
        for (const auto& c : p.detection.components)
            comps.push_back({{"area", c.area},
                             {"bbox", {c.top, c.left, c.bottom, c.right}},
                             {"peak", c.peak}});
        nlohmann::json rec = {{"image", path.string()},
                              {"anomalous", p.detection.anomalous},
                              {"image_score", p.detection.image_score},
                              {"threshold", post.threshold},
                              {"components", comps}};
        std::ofstream(out / (stem + "_components.json")) << rec.dump(2) << "\n";
        if (p.detection.anomalous) ++flagged;
    }
    std::cout << "inferred " << images.size() << " images, " << flagged
              << " flagged anomalous; outputs in " << out.string() << "\n";

    RunManifest m;
    m.command = "infer";
    std::string inputs_joined;
    for (const auto& p : a.inputs) inputs_joined += (inputs_joined.empty() ? "" : ",") + p;
    m.args = {{"run", a.run},          {"data", a.data},
              {"category", a.category}, {"split", a.split},
              {"out", out.string()},    {"threshold", std::to_string(post.threshold)},
              {"min-area", std::to_string(post.min_area)},
              {"sigma", std::to_string(post.sigma)},
              {"threads", std::to_string(a.threads)}};
    if (!inputs_joined.empty()) m.args["input"] = inputs_joined;
    write_manifest(out, m);
    return 0;
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
    std::string run;
    std::string data;
    std::string category;
    std::string out;
    int min_area = 16;
    double sigma = -1.0;
    int64_t seed = -1;
    double val_fraction = -1.0;
    int threads = 0;
};

void add_eval(CLI::App& app, EvalArgs& a) {
    app.add_option("--run", a.run, "Training run directory (contains model.ckpt)")->required();
    app.add_option("--data", a.data, "Dataset root (default: from the run manifest)");
    app.add_option("--category", a.category, "Categories, comma list or 'all'");
    app.add_option("--out", a.out, "Output directory (default: <run>/eval)");
    app.add_option("--min-area", a.min_area, "Minimum connected-component area in px");
    app.add_option("--sigma", a.sigma, "Heatmap smoothing sigma (<0 = auto)");
    app.add_option("--seed", a.seed, "Validation holdout seed (default: the training seed)");
    app.add_option("--val-fraction", a.val_fraction, "Validation fraction (default: training value)");
    app.add_option("--threads", a.threads, "Worker threads (0 = all)");
}

int run_eval(const EvalArgs& args) {
    apply_threads(args.threads);
    EvalArgs a = args;
    inherit_from_run(a.run, a.data, a.category, a.seed, a.val_fraction);
    const fs::path out = a.out.empty() ? fs::path(a.run) / "eval" : fs::path(a.out);

    auto net = load_network(fs::path(a.run) / "model.ckpt");
    PostprocessConfig post;
    post.sigma = a.sigma;

    MetricsReport report;
    for (const auto& cat : resolve_categories(a.data, a.category)) {
        DatasetIndex index = scan_dataset(a.data, cat);
        index = hold_out_validation(index, a.val_fraction, static_cast<uint64_t>(a.seed));
        report.rows.push_back(evaluate_category(*net, index, post, a.min_area));
    }

    fs::create_directories(out);
    std::ofstream(out / "metrics.csv") << report.to_csv();
    std::cout << report.to_table();

    RunManifest m;
    m.command = "eval";
    m.args = {{"run", a.run},
              {"data", a.data},
              {"category", a.category},
              {"out", out.string()},
              {"min-area", std::to_string(a.min_area)},
              {"sigma", std::to_string(a.sigma)},
              {"seed", std::to_string(a.seed)},
              {"val-fraction", std::to_string(a.val_fraction)},
              {"threads", std::to_string(a.threads)}};
    m.artifacts = {{"metrics_csv", "metrics.csv"}};
    write_manifest(out, m);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ssae - self-supervised autoencoder anomaly detection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    SynthArgs synth_args;
    TrainArgs train_args;
    CalibrateArgs cal_args;
    EvalArgs eval_args;
    InferArgs infer_args;

    std::string from_manifest;
    int config_version = kConfigVersion;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic texture dataset");
    auto* train_cmd = app.add_subcommand("train", "Train an autoencoder on a category");
    auto* calibrate = app.add_subcommand("calibrate", "Calibrate the anomaly threshold");
    auto* infer = app.add_subcommand("infer", "Run detection on images");
    auto* eval = app.add_subcommand("eval", "Evaluate metrics on a test split");

    for (CLI::App* sub : {synth, train_cmd, calibrate, infer, eval}) {
        sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        sub->set_config("--config", "", "Key=value config file; explicit flags take precedence");
        sub->add_option("--from-manifest", from_manifest,
                        "Re-run with the args recorded in a manifest; explicit flags override");
        sub->add_option("--config-version", config_version, "Run-config format version")
            ->check(CLI::IsMember({kConfigVersion}));
    }
    add_synth(*synth, synth_args);
    add_train(*train_cmd, train_args);
    add_calibrate(*calibrate, cal_args);
    add_infer(*infer, infer_args);
    add_eval(*eval, eval_args);

    // Pre-scan for --from-manifest: its args become the base argv, the
    // user's own flags are appended and therefore win.
    std::vector<std::string> raw(argv + 1, argv + argc);
    try {
        if (raw.size() >= 2) {
            std::string manifest_path;
            std::vector<std::string> rest;
            for (size_t i = 1; i < raw.size(); ++i) {
                const std::string& t = raw[i];
                if (t == "--from-manifest" && i + 1 < raw.size()) {
                    manifest_path = raw[++i];
                } else if (t.rfind("--from-manifest=", 0) == 0) {
                    manifest_path = t.substr(16);
                } else {
                    rest.push_back(t);
                }
            }
            if (!manifest_path.empty()) {
                const std::vector<std::string> merged = manifest_argv(manifest_path, raw[0], rest);
                raw.assign(1, raw[0]);
                raw.insert(raw.end(), merged.begin(), merged.end());
            }
        }

        std::vector<const char*> cargv = {argv[0]};
        for (const auto& s : raw) cargv.push_back(s.c_str());
        try {
            app.parse(static_cast<int>(cargv.size()), cargv.data());
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForVersion& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            app.exit(e);
            return 2;
        }

        if (synth->parsed()) return run_synth(synth_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (calibrate->parsed()) return run_calibrate(cal_args);
        if (infer->parsed()) return run_infer(infer_args);
        if (eval->parsed()) return run_eval(eval_args);
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
