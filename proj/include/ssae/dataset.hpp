#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssae/tensor.hpp"

namespace ssae {

enum class Split { train, validation, test };

struct DatasetRecord {
    std::filesystem::path image_path;
    std::optional<std::filesystem::path> mask_path;
    std::string defect_type;  // "good" for normal images
    Split split = Split::train;

    bool is_good() const { return defect_type == "good"; }
};

// Immutable snapshot of an MVTec-AD-layout category directory:
//   <root>/<category>/train/good/*.png
//   <root>/<category>/test/<defect>/*.png
//   <root>/<category>/ground_truth/<defect>/<stem>_mask.png
struct DatasetIndex {
    std::filesystem::path root;
    std::string category;
    std::vector<DatasetRecord> train;
    std::vector<DatasetRecord> validation;
    std::vector<DatasetRecord> test;
};

// Enumerates a category in deterministic (path-sorted) order. Every defective
// test image must have a mask of identical spatial size; every file must look
// like a PNG. Violations throw with the offending file named.
DatasetIndex scan_dataset(const std::filesystem::path& root, const std::string& category);

// Moves a seeded fraction of train/good into the validation split (MVTec
// ships none). Holds out at least one image when the train set has >= 2.
DatasetIndex hold_out_validation(const DatasetIndex& index, double fraction, uint64_t seed);

// Geometric augmentation restricted to the dihedral transforms.
struct AugmentationPolicy {
    std::vector<int> rotations = {0};  // subset of {0, 90, 180, 270}; must form a subgroup
    bool flip_horizontal = false;
    bool flip_vertical = false;

    void validate() const;
    bool quarter_turns() const;

    static AugmentationPolicy none() { return {}; }
    static AugmentationPolicy full() { return {{0, 90, 180, 270}, true, true}; }
};

// Applies one policy-sampled dihedral element. Pixel multiset is preserved.
Tensor augment(const Tensor& image, const AugmentationPolicy& policy, uint64_t seed);

// ---------------------------------------------------------------------------
// Procedural texture datasets for desk-scale runs.

enum class TextureKind { stripes, checker, noise };
enum class DefectKind { blob, scratch, warp };

struct TextureSpec {
    TextureKind kind = TextureKind::stripes;
    int side = 128;
    double period = 16.0;          // stripe wavelength / checker cell in px
    double amplitude = 0.35;       // pattern contrast around base_level
    double base_level = 0.5;
    double angle_deg = 30.0;       // stripe direction
    double angle_jitter_deg = 2.0; // per-image direction jitter
    double phase_jitter = 1.0;     // per-image phase shift, fraction of period
    double noise_std = 0.01;       // observation noise added per pixel

    // Anomaly injection for test images. Kept disjoint from the training
    // distortion family by default (no elastic warp unless asked for).
    std::vector<DefectKind> defects = {DefectKind::blob, DefectKind::scratch};
    double defect_contrast = 0.45;      // intensity shift magnitude
    double defect_radius_frac = 0.06;   // blob radius as fraction of side
    double anomalous_fraction = 0.5;    // share of test images that get defects

    void validate() const;
};

TextureSpec texture_spec_from_name(const std::string& name);

// Writes an MVTec-layout dataset under <root>/<category>. Pure function of
// (spec, counts, seed): the same arguments give byte-identical trees.
DatasetIndex make_synthetic_texture_set(const TextureSpec& spec, const std::filesystem::path& root,
                                        const std::string& category, int n_train, int n_test,
                                        uint64_t seed);

}  // namespace ssae
