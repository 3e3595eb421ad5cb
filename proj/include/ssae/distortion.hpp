#pragma once

#include <filesystem>
#include <optional>

#include "ssae/tensor.hpp"

namespace ssae {

struct PatchGeometry {
    int top = 0, left = 0;   // pixels
    int height = 0, width = 0;

    bool inside(int img_h, int img_w) const {
        return top >= 0 && left >= 0 && height >= 1 && width >= 1 && top + height <= img_h &&
               left + width <= img_w;
    }
};

enum class ShapeStyle { ellipse, polygon, blob };

// Training sample triple: ground truth X, partially modified input X_hat and
// the per-pixel binary modification mask (broadcast across channels).
struct DistortionSample {
    Tensor truth;      // X
    Tensor distorted;  // X_hat
    Tensor mask;       // M, c=1, values in {0,1}
};

enum class DistortionKind { elastic, black, swap };

struct DistortionConfig {
    DistortionKind kind = DistortionKind::elastic;
    int patch_min = 0, patch_max = 0;      // 0 = auto: [side/8, side/3]
    double alpha_min = 2.0, alpha_max = 8.0;    // displacement scale, px
    double sigma_min = 4.0, sigma_max = 12.0;   // field smoothing scale, px
    double brightness_range = 0.2;          // additive delta in [-range, range]
    int patches_min = 1, patches_max = 1;   // patches per image
    int resample_budget = 16;

    void validate(int img_h, int img_w) const;
    std::pair<int, int> patch_range(int img_h, int img_w) const;

    // Rescales pixel-unit fields for a different working resolution; used by
    // the progressive schedule.
    DistortionConfig scaled(double factor) const;
};

// Uniformly samples a patch rectangle fully inside the image.
PatchGeometry sample_patch_geometry(int img_h, int img_w, int size_min, int size_max, uint64_t seed);

// Warps a patch through a smooth random displacement field with maximum
// displacement magnitude alpha, bilinear resampling, edge clamping.
// alpha == 0 returns the input untouched.
Tensor elastic_deform(const Tensor& patch, double alpha, double sigma, uint64_t seed);

// The displacement field itself, exposed for property checks: c=2 (dy, dx).
Tensor elastic_displacement_field(int h, int w, double alpha, double sigma, uint64_t seed);

// Random binary mask of the requested style; always has >= 1 set pixel.
Tensor make_shape_mask(int h, int w, ShapeStyle style, uint64_t seed);

// Pastes masked deformed content (plus brightness delta, clipped to [0,1])
// into X at the given geometry. Returns nullopt when the distorted copy is
// exactly X (degenerate sample: caller must re-sample).
std::optional<DistortionSample> compose_distortion(const Tensor& truth, const PatchGeometry& geometry,
                                                   const Tensor& deformed, const Tensor& shape,
                                                   double brightness_delta);

// Full pipeline of Fig.-style patch sampling, deformation, shape masking and
// paste-back with rejection-resampling; pure function of (X, config, seed).
DistortionSample generate_training_pair(const Tensor& truth, const DistortionConfig& config, uint64_t seed);

// Debug audit: writes X | X_hat | M side by side as one PNG.
void dump_triptych(const DistortionSample& sample, const std::filesystem::path& path);

}  // namespace ssae
