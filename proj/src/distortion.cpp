#include "ssae/distortion.hpp"

#include <algorithm>
#include <cmath>

#include "ssae/image_io.hpp"
#include "ssae/image_ops.hpp"
#include "ssae/rng.hpp"

namespace ssae {

void DistortionConfig::validate(int img_h, int img_w) const {
    const auto [lo, hi] = patch_range(img_h, img_w);
    if (lo < 1 || hi < lo) throw std::invalid_argument("distortion patch size range is invalid");
    if (hi > std::min(img_h, img_w))
        throw std::invalid_argument("distortion patch size exceeds image dims");
    if (alpha_min < 0 || alpha_max < alpha_min) throw std::invalid_argument("bad alpha range");
    if (sigma_min <= 0 || sigma_max < sigma_min) throw std::invalid_argument("bad sigma range");
    if (patches_min < 1 || patches_max < patches_min) throw std::invalid_argument("bad patch count range");
    if (resample_budget < 1) throw std::invalid_argument("resample budget must be >= 1");
}

std::pair<int, int> DistortionConfig::patch_range(int img_h, int img_w) const {
    if (patch_min > 0 && patch_max > 0) return {patch_min, patch_max};
    const int side = std::min(img_h, img_w);
    return {std::max(4, side / 8), std::max(6, side / 3)};
}

DistortionConfig DistortionConfig::scaled(double factor) const {
    DistortionConfig out = *this;
    if (patch_min > 0) out.patch_min = std::max(2, static_cast<int>(std::lround(patch_min * factor)));
    if (patch_max > 0) out.patch_max = std::max(out.patch_min, static_cast<int>(std::lround(patch_max * factor)));
    out.alpha_min = alpha_min * factor;
    out.alpha_max = alpha_max * factor;
    out.sigma_min = std::max(0.5, sigma_min * factor);
    out.sigma_max = std::max(out.sigma_min, sigma_max * factor);
    return out;
}

PatchGeometry sample_patch_geometry(int img_h, int img_w, int size_min, int size_max, uint64_t seed) {
    if (size_min < 1 || size_max < size_min)
        throw std::invalid_argument("patch size range must satisfy 1 <= min <= max");
    if (size_max > std::min(img_h, img_w))
        throw std::invalid_argument("patch size range infeasible for image dims");
    Rng rng(derive_seed(seed, 0x67656f)) /* "geo" */;
    PatchGeometry g;
    g.height = rng.uniform_int(size_min, size_max);
    g.width = rng.uniform_int(size_min, size_max);
    g.top = rng.uniform_int(0, img_h - g.height);
    g.left = rng.uniform_int(0, img_w - g.width);
    return g;
}

Tensor elastic_displacement_field(int h, int w, double alpha, double sigma, uint64_t seed) {
    if (alpha < 0) throw std::invalid_argument("elastic_deform: alpha must be >= 0");
    if (sigma <= 0) throw std::invalid_argument("elastic_deform: sigma must be > 0");
    Tensor field = Tensor::image(2, h, w);
    if (alpha == 0.0) return field;

    Rng rng(derive_seed(seed, 0x656c61)) /* "ela" */;
    for (float& f : field.v) f = static_cast<float>(rng.uniform(-1.0, 1.0));
    field = gaussian_blur(field, sigma);

    // Scale so the largest per-pixel displacement magnitude equals alpha.
    double max_mag = 0.0;
    for (size_t i = 0; i < field.plane(); ++i) {
        const double dy = field.v[i], dx = field.v[field.plane() + i];
        max_mag = std::max(max_mag, std::sqrt(dy * dy + dx * dx));
    }
    const double scale = max_mag > 0.0 ? alpha / max_mag : 0.0;
    for (float& f : field.v) f = static_cast<float>(f * scale);
    return field;
}

namespace {

float bilinear_clamped(const float* plane, int h, int w, double y, double x) {
    y = std::clamp(y, 0.0, h - 1.0);
    x = std::clamp(x, 0.0, w - 1.0);
    const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
    const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double fy = y - y0, fx = x - x0;
    const double top = plane[y0 * w + x0] * (1 - fx) + plane[y0 * w + x1] * fx;
    const double bot = plane[y1 * w + x0] * (1 - fx) + plane[y1 * w + x1] * fx;
    return static_cast<float>(top * (1 - fy) + bot * fy);
}

}  // namespace

Tensor elastic_deform(const Tensor& patch, double alpha, double sigma, uint64_t seed) {
    if (patch.n != 1) throw std::invalid_argument("elastic_deform expects n=1");
    if (alpha == 0.0) {
        if (sigma <= 0) throw std::invalid_argument("elastic_deform: sigma must be > 0");
        return patch;
    }
    const Tensor field = elastic_displacement_field(patch.h, patch.w, alpha, sigma, seed);
    Tensor out = Tensor::image(patch.c, patch.h, patch.w);
    for (int ci = 0; ci < patch.c; ++ci) {
        const float* src = patch.channel(0, ci);
        for (int y = 0; y < patch.h; ++y)
            for (int x = 0; x < patch.w; ++x) {
                const double sy = y + field.at(0, 0, y, x);
                const double sx = x + field.at(0, 1, y, x);
                const float v = bilinear_clamped(src, patch.h, patch.w, sy, sx);
                out.at(0, ci, y, x) = std::clamp(v, 0.0f, 1.0f);
            }
    }
    return out;
}

Tensor make_shape_mask(int h, int w, ShapeStyle style, uint64_t seed) {
    if (h < 1 || w < 1) throw std::invalid_argument("shape mask dims must be >= 1x1");
    Rng rng(derive_seed(seed, 0x736870)) /* "shp" */;
    Tensor mask = Tensor::image(1, h, w);

    switch (style) {
        case ShapeStyle::ellipse: {
            const double cy = rng.uniform(0.25 * h, 0.75 * h);
            const double cx = rng.uniform(0.25 * w, 0.75 * w);
            const double ry = rng.uniform(0.2 * h, 0.55 * h);
            const double rx = rng.uniform(0.2 * w, 0.55 * w);
            const double rot = rng.uniform(0.0, M_PI);
            const double cr = std::cos(rot), sr = std::sin(rot);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double dy = y - cy, dx = x - cx;
                    const double u = (dx * cr + dy * sr) / std::max(0.5, rx);
                    const double v = (-dx * sr + dy * cr) / std::max(0.5, ry);
                    if (u * u + v * v <= 1.0) mask.at(0, 0, y, x) = 1.0f;
                }
            break;
        }
        case ShapeStyle::polygon: {
            // star-shaped polygon around a centre, scanline fill by angle test
            const int k = rng.uniform_int(3, 8);
            const double cy = rng.uniform(0.35 * h, 0.65 * h);
            const double cx = rng.uniform(0.35 * w, 0.65 * w);
            std::vector<double> ang(k), rad(k);
            for (int i = 0; i < k; ++i) {
                ang[i] = 2.0 * M_PI * (i + rng.uniform(0.0, 0.8)) / k;
                rad[i] = rng.uniform(0.25, 0.55) * std::min(h, w);
            }
            std::sort(ang.begin(), ang.end());
            auto radius_at = [&](double a) {
                int i = 0;
                while (i < k && ang[i] <= a) ++i;
                const int j0 = (i - 1 + k) % k, j1 = i % k;
                double a0 = ang[j0], a1 = ang[j1];
                if (a1 <= a0) a1 += 2.0 * M_PI;
                double aa = a < a0 ? a + 2.0 * M_PI : a;
                const double t = (aa - a0) / std::max(1e-9, a1 - a0);
                return rad[j0] * (1 - t) + rad[j1] * t;
            };
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double dy = y - cy, dx = x - cx;
                    const double d = std::sqrt(dy * dy + dx * dx);
                    double a = std::atan2(dy, dx);
                    if (a < 0) a += 2.0 * M_PI;
                    if (d <= radius_at(a)) mask.at(0, 0, y, x) = 1.0f;
                }
            break;
        }
        case ShapeStyle::blob: {
            Tensor field = Tensor::image(1, h, w);
            for (float& f : field.v) f = static_cast<float>(rng.uniform());
            field = gaussian_blur(field, std::max(1.0, std::min(h, w) / 6.0));
            std::vector<float> sorted(field.v);
            std::sort(sorted.begin(), sorted.end());
            const double q = rng.uniform(0.4, 0.75);
            const float thr = sorted[static_cast<size_t>(q * (sorted.size() - 1))];
            for (size_t i = 0; i < field.v.size(); ++i)
                if (field.v[i] >= thr) mask.v[i] = 1.0f;
            break;
        }
    }
    // tiny patches can defeat the rasterisers; fall back to the centre pixel
    bool any = false;
    for (float f : mask.v)
        if (f != 0.0f) {
            any = true;
            break;
        }
    if (!any) mask.at(0, 0, h / 2, w / 2) = 1.0f;
    return mask;
}

std::optional<DistortionSample> compose_distortion(const Tensor& truth, const PatchGeometry& geometry,
                                                   const Tensor& deformed, const Tensor& shape,
                                                   double brightness_delta) {
    if (truth.n != 1) throw std::invalid_argument("compose_distortion expects n=1 images");
    if (!geometry.inside(truth.h, truth.w))
        throw std::invalid_argument("patch geometry outside image bounds");
    if (deformed.h != geometry.height || deformed.w != geometry.width || deformed.c != truth.c)
        throw std::invalid_argument("deformed patch dims do not match geometry: " + deformed.shape_str());
    if (shape.h != geometry.height || shape.w != geometry.width || shape.c != 1)
        throw std::invalid_argument("shape mask dims do not match geometry: " + shape.shape_str());

    DistortionSample s;
    s.truth = truth;
    s.distorted = truth;
    s.mask = Tensor::image(1, truth.h, truth.w);

    bool any_change = false;
    for (int py = 0; py < geometry.height; ++py)
        for (int px = 0; px < geometry.width; ++px) {
            if (shape.at(0, 0, py, px) == 0.0f) continue;
            const int y = geometry.top + py, x = geometry.left + px;
            s.mask.at(0, 0, y, x) = 1.0f;
            for (int ci = 0; ci < truth.c; ++ci) {
                const float v = static_cast<float>(
                    std::clamp(deformed.at(0, ci, py, px) + brightness_delta, 0.0, 1.0));
                if (v != s.truth.at(0, ci, y, x)) any_change = true;
                s.distorted.at(0, ci, y, x) = v;
            }
        }
    if (!any_change) return std::nullopt;  // X_hat == X exactly: resample
    return s;
}

DistortionSample generate_training_pair(const Tensor& truth, const DistortionConfig& config,
                                        uint64_t seed) {
    config.validate(truth.h, truth.w);
    const auto [size_min, size_max] = config.patch_range(truth.h, truth.w);
    Rng top(derive_seed(seed, 0x706169)) /* "pai" */;
    const int n_patches = top.uniform_int(config.patches_min, config.patches_max);

    DistortionSample sample;
    sample.truth = truth;
    sample.distorted = truth;
    sample.mask = Tensor::image(1, truth.h, truth.w);

    for (int p = 0; p < n_patches; ++p) {
        std::optional<DistortionSample> got;
        for (int attempt = 0; attempt < config.resample_budget && !got; ++attempt) {
            const uint64_t sub = derive_seed(seed, 11, p, attempt);
            Rng rng(sub);
            const PatchGeometry geo =
                sample_patch_geometry(truth.h, truth.w, size_min, size_max, sub);
            Tensor patch = Tensor::image(truth.c, geo.height, geo.width);
            for (int ci = 0; ci < truth.c; ++ci)
                for (int y = 0; y < geo.height; ++y)
                    for (int x = 0; x < geo.width; ++x)
                        patch.at(0, ci, y, x) = sample.distorted.at(0, ci, geo.top + y, geo.left + x);

            Tensor content;
            double brightness = 0.0;
            switch (config.kind) {
                case DistortionKind::elastic: {
                    const double alpha = rng.uniform(config.alpha_min, config.alpha_max);
                    const double sigma = rng.uniform(config.sigma_min, config.sigma_max);
                    content = elastic_deform(patch, alpha, sigma, sub);
                    brightness = config.brightness_range > 0.0
                                     ? rng.uniform(-config.brightness_range, config.brightness_range)
                                     : 0.0;
                    break;
                }
                case DistortionKind::black:
                    content = Tensor::image(truth.c, geo.height, geo.width);  // cut out to zero
                    break;
                case DistortionKind::swap: {
                    const int otop = rng.uniform_int(0, truth.h - geo.height);
                    const int oleft = rng.uniform_int(0, truth.w - geo.width);
                    content = Tensor::image(truth.c, geo.height, geo.width);
                    for (int ci = 0; ci < truth.c; ++ci)
                        for (int y = 0; y < geo.height; ++y)
                            for (int x = 0; x < geo.width; ++x)
                                content.at(0, ci, y, x) = truth.at(0, ci, otop + y, oleft + x);
                    break;
                }
            }
            const ShapeStyle style = static_cast<ShapeStyle>(rng.uniform_int(0, 2));
            const Tensor shape = make_shape_mask(geo.height, geo.width, style, sub);
            got = compose_distortion(sample.distorted, geo, content, shape, brightness);
        }
        if (!got)
            throw std::runtime_error("distortion resample budget exhausted (" +
                                     std::to_string(config.resample_budget) + " attempts)");
        sample.distorted = got->distorted;
        for (size_t i = 0; i < sample.mask.v.size(); ++i)
            sample.mask.v[i] = std::max(sample.mask.v[i], got->mask.v[i]);
    }
    return sample;
}

void dump_triptych(const DistortionSample& sample, const std::filesystem::path& path) {
    const Tensor& x = sample.truth;
    Tensor strip = Tensor::image(x.c, x.h, 3 * x.w + 2);
    for (int ci = 0; ci < x.c; ++ci)
        for (int y = 0; y < x.h; ++y) {
            for (int xx = 0; xx < x.w; ++xx) {
                strip.at(0, ci, y, xx) = x.at(0, ci, y, xx);
                strip.at(0, ci, y, x.w + 1 + xx) = sample.distorted.at(0, ci, y, xx);
                strip.at(0, ci, y, 2 * x.w + 2 + xx) = sample.mask.at(0, 0, y, xx);
            }
            strip.at(0, ci, y, x.w) = 1.0f;
            strip.at(0, ci, y, 2 * x.w + 1) = 1.0f;
        }
    save_png(path, strip);
}

}  // namespace ssae
