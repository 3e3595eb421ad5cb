#include "ssae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ssae/image_io.hpp"
#include "ssae/image_ops.hpp"
#include "ssae/rng.hpp"

namespace fs = std::filesystem;

namespace ssae {

namespace {

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::exists(dir)) return files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<std::string> sorted_subdirs(const fs::path& dir) {
    std::vector<std::string> names;
    if (!fs::exists(dir)) return names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

void check_readable(const fs::path& p) {
    png_dims(p);  // signature + header check, names the file on failure
}

}  // namespace

DatasetIndex scan_dataset(const fs::path& root, const std::string& category) {
    const fs::path cat = root / category;
    if (!fs::exists(cat)) throw std::runtime_error("dataset category not found: " + cat.string());

    DatasetIndex index;
    index.root = root;
    index.category = category;

    for (const auto& p : sorted_images(cat / "train" / "good")) {
        check_readable(p);
        index.train.push_back({p, std::nullopt, "good", Split::train});
    }

    for (const auto& defect : sorted_subdirs(cat / "test")) {
        for (const auto& p : sorted_images(cat / "test" / defect)) {
            check_readable(p);
            DatasetRecord rec{p, std::nullopt, defect, Split::test};
            if (defect != "good") {
                fs::path mask = cat / "ground_truth" / defect / (p.stem().string() + "_mask.png");
                if (!fs::exists(mask))
                    throw std::runtime_error("missing ground-truth mask for defective test image: " +
                                             p.string());
                const auto [ih, iw] = png_dims(p);
                const auto [mh, mw] = png_dims(mask);
                if (ih != mh || iw != mw)
                    throw std::runtime_error("ground-truth mask size differs from image: " + mask.string());
                rec.mask_path = mask;
            }
            index.test.push_back(std::move(rec));
        }
    }
    return index;
}

DatasetIndex hold_out_validation(const DatasetIndex& index, double fraction, uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0)
        throw std::invalid_argument("validation fraction must be in [0,1)");
    DatasetIndex out = index;
    const size_t n = out.train.size();
    if (n < 2 || fraction == 0.0) return out;

    size_t n_val = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
    n_val = std::clamp<size_t>(n_val, 1, n - 1);

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, 0x76616c)) /* "val" */;
    rng.shuffle(order);

    std::set<size_t> val_ids(order.begin(), order.begin() + n_val);
    DatasetIndex result = out;
    result.train.clear();
    result.validation.clear();
    for (size_t i = 0; i < n; ++i) {
        DatasetRecord rec = out.train[i];
        if (val_ids.count(i)) {
            rec.split = Split::validation;
            result.validation.push_back(rec);
        } else {
            result.train.push_back(rec);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

void AugmentationPolicy::validate() const {
    const std::set<int> allowed(rotations.begin(), rotations.end());
    if (!allowed.count(0)) throw std::invalid_argument("augmentation policy must allow 0 degree rotation");
    static const std::set<std::set<int>> subgroups = {
        {0}, {0, 180}, {0, 90, 180, 270}};
    if (!subgroups.count(allowed))
        throw std::invalid_argument(
            "rotation set must be closed under composition: {0}, {0,180} or {0,90,180,270}");
}

bool AugmentationPolicy::quarter_turns() const {
    for (int r : rotations)
        if (r == 90 || r == 270) return true;
    return false;
}

Tensor augment(const Tensor& image, const AugmentationPolicy& policy, uint64_t seed) {
    policy.validate();
    if (policy.quarter_turns() && image.h != image.w)
        throw std::invalid_argument("quarter-turn rotations require a square image, got " +
                                    image.shape_str());

    Rng rng(derive_seed(seed, 0x617567)) /* "aug" */;
    const int rot = policy.rotations[rng.uniform_int(0, static_cast<int>(policy.rotations.size()) - 1)];
    const bool fh = policy.flip_horizontal && rng.bernoulli(0.5);
    const bool fv = policy.flip_vertical && rng.bernoulli(0.5);

    Tensor out = rotate90(image, rot / 90);
    if (fh) out = flip_horizontal(out);
    if (fv) out = flip_vertical(out);
    return out;
}

// ---------------------------------------------------------------------------

void TextureSpec::validate() const {
    if (side < 8) throw std::invalid_argument("texture side must be >= 8");
    if (period <= 0.0) throw std::invalid_argument("texture period must be positive");
    if (anomalous_fraction < 0.0 || anomalous_fraction > 1.0)
        throw std::invalid_argument("anomalous_fraction must be in [0,1]");
}

TextureSpec texture_spec_from_name(const std::string& name) {
    TextureSpec spec;
    if (name == "stripes")
        spec.kind = TextureKind::stripes;
    else if (name == "checker")
        spec.kind = TextureKind::checker;
    else if (name == "noise")
        spec.kind = TextureKind::noise;
    else
        throw std::invalid_argument("unknown texture spec: " + name +
                                    " (expected stripes|checker|noise)");
    return spec;
}

namespace {

Tensor render_texture(const TextureSpec& spec, Rng& rng) {
    const int s = spec.side;
    Tensor img = Tensor::image(3, s, s);
    const double angle =
        (spec.angle_deg + rng.uniform(-spec.angle_jitter_deg, spec.angle_jitter_deg)) * M_PI / 180.0;
    const double phase = rng.uniform(0.0, spec.phase_jitter) * 2.0 * M_PI;
    const double cx = std::cos(angle), sx = std::sin(angle);

    Tensor base = Tensor::image(1, s, s);
    switch (spec.kind) {
        case TextureKind::stripes:
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    const double t = (x * cx + y * sx) * 2.0 * M_PI / spec.period + phase;
                    base.at(0, 0, y, x) = static_cast<float>(spec.base_level + spec.amplitude * std::sin(t));
                }
            break;
        case TextureKind::checker:
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    const double u = (x * cx + y * sx) / spec.period + phase / (2.0 * M_PI);
                    const double v = (-x * sx + y * cx) / spec.period;
                    const int par = (static_cast<int>(std::floor(u)) + static_cast<int>(std::floor(v))) & 1;
                    base.at(0, 0, y, x) =
                        static_cast<float>(spec.base_level + spec.amplitude * (par ? 1.0 : -1.0));
                }
            break;
        case TextureKind::noise: {
            Tensor field = Tensor::image(1, s, s);
            for (float& f : field.v) f = static_cast<float>(rng.uniform());
            field = gaussian_blur(field, spec.period / 4.0);
            // stretch the smoothed field back to full contrast
            float lo = field.v[0], hi = field.v[0];
            for (float f : field.v) {
                lo = std::min(lo, f);
                hi = std::max(hi, f);
            }
            const float span = std::max(1e-6f, hi - lo);
            for (int i = 0; i < s * s; ++i)
                base.v[i] = static_cast<float>(spec.base_level +
                                               spec.amplitude * (2.0 * (field.v[i] - lo) / span - 1.0));
            break;
        }
    }
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const double noise = spec.noise_std > 0.0 ? rng.normal(0.0, spec.noise_std) : 0.0;
            const float v = static_cast<float>(std::clamp(base.at(0, 0, y, x) + noise, 0.0, 1.0));
            for (int ci = 0; ci < 3; ++ci) img.at(0, ci, y, x) = v;
        }
    return img;
}

// Stamps one defect; the returned mask is exactly the stamped region.
void inject_defect(Tensor& img, Tensor& mask, DefectKind kind, const TextureSpec& spec, Rng& rng) {
    const int s = spec.side;
    const double delta = (rng.bernoulli(0.5) ? 1.0 : -1.0) * spec.defect_contrast;
    auto stamp = [&](int y, int x) {
        if (y < 0 || y >= s || x < 0 || x >= s) return;
        mask.at(0, 0, y, x) = 1.0f;
        for (int ci = 0; ci < 3; ++ci) {
            float& v = img.at(0, ci, y, x);
            v = static_cast<float>(std::clamp(v + delta, 0.0, 1.0));
        }
    };
    switch (kind) {
        case DefectKind::blob: {
            const double r = spec.defect_radius_frac * s * rng.uniform(0.7, 1.5);
            const double ry = r * rng.uniform(0.7, 1.3);
            const int cy = rng.uniform_int(static_cast<int>(ry) + 1, s - 2 - static_cast<int>(ry));
            const int cx = rng.uniform_int(static_cast<int>(r) + 1, s - 2 - static_cast<int>(r));
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    const double dy = (y - cy) / ry, dx = (x - cx) / r;
                    if (dy * dy + dx * dx <= 1.0) stamp(y, x);
                }
            break;
        }
        case DefectKind::scratch: {
            const double len = s * rng.uniform(0.2, 0.45);
            const double ang = rng.uniform(0.0, M_PI);
            const int thick = rng.uniform_int(1, std::max(1, s / 48));
            const double y0 = rng.uniform(0.15 * s, 0.85 * s);
            const double x0 = rng.uniform(0.15 * s, 0.85 * s);
            const int steps = static_cast<int>(len * 2);
            for (int i = 0; i <= steps; ++i) {
                const double t = (i / static_cast<double>(steps) - 0.5) * len;
                const int y = static_cast<int>(std::lround(y0 + t * std::sin(ang)));
                const int x = static_cast<int>(std::lround(x0 + t * std::cos(ang)));
                for (int oy = -thick; oy <= thick; ++oy)
                    for (int ox = -thick; ox <= thick; ++ox) stamp(y + oy, x + ox);
            }
            break;
        }
        case DefectKind::warp: {
            // Local swirl: pulls texture around a centre, leaving intensity
            // statistics intact. Structural anomaly only.
            const double r = spec.defect_radius_frac * s * rng.uniform(1.2, 2.0);
            const int cy = rng.uniform_int(static_cast<int>(r) + 1, s - 2 - static_cast<int>(r));
            const int cx = rng.uniform_int(static_cast<int>(r) + 1, s - 2 - static_cast<int>(r));
            const double strength = rng.uniform(1.5, 3.0);
            Tensor src = img;
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    const double dy = y - cy, dx = x - cx;
                    const double d = std::sqrt(dy * dy + dx * dx);
                    if (d >= r) continue;
                    const double a = strength * (1.0 - d / r);
                    const double ca = std::cos(a), sa = std::sin(a);
                    const double syf = std::clamp(cy + dy * ca - dx * sa, 0.0, s - 1.0);
                    const double sxf = std::clamp(cx + dy * sa + dx * ca, 0.0, s - 1.0);
                    const int yy = static_cast<int>(std::lround(syf));
                    const int xx = static_cast<int>(std::lround(sxf));
                    mask.at(0, 0, y, x) = 1.0f;
                    for (int ci = 0; ci < 3; ++ci) img.at(0, ci, y, x) = src.at(0, ci, yy, xx);
                }
            break;
        }
    }
}

std::string number_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", i);
    return buf;
}

}  // namespace

DatasetIndex make_synthetic_texture_set(const TextureSpec& spec, const fs::path& root,
                                        const std::string& category, int n_train, int n_test,
                                        uint64_t seed) {
    spec.validate();
    if (n_train < 1 || n_test < 0) throw std::invalid_argument("bad synthetic dataset counts");
    const int n_anomalous = static_cast<int>(std::lround(spec.anomalous_fraction * n_test));
    if (n_anomalous > 0 && spec.defects.empty())
        throw std::invalid_argument("anomalous test images requested but the defect injector list is empty");

    const fs::path cat = root / category;
    fs::create_directories(cat / "train" / "good");
    fs::create_directories(cat / "test" / "good");

    for (int i = 0; i < n_train; ++i) {
        Rng rng(derive_seed(seed, 1, i));
        save_png(cat / "train" / "good" / (number_name(i) + ".png"), render_texture(spec, rng));
    }

    const int n_good = n_test - n_anomalous;
    for (int i = 0; i < n_good; ++i) {
        Rng rng(derive_seed(seed, 2, i));
        save_png(cat / "test" / "good" / (number_name(i) + ".png"), render_texture(spec, rng));
    }
    for (int i = 0; i < n_anomalous; ++i) {
        Rng rng(derive_seed(seed, 3, i));
        Tensor img = render_texture(spec, rng);
        Tensor mask = Tensor::image(1, spec.side, spec.side);
        const DefectKind kind = spec.defects[i % spec.defects.size()];
        inject_defect(img, mask, kind, spec, rng);
        const char* name = kind == DefectKind::blob ? "blob" : (kind == DefectKind::scratch ? "scratch" : "warp");
        fs::create_directories(cat / "test" / name);
        fs::create_directories(cat / "ground_truth" / name);
        save_png(cat / "test" / name / (number_name(i) + ".png"), img);
        save_png(cat / "ground_truth" / name / (number_name(i) + "_mask.png"), mask);
    }
    return scan_dataset(root, category);
}

}  // namespace ssae
