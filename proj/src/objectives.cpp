#include "ssae/objectives.hpp"

#include <cmath>

namespace ssae {

ObjectiveVariant objective_variant_from_name(const std::string& name) {
    if (name == "v1") return ObjectiveVariant::v1;
    if (name == "v2") return ObjectiveVariant::v2;
    if (name == "v3") return ObjectiveVariant::v3;
    throw std::invalid_argument("unknown objective variant: " + name + " (expected v1|v2|v3)");
}

const char* objective_variant_name(ObjectiveVariant v) {
    switch (v) {
        case ObjectiveVariant::v1: return "v1";
        case ObjectiveVariant::v2: return "v2";
        case ObjectiveVariant::v3: return "v3";
    }
    return "?";
}

void ObjectiveConfig::validate() const {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("objective lambda must lie in [0,1], got " + std::to_string(lambda));
    if (eps <= 0.0) throw std::invalid_argument("objective eps must be positive");
}

namespace {

struct MaskStats {
    double count_in = 0;   // ||M||_1 counted across channels
    double count_out = 0;  // ||Mbar||_1
};

void check_shapes(const Tensor& recon, const Tensor& x, const Tensor& mask) {
    require_same_shape(recon, x, "objective");
    if (recon.n != 1 || mask.n != 1 || mask.c != 1 || mask.h != recon.h || mask.w != recon.w)
        throw std::invalid_argument("objective: mask must be 1x1xHxW matching the image, got " +
                                    mask.shape_str() + " vs " + recon.shape_str());
}

MaskStats mask_stats(const Tensor& recon, const Tensor& mask) {
    double area = 0.0;
    for (const float m : mask.v) {
        if (m != 0.0f && m != 1.0f)
            throw std::invalid_argument("objective: mask must be binary");
        area += m;
    }
    MaskStats s;
    s.count_in = area * recon.c;
    s.count_out = (static_cast<double>(mask.v.size()) - area) * recon.c;
    if (s.count_in <= 0.0 || s.count_out <= 0.0)
        throw std::invalid_argument("objective: mask must be neither empty nor all-ones");
    return s;
}

struct Terms {
    double s_out = 0.0;  // sum over Mbar of d^2
    double s_in = 0.0;   // sum over M of (w*d)^2, w binary or |x_hat-x|
    double w_l1 = 0.0;   // ||x_hat - x||_1 (v3 only)
};

Terms accumulate(const Tensor& recon, const Tensor& x, const Tensor* x_hat, const Tensor& mask) {
    Terms t;
    const size_t plane = mask.plane();
    for (int ci = 0; ci < recon.c; ++ci) {
        const float* r = recon.channel(0, ci);
        const float* xv = x.channel(0, ci);
        const float* xh = x_hat ? x_hat->channel(0, ci) : nullptr;
        const float* m = mask.v.data();
        for (size_t i = 0; i < plane; ++i) {
            const double d = static_cast<double>(r[i]) - xv[i];
            if (m[i] == 0.0f) {
                t.s_out += d * d;
            } else if (!xh) {
                t.s_in += d * d;
            }
            if (xh) {
                const double w = std::abs(static_cast<double>(xh[i]) - xv[i]);
                t.w_l1 += w;
                t.s_in += (w * d) * (w * d);
            }
        }
    }
    return t;
}

}  // namespace

double loss_v1(const Tensor& recon, const Tensor& x, const Tensor& mask, double lambda) {
    check_shapes(recon, x, mask);
    const MaskStats ms = mask_stats(recon, mask);
    const Terms t = accumulate(recon, x, nullptr, mask);
    return lambda / ms.count_out * std::sqrt(t.s_out) + (1.0 - lambda) / ms.count_in * std::sqrt(t.s_in);
}

double loss_v2(const Tensor& recon, const Tensor& x, const Tensor& mask, double lambda) {
    check_shapes(recon, x, mask);
    const MaskStats ms = mask_stats(recon, mask);
    const Terms t = accumulate(recon, x, nullptr, mask);
    return lambda / ms.count_out * std::sqrt(t.s_out) - (1.0 - lambda) / ms.count_in * std::sqrt(t.s_in);
}

double loss_v3(const Tensor& recon, const Tensor& x, const Tensor& x_hat, const Tensor& mask,
               double lambda, double eps) {
    check_shapes(recon, x, mask);
    require_same_shape(x_hat, x, "objective");
    const MaskStats ms = mask_stats(recon, mask);
    const Terms t = accumulate(recon, x, &x_hat, mask);
    if (t.w_l1 <= eps)
        throw std::invalid_argument("loss_v3 requires ||x_hat - x||_1 > 0 (degenerate sample)");
    return lambda / ms.count_out * std::sqrt(t.s_out) - (1.0 - lambda) / t.w_l1 * std::sqrt(t.s_in);
}

double objective_loss(const ObjectiveConfig& cfg, const Tensor& recon, const Tensor& x,
                      const Tensor& x_hat, const Tensor& mask) {
    cfg.validate();
    switch (cfg.variant) {
        case ObjectiveVariant::v1: return loss_v1(recon, x, mask, cfg.lambda);
        case ObjectiveVariant::v2: return loss_v2(recon, x, mask, cfg.lambda);
        case ObjectiveVariant::v3: return loss_v3(recon, x, x_hat, mask, cfg.lambda, cfg.eps);
    }
    throw std::logic_error("unreachable objective variant");
}

LossAndGrad objective_loss_grad(const ObjectiveConfig& cfg, const Tensor& recon, const Tensor& x,
                                const Tensor& x_hat, const Tensor& mask) {
    cfg.validate();
    check_shapes(recon, x, mask);
    const bool v3 = cfg.variant == ObjectiveVariant::v3;
    if (v3) require_same_shape(x_hat, x, "objective");
    const MaskStats ms = mask_stats(recon, mask);
    const Terms t = accumulate(recon, x, v3 ? &x_hat : nullptr, mask);
    if (v3 && t.w_l1 <= cfg.eps)
        throw std::invalid_argument("loss_v3 requires ||x_hat - x||_1 > 0 (degenerate sample)");

    const double second_norm = v3 ? t.w_l1 : ms.count_in;
    const double second_sign = cfg.variant == ObjectiveVariant::v1 ? 1.0 : -1.0;

    LossAndGrad out;
    out.value = cfg.lambda / ms.count_out * std::sqrt(t.s_out) +
                second_sign * (1.0 - cfg.lambda) / second_norm * std::sqrt(t.s_in);

    const double c_out = cfg.lambda / ms.count_out / std::sqrt(t.s_out + cfg.eps);
    const double c_in = second_sign * (1.0 - cfg.lambda) / second_norm / std::sqrt(t.s_in + cfg.eps);

    out.grad = Tensor(recon.n, recon.c, recon.h, recon.w);
    const size_t plane = mask.plane();
    for (int ci = 0; ci < recon.c; ++ci) {
        const float* r = recon.channel(0, ci);
        const float* xv = x.channel(0, ci);
        const float* xh = v3 ? x_hat.channel(0, ci) : nullptr;
        const float* m = mask.v.data();
        float* g = out.grad.channel(0, ci);
        for (size_t i = 0; i < plane; ++i) {
            const double d = static_cast<double>(r[i]) - xv[i];
            if (v3) {
                const double w = std::abs(static_cast<double>(xh[i]) - xv[i]);
                g[i] = static_cast<float>((m[i] == 0.0f ? c_out * d : 0.0) + c_in * w * w * d);
            } else {
                g[i] = static_cast<float>(m[i] == 0.0f ? c_out * d : c_in * d);
            }
        }
    }
    return out;
}

}  // namespace ssae
