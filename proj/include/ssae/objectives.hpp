#pragma once

#include "ssae/tensor.hpp"

namespace ssae {

enum class ObjectiveVariant { v1, v2, v3 };

ObjectiveVariant objective_variant_from_name(const std::string& name);
const char* objective_variant_name(ObjectiveVariant v);

struct ObjectiveConfig {
    ObjectiveVariant variant = ObjectiveVariant::v1;
    double lambda = 0.5;
    double eps = 1e-12;  // division floor; also smooths the norm gradient at zero

    void validate() const;
};

// Two-term masked reconstruction losses over (recon, X, X_hat, M) with a
// single Euclidean norm per masked difference tensor and element counts
// (including channels) as normalisers:
//   v1:  lambda/|Mbar| * ||Mbar o (recon-X)||_2 + (1-lambda)/|M| * ||M o (recon-X)||_2
//   v2:  same with the second term subtracted
//   v3:  second term weighted by the real-valued |X_hat - X| and normalised
//        by ||X_hat - X||_1 instead of the binary mask
// M is a c=1 binary mask broadcast across channels. recon gradients divide by
// sqrt(S + eps) so they stay finite at recon == X; the values use the exact
// norms and are 0 there.
double loss_v1(const Tensor& recon, const Tensor& x, const Tensor& mask, double lambda);
double loss_v2(const Tensor& recon, const Tensor& x, const Tensor& mask, double lambda);
double loss_v3(const Tensor& recon, const Tensor& x, const Tensor& x_hat, const Tensor& mask,
               double lambda, double eps = 1e-12);

struct LossAndGrad {
    double value = 0.0;
    Tensor grad;  // d loss / d recon, same shape as recon
};

// Unified entry; x_hat is only read for v3 (may be empty otherwise).
double objective_loss(const ObjectiveConfig& cfg, const Tensor& recon, const Tensor& x,
                      const Tensor& x_hat, const Tensor& mask);
LossAndGrad objective_loss_grad(const ObjectiveConfig& cfg, const Tensor& recon, const Tensor& x,
                                const Tensor& x_hat, const Tensor& mask);

}  // namespace ssae
