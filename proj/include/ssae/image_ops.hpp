#pragma once

#include "ssae/tensor.hpp"

namespace ssae {

// Bilinear resize of an n=1 tensor to (out_h, out_w), edge-clamped,
// pixel-center aligned. Pure function of the input.
Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

// Nearest-neighbour resize; used for ground-truth masks so values stay binary.
Tensor resize_nearest(const Tensor& img, int out_h, int out_w);

// Separable gaussian filter with reflect padding. sigma == 0 is the identity.
Tensor gaussian_blur(const Tensor& img, double sigma);

// Quarter-turn clockwise rotations (k = number of turns, 0..3) and axis flips.
Tensor rotate90(const Tensor& img, int k);
Tensor flip_horizontal(const Tensor& img);
Tensor flip_vertical(const Tensor& img);

}  // namespace ssae
