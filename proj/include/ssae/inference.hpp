#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssae/nn.hpp"
#include "ssae/tensor.hpp"

namespace ssae {

struct AnomalyHeatmap {
    Tensor scores;  // c=1, nonnegative, in [0,1]
    double smoothing_sigma = 0.0;
    std::string source_id;
};

struct ComponentInfo {
    int area = 0;
    int top = 0, left = 0, bottom = 0, right = 0;  // inclusive bbox
    float peak = 0.0f;
};

struct DetectionResult {
    Tensor segmentation;  // c=1 binary mask after the min-area filter
    std::vector<ComponentInfo> components;
    bool anomalous = false;
    float image_score = 0.0f;  // max smoothed heatmap value
};

struct PostprocessConfig {
    double threshold = 0.0;
    int min_area = 16;   // pixels
    double sigma = -1.0;  // gaussian smoothing; < 0 = auto (4 px at side 512, scaled)
    bool eight_connectivity = true;

    double sigma_for(int side) const { return sigma >= 0.0 ? sigma : 4.0 * side / 512.0; }
};

// Per-pixel Euclidean norm of the channel difference vector divided by
// sqrt(C), so scores stay in [0,1].
AnomalyHeatmap heatmap(const Tensor& recon, const Tensor& x);

// Gaussian smoothing with reflect padding; sigma == 0 is the identity.
AnomalyHeatmap smooth(const AnomalyHeatmap& h, double sigma);

// Binary mask (scores >= threshold), connected components, min-area filter.
DetectionResult segment(const AnomalyHeatmap& h, double threshold, int min_area,
                        bool eight_connectivity = true);

// Labels connected components of a binary c=1 mask; returns the label map
// (0 = background, labels from 1) and per-label info.
std::pair<std::vector<int>, std::vector<ComponentInfo>> connected_components(
    const Tensor& mask, bool eight_connectivity);

struct Prediction {
    Tensor reconstruction;
    AnomalyHeatmap raw;
    AnomalyHeatmap smoothed;
    DetectionResult detection;
};

// Exactly one forward pass per call (eval mode, no masking, no windows).
Prediction predict(nn::Network& net, const Tensor& x, const PostprocessConfig& post);

// viridis-mapped rendering of a heatmap, fixed [0,1] -> colour scale.
Tensor colorize_heatmap(const Tensor& scores);

}  // namespace ssae
