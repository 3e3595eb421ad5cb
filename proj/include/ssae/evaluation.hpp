#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssae/dataset.hpp"
#include "ssae/inference.hpp"
#include "ssae/nn.hpp"

namespace ssae {

struct ConfusionCounts {
    long tp = 0, tn = 0, fp = 0, fn = 0;

    double tpr() const { return tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0; }
    double tnr() const { return tn + fp > 0 ? static_cast<double>(tn) / (tn + fp) : 0.0; }
};

// F1 = 2TP / (2TP + FP + FN); a degenerate denominator yields 0 (flagged by
// the caller-visible counts).
double f1_score(const ConfusionCounts& c);

// Smallest threshold on the observed value grid (strictly above the blocking
// plateau, i.e. nextafter of a grid value) such that every connected
// component of (h >= t) in every validation heatmap has area < min_area.
// Found by bisection over the sorted union of heatmap values.
double calibrate_threshold(const std::vector<AnomalyHeatmap>& val_heatmaps, int min_area,
                           bool eight_connectivity = true);

// Pooled pixel-wise AUROC with midrank tie handling.
double pixel_auroc(const std::vector<const Tensor*>& score_maps,
                   const std::vector<const Tensor*>& truth_masks);
double auroc_from_scores(const std::vector<float>& scores, const std::vector<uint8_t>& labels);

struct CategoryMetrics {
    std::string category;
    double tpr = 0, tnr = 0, tpr_tnr_avg = 0;
    double pixel_auroc = 0;
    double image_f1 = 0, pixel_f1 = 0;
    double threshold = 0;
    int min_area = 0;
    bool f1_degenerate = false;
};

struct MetricsReport {
    std::vector<CategoryMetrics> rows;
    CategoryMetrics averages() const;
    std::string to_csv() const;
    std::string to_table() const;
};

// Full evaluation protocol for one category: calibrate the threshold on
// normal-only validation heatmaps, predict on the test split, accumulate
// image- and pixel-level confusions plus pooled AUROC.
CategoryMetrics evaluate_category(nn::Network& net, const DatasetIndex& index,
                                  const PostprocessConfig& post, int min_area);

}  // namespace ssae
