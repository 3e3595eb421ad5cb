#include "ssae/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "ssae/image_io.hpp"
#include "ssae/image_ops.hpp"

namespace ssae {

double f1_score(const ConfusionCounts& c) {
    const long denom = 2 * c.tp + c.fp + c.fn;
    return denom > 0 ? 2.0 * c.tp / static_cast<double>(denom) : 0.0;
}

namespace {

bool all_components_below(const AnomalyHeatmap& h, double threshold, int min_area,
                          bool eight_connectivity) {
    Tensor mask = Tensor::image(1, h.scores.h, h.scores.w);
    for (size_t i = 0; i < mask.v.size(); ++i)
        mask.v[i] = h.scores.v[i] >= threshold ? 1.0f : 0.0f;
    auto [labels, comps] = connected_components(mask, eight_connectivity);
    for (const auto& c : comps)
        if (c.area >= min_area) return false;
    return true;
}

}  // namespace

double calibrate_threshold(const std::vector<AnomalyHeatmap>& val_heatmaps, int min_area,
                           bool eight_connectivity) {
    if (val_heatmaps.empty())
        throw std::invalid_argument("calibrate_threshold: validation set is empty");
    if (min_area < 1) throw std::invalid_argument("calibrate_threshold: min_area must be >= 1");

    std::set<float> values;
    for (const auto& h : val_heatmaps) values.insert(h.scores.v.begin(), h.scores.v.end());
    // Candidate thresholds sit just above each observed value, so the
    // "slightly below min area" condition is decided on the value grid.
    std::vector<double> candidates;
    candidates.reserve(values.size());
    for (const float v : values)
        candidates.push_back(std::nextafter(static_cast<double>(v), 2.0));

    auto passes = [&](double t) {
        for (const auto& h : val_heatmaps)
            if (!all_components_below(h, t, min_area, eight_connectivity)) return false;
        return true;
    };

    // passes() is monotone in t: bisect for the first passing candidate.
    size_t lo = 0, hi = candidates.size() - 1;
    if (passes(candidates[lo])) return candidates[lo];
    // candidates[hi] empties every mask, hence always passes
    while (hi - lo > 1) {
        const size_t mid = lo + (hi - lo) / 2;
        if (passes(candidates[mid]))
            hi = mid;
        else
            lo = mid;
    }
    return candidates[hi];
}

double auroc_from_scores(const std::vector<float>& scores, const std::vector<uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auroc: scores/labels length mismatch");
    size_t pos = 0;
    for (const uint8_t l : labels) pos += l ? 1 : 0;
    const size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("auroc: needs at least one positive and one negative sample");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // rank-sum with midranks for ties
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * ((i + 1) + (j + 1));
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]]) rank_sum_pos += midrank;
        i = j + 1;
    }
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

double pixel_auroc(const std::vector<const Tensor*>& score_maps,
                   const std::vector<const Tensor*>& truth_masks) {
    if (score_maps.size() != truth_masks.size())
        throw std::invalid_argument("pixel_auroc: map count mismatch");
    std::vector<float> scores;
    std::vector<uint8_t> labels;
    for (size_t m = 0; m < score_maps.size(); ++m) {
        const Tensor& s = *score_maps[m];
        const Tensor& t = *truth_masks[m];
        require_same_shape(s, t, "pixel_auroc");
        scores.insert(scores.end(), s.v.begin(), s.v.end());
        for (const float v : t.v) labels.push_back(v != 0.0f ? 1 : 0);
    }
    return auroc_from_scores(scores, labels);
}

CategoryMetrics MetricsReport::averages() const {
    CategoryMetrics avg;
    avg.category = "average";
    if (rows.empty()) return avg;
    for (const auto& r : rows) {
        avg.tpr += r.tpr;
        avg.tnr += r.tnr;
        avg.tpr_tnr_avg += r.tpr_tnr_avg;
        avg.pixel_auroc += r.pixel_auroc;
        avg.image_f1 += r.image_f1;
        avg.pixel_f1 += r.pixel_f1;
    }
    const double n = static_cast<double>(rows.size());
    avg.tpr /= n;
    avg.tnr /= n;
    avg.tpr_tnr_avg /= n;
    avg.pixel_auroc /= n;
    avg.image_f1 /= n;
    avg.pixel_f1 /= n;
    return avg;
}

namespace {

std::string metrics_line(const CategoryMetrics& m, bool csv, bool with_threshold) {
    char buf[256];
    if (csv) {
        if (with_threshold)
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.9g,%d",
                          m.category.c_str(), m.tpr, m.tnr, m.tpr_tnr_avg, m.pixel_auroc, m.image_f1,
                          m.pixel_f1, m.threshold, m.min_area);
        else
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,,", m.category.c_str(),
                          m.tpr, m.tnr, m.tpr_tnr_avg, m.pixel_auroc, m.image_f1, m.pixel_f1);
    } else {
        std::snprintf(buf, sizeof(buf), "%-14s %6.3f %6.3f %9.3f %7.3f %9.3f %9.3f",
                      m.category.c_str(), m.tpr, m.tnr, m.tpr_tnr_avg, m.pixel_auroc, m.image_f1,
                      m.pixel_f1);
    }
    return buf;
}

}  // namespace

std::string MetricsReport::to_csv() const {
    std::ostringstream out;
    out << "category,tpr,tnr,tpr_tnr_avg,pixel_auroc,image_f1,pixel_f1,threshold,min_area\n";
    for (const auto& r : rows) out << metrics_line(r, true, true) << "\n";
    out << metrics_line(averages(), true, false) << "\n";
    return out.str();
}

std::string MetricsReport::to_table() const {
    std::ostringstream out;
    out << "category          tpr    tnr  (tpr+tnr)/2  auroc  image_f1  pixel_f1\n";
    for (const auto& r : rows) out << metrics_line(r, false, true) << "\n";
    out << metrics_line(averages(), false, false) << "\n";
    return out.str();
}

CategoryMetrics evaluate_category(nn::Network& net, const DatasetIndex& index,
                                  const PostprocessConfig& post, int min_area) {
    const int side = net.config().input_side;
    auto load_image = [&](const DatasetRecord& rec) {
        Tensor img = load_png(rec.image_path, /*expand_rgb=*/true);
        if (img.h != side || img.w != side) img = resize_bilinear(img, side, side);
        return img;
    };

    if (index.validation.empty())
        throw std::runtime_error("evaluate_category: validation split is empty (hold out first)");

    std::vector<AnomalyHeatmap> val_maps;
    for (const auto& rec : index.validation) {
        PostprocessConfig p = post;
        p.threshold = 0.0;
        p.min_area = min_area;
        Prediction pred = predict(net, load_image(rec), p);
        pred.smoothed.source_id = rec.image_path.filename().string();
        val_maps.push_back(std::move(pred.smoothed));
    }
    const double threshold = calibrate_threshold(val_maps, min_area, post.eight_connectivity);

    ConfusionCounts image_counts, pixel_counts;
    std::vector<Tensor> score_maps, truth_masks;
    for (const auto& rec : index.test) {
        PostprocessConfig p = post;
        p.threshold = threshold;
        p.min_area = min_area;
        const Tensor img = load_image(rec);
        Prediction pred = predict(net, img, p);

        Tensor truth = Tensor::image(1, side, side);
        if (rec.mask_path) {
            truth = load_png(*rec.mask_path);
            if (truth.c != 1) throw std::runtime_error("ground-truth mask must be single-channel: " +
                                                       rec.mask_path->string());
            if (truth.h != side || truth.w != side) truth = resize_nearest(truth, side, side);
            for (float& v : truth.v) v = v != 0.0f ? 1.0f : 0.0f;
        }

        const bool truly_anomalous = !rec.is_good();
        if (truly_anomalous && pred.detection.anomalous) ++image_counts.tp;
        if (truly_anomalous && !pred.detection.anomalous) ++image_counts.fn;
        if (!truly_anomalous && pred.detection.anomalous) ++image_counts.fp;
        if (!truly_anomalous && !pred.detection.anomalous) ++image_counts.tn;

        for (size_t i = 0; i < truth.v.size(); ++i) {
            const bool t = truth.v[i] != 0.0f;
            const bool d = pred.detection.segmentation.v[i] != 0.0f;
            if (t && d) ++pixel_counts.tp;
            if (t && !d) ++pixel_counts.fn;
            if (!t && d) ++pixel_counts.fp;
            if (!t && !d) ++pixel_counts.tn;
        }
        score_maps.push_back(std::move(pred.smoothed.scores));
        truth_masks.push_back(std::move(truth));
    }

    CategoryMetrics m;
    m.category = index.category;
    m.tpr = image_counts.tpr();
    m.tnr = image_counts.tnr();
    m.tpr_tnr_avg = 0.5 * (m.tpr + m.tnr);
    m.image_f1 = f1_score(image_counts);
    m.pixel_f1 = f1_score(pixel_counts);
    m.f1_degenerate = 2 * pixel_counts.tp + pixel_counts.fp + pixel_counts.fn == 0 ||
                      2 * image_counts.tp + image_counts.fp + image_counts.fn == 0;
    m.threshold = threshold;
    m.min_area = min_area;

    bool any_pos = false, any_neg = false;
    for (const auto& t : truth_masks)
        for (const float v : t.v) (v != 0.0f ? any_pos : any_neg) = true;
    if (any_pos && any_neg) {
        std::vector<const Tensor*> sp, tp;
        for (size_t i = 0; i < score_maps.size(); ++i) {
            sp.push_back(&score_maps[i]);
            tp.push_back(&truth_masks[i]);
        }
        m.pixel_auroc = pixel_auroc(sp, tp);
    } else {
        m.pixel_auroc = 0.5;  // single-class population: tie convention
    }
    return m;
}

}  // namespace ssae
