#include "ssae/inference.hpp"

#include <algorithm>
#include <cmath>

#include "ssae/image_ops.hpp"

namespace ssae {

AnomalyHeatmap heatmap(const Tensor& recon, const Tensor& x) {
    require_same_shape(recon, x, "heatmap");
    if (recon.n != 1) throw std::invalid_argument("heatmap expects n=1 images");
    AnomalyHeatmap h;
    h.scores = Tensor::image(1, x.h, x.w);
    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(x.c));
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) {
            double s = 0.0;
            for (int ci = 0; ci < x.c; ++ci) {
                const double d = static_cast<double>(recon.at(0, ci, y, xx)) - x.at(0, ci, y, xx);
                s += d * d;
            }
            h.scores.at(0, 0, y, xx) = static_cast<float>(std::sqrt(s) * inv_sqrt_c);
        }
    return h;
}

AnomalyHeatmap smooth(const AnomalyHeatmap& h, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("smooth: sigma must be >= 0");
    AnomalyHeatmap out;
    out.scores = gaussian_blur(h.scores, sigma);
    out.smoothing_sigma = sigma;
    out.source_id = h.source_id;
    return out;
}

std::pair<std::vector<int>, std::vector<ComponentInfo>> connected_components(
    const Tensor& mask, bool eight_connectivity) {
    const int H = mask.h, W = mask.w;
    std::vector<int> labels(static_cast<size_t>(H) * W, 0);
    std::vector<ComponentInfo> comps;
    std::vector<int> stack;
    int next = 0;
    for (int sy = 0; sy < H; ++sy)
        for (int sx = 0; sx < W; ++sx) {
            const int start = sy * W + sx;
            if (mask.v[start] == 0.0f || labels[start] != 0) continue;
            ++next;
            ComponentInfo info;
            info.top = info.bottom = sy;
            info.left = info.right = sx;
            stack.assign(1, start);
            labels[start] = next;
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                const int y = cur / W, x = cur % W;
                ++info.area;
                info.top = std::min(info.top, y);
                info.bottom = std::max(info.bottom, y);
                info.left = std::min(info.left, x);
                info.right = std::max(info.right, x);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        if (!eight_connectivity && dy != 0 && dx != 0) continue;
                        const int ny = y + dy, nx = x + dx;
                        if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                        const int ni = ny * W + nx;
                        if (mask.v[ni] == 0.0f || labels[ni] != 0) continue;
                        labels[ni] = next;
                        stack.push_back(ni);
                    }
            }
            comps.push_back(info);
        }
    return {std::move(labels), std::move(comps)};
}

DetectionResult segment(const AnomalyHeatmap& h, double threshold, int min_area,
                        bool eight_connectivity) {
    if (threshold < 0.0) throw std::invalid_argument("segment: threshold must be >= 0");
    if (min_area < 1) throw std::invalid_argument("segment: min_area must be >= 1");

    const Tensor& s = h.scores;
    DetectionResult res;
    res.segmentation = Tensor::image(1, s.h, s.w);
    for (size_t i = 0; i < s.v.size(); ++i)
        res.segmentation.v[i] = s.v[i] >= threshold ? 1.0f : 0.0f;

    auto [labels, comps] = connected_components(res.segmentation, eight_connectivity);

    // fill peak scores
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] > 0) {
            ComponentInfo& c = comps[labels[i] - 1];
            c.peak = std::max(c.peak, s.v[i]);
        }

    std::vector<bool> keep(comps.size());
    for (size_t c = 0; c < comps.size(); ++c) keep[c] = comps[c].area >= min_area;
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] > 0 && !keep[labels[i] - 1]) res.segmentation.v[i] = 0.0f;
    for (size_t c = 0; c < comps.size(); ++c)
        if (keep[c]) res.components.push_back(comps[c]);

    res.anomalous = !res.components.empty();
    float peak = 0.0f;
    for (const float v : s.v) peak = std::max(peak, v);
    res.image_score = peak;
    return res;
}

Prediction predict(nn::Network& net, const Tensor& x, const PostprocessConfig& post) {
    Prediction p;
    p.reconstruction = net.forward(x, /*training=*/false);
    p.raw = heatmap(p.reconstruction, x);
    p.smoothed = smooth(p.raw, post.sigma_for(std::min(x.h, x.w)));
    p.detection = segment(p.smoothed, post.threshold, post.min_area, post.eight_connectivity);
    return p;
}

namespace {

// viridis anchors (matplotlib), subsampled; linearly interpolated below.
constexpr float kViridis[][3] = {
    {0.267004f, 0.004874f, 0.329415f}, {0.282623f, 0.140926f, 0.457517f},
    {0.253935f, 0.265254f, 0.529983f}, {0.206756f, 0.371758f, 0.553117f},
    {0.163625f, 0.471133f, 0.558148f}, {0.127568f, 0.566949f, 0.550556f},
    {0.134692f, 0.658636f, 0.517649f}, {0.266941f, 0.748751f, 0.440573f},
    {0.477504f, 0.821444f, 0.318195f}, {0.741388f, 0.873449f, 0.149561f},
    {0.993248f, 0.906157f, 0.143936f}};
constexpr int kViridisN = static_cast<int>(sizeof(kViridis) / sizeof(kViridis[0]));

}  // namespace

Tensor colorize_heatmap(const Tensor& scores) {
    Tensor rgb = Tensor::image(3, scores.h, scores.w);
    for (int y = 0; y < scores.h; ++y)
        for (int x = 0; x < scores.w; ++x) {
            const float v = std::clamp(scores.at(0, 0, y, x), 0.0f, 1.0f);
            const float pos = v * (kViridisN - 1);
            const int i0 = std::min(static_cast<int>(pos), kViridisN - 2);
            const float f = pos - i0;
            for (int ci = 0; ci < 3; ++ci)
                rgb.at(0, ci, y, x) = kViridis[i0][ci] * (1.0f - f) + kViridis[i0 + 1][ci] * f;
        }
    return rgb;
}

}  // namespace ssae
