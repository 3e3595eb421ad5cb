#pragma once

#include <cassert>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssae {

// Dense float tensor in NCHW layout. Images are n=1, c=3 (or c=1 for masks
// and heatmaps), values in [0,1]. The same type carries network activations.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {}

    static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }
    static Tensor full(int n, int c, int h, int w, float value) {
        Tensor t(n, c, h, w);
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }
    // Single image helper (n=1).
    static Tensor image(int channels, int height, int width) { return Tensor(1, channels, height, width); }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    size_t plane() const { return static_cast<size_t>(h) * w; }

    size_t idx(int b, int ci, int y, int x) const {
        assert(b >= 0 && b < n && ci >= 0 && ci < c && y >= 0 && y < h && x >= 0 && x < w);
        return ((static_cast<size_t>(b) * c + ci) * h + y) * w + x;
    }
    float& at(int b, int ci, int y, int x) { return v[idx(b, ci, y, x)]; }
    float at(int b, int ci, int y, int x) const { return v[idx(b, ci, y, x)]; }

    float* channel(int b, int ci) { return v.data() + (static_cast<size_t>(b) * c + ci) * plane(); }
    const float* channel(int b, int ci) const { return v.data() + (static_cast<size_t>(b) * c + ci) * plane(); }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    std::string shape_str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }

    // Copies image b of a batch into a standalone n=1 tensor.
    Tensor slice(int b) const {
        Tensor out(1, c, h, w);
        const size_t len = static_cast<size_t>(c) * plane();
        std::copy(v.begin() + b * len, v.begin() + (b + 1) * len, out.v.begin());
        return out;
    }
    void set_slice(int b, const Tensor& img) {
        if (img.n != 1 || img.c != c || img.h != h || img.w != w)
            throw std::invalid_argument("set_slice: shape mismatch " + img.shape_str() + " vs " + shape_str());
        const size_t len = static_cast<size_t>(c) * plane();
        std::copy(img.v.begin(), img.v.end(), v.begin() + b * len);
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace ssae
