#include "ssae/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ssae {

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
    if (img.n != 1) throw std::invalid_argument("resize_bilinear expects n=1");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: bad target size");
    if (out_h == img.h && out_w == img.w) return img;

    Tensor out = Tensor::image(img.c, out_h, out_w);
    const double sy = static_cast<double>(img.h) / out_h;
    const double sx = static_cast<double>(img.w) / out_w;
    for (int ci = 0; ci < img.c; ++ci) {
        const float* src = img.channel(0, ci);
        float* dst = out.channel(0, ci);
        for (int y = 0; y < out_h; ++y) {
            const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
            const int y0 = std::min(static_cast<int>(fy), img.h - 1);
            const int y1 = std::min(y0 + 1, img.h - 1);
            const double wy = fy - y0;
            for (int x = 0; x < out_w; ++x) {
                const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
                const int x0 = std::min(static_cast<int>(fx), img.w - 1);
                const int x1 = std::min(x0 + 1, img.w - 1);
                const double wx = fx - x0;
                const double top = src[y0 * img.w + x0] * (1 - wx) + src[y0 * img.w + x1] * wx;
                const double bot = src[y1 * img.w + x0] * (1 - wx) + src[y1 * img.w + x1] * wx;
                dst[y * out_w + x] = static_cast<float>(top * (1 - wy) + bot * wy);
            }
        }
    }
    return out;
}

Tensor resize_nearest(const Tensor& img, int out_h, int out_w) {
    if (img.n != 1) throw std::invalid_argument("resize_nearest expects n=1");
    Tensor out = Tensor::image(img.c, out_h, out_w);
    for (int ci = 0; ci < img.c; ++ci) {
        const float* src = img.channel(0, ci);
        float* dst = out.channel(0, ci);
        for (int y = 0; y < out_h; ++y) {
            const int sy = std::min(static_cast<int>((y + 0.5) * img.h / out_h), img.h - 1);
            for (int x = 0; x < out_w; ++x) {
                const int sx = std::min(static_cast<int>((x + 0.5) * img.w / out_w), img.w - 1);
                dst[y * out_w + x] = src[sy * img.w + sx];
            }
        }
    }
    return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& x : k) x /= sum;
    return k;
}

inline int reflect(int i, int len) {
    // Reflect about edges (no repeated border sample), e.g. -1 -> 1, len -> len-2.
    if (len == 1) return 0;
    const int period = 2 * (len - 1);
    i = std::abs(i) % period;
    return i < len ? i : period - i;
}

}  // namespace

Tensor gaussian_blur(const Tensor& img, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_blur: sigma must be >= 0");
    if (sigma == 0.0 || img.empty()) return img;

    const std::vector<double> k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);
    Tensor tmp(img.n, img.c, img.h, img.w);
    Tensor out(img.n, img.c, img.h, img.w);
    for (int b = 0; b < img.n; ++b)
        for (int ci = 0; ci < img.c; ++ci) {
            const float* src = img.channel(b, ci);
            float* mid = tmp.channel(b, ci);
            // horizontal pass
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x) {
                    double acc = 0.0;
                    for (int t = -radius; t <= radius; ++t)
                        acc += k[t + radius] * src[y * img.w + reflect(x + t, img.w)];
                    mid[y * img.w + x] = static_cast<float>(acc);
                }
            // vertical pass
            float* dst = out.channel(b, ci);
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x) {
                    double acc = 0.0;
                    for (int t = -radius; t <= radius; ++t)
                        acc += k[t + radius] * mid[reflect(y + t, img.h) * img.w + x];
                    dst[y * img.w + x] = static_cast<float>(acc);
                }
        }
    return out;
}

Tensor rotate90(const Tensor& img, int k) {
    k = ((k % 4) + 4) % 4;
    if (k == 0) return img;
    if (img.n != 1) throw std::invalid_argument("rotate90 expects n=1");
    if (k == 2) {
        Tensor out = Tensor::image(img.c, img.h, img.w);
        for (int ci = 0; ci < img.c; ++ci)
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x)
                    out.at(0, ci, y, x) = img.at(0, ci, img.h - 1 - y, img.w - 1 - x);
        return out;
    }
    // Quarter turns transpose the spatial dims. Clockwise: out(y,x) = in(H-1-x, y).
    Tensor out = Tensor::image(img.c, img.w, img.h);
    for (int ci = 0; ci < img.c; ++ci)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x)
                out.at(0, ci, y, x) = (k == 1) ? img.at(0, ci, img.h - 1 - x, y)
                                               : img.at(0, ci, x, img.w - 1 - y);
    return out;
}

Tensor flip_horizontal(const Tensor& img) {
    Tensor out = img;
    for (int b = 0; b < img.n; ++b)
        for (int ci = 0; ci < img.c; ++ci)
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x)
                    out.at(b, ci, y, x) = img.at(b, ci, y, img.w - 1 - x);
    return out;
}

Tensor flip_vertical(const Tensor& img) {
    Tensor out = img;
    for (int b = 0; b < img.n; ++b)
        for (int ci = 0; ci < img.c; ++ci)
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x)
                    out.at(b, ci, y, x) = img.at(b, ci, img.h - 1 - y, x);
    return out;
}

}  // namespace ssae
