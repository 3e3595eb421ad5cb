#include "ssae/nn.hpp"

#include <algorithm>
#include <cmath>

namespace ssae::nn {

namespace {

// Direct same-padding stride-1 convolution, NCHW. Each output element is
// written by exactly one thread and every reduction runs in a fixed order,
// so results are bit-identical for any thread count.
void conv2d_forward_kernel(const Tensor& x, const Tensor& w, const Tensor* bias, int dilation,
                           Tensor& y) {
    const int n = x.n, ic = w.c, oc = w.n, k = w.h, H = x.h, W = x.w;
    const int center = k / 2;
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < n; ++b)
        for (int o = 0; o < oc; ++o) {
            float* yplane = y.channel(b, o);
            const float binit = bias ? bias->v[o] : 0.0f;
            std::fill(yplane, yplane + y.plane(), binit);
            for (int i = 0; i < ic; ++i) {
                const float* xplane = x.channel(b, i);
                const float* wk = &w.v[((static_cast<size_t>(o) * ic + i) * k) * k];
                for (int oh = 0; oh < H; ++oh) {
                    float* yrow = yplane + static_cast<size_t>(oh) * W;
                    for (int kh = 0; kh < k; ++kh) {
                        const int ih = oh + (kh - center) * dilation;
                        if (ih < 0 || ih >= H) continue;
                        const float* xrow = xplane + static_cast<size_t>(ih) * W;
                        for (int kw = 0; kw < k; ++kw) {
                            const int shift = (kw - center) * dilation;
                            const float wv = wk[kh * k + kw];
                            const int lo = std::max(0, -shift);
                            const int hi = std::min(W, W - shift);
                            const float* xs = xrow + shift;
                            for (int ow = lo; ow < hi; ++ow) yrow[ow] += wv * xs[ow];
                        }
                    }
                }
            }
        }
}

void conv2d_weight_grad_kernel(const Tensor& x, const Tensor& dy, int dilation, Tensor& dw,
                               Tensor* db) {
    const int n = x.n, ic = dw.c, oc = dw.n, k = dw.h, H = x.h, W = x.w;
    const int center = k / 2;
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        for (int i = 0; i < ic; ++i)
            for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw) {
                    const int sh = (kh - center) * dilation;
                    const int sw = (kw - center) * dilation;
                    const int lo = std::max(0, -sw);
                    const int hi = std::min(W, W - sw);
                    double acc = 0.0;
                    for (int b = 0; b < n; ++b) {
                        const float* dyp = dy.channel(b, o);
                        const float* xp = x.channel(b, i);
                        for (int oh = 0; oh < H; ++oh) {
                            const int ih = oh + sh;
                            if (ih < 0 || ih >= H) continue;
                            const float* dr = dyp + static_cast<size_t>(oh) * W;
                            const float* xr = xp + static_cast<size_t>(ih) * W + sw;
                            double s = 0.0;
                            for (int ow = lo; ow < hi; ++ow) s += static_cast<double>(dr[ow]) * xr[ow];
                            acc += s;
                        }
                    }
                    dw.v[((static_cast<size_t>(o) * ic + i) * k + kh) * k + kw] = static_cast<float>(acc);
                }
        if (db) {
            double acc = 0.0;
            for (int b = 0; b < n; ++b) {
                const float* dyp = dy.channel(b, o);
                for (size_t t = 0; t < dy.plane(); ++t) acc += dyp[t];
            }
            db->v[o] = static_cast<float>(acc);
        }
    }
}

Tensor flip_transpose_weights(const Tensor& w) {
    const int oc = w.n, ic = w.c, k = w.h;
    Tensor wt(ic, oc, k, k);
    for (int o = 0; o < oc; ++o)
        for (int i = 0; i < ic; ++i)
            for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw)
                    wt.at(i, o, kh, kw) = w.at(o, i, k - 1 - kh, k - 1 - kw);
    return wt;
}

}  // namespace

// ----------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_c, int out_c, int ksize, int dilation, bool with_bias)
    : in_c_(in_c), out_c_(out_c), k_(ksize), d_(dilation), bias_(with_bias) {
    if (ksize % 2 == 0) throw std::invalid_argument("Conv2d requires an odd kernel size");
    w_ = Tensor(out_c, in_c, k_, k_);
    dw_ = Tensor(out_c, in_c, k_, k_);
    if (bias_) {
        b_ = Tensor(out_c, 1, 1, 1);
        db_ = Tensor(out_c, 1, 1, 1);
    }
}

std::string Conv2d::describe() const {
    return "conv" + std::to_string(k_) + "x" + std::to_string(k_) +
           (d_ > 1 ? " d" + std::to_string(d_) : "") + " -> " + std::to_string(out_c_);
}

void Conv2d::init_params(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in_c_) * k_ * k_));
    for (float& f : w_.v) f = static_cast<float>(rng.normal(0.0, stddev));
    if (bias_) std::fill(b_.v.begin(), b_.v.end(), 0.0f);
}

Tensor Conv2d::forward(const Tensor& x, bool training) {
    if (x.c != in_c_)
        throw std::invalid_argument("Conv2d: expected " + std::to_string(in_c_) + " channels, got " +
                                    x.shape_str());
    Tensor y(x.n, out_c_, x.h, x.w);
    conv2d_forward_kernel(x, w_, bias_ ? &b_ : nullptr, d_, y);
    if (training) cached_x_ = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    conv2d_weight_grad_kernel(cached_x_, dy, d_, dw_, bias_ ? &db_ : nullptr);
    Tensor dx(dy.n, in_c_, dy.h, dy.w);
    const Tensor wt = flip_transpose_weights(w_);
    conv2d_forward_kernel(dy, wt, nullptr, d_, dx);
    return dx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& params,
                     std::vector<ParamRef>&) {
    params.push_back({prefix + ".weight", &w_, &dw_});
    if (bias_) params.push_back({prefix + ".bias", &b_, &db_});
}

// -------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_c, int out_c) : in_c_(in_c), out_c_(out_c) {
    w_ = Tensor(out_c, in_c, 3, 3);
    dw_ = Tensor(out_c, in_c, 3, 3);
}

std::string ConvTranspose2d::describe() const {
    return "tconv3x3 /2 -> " + std::to_string(out_c_);
}

void ConvTranspose2d::init_params(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in_c_) * 9));
    for (float& f : w_.v) f = static_cast<float>(rng.normal(0.0, stddev));
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool training) {
    if (x.c != in_c_)
        throw std::invalid_argument("ConvTranspose2d: expected " + std::to_string(in_c_) +
                                    " channels, got " + x.shape_str());
    const int H = x.h, W = x.w, OH = 2 * H, OW = 2 * W;
    Tensor y(x.n, out_c_, OH, OW);
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < x.n; ++b)
        for (int o = 0; o < out_c_; ++o) {
            float* yp = y.channel(b, o);
            for (int i = 0; i < in_c_; ++i) {
                const float* xp = x.channel(b, i);
                const float* wk = &w_.v[(static_cast<size_t>(o) * in_c_ + i) * 9];
                for (int iy = 0; iy < H; ++iy)
                    for (int kh = 0; kh < 3; ++kh) {
                        const int oy = 2 * iy + kh - 1;
                        if (oy < 0 || oy >= OH) continue;
                        float* yrow = yp + static_cast<size_t>(oy) * OW;
                        const float* xrow = xp + static_cast<size_t>(iy) * W;
                        for (int kw = 0; kw < 3; ++kw) {
                            const float wv = wk[kh * 3 + kw];
                            // ox = 2*ix + kw - 1
                            const int ix_lo = kw == 0 ? 1 : 0;  // keep ox >= 0
                            for (int ix = ix_lo; ix < W; ++ix) {
                                const int ox = 2 * ix + kw - 1;
                                if (ox >= OW) break;
                                yrow[ox] += wv * xrow[ix];
                            }
                        }
                    }
            }
        }
    if (training) cached_x_ = x;
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
    const Tensor& x = cached_x_;
    const int H = x.h, W = x.w, OH = dy.h, OW = dy.w;
    Tensor dx(x.n, in_c_, H, W);
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < x.n; ++b)
        for (int i = 0; i < in_c_; ++i) {
            float* dxp = dx.channel(b, i);
            for (int o = 0; o < out_c_; ++o) {
                const float* dyp = dy.channel(b, o);
                const float* wk = &w_.v[(static_cast<size_t>(o) * in_c_ + i) * 9];
                for (int iy = 0; iy < H; ++iy) {
                    float* dxrow = dxp + static_cast<size_t>(iy) * W;
                    for (int kh = 0; kh < 3; ++kh) {
                        const int oy = 2 * iy + kh - 1;
                        if (oy < 0 || oy >= OH) continue;
                        const float* dyrow = dyp + static_cast<size_t>(oy) * OW;
                        for (int kw = 0; kw < 3; ++kw) {
                            const float wv = wk[kh * 3 + kw];
                            const int ix_lo = kw == 0 ? 1 : 0;
                            for (int ix = ix_lo; ix < W; ++ix) {
                                const int ox = 2 * ix + kw - 1;
                                if (ox >= OW) break;
                                dxrow[ix] += wv * dyrow[ox];
                            }
                        }
                    }
                }
            }
        }

#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_c_; ++o)
        for (int i = 0; i < in_c_; ++i)
            for (int kh = 0; kh < 3; ++kh)
                for (int kw = 0; kw < 3; ++kw) {
                    double acc = 0.0;
                    for (int b = 0; b < x.n; ++b) {
                        const float* xp = x.channel(b, i);
                        const float* dyp = dy.channel(b, o);
                        for (int iy = 0; iy < H; ++iy) {
                            const int oy = 2 * iy + kh - 1;
                            if (oy < 0 || oy >= OH) continue;
                            const float* xrow = xp + static_cast<size_t>(iy) * W;
                            const float* dyrow = dyp + static_cast<size_t>(oy) * OW;
                            double s = 0.0;
                            const int ix_lo = kw == 0 ? 1 : 0;
                            for (int ix = ix_lo; ix < W; ++ix) {
                                const int ox = 2 * ix + kw - 1;
                                if (ox >= OW) break;
                                s += static_cast<double>(xrow[ix]) * dyrow[ox];
                            }
                            acc += s;
                        }
                    }
                    dw_.at(o, i, kh, kw) = static_cast<float>(acc);
                }
    return dx;
}

void ConvTranspose2d::collect(const std::string& prefix, std::vector<ParamRef>& params,
                              std::vector<ParamRef>&) {
    params.push_back({prefix + ".weight", &w_, &dw_});
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : c_(channels), momentum_(momentum), eps_(eps) {
    gamma_ = Tensor::full(channels, 1, 1, 1, 1.0f);
    beta_ = Tensor(channels, 1, 1, 1);
    dgamma_ = Tensor(channels, 1, 1, 1);
    dbeta_ = Tensor(channels, 1, 1, 1);
    running_mean_ = Tensor(channels, 1, 1, 1);
    running_var_ = Tensor::full(channels, 1, 1, 1, 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
    if (x.c != c_) throw std::invalid_argument("BatchNorm2d: channel mismatch " + x.shape_str());
    Tensor y(x.n, x.c, x.h, x.w);
    const size_t plane = x.plane();
    if (training) {
        cached_xhat_ = Tensor(x.n, x.c, x.h, x.w);
        cached_invstd_.assign(c_, 0.0);
        const double count = static_cast<double>(x.n) * plane;
#pragma omp parallel for schedule(static)
        for (int ci = 0; ci < c_; ++ci) {
            double sum = 0.0, sum2 = 0.0;
            for (int b = 0; b < x.n; ++b) {
                const float* p = x.channel(b, ci);
                for (size_t t = 0; t < plane; ++t) {
                    sum += p[t];
                    sum2 += static_cast<double>(p[t]) * p[t];
                }
            }
            const double mean = sum / count;
            const double var = std::max(0.0, sum2 / count - mean * mean);
            const double invstd = 1.0 / std::sqrt(var + eps_);
            cached_invstd_[ci] = invstd;
            const double g = gamma_.v[ci], be = beta_.v[ci];
            for (int b = 0; b < x.n; ++b) {
                const float* p = x.channel(b, ci);
                float* xh = cached_xhat_.channel(b, ci);
                float* yp = y.channel(b, ci);
                for (size_t t = 0; t < plane; ++t) {
                    const double h = (p[t] - mean) * invstd;
                    xh[t] = static_cast<float>(h);
                    yp[t] = static_cast<float>(g * h + be);
                }
            }
            running_mean_.v[ci] = static_cast<float>((1.0 - momentum_) * running_mean_.v[ci] +
                                                     momentum_ * mean);
            running_var_.v[ci] = static_cast<float>((1.0 - momentum_) * running_var_.v[ci] +
                                                    momentum_ * var);
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int ci = 0; ci < c_; ++ci) {
            const double invstd = 1.0 / std::sqrt(static_cast<double>(running_var_.v[ci]) + eps_);
            const double mean = running_mean_.v[ci];
            const double g = gamma_.v[ci], be = beta_.v[ci];
            for (int b = 0; b < x.n; ++b) {
                const float* p = x.channel(b, ci);
                float* yp = y.channel(b, ci);
                for (size_t t = 0; t < plane; ++t)
                    yp[t] = static_cast<float>(g * ((p[t] - mean) * invstd) + be);
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
    const Tensor& xhat = cached_xhat_;
    Tensor dx(dy.n, dy.c, dy.h, dy.w);
    const size_t plane = dy.plane();
    const double count = static_cast<double>(dy.n) * plane;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < c_; ++ci) {
        double sdy = 0.0, sdyx = 0.0;
        for (int b = 0; b < dy.n; ++b) {
            const float* d = dy.channel(b, ci);
            const float* xh = xhat.channel(b, ci);
            for (size_t t = 0; t < plane; ++t) {
                sdy += d[t];
                sdyx += static_cast<double>(d[t]) * xh[t];
            }
        }
        dgamma_.v[ci] = static_cast<float>(sdyx);
        dbeta_.v[ci] = static_cast<float>(sdy);
        const double k1 = gamma_.v[ci] * cached_invstd_[ci];
        const double mdy = sdy / count, mdyx = sdyx / count;
        for (int b = 0; b < dy.n; ++b) {
            const float* d = dy.channel(b, ci);
            const float* xh = xhat.channel(b, ci);
            float* dxp = dx.channel(b, ci);
            for (size_t t = 0; t < plane; ++t)
                dxp[t] = static_cast<float>(k1 * (d[t] - mdy - xh[t] * mdyx));
        }
    }
    return dx;
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<ParamRef>& params,
                          std::vector<ParamRef>& state) {
    params.push_back({prefix + ".gamma", &gamma_, &dgamma_});
    params.push_back({prefix + ".beta", &beta_, &dbeta_});
    state.push_back({prefix + ".running_mean", &running_mean_, nullptr});
    state.push_back({prefix + ".running_var", &running_var_, nullptr});
}

// ---------------------------------------------------------- ReLU / Sigmoid

Tensor ReLU::forward(const Tensor& x, bool training) {
    Tensor y = x;
    for (float& f : y.v) f = f > 0.0f ? f : 0.0f;
    if (training) cached_y_ = y;
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.v.size(); ++i)
        if (cached_y_.v[i] <= 0.0f) dx.v[i] = 0.0f;
    return dx;
}

Tensor Sigmoid::forward(const Tensor& x, bool training) {
    Tensor y = x;
    for (float& f : y.v) f = 1.0f / (1.0f + std::exp(-f));
    if (training) cached_y_ = y;
    return y;
}

Tensor Sigmoid::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.v.size(); ++i) {
        const float s = cached_y_.v[i];
        dx.v[i] *= s * (1.0f - s);
    }
    return dx;
}

// ---------------------------------------------------------------- MaxPool2

Tensor MaxPool2::forward(const Tensor& x, bool training) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        throw std::invalid_argument("MaxPool2 requires even spatial dims, got " + x.shape_str());
    const int OH = x.h / 2, OW = x.w / 2;
    Tensor y(x.n, x.c, OH, OW);
    std::vector<uint8_t> argmax(training ? y.size() : 0);
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < x.n; ++b)
        for (int ci = 0; ci < x.c; ++ci) {
            const float* xp = x.channel(b, ci);
            float* yp = y.channel(b, ci);
            uint8_t* am = training ? argmax.data() + (static_cast<size_t>(b) * x.c + ci) * y.plane()
                                   : nullptr;
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    const int iy = 2 * oy, ix = 2 * ox;
                    const float cand[4] = {xp[iy * x.w + ix], xp[iy * x.w + ix + 1],
                                           xp[(iy + 1) * x.w + ix], xp[(iy + 1) * x.w + ix + 1]};
                    int best = 0;
                    for (int t = 1; t < 4; ++t)
                        if (cand[t] > cand[best]) best = t;
                    yp[oy * OW + ox] = cand[best];
                    if (am) am[oy * OW + ox] = static_cast<uint8_t>(best);
                }
        }
    if (training) {
        cached_argmax_ = std::move(argmax);
        cached_n_ = x.n;
        cached_c_ = x.c;
        cached_h_ = x.h;
        cached_w_ = x.w;
    }
    return y;
}

Tensor MaxPool2::backward(const Tensor& dy) {
    Tensor dx(cached_n_, cached_c_, cached_h_, cached_w_);
    const int OH = dy.h, OW = dy.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < dy.n; ++b)
        for (int ci = 0; ci < dy.c; ++ci) {
            const float* dyp = dy.channel(b, ci);
            float* dxp = dx.channel(b, ci);
            const uint8_t* am =
                cached_argmax_.data() + (static_cast<size_t>(b) * dy.c + ci) * dy.plane();
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    const int best = am[oy * OW + ox];
                    const int iy = 2 * oy + best / 2, ix = 2 * ox + best % 2;
                    dxp[iy * cached_w_ + ix] = dyp[oy * OW + ox];
                }
        }
    return dx;
}

// ---------------------------------------------------------------- SdcBlock

SdcBlock::SdcBlock(int in_c, int branch_c, const std::vector<int>& dilations) : branch_c_(branch_c) {
    if (dilations.empty()) throw std::invalid_argument("SdcBlock needs at least one dilation rate");
    for (int d : dilations) {
        convs_.push_back(std::make_unique<Conv2d>(in_c, branch_c, 5, d, false));
        bns_.push_back(std::make_unique<BatchNorm2d>(branch_c));
        relus_.push_back(std::make_unique<ReLU>());
    }
}

std::string SdcBlock::describe() const {
    std::string s = "sdc5x5 d{";
    for (size_t i = 0; i < convs_.size(); ++i)
        s += (i ? "," : "") + std::to_string(convs_[i]->dilation());
    return s + "} -> " + std::to_string(branch_c_ * static_cast<int>(convs_.size()));
}

Tensor SdcBlock::forward(const Tensor& x, bool training) {
    Tensor y(x.n, branch_c_ * static_cast<int>(convs_.size()), x.h, x.w);
    for (size_t br = 0; br < convs_.size(); ++br) {
        Tensor t = convs_[br]->forward(x, training);
        t = bns_[br]->forward(t, training);
        t = relus_[br]->forward(t, training);
        for (int b = 0; b < x.n; ++b)
            for (int ci = 0; ci < branch_c_; ++ci)
                std::copy(t.channel(b, ci), t.channel(b, ci) + t.plane(),
                          y.channel(b, static_cast<int>(br) * branch_c_ + ci));
    }
    return y;
}

Tensor SdcBlock::backward(const Tensor& dy) {
    Tensor dx;
    for (size_t br = 0; br < convs_.size(); ++br) {
        Tensor dbr(dy.n, branch_c_, dy.h, dy.w);
        for (int b = 0; b < dy.n; ++b)
            for (int ci = 0; ci < branch_c_; ++ci)
                std::copy(dy.channel(b, static_cast<int>(br) * branch_c_ + ci),
                          dy.channel(b, static_cast<int>(br) * branch_c_ + ci) + dy.plane(),
                          dbr.channel(b, ci));
        Tensor d = relus_[br]->backward(dbr);
        d = bns_[br]->backward(d);
        d = convs_[br]->backward(d);
        if (br == 0)
            dx = std::move(d);
        else
            for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += d.v[i];
    }
    return dx;
}

void SdcBlock::collect(const std::string& prefix, std::vector<ParamRef>& params,
                       std::vector<ParamRef>& state) {
    for (size_t br = 0; br < convs_.size(); ++br) {
        const std::string p = prefix + ".b" + std::to_string(br);
        convs_[br]->collect(p + ".conv", params, state);
        bns_[br]->collect(p + ".bn", params, state);
    }
}

void SdcBlock::init_params(Rng& rng) {
    for (auto& c : convs_) c->init_params(rng);
}

// ----------------------------------------------------------------- Network

int ModelConfig::width(int multiple) const {
    const int w = std::max(1, static_cast<int>(std::lround(base_width * width_scale)));
    return w * multiple;
}

void ModelConfig::validate() const {
    if (input_side < 8 || input_side % 8 != 0)
        throw std::invalid_argument("model input side must be a positive multiple of 8");
    if (base_width < 1) throw std::invalid_argument("base width must be >= 1");
    if (dilations.empty()) throw std::invalid_argument("dilation list must be nonempty");
    if (sdc_stacks < 1) throw std::invalid_argument("need at least one SDC stack");
    if (width_scale <= 0.0) throw std::invalid_argument("width scale must be positive");
}

Network::Network(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int W = cfg_.width();
    auto conv_bn_relu = [&](int in, int out) {
        layers_.push_back(std::make_unique<Conv2d>(in, out, 3));
        layers_.push_back(std::make_unique<BatchNorm2d>(out));
        layers_.push_back(std::make_unique<ReLU>());
    };

    // encoder: three blocks of (conv, conv, pool)
    int ch = 3;
    for (int blk = 0; blk < 3; ++blk) {
        const int out = W << blk;
        conv_bn_relu(ch, out);
        conv_bn_relu(out, out);
        layers_.push_back(std::make_unique<MaxPool2>());
        ch = out;
    }

    // middle: SDC stacks, then 3x3 fuse
    for (int s = 0; s < cfg_.sdc_stacks; ++s) {
        layers_.push_back(std::make_unique<SdcBlock>(ch, cfg_.width(2), cfg_.dilations));
        ch = cfg_.width(2) * static_cast<int>(cfg_.dilations.size());
    }
    conv_bn_relu(ch, cfg_.width(8));
    ch = cfg_.width(8);

    // decoder: three blocks of (tconv, conv, conv)
    for (int blk = 0; blk < 3; ++blk) {
        const int keep = cfg_.width(8 >> blk);
        const int narrow = cfg_.width(4 >> blk);
        layers_.push_back(std::make_unique<ConvTranspose2d>(ch, keep));
        layers_.push_back(std::make_unique<BatchNorm2d>(keep));
        layers_.push_back(std::make_unique<ReLU>());
        conv_bn_relu(keep, keep);
        conv_bn_relu(keep, narrow);
        ch = narrow;
    }

    // output head: 1x1 conv + sigmoid, deliberately without batch norm
    layers_.push_back(std::make_unique<Conv2d>(ch, 3, 1, 1, true));
    layers_.push_back(std::make_unique<Sigmoid>());
}

Tensor Network::forward(const Tensor& batch, bool training) {
    if (batch.c != 3)
        throw std::invalid_argument("network expects 3-channel input, got " + batch.shape_str());
    if (batch.h % 8 != 0 || batch.w % 8 != 0)
        throw std::invalid_argument("network input sides must be multiples of 8, got " +
                                    batch.shape_str());
    ++forward_count_;
    Tensor t = batch;
    for (auto& layer : layers_) t = layer->forward(t, training);
    return t;
}

Tensor Network::backward(const Tensor& dloss_dout) {
    Tensor d = dloss_dout;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
    return d;
}

void Network::init_params(uint64_t seed) {
    Rng rng(derive_seed(seed, 0x696e6974)) /* "init" */;
    for (auto& layer : layers_) layer->init_params(rng);
}

std::vector<ParamRef> Network::params() {
    std::vector<ParamRef> params, state;
    char buf[8];
    for (size_t i = 0; i < layers_.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "L%02zu", i);
        layers_[i]->collect(buf, params, state);
    }
    return params;
}

std::vector<ParamRef> Network::state() {
    std::vector<ParamRef> params, state;
    char buf[8];
    for (size_t i = 0; i < layers_.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "L%02zu", i);
        layers_[i]->collect(buf, params, state);
    }
    return state;
}

std::vector<LayerShape> Network::shape_walk(int h, int w) const {
    std::vector<LayerShape> out;
    Shape3 s{3, h, w};
    for (const auto& layer : layers_) {
        s = layer->output_shape(s);
        out.push_back({layer->describe(), s});
    }
    return out;
}

// -------------------------------------------------------------------- Adam

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p.value->size(), 0.0f);
        v_.emplace_back(p.value->size(), 0.0f);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t p = 0; p < params_.size(); ++p) {
        float* w = params_[p].value->v.data();
        const float* g = params_[p].grad->v.data();
        float* m = m_[p].data();
        float* v = v_[p].data();
        const size_t sz = params_[p].value->size();
#pragma omp parallel for schedule(static)
        for (long i = 0; i < static_cast<long>(sz); ++i) {
            const double gi = g[i];
            const double mi = beta1_ * m[i] + (1.0 - beta1_) * gi;
            const double vi = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            w[i] -= static_cast<float>(lr_ * (mi / bc1) / (std::sqrt(vi / bc2) + eps_));
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) std::fill(p.grad->v.begin(), p.grad->v.end(), 0.0f);
}

std::vector<float> Adam::serialize_state() const {
    std::vector<float> blob;
    for (size_t p = 0; p < params_.size(); ++p) {
        blob.insert(blob.end(), m_[p].begin(), m_[p].end());
        blob.insert(blob.end(), v_[p].begin(), v_[p].end());
    }
    return blob;
}

void Adam::restore_state(const std::vector<float>& blob, long t) {
    size_t off = 0;
    for (size_t p = 0; p < params_.size(); ++p) {
        const size_t sz = m_[p].size();
        if (off + 2 * sz > blob.size()) throw std::runtime_error("optimizer state blob too short");
        std::copy(blob.begin() + off, blob.begin() + off + sz, m_[p].begin());
        off += sz;
        std::copy(blob.begin() + off, blob.begin() + off + sz, v_[p].begin());
        off += sz;
    }
    if (off != blob.size()) throw std::runtime_error("optimizer state blob size mismatch");
    t_ = t;
}

}  // namespace ssae::nn
