#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ssae/rng.hpp"
#include "ssae/tensor.hpp"

namespace ssae::nn {

struct Shape3 {
    int c = 0, h = 0, w = 0;
    bool operator==(const Shape3&) const = default;
};

// Named view of a parameter (or state) tensor plus its gradient slot.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;  // null for non-trainable state (running stats)
};

class Layer {
   public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    // Consumes the state cached by the last training-mode forward.
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual Shape3 output_shape(const Shape3& in) const = 0;
    virtual const char* kind() const = 0;
    virtual std::string describe() const { return kind(); }
    virtual void collect(const std::string& prefix, std::vector<ParamRef>& params,
                         std::vector<ParamRef>& state) {}
    virtual void init_params(Rng&) {}
};

class Conv2d final : public Layer {
   public:
    Conv2d(int in_c, int out_c, int ksize, int dilation = 1, bool with_bias = false);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override { return {out_c_, in.h, in.w}; }
    const char* kind() const override { return "conv"; }
    std::string describe() const override;
    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<ParamRef>& state) override;
    void init_params(Rng& rng) override;

    int in_channels() const { return in_c_; }
    int out_channels() const { return out_c_; }
    int kernel() const { return k_; }
    int dilation() const { return d_; }
    bool has_bias() const { return bias_; }

   private:
    int in_c_, out_c_, k_, d_;
    bool bias_;
    Tensor w_, b_, dw_, db_;
    Tensor cached_x_;
};

class ConvTranspose2d final : public Layer {
   public:
    // 3x3 kernel, stride 2; output sizes exactly double (pad 1, output pad 1).
    ConvTranspose2d(int in_c, int out_c);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override { return {out_c_, in.h * 2, in.w * 2}; }
    const char* kind() const override { return "tconv"; }
    std::string describe() const override;
    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<ParamRef>& state) override;
    void init_params(Rng& rng) override;

   private:
    int in_c_, out_c_;
    Tensor w_, dw_;  // (out_c, in_c, 3, 3)
    Tensor cached_x_;
};

class BatchNorm2d final : public Layer {
   public:
    explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override { return in; }
    const char* kind() const override { return "bn"; }
    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<ParamRef>& state) override;

   private:
    int c_;
    double momentum_, eps_;
    Tensor gamma_, beta_, dgamma_, dbeta_;
    Tensor running_mean_, running_var_;
    Tensor cached_xhat_;
    std::vector<double> cached_invstd_;
};

class ReLU final : public Layer {
   public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override { return in; }
    const char* kind() const override { return "relu"; }

   private:
    Tensor cached_y_;
};

class Sigmoid final : public Layer {
   public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override { return in; }
    const char* kind() const override { return "sigmoid"; }

   private:
    Tensor cached_y_;
};

class MaxPool2 final : public Layer {
   public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override { return {in.c, in.h / 2, in.w / 2}; }
    const char* kind() const override { return "maxpool"; }

   private:
    std::vector<uint8_t> cached_argmax_;
    int cached_n_ = 0, cached_c_ = 0, cached_h_ = 0, cached_w_ = 0;
};

// Stacked dilated convolution: parallel 5x5 convolutions at the configured
// dilation rates, each followed by batch normalisation and ReLU, outputs
// channel-concatenated.
class SdcBlock final : public Layer {
   public:
    SdcBlock(int in_c, int branch_c, const std::vector<int>& dilations);
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& dy) override;
    Shape3 output_shape(const Shape3& in) const override {
        return {branch_c_ * static_cast<int>(convs_.size()), in.h, in.w};
    }
    const char* kind() const override { return "sdc"; }
    std::string describe() const override;
    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<ParamRef>& state) override;
    void init_params(Rng& rng) override;

   private:
    int branch_c_;
    std::vector<std::unique_ptr<Conv2d>> convs_;
    std::vector<std::unique_ptr<BatchNorm2d>> bns_;
    std::vector<std::unique_ptr<ReLU>> relus_;
};

// ---------------------------------------------------------------------------

struct ModelConfig {
    int input_side = 512;
    int base_width = 32;
    std::vector<int> dilations = {1, 2, 4, 8, 16};
    int sdc_stacks = 4;
    double width_scale = 1.0;  // desk-scale variants shrink channel widths

    int width(int multiple = 1) const;
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct LayerShape {
    std::string describe;
    Shape3 shape;
};

// Encoder / SDC middle / decoder autoencoder mapping [0,1]^{n x m x 3} onto
// itself; fully convolutional, so any input side divisible by 8 works.
class Network {
   public:
    explicit Network(const ModelConfig& cfg);

    Tensor forward(const Tensor& batch, bool training = false);
    Tensor backward(const Tensor& dloss_dout);

    void init_params(uint64_t seed);
    std::vector<ParamRef> params();
    std::vector<ParamRef> state();
    const ModelConfig& config() const { return cfg_; }
    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

    // Arithmetic per-layer output shapes for a given input side.
    std::vector<LayerShape> shape_walk(int h, int w) const;

    long forward_count() const { return forward_count_; }

   private:
    ModelConfig cfg_;
    std::vector<std::unique_ptr<Layer>> layers_;
    long forward_count_ = 0;
};

// ---------------------------------------------------------------------------

class Adam {
   public:
    Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);
    void step();
    void zero_grad();

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    long step_count() const { return t_; }

    // Flat (m, v, t) state for checkpointing; layout follows the param order.
    std::vector<float> serialize_state() const;
    void restore_state(const std::vector<float>& blob, long t);

   private:
    std::vector<ParamRef> params_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

}  // namespace ssae::nn
