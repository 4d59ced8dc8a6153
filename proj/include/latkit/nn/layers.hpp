#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "latkit/core/rng.hpp"
#include "latkit/core/tensor.hpp"

namespace latkit::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Param(std::string n, std::vector<i64> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

// Stateful module: forward stashes whatever backward needs, backward consumes
// the stash, accumulates parameter gradients (+=) and returns the input
// gradient. One backward per forward.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual void collect_params(std::vector<Param*>& out) { (void)out; }
    // Non-trained state that still belongs in checkpoints (e.g. running stats).
    virtual void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
        (void)out;
    }
    void zero_grad();
};

// y = x W + b, x is (batch, in), W is (in, out).
class Dense : public Layer {
public:
    Dense(std::string name, i64 in, i64 out, Rng& rng, bool bias = true,
          double init_scale = -1.0);  // default He-normal
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<Param*>& out) override;

    Param w;
    Param b;
    bool has_bias;

private:
    i64 in_, out_;
    Tensor x_;
};

class Conv2d : public Layer {
public:
    Conv2d(std::string name, i64 in_ch, i64 out_ch, i64 k, i64 stride, i64 pad,
           Rng& rng, bool bias = true);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<Param*>& out) override;

    Param w;  // (out_ch, in_ch, k, k)
    Param b;
    bool has_bias;

private:
    i64 in_ch_, out_ch_, k_, stride_, pad_;
    Tensor x_;
};

// Batch norm over (batch, C, H, W) or (batch, C) inputs; per-channel affine.
class BatchNorm : public Layer {
public:
    BatchNorm(std::string name, i64 channels, double eps = 1e-5,
              double momentum = 0.1);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<Param*>& out) override;

    Param gamma;
    Param beta;
    Tensor running_mean;
    Tensor running_var;
    void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) override;

private:
    std::string name_;
    i64 channels_;
    double eps_, momentum_;
    Tensor xhat_, batch_var_;
    std::vector<i64> in_shape_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;

private:
    Tensor x_;
};

// (batch, ...) -> (batch, prod(...)); backward restores the input shape.
class Flatten : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;

private:
    std::vector<i64> in_shape_;
};

class Sigmoid : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;

private:
    Tensor y_;
};

// (batch, C, H, W) -> (batch, C)
class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;

private:
    std::vector<i64> in_shape_;
};

// Nearest-neighbour 2x upsampling.
class Upsample2x : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;

private:
    std::vector<i64> in_shape_;
};

class Sequential : public Layer {
public:
    Sequential() = default;
    template <typename L, typename... Args>
    L* emplace(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }
    void append(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<Param*>& out) override;
    void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) override;
    size_t size() const { return layers_.size(); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// conv-bn-relu-conv-bn plus identity or projected skip, relu after the join.
class ResidualBlock : public Layer {
public:
    ResidualBlock(std::string name, i64 in_ch, i64 out_ch, i64 stride, Rng& rng);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<Param*>& out) override;
    void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) override;

private:
    Conv2d conv1_;
    BatchNorm bn1_;
    ReLU relu1_;
    Conv2d conv2_;
    BatchNorm bn2_;
    bool projected_;
    std::unique_ptr<Conv2d> skip_conv_;
    std::unique_ptr<BatchNorm> skip_bn_;
    Tensor sum_;  // pre-activation of the join
};

// All parameters of a layer tree, in collection order.
std::vector<Param*> parameters(Layer& layer);
i64 parameter_count(Layer& layer);

// Copies every parameter and buffer into / out of a checkpoint tensor list,
// matched by name. Loading throws SchemaError on missing names and ShapeError
// on shape mismatch.
void export_state(Layer& layer, std::vector<std::pair<std::string, Tensor>>& out);
void import_state(Layer& layer, const std::vector<std::pair<std::string, Tensor>>& in);

}  // namespace latkit::nn
