#pragma once

#include <memory>

#include "latkit/core/tensor.hpp"
#include "latkit/nn/layers.hpp"

namespace latkit::mi {

// A batch of K embedded view pairs compared by cosine similarity at
// temperature tau. Embeddings are L2-normalized inside the loss, so callers
// may pass raw encoder outputs.
struct InfoNCEBatch {
    Tensor anchors;    // (K, d)
    Tensor positives;  // (K, d)
    double tau = 0.1;
};

struct InfoNCEGrad {
    double loss = 0.0;
    Tensor danchors;    // dloss/danchors, same shape as anchors
    Tensor dpositives;  // dloss/dpositives
};

// Symmetric contrastive cross-entropy over the 2K views: each view's positive
// is its pair and the remaining 2K-2 views are negatives; per-view losses are
// averaged. All-equal embeddings give exactly log(2K-1).
double infonce_loss(const InfoNCEBatch& batch);

// Loss plus analytic gradients with respect to the raw (unnormalized)
// embeddings.
InfoNCEGrad infonce_loss_grad(const InfoNCEBatch& batch);

// log(2K-1) - loss, in nats. May be negative (vacuous bound); returned as-is.
double mi_lower_bound(double loss, i64 k);

// Deterministic parametric encoder: image batch -> (B, embed_dim) embeddings.
class ProjectionEncoder {
public:
    ProjectionEncoder(std::unique_ptr<nn::Layer> net, i64 embed_dim)
        : net_(std::move(net)), embed_dim_(embed_dim) {}

    Tensor embed(const Tensor& x, bool train) { return net_->forward(x, train); }
    Tensor backward(const Tensor& dy) { return net_->backward(dy); }
    nn::Layer& net() { return *net_; }
    i64 embed_dim() const { return embed_dim_; }

private:
    std::unique_ptr<nn::Layer> net_;
    i64 embed_dim_;
};

}  // namespace latkit::mi
