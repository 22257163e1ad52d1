#pragma once

#include <cstdint>
#include <vector>

#include "owd/core.hpp"

namespace owd {

// Fully-connected layer. Weights are kept in both (out x in) and transposed
// layouts so every hot loop in forward/backward runs with a contiguous
// inner dimension; sync_transpose() refreshes the copy after an update.
struct LinearLayer {
    std::int32_t in = 0, out = 0;
    std::vector<float> w;   // out x in
    std::vector<float> wt;  // in x out
    std::vector<float> b;   // out

    void sync_transpose();
};

// Feature refiner (three FC+ReLU+dropout layers down to 128) plus a softmax
// classifier head.
struct Network {
    static constexpr std::int32_t kHidden = 512;
    static constexpr std::int32_t kFeatureDim = 128;

    std::int32_t d_in = 0;
    std::int32_t n_classes = 0;
    LinearLayer fc1, fc2, fc3, head;
};

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::int32_t batch = 256;
    std::int32_t epochs = 100;
    double dropout = 0.5;
    std::uint64_t seed = 0;
};

// Kaiming-uniform weights, zero biases; deterministic given rng.
Network init_network(std::int32_t d_in, std::int32_t n_classes, Rng& rng);

// Warm start: refiner weights copied from prev, head freshly initialized.
Network rebuild_head(const Network& prev, std::int32_t n_classes, Rng& rng);

// Minimizes the mean cross-entropy over the clustered set plus the mean
// over the labeled set. Each minibatch is half clustered / half labeled,
// each half normalized by its own size; with an empty clustered set the
// whole batch is labeled and the objective is plain cross-entropy.
// Labels must lie in [0, n_classes). Returns per-epoch mean loss.
std::vector<double> train(Network& net, const FeatureMatrix& labeled_x,
                          const std::vector<std::int64_t>& labeled_y,
                          const FeatureMatrix& clustered_x,
                          const std::vector<std::int64_t>& clustered_y, const TrainConfig& cfg);

// Eval-mode refiner output (n x 128), dropout off, deterministic.
FeatureMatrix extract_features(const Network& net, const FeatureMatrix& x);

struct ClassifyResult {
    std::vector<std::int64_t> labels;  // argmax, ties to the lowest class
    FeatureMatrix probs;               // n x n_classes softmax rows
};
ClassifyResult classify_batch(const Network& net, const FeatureMatrix& x);

// Max relative error between analytic gradients and central finite
// differences (h = 1e-3), both evaluated in double precision on a
// dropout-free copy of the network. Weights are probed on a fixed stride,
// biases exhaustively.
double gradcheck(const Network& net, const FeatureMatrix& x, const std::vector<std::int64_t>& y,
                 const std::vector<double>& sample_weights = {});

// Double-precision reference loss/gradient used by gradcheck and tests.
struct ReferenceGrads {
    std::vector<double> w1, b1, w2, b2, w3, b3, wh, bh;
};
double reference_loss(const Network& net, const FeatureMatrix& x,
                      const std::vector<std::int64_t>& y, const std::vector<double>& sample_weights,
                      ReferenceGrads* grads);

}  // namespace owd
