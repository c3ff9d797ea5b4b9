#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stratus/geometry.hpp"
#include "stratus/tensor.hpp"

namespace stratus {

enum class LayerKind {
    input_main,
    input_late,
    conv,       // same-padded k x k convolution
    batchnorm,
    relu,
    maxpool,    // 2x2 with argmax
    unpool,     // paired with an earlier maxpool
    upsample,   // nearest-neighbor 2x (unpooling disabled)
    concat,
    sigmoid,
    mask_gather
};

struct LayerSpec {
    LayerKind kind;
    std::string name;
    int input = -1;                 // producing node (unused for inputs)
    int out_channels = 0;           // conv only
    int kernel = 3;                 // conv only
    int pool_pair = -1;             // unpool: node id of the paired maxpool
    std::vector<int> concat_inputs; // concat only
    // filled by infer_shapes():
    int h = 0, w = 0, c = 0;
};

struct NetworkSpec {
    std::vector<LayerSpec> layers;  // topological order; node id = index
    int input_height = 0, input_width = 0;
    int input_channels = 0, late_channels = 0;

    void infer_shapes();  // validates wiring, fills h/w/c
    int output_node() const { return int(layers.size()) - 1; }
};

// Trainable state of one layer. conv: a=kernel [ky][kx][cin][cout], b=bias.
// batchnorm: a=gamma, b=beta, rm/rv=running mean/variance (non-trainable).
template <typename T>
struct LayerParams {
    std::vector<T> a, b, rm, rv;
};

template <typename T>
struct Weights {
    std::vector<LayerParams<T>> layer;

    std::size_t trainable_count() const {
        std::size_t n = 0;
        for (const auto& l : layer) n += l.a.size() + l.b.size();
        return n;
    }
};

// Glorot-uniform conv kernels, zero biases, identity batchnorm; deterministic
// in (seed).
template <typename T>
Weights<T> init_weights(const NetworkSpec& net, std::uint64_t seed);

// Flat list of gather offsets (row-major valid cells) for a mask whose
// geometry matches the network input.
std::vector<std::int32_t> gather_offsets(const Mask& mask);

// Everything the backward pass needs from a forward pass.
template <typename T>
struct ForwardCache {
    std::vector<Tensor<T>> act;
    std::vector<std::vector<std::int32_t>> pool_index;  // per maxpool node
    std::vector<std::vector<T>> bn_mean, bn_inv_sd;     // per batchnorm node (training stats)
    std::vector<T> output;                              // gathered probabilities, b * n_valid
};

// training=true uses batch statistics and updates running averages.
template <typename T>
void forward(const NetworkSpec& net, Weights<T>& weights, const Tensor<T>& main_input,
             const Tensor<T>& late_input, const std::vector<std::int32_t>& gather,
             bool training, ForwardCache<T>& cache);

// Mean masked negative log-likelihood and its gradient w.r.t. the gathered
// probabilities. Probabilities are clamped to [clamp, 1-clamp] inside the log.
template <typename T>
T masked_log_loss(const std::vector<T>& probs, const std::vector<std::uint8_t>& labels, T clamp,
                  std::vector<T>* dprobs);

// Reverse-mode gradients for every trainable parameter; dprobs is the loss
// gradient w.r.t. the gathered output.
template <typename T>
void backward(const NetworkSpec& net, const Weights<T>& weights, const ForwardCache<T>& cache,
              const std::vector<std::int32_t>& gather, const std::vector<T>& dprobs,
              Weights<T>& grads);

// Persist float weights: raw little-endian 32-bit floats plus a text manifest
// (layer name, role, count, byte offset).
void save_weights(const std::string& path_prefix, const NetworkSpec& net,
                  const Weights<float>& weights);
Weights<float> load_weights(const std::string& path_prefix, const NetworkSpec& net);

} // namespace stratus
