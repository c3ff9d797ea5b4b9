#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stratus/network.hpp"

namespace stratus {

struct TrainerConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    int patience = 20;            // epochs without validation-Brier improvement
    int plateau_epochs = 10;      // epochs without improvement before the LR drops
    double plateau_factor = 0.1;
    int max_epochs = 200;
    std::uint64_t seed = 1;
    float prob_clamp = 1e-7f;
};

// One sample per day: the two input tensors (batch dim 1) and the labels of
// the mask-valid pixels in gather order.
struct NetDataset {
    std::vector<Tensor<float>> main;
    std::vector<Tensor<float>> late;
    std::vector<std::vector<std::uint8_t>> labels;

    std::size_t size() const { return main.size(); }
};

struct EpochStats {
    int epoch;          // 1-based
    double train_loss;  // mean masked log loss over the epoch's batches
    double val_brier;
    double lr;
};

struct TrainResult {
    Weights<float> weights;  // best-validation epoch, restored
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_brier = 0.0;
    bool diverged = false;
};

TrainResult train(const NetworkSpec& net, const Weights<float>& initial, const NetDataset& train_set,
                  const NetDataset& validation_set, const std::vector<std::int32_t>& gather,
                  const TrainerConfig& cfg);

// Inference-mode predictions for every day, concatenated in day order.
std::vector<double> predict(const NetworkSpec& net, const Weights<float>& weights,
                            const NetDataset& data, const std::vector<std::int32_t>& gather);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

} // namespace stratus
