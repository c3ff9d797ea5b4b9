#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stratus/features.hpp"

namespace stratus {

struct LinearParams {
    double intercept = 0.0;
    std::vector<double> coefficients;
    std::vector<std::string> feature_order;
};

struct SgdConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    int patience = 5;
    int max_epochs = 200;
    std::uint64_t seed = 1;
};

struct LinearFitConfig {
    double inverse_regularization = 1.0;  // C of the penalty (1/C) * sum beta^2
    int max_iterations = 5000;
    double tolerance = 1e-10;             // on the relative loss decrease
    std::optional<std::pair<double, double>> class_weights;  // (w_pos, w_neg)
    enum class Optimizer { batch, sgd_early_stop } optimizer = Optimizer::batch;
    SgdConfig sgd;
};

// sigmoid(intercept + beta . x) per row.
std::vector<double> lr_predict(const LinearParams& params, const FeatureTable& table);

// Weighted mean negative log-likelihood plus (1/C) sum beta_i^2 (intercept
// unpenalized). Probabilities are clamped to [1e-15, 1-1e-15] before the log.
double penalized_loss(const LinearParams& params, const FeatureTable& table,
                      const LabelVector& labels, double C,
                      const std::optional<std::pair<double, double>>& weights = std::nullopt);

// Gradient of penalized_loss in (intercept, coefficients).
void penalized_loss_gradient(const LinearParams& params, const FeatureTable& table,
                             const LabelVector& labels, double C,
                             const std::optional<std::pair<double, double>>& weights,
                             double* d_intercept, std::vector<double>& d_coefficients);

// Full-gradient descent with backtracking line search to the convex minimum.
LinearParams lr_fit_batch(const FeatureTable& table, const LabelVector& labels,
                          const LinearFitConfig& config);

// Minibatch SGD with momentum, early-stopped on validation Brier; returns the
// best epoch's weights.
LinearParams lr_fit_sgd_earlystop(const FeatureTable& train, const LabelVector& train_labels,
                                  const FeatureTable& validation, const LabelVector& val_labels,
                                  const LinearFitConfig& config);

// King-Zeng "balanced" weights: w_c = N / (2 N_c).
std::pair<double, double> balanced_weights(const LabelVector& labels);

void write_linear_csv(const std::string& path, const LinearParams& params);

} // namespace stratus
