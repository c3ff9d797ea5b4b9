#include "stratus/linear.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "stratus/rng.hpp"
#include "stratus/verify.hpp"

namespace stratus {

namespace {

constexpr double kProbClamp = 1e-15;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_dims(const LinearParams& p, const FeatureTable& t) {
    if (p.coefficients.size() != t.n_cols())
        throw std::invalid_argument("linear: coefficient count does not match column count");
    if (!p.feature_order.empty() && p.feature_order != t.column_names)
        throw std::invalid_argument("linear: column order does not match fitted params");
}

std::vector<double> linear_scores(const LinearParams& p, const FeatureTable& t) {
    std::vector<double> z(t.n_rows(), p.intercept);
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
        const double b = p.coefficients[c];
        if (b == 0.0) continue;
        const auto& col = t.columns[c];
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += b * col[i];
    }
    return z;
}

} // namespace

std::vector<double> lr_predict(const LinearParams& params, const FeatureTable& table) {
    check_dims(params, table);
    std::vector<double> p = linear_scores(params, table);
    for (auto& v : p) v = sigmoid(v);
    return p;
}

double penalized_loss(const LinearParams& params, const FeatureTable& table,
                      const LabelVector& labels, double C,
                      const std::optional<std::pair<double, double>>& weights) {
    if (labels.size() != table.n_rows()) throw std::invalid_argument("linear: label count mismatch");
    if (!(C > 0.0)) throw std::invalid_argument("linear: C must be positive");
    check_dims(params, table);
    const std::vector<double> z = linear_scores(params, table);
    double loss = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double p = std::clamp(sigmoid(z[i]), kProbClamp, 1.0 - kProbClamp);
        const double w = weights ? (labels[i] ? weights->first : weights->second) : 1.0;
        loss += w * -(labels[i] ? std::log(p) : std::log(1.0 - p));
        wsum += w;
    }
    loss /= wsum;
    double penalty = 0.0;
    for (double b : params.coefficients) penalty += b * b;
    return loss + penalty / C;
}

void penalized_loss_gradient(const LinearParams& params, const FeatureTable& table,
                             const LabelVector& labels, double C,
                             const std::optional<std::pair<double, double>>& weights,
                             double* d_intercept, std::vector<double>& d_coefficients) {
    check_dims(params, table);
    const std::vector<double> z = linear_scores(params, table);
    std::vector<double> resid(z.size());
    double wsum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double p = sigmoid(z[i]);
        const double w = weights ? (labels[i] ? weights->first : weights->second) : 1.0;
        const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
        // d/dz of the clamped NLL: zero where the clamp is active
        resid[i] = (p > kProbClamp && p < 1.0 - kProbClamp)
                       ? w * (pc - double(labels[i]))
                       : 0.0;
        wsum += w;
    }
    double di = 0.0;
    for (double r : resid) di += r;
    *d_intercept = di / wsum;
    d_coefficients.assign(table.n_cols(), 0.0);
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
        const auto& col = table.columns[c];
        double s = 0.0;
        for (std::size_t i = 0; i < resid.size(); ++i) s += resid[i] * col[i];
        d_coefficients[c] = s / wsum + 2.0 * params.coefficients[c] / C;
    }
}

LinearParams lr_fit_batch(const FeatureTable& table, const LabelVector& labels,
                          const LinearFitConfig& config) {
    const std::size_t n_pos = std::size_t(std::accumulate(labels.begin(), labels.end(), 0));
    if (n_pos == 0 || n_pos == labels.size())
        throw std::invalid_argument("lr_fit_batch: need both classes present");

    LinearParams p;
    p.coefficients.assign(table.n_cols(), 0.0);
    p.feature_order = table.column_names;

    const double C = config.inverse_regularization;
    double loss = penalized_loss(p, table, labels, C, config.class_weights);
    double step = 1.0;
    std::vector<double> grad;
    double gi = 0.0;
    for (int it = 0; it < config.max_iterations; ++it) {
        penalized_loss_gradient(p, table, labels, C, config.class_weights, &gi, grad);
        double gnorm2 = gi * gi;
        for (double g : grad) gnorm2 += g * g;
        if (gnorm2 < 1e-24) return p;

        // backtracking line search (Armijo)
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            LinearParams trial = p;
            trial.intercept -= step * gi;
            for (std::size_t c = 0; c < grad.size(); ++c) trial.coefficients[c] -= step * grad[c];
            const double trial_loss = penalized_loss(trial, table, labels, C, config.class_weights);
            if (trial_loss <= loss - 1e-4 * step * gnorm2) {
                const double drop = loss - trial_loss;
                p = std::move(trial);
                loss = trial_loss;
                step *= 2.0;  // let the step grow back after successes
                moved = true;
                if (drop <= config.tolerance * std::max(1.0, std::abs(loss))) return p;
                break;
            }
            step *= 0.5;
        }
        if (!moved)
            return p;  // no descent direction at line-search resolution: converged
    }
    throw std::runtime_error("lr_fit_batch: no convergence after " +
                             std::to_string(config.max_iterations) +
                             " iterations, last loss " + std::to_string(loss));
}

LinearParams lr_fit_sgd_earlystop(const FeatureTable& train, const LabelVector& train_labels,
                                  const FeatureTable& validation, const LabelVector& val_labels,
                                  const LinearFitConfig& config) {
    if (validation.n_rows() == 0) throw std::invalid_argument("lr_fit_sgd: empty validation set");
    const std::size_t n = train.n_rows();
    const std::size_t k = train.n_cols();
    const double C = config.inverse_regularization;
    const SgdConfig& sc = config.sgd;

    LinearParams p;
    p.coefficients.assign(k, 0.0);
    p.feature_order = train.column_names;

    double v_int = 0.0;
    std::vector<double> v_coef(k, 0.0);
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = std::uint32_t(i);

    Pcg32 rng(sc.seed, 7);
    LinearParams best = p;
    double best_brier = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 0; epoch < sc.max_epochs; ++epoch) {
        // Fisher-Yates with the project PRNG for reproducible shuffles
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.next_below(std::uint32_t(i + 1))]);

        for (std::size_t b0 = 0; b0 < n; b0 += sc.batch_size) {
            const std::size_t b1 = std::min(n, b0 + sc.batch_size);
            double gi = 0.0;
            std::vector<double> gc(k, 0.0);
            double wsum = 0.0;
            for (std::size_t bi = b0; bi < b1; ++bi) {
                const std::uint32_t r = order[bi];
                double z = p.intercept;
                for (std::size_t c = 0; c < k; ++c) z += p.coefficients[c] * train.columns[c][r];
                const double resid = sigmoid(z) - double(train_labels[r]);
                const double w = config.class_weights
                                     ? (train_labels[r] ? config.class_weights->first
                                                        : config.class_weights->second)
                                     : 1.0;
                gi += w * resid;
                for (std::size_t c = 0; c < k; ++c) gc[c] += w * resid * train.columns[c][r];
                wsum += w;
            }
            gi /= wsum;
            for (std::size_t c = 0; c < k; ++c)
                gc[c] = gc[c] / wsum + 2.0 * p.coefficients[c] / C;

            v_int = sc.momentum * v_int - sc.learning_rate * gi;
            p.intercept += v_int;
            for (std::size_t c = 0; c < k; ++c) {
                v_coef[c] = sc.momentum * v_coef[c] - sc.learning_rate * gc[c];
                p.coefficients[c] += v_coef[c];
            }
        }

        const double val_brier = brier(lr_predict(p, validation), val_labels);
        if (val_brier < best_brier) {
            best_brier = val_brier;
            best = p;
            since_best = 0;
        } else if (++since_best >= sc.patience) {
            break;
        }
    }
    return best;
}

std::pair<double, double> balanced_weights(const LabelVector& labels) {
    const std::size_t n_pos = std::size_t(std::accumulate(labels.begin(), labels.end(), 0));
    const std::size_t n = labels.size();
    if (n_pos == 0 || n_pos == n)
        throw std::invalid_argument("balanced_weights: need both classes present");
    return {double(n) / (2.0 * double(n_pos)), double(n) / (2.0 * double(n - n_pos))};
}

void write_linear_csv(const std::string& path, const LinearParams& params) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    char buf[40];
    out << "feature,coefficient\n";
    std::snprintf(buf, sizeof(buf), "%.17g", params.intercept);
    out << "(intercept)," << buf << "\n";
    for (std::size_t c = 0; c < params.coefficients.size(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", params.coefficients[c]);
        out << params.feature_order[c] << "," << buf << "\n";
    }
}

} // namespace stratus
