#include "stratus/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "stratus/kernels.hpp"
#include "stratus/rng.hpp"

namespace stratus {

namespace {

// Stack per-day tensors (batch dim 1 each) into one batch tensor.
Tensor<float> stack(const std::vector<Tensor<float>>& days, const std::uint32_t* ids,
                    std::size_t count) {
    const Tensor<float>& first = days[ids[0]];
    Tensor<float> out(int(count), first.h, first.w, first.c);
    for (std::size_t i = 0; i < count; ++i) {
        const Tensor<float>& d = days[ids[i]];
        std::copy(d.data.begin(), d.data.end(), out.data.begin() + std::ptrdiff_t(i * d.plane()));
    }
    return out;
}

} // namespace

std::vector<double> predict(const NetworkSpec& net, const Weights<float>& weights,
                            const NetDataset& data, const std::vector<std::int32_t>& gather) {
    std::vector<double> out;
    Weights<float> w = weights;  // running stats untouched in inference mode anyway
    ForwardCache<float> cache;
    const std::size_t chunk = 8;
    std::vector<std::uint32_t> ids;
    for (std::size_t at = 0; at < data.size(); at += chunk) {
        const std::size_t n = std::min(chunk, data.size() - at);
        ids.resize(n);
        for (std::size_t i = 0; i < n; ++i) ids[i] = std::uint32_t(at + i);
        Tensor<float> main = stack(data.main, ids.data(), n);
        Tensor<float> late = stack(data.late, ids.data(), n);
        forward(net, w, main, late, gather, /*training=*/false, cache);
        for (float p : cache.output) out.push_back(p);
    }
    return out;
}

TrainResult train(const NetworkSpec& net, const Weights<float>& initial, const NetDataset& train_set,
                  const NetDataset& validation_set, const std::vector<std::int32_t>& gather,
                  const TrainerConfig& cfg) {
    if (train_set.size() == 0 || validation_set.size() == 0)
        throw std::invalid_argument("train: empty train or validation set");
    if (cfg.patience < 1 || cfg.plateau_epochs < 1)
        throw std::invalid_argument("train: patience and plateau must be >= 1");
    for (std::size_t i = 0; i < train_set.size(); ++i)
        if (train_set.labels[i].size() != gather.size())
            throw std::invalid_argument("train: label count does not match mask");

    TrainResult result;
    Weights<float> w = initial;
    Weights<float> velocity;
    velocity.layer.resize(w.layer.size());
    for (std::size_t i = 0; i < w.layer.size(); ++i) {
        velocity.layer[i].a.assign(w.layer[i].a.size(), 0.0f);
        velocity.layer[i].b.assign(w.layer[i].b.size(), 0.0f);
    }

    std::vector<std::uint32_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = std::uint32_t(i);
    Pcg32 shuffle_rng(cfg.seed, 11);

    double lr = cfg.learning_rate;
    double best_brier = std::numeric_limits<double>::infinity();
    int since_best = 0, since_plateau = 0;
    Weights<float> best = w;
    ForwardCache<float> cache;
    Weights<float> grads;
    std::vector<float> dprobs;
    std::vector<std::uint8_t> batch_labels;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.next_below(std::uint32_t(i + 1))]);

        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - b0);
            Tensor<float> main = stack(train_set.main, order.data() + b0, n);
            Tensor<float> late = stack(train_set.late, order.data() + b0, n);
            batch_labels.clear();
            for (std::size_t i = 0; i < n; ++i) {
                const auto& lab = train_set.labels[order[b0 + i]];
                batch_labels.insert(batch_labels.end(), lab.begin(), lab.end());
            }

            forward(net, w, main, late, gather, /*training=*/true, cache);
            const float loss = masked_log_loss(cache.output, batch_labels, cfg.prob_clamp, &dprobs);
            if (!std::isfinite(loss)) {
                result.diverged = true;
                result.weights = best;
                return result;
            }
            loss_sum += loss;
            ++n_batches;
            backward(net, w, cache, gather, dprobs, grads);

            for (std::size_t li = 0; li < w.layer.size(); ++li) {
                auto step = [&](std::vector<float>& wv, std::vector<float>& vv,
                                const std::vector<float>& gv) {
                    if (wv.empty()) return;
                    kern::active().sgd_momentum_update(wv.size(), float(cfg.momentum), float(lr),
                                                       gv.data(), vv.data(), wv.data());
                };
                step(w.layer[li].a, velocity.layer[li].a, grads.layer[li].a);
                step(w.layer[li].b, velocity.layer[li].b, grads.layer[li].b);
            }
        }

        const std::vector<double> val_p = predict(net, w, validation_set, gather);
        double val_brier = 0.0;
        std::size_t val_n = 0;
        for (std::size_t d = 0; d < validation_set.size(); ++d)
            for (std::size_t j = 0; j < gather.size(); ++j) {
                const double diff =
                    val_p[d * gather.size() + j] - double(validation_set.labels[d][j]);
                val_brier += diff * diff;
                ++val_n;
            }
        val_brier /= double(val_n);

        result.history.push_back(EpochStats{epoch, loss_sum / double(n_batches), val_brier, lr});

        if (val_brier < best_brier) {
            best_brier = val_brier;
            best = w;
            result.best_epoch = epoch;
            since_best = 0;
            since_plateau = 0;
        } else {
            ++since_best;
            ++since_plateau;
            if (since_plateau >= cfg.plateau_epochs) {
                lr *= cfg.plateau_factor;
                since_plateau = 0;
            }
            if (since_best >= cfg.patience) break;
        }
    }

    result.weights = std::move(best);
    result.best_val_brier = best_brier;
    return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "epoch,train_loss,val_brier,lr\n";
    char buf[96];
    for (const auto& e : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss,
                      e.val_brier, e.lr);
        out << buf;
    }
}

} // namespace stratus
