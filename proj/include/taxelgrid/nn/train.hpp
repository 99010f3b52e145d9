#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "taxelgrid/error.hpp"
#include "taxelgrid/nn/model.hpp"
#include "taxelgrid/random.hpp"

namespace taxelgrid::nn {

enum class Optimizer { sgd, adam };

constexpr std::string_view to_string(Optimizer o) noexcept { return o == Optimizer::sgd ? "sgd" : "adam"; }

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::adam;
    std::uint64_t shuffle_seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (batch_size == 0) throw Error(Errc::config_invalid, "batch_size must be positive");
        if (!(learning_rate > 0.0)) throw Error(Errc::config_invalid, "learning_rate must be positive");
    }
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;
    double train_accuracy = 0.0;
};

/// One `epoch,loss,train_acc` line.
inline void write_epoch_line(std::ostream& out, const EpochStats& s) {
    out << s.epoch << ',' << s.loss << ',' << s.train_accuracy << '\n';
}

using EpochCallback = std::function<void(const EpochStats&)>;

namespace detail {

class Stepper {
public:
    Stepper(const TrainConfig& cfg, const Model& model) : cfg_(cfg) {
        if (cfg.optimizer == Optimizer::adam) {
            for (const auto* p : model.parameters()) {
                m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
                v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            }
        }
    }

    void step(Model& model, const std::vector<Matrix>& grads) {
        auto params = model.parameters();
        if (cfg_.optimizer == Optimizer::sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) params[i]->value -= cfg_.learning_rate * grads[i];
            return;
        }
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i].cwiseProduct(grads[i]);
            params[i]->value.array() -=
                cfg_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.epsilon);
        }
    }

private:
    TrainConfig cfg_;
    std::vector<Matrix> m_, v_;
    std::size_t t_ = 0;
};

}  // namespace detail

/// Mini-batch training from a seeded initialisation. Shuffling, dropout
/// masks and initial weights are all seeded, so the result is a pure
/// function of (spec, dataset, cfg).
inline Model train(const ModelSpec& spec, const Matrix& inputs, std::span<const Label> labels,
                   const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    spec.validate();
    if (inputs.rows() == 0) throw Error(Errc::empty_dataset, "cannot train on an empty dataset");
    if (static_cast<std::size_t>(inputs.rows()) != labels.size())
        throw Error(Errc::shape_mismatch, "input and label counts differ");
    if (inputs.cols() != detail::idx(spec.input_shape.size()))
        throw Error(Errc::shape_mismatch, "dataset samples do not match input shape " + to_string(spec.input_shape));

    Model model = Model::initialized(spec);
    detail::Stepper stepper(cfg, model);
    Rng dropout_rng(derive_seed(spec.seed, 2));
    const auto n = static_cast<std::size_t>(inputs.rows());
    std::vector<Index> order(n);
    std::vector<Label> batch_labels;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Index{0});
        Rng shuffle_rng(derive_seed(cfg.shuffle_seed, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const std::vector<Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop));
            const Matrix batch = inputs(rows, Eigen::all);
            batch_labels.clear();
            for (auto r : rows) batch_labels.push_back(labels[static_cast<std::size_t>(r)]);
            auto result = loss_and_gradients(model, batch, batch_labels, Mode::train, &dropout_rng);
            loss_sum += result.loss * static_cast<double>(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto row = static_cast<Index>(i);
                if (decide(result.probabilities(row, 0), result.probabilities(row, 1)) == batch_labels[i]) ++correct;
            }
            stepper.step(model, result.gradients);
        }
        const EpochStats stats{epoch, loss_sum / static_cast<double>(n),
                               static_cast<double>(correct) / static_cast<double>(n)};
        model.meta.loss_history.push_back(stats.loss);
        model.meta.final_loss = stats.loss;
        if (on_epoch) on_epoch(stats);
    }
    model.meta.epochs = cfg.epochs;
    return model;
}

inline Model train(const ModelSpec& spec, std::span<const LabeledImage> dataset, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {}) {
    if (dataset.empty()) throw Error(Errc::empty_dataset, "cannot train on an empty dataset");
    std::vector<Label> labels;
    labels.reserve(dataset.size());
    for (const auto& s : dataset) labels.push_back(s.label);
    return train(spec, to_batch(dataset, spec.input_shape), labels, cfg, on_epoch);
}

}  // namespace taxelgrid::nn
