#pragma once

// Central finite-difference verification of the analytic gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taxelgrid/nn/model.hpp"

namespace taxelgrid::nn {

inline constexpr std::size_t kMaxGradCheckParameters = 10'000;

struct GradCheckEntry {
    std::string name;  // parameter name, or "input"
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // perturbation moved a relu input across 0 or changed a pool winner
};

struct GradCheckReport {
    double tolerance = 0.0;
    std::vector<GradCheckEntry> entries;

    double max_rel_error() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, e.max_rel_error);
        return m;
    }
    bool passed() const { return max_rel_error() <= tolerance; }
};

struct GradCheckOptions {
    double step = 1e-5;
    // Denominator floor: entries whose magnitude is below this are compared
    // in absolute terms scaled by 1/floor.
    double magnitude_floor = 1e-6;
    std::uint64_t dropout_seed = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

namespace detail {

// Which side of every relu and which pool winner was active; a finite
// difference that changes this straddles a kink and is not comparable.
inline std::vector<std::int64_t> kink_signature(const Model& model, const Tape& tape) {
    std::vector<std::int64_t> sig;
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        if (std::holds_alternative<ReluLayer>(model.layers()[i])) {
            const auto& in = tape.caches[i].input;
            for (Index j = 0; j < in.size(); ++j) sig.push_back(in.data()[j] > 0.0 ? 1 : 0);
        } else if (std::holds_alternative<MaxPoolLayer>(model.layers()[i])) {
            for (auto a : tape.caches[i].argmax) sig.push_back(a);
        }
    }
    return sig;
}

struct Probe {
    double loss;
    std::vector<std::int64_t> signature;
};

inline Probe probe(const Model& model, const Matrix& inputs, std::span<const Label> labels, std::uint64_t seed) {
    Rng rng(seed);
    Tape tape;
    model.forward_batch(inputs, Mode::train, &rng, &tape);
    double ce = 0.0;
    for (Index r = 0; r < inputs.rows(); ++r) {
        const auto z = tape.logits.row(r);
        const double m = z.maxCoeff();
        ce += m + std::log((z.array() - m).exp().sum()) - z(static_cast<Index>(labels[static_cast<std::size_t>(r)]));
    }
    double l2 = 0.0;
    for (const auto* param : model.parameters())
        if (param->regularized) l2 += param->value.squaredNorm();
    return {ce / static_cast<double>(inputs.rows()) + model.spec().l2_lambda * l2, kink_signature(model, tape)};
}

}  // namespace detail

/// Compares `analytic` (per-parameter gradients, plus the gradient with
/// respect to the inputs) against central differences of the training loss.
/// Dropout masks are held fixed by reseeding before every evaluation.
inline GradCheckReport compare_gradients(const Model& model, const Matrix& inputs, std::span<const Label> labels,
                                         const std::vector<Matrix>& analytic, const Matrix& analytic_input,
                                         double tolerance, const GradCheckOptions& opt = {}) {
    Model work = model;
    Matrix x = inputs;
    const auto base = detail::probe(work, x, labels, opt.dropout_seed);
    GradCheckReport report{tolerance, {}};
    const auto check = [&](const std::string& name, double* values, const Matrix& grad) {
        if (grad.size() == 0) return;
        GradCheckEntry entry{name};
        for (Index j = 0; j < grad.size(); ++j) {
            const double saved = values[j];
            values[j] = saved + opt.step;
            const auto plus = detail::probe(work, x, labels, opt.dropout_seed);
            values[j] = saved - opt.step;
            const auto minus = detail::probe(work, x, labels, opt.dropout_seed);
            values[j] = saved;
            if (plus.signature != base.signature || minus.signature != base.signature) {
                ++entry.skipped;
                continue;
            }
            const double numeric = (plus.loss - minus.loss) / (2.0 * opt.step);
            entry.max_rel_error =
                std::max(entry.max_rel_error, relative_error(grad.data()[j], numeric, opt.magnitude_floor));
            ++entry.checked;
        }
        report.entries.push_back(entry);
    };
    auto params = work.parameters();
    if (params.size() != analytic.size()) throw Error(Errc::shape_mismatch, "gradient count differs from parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (analytic[i].size() != params[i]->value.size())
            throw Error(Errc::shape_mismatch, "gradient shape differs for " + params[i]->name);
        check(params[i]->name, params[i]->value.data(), analytic[i]);
    }
    if (analytic_input.size() == x.size()) check("input", x.data(), analytic_input);
    return report;
}

/// Analytic gradients of `model` checked on the given batch.
inline GradCheckReport check_gradients(const Model& model, const Matrix& inputs, std::span<const Label> labels,
                                       double tolerance, const GradCheckOptions& opt = {}) {
    Rng rng(opt.dropout_seed);
    Matrix dinput;
    const auto result = loss_and_gradients(model, inputs, labels, Mode::train, &rng, &dinput);
    return compare_gradients(model, inputs, labels, result.gradients, dinput, tolerance, opt);
}

/// Builds a seeded model for `spec` with random biases, a batch of three
/// random inputs and labels, and checks every gradient.
inline GradCheckReport gradient_check(ModelSpec spec, double tolerance, std::uint64_t seed = 0,
                                      const GradCheckOptions& opt = {}) {
    spec.seed = derive_seed(seed, 11);
    Model model = Model::initialized(spec);
    if (model.parameter_count() > kMaxGradCheckParameters)
        throw Error(Errc::config_invalid, spec.name + " has " + std::to_string(model.parameter_count()) +
                                              " parameters; finite differences are limited to 10000");
    Rng rng(derive_seed(seed, 12));
    for (auto* p : model.parameters())
        if (!p->regularized)
            for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = uniform(rng, -0.1, 0.1);
    constexpr Index batch = 3;
    Matrix x(batch, detail::idx(spec.input_shape.size()));
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -1.0, 1.0);
    std::vector<Label> labels;
    for (Index i = 0; i < batch; ++i) labels.push_back(uniform01(rng) < 0.5 ? Label::stable : Label::slippery);
    GradCheckOptions o = opt;
    o.dropout_seed = derive_seed(seed, 13);
    return check_gradients(model, x, labels, tolerance, o);
}

}  // namespace taxelgrid::nn
