#pragma once

// Layer implementations and the network that chains them. Activations for a
// batch are row-major matrices with one sample per row; within a row the
// sample is laid out (row, col, channel) with the channel fastest, the same
// order TactileImage uses.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "taxelgrid/error.hpp"
#include "taxelgrid/nn/spec.hpp"
#include "taxelgrid/random.hpp"
#include "taxelgrid/sensor_image.hpp"

namespace taxelgrid::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

enum class Mode { train, infer };

struct Parameter {
    std::string name;
    std::vector<std::size_t> shape;  // logical shape, row-major over value's storage
    Matrix value;
    bool regularized = false;  // weights yes, biases no
};

struct LayerCache {
    Matrix input;                 // relu/dense input, conv im2col patches
    Matrix mask;                  // dropout scale per activation
    std::vector<Index> argmax;    // maxpool source index per output
};

struct Tape {
    std::vector<LayerCache> caches;
    Matrix logits;
};

namespace detail {

inline Index idx(std::size_t v) { return static_cast<Index>(v); }

inline Matrix reshaped_rows(const Matrix& m, Index rows) {
    return Eigen::Map<const Matrix>(m.data(), rows, m.size() / rows);
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct Conv2dLayer {
    Shape in, out;
    std::size_t kernel = 0;
    std::array<Parameter, 2> p;  // weight (K*K*C) x F with logical shape [K, K, C, F]; bias 1 x F

    Matrix im2col(const Matrix& x) const {
        const Index batch = x.rows();
        const Index k = detail::idx(kernel), c = detail::idx(in.channels);
        const Index oh = detail::idx(out.rows), ow = detail::idx(out.cols), w = detail::idx(in.cols);
        Matrix patches(batch * oh * ow, k * k * c);
        for (Index b = 0; b < batch; ++b) {
            const double* src = x.row(b).data();
            for (Index i = 0; i < oh; ++i) {
                for (Index j = 0; j < ow; ++j) {
                    double* dst = patches.row((b * oh + i) * ow + j).data();
                    for (Index ki = 0; ki < k; ++ki) {
                        const double* line = src + ((i + ki) * w + j) * c;
                        std::copy(line, line + k * c, dst + ki * k * c);
                    }
                }
            }
        }
        return patches;
    }

    Matrix forward(const Matrix& x, Mode, Rng*, LayerCache* cache) const {
        Matrix patches = im2col(x);
        Matrix y = patches * p[0].value;
        y.rowwise() += p[1].value.row(0);
        if (cache) cache->input = std::move(patches);
        return detail::reshaped_rows(y, x.rows());
    }

    Matrix backward(const Matrix& grad, const LayerCache& cache, std::span<Matrix> grads) const {
        const Index batch = grad.rows();
        const Index k = detail::idx(kernel), c = detail::idx(in.channels);
        const Index oh = detail::idx(out.rows), ow = detail::idx(out.cols), w = detail::idx(in.cols);
        const Matrix g = detail::reshaped_rows(grad, batch * oh * ow);
        grads[0] = cache.input.transpose() * g;
        grads[1] = g.colwise().sum();
        const Matrix dpatches = g * p[0].value.transpose();
        Matrix dx = Matrix::Zero(batch, detail::idx(in.size()));
        for (Index b = 0; b < batch; ++b) {
            double* dst = dx.row(b).data();
            for (Index i = 0; i < oh; ++i) {
                for (Index j = 0; j < ow; ++j) {
                    const double* src = dpatches.row((b * oh + i) * ow + j).data();
                    for (Index ki = 0; ki < k; ++ki) {
                        double* line = dst + ((i + ki) * w + j) * c;
                        for (Index t = 0; t < k * c; ++t) line[t] += src[ki * k * c + t];
                    }
                }
            }
        }
        return dx;
    }

    std::span<Parameter> params() { return p; }
    std::span<const Parameter> params() const { return p; }
};

struct MaxPoolLayer {
    Shape in, out;
    std::size_t kernel = 0;

    Matrix forward(const Matrix& x, Mode, Rng*, LayerCache* cache) const {
        const Index batch = x.rows(), per = detail::idx(out.size());
        const Index k = detail::idx(kernel), c = detail::idx(in.channels), w = detail::idx(in.cols);
        Matrix y(batch, per);
        std::vector<Index> argmax(static_cast<std::size_t>(batch * per));
        for (Index b = 0; b < batch; ++b) {
            for (Index i = 0; i < detail::idx(out.rows); ++i) {
                for (Index j = 0; j < detail::idx(out.cols); ++j) {
                    for (Index ch = 0; ch < c; ++ch) {
                        Index best = ((i * k) * w + j * k) * c + ch;
                        for (Index di = 0; di < k; ++di) {
                            for (Index dj = 0; dj < k; ++dj) {
                                const Index s = ((i * k + di) * w + (j * k + dj)) * c + ch;
                                if (x(b, s) > x(b, best)) best = s;
                            }
                        }
                        const Index o = (i * detail::idx(out.cols) + j) * c + ch;
                        y(b, o) = x(b, best);
                        argmax[static_cast<std::size_t>(b * per + o)] = best;
                    }
                }
            }
        }
        if (cache) cache->argmax = std::move(argmax);
        return y;
    }

    Matrix backward(const Matrix& grad, const LayerCache& cache, std::span<Matrix>) const {
        const Index batch = grad.rows(), per = grad.cols();
        Matrix dx = Matrix::Zero(batch, detail::idx(in.size()));
        for (Index b = 0; b < batch; ++b)
            for (Index o = 0; o < per; ++o) dx(b, cache.argmax[static_cast<std::size_t>(b * per + o)]) += grad(b, o);
        return dx;
    }

    std::span<Parameter> params() { return {}; }
    std::span<const Parameter> params() const { return {}; }
};

struct ReluLayer {
    Shape in, out;

    Matrix forward(const Matrix& x, Mode, Rng*, LayerCache* cache) const {
        if (cache) cache->input = x;
        return x.cwiseMax(0.0);
    }

    Matrix backward(const Matrix& grad, const LayerCache& cache, std::span<Matrix>) const {
        return (cache.input.array() > 0.0).select(grad, 0.0);
    }

    std::span<Parameter> params() { return {}; }
    std::span<const Parameter> params() const { return {}; }
};

struct FlattenLayer {
    Shape in, out;

    Matrix forward(const Matrix& x, Mode, Rng*, LayerCache*) const { return x; }
    Matrix backward(const Matrix& grad, const LayerCache&, std::span<Matrix>) const { return grad; }

    std::span<Parameter> params() { return {}; }
    std::span<const Parameter> params() const { return {}; }
};

struct DenseLayer {
    Shape in, out;
    std::array<Parameter, 2> p;  // weight in x units; bias 1 x units

    Matrix forward(const Matrix& x, Mode, Rng*, LayerCache* cache) const {
        Matrix y = x * p[0].value;
        y.rowwise() += p[1].value.row(0);
        if (cache) cache->input = x;
        return y;
    }

    Matrix backward(const Matrix& grad, const LayerCache& cache, std::span<Matrix> grads) const {
        grads[0] = cache.input.transpose() * grad;
        grads[1] = grad.colwise().sum();
        return grad * p[0].value.transpose();
    }

    std::span<Parameter> params() { return p; }
    std::span<const Parameter> params() const { return p; }
};

/// Inverted dropout: in train mode each activation is zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate).
struct DropoutLayer {
    Shape in, out;
    double rate = 0.0;

    Matrix forward(const Matrix& x, Mode mode, Rng* rng, LayerCache* cache) const {
        if (mode == Mode::infer || rate == 0.0) {
            if (cache) cache->mask.resize(0, 0);
            return x;
        }
        Matrix mask(x.rows(), x.cols());
        const double keep = 1.0 / (1.0 - rate);
        for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform01(*rng) < rate ? 0.0 : keep;
        Matrix y = x.cwiseProduct(mask);
        if (cache) cache->mask = std::move(mask);
        return y;
    }

    Matrix backward(const Matrix& grad, const LayerCache& cache, std::span<Matrix>) const {
        if (cache.mask.size() == 0) return grad;
        return grad.cwiseProduct(cache.mask);
    }

    std::span<Parameter> params() { return {}; }
    std::span<const Parameter> params() const { return {}; }
};

/// Final projection to the two class logits; softmax and cross-entropy are
/// applied by the model so backward receives d(loss)/d(logits).
struct SoftmaxOutputLayer {
    Shape in, out;
    std::array<Parameter, 2> p;  // weight in x 2; bias 1 x 2

    Matrix forward(const Matrix& x, Mode, Rng*, LayerCache* cache) const {
        Matrix y = x * p[0].value;
        y.rowwise() += p[1].value.row(0);
        if (cache) cache->input = x;
        return y;
    }

    Matrix backward(const Matrix& grad, const LayerCache& cache, std::span<Matrix> grads) const {
        grads[0] = cache.input.transpose() * grad;
        grads[1] = grad.colwise().sum();
        return grad * p[0].value.transpose();
    }

    std::span<Parameter> params() { return p; }
    std::span<const Parameter> params() const { return p; }
};

using Layer = std::variant<Conv2dLayer, MaxPoolLayer, ReluLayer, FlattenLayer, DenseLayer, DropoutLayer,
                           SoftmaxOutputLayer>;

/// Numerically stable row-wise softmax.
inline Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        double sum = 0.0;
        for (Index c = 0; c < logits.cols(); ++c) sum += (p(r, c) = std::exp(logits(r, c) - m));
        p.row(r) /= sum;
    }
    return p;
}

struct TrainingMeta {
    std::size_t epochs = 0;
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> loss_history;

    friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

class Model {
public:
    /// Weights drawn uniformly from +-sqrt(6 / fan_in) with the spec's seed; biases zero.
    static Model initialized(const ModelSpec& spec) {
        Model m(spec);
        Rng rng(derive_seed(spec.seed, 1));
        for (auto* p : m.parameters()) {
            if (!p->regularized) continue;
            const auto fan_in = static_cast<double>(p->value.rows());
            const double limit = std::sqrt(6.0 / fan_in);
            for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = uniform(rng, -limit, limit);
        }
        return m;
    }

    static Model zeros(const ModelSpec& spec) { return Model(spec); }

    const ModelSpec& spec() const { return spec_; }
    const std::vector<Layer>& layers() const { return layers_; }
    const std::vector<Shape>& shapes() const { return shapes_; }

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> out;
        for (auto& l : layers_)
            std::visit([&](auto& layer) { for (auto& p : layer.params()) out.push_back(&p); }, l);
        return out;
    }

    std::vector<const Parameter*> parameters() const {
        std::vector<const Parameter*> out;
        for (const auto& l : layers_)
            std::visit([&](const auto& layer) { for (const auto& p : layer.params()) out.push_back(&p); }, l);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
        return n;
    }

    /// Class probabilities (batch x 2). Dropout draws from `dropout_rng` in
    /// train mode; a tape, when given, records what backward needs.
    Matrix forward_batch(const Matrix& x, Mode mode, Rng* dropout_rng = nullptr, Tape* tape = nullptr) const {
        if (x.cols() != detail::idx(spec_.input_shape.size()))
            throw Error(Errc::shape_mismatch, "input has " + std::to_string(x.cols()) + " values, model expects " +
                                                  to_string(spec_.input_shape));
        Rng fallback(derive_seed(spec_.seed, 2));
        if (!dropout_rng) dropout_rng = &fallback;
        if (tape) tape->caches.assign(layers_.size(), {});
        Matrix a = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            LayerCache* cache = tape ? &tape->caches[i] : nullptr;
            a = std::visit([&](const auto& layer) { return layer.forward(a, mode, dropout_rng, cache); }, layers_[i]);
        }
        if (tape) tape->logits = a;
        return softmax_rows(a);
    }

    std::array<double, kClasses> forward(const TactileImage& image, Mode mode = Mode::infer,
                                         Rng* dropout_rng = nullptr) const {
        const Matrix p = forward_batch(to_row(image), mode, dropout_rng);
        return {p(0, 0), p(0, 1)};
    }

    /// Gradients of every parameter (in parameters() order) given d(loss)/d(logits).
    std::vector<Matrix> backward(const Tape& tape, const Matrix& dlogits, Matrix* dinput = nullptr) const {
        std::vector<Matrix> grads;
        std::vector<std::size_t> offsets;
        for (const auto& l : layers_) {
            offsets.push_back(grads.size());
            std::visit([&](const auto& layer) { for (const auto& p : layer.params()) grads.emplace_back(p.value.rows(), p.value.cols()); }, l);
        }
        Matrix g = dlogits;
        for (std::size_t i = layers_.size(); i-- > 0;) {
            g = std::visit(
                [&](const auto& layer) {
                    std::span<Matrix> slot(grads.data() + offsets[i], layer.params().size());
                    return layer.backward(g, tape.caches[i], slot);
                },
                layers_[i]);
        }
        if (dinput) *dinput = std::move(g);
        return grads;
    }

    /// Flattens an image into a one-row batch after checking its shape.
    Matrix to_row(const TactileImage& image) const {
        const Shape s{image.rows, image.cols, image.channels};
        if (!(s == spec_.input_shape))
            throw Error(Errc::shape_mismatch,
                        "image is " + to_string(s) + ", model expects " + to_string(spec_.input_shape));
        return Eigen::Map<const Matrix>(image.data.data(), 1, detail::idx(image.data.size()));
    }

    TrainingMeta meta;

private:
    explicit Model(ModelSpec spec) : spec_(std::move(spec)), shapes_(spec_.shapes()) {
        Shape in = spec_.input_shape;
        for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
            const auto& ls = spec_.layers[i];
            const Shape out = shapes_[i];
            const std::string prefix = std::to_string(i) + "." + std::string(to_string(ls.kind));
            const auto weight = [&](Index rows, Index cols, std::vector<std::size_t> shape) {
                return Parameter{prefix + ".weight", std::move(shape), Matrix::Zero(rows, cols), true};
            };
            const auto bias = [&](Index cols) {
                return Parameter{prefix + ".bias", {static_cast<std::size_t>(cols)}, Matrix::Zero(1, cols), false};
            };
            switch (ls.kind) {
                case LayerKind::conv2d: {
                    const auto k = ls.kernel;
                    layers_.emplace_back(Conv2dLayer{in, out, k,
                                                     {weight(detail::idx(k * k * in.channels), detail::idx(ls.filters),
                                                            {k, k, in.channels, ls.filters}),
                                                     bias(detail::idx(ls.filters))}});
                    break;
                }
                case LayerKind::maxpool: layers_.emplace_back(MaxPoolLayer{in, out, ls.kernel}); break;
                case LayerKind::relu: layers_.emplace_back(ReluLayer{in, out}); break;
                case LayerKind::flatten: layers_.emplace_back(FlattenLayer{in, out}); break;
                case LayerKind::dense:
                    layers_.emplace_back(DenseLayer{in, out,
                                                    {weight(detail::idx(in.size()), detail::idx(ls.units), {in.size(), ls.units}),
                                                    bias(detail::idx(ls.units))}});
                    break;
                case LayerKind::dropout: layers_.emplace_back(DropoutLayer{in, out, ls.rate}); break;
                case LayerKind::softmax_output:
                    layers_.emplace_back(SoftmaxOutputLayer{in, out,
                                                            {weight(detail::idx(in.size()), detail::idx(kClasses), {in.size(), kClasses}),
                                                            bias(detail::idx(kClasses))}});
                    break;
            }
            in = out;
        }
    }

    ModelSpec spec_;
    std::vector<Shape> shapes_;
    std::vector<Layer> layers_;
};

using TrainedModel = Model;

/// Stacks images into a batch matrix, checking each against `shape`.
inline Matrix to_batch(std::span<const TactileImage> images, const Shape& shape) {
    Matrix x(detail::idx(images.size()), detail::idx(shape.size()));
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        if (!(Shape{img.rows, img.cols, img.channels} == shape))
            throw Error(Errc::shape_mismatch, "sample " + std::to_string(i) + " does not match input shape " +
                                                  to_string(shape));
        x.row(detail::idx(i)) = Eigen::Map<const Eigen::RowVectorXd>(img.data.data(), detail::idx(img.data.size()));
    }
    return x;
}

inline Matrix to_batch(std::span<const LabeledImage> samples, const Shape& shape) {
    std::vector<TactileImage> images;
    images.reserve(samples.size());
    for (const auto& s : samples) images.push_back(s.image);
    return to_batch(images, shape);
}

struct LossResult {
    double loss = 0.0;       // mean cross-entropy + L2 term
    double data_loss = 0.0;  // mean cross-entropy
    std::vector<Matrix> gradients;
    Matrix probabilities;
};

/// Mean cross-entropy plus l2_lambda times the squared norm of every weight
/// matrix (biases excluded), with gradients for each parameter.
inline LossResult loss_and_gradients(const Model& model, const Matrix& inputs, std::span<const Label> labels,
                                     Mode mode = Mode::train, Rng* dropout_rng = nullptr,
                                     Matrix* dinput = nullptr) {
    if (inputs.rows() == 0) throw Error(Errc::empty_dataset, "loss needs a nonempty batch");
    if (static_cast<std::size_t>(inputs.rows()) != labels.size())
        throw Error(Errc::shape_mismatch, "batch and label counts differ");
    Tape tape;
    LossResult out;
    out.probabilities = model.forward_batch(inputs, mode, dropout_rng, &tape);
    const double n = static_cast<double>(inputs.rows());
    Matrix dlogits = out.probabilities;
    double ce = 0.0;
    for (Index r = 0; r < inputs.rows(); ++r) {
        const auto y = static_cast<Index>(labels[static_cast<std::size_t>(r)]);
        const auto z = tape.logits.row(r);
        const double m = z.maxCoeff();
        const double lse = m + std::log((z.array() - m).exp().sum());
        ce += lse - z(y);
        dlogits(r, y) -= 1.0;
    }
    dlogits /= n;
    out.data_loss = ce / n;
    out.gradients = model.backward(tape, dlogits, dinput);
    double l2 = 0.0;
    const auto params = model.parameters();
    const double lambda = model.spec().l2_lambda;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->regularized || lambda == 0.0) continue;
        l2 += params[i]->value.squaredNorm();
        out.gradients[i] += 2.0 * lambda * params[i]->value;
    }
    out.loss = out.data_loss + lambda * l2;
    return out;
}

inline LossResult loss_and_gradients(const Model& model, std::span<const LabeledImage> batch,
                                     Mode mode = Mode::train, Rng* dropout_rng = nullptr) {
    std::vector<Label> labels;
    labels.reserve(batch.size());
    for (const auto& s : batch) labels.push_back(s.label);
    return loss_and_gradients(model, to_batch(batch, model.spec().input_shape), labels, mode, dropout_rng);
}

/// Argmax of the inference-mode probabilities; an exact tie is slippery.
inline Label decide(double p_stable, double p_slippery) {
    return p_stable > p_slippery ? Label::stable : Label::slippery;
}

inline Label predict(const Model& model, const TactileImage& image) {
    const auto p = model.forward(image, Mode::infer);
    return decide(p[0], p[1]);
}

inline std::vector<Label> predict_batch(const Model& model, std::span<const TactileImage> images) {
    const Matrix p = model.forward_batch(to_batch(images, model.spec().input_shape), Mode::infer);
    std::vector<Label> out;
    out.reserve(images.size());
    for (Index r = 0; r < p.rows(); ++r) out.push_back(decide(p(r, 0), p(r, 1)));
    return out;
}

}  // namespace taxelgrid::nn
