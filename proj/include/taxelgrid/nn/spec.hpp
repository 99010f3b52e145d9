#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "taxelgrid/error.hpp"
#include "taxelgrid/sensor_image.hpp"

namespace taxelgrid::nn {

inline constexpr std::size_t kClasses = 2;

struct Shape {
    std::size_t rows = 1;
    std::size_t cols = 1;
    std::size_t channels = 1;

    std::size_t size() const { return rows * cols * channels; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
    return std::to_string(s.rows) + "x" + std::to_string(s.cols) + "x" + std::to_string(s.channels);
}

enum class LayerKind { conv2d, maxpool, relu, flatten, dense, dropout, softmax_output };

constexpr std::string_view to_string(LayerKind k) noexcept {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::relu: return "relu";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
        case LayerKind::dropout: return "dropout";
        case LayerKind::softmax_output: return "softmax_output";
    }
    return "unknown";
}

inline LayerKind layer_kind_from(std::string_view s) {
    for (auto k : {LayerKind::conv2d, LayerKind::maxpool, LayerKind::relu, LayerKind::flatten,
                   LayerKind::dense, LayerKind::dropout, LayerKind::softmax_output})
        if (to_string(k) == s) return k;
    throw Error(Errc::parse_error, "unknown layer kind '" + std::string(s) + "'");
}

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t filters = 0;  // conv2d
    std::size_t kernel = 0;   // conv2d, maxpool
    std::size_t units = 0;    // dense
    double rate = 0.0;        // dropout

    static LayerSpec conv2d(std::size_t filters, std::size_t kernel) {
        return {LayerKind::conv2d, filters, kernel, 0, 0.0};
    }
    static LayerSpec maxpool(std::size_t kernel) { return {LayerKind::maxpool, 0, kernel, 0, 0.0}; }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0, 0, 0.0}; }
    static LayerSpec flatten() { return {LayerKind::flatten, 0, 0, 0, 0.0}; }
    static LayerSpec dense(std::size_t units) { return {LayerKind::dense, 0, 0, units, 0.0}; }
    static LayerSpec dropout(double rate) { return {LayerKind::dropout, 0, 0, 0, rate}; }
    static LayerSpec softmax_output() { return {LayerKind::softmax_output, 0, 0, 0, 0.0}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
    std::string name;
    Shape input_shape;
    std::vector<LayerSpec> layers;
    double l2_lambda = 0.0;
    std::uint64_t seed = 0;

    /// Output shape after each layer, after validating the stack.
    std::vector<Shape> shapes() const {
        if (input_shape.size() == 0) throw Error(Errc::invalid_spec, name + ": empty input shape");
        if (!(l2_lambda >= 0.0)) throw Error(Errc::invalid_spec, name + ": l2_lambda must be >= 0");
        if (layers.empty() || layers.back().kind != LayerKind::softmax_output)
            throw Error(Errc::invalid_spec, name + ": softmax_output must be the last layer");
        std::vector<Shape> out;
        Shape s = input_shape;
        bool flat = false;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            const std::string where = name + ": layer " + std::to_string(i) + " (" +
                                      std::string(to_string(l.kind)) + ")";
            switch (l.kind) {
                case LayerKind::conv2d:
                    if (flat) throw Error(Errc::invalid_spec, where + " follows flatten/dense");
                    if (l.filters == 0 || l.kernel == 0)
                        throw Error(Errc::invalid_spec, where + ": filters and kernel must be positive");
                    if (l.kernel > s.rows || l.kernel > s.cols)
                        throw Error(Errc::invalid_spec, where + ": kernel larger than input " + to_string(s));
                    s = {s.rows - l.kernel + 1, s.cols - l.kernel + 1, l.filters};
                    break;
                case LayerKind::maxpool:
                    if (flat) throw Error(Errc::invalid_spec, where + " follows flatten/dense");
                    if (l.kernel == 0) throw Error(Errc::invalid_spec, where + ": kernel must be positive");
                    if (l.kernel > s.rows || l.kernel > s.cols)
                        throw Error(Errc::invalid_spec, where + ": pool larger than input " + to_string(s));
                    s = {s.rows / l.kernel, s.cols / l.kernel, s.channels};
                    break;
                case LayerKind::relu:
                case LayerKind::dropout:
                    if (l.kind == LayerKind::dropout && !(l.rate >= 0.0 && l.rate < 1.0))
                        throw Error(Errc::invalid_spec, where + ": rate must lie in [0, 1)");
                    break;
                case LayerKind::flatten:
                    s = {1, 1, s.size()};
                    flat = true;
                    break;
                case LayerKind::dense:
                    if (l.units == 0) throw Error(Errc::invalid_spec, where + ": units must be positive");
                    s = {1, 1, l.units};
                    flat = true;
                    break;
                case LayerKind::softmax_output:
                    if (i + 1 != layers.size())
                        throw Error(Errc::invalid_spec, where + ": softmax_output must be last");
                    s = {1, 1, kClasses};
                    flat = true;
                    break;
            }
            out.push_back(s);
        }
        return out;
    }

    void validate() const { (void)shapes(); }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Convolutional presets. relu follows every conv and dense layer.

inline ModelSpec cnn0(Shape input = {12, 11, 3}) {
    return {"CNN0", input,
            {LayerSpec::conv2d(32, 3), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(128),
             LayerSpec::relu(), LayerSpec::softmax_output()}};
}

inline ModelSpec cnn1(Shape input = {12, 11, 3}) {
    return {"CNN1", input,
            {LayerSpec::conv2d(32, 3), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(1024),
             LayerSpec::relu(), LayerSpec::softmax_output()}};
}

inline ModelSpec cnn2(Shape input = {12, 11, 3}) {
    return {"CNN2", input,
            {LayerSpec::conv2d(32, 3), LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::flatten(),
             LayerSpec::dense(1024), LayerSpec::relu(), LayerSpec::softmax_output()}};
}

inline ModelSpec cnn3(Shape input = {12, 11, 3}) {
    return {"CNN3", input,
            {LayerSpec::conv2d(32, 3), LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::conv2d(64, 3),
             LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(1024), LayerSpec::relu(),
             LayerSpec::softmax_output()}};
}

/// "cnn0".."cnn3", case-insensitive.
inline ModelSpec cnn_preset(std::string_view name, Shape input = {12, 11, 3}) {
    const auto n = lowercase(name);
    if (n == "cnn0") return cnn0(input);
    if (n == "cnn1") return cnn1(input);
    if (n == "cnn2") return cnn2(input);
    if (n == "cnn3") return cnn3(input);
    throw Error(Errc::config_invalid, "unknown network preset '" + std::string(name) + "'");
}

/// Inserts dropout ahead of the output layer and sets the L2 weight.
inline ModelSpec with_regularization(ModelSpec spec, double dropout_rate, double l2_lambda) {
    if (dropout_rate > 0.0)
        spec.layers.insert(spec.layers.end() - 1, LayerSpec::dropout(dropout_rate));
    spec.l2_lambda = l2_lambda;
    return spec;
}

/// Shrinks a preset for finite-difference checking: conv filters become 2
/// and 3, dense layers 4 units, input 8x8 with the original channel count.
inline ModelSpec small_variant(ModelSpec spec) {
    spec.name += "-small";
    spec.input_shape = {8, 8, spec.input_shape.channels};
    std::size_t conv_index = 0;
    for (auto& l : spec.layers) {
        if (l.kind == LayerKind::conv2d) l.filters = conv_index++ == 0 ? 2 : 3;
        if (l.kind == LayerKind::dense) l.units = 4;
    }
    spec.validate();
    return spec;
}

}  // namespace taxelgrid::nn
