#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "taxelgrid/taxelgrid.hpp"

namespace tgtest {

using namespace taxelgrid;

inline FingerReading random_reading(Rng& rng, double lo = 0.0, double hi = 4000.0) {
    FingerReading r;
    for (auto& v : r.values) v = uniform(rng, lo, hi);
    return r;
}

inline GraspSample random_sample(Rng& rng, std::size_t i = 0) {
    GraspSample s;
    for (auto& f : s.fingers) f = random_reading(rng);
    s.label = (rng() & 1) ? Label::stable : Label::slippery;
    s.object_id = "obj" + std::to_string(i % 7);
    s.sample_id = "s" + std::to_string(i);
    s.orientation = (rng() & 1) ? Orientation::palm_down : Orientation::palm_side;
    return s;
}

inline TactileImage random_image(Rng& rng, std::size_t rows, std::size_t cols, std::size_t channels) {
    TactileImage img(rows, cols, channels);
    for (auto& v : img.data) v = uniform(rng, -1.0, 1.0);
    return img;
}

// Perceptron: terminates with zero training errors only on linearly
// separable data.
inline bool perceptron_separates(const taxelgrid::nn::Matrix& x, const std::vector<Label>& y, int max_epochs = 10000) {
    using taxelgrid::nn::Index;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
    double b = 0;
    for (int e = 0; e < max_epochs; ++e) {
        int errors = 0;
        for (Index i = 0; i < x.rows(); ++i) {
            const double t = y[static_cast<std::size_t>(i)] == Label::stable ? 1.0 : -1.0;
            if (t * (x.row(i).dot(w) + b) <= 0) {
                w += t * x.row(i).transpose();
                b += t;
                ++errors;
            }
        }
        if (errors == 0) return true;
    }
    return false;
}

inline std::vector<SensorLayout> builtin_layouts() { return {layout_d1(), layout_d2(), layout_d3()}; }

}  // namespace tgtest
