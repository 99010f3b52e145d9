#pragma once

// Tactile images from non-matrix electrode readings: layouts, sparse
// placement, gap filling, per-finger normalisation, composition of the
// three fingers into one model input, and geometric augmentation.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "taxelgrid/error.hpp"
#include "taxelgrid/random.hpp"

namespace taxelgrid {

inline constexpr std::size_t kElectrodes = 24;
inline constexpr std::size_t kFingers = 3;
inline constexpr std::size_t kFlatFeatures = kElectrodes * kFingers;

enum class Finger { index = 0, middle = 1, thumb = 2 };

/// Class order is (stable, slippery) everywhere; stable is the positive class.
enum class Label { stable = 0, slippery = 1 };

enum class Orientation { palm_down, palm_side };

constexpr std::string_view to_string(Label l) noexcept {
    return l == Label::stable ? "stable" : "slippery";
}

constexpr std::string_view to_string(Orientation o) noexcept {
    return o == Orientation::palm_down ? "palm_down" : "palm_side";
}

struct FingerReading {
    std::array<double, kElectrodes> values{};

    static FingerReading from(std::span<const double> v) {
        if (v.size() != kElectrodes)
            throw Error(Errc::shape_mismatch,
                        "finger reading needs 24 values, got " + std::to_string(v.size()));
        FingerReading r;
        std::copy(v.begin(), v.end(), r.values.begin());
        r.validate();
        return r;
    }

    void validate() const {
        for (double x : values)
            if (!std::isfinite(x)) throw Error(Errc::parse_error, "non-finite electrode value");
    }

    friend bool operator==(const FingerReading&, const FingerReading&) = default;
};

struct GraspSample {
    std::array<FingerReading, kFingers> fingers{};  // index, middle, thumb
    Label label = Label::stable;
    std::string object_id;
    Orientation orientation = Orientation::palm_down;
    std::string sample_id;

    friend bool operator==(const GraspSample&, const GraspSample&) = default;
};

// ---------------------------------------------------------------------------
// Layouts

struct Placement {
    std::size_t electrode = 0;
    std::size_t row = 0;
    std::size_t col = 0;

    friend bool operator==(const Placement&, const Placement&) = default;
};

struct SensorLayout {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::array<Placement, kElectrodes> placements{};

    /// Throws InvalidLayout unless the placements are a permutation of the
    /// electrode indices mapped injectively onto in-bounds cells.
    void validate() const {
        if (rows == 0 || cols == 0) throw Error(Errc::invalid_layout, name + ": empty grid");
        if (rows * cols < kElectrodes)
            throw Error(Errc::invalid_layout, name + ": grid smaller than 24 cells");
        std::array<bool, kElectrodes> seen{};
        std::vector<bool> used(rows * cols, false);
        for (const auto& p : placements) {
            if (p.electrode >= kElectrodes)
                throw Error(Errc::invalid_layout, name + ": electrode index out of range");
            if (seen[p.electrode])
                throw Error(Errc::invalid_layout,
                            name + ": electrode " + std::to_string(p.electrode) + " placed twice");
            seen[p.electrode] = true;
            if (p.row >= rows || p.col >= cols)
                throw Error(Errc::invalid_layout,
                            name + ": electrode " + std::to_string(p.electrode) + " out of bounds");
            const std::size_t cell = p.row * cols + p.col;
            if (used[cell])
                throw Error(Errc::invalid_layout, name + ": two electrodes share cell (" +
                                                      std::to_string(p.row) + "," +
                                                      std::to_string(p.col) + ")");
            used[cell] = true;
        }
    }

    /// Cell of electrode e.
    const Placement& placement_of(std::size_t e) const {
        for (const auto& p : placements)
            if (p.electrode == e) return p;
        throw Error(Errc::invalid_layout, "electrode not placed");
    }

    friend bool operator==(const SensorLayout&, const SensorLayout&) = default;
};

namespace detail {

inline SensorLayout make_layout(std::string name, std::size_t rows, std::size_t cols,
                                const std::array<std::array<std::size_t, 2>, kElectrodes>& cells) {
    SensorLayout l{std::move(name), rows, cols, {}};
    for (std::size_t e = 0; e < kElectrodes; ++e) l.placements[e] = {e, cells[e][0], cells[e][1]};
    l.validate();
    return l;
}

}  // namespace detail

// D1 follows the sensor surface: two mirrored arcs of ten electrodes on the
// flanks and four electrodes along the midline, with wide empty regions.
inline SensorLayout layout_d1() {
    return detail::make_layout("D1", 12, 11,
                               {{{1, 2}, {2, 1}, {3, 3}, {4, 1}, {5, 3}, {6, 1}, {7, 3}, {8, 1},
                                 {9, 2}, {10, 4},
                                 {1, 8}, {2, 9}, {3, 7}, {4, 9}, {5, 7}, {6, 9}, {7, 7}, {8, 9},
                                 {9, 8}, {10, 6},
                                 {0, 5}, {3, 5}, {6, 5}, {9, 5}}});
}

// D2 packs the electrodes into 6x5 leaving the four corners and two midline cells empty.
inline SensorLayout layout_d2() {
    return detail::make_layout("D2", 6, 5,
                               {{{0, 1}, {0, 2}, {0, 3}, {1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 4},
                                 {2, 0}, {2, 1}, {2, 3}, {2, 4}, {3, 0}, {3, 1}, {3, 3}, {3, 4},
                                 {4, 0}, {4, 1}, {4, 2}, {4, 3}, {4, 4}, {5, 1}, {5, 2}, {5, 3}}});
}

// D3 packs the electrodes into 4x7 leaving only the four corners empty.
inline SensorLayout layout_d3() {
    return detail::make_layout("D3", 4, 7,
                               {{{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5},
                                 {1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 4}, {1, 5}, {1, 6},
                                 {2, 0}, {2, 1}, {2, 2}, {2, 3}, {2, 4}, {2, 5}, {2, 6},
                                 {3, 1}, {3, 2}, {3, 3}, {3, 4}, {3, 5}}});
}

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Built-in layout by case-insensitive name ("d1", "d2", "d3").
inline SensorLayout builtin_layout(std::string_view name) {
    const auto n = lowercase(name);
    if (n == "d1") return layout_d1();
    if (n == "d2") return layout_d2();
    if (n == "d3") return layout_d3();
    throw Error(Errc::config_invalid, "unknown layout '" + std::string(name) + "'");
}

/// Parses the line-oriented layout format:
///
///     # comment
///     layout <name> <rows> <cols>
///     <electrode_index> <row> <col>     (24 lines)
inline SensorLayout parse_layout(std::istream& in) {
    SensorLayout layout;
    bool have_header = false;
    std::size_t count = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first)) continue;
        if (!have_header) {
            long long rows = 0, cols = 0;
            if (first != "layout" || !(ss >> layout.name >> rows >> cols) || rows <= 0 || cols <= 0)
                throw Error(Errc::parse_error, "expected 'layout <name> <rows> <cols>'", lineno);
            layout.rows = static_cast<std::size_t>(rows);
            layout.cols = static_cast<std::size_t>(cols);
            have_header = true;
            continue;
        }
        long long e = -1, r = -1, c = -1;
        std::istringstream entry(line);
        std::string extra;
        if (!(entry >> e >> r >> c) || (entry >> extra) || e < 0 || r < 0 || c < 0)
            throw Error(Errc::parse_error, "expected '<electrode> <row> <col>'", lineno);
        if (count == kElectrodes) throw Error(Errc::invalid_layout, "more than 24 placements", lineno);
        layout.placements[count++] = {static_cast<std::size_t>(e), static_cast<std::size_t>(r),
                                      static_cast<std::size_t>(c)};
    }
    if (!have_header) throw Error(Errc::parse_error, "missing layout header");
    if (count != kElectrodes)
        throw Error(Errc::invalid_layout,
                    "expected 24 placements, got " + std::to_string(count));
    layout.validate();
    return layout;
}

inline SensorLayout load_layout_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open layout file " + path);
    return parse_layout(in);
}

inline std::string format_layout(const SensorLayout& layout) {
    std::ostringstream out;
    out << "layout " << layout.name << ' ' << layout.rows << ' ' << layout.cols << '\n';
    for (const auto& p : layout.placements) out << p.electrode << ' ' << p.row << ' ' << p.col << '\n';
    return out.str();
}

/// A built-in name or a path to a layout file.
inline SensorLayout resolve_layout(const std::string& name_or_path) {
    const auto n = lowercase(name_or_path);
    if (n == "d1" || n == "d2" || n == "d3") return builtin_layout(n);
    if (!std::filesystem::exists(name_or_path) && name_or_path.find_first_of("/.") == std::string::npos)
        throw Error(Errc::config_invalid, "unknown layout '" + name_or_path + "' (expected d1, d2, d3 or a file)");
    return load_layout_file(name_or_path);
}

// ---------------------------------------------------------------------------
// Images

struct SparseTactileImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::optional<double>> cells;  // row-major; nullopt is a gap

    const std::optional<double>& at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }

    std::size_t electrode_count() const {
        return static_cast<std::size_t>(
            std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.has_value(); }));
    }
};

struct TactileImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t channels = 1;
    std::vector<double> data;  // row-major, channel-last

    TactileImage() = default;
    TactileImage(std::size_t r, std::size_t c, std::size_t ch, double fill = 0.0)
        : rows(r), cols(c), channels(ch), data(r * c * ch, fill) {}

    std::size_t index(std::size_t r, std::size_t c, std::size_t ch = 0) const {
        return (r * cols + c) * channels + ch;
    }
    double& at(std::size_t r, std::size_t c, std::size_t ch = 0) { return data[index(r, c, ch)]; }
    double at(std::size_t r, std::size_t c, std::size_t ch = 0) const { return data[index(r, c, ch)]; }

    bool same_shape(const TactileImage& o) const {
        return rows == o.rows && cols == o.cols && channels == o.channels;
    }

    friend bool operator==(const TactileImage&, const TactileImage&) = default;
};

enum class FillStrategy { min_electrode, neighbor_mean };
enum class Composition { horizontal, vertical, channels };
enum class FlipAxis { vertical, horizontal };

// ---------------------------------------------------------------------------
// Operations

/// Per-finger z-score with the population standard deviation.
inline FingerReading zscore_normalize(const FingerReading& reading) {
    const double n = static_cast<double>(kElectrodes);
    const double mean = std::accumulate(reading.values.begin(), reading.values.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : reading.values) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) throw Error(Errc::zero_variance, "all 24 electrode values are equal");
    FingerReading out;
    for (std::size_t e = 0; e < kElectrodes; ++e) out.values[e] = (reading.values[e] - mean) / sd;
    return out;
}

inline SparseTactileImage build_sparse_image(const FingerReading& reading, const SensorLayout& layout) {
    SparseTactileImage img{layout.rows, layout.cols,
                           std::vector<std::optional<double>>(layout.rows * layout.cols)};
    for (const auto& p : layout.placements) img.cells[p.row * layout.cols + p.col] = reading.values[p.electrode];
    return img;
}

/// Gaps take the value of the least contacted (minimum) electrode.
inline TactileImage fill_min_electrode(const SparseTactileImage& img) {
    std::optional<double> lowest;
    for (const auto& c : img.cells)
        if (c && (!lowest || *c < *lowest)) lowest = *c;
    if (!lowest) throw Error(Errc::no_electrodes, "image has no electrode cells");
    TactileImage out(img.rows, img.cols, 1);
    for (std::size_t i = 0; i < img.cells.size(); ++i) out.data[i] = img.cells[i].value_or(*lowest);
    return out;
}

/// Gaps take the mean of their known 3x3 neighbours. Passes repeat until the
/// grid is dense; a pass only reads values known before it started.
inline TactileImage fill_neighbor_mean(const SparseTactileImage& img) {
    if (img.electrode_count() == 0) throw Error(Errc::no_electrodes, "image has no electrode cells");
    const auto rows = static_cast<std::ptrdiff_t>(img.rows);
    const auto cols = static_cast<std::ptrdiff_t>(img.cols);
    std::vector<double> value(img.cells.size(), 0.0);
    std::vector<bool> known(img.cells.size(), false);
    std::size_t unknown = 0;
    for (std::size_t i = 0; i < img.cells.size(); ++i) {
        if (img.cells[i]) {
            value[i] = *img.cells[i];
            known[i] = true;
        } else {
            ++unknown;
        }
    }
    while (unknown > 0) {
        auto next_value = value;
        auto next_known = known;
        for (std::ptrdiff_t r = 0; r < rows; ++r) {
            for (std::ptrdiff_t c = 0; c < cols; ++c) {
                const auto i = static_cast<std::size_t>(r * cols + c);
                if (known[i]) continue;
                double sum = 0.0;
                int n = 0;
                for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
                    for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
                        const auto rr = r + dr, cc = c + dc;
                        if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                        const auto j = static_cast<std::size_t>(rr * cols + cc);
                        if (!known[j]) continue;
                        sum += value[j];
                        ++n;
                    }
                }
                if (n > 0) {
                    next_value[i] = sum / n;
                    next_known[i] = true;
                    --unknown;
                }
            }
        }
        value = std::move(next_value);
        known = std::move(next_known);
    }
    TactileImage out(img.rows, img.cols, 1);
    out.data = std::move(value);
    return out;
}

inline TactileImage fill(const SparseTactileImage& img, FillStrategy strategy) {
    return strategy == FillStrategy::min_electrode ? fill_min_electrode(img) : fill_neighbor_mean(img);
}

/// Joins the index, middle and thumb images into one input.
inline TactileImage compose(std::span<const TactileImage> images, Composition mode) {
    if (images.size() != kFingers)
        throw Error(Errc::shape_mismatch, "composition needs exactly three finger images");
    const auto& first = images[0];
    for (const auto& img : images) {
        if (img.channels != 1 || img.rows != first.rows || img.cols != first.cols)
            throw Error(Errc::shape_mismatch, "finger images must share dims and be single-channel");
    }
    const std::size_t rows = first.rows, cols = first.cols;
    switch (mode) {
        case Composition::horizontal: {
            TactileImage out(rows, cols * kFingers, 1);
            for (std::size_t f = 0; f < kFingers; ++f)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) out.at(r, f * cols + c) = images[f].at(r, c);
            return out;
        }
        case Composition::vertical: {
            TactileImage out(rows * kFingers, cols, 1);
            for (std::size_t f = 0; f < kFingers; ++f)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) out.at(f * rows + r, c) = images[f].at(r, c);
            return out;
        }
        case Composition::channels: {
            TactileImage out(rows, cols, kFingers);
            for (std::size_t f = 0; f < kFingers; ++f)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) out.at(r, c, f) = images[f].at(r, c);
            return out;
        }
    }
    throw Error(Errc::config_invalid, "unknown composition");
}

/// Inverse of compose: recovers finger f's single-channel image.
inline TactileImage extract_finger(const TactileImage& composed, Composition mode, std::size_t finger) {
    if (finger >= kFingers) throw Error(Errc::shape_mismatch, "finger index out of range");
    switch (mode) {
        case Composition::horizontal: {
            if (composed.channels != 1 || composed.cols % kFingers != 0)
                throw Error(Errc::shape_mismatch, "not a horizontal composition");
            const std::size_t cols = composed.cols / kFingers;
            TactileImage out(composed.rows, cols, 1);
            for (std::size_t r = 0; r < composed.rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = composed.at(r, finger * cols + c);
            return out;
        }
        case Composition::vertical: {
            if (composed.channels != 1 || composed.rows % kFingers != 0)
                throw Error(Errc::shape_mismatch, "not a vertical composition");
            const std::size_t rows = composed.rows / kFingers;
            TactileImage out(rows, composed.cols, 1);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < composed.cols; ++c) out.at(r, c) = composed.at(finger * rows + r, c);
            return out;
        }
        case Composition::channels: {
            if (composed.channels != kFingers) throw Error(Errc::shape_mismatch, "not a channel composition");
            TactileImage out(composed.rows, composed.cols, 1);
            for (std::size_t r = 0; r < composed.rows; ++r)
                for (std::size_t c = 0; c < composed.cols; ++c) out.at(r, c) = composed.at(r, c, finger);
            return out;
        }
    }
    throw Error(Errc::config_invalid, "unknown composition");
}

inline TactileImage flip(const TactileImage& img, FlipAxis axis) {
    TactileImage out(img.rows, img.cols, img.channels);
    for (std::size_t r = 0; r < img.rows; ++r) {
        for (std::size_t c = 0; c < img.cols; ++c) {
            const std::size_t sr = axis == FlipAxis::vertical ? img.rows - 1 - r : r;
            const std::size_t sc = axis == FlipAxis::horizontal ? img.cols - 1 - c : c;
            for (std::size_t ch = 0; ch < img.channels; ++ch) out.at(r, c, ch) = img.at(sr, sc, ch);
        }
    }
    return out;
}

inline constexpr double kMaxRotationDeg = 10.0;

/// Rotation about the grid centre by inverse mapping. Source coordinates are
/// clamped to the grid edge and sampled bilinearly. Positive angles turn the
/// image counter-clockwise as displayed (row 0 at the top).
inline TactileImage rotate(const TactileImage& img, double angle_deg) {
    if (!(std::abs(angle_deg) <= kMaxRotationDeg))
        throw Error(Errc::angle_out_of_range, "rotation angle must lie in [-10, 10] degrees");
    if (angle_deg == 0.0) return img;
    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(theta), sn = std::sin(theta);
    const double cy = (static_cast<double>(img.rows) - 1.0) / 2.0;
    const double cx = (static_cast<double>(img.cols) - 1.0) / 2.0;
    const double max_r = static_cast<double>(img.rows) - 1.0;
    const double max_c = static_cast<double>(img.cols) - 1.0;
    TactileImage out(img.rows, img.cols, img.channels);
    for (std::size_t r = 0; r < img.rows; ++r) {
        for (std::size_t c = 0; c < img.cols; ++c) {
            const double x = static_cast<double>(c) - cx;
            const double y = static_cast<double>(r) - cy;
            // Output point (x, y) comes from the source point rotated by -angle.
            const double sx = std::clamp(cs * x - sn * y + cx, 0.0, max_c);
            const double sy = std::clamp(sn * x + cs * y + cy, 0.0, max_r);
            const auto r0 = static_cast<std::size_t>(std::floor(sy));
            const auto c0 = static_cast<std::size_t>(std::floor(sx));
            const std::size_t r1 = std::min(r0 + 1, img.rows - 1);
            const std::size_t c1 = std::min(c0 + 1, img.cols - 1);
            const double fy = sy - static_cast<double>(r0);
            const double fx = sx - static_cast<double>(c0);
            for (std::size_t ch = 0; ch < img.channels; ++ch) {
                const double top = img.at(r0, c0, ch) * (1.0 - fx) + img.at(r0, c1, ch) * fx;
                const double bottom = img.at(r1, c0, ch) * (1.0 - fx) + img.at(r1, c1, ch) * fx;
                out.at(r, c, ch) = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Labelled images and augmentation

enum class Provenance { original, vertical_flip, horizontal_flip, rotation };

constexpr std::string_view to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::original: return "original";
        case Provenance::vertical_flip: return "vflip";
        case Provenance::horizontal_flip: return "hflip";
        case Provenance::rotation: return "rotation";
    }
    return "unknown";
}

struct LabeledImage {
    TactileImage image;
    Label label = Label::stable;
    std::string object_id;
    std::string sample_id;
    Provenance provenance = Provenance::original;

    friend bool operator==(const LabeledImage&, const LabeledImage&) = default;
};

/// Returns originals, then vertical flips, then horizontal flips, then one
/// rotation per sample at an angle drawn uniformly from [-10, 10] degrees.
inline std::vector<LabeledImage> augment_dataset(std::span<const LabeledImage> samples, std::uint64_t seed) {
    std::vector<LabeledImage> out;
    out.reserve(samples.size() * 4);
    out.insert(out.end(), samples.begin(), samples.end());
    const auto derived = [&](const LabeledImage& src, TactileImage img, Provenance p) {
        LabeledImage d = src;
        d.image = std::move(img);
        d.provenance = p;
        out.push_back(std::move(d));
    };
    for (const auto& s : samples) derived(s, flip(s.image, FlipAxis::vertical), Provenance::vertical_flip);
    for (const auto& s : samples) derived(s, flip(s.image, FlipAxis::horizontal), Provenance::horizontal_flip);
    Rng rng(seed);
    for (const auto& s : samples) {
        const double angle = uniform(rng, -kMaxRotationDeg, kMaxRotationDeg);
        derived(s, rotate(s.image, angle), Provenance::rotation);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
    SensorLayout layout = layout_d1();
    FillStrategy fill = FillStrategy::neighbor_mean;
    Composition composition = Composition::channels;
};

/// z-score each finger, place it on the layout, fill the gaps, then compose.
inline TactileImage preprocess_image(const GraspSample& sample, const PipelineConfig& config) {
    std::array<TactileImage, kFingers> images;
    for (std::size_t f = 0; f < kFingers; ++f) {
        const auto normalized = zscore_normalize(sample.fingers[f]);
        images[f] = fill(build_sparse_image(normalized, config.layout), config.fill);
    }
    return compose(images, config.composition);
}

inline LabeledImage preprocess(const GraspSample& sample, const PipelineConfig& config) {
    return {preprocess_image(sample, config), sample.label, sample.object_id, sample.sample_id,
            Provenance::original};
}

/// The 72-value vector used by the flat baselines: each finger z-scored, in
/// (index, middle, thumb) x (e0..e23) order.
inline std::array<double, kFlatFeatures> flat_features(const GraspSample& sample) {
    std::array<double, kFlatFeatures> out{};
    for (std::size_t f = 0; f < kFingers; ++f) {
        const auto z = zscore_normalize(sample.fingers[f]);
        std::copy(z.values.begin(), z.values.end(), out.begin() + static_cast<std::ptrdiff_t>(f * kElectrodes));
    }
    return out;
}

// ---------------------------------------------------------------------------
// PGM export

/// Writes a single-channel image as plain PGM (P2, maxval 255) with min-max
/// scaling. A constant image renders as uniform mid-gray (128).
inline void write_pgm(const TactileImage& img, std::ostream& out) {
    if (img.channels != 1) throw Error(Errc::shape_mismatch, "PGM export needs a single-channel image");
    const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
    const double min = img.data.empty() ? 0.0 : *lo;
    const double range = img.data.empty() ? 0.0 : *hi - *lo;
    out << "P2\n" << img.cols << ' ' << img.rows << "\n255\n";
    for (std::size_t r = 0; r < img.rows; ++r) {
        for (std::size_t c = 0; c < img.cols; ++c) {
            const int px = range > 0.0 ? static_cast<int>(std::lround(255.0 * (img.at(r, c) - min) / range)) : 128;
            out << px << (c + 1 == img.cols ? '\n' : ' ');
        }
    }
}

inline void write_pgm_file(const TactileImage& img, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::io_error, "cannot write " + path);
    write_pgm(img, out);
}

}  // namespace taxelgrid
