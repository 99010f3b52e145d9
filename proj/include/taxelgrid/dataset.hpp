#pragma once

// Dataset files (CSV), a synthetic grasp generator, and the binary image
// container written by `taxelgrid convert`.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "taxelgrid/error.hpp"
#include "taxelgrid/random.hpp"
#include "taxelgrid/sensor_image.hpp"

namespace taxelgrid {

inline constexpr std::size_t kMetaColumns = 4;
inline constexpr std::size_t kDatasetColumns = kMetaColumns + kFlatFeatures;  // 76

inline std::string dataset_header() {
    std::string h = "sample_id,object_id,orientation,label";
    for (const char* finger : {"index", "middle", "thumb"})
        for (std::size_t e = 0; e < kElectrodes; ++e) h += std::string(",") + finger + "_e" + std::to_string(e);
    return h;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_number(std::string_view s, std::size_t line) {
    double v = 0.0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(Errc::parse_error, "'" + std::string(s) + "' is not a number", line);
    if (!std::isfinite(v)) throw Error(Errc::parse_error, "non-finite electrode value", line);
    return v;
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline void check_identifier(const std::string& id, const char* what) {
    if (id.empty() || id.find_first_of(",\n\r") != std::string::npos)
        throw Error(Errc::config_invalid, std::string(what) + " '" + id + "' is empty or contains a comma/newline");
}

}  // namespace detail

/// Case-insensitive; "Stable" and "STABLE" normalise to stable.
inline Label parse_label(std::string_view s, std::size_t line = 0) {
    const auto l = lowercase(s);
    if (l == "stable") return Label::stable;
    if (l == "slippery") return Label::slippery;
    throw Error(Errc::bad_label, "label '" + std::string(s) + "' is not stable/slippery",
                line ? std::optional<std::size_t>(line) : std::nullopt);
}

inline Orientation parse_orientation(std::string_view s, std::size_t line = 0) {
    const auto l = lowercase(s);
    if (l == "palm_down") return Orientation::palm_down;
    if (l == "palm_side") return Orientation::palm_side;
    throw Error(Errc::parse_error, "orientation '" + std::string(s) + "' is not palm_down/palm_side",
                line ? std::optional<std::size_t>(line) : std::nullopt);
}

inline std::vector<GraspSample> read_dataset(std::istream& in) {
    std::vector<GraspSample> out;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv(line);
        if (!header_seen) {
            if (fields.size() != kDatasetColumns || fields[0] != "sample_id")
                throw Error(Errc::parse_error, "missing or malformed header row", lineno);
            header_seen = true;
            continue;
        }
        if (fields.size() != kDatasetColumns)
            throw Error(Errc::bad_column_count,
                        "expected 76 columns, found " + std::to_string(fields.size()), lineno);
        GraspSample s;
        s.sample_id = std::string(fields[0]);
        s.object_id = std::string(fields[1]);
        if (s.sample_id.empty() || s.object_id.empty())
            throw Error(Errc::parse_error, "empty sample or object id", lineno);
        s.orientation = parse_orientation(fields[2], lineno);
        s.label = parse_label(fields[3], lineno);
        for (std::size_t f = 0; f < kFingers; ++f)
            for (std::size_t e = 0; e < kElectrodes; ++e)
                s.fingers[f].values[e] = detail::parse_number(fields[kMetaColumns + f * kElectrodes + e], lineno);
        out.push_back(std::move(s));
    }
    if (!header_seen) throw Error(Errc::parse_error, "dataset has no header row");
    return out;
}

inline std::vector<GraspSample> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open dataset " + path);
    return read_dataset(in);
}

/// Values are written with 9 significant digits.
inline void write_dataset(std::span<const GraspSample> samples, std::ostream& out) {
    out << dataset_header() << '\n';
    for (const auto& s : samples) {
        detail::check_identifier(s.sample_id, "sample_id");
        detail::check_identifier(s.object_id, "object_id");
        out << s.sample_id << ',' << s.object_id << ',' << to_string(s.orientation) << ',' << to_string(s.label);
        for (const auto& finger : s.fingers)
            for (double v : finger.values) out << ',' << detail::format_number(v);
        out << '\n';
    }
}

inline void save_dataset(std::span<const GraspSample> samples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::io_error, "cannot write dataset " + path);
    write_dataset(samples, out);
}

// ---------------------------------------------------------------------------
// Synthetic grasps

struct SynthConfig {
    std::size_t n_objects = 41;
    std::size_t samples_per_object = 62;
    double class_separation = 1.0;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
    std::size_t patch_size = 8;  // electrodes per finger touched by the contact patch

    void validate() const {
        if (n_objects == 0 || samples_per_object == 0)
            throw Error(Errc::config_invalid, "synthetic counts must be positive");
        if (!(class_separation >= 0.0)) throw Error(Errc::config_invalid, "class_separation must be >= 0");
        if (!(noise_std > 0.0)) throw Error(Errc::config_invalid, "noise_std must be > 0");
        if (patch_size == 0 || patch_size > kElectrodes)
            throw Error(Errc::config_invalid, "patch_size must lie in 1..24");
    }
};

/// Each object gets a random electrode signature and a contact patch of
/// consecutive electrodes per finger. Stable grasps raise the patch by
/// class_separation, slippery grasps lower it; Gaussian noise is added to
/// every electrode. Labels alternate within an object in shuffled order so
/// each object is balanced to within one sample.
inline std::vector<GraspSample> generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.noise_std);
    std::vector<GraspSample> out;
    out.reserve(cfg.n_objects * cfg.samples_per_object);
    for (std::size_t o = 0; o < cfg.n_objects; ++o) {
        std::array<FingerReading, kFingers> base;
        std::array<std::array<bool, kElectrodes>, kFingers> patch{};
        for (std::size_t f = 0; f < kFingers; ++f) {
            for (auto& v : base[f].values) v = uniform(rng, 0.0, 1.0);
            const auto start = static_cast<std::size_t>(rng() % kElectrodes);
            for (std::size_t t = 0; t < cfg.patch_size; ++t) patch[f][(start + t) % kElectrodes] = true;
        }
        std::vector<Label> labels(cfg.samples_per_object);
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2 == 0 ? Label::stable : Label::slippery;
        std::shuffle(labels.begin(), labels.end(), rng);
        char object_id[32];
        std::snprintf(object_id, sizeof object_id, "obj%02zu", o);
        for (std::size_t i = 0; i < cfg.samples_per_object; ++i) {
            GraspSample s;
            s.label = labels[i];
            s.object_id = object_id;
            char sample_id[48];
            std::snprintf(sample_id, sizeof sample_id, "%s_g%03zu", object_id, i);
            s.sample_id = sample_id;
            s.orientation = uniform01(rng) < 0.5 ? Orientation::palm_down : Orientation::palm_side;
            const double sign = s.label == Label::stable ? 1.0 : -1.0;
            for (std::size_t f = 0; f < kFingers; ++f)
                for (std::size_t e = 0; e < kElectrodes; ++e)
                    s.fingers[f].values[e] =
                        base[f].values[e] + (patch[f][e] ? sign * cfg.class_separation : 0.0) + noise(rng);
            out.push_back(std::move(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Binary image container: 8-byte magic, three little-endian uint32 dims
// (rows, cols, channels), then rows*cols*channels little-endian doubles.

inline constexpr char kImageMagic[8] = {'T', 'X', 'G', 'I', 'M', 'G', '0', '1'};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(Errc::parse_error, "truncated image header");
    return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}

}  // namespace detail

inline void write_image(const TactileImage& img, std::ostream& out) {
    out.write(kImageMagic, sizeof kImageMagic);
    detail::put_u32(out, static_cast<std::uint32_t>(img.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(img.cols));
    detail::put_u32(out, static_cast<std::uint32_t>(img.channels));
    for (double v : img.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

inline TactileImage read_image(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kImageMagic, 8) != 0)
        throw Error(Errc::parse_error, "not a tactile image file");
    const auto rows = detail::get_u32(in), cols = detail::get_u32(in), channels = detail::get_u32(in);
    if (rows == 0 || cols == 0 || channels == 0 || std::uint64_t{rows} * cols * channels > (1u << 24))
        throw Error(Errc::parse_error, "implausible image dimensions");
    TactileImage img(rows, cols, channels);
    for (auto& v : img.data) {
        unsigned char b[8];
        if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(Errc::parse_error, "truncated image data");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= std::uint64_t{b[i]} << (8 * i);
        std::memcpy(&v, &bits, sizeof v);
    }
    return img;
}

inline void save_image(const TactileImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write " + path);
    write_image(img, out);
}

inline TactileImage load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    return read_image(in);
}

}  // namespace taxelgrid
