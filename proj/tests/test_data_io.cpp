#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "support.hpp"

using namespace taxelgrid;

namespace {

// Rounds through the 9-significant-digit text form so the value is
// exactly representable in the file.
double at_file_precision(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
}

std::vector<GraspSample> random_dataset(Rng& rng, std::size_t n) {
    std::vector<GraspSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto s = tgtest::random_sample(rng, i);
        for (auto& f : s.fingers)
            for (auto& v : f.values) v = at_file_precision(uniform(rng, -1e4, 1e4) * std::pow(10.0, uniform(rng, -6, 3)));
        out.push_back(std::move(s));
    }
    return out;
}

std::string row_with(std::size_t values, const std::string& label = "stable") {
    std::string row = "s1,o1,palm_down," + label;
    for (std::size_t i = 0; i < values; ++i) row += "," + std::to_string(i);
    return row;
}

Errc code_and_line(const std::string& text, std::size_t& line) {
    std::istringstream in(text);
    try {
        read_dataset(in);
    } catch (const Error& e) {
        line = e.line().value_or(0);
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return Errc::io_error;
}

}  // namespace

TEST(DatasetCsv, HeaderHas76Columns) {
    const auto h = dataset_header();
    EXPECT_EQ(std::count(h.begin(), h.end(), ','), 75);
    EXPECT_EQ(h.substr(0, 38), "sample_id,object_id,orientation,label,");
    EXPECT_NE(h.find(",index_e0,"), std::string::npos);
    EXPECT_EQ(h.substr(h.size() - 10), ",thumb_e23");
}

TEST(DatasetCsv, RoundTripProperty) {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        const auto data = random_dataset(rng, rng() % 20);
        std::ostringstream out;
        write_dataset(data, out);
        std::istringstream in(out.str());
        EXPECT_EQ(read_dataset(in), data);
    }
}

TEST(DatasetCsv, NineDigitPrecision) {
    Rng rng(2);
    for (int t = 0; t < 10000; ++t) {
        const double v = uniform(rng, -1.0, 1.0) * std::pow(10.0, uniform(rng, -8, 8));
        const double back = std::strtod(detail::format_number(v).c_str(), nullptr);
        EXPECT_LE(std::abs(back - v), 5e-9 * std::abs(v));
        EXPECT_EQ(detail::format_number(back), detail::format_number(v));
    }
}

TEST(DatasetCsv, FileRoundTripAndEmptyFile) {
    Rng rng(3);
    const auto data = random_dataset(rng, 3);
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "taxelgrid_ds.csv").string();
    save_dataset(data, path);
    EXPECT_EQ(load_dataset(path), data);
    save_dataset(std::vector<GraspSample>{}, path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), dataset_header() + "\n");
    EXPECT_TRUE(load_dataset(path).empty());
    std::filesystem::remove(path);
}

TEST(DatasetCsv, LabelsAreCaseInsensitive) {
    std::istringstream in(dataset_header() + "\n" + row_with(72, "Stable") + "\n" + row_with(72, "SLIPPERY") + "\n");
    const auto data = read_dataset(in);
    ASSERT_EQ(data.size(), 2u);
    EXPECT_EQ(data[0].label, Label::stable);
    EXPECT_EQ(data[1].label, Label::slippery);
}

TEST(DatasetCsv, ColumnCountErrorCarriesLine) {
    std::size_t line = 0;
    EXPECT_EQ(code_and_line(dataset_header() + "\n" + row_with(72) + "\n" + row_with(71) + "\n", line),
              Errc::bad_column_count);
    EXPECT_EQ(line, 3u);
}

TEST(DatasetCsv, BadLabelCarriesLine) {
    std::size_t line = 0;
    EXPECT_EQ(code_and_line(dataset_header() + "\n\n" + row_with(72, "wobbly") + "\n", line), Errc::bad_label);
    EXPECT_EQ(line, 3u);
}

TEST(DatasetCsv, BadNumbersAndFieldsAreParseErrors) {
    std::size_t line = 0;
    auto row = row_with(72);
    row.replace(row.rfind(',') + 1, std::string::npos, "abc");
    EXPECT_EQ(code_and_line(dataset_header() + "\n" + row + "\n", line), Errc::parse_error);
    EXPECT_EQ(line, 2u);
    row = row_with(72);
    row.replace(row.rfind(',') + 1, std::string::npos, "nan");
    EXPECT_EQ(code_and_line(dataset_header() + "\n" + row + "\n", line), Errc::parse_error);
    row = row_with(72);
    row.replace(row.find("palm_down"), 9, "upside");
    EXPECT_EQ(code_and_line(dataset_header() + "\n" + row + "\n", line), Errc::parse_error);
    EXPECT_EQ(code_and_line("not,a,header\n", line), Errc::parse_error);
    EXPECT_EQ(line, 1u);
}

TEST(DatasetCsv, RejectsUnwritableIdentifiers) {
    Rng rng(4);
    auto data = random_dataset(rng, 1);
    data[0].object_id = "a,b";
    std::ostringstream out;
    EXPECT_THROW(write_dataset(data, out), Error);
}

TEST(Synthetic, FullSizeCount) {
    SynthConfig cfg;
    EXPECT_EQ(generate_synthetic(cfg).size(), 2542u);
}

TEST(Synthetic, DeterministicUnderSeed) {
    SynthConfig cfg;
    cfg.n_objects = 5;
    cfg.samples_per_object = 9;
    cfg.seed = 17;
    EXPECT_EQ(generate_synthetic(cfg), generate_synthetic(cfg));
    auto other = cfg;
    other.seed = 18;
    EXPECT_NE(generate_synthetic(cfg), generate_synthetic(other));
}

TEST(Synthetic, LabelsBalancedPerObject) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SynthConfig cfg;
        cfg.n_objects = 7;
        cfg.samples_per_object = 3 + seed;
        cfg.seed = seed;
        std::map<std::string, std::pair<int, int>> counts;
        for (const auto& s : generate_synthetic(cfg))
            (s.label == Label::stable ? counts[s.object_id].first : counts[s.object_id].second)++;
        EXPECT_EQ(counts.size(), 7u);
        for (const auto& [_, c] : counts) EXPECT_LE(std::abs(c.first - c.second), 1);
    }
}

TEST(Synthetic, SeparationMovesThePatch) {
    // With tiny noise, stable and slippery grasps of one object differ by
    // 2 * separation on patch electrodes and agree elsewhere.
    SynthConfig cfg;
    cfg.n_objects = 1;
    cfg.samples_per_object = 2;
    cfg.noise_std = 1e-9;
    cfg.class_separation = 3.0;
    const auto data = generate_synthetic(cfg);
    const auto& st = data[0].label == Label::stable ? data[0] : data[1];
    const auto& sl = data[0].label == Label::stable ? data[1] : data[0];
    for (std::size_t f = 0; f < 3; ++f) {
        int patch = 0;
        for (std::size_t e = 0; e < 24; ++e) {
            const double d = st.fingers[f].values[e] - sl.fingers[f].values[e];
            if (std::abs(d - 6.0) < 1e-6) ++patch;
            else EXPECT_NEAR(d, 0.0, 1e-6);
        }
        EXPECT_EQ(patch, 8);
    }
}

TEST(Synthetic, InvalidConfigRejected) {
    SynthConfig cfg;
    cfg.noise_std = 0.0;
    EXPECT_THROW(generate_synthetic(cfg), Error);
    cfg = {};
    cfg.n_objects = 0;
    EXPECT_THROW(generate_synthetic(cfg), Error);
    cfg = {};
    cfg.class_separation = -1.0;
    EXPECT_THROW(generate_synthetic(cfg), Error);
}

TEST(ImageFile, BinaryRoundTripIsExact) {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const auto img = tgtest::random_image(rng, 1 + rng() % 12, 1 + rng() % 33, 1 + rng() % 3);
        std::stringstream buf;
        write_image(img, buf);
        EXPECT_EQ(read_image(buf), img);
    }
}

TEST(ImageFile, RejectsGarbageAndTruncation) {
    std::stringstream garbage("hello world, not an image");
    EXPECT_THROW(read_image(garbage), Error);
    std::stringstream buf;
    write_image(TactileImage(2, 2, 1, 1.0), buf);
    const auto bytes = buf.str();
    std::stringstream cut(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(read_image(cut), Error);
}
