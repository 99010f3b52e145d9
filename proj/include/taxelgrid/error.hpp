#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace taxelgrid {

enum class Errc {
    zero_variance,
    no_electrodes,
    shape_mismatch,
    angle_out_of_range,
    invalid_layout,
    invalid_spec,
    parse_error,
    version_mismatch,
    bad_label,
    bad_column_count,
    empty_dataset,
    single_class,
    k_too_large,
    too_few_objects,
    empty_evaluation,
    config_invalid,
    io_error,
};

constexpr std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::zero_variance: return "ZeroVariance";
        case Errc::no_electrodes: return "NoElectrodes";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::angle_out_of_range: return "AngleOutOfRange";
        case Errc::invalid_layout: return "InvalidLayout";
        case Errc::invalid_spec: return "InvalidSpec";
        case Errc::parse_error: return "ParseError";
        case Errc::version_mismatch: return "VersionMismatch";
        case Errc::bad_label: return "BadLabel";
        case Errc::bad_column_count: return "BadColumnCount";
        case Errc::empty_dataset: return "EmptyDataset";
        case Errc::single_class: return "SingleClass";
        case Errc::k_too_large: return "KTooLarge";
        case Errc::too_few_objects: return "TooFewObjects";
        case Errc::empty_evaluation: return "EmptyEvaluation";
        case Errc::config_invalid: return "ConfigInvalid";
        case Errc::io_error: return "IoError";
    }
    return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code and,
/// for file parsers, the 1-based line number that triggered it.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what, std::optional<std::size_t> line = std::nullopt)
        : std::runtime_error(format(code, what, line)), code_(code), line_(line) {}

    Errc code() const noexcept { return code_; }
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    static std::string format(Errc code, const std::string& what, std::optional<std::size_t> line) {
        std::string msg(errc_name(code));
        if (line) msg += " (line " + std::to_string(*line) + ")";
        msg += ": ";
        msg += what;
        return msg;
    }

    Errc code_;
    std::optional<std::size_t> line_;
};

}  // namespace taxelgrid
