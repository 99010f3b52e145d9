#pragma once

// Shared JSON envelope for persisted models: every file carries
// `format_version`, `kind` and `parameters`.

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "taxelgrid/error.hpp"

namespace taxelgrid {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

inline json make_envelope(const std::string& kind) {
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = kind;
    return j;
}

inline json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::parse_error, what + ": " + e.what());
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_json_text(ss.str(), path);
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write " + path);
    out << text;
    if (!out) throw Error(Errc::io_error, "failed writing " + path);
}

/// Checks version and kind; JSON type errors inside surface as ParseError.
inline void check_envelope(const json& j, const std::string& kind) {
    if (!j.is_object() || !j.contains("format_version") || !j.contains("kind"))
        throw Error(Errc::parse_error, "missing format_version/kind envelope");
    if (!j["format_version"].is_number_integer() || j["format_version"].get<int>() != kFormatVersion)
        throw Error(Errc::version_mismatch, "unsupported format_version " + j["format_version"].dump());
    if (j["kind"] != kind)
        throw Error(Errc::parse_error, "expected kind '" + kind + "', found " + j["kind"].dump());
}

/// Runs `fn`, mapping nlohmann type/out-of-range errors to ParseError.
template <typename Fn>
auto with_json_errors(Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, e.what());
    }
}

}  // namespace taxelgrid
