#pragma once

// JSON helpers shared by the document readers. Every accessor reports the
// JSON pointer of the offending field.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lumpcheck/errors.hpp"
#include "lumpcheck/signal.hpp"

namespace lumpcheck::detail {

using Json = nlohmann::json;

std::string pointer(const std::string& base, const std::string& key);
std::string pointer(const std::string& base, std::size_t index);

Json parse_json_text(std::string_view text, const std::string& source);
std::string read_text_file(const std::filesystem::path& path);

const Json& require_field(const Json& obj, const std::string& key, const std::string& where);
double require_number(const Json& obj, const std::string& key, const std::string& where);
double optional_number(const Json& obj, const std::string& key, double fallback,
                       const std::string& where);
std::string require_string(const Json& obj, const std::string& key, const std::string& where);
const Json& require_array(const Json& obj, const std::string& key, const std::string& where);
void require_object(const Json& value, const std::string& where);
void require_format_1(const Json& doc);

/// {"kind": "step", "amplitude": 1, "horizon": 4} and friends; "sampled"
/// takes "times" and "values" arrays. A missing horizon means unending.
InputSignal signal_from_json(const Json& value, const std::string& where);
Json signal_to_json(const InputSignal& signal);

}  // namespace lumpcheck::detail

namespace lumpcheck::detail {

/// Like Json::dump, but floating-point numbers carry exactly `digits`
/// significant digits (%.17g by default) so machine files are reproducible.
std::string dump_json(const Json& value, int indent = 2, int digits = 17);

}  // namespace lumpcheck::detail
