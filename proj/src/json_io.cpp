#include "json_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace lumpcheck::detail {

std::string pointer(const std::string& base, const std::string& key) {
  std::string escaped;
  for (char c : key) {
    if (c == '~') {
      escaped += "~0";
    } else if (c == '/') {
      escaped += "~1";
    } else {
      escaped += c;
    }
  }
  return base + "/" + escaped;
}

std::string pointer(const std::string& base, std::size_t index) {
  return base + "/" + std::to_string(index);
}

Json parse_json_text(std::string_view text, const std::string& source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    // Translate the byte offset into a line number for the diagnostic.
    std::size_t line = 1;
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i < end; ++i) line += text[i] == '\n';
    throw ParseError(source + ":" + std::to_string(line), "malformed JSON: " + std::string(e.what()));
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_object(const Json& value, const std::string& where) {
  if (!value.is_object()) throw ParseError(where.empty() ? "/" : where, "expected an object");
}

const Json& require_field(const Json& obj, const std::string& key, const std::string& where) {
  require_object(obj, where);
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(pointer(where, key), "missing required field");
  return *it;
}

double require_number(const Json& obj, const std::string& key, const std::string& where) {
  const Json& v = require_field(obj, key, where);
  if (!v.is_number()) throw ParseError(pointer(where, key), "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ParseError(pointer(where, key), "expected a finite number");
  return x;
}

double optional_number(const Json& obj, const std::string& key, double fallback,
                       const std::string& where) {
  require_object(obj, where);
  if (!obj.contains(key)) return fallback;
  return require_number(obj, key, where);
}

std::string require_string(const Json& obj, const std::string& key, const std::string& where) {
  const Json& v = require_field(obj, key, where);
  if (!v.is_string()) throw ParseError(pointer(where, key), "expected a string");
  return v.get<std::string>();
}

const Json& require_array(const Json& obj, const std::string& key, const std::string& where) {
  const Json& v = require_field(obj, key, where);
  if (!v.is_array()) throw ParseError(pointer(where, key), "expected an array");
  return v;
}

void require_format_1(const Json& doc) {
  require_object(doc, "");
  auto it = doc.find("format");
  if (it == doc.end()) throw ParseError("/format", "missing required field");
  if (!it->is_number_integer() || it->get<long long>() != 1) {
    throw ParseError("/format", "unsupported format version (expected 1)");
  }
}

namespace {

double horizon_field(const Json& obj, const std::string& key, const std::string& where) {
  require_object(obj, where);
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return InputSignal::kUnending;
  if (it->is_string() && it->get<std::string>() == "inf") return InputSignal::kUnending;
  return require_number(obj, key, where);
}

std::vector<double> number_array(const Json& obj, const std::string& key,
                                 const std::string& where) {
  const Json& arr = require_array(obj, key, where);
  std::vector<double> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError(pointer(pointer(where, key), i), "expected a number");
    out.push_back(arr[i].get<double>());
  }
  return out;
}

}  // namespace

InputSignal signal_from_json(const Json& value, const std::string& where) {
  const std::string kind_name = require_string(value, "kind", where);
  try {
    if (kind_name == "zero") return InputSignal::zero();
    switch (signal_kind_from_string(kind_name)) {
      case SignalKind::step:
        return InputSignal::step(require_number(value, "amplitude", where),
                                 horizon_field(value, "horizon", where));
      case SignalKind::ramp_hold:
        return InputSignal::ramp_hold(require_number(value, "amplitude", where),
                                      require_number(value, "rise", where),
                                      horizon_field(value, "horizon", where));
      case SignalKind::sine_burst:
        return InputSignal::sine_burst(require_number(value, "amplitude", where),
                                       require_number(value, "omega", where),
                                       horizon_field(value, "duration", where));
      case SignalKind::sampled:
        return InputSignal::sampled(number_array(value, "times", where),
                                    number_array(value, "values", where));
    }
  } catch (const ParseError& e) {
    if (e.where().empty()) throw ParseError(pointer(where, "kind"), e.what());
    throw;
  } catch (const Error& e) {
    throw ParseError(where, e.what());
  }
  throw ParseError(pointer(where, "kind"), "unknown signal kind '" + kind_name + "'");
}

Json signal_to_json(const InputSignal& s) {
  Json j;
  j["kind"] = to_string(s.kind());
  auto horizon = [](double h) -> Json {
    return std::isinf(h) ? Json("inf") : Json(h);
  };
  switch (s.kind()) {
    case SignalKind::step:
      j["amplitude"] = s.amplitude();
      j["horizon"] = horizon(s.horizon());
      break;
    case SignalKind::ramp_hold:
      j["amplitude"] = s.amplitude();
      j["rise"] = s.rise_time();
      j["horizon"] = horizon(s.horizon());
      break;
    case SignalKind::sine_burst:
      j["amplitude"] = s.amplitude();
      j["omega"] = s.omega();
      j["duration"] = horizon(s.horizon());
      break;
    case SignalKind::sampled:
      j["times"] = s.times();
      j["values"] = s.values();
      break;
  }
  return j;
}

}  // namespace lumpcheck::detail

namespace lumpcheck::detail {

namespace {

void dump_into(std::string& out, const Json& v, int indent, int depth, int digits) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [key, item] : v.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(key).dump();
        out += indent < 0 ? ":" : ": ";
        dump_into(out, item, indent, depth + 1, digits);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        newline(depth + 1);
        dump_into(out, v[i], indent, depth + 1, digits);
      }
      newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double x = v.get<double>();
      if (!std::isfinite(x)) {
        out += "null";
        return;
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.*g", digits, x);
      out += buf;
      if (std::strpbrk(buf, ".eE") == nullptr) out += ".0";
      return;
    }
    default:
      out += v.dump();
  }
}

}  // namespace

std::string dump_json(const Json& value, int indent, int digits) {
  std::string out;
  dump_into(out, value, indent, 0, digits);
  return out;
}

}  // namespace lumpcheck::detail
