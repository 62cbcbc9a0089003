#include "lumpcheck/lpm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "json_io.hpp"

namespace lumpcheck {

using detail::Json;
using detail::pointer;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InvalidModelError(where + ": " + what);
}

// Union-find over masses plus the ground node (index n).
class Components {
 public:
  explicit Components(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
    return i;
  }
  void join(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

Index LpmNetwork::mass_index(std::string_view id) const {
  for (std::size_t i = 0; i < masses.size(); ++i) {
    if (masses[i].id == id) return static_cast<Index>(i);
  }
  throw InvalidModelError("unknown mass '" + std::string(id) + "'");
}

const InputSignal& LpmNetwork::signal(std::string_view id) const {
  for (const auto& [name, sig] : signals) {
    if (name == id) return sig;
  }
  throw InvalidModelError("unknown signal '" + std::string(id) + "'");
}

std::vector<std::string> LpmNetwork::input_signals() const {
  std::vector<std::string> out;
  for (const auto& src : sources) {
    if (std::find(out.begin(), out.end(), src.signal) == out.end()) out.push_back(src.signal);
  }
  return out;
}

std::vector<InputSignal> LpmNetwork::input_channels() const {
  std::vector<InputSignal> out;
  for (const auto& id : input_signals()) out.push_back(signal(id));
  return out;
}

void validate(const LpmNetwork& net) {
  if (net.masses.empty()) fail("/masses", "network has no masses");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < net.masses.size(); ++i) {
    const auto& m = net.masses[i];
    const std::string where = pointer("/masses", i);
    if (m.id.empty()) fail(pointer(where, "id"), "empty id");
    if (m.id == kGround) fail(pointer(where, "id"), "'ground' is reserved for the fixed frame");
    if (!index.emplace(m.id, i).second) fail(pointer(where, "id"), "duplicate mass id '" + m.id + "'");
    if (!(m.value > 0.0) || !std::isfinite(m.value)) {
      fail(pointer(where, "value"), "mass must be positive");
    }
    if (!std::isfinite(m.x0) || !std::isfinite(m.v0)) fail(where, "initial state must be finite");
  }

  const std::size_t n = net.masses.size();
  Components comp(n + 1);
  std::set<std::string> edge_ids;
  auto resolve = [&](const std::string& id, const std::string& where) -> std::size_t {
    if (id == kGround) return n;
    auto it = index.find(id);
    if (it == index.end()) fail(where, "unknown mass '" + id + "'");
    return it->second;
  };
  auto check_edges = [&](const std::vector<LpmEdge>& edges, const std::string& base,
                         const char* what) {
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[i];
      const std::string where = pointer(base, i);
      if (e.id.empty()) fail(pointer(where, "id"), "empty id");
      if (!edge_ids.insert(e.id).second) fail(pointer(where, "id"), "duplicate element id '" + e.id + "'");
      const std::size_t a = resolve(e.from, pointer(where, "from"));
      const std::size_t b = resolve(e.to, pointer(where, "to"));
      if (a == b) fail(where, std::string(what) + " '" + e.id + "' connects a node to itself");
      if (!(e.value > 0.0) || !std::isfinite(e.value)) {
        fail(where, std::string(what) + " '" + e.id + "' must have a positive coefficient");
      }
      comp.join(a, b);
    }
  };
  check_edges(net.springs, "/springs", "spring");
  check_edges(net.dampers, "/dampers", "damper");
  for (std::size_t i = 0; i < n; ++i) {
    if (comp.find(i) != comp.find(n)) {
      fail(pointer("/masses", i), "mass '" + net.masses[i].id +
                                      "' is not connected to ground; the network must be connected");
    }
  }

  std::set<std::string> signal_ids;
  for (std::size_t i = 0; i < net.signals.size(); ++i) {
    if (!signal_ids.insert(net.signals[i].first).second) {
      fail(pointer(pointer("/signals", i), "id"), "duplicate signal id '" + net.signals[i].first + "'");
    }
  }
  for (std::size_t i = 0; i < net.sources.size(); ++i) {
    const auto& s = net.sources[i];
    const std::string where = pointer("/sources", i);
    resolve(s.mass, pointer(where, "mass"));
    if (s.mass == kGround) fail(pointer(where, "mass"), "a source cannot act on ground");
    if (!signal_ids.count(s.signal)) fail(pointer(where, "signal"), "unknown signal '" + s.signal + "'");
    if (!std::isfinite(s.scale)) fail(pointer(where, "scale"), "scale must be finite");
  }

  if (net.boi.empty()) fail("/boi", "at least one behaviour of interest is required");
  for (std::size_t i = 0; i < net.boi.size(); ++i) {
    const auto& b = net.boi[i];
    const std::string where = pointer("/boi", i);
    if (b.weights.empty()) fail(where, "BoI '" + b.label + "' selects no masses");
    double sum = 0.0;
    for (const auto& [id, w] : b.weights) {
      if (id == kGround) fail(where, "BoI cannot select ground");
      resolve(id, where);
      if (!(w >= 0.0) || !std::isfinite(w)) fail(where, "BoI weights must be nonnegative");
      sum += w;
    }
    if (!(sum > 0.0)) fail(where, "BoI weights sum to zero");
  }
}

namespace {

std::vector<LpmEdge> parse_edges(const Json& doc, const std::string& key, const char* coeff) {
  std::vector<LpmEdge> out;
  if (!doc.contains(key)) return out;
  const Json& arr = detail::require_array(doc, key, "");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = pointer("/" + key, i);
    LpmEdge e;
    e.id = detail::require_string(arr[i], "id", where);
    e.from = detail::require_string(arr[i], "from", where);
    e.to = detail::require_string(arr[i], "to", where);
    e.value = detail::require_number(arr[i], coeff, where);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

LpmNetwork parse_lpm(std::string_view document) {
  const Json doc = detail::parse_json_text(document, "lpm");
  detail::require_format_1(doc);
  LpmNetwork net;

  const Json& masses = detail::require_array(doc, "masses", "");
  for (std::size_t i = 0; i < masses.size(); ++i) {
    const std::string where = pointer("/masses", i);
    LpmMass m;
    m.id = detail::require_string(masses[i], "id", where);
    m.value = detail::require_number(masses[i], "value", where);
    m.x0 = detail::optional_number(masses[i], "x0", 0.0, where);
    m.v0 = detail::optional_number(masses[i], "v0", 0.0, where);
    net.masses.push_back(std::move(m));
  }
  net.springs = parse_edges(doc, "springs", "k");
  net.dampers = parse_edges(doc, "dampers", "r");

  if (doc.contains("signals")) {
    const Json& sigs = detail::require_array(doc, "signals", "");
    for (std::size_t i = 0; i < sigs.size(); ++i) {
      const std::string where = pointer("/signals", i);
      net.signals.emplace_back(detail::require_string(sigs[i], "id", where),
                               detail::signal_from_json(sigs[i], where));
    }
  }
  if (doc.contains("sources")) {
    const Json& srcs = detail::require_array(doc, "sources", "");
    for (std::size_t i = 0; i < srcs.size(); ++i) {
      const std::string where = pointer("/sources", i);
      LpmSource s;
      s.mass = detail::require_string(srcs[i], "mass", where);
      s.signal = detail::require_string(srcs[i], "signal", where);
      s.scale = detail::optional_number(srcs[i], "scale", 1.0, where);
      net.sources.push_back(std::move(s));
    }
  }
  const Json& bois = detail::require_array(doc, "boi", "");
  for (std::size_t i = 0; i < bois.size(); ++i) {
    const std::string where = pointer("/boi", i);
    LpmBoi b;
    b.label = bois[i].contains("label") ? detail::require_string(bois[i], "label", where)
                                        : "y" + std::to_string(i + 1);
    if (bois[i].contains("weights")) {
      const Json& w = bois[i]["weights"];
      if (!w.is_object()) throw ParseError(pointer(where, "weights"), "expected an object");
      for (auto it = w.begin(); it != w.end(); ++it) {
        if (!it->is_number()) {
          throw ParseError(pointer(pointer(where, "weights"), it.key()), "expected a number");
        }
        b.weights.emplace_back(it.key(), it->get<double>());
      }
    } else {
      const Json& ms = detail::require_array(bois[i], "masses", where);
      for (std::size_t k = 0; k < ms.size(); ++k) {
        if (!ms[k].is_string()) {
          throw ParseError(pointer(pointer(where, "masses"), k), "expected a mass id");
        }
        b.weights.emplace_back(ms[k].get<std::string>(), 1.0);
      }
    }
    net.boi.push_back(std::move(b));
  }

  validate(net);
  return net;
}

LpmNetwork load_lpm(const std::filesystem::path& path) {
  const std::string text = detail::read_text_file(path);
  try {
    return parse_lpm(text);
  } catch (const ParseError& e) {
    const std::string where = e.where().rfind("lpm:", 0) == 0 ? e.where().substr(3) : ":" + e.where();
    throw ParseError(path.string() + (e.where().empty() ? "" : where), e.message());
  } catch (const InvalidModelError& e) {
    throw InvalidModelError(path.string() + ": " + e.what());
  }
}

std::string lpm_to_json(const LpmNetwork& net) {
  Json doc;
  doc["format"] = 1;
  doc["masses"] = Json::array();
  for (const auto& m : net.masses) {
    doc["masses"].push_back({{"id", m.id}, {"value", m.value}, {"x0", m.x0}, {"v0", m.v0}});
  }
  auto edges = [](const std::vector<LpmEdge>& es, const char* coeff) {
    Json arr = Json::array();
    for (const auto& e : es) {
      arr.push_back({{"id", e.id}, {"from", e.from}, {"to", e.to}, {coeff, e.value}});
    }
    return arr;
  };
  doc["springs"] = edges(net.springs, "k");
  doc["dampers"] = edges(net.dampers, "r");
  doc["signals"] = Json::array();
  for (const auto& [id, sig] : net.signals) {
    Json j = detail::signal_to_json(sig);
    j["id"] = id;
    doc["signals"].push_back(std::move(j));
  }
  doc["sources"] = Json::array();
  for (const auto& s : net.sources) {
    doc["sources"].push_back({{"mass", s.mass}, {"signal", s.signal}, {"scale", s.scale}});
  }
  doc["boi"] = Json::array();
  for (const auto& b : net.boi) {
    Json w = Json::object();
    for (const auto& [id, weight] : b.weights) w[id] = weight;
    doc["boi"].push_back({{"label", b.label}, {"weights", w}});
  }
  return detail::dump_json(doc);
}

SecondOrderSystem assemble_lpm(const LpmNetwork& net) {
  validate(net);
  const Index n = static_cast<Index>(net.masses.size());
  std::vector<Eigen::Triplet<double>> m_trip, k_trip, r_trip;
  for (Index i = 0; i < n; ++i) m_trip.emplace_back(i, i, net.masses[i].value);
  auto stamp = [&](const std::vector<LpmEdge>& edges, std::vector<Eigen::Triplet<double>>& trip) {
    for (const auto& e : edges) {
      const bool a_ground = e.from == kGround;
      const bool b_ground = e.to == kGround;
      const Index a = a_ground ? -1 : net.mass_index(e.from);
      const Index b = b_ground ? -1 : net.mass_index(e.to);
      if (!a_ground) trip.emplace_back(a, a, e.value);
      if (!b_ground) trip.emplace_back(b, b, e.value);
      if (!a_ground && !b_ground) {
        trip.emplace_back(a, b, -e.value);
        trip.emplace_back(b, a, -e.value);
      }
    }
  };
  stamp(net.springs, k_trip);
  stamp(net.dampers, r_trip);
  SparseMatrix M(n, n), K(n, n), R(n, n);
  M.setFromTriplets(m_trip.begin(), m_trip.end());
  K.setFromTriplets(k_trip.begin(), k_trip.end());
  R.setFromTriplets(r_trip.begin(), r_trip.end());

  const auto inputs = net.input_signals();
  Matrix F = Matrix::Zero(n, static_cast<Index>(inputs.size()));
  for (const auto& s : net.sources) {
    const auto col = std::find(inputs.begin(), inputs.end(), s.signal) - inputs.begin();
    F(net.mass_index(s.mass), col) += s.scale;
  }
  Matrix C = Matrix::Zero(static_cast<Index>(net.boi.size()), n);
  for (std::size_t i = 0; i < net.boi.size(); ++i) {
    double sum = 0.0;
    for (const auto& [id, w] : net.boi[i].weights) sum += w;
    for (const auto& [id, w] : net.boi[i].weights) {
      C(static_cast<Index>(i), net.mass_index(id)) += w / sum;
    }
  }
  return SecondOrderSystem(std::move(M), std::move(K), std::move(R), std::move(F), std::move(C));
}

double total_mass(const LpmNetwork& net) {
  double sum = 0.0;
  for (const auto& m : net.masses) sum += m.value;
  return sum;
}

Vector initial_displacement(const LpmNetwork& net) {
  Vector x(static_cast<Index>(net.masses.size()));
  for (std::size_t i = 0; i < net.masses.size(); ++i) x(static_cast<Index>(i)) = net.masses[i].x0;
  return x;
}

Vector initial_velocity(const LpmNetwork& net) {
  Vector v(static_cast<Index>(net.masses.size()));
  for (std::size_t i = 0; i < net.masses.size(); ++i) v(static_cast<Index>(i)) = net.masses[i].v0;
  return v;
}

}  // namespace lumpcheck
