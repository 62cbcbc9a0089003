#include "lumpcheck/dpm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json_io.hpp"

namespace lumpcheck {

using detail::Json;
using detail::pointer;

// ------------------------------------------------------------- Matrix Market

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

class LineReader {
 public:
  LineReader(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  // Next line that is neither blank nor a comment; false at end of input.
  bool next(std::string& line) {
    while (pos_ < text_.size()) {
      const std::size_t end = std::min(text_.find('\n', pos_), text_.size());
      line.assign(text_.substr(pos_, end - pos_));
      pos_ = end + 1;
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '%') continue;
      return true;
    }
    return false;
  }

  bool raw_first(std::string& line) {
    if (pos_ >= text_.size()) return false;
    const std::size_t end = std::min(text_.find('\n', pos_), text_.size());
    line.assign(text_.substr(pos_, end - pos_));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos_ = end + 1;
    ++line_no_;
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(source_ + ":" + std::to_string(line_no_), what);
  }

 private:
  std::string_view text_;
  std::string source_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

template <typename... T>
bool scan(const std::string& line, T&... out) {
  std::istringstream in(line);
  in.imbue(std::locale::classic());
  ((in >> out), ...);
  if (in.fail()) return false;
  std::string rest;
  return !(in >> rest);
}

}  // namespace

SparseMatrix parse_matrix_market(std::string_view text, const std::string& source) {
  LineReader reader(text, source);
  std::string line;
  if (!reader.raw_first(line)) reader.fail("empty file");
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") reader.fail("missing %%MatrixMarket banner");
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix") reader.fail("unsupported object '" + object + "'");
  if (format != "coordinate" && format != "array") reader.fail("unsupported format '" + format + "'");
  if (field != "real" && field != "integer" && field != "double") {
    reader.fail("unsupported field '" + field + "' (only real and integer data are accepted)");
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    reader.fail("unsupported symmetry '" + symmetry + "'");
  }
  const bool symmetric = symmetry == "symmetric";

  if (!reader.next(line)) reader.fail("missing size line");
  long long rows = 0, cols = 0, nnz = 0;
  if (format == "coordinate") {
    if (!scan(line, rows, cols, nnz) || rows < 0 || cols < 0 || nnz < 0) {
      reader.fail("malformed size line (expected: rows cols entries)");
    }
  } else if (!scan(line, rows, cols) || rows < 0 || cols < 0) {
    reader.fail("malformed size line (expected: rows cols)");
  }
  if (symmetric && rows != cols) reader.fail("symmetric matrix must be square");

  std::vector<Eigen::Triplet<double>> trip;
  auto add = [&](long long i, long long j, double v) {
    trip.emplace_back(i, j, v);
    if (symmetric && i != j) trip.emplace_back(j, i, v);
  };

  if (format == "coordinate") {
    trip.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
    for (long long k = 0; k < nnz; ++k) {
      if (!reader.next(line)) {
        reader.fail("expected " + std::to_string(nnz) + " entries, found " + std::to_string(k));
      }
      long long i = 0, j = 0;
      double v = 0.0;
      if (!scan(line, i, j, v)) reader.fail("malformed entry (expected: row col value)");
      if (i < 1 || i > rows || j < 1 || j > cols) {
        reader.fail("entry (" + std::to_string(i) + "," + std::to_string(j) +
                    ") outside the declared " + std::to_string(rows) + "x" +
                    std::to_string(cols) + " matrix");
      }
      if (symmetric && j > i) reader.fail("symmetric file stores an entry above the diagonal");
      if (!std::isfinite(v)) reader.fail("non-finite value");
      add(i - 1, j - 1, v);
    }
  } else {
    for (long long j = 0; j < cols; ++j) {
      for (long long i = symmetric ? j : 0; i < rows; ++i) {
        if (!reader.next(line)) reader.fail("array data ends early");
        double v = 0.0;
        if (!scan(line, v)) reader.fail("malformed array value");
        if (!std::isfinite(v)) reader.fail("non-finite value");
        if (v != 0.0) add(i, j, v);
      }
    }
  }
  if (reader.next(line)) reader.fail("unexpected data after the declared entries");

  SparseMatrix X(rows, cols);
  X.setFromTriplets(trip.begin(), trip.end());
  X.makeCompressed();
  return X;
}

SparseMatrix read_matrix_market(const std::filesystem::path& path) {
  return parse_matrix_market(detail::read_text_file(path), path.string());
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.imbue(std::locale::classic());
  out.precision(17);
  return out;
}

}  // namespace

void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& X) {
  auto out = open_for_write(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << X.rows() << ' ' << X.cols() << ' ' << X.nonZeros() << '\n';
  for (Index k = 0; k < X.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(X, k); it; ++it) {
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

void write_matrix_market(const std::filesystem::path& path, const Matrix& X) {
  auto out = open_for_write(path);
  out << "%%MatrixMarket matrix array real general\n";
  out << X.rows() << ' ' << X.cols() << '\n';
  for (Index j = 0; j < X.cols(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) out << X(i, j) << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

// ------------------------------------------------------------------ 1D bar

namespace {

void check_bar(const BarParameters& bar) {
  auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
  if (!positive(bar.length) || !positive(bar.area) || !positive(bar.youngs_modulus) ||
      !positive(bar.density)) {
    throw InvalidModelError("bar length, area, Young's modulus and density must be positive");
  }
  if (bar.elements < 1) throw InvalidModelError("bar needs at least one element");
  if (!(bar.alpha >= 0.0) || !(bar.beta >= 0.0)) {
    throw InvalidModelError("Rayleigh coefficients must be nonnegative");
  }
}

}  // namespace

SecondOrderSystem assemble_bar_fem(const BarParameters& bar) {
  check_bar(bar);
  const Index ne = bar.elements;
  const Index nodes = ne + 1;
  const double le = bar.length / static_cast<double>(ne);
  const double ke = bar.youngs_modulus * bar.area / le;
  const double me = bar.density * bar.area * le;
  const Index offset = bar.clamped ? 1 : 0;
  const Index n = nodes - offset;

  std::vector<Eigen::Triplet<double>> kt, mt;
  kt.reserve(static_cast<std::size_t>(4 * ne));
  mt.reserve(static_cast<std::size_t>(4 * ne));
  auto put = [&](std::vector<Eigen::Triplet<double>>& t, Index i, Index j, double v) {
    if (i >= offset && j >= offset && v != 0.0) t.emplace_back(i - offset, j - offset, v);
  };
  for (Index e = 0; e < ne; ++e) {
    const Index a = e, b = e + 1;
    put(kt, a, a, ke);
    put(kt, b, b, ke);
    put(kt, a, b, -ke);
    put(kt, b, a, -ke);
    if (bar.mass_model == MassModel::consistent) {
      put(mt, a, a, me / 3.0);
      put(mt, b, b, me / 3.0);
      put(mt, a, b, me / 6.0);
      put(mt, b, a, me / 6.0);
    } else {
      put(mt, a, a, me / 2.0);
      put(mt, b, b, me / 2.0);
    }
  }
  SparseMatrix M(n, n), K(n, n);
  M.setFromTriplets(mt.begin(), mt.end());
  K.setFromTriplets(kt.begin(), kt.end());
  SparseMatrix R = bar.alpha * M + bar.beta * K;
  R.prune(0.0);
  Matrix F = Matrix::Zero(n, 1);
  F(n - 1, 0) = 1.0;
  Matrix C = Matrix::Zero(1, n);
  C(0, n - 1) = 1.0;
  return SecondOrderSystem(std::move(M), std::move(K), std::move(R), std::move(F), std::move(C));
}

SecondOrderSystem assemble_bar_fem(double length, double area, double youngs_modulus,
                                   double density, Index n_elems, double alpha, double beta,
                                   MassModel mass_model) {
  BarParameters bar;
  bar.length = length;
  bar.area = area;
  bar.youngs_modulus = youngs_modulus;
  bar.density = density;
  bar.elements = n_elems;
  bar.alpha = alpha;
  bar.beta = beta;
  bar.mass_model = mass_model;
  return assemble_bar_fem(bar);
}

double bar_physical_mass(const BarParameters& bar) {
  return bar.density * bar.area * bar.length;
}

double bar_first_frequency(const BarParameters& bar) {
  return 0.5 * std::numbers::pi * std::sqrt(bar.youngs_modulus / bar.density) / bar.length;
}

double dpm_total_mass(const SecondOrderSystem& sys) { return sys.M().sum(); }

RowVector build_boi_selector(Index n, std::span<const Index> nodes,
                             std::span<const double> weights) {
  if (nodes.empty()) throw InvalidModelError("BoI node set is empty");
  if (!weights.empty() && weights.size() != nodes.size()) {
    throw DimensionError("BoI needs one weight per node");
  }
  RowVector row = RowVector::Zero(n);
  double sum = 0.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Index i = nodes[k];
    if (i < 0 || i >= n) {
      throw InvalidModelError("BoI node " + std::to_string(i) + " outside 0.." +
                              std::to_string(n - 1));
    }
    const double w = weights.empty() ? 1.0 : weights[k];
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidModelError("BoI weights must be nonnegative");
    row(i) += w;
    sum += w;
  }
  if (!(sum > 0.0)) throw InvalidModelError("BoI weights sum to zero");
  return row / sum;
}

// --------------------------------------------------------------- manifest

const InputSignal& DpmModel::signal(std::string_view id) const {
  for (const auto& [name, sig] : signals) {
    if (name == id) return sig;
  }
  throw InvalidModelError("unknown signal '" + std::string(id) + "'");
}

std::vector<InputSignal> DpmModel::input_channels() const {
  std::vector<InputSignal> out;
  for (const auto& id : input_signals) out.push_back(signal(id));
  return out;
}

double DpmModel::mass_for_matching() const {
  return total_mass ? *total_mass : dpm_total_mass(system);
}

namespace {

std::vector<Index> index_array(const Json& obj, const std::string& key, const std::string& where) {
  const Json& arr = detail::require_array(obj, key, where);
  std::vector<Index> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number_integer()) {
      throw ParseError(pointer(pointer(where, key), i), "expected an integer node index");
    }
    out.push_back(arr[i].get<Index>());
  }
  return out;
}

std::vector<double> weight_array(const Json& obj, const std::string& where) {
  std::vector<double> out;
  if (!obj.contains("weights")) return out;
  const Json& arr = detail::require_array(obj, "weights", where);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError(pointer(pointer(where, "weights"), i), "expected a number");
    out.push_back(arr[i].get<double>());
  }
  return out;
}

Vector vector_field(const Json& doc, const std::string& key, Index n) {
  if (!doc.contains(key)) return Vector::Zero(n);
  const Json& arr = detail::require_array(doc, key, "");
  if (static_cast<Index>(arr.size()) != n) {
    throw ParseError("/" + key, "expected " + std::to_string(n) + " values, found " +
                                    std::to_string(arr.size()));
  }
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    if (!arr[i].is_number()) throw ParseError(pointer("/" + key, static_cast<std::size_t>(i)), "expected a number");
    v(i) = arr[i].get<double>();
  }
  return v;
}

Matrix dense_rows(const Json& value, const std::string& where) {
  if (!value.is_array() || value.empty()) throw ParseError(where, "expected a nonempty array of rows");
  const Index rows = static_cast<Index>(value.size());
  Index cols = -1;
  Matrix out;
  for (Index i = 0; i < rows; ++i) {
    const Json& row = value[i];
    const std::string rw = pointer(where, static_cast<std::size_t>(i));
    if (!row.is_array()) throw ParseError(rw, "expected an array");
    if (cols < 0) {
      cols = static_cast<Index>(row.size());
      out.resize(rows, cols);
    } else if (static_cast<Index>(row.size()) != cols) {
      throw ParseError(rw, "rows differ in length");
    }
    for (Index j = 0; j < cols; ++j) {
      if (!row[j].is_number()) throw ParseError(pointer(rw, static_cast<std::size_t>(j)), "expected a number");
      out(i, j) = row[j].get<double>();
    }
  }
  return out;
}

BarParameters bar_from_json(const Json& j) {
  const std::string w = "/bar";
  BarParameters bar;
  bar.length = detail::require_number(j, "length", w);
  bar.area = detail::require_number(j, "area", w);
  bar.youngs_modulus = detail::require_number(j, "youngs_modulus", w);
  bar.density = detail::require_number(j, "density", w);
  const Json& ne = detail::require_field(j, "elements", w);
  if (!ne.is_number_integer()) throw ParseError(pointer(w, "elements"), "expected an integer");
  bar.elements = ne.get<Index>();
  bar.alpha = detail::optional_number(j, "alpha", 0.0, w);
  bar.beta = detail::optional_number(j, "beta", 0.0, w);
  if (j.contains("mass")) {
    const std::string m = detail::require_string(j, "mass", w);
    if (m == "consistent") {
      bar.mass_model = MassModel::consistent;
    } else if (m == "lumped") {
      bar.mass_model = MassModel::lumped;
    } else {
      throw ParseError(pointer(w, "mass"), "expected 'consistent' or 'lumped'");
    }
  }
  if (j.contains("clamped")) {
    if (!j["clamped"].is_boolean()) throw ParseError(pointer(w, "clamped"), "expected a boolean");
    bar.clamped = j["clamped"].get<bool>();
  }
  return bar;
}

Json bar_to_json(const BarParameters& bar) {
  return {{"length", bar.length},
          {"area", bar.area},
          {"youngs_modulus", bar.youngs_modulus},
          {"density", bar.density},
          {"elements", bar.elements},
          {"alpha", bar.alpha},
          {"beta", bar.beta},
          {"mass", bar.mass_model == MassModel::consistent ? "consistent" : "lumped"},
          {"clamped", bar.clamped}};
}

DpmModel parse_manifest(const Json& doc, const std::filesystem::path& base) {
  detail::require_format_1(doc);
  const bool has_files = doc.contains("matrices");
  const bool has_bar = doc.contains("bar");
  if (has_files == has_bar) {
    throw ParseError("/", "manifest needs exactly one of 'matrices' or 'bar'");
  }

  std::optional<BarParameters> bar;
  SparseMatrix M, K, R;
  std::optional<Matrix> F, C;
  if (has_bar) {
    bar = bar_from_json(doc["bar"]);
    auto sys = assemble_bar_fem(*bar);
    M = sys.M();
    K = sys.K();
    R = sys.R();
    F = sys.F();
    C = sys.Cout();
  } else {
    const Json& files = doc["matrices"];
    detail::require_object(files, "/matrices");
    auto load = [&](const std::string& key) {
      const std::string rel = detail::require_string(files, key, "/matrices");
      try {
        return read_matrix_market(base / rel);
      } catch (const ParseError& e) {
        throw ParseError(pointer("/matrices", key) + " (" + e.where() + ")", e.message());
      }
    };
    M = load("M");
    K = load("K");
    R = files.contains("R") ? load("R") : SparseMatrix(M.rows(), M.cols());
    if (files.contains("F")) F = Matrix(load("F"));
    if (files.contains("Cout")) C = Matrix(load("Cout"));
  }
  const Index n = M.rows();

  DpmModel model{SecondOrderSystem(SparseMatrix(Matrix::Identity(1, 1).sparseView()),
                                   SparseMatrix(1, 1), SparseMatrix(1, 1), Matrix::Zero(1, 0),
                                   Matrix::Zero(0, 1)),
                 {}, {}, Vector(), Vector(), std::nullopt, bar, {}};

  if (doc.contains("signals")) {
    const Json& sigs = detail::require_array(doc, "signals", "");
    for (std::size_t i = 0; i < sigs.size(); ++i) {
      const std::string where = pointer("/signals", i);
      model.signals.emplace_back(detail::require_string(sigs[i], "id", where),
                                 detail::signal_from_json(sigs[i], where));
    }
  }

  if (doc.contains("sources")) {
    if (has_files && F) throw ParseError("/sources", "give either an F matrix or 'sources', not both");
    const Json& srcs = detail::require_array(doc, "sources", "");
    Matrix Fs = Matrix::Zero(n, static_cast<Index>(srcs.size()));
    for (std::size_t k = 0; k < srcs.size(); ++k) {
      const std::string where = pointer("/sources", k);
      model.input_signals.push_back(detail::require_string(srcs[k], "signal", where));
      const auto nodes = index_array(srcs[k], "nodes", where);
      const auto weights = weight_array(srcs[k], where);
      if (!weights.empty() && weights.size() != nodes.size()) {
        throw ParseError(pointer(where, "weights"), "one weight per node required");
      }
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i] < 0 || nodes[i] >= n) {
          throw ParseError(pointer(pointer(where, "nodes"), i), "node index outside 0.." + std::to_string(n - 1));
        }
        Fs(nodes[i], static_cast<Index>(k)) += weights.empty() ? 1.0 : weights[i];
      }
    }
    F = std::move(Fs);
  } else if (doc.contains("inputs")) {
    const Json& ins = detail::require_array(doc, "inputs", "");
    for (std::size_t k = 0; k < ins.size(); ++k) {
      if (!ins[k].is_string()) throw ParseError(pointer("/inputs", k), "expected a signal id");
      model.input_signals.push_back(ins[k].get<std::string>());
    }
  }
  if (!F) throw ParseError("/", "no input map: give matrices/F or 'sources'");
  if (!model.input_signals.empty() &&
      static_cast<Index>(model.input_signals.size()) != F->cols()) {
    throw ParseError("/inputs", "one signal per input column required (" +
                                    std::to_string(F->cols()) + " columns)");
  }
  for (std::size_t k = 0; k < model.input_signals.size(); ++k) {
    model.signal(model.input_signals[k]);  // resolves or throws
  }

  if (doc.contains("boi")) {
    if (has_files && C) throw ParseError("/boi", "give either a Cout matrix or 'boi', not both");
    const Json& bois = detail::require_array(doc, "boi", "");
    Matrix Cs(static_cast<Index>(bois.size()), n);
    for (std::size_t k = 0; k < bois.size(); ++k) {
      const std::string where = pointer("/boi", k);
      const auto nodes = index_array(bois[k], "nodes", where);
      const auto weights = weight_array(bois[k], where);
      try {
        Cs.row(static_cast<Index>(k)) = build_boi_selector(n, nodes, weights);
      } catch (const Error& e) {
        throw ParseError(where, e.what());
      }
    }
    C = std::move(Cs);
  }
  if (!C) throw ParseError("/", "no output map: give matrices/Cout or 'boi'");

  model.system = SecondOrderSystem(std::move(M), std::move(K), std::move(R), std::move(*F),
                                   std::move(*C));
  model.x0 = vector_field(doc, "x0", n);
  model.v0 = vector_field(doc, "v0", n);
  if (doc.contains("total_mass")) {
    const double m = detail::require_number(doc, "total_mass", "");
    if (!(m > 0.0)) throw ParseError("/total_mass", "must be positive");
    model.total_mass = m;
  }

  if (doc.contains("projections")) {
    const Json& pj = doc["projections"];
    detail::require_object(pj, "/projections");
    if (pj.contains("gamma_n")) model.projections.gamma_n = dense_rows(pj["gamma_n"], "/projections/gamma_n");
    if (pj.contains("gamma_i")) {
      const Json& rows = detail::require_array(pj, "gamma_i", "/projections");
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::string where = pointer("/projections/gamma_i", k);
        NodeAverage avg;
        avg.mass = detail::require_string(rows[k], "mass", where);
        avg.nodes = index_array(rows[k], "nodes", where);
        avg.weights = weight_array(rows[k], where);
        try {
          build_boi_selector(n, avg.nodes, avg.weights);
        } catch (const Error& e) {
          throw ParseError(where, e.what());
        }
        model.projections.gamma_i.push_back(std::move(avg));
      }
    }
  }
  return model;
}

}  // namespace

DpmModel load_dpm_manifest(const std::filesystem::path& path) {
  const std::string text = detail::read_text_file(path);
  try {
    return parse_manifest(detail::parse_json_text(text, path.string()), path.parent_path());
  } catch (const ParseError& e) {
    if (e.where().rfind(path.string(), 0) == 0) throw;
    throw ParseError(path.string() + ":" + e.where(), e.message());
  }
}

void save_dpm(const std::filesystem::path& dir, const DpmModel& model,
              const std::string& manifest_name) {
  std::filesystem::create_directories(dir);
  const auto& sys = model.system;
  write_matrix_market(dir / "M.mtx", sys.M());
  write_matrix_market(dir / "K.mtx", sys.K());
  write_matrix_market(dir / "R.mtx", sys.R());
  write_matrix_market(dir / "F.mtx", sys.F());
  write_matrix_market(dir / "Cout.mtx", sys.Cout());
  Json doc;
  doc["format"] = 1;
  doc["matrices"] = {{"M", "M.mtx"}, {"K", "K.mtx"}, {"R", "R.mtx"}, {"F", "F.mtx"},
                     {"Cout", "Cout.mtx"}};
  doc["signals"] = Json::array();
  for (const auto& [id, sig] : model.signals) {
    Json j = detail::signal_to_json(sig);
    j["id"] = id;
    doc["signals"].push_back(std::move(j));
  }
  doc["inputs"] = model.input_signals;
  if (model.x0.size() && !model.x0.isZero(0.0)) {
    doc["x0"] = std::vector<double>(model.x0.data(), model.x0.data() + model.x0.size());
  }
  if (model.v0.size() && !model.v0.isZero(0.0)) {
    doc["v0"] = std::vector<double>(model.v0.data(), model.v0.data() + model.v0.size());
  }
  if (model.total_mass) doc["total_mass"] = *model.total_mass;
  if (model.bar) doc["generator"] = bar_to_json(*model.bar);
  Json pj = Json::object();
  if (model.projections.gamma_n) {
    const Matrix& G = *model.projections.gamma_n;
    Json rows = Json::array();
    for (Index i = 0; i < G.rows(); ++i) {
      rows.push_back(std::vector<double>(G.cols()));
      for (Index j = 0; j < G.cols(); ++j) rows.back()[j] = G(i, j);
    }
    pj["gamma_n"] = rows;
  }
  if (!model.projections.gamma_i.empty()) {
    Json rows = Json::array();
    for (const auto& avg : model.projections.gamma_i) {
      Json r = {{"mass", avg.mass}, {"nodes", avg.nodes}};
      if (!avg.weights.empty()) r["weights"] = avg.weights;
      rows.push_back(std::move(r));
    }
    pj["gamma_i"] = rows;
  }
  if (!pj.empty()) doc["projections"] = pj;
  auto out = std::ofstream(dir / manifest_name);
  if (!out) throw Error("cannot write manifest in " + dir.string());
  out << detail::dump_json(doc) << '\n';
}

// ------------------------------------------------------------ ROM families

void save_rom_family(const std::filesystem::path& dir, const RomFamily& family) {
  std::filesystem::create_directories(dir);
  Json doc;
  doc["format"] = 1;
  doc["fom_ref"] = family.fom_ref;
  doc["fom_h2"] = family.fom_h2;
  doc["target_rel"] = family.target_rel;
  doc["target_met"] = family.target_met;
  doc["stop_reason"] = family.stop_reason;
  doc["steps"] = Json::array();
  for (std::size_t k = 0; k < family.steps.size(); ++k) {
    const RomStep& step = family.steps[k];
    const std::string stem = "step_" + std::to_string(k + 1) + "_";
    Json files;
    const std::pair<const char*, Matrix> parts[] = {{"E", step.rom.E().dense()},
                                                    {"A", step.rom.A().dense()},
                                                    {"B", step.rom.B()},
                                                    {"C", step.rom.C()}};
    for (const auto& [key, X] : parts) {
      const std::string name = stem + key + ".mtx";
      write_matrix_market(dir / name, X);
      files[key] = name;
    }
    Json shifts = Json::array();
    for (const Complex& s : step.shifts) shifts.push_back({s.real(), s.imag()});
    doc["steps"].push_back({{"order", step.order},
                            {"certified_error", step.certified_error},
                            {"relative_error", family.relative_error(k)},
                            {"rom_h2", step.rom_h2},
                            {"shifts", shifts},
                            {"files", files}});
  }
  std::ofstream out(dir / "family.json");
  if (!out) throw Error("cannot write " + (dir / "family.json").string());
  out << detail::dump_json(doc) << '\n';
}

RomFamily load_rom_family(const std::filesystem::path& dir) {
  const auto path = dir / "family.json";
  const Json doc = detail::parse_json_text(detail::read_text_file(path), path.string());
  try {
    detail::require_format_1(doc);
    RomFamily family;
    family.fom_ref = doc.value("fom_ref", std::string());
    family.fom_h2 = detail::require_number(doc, "fom_h2", "");
    family.target_rel = detail::optional_number(doc, "target_rel", 0.0, "");
    family.target_met = doc.value("target_met", false);
    family.stop_reason = doc.value("stop_reason", std::string());
    const Json& steps = detail::require_array(doc, "steps", "");
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const std::string where = pointer("/steps", k);
      const Json& files = detail::require_field(steps[k], "files", where);
      auto load = [&](const char* key) {
        return Matrix(read_matrix_market(dir / detail::require_string(files, key, pointer(where, "files"))));
      };
      RomStep step{0, StateSpaceSystem(load("E"), load("A"), load("B"), load("C")), 0.0, 0.0, {}};
      step.order = step.rom.states();
      step.certified_error = detail::require_number(steps[k], "certified_error", where);
      step.rom_h2 = detail::optional_number(steps[k], "rom_h2", 0.0, where);
      if (steps[k].contains("shifts")) {
        for (const auto& s : steps[k]["shifts"]) {
          if (!s.is_array() || s.size() != 2) throw ParseError(pointer(where, "shifts"), "expected [re, im] pairs");
          step.shifts.emplace_back(s[0].get<double>(), s[1].get<double>());
        }
      }
      family.steps.push_back(std::move(step));
    }
    return family;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + e.where(), e.message());
  }
}

}  // namespace lumpcheck
