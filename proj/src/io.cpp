#include "ebm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ebm/error.hpp"

namespace ebm::io {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s, const char* what) {
  if (s == "nan") return kNaN;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(std::string("bad number in ") + what + ": '" + s + "'");
  }
  return v;
}

// JSON has no NaN; null stands in for it.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& v) { return v.is_null() ? kNaN : v.get<double>(); }

template <class T>
T field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

std::vector<SubsetVector::Entry> entries_from(const json& arr) {
  if (!arr.is_array()) throw ConfigError("entries must be an array of [mask, value] pairs");
  std::vector<SubsetVector::Entry> out;
  out.reserve(arr.size());
  for (const auto& e : arr) {
    if (!e.is_array() || e.size() != 2) throw ConfigError("each entry must be a [mask, value] pair");
    out.emplace_back(e[0].get<Mask>(), e[1].get<double>());
  }
  return out;
}

json entries_to(const SubsetVector& v, bool skip_empty) {
  json arr = json::array();
  v.for_each([&](Mask m, double x) {
    if (skip_empty && m == 0) return;
    arr.push_back(json::array({m, x}));
  });
  return arr;
}

SubsetVector assemble(int n_sites, const json* max_order, std::vector<SubsetVector::Entry> entries) {
  if (max_order != nullptr) return SubsetVector(n_sites, max_order->get<int>(), std::move(entries));
  require_enumerable(n_sites, "dense subset vector");
  std::vector<double> dense(std::size_t{1} << n_sites, 0.0);
  for (const auto& [m, x] : entries) {
    if ((m & ~full_mask(n_sites)) != 0) throw ConfigError("subset mask reaches beyond n_sites");
    dense[static_cast<std::size_t>(m)] = x;
  }
  return SubsetVector(n_sites, std::move(dense));
}

}  // namespace

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("write to '" + path.string() + "' failed");
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

json subset_vector_to_json(const SubsetVector& v) {
  json doc = {{"n_sites", v.n_sites()}};
  if (!v.is_dense()) doc["max_order"] = v.max_order();
  doc["entries"] = entries_to(v, false);
  return doc;
}

SubsetVector subset_vector_from_json(const json& doc) {
  const int n = field<int>(doc, "n_sites");
  const json* order = doc.contains("max_order") ? &doc.at("max_order") : nullptr;
  return assemble(n, order, entries_from(doc.at("entries")));
}

void write_subset_csv(std::ostream& out, const SubsetVector& v) {
  out << "# n_sites=" << v.n_sites();
  if (!v.is_dense()) out << " max_order=" << v.max_order();
  out << "\n# mask: bit i set <=> site i belongs to the subset\n";
  out << "mask,value\n";
  v.for_each([&](Mask m, double x) { out << m << ',' << format_double(x) << '\n'; });
}

SubsetVector read_subset_csv(std::istream& in) {
  int n = -1;
  int order = -1;
  std::vector<SubsetVector::Entry> entries;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        if (tok.rfind("n_sites=", 0) == 0) n = std::stoi(tok.substr(8));
        if (tok.rfind("max_order=", 0) == 0) order = std::stoi(tok.substr(10));
      }
      continue;
    }
    if (!header) {
      if (line != "mask,value") throw ConfigError("subset CSV: expected header 'mask,value'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("subset CSV: malformed row '" + line + "'");
    Mask m = 0;
    const std::string ms = line.substr(0, comma);
    auto [ptr, ec] = std::from_chars(ms.data(), ms.data() + ms.size(), m);
    if (ec != std::errc() || ptr != ms.data() + ms.size()) throw ConfigError("subset CSV: bad mask '" + ms + "'");
    entries.emplace_back(m, parse_double(line.substr(comma + 1), "subset CSV"));
  }
  if (n < 1) throw ConfigError("subset CSV: missing '# n_sites=' header");
  const json order_doc = order;
  return assemble(n, order >= 0 ? &order_doc : nullptr, std::move(entries));
}

json hobm_to_json(const HigherOrderModel& model) {
  const auto& c = model.couplings();
  json doc = {{"n_sites", model.n_sites()}};
  if (!c.is_dense()) doc["max_order"] = c.max_order();
  // Dense checkpoints skip zero entries; absent subsets read back as zero.
  json arr = json::array();
  c.for_each([&](Mask m, double x) {
    if (m != 0 && (!c.is_dense() || x != 0.0)) arr.push_back(json::array({m, x}));
  });
  doc["couplings"] = std::move(arr);
  return doc;
}

HigherOrderModel hobm_from_json(const json& doc) {
  const int n = field<int>(doc, "n_sites");
  const json* order = doc.contains("max_order") ? &doc.at("max_order") : nullptr;
  return HigherOrderModel(EffectiveCouplings(assemble(n, order, entries_from(doc.at("couplings")))));
}

std::string to_string(Convention c) { return c == Convention::spin ? "spin" : "binary"; }

Convention parse_convention(const std::string& name) {
  if (name == "spin") return Convention::spin;
  if (name == "binary") return Convention::binary;
  throw ConfigError("unknown convention '" + name + "' (expected spin or binary)");
}

json rbm_to_json(const RbmParameters& p) {
  p.validate();
  json w = json::array();
  for (int i = 0; i < p.n_visible(); ++i) {
    for (int a = 0; a < p.n_hidden(); ++a) w.push_back(p.weights(i, a));
  }
  return {{"convention", to_string(p.convention)},
          {"n_visible", p.n_visible()},
          {"n_hidden", p.n_hidden()},
          {"weights", w},
          {"hidden_biases", std::vector<double>(p.hidden_biases.data(), p.hidden_biases.data() + p.n_hidden())},
          {"visible_fields", std::vector<double>(p.visible_fields.data(), p.visible_fields.data() + p.n_visible())}};
}

RbmParameters rbm_from_json(const json& doc) {
  const int nv = field<int>(doc, "n_visible");
  const int nh = field<int>(doc, "n_hidden");
  RbmParameters p = RbmParameters::zeros(nv, nh, parse_convention(field<std::string>(doc, "convention")));
  const auto w = field<std::vector<double>>(doc, "weights");
  const auto c = field<std::vector<double>>(doc, "hidden_biases");
  const auto b = field<std::vector<double>>(doc, "visible_fields");
  if (w.size() != static_cast<std::size_t>(nv) * static_cast<std::size_t>(nh) ||
      c.size() != static_cast<std::size_t>(nh) || b.size() != static_cast<std::size_t>(nv)) {
    throw ConfigError("RBM checkpoint arrays do not match n_visible / n_hidden");
  }
  for (int i = 0; i < nv; ++i) {
    for (int a = 0; a < nh; ++a) p.weights(i, a) = w[static_cast<std::size_t>(i * nh + a)];
  }
  for (int a = 0; a < nh; ++a) p.hidden_biases(a) = c[static_cast<std::size_t>(a)];
  for (int i = 0; i < nv; ++i) p.visible_fields(i) = b[static_cast<std::size_t>(i)];
  p.validate();
  return p;
}

fs::path sidecar_path(const fs::path& dataset) {
  fs::path s = dataset;
  s += ".json";
  return s;
}

void write_dataset(const fs::path& path, const EmpiricalSamples& samples, const json& sidecar) {
  std::string text;
  const int n = samples.n_sites();
  text.reserve(samples.size() * static_cast<std::size_t>(3 * n));
  for (Mask code : samples.codes()) {
    for (int i = 0; i < n; ++i) {
      if (i > 0) text += ' ';
      text += ((code >> i) & 1) ? "1" : "-1";
    }
    text += '\n';
  }
  write_text(path, text);
  write_json(sidecar_path(path), sidecar);
}

EmpiricalSamples read_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path.string() + "'");
  std::vector<Mask> codes;
  int n = -1;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int v = 0;
    int i = 0;
    Mask code = 0;
    while (ss >> v) {
      if (v != 1 && v != -1) throw ConfigError("dataset line " + std::to_string(lineno) + ": spins must be -1 or 1");
      if (i >= kMaxSites) throw ConfigError("dataset line " + std::to_string(lineno) + ": more than 64 sites");
      if (v == 1) code |= Mask{1} << i;
      ++i;
    }
    if (!ss.eof()) throw ConfigError("dataset line " + std::to_string(lineno) + ": not a list of integers");
    if (n < 0) n = i;
    if (i != n) throw ConfigError("dataset line " + std::to_string(lineno) + ": inconsistent number of sites");
    codes.push_back(code);
  }
  if (codes.empty()) throw ConfigError("dataset '" + path.string() + "' is empty");
  return EmpiricalSamples(n, std::move(codes));
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell, "matrix CSV"));
    if (!rows.empty() && row.size() != rows.front().size()) throw ConfigError("matrix CSV: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

json to_json(const FixedPointReport& r) {
  return {{"classification", to_string(r.classification)},
          {"theta_grad_sup", number_or_null(r.theta_grad_sup)},
          {"phi_grad_sup", number_or_null(r.phi_grad_sup)},
          {"hessian",
           {{"min_eigenvalue", number_or_null(r.min_eigenvalue)},
            {"max_abs_eigenvalue", number_or_null(r.max_abs_eigenvalue)},
            {"n_negative", r.n_negative},
            {"n_zero", r.n_zero},
            {"zero_band", number_or_null(r.zero_band)}}},
          {"max_kernel_residual", number_or_null(r.max_kernel_residual)},
          {"sandwich_difference", number_or_null(r.sandwich_difference)},
          {"marginally_stable", r.marginally_stable}};
}

FixedPointReport fixed_point_report_from_json(const json& doc) {
  FixedPointReport r;
  const auto kind = field<std::string>(doc, "classification");
  if (kind == "data_consistent") {
    r.classification = FixedPointKind::data_consistent;
  } else if (kind == "spurious") {
    r.classification = FixedPointKind::spurious;
  } else if (kind == "not_stationary") {
    r.classification = FixedPointKind::not_stationary;
  } else {
    throw ConfigError("unknown classification '" + kind + "'");
  }
  r.theta_grad_sup = number_from(doc.at("theta_grad_sup"));
  r.phi_grad_sup = number_from(doc.at("phi_grad_sup"));
  const auto& h = doc.at("hessian");
  r.min_eigenvalue = number_from(h.at("min_eigenvalue"));
  r.max_abs_eigenvalue = number_from(h.at("max_abs_eigenvalue"));
  r.n_negative = h.at("n_negative").get<int>();
  r.n_zero = h.at("n_zero").get<int>();
  r.zero_band = number_from(h.at("zero_band"));
  r.max_kernel_residual = number_from(doc.at("max_kernel_residual"));
  r.sandwich_difference = number_from(doc.at("sandwich_difference"));
  r.marginally_stable = doc.at("marginally_stable").get<bool>();
  return r;
}

json to_json(const DsbReport& r) {
  json orders = json::array();
  for (const auto& t : r.orders) {
    orders.push_back({{"order", t.order},
                      {"final_norm", number_or_null(t.final_norm)},
                      {"peak_norm", number_or_null(t.peak_norm)},
                      {"overshoot", number_or_null(t.overshoot)},
                      {"above_floor", t.above_floor},
                      {"reached", t.reached},
                      {"step", t.step},
                      {"time", number_or_null(t.time)}});
  }
  return {{"reference", r.reference == DsbReference::final_value ? "final" : "peak"},
          {"fraction", r.fraction},
          {"floor", r.floor},
          {"orders", orders},
          {"ordered", r.ordered},
          {"strictly_ordered", r.strictly_ordered}};
}

DsbReport dsb_report_from_json(const json& doc) {
  DsbReport r;
  const auto ref = field<std::string>(doc, "reference");
  if (ref != "final" && ref != "peak") throw ConfigError("unknown reference '" + ref + "'");
  r.reference = ref == "final" ? DsbReference::final_value : DsbReference::peak_value;
  r.fraction = field<double>(doc, "fraction");
  r.floor = field<double>(doc, "floor");
  for (const auto& o : doc.at("orders")) {
    OrderTiming t;
    t.order = o.at("order").get<int>();
    t.final_norm = number_from(o.at("final_norm"));
    t.peak_norm = number_from(o.at("peak_norm"));
    t.overshoot = number_from(o.at("overshoot"));
    t.above_floor = o.at("above_floor").get<bool>();
    t.reached = o.at("reached").get<bool>();
    t.step = o.at("step").get<long>();
    t.time = number_from(o.at("time"));
    r.orders.push_back(t);
  }
  r.ordered = field<bool>(doc, "ordered");
  r.strictly_ordered = field<bool>(doc, "strictly_ordered");
  return r;
}

}  // namespace ebm::io
