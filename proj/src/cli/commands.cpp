#include "ebm/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "ebm/checks.hpp"
#include "ebm/data.hpp"
#include "ebm/dynamics.hpp"
#include "ebm/error.hpp"
#include "ebm/io.hpp"
#include "ebm/kernels.hpp"

namespace ebm::cli {

namespace {

using io::json;
namespace fs = std::filesystem;

// Every accepted key with its default. Unknown keys in a config file are an
// error, so a typo never silently falls back to a default.
json default_config() {
  return json::parse(R"({
    "output": "out",
    "isa": "auto",
    "enum_limit": 20,
    "data": {"source": "samples", "path": ""},
    "dataset": {
      "generator": "three_body_chain", "n_sites": 12, "beta": 0.5, "n_samples": 10000, "seed": 0,
      "order": 3, "density": 0.1, "scale": 0.5, "magnetizations": [],
      "mcmc": {"burn_in": 200, "spacing": 4, "n_chains": 16}
    },
    "model": {"kind": "rbm", "n_hidden": 64, "convention": "spin", "weight_variance": 1e-4, "seed": 0,
              "max_order": -1, "checkpoint": ""},
    "optimizer": {"method": "flow", "gradient": "exact", "step": 0.01, "n_steps": 1000, "log_every": 10,
                  "batch_size": 0, "tolerance": 1e-8, "seed": 0},
    "sampler": {"n_chains": 64, "n_sweeps": 50, "temperatures": [1.0], "seed": 0},
    "ridge": {"enabled": false, "lambda": 1e-4, "estimator": "exact", "n_samples": 0, "seed": 0,
              "space": "effective"},
    "tracking": {"max_order": 3, "fraction": 0.5, "floor": 1e-3, "reference": "final", "trajectory": ""},
    "extract": {"max_order": 3, "mode": "exact", "n_samples": 100000, "seed": 0, "format": "json"},
    "analyze": {"tol": 1e-6},
    "check": {"seed": 0}
  })");
}

void reject_unknown(const json& given, const json& known, const std::string& prefix) {
  for (const auto& [key, value] : given.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (!known.contains(key)) throw ConfigError("unknown config key '" + name + "'");
    if (value.is_object() && known.at(key).is_object()) reject_unknown(value, known.at(key), name);
  }
}

json::json_pointer pointer(const std::string& dotted) {
  std::string p;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) p += "/" + part;
  return json::json_pointer(p);
}

// Typed reads that name the offending key on failure.
class Config {
 public:
  explicit Config(json doc) : doc_(std::move(doc)) {}
  const json& doc() const { return doc_; }

  const json& at(const std::string& key) const {
    const auto ptr = pointer(key);
    if (!doc_.contains(ptr)) throw ConfigError("config key '" + key + "' is missing");
    return doc_.at(ptr);
  }
  long integer(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
    return v.get<long>();
  }
  int small_int(const std::string& key) const {
    const long v = integer(key);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw ConfigError("config key '" + key + "' is out of range");
    }
    return static_cast<int>(v);
  }
  std::uint64_t seed(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_unsigned()) throw ConfigError("config key '" + key + "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  double number(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
  }
  bool flag(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError("config key '" + key + "' must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  std::string choice(const std::string& key, std::initializer_list<const char*> allowed) const {
    const std::string v = text(key);
    std::string list;
    for (const char* a : allowed) {
      if (v == a) return v;
      list += list.empty() ? a : std::string(", ") + a;
    }
    throw ConfigError("config key '" + key + "' must be one of: " + list);
  }

  fs::path output() const { return fs::path(text("output")); }
  fs::path path_or(const std::string& key, const std::string& fallback) const {
    const std::string p = text(key);
    return p.empty() ? output() / fallback : fs::path(p);
  }

 private:
  json doc_;
};

// Run the rest of a subcommand, mapping library errors to exit codes.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    fn();
    return kOk;
  } catch (const LimitError& e) {
    err << "error: " << e.what() << '\n';
    return kLimitError;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumericError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

// --- config sections ---------------------------------------------------------

DatasetConfig dataset_config(const Config& c) {
  DatasetConfig d;
  d.generator = parse_generator(c.text("dataset.generator"));
  d.n_sites = c.small_int("dataset.n_sites");
  d.beta = c.number("dataset.beta");
  d.n_samples = c.integer("dataset.n_samples");
  d.seed = c.seed("dataset.seed");
  d.order = c.small_int("dataset.order");
  d.density = c.number("dataset.density");
  d.scale = c.number("dataset.scale");
  d.magnetizations = c.numbers("dataset.magnetizations");
  d.mcmc.burn_in = c.integer("dataset.mcmc.burn_in");
  d.mcmc.spacing = c.integer("dataset.mcmc.spacing");
  d.mcmc.n_chains = c.small_int("dataset.mcmc.n_chains");
  d.validate();
  return d;
}

RidgeConfig ridge_config(const Config& c) {
  RidgeConfig r;
  r.lambda = c.number("ridge.lambda");
  r.estimator = c.choice("ridge.estimator", {"exact", "stochastic"}) == "exact" ? RidgeConfig::Estimator::exact
                                                                                 : RidgeConfig::Estimator::stochastic;
  r.n_samples = c.integer("ridge.n_samples");
  r.seed = c.seed("ridge.seed");
  r.space = c.choice("ridge.space", {"effective", "parameter"}) == "effective" ? RidgeConfig::Space::effective
                                                                              : RidgeConfig::Space::parameter;
  try {
    r.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("ridge: ") + e.what());
  }
  return r;
}

TrainConfig train_config(const Config& c) {
  TrainConfig t;
  t.gradient = c.choice("optimizer.gradient", {"exact", "sampled"}) == "exact" ? TrainConfig::Gradient::exact
                                                                                : TrainConfig::Gradient::sampled;
  t.step = c.number("optimizer.step");
  t.n_steps = c.integer("optimizer.n_steps");
  t.log_every = c.integer("optimizer.log_every");
  t.batch_size = c.integer("optimizer.batch_size");
  t.seed = c.seed("optimizer.seed");
  t.track_order = c.small_int("tracking.max_order");
  t.use_ridge = c.flag("ridge.enabled");
  t.ridge = ridge_config(c);
  t.sampler.n_chains = c.small_int("sampler.n_chains");
  t.sampler.n_sweeps = c.small_int("sampler.n_sweeps");
  t.sampler.temperatures = c.numbers("sampler.temperatures");
  t.sampler.seed = c.seed("sampler.seed");
  try {
    t.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("optimizer: ") + e.what());
  }
  return t;
}

DsbReference dsb_reference(const Config& c) {
  return c.choice("tracking.reference", {"final", "peak"}) == "final" ? DsbReference::final_value
                                                                       : DsbReference::peak_value;
}

// Training data: the stored sample file, or the exact table of the generator.
Distribution load_data(const Config& c) {
  if (c.choice("data.source", {"samples", "exact"}) == "exact") {
    return model_distribution(ground_truth(dataset_config(c)));
  }
  const fs::path path = c.path_or("data.path", "dataset.txt");
  if (!fs::exists(path)) {
    throw ConfigError("dataset '" + path.string() + "' not found (run `generate` first or set data.path)");
  }
  return io::read_dataset(path);
}

struct Checkpoint {
  std::optional<RbmParameters> rbm;
  std::optional<HigherOrderModel> hobm;
};

Checkpoint load_checkpoint(const fs::path& path) {
  const json doc = io::read_json(path);
  if (!doc.is_object() || !doc.contains("kind")) throw ConfigError("checkpoint '" + path.string() + "' has no 'kind'");
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "rbm") return {io::rbm_from_json(doc), std::nullopt};
  if (kind == "hobm") return {std::nullopt, io::hobm_from_json(doc)};
  throw ConfigError("checkpoint kind '" + kind + "' is neither rbm nor hobm");
}

void echo_config(const Config& c, const std::string& command) {
  io::write_json(c.output() / (command + ".config.json"), c.doc());
}

void write_csv_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ostringstream ss;
  body(ss);
  io::write_text(path, ss.str());
}

// --- subcommands -------------------------------------------------------------

void cmd_generate(const Config& c, std::ostream& out) {
  const DatasetConfig d = dataset_config(c);
  const EmpiricalSamples samples = generate(d);
  const fs::path path = c.path_or("data.path", "dataset.txt");
  json sidecar = c.at("dataset");
  sidecar["sampler"] = d.n_sites <= enumeration_limit() ? "exact" : "mcmc";
  sidecar["encoding"] = "one configuration per line, spins -1/1 for sites 0..N-1";
  io::write_dataset(path, samples, sidecar);
  io::write_json(c.output() / "truth.json", io::hobm_to_json(ground_truth(d)));
  write_csv_file(c.output() / "covariance.csv", [&](std::ostream& os) {
    io::write_matrix_csv(os, covariance_matrix(samples), "empirical covariance <s_i s_j> - <s_i><s_j>");
  });
  echo_config(c, "generate");
  out << "wrote " << samples.size() << " samples of " << d.n_sites << " sites to " << path.string() << '\n';
}

void cmd_train(const Config& c, std::ostream& out) {
  const Distribution data = load_data(c);
  const TrainConfig t = train_config(c);
  const std::string kind = c.choice("model.kind", {"rbm", "hobm"});
  TrainingTrajectory trajectory;
  json checkpoint;
  if (kind == "rbm") {
    RbmInitConfig ic;
    ic.n_visible = data.n_sites();
    ic.n_hidden = c.small_int("model.n_hidden");
    ic.convention = io::parse_convention(c.text("model.convention"));
    ic.weight_variance = c.number("model.weight_variance");
    ic.seed = c.seed("model.seed");
    auto r = train(init(ic), data, t);
    trajectory = std::move(r.trajectory);
    checkpoint = io::rbm_to_json(r.params);
    checkpoint["kind"] = "rbm";
  } else {
    const int order = c.small_int("model.max_order");
    const int n = data.n_sites();
    const HigherOrderModel start =
        (order < 0 || order >= n) ? HigherOrderModel::zeros(n) : HigherOrderModel::zeros_truncated(n, order);
    if (c.choice("optimizer.method", {"flow", "convex"}) == "convex") {
      OptimizerConfig oc;
      oc.mode = OptimizerConfig::Mode::backtracking;
      oc.max_iters = t.n_steps;
      oc.tolerance = c.number("optimizer.tolerance");
      oc.max_order = order;
      oc.ridge_lambda = t.use_ridge ? t.ridge.lambda : 0.0;
      oc.log_every = t.log_every;
      oc.track_order = t.track_order;
      FitResult r = fit(data, oc, start);
      trajectory = std::move(r.trajectory);
      checkpoint = io::hobm_to_json(r.model);
      out << (r.converged ? "converged" : "not converged") << " after " << r.iterations
          << " iterations, stationarity residual " << r.final_mismatch << '\n';
    } else {
      auto r = train(start, data, t);
      trajectory = std::move(r.trajectory);
      checkpoint = io::hobm_to_json(r.model);
    }
    checkpoint["kind"] = "hobm";
  }
  const fs::path dir = c.output();
  io::write_json(dir / "checkpoint.json", checkpoint);
  write_csv_file(dir / "trajectory.csv", [&](std::ostream& os) { trajectory.write_csv(os); });
  const DsbReport report =
      dsb_report(trajectory, c.number("tracking.fraction"), c.number("tracking.floor"), dsb_reference(c));
  io::write_json(dir / "dsb_report.json", io::to_json(report));
  echo_config(c, "train");
  const auto& last = trajectory.back();
  out << "trained " << kind << " for " << last.step << " steps, final log-likelihood " << last.loglik << ", "
      << (report.strictly_ordered ? "orders learned in sequence" : "orders not strictly sequential") << '\n';
}

void cmd_extract(const Config& c, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(c.path_or("model.checkpoint", "checkpoint.json"));
  const int max_order = c.small_int("extract.max_order");
  const std::string mode = c.choice("extract.mode", {"exact", "monte_carlo"});
  const std::string format = c.choice("extract.format", {"json", "csv"});
  const int n = ck.rbm ? ck.rbm->n_visible() : ck.hobm->n_sites();
  if (max_order < 1 || max_order > n) throw ConfigError("config key 'extract.max_order' must be in [1, n_sites]");

  SubsetVector couplings;
  json std_errors = nullptr;
  if (ck.hobm) {
    couplings = ck.hobm->couplings().truncated_to(max_order);
  } else if (mode == "exact") {
    if (n > enumeration_limit()) {
      throw LimitError("exact extraction needs 2^" + std::to_string(n) +
                       " configurations, beyond the enumeration limit; use extract.mode = monte_carlo");
    }
    couplings = extract_couplings_exact(*ck.rbm).truncated_to(max_order);
  } else {
    const auto est = estimate_couplings_formula(
        *ck.rbm, max_order, FormulaMode::monte_carlo(c.integer("extract.n_samples"), c.seed("extract.seed")));
    std::vector<SubsetVector::Entry> values, errors;
    for (const auto& [m, e] : est) {
      values.emplace_back(m, e.value);
      errors.emplace_back(m, e.std_error);
    }
    couplings = SubsetVector(n, max_order, std::move(values));
    std_errors = io::subset_vector_to_json(SubsetVector(n, max_order, std::move(errors)));
  }

  const fs::path path = c.output() / ("couplings." + format);
  if (format == "json") {
    json doc = io::subset_vector_to_json(couplings);
    if (!std_errors.is_null()) doc["std_errors"] = std_errors["entries"];
    io::write_json(path, doc);
  } else {
    write_csv_file(path, [&](std::ostream& os) { io::write_subset_csv(os, couplings); });
  }
  echo_config(c, "extract");
  out << "wrote couplings up to order " << max_order << " to " << path.string() << '\n';
  for (int k = 1; k <= max_order; ++k) out << "  order " << k << " norm " << couplings.norm_at_order(k) << '\n';
}

void cmd_analyze(const Config& c, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(c.path_or("model.checkpoint", "checkpoint.json"));
  const Distribution data = load_data(c);
  const double tol = c.number("analyze.tol");
  const FixedPointReport r =
      ck.rbm ? classify_fixed_point(*ck.rbm, data, tol) : classify_fixed_point(*ck.hobm, data, tol);
  io::write_json(c.output() / "fixed_point.json", io::to_json(r));
  echo_config(c, "analyze");
  out << "classification: " << to_string(r.classification) << '\n';
}

void cmd_track(const Config& c, std::ostream& out) {
  const fs::path path = c.path_or("tracking.trajectory", "trajectory.csv");
  std::ifstream in(path);
  if (!in) throw ConfigError("trajectory '" + path.string() + "' not found");
  const TrainingTrajectory traj = TrainingTrajectory::read_csv(in);
  const DsbReport report = dsb_report(traj, c.number("tracking.fraction"), c.number("tracking.floor"), dsb_reference(c));
  const json doc = io::to_json(report);
  io::write_json(c.output() / "dsb_report.json", doc);
  echo_config(c, "track");
  out << doc.dump(2) << '\n';
}

bool cmd_check(const Config& c, std::ostream& out) {
  bool all = true;
  for (const auto& r : run_invariant_checks(c.seed("check.seed"))) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    all = all && r.passed;
  }
  return all;
}

// --- flag plumbing -----------------------------------------------------------

struct Override {
  std::string flag;
  std::string key;
  std::string help;
};

const std::map<std::string, std::vector<Override>>& command_flags() {
  static const std::map<std::string, std::vector<Override>> flags = {
      {"generate",
       {{"--generator", "dataset.generator", "three_body_chain | pairwise_random | sparse_random | product"},
        {"--n-sites", "dataset.n_sites", "number of spins"},
        {"--beta", "dataset.beta", "three-body coupling strength"},
        {"--n-samples", "dataset.n_samples", "number of configurations"},
        {"--seed", "dataset.seed", "generator and sampling seed"},
        {"--dataset", "data.path", "dataset file (default <output>/dataset.txt)"}}},
      {"train",
       {{"--model", "model.kind", "rbm | hobm"},
        {"--n-hidden", "model.n_hidden", "hidden units"},
        {"--convention", "model.convention", "spin | binary"},
        {"--seed", "model.seed", "initialisation seed"},
        {"--method", "optimizer.method", "flow | convex (convex: hobm only)"},
        {"--gradient", "optimizer.gradient", "exact | sampled"},
        {"--step", "optimizer.step", "step size"},
        {"--n-steps", "optimizer.n_steps", "number of steps"},
        {"--log-every", "optimizer.log_every", "logging interval in steps"},
        {"--ridge-lambda", "ridge.lambda", "ridge coefficient"},
        {"--ridge-estimator", "ridge.estimator", "exact | stochastic"},
        {"--ridge-space", "ridge.space", "effective | parameter"},
        {"--track-order", "tracking.max_order", "highest tracked coupling order"},
        {"--data-source", "data.source", "samples | exact"},
        {"--dataset", "data.path", "dataset file (default <output>/dataset.txt)"}}},
      {"extract",
       {{"--checkpoint", "model.checkpoint", "checkpoint file (default <output>/checkpoint.json)"},
        {"--max-order", "extract.max_order", "highest coupling order"},
        {"--mode", "extract.mode", "exact | monte_carlo"},
        {"--n-samples", "extract.n_samples", "Monte Carlo samples per coupling"},
        {"--seed", "extract.seed", "Monte Carlo seed"},
        {"--format", "extract.format", "json | csv"}}},
      {"analyze",
       {{"--checkpoint", "model.checkpoint", "checkpoint file (default <output>/checkpoint.json)"},
        {"--tol", "analyze.tol", "stationarity tolerance"},
        {"--data-source", "data.source", "samples | exact"},
        {"--dataset", "data.path", "dataset file (default <output>/dataset.txt)"}}},
      {"track",
       {{"--trajectory", "tracking.trajectory", "trajectory CSV (default <output>/trajectory.csv)"},
        {"--fraction", "tracking.fraction", "threshold fraction of the reference norm"},
        {"--floor", "tracking.floor", "orders whose final norm is below this are ignored"},
        {"--reference", "tracking.reference", "final | peak"}}},
      {"check", {{"--seed", "check.seed", "seed of the randomized checks"}}},
  };
  return flags;
}

// Flag text to a JSON value: numbers, booleans and JSON literals parse as
// such, anything else is a string.
json flag_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

void set_key(json& doc, const std::string& key, const json& value) {
  const auto ptr = pointer(key);
  if (!default_config().contains(ptr)) throw ConfigError("unknown config key '" + key + "'");
  doc[ptr] = value;
}

const char* kCommandHelp[][2] = {
    {"generate", "sample a synthetic dataset and write it with its sidecar, ground truth and covariance"},
    {"train", "train an RBM or a higher-order model; writes checkpoint, trajectory and order-timing report"},
    {"extract", "effective couplings of a checkpoint up to a given order"},
    {"analyze", "classify a checkpoint as a fixed point and check its stability"},
    {"track", "order-timing report of an existing trajectory"},
    {"check", "fast randomized invariant checks"},
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app("Energy-based models over spins: training, effective couplings and learning-dynamics diagnostics",
               "ebmtool");
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::string> output, isa, enum_limit;
  std::vector<std::string> sets;
  app.add_option("-c,--config", config_path, "JSON config file; flags override its keys");
  app.add_option("-o,--output", output, "output directory (config key 'output')");
  app.add_option("--isa", isa, "kernel variant: scalar | avx2 | auto");
  app.add_option("--enum-limit", enum_limit, "largest N for exact enumeration");
  app.add_option("--set", sets, "override any config key, e.g. --set optimizer.step=0.05");

  std::map<std::string, std::map<std::string, std::optional<std::string>>> values;
  for (const auto& [name, help] : kCommandHelp) {
    CLI::App* sub = app.add_subcommand(name, help);
    for (const auto& o : command_flags().at(name)) {
      sub->add_option(o.flag, values[name][o.flag], o.help + " [" + o.key + "]");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  std::optional<Config> cfg;
  const int status = guarded(err, [&] {
    json doc = default_config();
    if (!config_path.empty()) {
      const json given = io::read_json(config_path);
      if (!given.is_object()) throw ConfigError("config file must hold a JSON object");
      reject_unknown(given, doc, "");
      doc.merge_patch(given);
    }
    if (output) set_key(doc, "output", *output);
    if (isa) set_key(doc, "isa", *isa);
    if (enum_limit) set_key(doc, "enum_limit", flag_value(*enum_limit));
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      set_key(doc, s.substr(0, eq), flag_value(s.substr(eq + 1)));
    }
    for (const auto& o : command_flags().at(command)) {
      if (const auto& v = values[command][o.flag]) set_key(doc, o.key, flag_value(*v));
    }
    cfg.emplace(std::move(doc));
    const std::string isa_name = cfg->choice("isa", {"scalar", "avx2", "auto"});
    const auto want = kernels::parse_isa(isa_name);
    if (!kernels::isa_supported(want)) throw ConfigError("config key 'isa': " + isa_name + " is not supported here");
    kernels::set_active_isa(want);
    const long limit = cfg->integer("enum_limit");
    if (limit < 1 || limit > 30) throw ConfigError("config key 'enum_limit' must be in [1, 30]");
    set_enumeration_limit(static_cast<int>(limit));
  });
  if (status != kOk) return status;

  bool checks_passed = true;
  const int rc = guarded(err, [&] {
    if (command == "generate") cmd_generate(*cfg, out);
    if (command == "train") cmd_train(*cfg, out);
    if (command == "extract") cmd_extract(*cfg, out);
    if (command == "analyze") cmd_analyze(*cfg, out);
    if (command == "track") cmd_track(*cfg, out);
    if (command == "check") checks_passed = cmd_check(*cfg, out);
  });
  if (rc != kOk) return rc;
  return checks_passed ? kOk : kNumericError;
}

}  // namespace ebm::cli
