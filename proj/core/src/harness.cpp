#include "selfnorm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "selfnorm/csv.hpp"
#include "selfnorm/error.hpp"
#include "selfnorm/gram.hpp"
#include "selfnorm/parallel.hpp"
#include "selfnorm/rng.hpp"
#include "selfnorm/tracker.hpp"

namespace selfnorm {

namespace {

using nlohmann::json;

constexpr RadiusMethod kAllMethods[] = {RadiusMethod::FixedBernstein, RadiusMethod::FixedBennett,
                                        RadiusMethod::MixedBennett, RadiusMethod::EmpiricalMixedBennett,
                                        RadiusMethod::SubGaussianBaseline};

// ---------------------------------------------------------------- config io

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
void read_field(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::size_t read_count(const json& j, const char* key, std::size_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(where + "." + key + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

NoiseModel parse_noise(const json& j, const std::string& where) {
  check_keys(j, {"family", "beta_a"}, where);
  NoiseModel noise;
  std::string family = to_string(noise.family);
  read_field(j, "family", family, where);
  noise.family = noise_family_from_string(family);
  read_field(j, "beta_a", noise.beta_a, where);
  return noise;
}

json noise_json(const NoiseModel& noise) {
  json j = {{"family", to_string(noise.family)}};
  if (noise.family == NoiseFamily::RescaledBeta) j["beta_a"] = noise.beta_a;
  return j;
}

std::vector<std::size_t> default_checkpoints(Experiment e) {
  if (e == Experiment::Supermartingale) return {10, 100, 200};
  return {10, 50, 100, 200, 500};
}

// ---------------------------------------------------------------- helpers

struct Stats {
  double mean = 0.0;
  double se = 0.0;
};

Stats mean_and_se(const std::vector<double>& xs) {
  Stats st;
  if (xs.empty()) return st;
  const double n = static_cast<double>(xs.size());
  st.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - st.mean) * (x - st.mean);
    st.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return st;
}

double binomial_se(double p, std::size_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

double median(std::vector<double> xs) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const std::size_t mid = xs.size() / 2;
  return xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

void sample_covariate(const KernelSpec& kernel, Rng& rng, std::vector<double>& x) {
  x.resize(kernel.input_dim);
  if (kernel.family == KernelFamily::Rbf) {
    for (double& v : x) v = rng.uniform();
    return;
  }
  // Linear kernel: uniform on the unit sphere so that k(x, x) = 1.
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (double& v : x) {
      v = rng.normal();
      norm_sq += v * v;
    }
  } while (norm_sq == 0.0);
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& v : x) v *= inv;
}

std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path path(dir);
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return path;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  return out;
}

// Path of one noise stream: s_t, sum |G_i|^2, log-determinant and sum eps^2 after each step.
struct StreamPath {
  std::vector<double> s;
  std::vector<double> g_sum;
  std::vector<double> logdet;
  std::vector<double> eps_sq_sum;
};

template <class Tracker>
StreamPath simulate_stream(Tracker tracker, const KernelSpec& kernel, const NoiseModel& noise, double sigma_sq,
                           std::size_t T, Rng& rng) {
  StreamPath path;
  path.s.reserve(T);
  path.g_sum.reserve(T);
  path.logdet.reserve(T);
  path.eps_sq_sum.reserve(T);
  std::vector<double> x;
  double eps_sq = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    sample_covariate(kernel, rng, x);
    const double eps = noise.sample(rng);
    tracker.step(x, eps, sigma_sq);
    eps_sq += eps * eps;
    path.s.push_back(tracker.self_norm_stat());
    path.g_sum.push_back(tracker.g_norm_sq_sum());
    path.logdet.push_back(tracker.logdet_ratio());
    path.eps_sq_sum.push_back(eps_sq);
  }
  return path;
}

StreamPath simulate_stream(const ExperimentConfig& cfg, std::size_t T, Rng& rng) {
  if (cfg.kernel.family == KernelFamily::Linear) {
    return simulate_stream(LinearTracker(FeatureGram(cfg.kernel.input_dim, cfg.radius.rho)), cfg.kernel, cfg.noise,
                           cfg.radius.sigma_sq, T, rng);
  }
  return simulate_stream(KernelTracker(GramState(cfg.kernel, cfg.radius.rho)), cfg.kernel, cfg.noise,
                         cfg.radius.sigma_sq, T, rng);
}

// Inputs at step index i (0-based) of a noise stream. The variance sequence
// sees eps_i^2 directly, which lies in [0, B^2].
RadiusInputs stream_inputs(const StreamPath& path, std::size_t i, double fixed_c_sq, const RadiusConfig& rc) {
  RadiusInputs in;
  in.g_norm_sq_sum = path.g_sum[i];
  in.logdet_ratio = path.logdet[i];
  in.fixed_c_sq = fixed_c_sq;
  if (rc.method == RadiusMethod::EmpiricalMixedBennett) {
    in.sigma_sq_ucb = variance_ucb(path.eps_sq_sum[i], i + 1, rc.B, rc.delta_split->first, rc.B);
  }
  return in;
}

bool is_fixed(RadiusMethod m) { return m == RadiusMethod::FixedBernstein || m == RadiusMethod::FixedBennett; }

bool stream_violates(const StreamPath& path, const RadiusConfig& rc, double fixed_c_sq) {
  if (path.s.empty()) return false;
  if (is_fixed(rc.method)) {
    const double J = confidence_radius(stream_inputs(path, 0, fixed_c_sq, rc), rc);
    return *std::max_element(path.s.begin(), path.s.end()) > J;
  }
  for (std::size_t i = 0; i < path.s.size(); ++i) {
    if (exceeds_radius(path.s[i], stream_inputs(path, i, fixed_c_sq, rc), rc)) return true;
  }
  return false;
}

// ---------------------------------------------------------------- report json

json coverage_json(const CoverageReport& r) {
  json methods = json::array();
  for (const auto& m : r.methods) {
    methods.push_back({{"method", to_string(m.method)},
                       {"violations", m.violations},
                       {"rate", m.rate},
                       {"se", m.se},
                       {"threshold", m.threshold},
                       {"passed", m.passed}});
  }
  return {{"replicas", r.replicas}, {"T", r.horizon},     {"delta", r.delta},
          {"noise", r.noise},       {"methods", methods}, {"passed", r.passed}};
}

json widths_json(const WidthReport& r) {
  return {{"rows", r.rows.size()},
          {"bennett_below_bernstein", r.bennett_below_bernstein},
          {"monotone_in_delta", r.monotone_in_delta},
          {"subgaussian_below_mixed_at_end", r.subgaussian_below_mixed_at_end},
          {"passed", r.passed}};
}

json supermartingale_json(const SupermartingaleReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"form", row.form},
                    {"lambda", row.lambda},
                    {"t", row.t},
                    {"mean", row.mean},
                    {"se", row.se},
                    {"passed", row.passed}});
  }
  json ville = json::array();
  for (const auto& v : r.ville) {
    ville.push_back({{"form", v.form},
                     {"lambda", v.lambda},
                     {"replicas", v.replicas},
                     {"crossings", v.crossings},
                     {"rate", v.rate},
                     {"se", v.se},
                     {"passed", v.passed}});
  }
  return {{"means", rows}, {"ville", ville}, {"passed", r.passed}};
}

json onedim_json(const OnedimReport& r) {
  json variation = json::object();
  for (const auto& [method, v] : r.ratio_variation) variation[to_string(method)] = v;
  return {{"max_harmonic_error", r.max_harmonic_error},
          {"ratio_variation", variation},
          {"classical_variation", r.classical_variation},
          {"passed", r.passed}};
}

json bandit_json(const BanditReport& r) {
  json medians = json::object();
  for (const auto& [scenario, per_method] : r.median_regret) {
    for (const auto& [method, value] : per_method) medians[scenario][to_string(method)] = value;
  }
  json orderings = json::array();
  for (const auto& o : r.orderings) {
    orderings.push_back({{"scenario", o.scenario},
                         {"better", to_string(o.better)},
                         {"worse", to_string(o.worse)},
                         {"better_median", o.better_median},
                         {"worse_median", o.worse_median},
                         {"passed", o.passed}});
  }
  std::size_t aborted = 0;
  for (const auto& run : r.runs) aborted += run.aborted ? 1 : 0;
  return {{"runs", r.runs.size()},
          {"aborted", aborted},
          {"median_regret", medians},
          {"orderings", orderings},
          {"passed", r.passed}};
}

}  // namespace

// ---------------------------------------------------------------- config

std::string to_string(Experiment experiment) {
  switch (experiment) {
    case Experiment::Coverage:
      return "coverage";
    case Experiment::Widths:
      return "widths";
    case Experiment::Supermartingale:
      return "supermartingale";
    case Experiment::Bandit:
      return "bandit";
    case Experiment::OnedimDiagnostic:
      return "onedim-diagnostic";
  }
  return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
  for (Experiment e : {Experiment::Coverage, Experiment::Widths, Experiment::Supermartingale, Experiment::Bandit,
                       Experiment::OnedimDiagnostic}) {
    if (name == to_string(e)) return e;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

ExperimentConfig::ExperimentConfig() {
  radius.delta = 0.1;
  radius.rho = 0.05;
  radius.theta = 1.0;
  radius.B = 1.0;
  radius.delta_split = std::make_pair(0.05, 0.05);
}

RadiusConfig radius_for(const RadiusConfig& base, RadiusMethod method) {
  RadiusConfig rc = base;
  rc.method = method;
  if (!rc.delta_split) rc.delta_split = std::make_pair(0.5 * rc.delta, 0.5 * rc.delta);
  return rc;
}

ExperimentConfig ExperimentConfig::resolved() const {
  ExperimentConfig r = *this;
  if (r.sigma_sq_from_noise) {
    const double v = r.noise.variance();
    r.radius.sigma_sq = v > 0.0 ? v : r.zero_noise_sigma_sq;
  }
  if (!r.radius.delta_split) r.radius.delta_split = std::make_pair(0.5 * r.radius.delta, 0.5 * r.radius.delta);
  if (r.methods.empty()) r.methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
  if (r.lambdas.empty()) r.lambdas = {0.1 / r.radius.B, 0.5 / r.radius.B};
  if (r.deltas.empty()) r.deltas = {0.01, 0.05, 0.1};
  if (r.horizons.empty()) r.horizons = {100, 1000, 10000};
  if (r.scenarios.empty()) {
    r.scenarios = {{NoiseFamily::RescaledUniform, 5.0},
                   {NoiseFamily::RescaledBeta, 5.0},
                   {NoiseFamily::RescaledBeta, 20.0},
                   {NoiseFamily::RescaledBeta, 50.0}};
  }
  if (r.experiment == Experiment::Widths || r.experiment == Experiment::Supermartingale) {
    if (r.checkpoints.empty()) r.checkpoints = default_checkpoints(r.experiment);
    std::sort(r.checkpoints.begin(), r.checkpoints.end());
    r.checkpoints.erase(std::unique(r.checkpoints.begin(), r.checkpoints.end()), r.checkpoints.end());
    r.horizon = r.checkpoints.back();
  }
  if (r.experiment == Experiment::OnedimDiagnostic) {
    r.kernel = KernelSpec{KernelFamily::Linear, r.kernel.lengthscale, 1};
    std::sort(r.horizons.begin(), r.horizons.end());
    r.horizon = r.horizons.back();
  }
  if (r.ville_replicas == 0) r.ville_replicas = r.replicas;
  return r;
}

void ExperimentConfig::validate() const {
  if (replicas < 1) throw ConfigError("replicas must be >= 1");
  if (horizon < 1) throw ConfigError("T must be >= 1");
  if (!(zero_noise_sigma_sq > 0.0)) throw ConfigError("zero_noise_sigma_sq must be positive");
  try {
    radius.validate();
    kernel.validate();
    noise.validate();
    bandit.validate();
    for (const auto& s : scenarios) s.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  for (double l : lambdas) {
    if (!(l > 0.0)) throw ConfigError("lambdas must be positive");
  }
  for (double d : deltas) {
    if (!(d > 0.0 && d < 1.0)) throw ConfigError("deltas must lie in (0, 1)");
  }
  for (std::size_t c : checkpoints) {
    if (c == 0) throw ConfigError("checkpoints must be >= 1");
  }
  for (std::size_t h : horizons) {
    if (h < 2) throw ConfigError("horizons must be >= 2");
  }
  if (experiment == Experiment::Bandit && kernel.input_dim != 1) {
    throw ConfigError("bandit arms are one-dimensional; kernel.input_dim must be 1");
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j,
             {"experiment", "replicas", "T", "horizon", "seed", "radius", "kernel", "noise", "output_dir", "methods",
              "lambdas", "checkpoints", "deltas", "horizons", "scenarios", "bandit", "emit_rows", "row_replicas",
              "ville_replicas", "zero_noise_sigma_sq"},
             "config");
  ExperimentConfig cfg;
  std::string experiment = "coverage";
  read_field(j, "experiment", experiment, "config");
  cfg.experiment = experiment_from_string(experiment);
  cfg.replicas = read_count(j, "replicas", cfg.replicas, "config");
  cfg.horizon = read_count(j, "horizon", cfg.horizon, "config");
  cfg.horizon = read_count(j, "T", cfg.horizon, "config");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer()) throw ConfigError("config.seed must be an integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  read_field(j, "output_dir", cfg.output_dir, "config");
  read_field(j, "emit_rows", cfg.emit_rows, "config");
  cfg.row_replicas = read_count(j, "row_replicas", cfg.row_replicas, "config");
  cfg.ville_replicas = read_count(j, "ville_replicas", cfg.ville_replicas, "config");
  read_field(j, "zero_noise_sigma_sq", cfg.zero_noise_sigma_sq, "config");

  if (j.contains("radius")) {
    const json& r = j.at("radius");
    check_keys(r, {"delta", "rho", "B", "sigma_sq", "theta", "method", "delta1", "delta2", "subgaussian_scale"},
               "radius");
    read_field(r, "delta", cfg.radius.delta, "radius");
    read_field(r, "rho", cfg.radius.rho, "radius");
    read_field(r, "B", cfg.radius.B, "radius");
    read_field(r, "theta", cfg.radius.theta, "radius");
    if (r.contains("sigma_sq")) {
      read_field(r, "sigma_sq", cfg.radius.sigma_sq, "radius");
      cfg.sigma_sq_from_noise = false;
    }
    if (r.contains("subgaussian_scale")) {
      double scale = 0.0;
      read_field(r, "subgaussian_scale", scale, "radius");
      cfg.radius.subgaussian_scale = scale;
    }
    if (r.contains("method")) {
      std::string method;
      read_field(r, "method", method, "radius");
      cfg.radius.method = radius_method_from_string(method);
    }
    if (r.contains("delta1") || r.contains("delta2")) {
      double d1 = 0.5 * cfg.radius.delta;
      double d2 = 0.5 * cfg.radius.delta;
      read_field(r, "delta1", d1, "radius");
      read_field(r, "delta2", d2, "radius");
      cfg.radius.delta_split = std::make_pair(d1, d2);
    } else {
      cfg.radius.delta_split = std::make_pair(0.5 * cfg.radius.delta, 0.5 * cfg.radius.delta);
    }
  }
  if (j.contains("kernel")) {
    const json& k = j.at("kernel");
    check_keys(k, {"family", "lengthscale", "input_dim"}, "kernel");
    if (k.contains("family")) {
      std::string family;
      read_field(k, "family", family, "kernel");
      cfg.kernel.family = kernel_family_from_string(family);
    }
    read_field(k, "lengthscale", cfg.kernel.lengthscale, "kernel");
    cfg.kernel.input_dim = read_count(k, "input_dim", cfg.kernel.input_dim, "kernel");
  }
  if (j.contains("noise")) cfg.noise = parse_noise(j.at("noise"), "noise");
  if (j.contains("methods")) {
    std::vector<std::string> names;
    read_field(j, "methods", names, "config");
    for (const auto& n : names) cfg.methods.push_back(radius_method_from_string(n));
  }
  read_field(j, "lambdas", cfg.lambdas, "config");
  read_field(j, "checkpoints", cfg.checkpoints, "config");
  read_field(j, "deltas", cfg.deltas, "config");
  read_field(j, "horizons", cfg.horizons, "config");
  if (j.contains("scenarios")) {
    if (!j.at("scenarios").is_array()) throw ConfigError("config.scenarios must be an array");
    for (const auto& s : j.at("scenarios")) cfg.scenarios.push_back(parse_noise(s, "scenarios[]"));
  }
  if (j.contains("bandit")) {
    const json& b = j.at("bandit");
    check_keys(b, {"n_arms", "n_centers", "mode_low", "mode_high", "mode_sd", "mean_scale"}, "bandit");
    cfg.bandit.n_arms = read_count(b, "n_arms", cfg.bandit.n_arms, "bandit");
    cfg.bandit.n_centers = read_count(b, "n_centers", cfg.bandit.n_centers, "bandit");
    read_field(b, "mode_low", cfg.bandit.mode_low, "bandit");
    read_field(b, "mode_high", cfg.bandit.mode_high, "bandit");
    read_field(b, "mode_sd", cfg.bandit.mode_sd, "bandit");
    read_field(b, "mean_scale", cfg.bandit.mean_scale, "bandit");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  const ExperimentConfig r = cfg.resolved();
  json j;
  j["experiment"] = to_string(r.experiment);
  j["replicas"] = r.replicas;
  j["T"] = r.horizon;
  j["seed"] = r.seed;
  j["radius"] = {{"delta", r.radius.delta},   {"rho", r.radius.rho},
                 {"B", r.radius.B},           {"sigma_sq", r.radius.sigma_sq},
                 {"theta", r.radius.theta},   {"method", to_string(r.radius.method)},
                 {"delta1", r.radius.delta_split->first}, {"delta2", r.radius.delta_split->second},
                 {"subgaussian_scale", r.radius.baseline_scale()}};
  j["kernel"] = {{"family", to_string(r.kernel.family)},
                 {"lengthscale", r.kernel.lengthscale},
                 {"input_dim", r.kernel.input_dim}};
  j["noise"] = noise_json(r.noise);
  j["output_dir"] = r.output_dir;
  json methods = json::array();
  for (RadiusMethod m : r.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["lambdas"] = r.lambdas;
  j["checkpoints"] = r.checkpoints;
  j["deltas"] = r.deltas;
  j["horizons"] = r.horizons;
  json scenarios = json::array();
  for (const auto& s : r.scenarios) scenarios.push_back(noise_json(s));
  j["scenarios"] = scenarios;
  j["bandit"] = {{"n_arms", r.bandit.n_arms},     {"n_centers", r.bandit.n_centers}, {"mode_low", r.bandit.mode_low},
                 {"mode_high", r.bandit.mode_high}, {"mode_sd", r.bandit.mode_sd},     {"mean_scale", r.bandit.mean_scale}};
  j["emit_rows"] = r.emit_rows;
  j["row_replicas"] = r.row_replicas;
  j["ville_replicas"] = r.ville_replicas;
  j["zero_noise_sigma_sq"] = r.zero_noise_sigma_sq;
  return j.dump(2);
}

// ---------------------------------------------------------------- coverage

CoverageReport run_coverage(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = raw.resolved();
  cfg.validate();
  const std::size_t N = cfg.replicas;
  const std::size_t T = cfg.horizon;
  const std::size_t n_methods = cfg.methods.size();
  std::vector<RadiusConfig> rcs;
  for (RadiusMethod m : cfg.methods) rcs.push_back(radius_for(cfg.radius, m));

  const bool write_rows = cfg.emit_rows && !cfg.output_dir.empty();
  const std::size_t row_reps = write_rows ? std::min(N, cfg.row_replicas) : 0;
  std::vector<char> violated(N * n_methods, 0);
  std::vector<std::string> rows(row_reps);

  parallel_for(N, [&](std::size_t r) {
    Rng rng = Rng::for_stream(cfg.seed, r);
    const StreamPath path = simulate_stream(cfg, T, rng);
    // Covariates are independent of the noise, so sigma^2 * 2 ln det at T is a valid C^2.
    const double fixed_c_sq = cfg.radius.sigma_sq * 2.0 * path.logdet.back();
    for (std::size_t k = 0; k < n_methods; ++k) violated[r * n_methods + k] = stream_violates(path, rcs[k], fixed_c_sq);
    if (r < row_reps) {
      std::ostringstream out;
      for (std::size_t i = 0; i < T; ++i) {
        for (std::size_t k = 0; k < n_methods; ++k) {
          const RadiusInputs in = stream_inputs(path, i, fixed_c_sq, rcs[k]);
          const double J = confidence_radius(in, rcs[k]);
          const double nu = rcs[k].method == RadiusMethod::EmpiricalMixedBennett ||
                                    rcs[k].method == RadiusMethod::MixedBennett
                                ? mixture_nu(in, rcs[k])
                                : cfg.radius.sigma_sq * path.g_sum[i];
          out << r << ',' << i + 1 << ',' << to_string(rcs[k].method) << ',' << format_double(path.s[i]) << ','
              << format_double(J) << ',' << format_double(nu) << ',' << (path.s[i] > J ? 1 : 0) << '\n';
        }
      }
      rows[r] = out.str();
    }
  });

  CoverageReport report;
  report.replicas = N;
  report.horizon = T;
  report.delta = cfg.radius.delta;
  report.noise = cfg.noise.name();
  report.passed = true;
  for (std::size_t k = 0; k < n_methods; ++k) {
    CoverageMethodResult res;
    res.method = cfg.methods[k];
    for (std::size_t r = 0; r < N; ++r) res.violations += violated[r * n_methods + k] ? 1 : 0;
    res.rate = static_cast<double>(res.violations) / static_cast<double>(N);
    res.se = binomial_se(cfg.radius.delta, N);
    res.threshold = cfg.radius.delta + 3.0 * res.se;
    res.passed = res.rate <= res.threshold;
    report.passed = report.passed && res.passed;
    report.methods.push_back(res);
  }

  if (!cfg.output_dir.empty()) {
    const auto dir = prepare_dir(cfg.output_dir);
    {
      auto out = open_out(dir / "coverage_summary.csv");
      CsvWriter w(out, {"method", "noise", "replicas", "T", "delta", "violations", "rate", "se", "passed"});
      for (const auto& m : report.methods) {
        w.cell(to_string(m.method)).cell(report.noise).cell(static_cast<std::uint64_t>(N));
        w.cell(static_cast<std::uint64_t>(T)).cell(report.delta).cell(static_cast<std::uint64_t>(m.violations));
        w.cell(m.rate).cell(m.se).cell(m.passed ? 1 : 0);
        w.end_row();
      }
    }
    if (write_rows) {
      auto out = open_out(dir / "coverage.csv");
      out << "replica,t,method,s_t,radius,nu,violated\n";
      for (const auto& chunk : rows) out << chunk;
    }
  }
  return report;
}

// ---------------------------------------------------------------- widths

WidthReport run_widths(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = raw.resolved();
  cfg.validate();
  Rng rng = Rng::for_stream(cfg.seed, 0);
  const StreamPath path = simulate_stream(cfg, cfg.horizon, rng);
  const double fixed_c_sq = cfg.radius.sigma_sq * 2.0 * path.logdet.back();

  WidthReport report;
  std::vector<double> deltas = cfg.deltas;
  std::sort(deltas.begin(), deltas.end());
  for (std::size_t t : cfg.checkpoints) {
    const std::size_t i = t - 1;
    for (RadiusMethod m : cfg.methods) {
      for (double delta : deltas) {
        RadiusConfig rc = cfg.radius;
        rc.delta = delta;
        rc.delta_split.reset();
        rc = radius_for(rc, m);
        const RadiusInputs in = stream_inputs(path, i, fixed_c_sq, rc);
        WidthRow row;
        row.t = t;
        row.method = m;
        row.delta = delta;
        row.radius = confidence_radius(in, rc);
        row.nu = (m == RadiusMethod::MixedBennett || m == RadiusMethod::EmpiricalMixedBennett)
                     ? mixture_nu(in, rc)
                     : cfg.radius.sigma_sq * path.g_sum[i];
        row.logdet = path.logdet[i];
        report.rows.push_back(row);
      }
    }
  }

  auto find = [&](std::size_t t, RadiusMethod m, double delta) -> const WidthRow* {
    for (const auto& row : report.rows) {
      if (row.t == t && row.method == m && row.delta == delta) return &row;
    }
    return nullptr;
  };
  const auto has = [&](RadiusMethod m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };
  for (std::size_t t : cfg.checkpoints) {
    for (double delta : deltas) {
      if (has(RadiusMethod::FixedBennett) && has(RadiusMethod::FixedBernstein)) {
        const double ben = find(t, RadiusMethod::FixedBennett, delta)->radius;
        const double ber = find(t, RadiusMethod::FixedBernstein, delta)->radius;
        if (ben > ber * (1.0 + 1e-12)) report.bennett_below_bernstein = false;
      }
    }
    for (RadiusMethod m : cfg.methods) {
      for (std::size_t d = 1; d < deltas.size(); ++d) {
        if (find(t, m, deltas[d])->radius > find(t, m, deltas[d - 1])->radius * (1.0 + 1e-12)) {
          report.monotone_in_delta = false;
        }
      }
    }
  }
  if (has(RadiusMethod::SubGaussianBaseline) && has(RadiusMethod::MixedBennett)) {
    const std::size_t t = cfg.checkpoints.back();
    report.subgaussian_below_mixed_at_end = find(t, RadiusMethod::SubGaussianBaseline, deltas.back())->radius <
                                            find(t, RadiusMethod::MixedBennett, deltas.back())->radius;
  }
  report.passed = report.bennett_below_bernstein && report.monotone_in_delta;

  if (!cfg.output_dir.empty()) {
    const auto dir = prepare_dir(cfg.output_dir);
    auto out = open_out(dir / "widths.csv");
    CsvWriter w(out, {"t", "method", "delta", "radius", "nu", "logdet"});
    for (const auto& row : report.rows) {
      w.cell(static_cast<std::uint64_t>(row.t)).cell(to_string(row.method)).cell(row.delta);
      w.cell(row.radius).cell(row.nu).cell(row.logdet);
      w.end_row();
    }
  }
  return report;
}

// ---------------------------------------------------------------- supermartingale

SupermartingaleReport run_supermartingale(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = raw.resolved();
  cfg.validate();
  const double B = cfg.radius.B;
  const double sigma_sq = cfg.radius.sigma_sq;

  struct Combo {
    std::string form;
    double lambda;
    double psi;  // per unit |G|^2
  };
  std::vector<Combo> combos;
  for (double lambda : cfg.lambdas) {
    if (lambda * B < 1.0) combos.push_back({"bernstein", lambda, bernstein_mgf_bound(lambda, B, sigma_sq)});
    combos.push_back({"bennett", lambda, bennett_mgf_bound(lambda, B, sigma_sq)});
  }
  const std::size_t K = combos.size();
  const std::size_t C = cfg.checkpoints.size();
  const std::size_t N = cfg.replicas;
  const std::size_t T = cfg.horizon;
  const double ville_level = 1.0 / cfg.radius.delta;
  const std::size_t ville_n = std::min(cfg.ville_replicas, N);

  std::vector<double> values(N * K * C, 0.0);
  std::vector<char> crossed(N * K, 0);

  parallel_for(N, [&](std::size_t r) {
    Rng rng = Rng::for_stream(cfg.seed, r);
    const StreamPath path = simulate_stream(cfg, T, rng);
    for (std::size_t k = 0; k < K; ++k) {
      std::size_t c = 0;
      double prev_g = 0.0;
      double e_sum = 0.0;
      bool crossed_k = false;
      for (std::size_t i = 0; i < T; ++i) {
        e_sum += combos[k].psi * (path.g_sum[i] - prev_g);
        prev_g = path.g_sum[i];
        const double S = supermartingale_value(path.s[i], combos[k].lambda, e_sum);
        if (S >= ville_level) crossed_k = true;
        if (c < C && cfg.checkpoints[c] == i + 1) values[(r * K + k) * C + c++] = S;
      }
      crossed[r * K + k] = crossed_k;
    }
  });

  SupermartingaleReport report;
  report.passed = true;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t c = 0; c < C; ++c) {
      std::vector<double> xs(N);
      for (std::size_t r = 0; r < N; ++r) xs[r] = values[(r * K + k) * C + c];
      const Stats st = mean_and_se(xs);
      SupermartingaleRow row{combos[k].form, combos[k].lambda, cfg.checkpoints[c], st.mean, st.se, false};
      row.passed = row.mean <= 1.0 + 3.0 * row.se;
      report.passed = report.passed && row.passed;
      report.rows.push_back(row);
    }
    VilleRow v;
    v.form = combos[k].form;
    v.lambda = combos[k].lambda;
    v.replicas = ville_n;
    for (std::size_t r = 0; r < ville_n; ++r) v.crossings += crossed[r * K + k] ? 1 : 0;
    v.rate = static_cast<double>(v.crossings) / static_cast<double>(ville_n);
    v.se = binomial_se(cfg.radius.delta, ville_n);
    v.passed = v.rate <= cfg.radius.delta + 3.0 * v.se;
    report.passed = report.passed && v.passed;
    report.ville.push_back(v);
  }

  if (!cfg.output_dir.empty()) {
    const auto dir = prepare_dir(cfg.output_dir);
    {
      auto out = open_out(dir / "supermartingale.csv");
      CsvWriter w(out, {"form", "lambda", "t", "mean", "se", "passed"});
      for (const auto& row : report.rows) {
        w.cell(row.form).cell(row.lambda).cell(static_cast<std::uint64_t>(row.t));
        w.cell(row.mean).cell(row.se).cell(row.passed ? 1 : 0);
        w.end_row();
      }
    }
    auto out = open_out(dir / "ville.csv");
    CsvWriter w(out, {"form", "lambda", "replicas", "crossings", "rate", "se", "passed"});
    for (const auto& v : report.ville) {
      w.cell(v.form).cell(v.lambda).cell(static_cast<std::uint64_t>(v.replicas));
      w.cell(static_cast<std::uint64_t>(v.crossings)).cell(v.rate).cell(v.se).cell(v.passed ? 1 : 0);
      w.end_row();
    }
  }
  return report;
}

// ---------------------------------------------------------------- one-dimensional diagnostic

OnedimReport run_onedim_diagnostic(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = raw.resolved();
  cfg.validate();
  const double rho = cfg.radius.rho;
  const double B = cfg.radius.B;
  const double sigma_sq = cfg.radius.sigma_sq;
  const std::size_t T_max = cfg.horizon;

  Rng rng = Rng::for_stream(cfg.seed, 0);
  LinearTracker tracker(FeatureGram(1, rho));
  const std::vector<double> x{1.0};
  double eps_sq = 0.0;
  double harmonic = 0.0;
  std::size_t next = 0;

  OnedimReport report;
  for (std::size_t t = 1; t <= T_max && next < cfg.horizons.size(); ++t) {
    const double eps = cfg.noise.sample(rng);
    tracker.step(x, eps, sigma_sq);
    eps_sq += eps * eps;
    harmonic += 1.0 / (rho + static_cast<double>(t));
    if (t != cfg.horizons[next]) continue;
    ++next;

    const double g_sum = tracker.g_norm_sq_sum();
    report.max_harmonic_error = std::max(report.max_harmonic_error, std::abs(g_sum - harmonic));
    const double n = static_cast<double>(t);
    const double L = std::log(2.0 / cfg.radius.delta);
    const double classical = (std::sqrt(2.0 * sigma_sq * n * L) + B * L / 3.0) / std::sqrt(rho + n);
    for (RadiusMethod m : cfg.methods) {
      const RadiusConfig rc = radius_for(cfg.radius, m);
      RadiusInputs in;
      in.g_norm_sq_sum = g_sum;
      in.logdet_ratio = tracker.logdet_ratio();
      in.fixed_c_sq = sigma_sq * g_sum;  // exact here: the covariate never changes
      if (m == RadiusMethod::EmpiricalMixedBennett) {
        in.sigma_sq_ucb = variance_ucb(eps_sq, t, B, rc.delta_split->first, B);
      }
      OnedimRow row;
      row.T = t;
      row.method = m;
      row.radius = confidence_radius(in, rc);
      row.ratio = row.radius / std::sqrt(std::log(n));
      row.g_norm_sq_sum = g_sum;
      row.harmonic = harmonic;
      row.classical = classical;
      row.s = tracker.self_norm_stat();
      report.rows.push_back(row);
    }
  }

  report.passed = report.max_harmonic_error <= 1e-9;
  if (cfg.horizons.size() >= 2) {
    const std::size_t t_prev = cfg.horizons[cfg.horizons.size() - 2];
    const std::size_t t_last = cfg.horizons.back();
    auto ratio_at = [&](std::size_t t, RadiusMethod m) {
      for (const auto& row : report.rows) {
        if (row.T == t && row.method == m) return row;
      }
      throw NumericError("onedim diagnostic: missing row");
    };
    for (RadiusMethod m : cfg.methods) {
      const OnedimRow a = ratio_at(t_prev, m);
      const OnedimRow b = ratio_at(t_last, m);
      report.ratio_variation[m] = std::abs(b.ratio - a.ratio) / a.ratio;
      if (m != RadiusMethod::SubGaussianBaseline && report.ratio_variation[m] >= 0.2) report.passed = false;
      report.classical_variation = std::abs(b.classical - a.classical) / a.classical;
    }
    if (report.classical_variation >= 0.1) report.passed = false;
  }

  if (!cfg.output_dir.empty()) {
    const auto dir = prepare_dir(cfg.output_dir);
    auto out = open_out(dir / "onedim.csv");
    CsvWriter w(out, {"T", "method", "radius", "ratio", "g_norm_sq_sum", "harmonic", "classical", "s_T"});
    for (const auto& row : report.rows) {
      w.cell(static_cast<std::uint64_t>(row.T)).cell(to_string(row.method)).cell(row.radius).cell(row.ratio);
      w.cell(row.g_norm_sq_sum).cell(row.harmonic).cell(row.classical).cell(row.s);
      w.end_row();
    }
  }
  return report;
}

// ---------------------------------------------------------------- bandit

BanditReport run_bandit(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = raw.resolved();
  cfg.validate();
  const std::size_t S = cfg.scenarios.size();
  const std::size_t M = cfg.methods.size();
  const std::size_t N = cfg.replicas;
  const std::size_t T = cfg.horizon;
  const bool write = !cfg.output_dir.empty();
  std::filesystem::path dir;
  if (write) {
    dir = prepare_dir(cfg.output_dir);
    if (cfg.emit_rows) prepare_dir((dir / "traces").string());
  }

  struct Job {
    std::size_t scenario;
    std::size_t method;
    std::size_t replica;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t r = 0; r < N; ++r) jobs.push_back({s, m, r});
    }
  }
  std::vector<BanditRun> runs(jobs.size());
  std::vector<std::string> curves(jobs.size());

  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job job = jobs[j];
    const NoiseModel& noise = cfg.scenarios[job.scenario];
    const std::uint64_t seed = cfg.seed + job.replica;
    Rng env_rng = Rng::for_stream(seed, 0);
    const BanditEnv env = make_bandit_env(cfg.bandit, cfg.kernel, noise, env_rng);
    RadiusConfig rc = radius_for(cfg.radius, cfg.methods[job.method]);
    if (cfg.sigma_sq_from_noise) rc.sigma_sq = noise.variance() > 0.0 ? noise.variance() : cfg.zero_noise_sigma_sq;
    Rng noise_rng = Rng::for_stream(seed, 1);
    const BanditTrace trace = run_episode(env, rc, T, noise_rng);

    BanditRun& run = runs[j];
    run.scenario = noise.name();
    run.method = rc.method;
    run.seed = seed;
    run.T = T;
    run.cum_regret = trace.cum_regret();
    run.eta_final = trace.eta_final;
    run.aborted = trace.aborted;
    for (const auto& rec : trace.records) run.regret_nonnegative = run.regret_nonnegative && rec.regret >= 0.0;

    if (!write) return;
    if (cfg.emit_rows) {
      std::ostringstream name;
      name << "trace_" << run.scenario << '_' << to_string(run.method) << '_' << seed << ".csv";
      auto out = open_out(dir / "traces" / name.str());
      CsvWriter w(out, {"t", "arm", "reward", "eta", "regret", "cum_regret", "s", "nu"});
      for (const auto& rec : trace.records) {
        w.cell(static_cast<std::uint64_t>(rec.t)).cell(static_cast<std::uint64_t>(rec.arm)).cell(rec.reward);
        w.cell(rec.eta).cell(rec.regret).cell(rec.cum_regret).cell(rec.s).cell(rec.nu);
        w.end_row();
      }
    }
    if (job.replica == 0) {
      std::ostringstream out;
      for (Eigen::Index a = 0; a < env.arms.cols(); ++a) {
        out << run.scenario << ',' << to_string(run.method) << ',' << seed << ',' << a << ','
            << format_double(env.arms(0, a)) << ',' << format_double(env.arm_means(a)) << ','
            << format_double(trace.posterior_mean(a)) << ',' << format_double(trace.ucb(a)) << '\n';
      }
      curves[j] = out.str();
    }
  });

  BanditReport report;
  report.runs = runs;
  report.passed = true;
  for (const auto& run : runs) {
    report.passed = report.passed && !run.aborted && run.regret_nonnegative;
  }
  for (std::size_t s = 0; s < S; ++s) {
    const std::string scenario = cfg.scenarios[s].name();
    for (std::size_t m = 0; m < M; ++m) {
      std::vector<double> regrets;
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].scenario == s && jobs[j].method == m) regrets.push_back(runs[j].cum_regret);
      }
      report.median_regret[scenario][cfg.methods[m]] = median(regrets);
    }
  }
  auto add_ordering = [&](const NoiseModel& noise, RadiusMethod better, RadiusMethod worse) {
    const std::string scenario = noise.name();
    const auto it = report.median_regret.find(scenario);
    if (it == report.median_regret.end() || !it->second.count(better) || !it->second.count(worse)) return;
    BanditOrderingCheck check{scenario, better, worse, it->second.at(better), it->second.at(worse), false};
    check.passed = check.better_median < check.worse_median;
    report.passed = report.passed && check.passed;
    report.orderings.push_back(check);
  };
  add_ordering({NoiseFamily::RescaledBeta, 50.0}, RadiusMethod::MixedBennett, RadiusMethod::SubGaussianBaseline);
  add_ordering({NoiseFamily::RescaledUniform, 5.0}, RadiusMethod::SubGaussianBaseline, RadiusMethod::MixedBennett);

  if (write) {
    {
      auto out = open_out(dir / "bandit_summary.csv");
      CsvWriter w(out, {"scenario", "method", "seed", "T", "cum_regret", "eta_final"});
      for (const auto& run : runs) {
        w.cell(run.scenario).cell(to_string(run.method)).cell(run.seed).cell(static_cast<std::uint64_t>(run.T));
        w.cell(run.cum_regret).cell(run.eta_final);
        w.end_row();
      }
    }
    auto out = open_out(dir / "bandit_curves.csv");
    out << "scenario,method,seed,arm,x,true_mean,posterior_mean,ucb\n";
    for (const auto& chunk : curves) out << chunk;
  }
  return report;
}

// ---------------------------------------------------------------- dispatch

int run_experiment(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = raw.resolved();
  cfg.validate();
  json report;
  bool passed = false;
  switch (cfg.experiment) {
    case Experiment::Coverage: {
      const auto r = run_coverage(cfg);
      report = coverage_json(r);
      passed = r.passed;
      break;
    }
    case Experiment::Widths: {
      const auto r = run_widths(cfg);
      report = widths_json(r);
      passed = r.passed;
      break;
    }
    case Experiment::Supermartingale: {
      const auto r = run_supermartingale(cfg);
      report = supermartingale_json(r);
      passed = r.passed;
      break;
    }
    case Experiment::OnedimDiagnostic: {
      const auto r = run_onedim_diagnostic(cfg);
      report = onedim_json(r);
      passed = r.passed;
      break;
    }
    case Experiment::Bandit: {
      const auto r = run_bandit(cfg);
      report = bandit_json(r);
      passed = r.passed;
      break;
    }
  }
  report["experiment"] = to_string(cfg.experiment);
  if (!cfg.output_dir.empty()) {
    const auto dir = prepare_dir(cfg.output_dir);
    open_out(dir / "config-echo.json") << config_to_json(cfg) << '\n';
    open_out(dir / "report.json") << report.dump(2) << '\n';
  }
  return passed ? 0 : 1;
}

}  // namespace selfnorm
