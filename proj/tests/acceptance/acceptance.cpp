// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// `selfnorm_acceptance 3 6` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <Eigen/Dense>

#include "oracles.hpp"
#include "selfnorm/bandit.hpp"
#include "selfnorm/harness.hpp"
#include "selfnorm/noise.hpp"
#include "selfnorm/parallel.hpp"
#include "selfnorm/radii.hpp"
#include "selfnorm/regression.hpp"
#include "selfnorm/rng.hpp"
#include "selfnorm/specfun.hpp"
#include "selfnorm/tracker.hpp"

using namespace selfnorm;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream out;
  out.precision(4);
  out << x;
  return out.str();
}

Eigen::VectorXd uniform_vector(Rng& rng, int dim) {
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x(i) = rng.uniform(-1.0, 1.0);
  return x;
}

// Uniform in the unit ball.
Eigen::VectorXd ball_point(Rng& rng, int dim) {
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x(i) = rng.normal();
  return x.normalized() * std::pow(rng.uniform(), 1.0 / dim);
}

Outcome oracle_equivalence() {
  const int dim = 5;
  const double rho = 0.3;
  const KernelSpec lin{KernelFamily::Linear, 1.0, dim};
  const NoiseModel noise{NoiseFamily::RescaledUniform, 0.0};
  double worst = 0.0;
  for (int stream = 0; stream < 100; ++stream) {
    Rng rng = Rng::for_stream(101, stream);
    const Eigen::VectorXd theta = uniform_vector(rng, dim);
    oracle::Dense dense(dim, rho);
    KernelTracker tracker(GramState(lin, rho));
    RegressionState reg(lin, rho, 1.0, RadiusConfig{});
    for (int t = 0; t < 50; ++t) {
      const Eigen::VectorXd x = uniform_vector(rng, dim);
      const double eps = noise.sample(rng);
      const double y = theta.dot(x) + eps;
      const std::span<const double> xs{x.data(), static_cast<std::size_t>(dim)};
      dense.add(x, eps, y);
      tracker.step(xs, eps, noise.variance());
      reg.observe(xs, y);

      const Eigen::VectorXd probe = uniform_vector(rng, dim);
      const std::span<const double> ps{probe.data(), static_cast<std::size_t>(dim)};
      worst = std::max(worst, std::abs(tracker.self_norm_stat() - dense.self_norm()));
      worst = std::max(worst, std::abs(reg.ridge_norm_sq(ps) - dense.ridge_norm_sq(probe)));
      worst = std::max(worst, std::abs(tracker.logdet_ratio() - dense.logdet_ratio()));
      worst = std::max(worst, std::abs(reg.predict(ps) - dense.theta().dot(probe)));
    }
  }
  return {worst <= 1e-8, "max abs error " + fmt(worst) + " (limit 1e-8)"};
}

Outcome structural_invariants() {
  std::size_t bad_g = 0, bad_sum = 0;
  double worst_g = 0.0, worst_ratio = 0.0;
  for (int stream = 0; stream < 1000; ++stream) {
    Rng rng = Rng::for_stream(202, stream);
    // Alternate kernels and ridge levels across streams.
    const bool rbf = stream % 2 == 0;
    const double rho = (stream % 3 == 0) ? 0.05 : (stream % 3 == 1 ? 1.0 : 10.0);
    const KernelSpec spec = rbf ? KernelSpec{KernelFamily::Rbf, 0.05, 1} : KernelSpec{KernelFamily::Linear, 1.0, 3};
    GramState gram(spec, rho);
    double sum = 0.0;
    std::vector<double> x(spec.input_dim);
    for (int t = 0; t < 200; ++t) {
      for (double& v : x) v = rbf ? rng.uniform() : rng.uniform(-1.0, 1.0);
      const AppendResult r = gram.append(x);
      sum += r.g_norm_sq;
      worst_g = std::max(worst_g, r.g_norm_sq);
      if (r.g_norm_sq > 1.0) ++bad_g;
      const double bound = 2.0 * gram.logdet_ratio();
      worst_ratio = std::max(worst_ratio, sum / bound);
      if (sum > bound * (1.0 + 1e-12)) ++bad_sum;
    }
  }
  return {bad_g == 0 && bad_sum == 0, "max |G|^2 " + fmt(worst_g) + ", max sum/(2 logdet) " + fmt(worst_ratio) +
                                          ", violations " + std::to_string(bad_g + bad_sum)};
}

Outcome supermartingale_ville() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::Supermartingale;
  cfg.replicas = 10000;
  cfg.ville_replicas = 5000;
  cfg.noise = {NoiseFamily::Rademacher, 0.0};
  cfg.checkpoints = {10, 100, 200};
  cfg.seed = 303;
  const SupermartingaleReport report = run_supermartingale(cfg);
  double worst_mean = 0.0, worst_rate = 0.0;
  for (const auto& row : report.rows) worst_mean = std::max(worst_mean, row.mean);
  for (const auto& v : report.ville) worst_rate = std::max(worst_rate, v.rate);
  return {report.passed, std::to_string(report.rows.size()) + " mean checks, max E[S_t] estimate " +
                             fmt(worst_mean) + "; " + std::to_string(report.ville.size()) +
                             " crossing checks, max rate " + fmt(worst_rate)};
}

// Minimum of the generic bound over 10^4 geometric lambda points on
// [1e-3 s, 10 s], s = sqrt(2L)/C the scale of the Gaussian optimizer, clipped to
// the Bernstein domain.
template <class ESum>
double grid_min(ESum&& e_sum, double delta, double lo, double hi) {
  const int points = 10000;
  const double ratio = std::pow(hi / lo, 1.0 / (points - 1));
  double best = INFINITY;
  double lambda = lo;
  for (int i = 0; i < points; ++i, lambda *= ratio) best = std::min(best, generic_radius(lambda, e_sum(lambda), delta));
  return best;
}

Outcome optimizer_validation() {
  double worst = 0.0;
  bool below = false;
  for (double B : {0.1, 1.0, 5.0}) {
    for (double C : {0.5, 2.0, 10.0}) {
      for (double delta : {0.01, 0.05, 0.2}) {
        const double L = std::log(2.0 / delta);
        const double s = std::sqrt(2.0 * L) / C;
        const double bern_hi = std::min(10.0 * s, (1.0 - 1e-9) / B);
        const double bern = grid_min([&](double l) { return l * l * C * C / (2.0 * (1.0 - l * B)); }, delta,
                                     1e-3 * s, bern_hi);
        const double benn = grid_min([&](double l) { return (std::expm1(l * B) - l * B) * C * C / (B * B); },
                                     delta, 1e-3 * s, 10.0 * s);
        const double bern_closed = bernstein_radius(B, C, delta);
        const double benn_closed = bennett_radius(B, C, delta);
        // The closed forms are infima, so a grid value below them is an error.
        if (bern < bern_closed * (1.0 - 1e-12) || benn < benn_closed * (1.0 - 1e-12)) below = true;
        worst = std::max(worst, std::abs(bern - bern_closed) / bern_closed);
        worst = std::max(worst, std::abs(benn - benn_closed) / benn_closed);
      }
    }
  }
  return {!below && worst <= 1e-6,
          "max relative gap " + fmt(worst) + " (limit 1e-6) over 27 points" + (below ? ", grid below closed form" : "")};
}

double mixture_quadrature(double s, double nu, double theta, double B) {
  const double c = theta / (B * B);
  const double log_norm = c * std::log(c) - std::lgamma(c) - std::log(reg_upper_gamma(c, c));
  auto integrand = [&](double l) {
    if (l * B > 700.0) return 0.0;
    const double psi = (std::expm1(l * B) - l * B) / (B * B);
    return std::exp(l * s - nu * psi + log_norm + std::log(B) + c * (l * B - std::exp(l * B)));
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(integrand, 0.0, INFINITY, 1e-13);
}

Outcome mixture_correctness() {
  const double origin_err = std::abs(mixture_value(0.0, 0.0, 1.0, 1.0) - 1.0);
  double quad_err = 0.0;
  for (double s : {0.0, 0.5, 2.0, 5.0, 12.0}) {
    for (double nu : {0.0, 0.3, 2.0, 10.0, 60.0}) {
      quad_err = std::max(quad_err, std::abs(mixture_value(s, nu, 1.0, 1.0) / mixture_quadrature(s, nu, 1.0, 1.0) - 1.0));
    }
  }
  double trip_err = 0.0;
  RadiusConfig cfg;
  for (double nu : {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
    for (double delta : {0.01, 0.05, 0.1, 0.5}) {
      cfg.delta = delta;
      const double J = mixed_bennett_radius(nu, cfg);
      trip_err = std::max(trip_err, std::abs(mixture_value(J, nu, cfg.theta, cfg.B) / (2.0 / delta) - 1.0));
    }
  }
  return {origin_err <= 1e-10 && quad_err <= 1e-6 && trip_err <= 1e-8,
          "|M(0,0) - 1| " + fmt(origin_err) + ", quadrature rel err " + fmt(quad_err) + ", round trip rel err " +
              fmt(trip_err)};
}

Outcome time_uniform_coverage() {
  bool passed = true;
  std::string detail;
  double worst = 0.0;
  for (const NoiseModel& noise : {NoiseModel{NoiseFamily::Rademacher, 0.0}, NoiseModel{NoiseFamily::RescaledUniform, 0.0},
                                  NoiseModel{NoiseFamily::RescaledBeta, 20.0}}) {
    ExperimentConfig cfg;
    cfg.experiment = Experiment::Coverage;
    cfg.replicas = 2000;
    cfg.horizon = 200;
    cfg.seed = 606;
    cfg.noise = noise;
    cfg.radius.delta = 0.1;
    cfg.radius.delta_split = std::make_pair(0.05, 0.05);
    cfg.methods = {RadiusMethod::FixedBernstein, RadiusMethod::FixedBennett, RadiusMethod::MixedBennett,
                   RadiusMethod::EmpiricalMixedBennett};
    const CoverageReport report = run_coverage(cfg);
    passed = passed && report.passed;
    for (const auto& m : report.methods) {
      worst = std::max(worst, m.rate);
      if (!m.passed) detail += " " + noise.name() + "/" + to_string(m.method) + "=" + fmt(m.rate);
    }
  }
  return {passed, "max violation rate " + fmt(worst) + " (limit " + fmt(0.1 + 3.0 * std::sqrt(0.09 / 2000)) + ")" +
                      (detail.empty() ? "" : ", failing:" + detail)};
}

Outcome ellipsoid_coverage() {
  const int dim = 5;
  const double rho = 0.05, delta = 0.1;
  const std::size_t runs = 1000, T = 200;
  const KernelSpec lin{KernelFamily::Linear, 1.0, dim};
  const NoiseModel noise{NoiseFamily::RescaledUniform, 0.0};
  const std::vector<RadiusMethod> methods = {RadiusMethod::FixedBernstein, RadiusMethod::FixedBennett,
                                             RadiusMethod::MixedBennett, RadiusMethod::EmpiricalMixedBennett};
  // |x| <= 1 gives sum |G|^2 <= 2 d ln(1 + T / (d rho)).
  const double fixed_c_sq = bandit_fixed_c_sq(noise.variance(), T, dim, rho);
  std::vector<std::vector<int>> failed(methods.size(), std::vector<int>(runs, 0));
  parallel_for(runs, [&](std::size_t run) {
    Rng rng = Rng::for_stream(707, run);
    KernelExpansion star;
    star.kernel = lin;
    star.centers = Eigen::MatrixXd::Identity(dim, dim);
    star.weights = ball_point(rng, dim).normalized();
    const double D = 1.0;
    std::vector<RegressionState> states;
    for (RadiusMethod m : methods) {
      RadiusConfig cfg;
      cfg.method = m;
      cfg.delta = delta;
      cfg.rho = rho;
      cfg.sigma_sq = noise.variance();
      cfg.delta_split = std::make_pair(0.05, 0.05);
      states.emplace_back(lin, rho, D, cfg);
    }
    for (std::size_t t = 0; t < T; ++t) {
      const Eigen::VectorXd x = ball_point(rng, dim);
      const double y = star.weights.dot(x) + noise.sample(rng);
      for (std::size_t k = 0; k < methods.size(); ++k) {
        RegressionState& st = states[k];
        st.observe({x.data(), static_cast<std::size_t>(dim)}, y);
        if (failed[k][run]) continue;
        // theta* outside the ellipsoid iff deviation - sqrt(rho) D exceeds J_t.
        const double excess = ellipsoid_deviation(st, star) - std::sqrt(rho) * D;
        if (excess > 0.0 && exceeds_radius(excess, st.radius_inputs(fixed_c_sq), st.radius_config())) failed[k][run] = 1;
      }
    }
  });
  const double limit = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / runs);
  bool passed = true;
  std::string detail;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const double rate = static_cast<double>(std::count(failed[k].begin(), failed[k].end(), 1)) / runs;
    passed = passed && rate <= limit;
    detail += (k ? ", " : "") + to_string(methods[k]) + " " + fmt(rate);
  }
  return {passed, "failure rates " + detail + " (limit " + fmt(limit) + ")"};
}

Outcome bandit_ordering() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::Bandit;
  cfg.replicas = 20;
  cfg.horizon = 500;
  cfg.seed = 1;
  cfg.emit_rows = false;
  cfg.methods = {RadiusMethod::MixedBennett, RadiusMethod::SubGaussianBaseline};
  cfg.scenarios = {NoiseModel{NoiseFamily::RescaledBeta, 50.0}, NoiseModel{NoiseFamily::RescaledUniform, 0.0}};
  const BanditReport report = run_bandit(cfg);
  std::string detail;
  for (const auto& o : report.orderings) {
    detail += (detail.empty() ? "" : "; ") + o.scenario + ": " + to_string(o.better) + " " + fmt(o.better_median) +
              " < " + to_string(o.worse) + " " + fmt(o.worse_median) + (o.passed ? "" : " (violated)");
  }
  return {report.passed && report.orderings.size() == 2, "median regret " + detail};
}

Outcome onedim_diagnostic() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::OnedimDiagnostic;
  cfg.horizons = {100, 1000, 10000};
  const OnedimReport report = run_onedim_diagnostic(cfg);
  double worst = 0.0;
  for (const auto& [m, v] : report.ratio_variation) {
    if (m != RadiusMethod::SubGaussianBaseline) worst = std::max(worst, v);
  }
  return {report.passed, "max J_T/sqrt(ln T) variation " + fmt(worst) + " (limit 0.2), classical " +
                             fmt(report.classical_variation) + " (limit 0.1)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"structural invariants", structural_invariants},
      {"supermartingale and Ville", supermartingale_ville},
      {"optimizer validation", optimizer_validation},
      {"mixture correctness", mixture_correctness},
      {"time-uniform coverage", time_uniform_coverage},
      {"ellipsoid coverage", ellipsoid_coverage},
      {"bandit regret ordering", bandit_ordering},
      {"one-dimensional looseness", onedim_diagnostic},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.passed) ++failures;
    std::printf("criterion %d %-26s %s  %s [%.1fs]\n", id, criteria[i].first.c_str(), out.passed ? "PASS" : "FAIL",
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
