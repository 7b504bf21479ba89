#include "opreg/simulation.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "opreg/error.hpp"
#include "opreg/parallel.hpp"
#include "opreg/propensity.hpp"
#include "opreg/rng.hpp"
#include "opreg/stats.hpp"
#include "opreg/variance.hpp"

namespace opreg {

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::kBth: return "bth";
    case Scenario::kPsc: return "psc";
    case Scenario::kOrc: return "orc";
    case Scenario::kBad: return "bad";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "bth") return Scenario::kBth;
  if (s == "psc") return Scenario::kPsc;
  if (s == "orc") return Scenario::kOrc;
  if (s == "bad") return Scenario::kBad;
  throw_spec("unknown scenario '" + s + "'");
}

const char* to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::kMle: return "mle";
    case EstimatorKind::kDrEfficient: return "drw";
    case EstimatorKind::kDrNaive: return "dru";
  }
  return "?";
}

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "mle") return EstimatorKind::kMle;
  if (s == "drw") return EstimatorKind::kDrEfficient;
  if (s == "dru") return EstimatorKind::kDrNaive;
  throw_spec("unknown estimator '" + s + "'");
}

namespace {

Eigen::VectorXd coeffs2(double c0, double c1) {
  Eigen::VectorXd v(2);
  v << c0, c1;
  return v;
}

}  // namespace

SimDesign default_logop_design(TargetMeasure measure, Eigen::Index n,
                               std::uint64_t seed) {
  SimDesign d;
  d.n = n;
  d.alpha_true = coeffs2(0.0, -1.0);
  d.beta_true = coeffs2(-0.5, 1.0);
  d.gamma_true = coeffs2(0.1, -0.5);
  d.covariate_law = {-2.0, 2.0};
  d.measure = measure;
  d.truth_nuisance = NuisanceForm::kLogOddsProduct;
  d.seed = seed;
  return d;
}

SimDesign default_linearp0_design(TargetMeasure measure, Eigen::Index n,
                                  std::uint64_t seed) {
  SimDesign d;
  d.n = n;
  d.alpha_true = coeffs2(0.0, 0.3);
  d.beta_true = coeffs2(0.5, 0.2);
  d.gamma_true = coeffs2(0.1, -0.5);
  d.covariate_law = {-1.0, 1.0};
  d.measure = measure;
  d.truth_nuisance = NuisanceForm::kLinearP0;
  d.seed = seed;
  return d;
}

namespace {

ProbabilityPair truth_probabilities(const SimDesign& d, double v) {
  double theta = d.alpha_true[0] + d.alpha_true[1] * v;
  double nuis = d.beta_true[0] + d.beta_true[1] * v;
  if (d.truth_nuisance == NuisanceForm::kLogOddsProduct) {
    return inverse_link(theta, nuis, d.measure);
  }
  double p0 = nuis;
  double p1 = d.measure == TargetMeasure::kRelativeRisk ? p0 * std::exp(theta)
                                                        : p0 + std::tanh(theta);
  return {p0, p1};
}

void validate_design(const SimDesign& d) {
  if (d.n <= 0) throw_spec("simulation design needs n > 0");
  if (d.alpha_true.size() != 2 || d.beta_true.size() != 2 || d.gamma_true.size() != 2) {
    throw_spec("simulation design coefficients must be (intercept, v) pairs");
  }
  if (!(d.covariate_law.lo < d.covariate_law.hi)) {
    throw_spec("covariate law needs lo < hi");
  }
  if (d.truth_nuisance == NuisanceForm::kLinearP0) {
    for (double v : {d.covariate_law.lo, d.covariate_law.hi}) {
      ProbabilityPair p = truth_probabilities(d, v);
      if (!(p.p0 > 0.0 && p.p0 < 1.0 && p.p1 > 0.0 && p.p1 < 1.0)) {
        std::ostringstream msg;
        msg << "linear-p0 truth is infeasible at v = " << v << " (p0 = " << p.p0
            << ", p1 = " << p.p1 << "); choose coefficients keeping both "
            << "probabilities inside (0,1)";
        throw_spec(msg.str());
      }
    }
  }
}

}  // namespace

Dataset generate(const SimDesign& design) {
  validate_design(design);
  Rng rng(design.seed, 0);

  const Eigen::Index n = design.n;
  Dataset data;
  data.y.resize(n);
  data.a.resize(n);
  Eigen::VectorXd v(n), v_irrel(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = rng.uniform(design.covariate_law.lo, design.covariate_law.hi);
    v_irrel[i] = rng.uniform(design.covariate_law.lo, design.covariate_law.hi);
    double e = expit(design.gamma_true[0] + design.gamma_true[1] * v[i]);
    data.a[i] = rng.bernoulli(e);
    ProbabilityPair p = truth_probabilities(design, v[i]);
    double pa = data.a[i] == 1.0 ? p.p1 : p.p0;
    if (!(pa > 0.0 && pa < 1.0)) {
      std::ostringstream msg;
      msg << "truth produced probability " << pa << " at v = " << v[i];
      throw_spec(msg.str());
    }
    data.y[i] = rng.bernoulli(pa);
  }

  data.covariates.add_column("v", std::move(v));
  data.covariates.add_column("v_irrel", std::move(v_irrel));
  return data;
}

ScenarioDesigns corrupt_design(const Dataset& data, CorruptTarget which) {
  if (!data.covariates.has_column("v") || !data.covariates.has_column("v_irrel")) {
    throw_spec("corrupt_design expects a dataset with v and v_irrel columns");
  }
  ScenarioDesigns d;
  d.w.terms = {"v"};
  d.z.terms = {which == CorruptTarget::kNuisance || which == CorruptTarget::kBoth
                   ? "v_irrel"
                   : "v"};
  d.x.terms = {which == CorruptTarget::kPropensity || which == CorruptTarget::kBoth
                   ? "v_irrel"
                   : "v"};
  return d;
}

ScenarioDesigns scenario_designs(const Dataset& data, Scenario s) {
  switch (s) {
    case Scenario::kBth: {
      ScenarioDesigns d;
      d.w.terms = {"v"};
      d.z.terms = {"v"};
      d.x.terms = {"v"};
      if (!data.covariates.has_column("v")) {
        throw_spec("scenario designs expect a generated dataset");
      }
      return d;
    }
    case Scenario::kPsc: return corrupt_design(data, CorruptTarget::kNuisance);
    case Scenario::kOrc: return corrupt_design(data, CorruptTarget::kPropensity);
    case Scenario::kBad: return corrupt_design(data, CorruptTarget::kBoth);
  }
  throw_spec("invalid scenario");
}

const StudyCell& StudyResult::cell(Scenario s, EstimatorKind e) const {
  for (const auto& c : cells) {
    if (c.scenario == s && c.estimator == e) return c;
  }
  throw_spec("study cell not found");
}

const Eigen::MatrixXd& StudyResult::cell_estimates(Scenario s, EstimatorKind e) const {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].scenario == s && cells[i].estimator == e) return estimates[i];
  }
  throw_spec("study cell not found");
}

namespace {

struct ReplicateOutput {
  // per cell: estimate and SE vectors, or failure flag
  std::vector<Eigen::VectorXd> est;
  std::vector<Eigen::VectorXd> se;
  std::vector<char> ok;
};

// shared fits within one replicate; errors memoized so each is computed once
template <typename T>
class Lazy {
 public:
  explicit Lazy(std::function<T()> make) : make_(std::move(make)) {}
  const T& get() {
    if (!value_ && error_.empty()) {
      try {
        value_.emplace(make_());
      } catch (const std::exception& e) {
        error_ = e.what();
      }
    }
    if (!error_.empty()) throw_convergence(error_);
    return *value_;
  }

 private:
  std::function<T()> make_;
  std::optional<T> value_;
  std::string error_;
};

}  // namespace

StudyResult run_study(const StudyConfig& config) {
  if (config.reps < 1) throw_spec("study needs at least one replicate");
  validate_design(config.design);

  const std::size_t n_cells = config.scenarios.size() * config.estimators.size();
  const Eigen::Index k = config.design.alpha_true.size();
  const double zq = normal_quantile(1.0 - (1.0 - config.level) / 2.0);

  std::vector<ReplicateOutput> reps(static_cast<std::size_t>(config.reps));

  parallel_for(static_cast<std::size_t>(config.reps), [&](std::size_t r) {
    SimDesign d = config.design;
    // derived stream per replicate
    Rng seeder(config.design.seed, 0x5EEDULL + r);
    d.seed = seeder.next_u64();
    Dataset data = generate(d);

    DesignSpec w_spec;
    w_spec.terms = {"v"};
    DesignSpec z_true, z_bad, x_true, x_bad;
    z_true.terms = {"v"};
    z_bad.terms = {"v_irrel"};
    x_true.terms = {"v"};
    x_bad.terms = {"v_irrel"};

    auto make_outcome_spec = [&](const DesignSpec& z) {
      OutcomeModelSpec spec;
      spec.measure = config.design.measure;
      spec.w_design = w_spec;
      spec.z_design = z;
      spec.nuisance_form = config.fitted_nuisance;
      return spec;
    };

    OutcomeModelSpec spec_true = make_outcome_spec(z_true);
    OutcomeModelSpec spec_bad = make_outcome_spec(z_bad);

    Lazy<NuisanceFit> mle_true([&] { return fit_mle(data, spec_true); });
    Lazy<NuisanceFit> mle_bad([&] { return fit_mle(data, spec_bad); });
    Lazy<PropensityFit> prop_true([&] { return fit_propensity(data, x_true); });
    Lazy<PropensityFit> prop_bad([&] { return fit_propensity(data, x_bad); });
    Lazy<Eigen::MatrixXd> cov_mle_true([&] { return fisher_covariance(mle_true.get()); });
    Lazy<Eigen::MatrixXd> cov_mle_bad([&] { return fisher_covariance(mle_bad.get()); });

    ReplicateOutput& out = reps[r];
    out.est.resize(n_cells);
    out.se.resize(n_cells);
    out.ok.assign(n_cells, 0);

    std::size_t cell = 0;
    for (Scenario sc : config.scenarios) {
      bool z_is_true = (sc == Scenario::kBth || sc == Scenario::kOrc);
      bool x_is_true = (sc == Scenario::kBth || sc == Scenario::kPsc);
      for (EstimatorKind est : config.estimators) {
        try {
          if (est == EstimatorKind::kMle) {
            const NuisanceFit& fit = z_is_true ? mle_true.get() : mle_bad.get();
            const Eigen::MatrixXd& cov = z_is_true ? cov_mle_true.get()
                                                   : cov_mle_bad.get();
            out.est[cell] = fit.alpha;
            out.se[cell] = cov.topLeftCorner(k, k).diagonal().cwiseSqrt();
          } else {
            const NuisanceFit& nuisance = z_is_true ? mle_true.get() : mle_bad.get();
            const PropensityFit& prop = x_is_true ? prop_true.get() : prop_bad.get();
            const OutcomeModelSpec& spec = z_is_true ? spec_true : spec_bad;
            WeightKind kind = est == EstimatorKind::kDrEfficient
                                  ? WeightKind::kEfficient
                                  : WeightKind::kNaive;
            DrFit dr = solve_dr(data, spec, nuisance, prop, kind);
            InfluenceDecomposition inf =
                kind == WeightKind::kEfficient
                    ? efficient_sandwich(dr, nuisance, prop, data, spec)
                    : sandwich_dr(dr, nuisance, prop, data, spec);
            out.est[cell] = dr.alpha_dr;
            out.se[cell] = inf.cov_alpha.diagonal().cwiseSqrt();
          }
          out.ok[cell] = 1;
        } catch (const std::exception&) {
          // failed replicate for this cell; tallied below
        }
        ++cell;
      }
    }
  });

  StudyResult result;
  result.config = config;

  std::size_t cell = 0;
  for (Scenario sc : config.scenarios) {
    for (EstimatorKind est : config.estimators) {
      StudyCell c;
      c.scenario = sc;
      c.estimator = est;
      c.coef_names = {"alpha.intercept", "alpha.v"};
      c.truth = config.design.alpha_true;

      Eigen::MatrixXd est_mat(config.reps, k);
      Eigen::MatrixXd se_mat(config.reps, k);
      est_mat.setConstant(std::numeric_limits<double>::quiet_NaN());
      se_mat.setConstant(std::numeric_limits<double>::quiet_NaN());

      int used = 0;
      for (int r = 0; r < config.reps; ++r) {
        const auto& rep = reps[static_cast<std::size_t>(r)];
        if (rep.ok[cell]) {
          est_mat.row(r) = rep.est[cell].transpose();
          se_mat.row(r) = rep.se[cell].transpose();
          ++used;
        }
      }
      c.reps_used = used;
      c.failures = config.reps - used;
      if (c.failures > config.reps / 10) {
        std::ostringstream msg;
        msg << "study cell " << to_string(sc) << "/" << to_string(est)
            << " failed on " << c.failures << " of " << config.reps
            << " replicates (> 10%)";
        throw_convergence(msg.str());
      }
      if (used == 0) throw_convergence("study cell has no successful replicates");

      c.bias.resize(k);
      c.mc_sd.resize(k);
      c.mean_se.resize(k);
      c.sd_accuracy.resize(k);
      c.coverage.resize(k);
      for (Eigen::Index j = 0; j < k; ++j) {
        double sum = 0.0, sum_se = 0.0;
        for (int r = 0; r < config.reps; ++r) {
          if (!reps[static_cast<std::size_t>(r)].ok[cell]) continue;
          sum += est_mat(r, j);
          sum_se += se_mat(r, j);
        }
        double mean = sum / used;
        double ss = 0.0;
        int covered = 0;
        for (int r = 0; r < config.reps; ++r) {
          if (!reps[static_cast<std::size_t>(r)].ok[cell]) continue;
          double dev = est_mat(r, j) - mean;
          ss += dev * dev;
          if (std::abs(est_mat(r, j) - c.truth[j]) <= zq * se_mat(r, j)) ++covered;
        }
        c.bias[j] = mean - c.truth[j];
        c.mc_sd[j] = used > 1 ? std::sqrt(ss / (used - 1)) : 0.0;
        c.mean_se[j] = sum_se / used;
        c.sd_accuracy[j] = c.mc_sd[j] > 0.0
                               ? c.mean_se[j] / c.mc_sd[j]
                               : std::numeric_limits<double>::quiet_NaN();
        c.coverage[j] = static_cast<double>(covered) / used;
      }

      result.cells.push_back(std::move(c));
      result.estimates.push_back(std::move(est_mat));
      result.ses.push_back(std::move(se_mat));
      ++cell;
    }
  }
  return result;
}

void write_study_csv(const StudyResult& result, std::ostream& os) {
  os << "measure,truth_nuisance,fitted_nuisance,n,reps,scenario,estimator,coef,"
        "truth,bias,mc_sd,mean_se,sd_accuracy,coverage,reps_used,failures\n";
  os.precision(10);
  for (const auto& c : result.cells) {
    for (Eigen::Index j = 0; j < c.truth.size(); ++j) {
      os << to_string(result.config.design.measure) << ','
         << to_string(result.config.design.truth_nuisance) << ','
         << to_string(result.config.fitted_nuisance) << ','
         << result.config.design.n << ',' << result.config.reps << ','
         << to_string(c.scenario) << ',' << to_string(c.estimator) << ','
         << c.coef_names[static_cast<std::size_t>(j)] << ',' << c.truth[j] << ','
         << c.bias[j] << ',' << c.mc_sd[j] << ',' << c.mean_se[j] << ','
         << c.sd_accuracy[j] << ',' << c.coverage[j] << ',' << c.reps_used << ','
         << c.failures << '\n';
    }
  }
}

}  // namespace opreg
