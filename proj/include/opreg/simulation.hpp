#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "opreg/dataset.hpp"
#include "opreg/design.hpp"
#include "opreg/dr.hpp"
#include "opreg/outcome_model.hpp"

namespace opreg {

struct UniformLaw {
  double lo = -2.0;
  double hi = 2.0;
};

// Data-generating design: intercept plus one uniform covariate "v" in all
// three true models, plus an independent irrelevant covariate "v_irrel"
// drawn from the same law. Coefficient vectors are (intercept, v).
struct SimDesign {
  Eigen::Index n = 500;
  Eigen::VectorXd alpha_true;
  Eigen::VectorXd beta_true;
  Eigen::VectorXd gamma_true;
  UniformLaw covariate_law;
  TargetMeasure measure = TargetMeasure::kRelativeRisk;
  NuisanceForm truth_nuisance = NuisanceForm::kLogOddsProduct;
  std::uint64_t seed = 0;
};

// The two stock designs used by the study presets.
SimDesign default_logop_design(TargetMeasure measure, Eigen::Index n,
                               std::uint64_t seed);
SimDesign default_linearp0_design(TargetMeasure measure, Eigen::Index n,
                                  std::uint64_t seed);

// Draws a dataset: v, v_irrel ~ Unif(lo,hi) independent, A ~
// Bernoulli(expit(gamma'(1,v))), Y ~ Bernoulli(p_A) with (p0,p1) from the
// truth form. Deterministic in design.seed.
Dataset generate(const SimDesign& design);

// Analyst misspecification scenarios: which of the two working models uses
// the true covariate v versus the irrelevant v_irrel.
enum class Scenario { kBth, kPsc, kOrc, kBad };
const char* to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

enum class CorruptTarget { kNuisance, kPropensity, kBoth };

struct ScenarioDesigns {
  DesignSpec w;  // target design, always correct
  DesignSpec z;  // nuisance design
  DesignSpec x;  // propensity design
};

// Swaps v for v_irrel in the indicated working model(s). The dataset must
// carry the v/v_irrel columns produced by generate().
ScenarioDesigns corrupt_design(const Dataset& data, CorruptTarget which);

ScenarioDesigns scenario_designs(const Dataset& data, Scenario s);

enum class EstimatorKind { kMle, kDrEfficient, kDrNaive };
const char* to_string(EstimatorKind e);  // mle / drw / dru
EstimatorKind estimator_from_string(const std::string& s);

struct StudyConfig {
  SimDesign design;
  std::vector<Scenario> scenarios{Scenario::kBth, Scenario::kPsc, Scenario::kOrc,
                                  Scenario::kBad};
  std::vector<EstimatorKind> estimators{EstimatorKind::kMle,
                                        EstimatorKind::kDrEfficient,
                                        EstimatorKind::kDrNaive};
  NuisanceForm fitted_nuisance = NuisanceForm::kLogOddsProduct;
  int reps = 1000;
  double level = 0.95;
};

struct StudyCell {
  Scenario scenario;
  EstimatorKind estimator;
  std::vector<std::string> coef_names;
  Eigen::VectorXd truth;
  Eigen::VectorXd bias;
  Eigen::VectorXd mc_sd;
  Eigen::VectorXd mean_se;
  Eigen::VectorXd sd_accuracy;  // mean estimated SD / Monte Carlo SD
  Eigen::VectorXd coverage;
  int reps_used = 0;
  int failures = 0;
};

struct StudyResult {
  StudyConfig config;
  std::vector<StudyCell> cells;  // scenario-major, estimator-minor
  // replicate-level traces aligned with cells; failed replicates hold NaN
  std::vector<Eigen::MatrixXd> estimates;  // each reps x dim(alpha)
  std::vector<Eigen::MatrixXd> ses;

  const StudyCell& cell(Scenario s, EstimatorKind e) const;
  const Eigen::MatrixXd& cell_estimates(Scenario s, EstimatorKind e) const;
};

// Runs the Monte Carlo study. Replicate i draws its data from a stream
// derived from (design.seed, i), so all scenarios share the same data within
// a replicate and reruns are bit-for-bit reproducible. Aborts if any cell
// fails on more than 10% of replicates.
StudyResult run_study(const StudyConfig& config);

// Long-format CSV: one row per cell x coefficient.
void write_study_csv(const StudyResult& result, std::ostream& os);

}  // namespace opreg
