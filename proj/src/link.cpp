#include "opreg/link.hpp"

#include <cmath>
#include <string>

#include "opreg/error.hpp"
#include "opreg/stats.hpp"

namespace opreg {

const char* to_string(TargetMeasure m) {
  return m == TargetMeasure::kRelativeRisk ? "rr" : "rd";
}

TargetMeasure target_measure_from_string(const std::string& s) {
  if (s == "rr") return TargetMeasure::kRelativeRisk;
  if (s == "rd") return TargetMeasure::kRiskDifference;
  throw_spec("unknown measure '" + s + "' (expected rr or rd)");
}

namespace {

void require_finite(double theta, double phi) {
  if (!std::isfinite(theta) || !std::isfinite(phi)) {
    throw_domain("non-finite (theta, phi) passed to inverse link");
  }
}

void require_interior(double p, const char* name) {
  if (!(p > 0.0 && p < 1.0)) {
    throw_domain(std::string(name) + " must lie strictly in (0,1), got " +
                 std::to_string(p));
  }
}

}  // namespace

ThetaPhi forward_link(double p0, double p1, TargetMeasure measure) {
  require_interior(p0, "p0");
  require_interior(p1, "p1");
  double theta;
  if (measure == TargetMeasure::kRelativeRisk) {
    theta = std::log(p1) - std::log(p0);
  } else {
    // guard only; inputs are strictly interior so |p1-p0| < 1
    double rd = p1 - p0;
    const double cap = 1.0 - 1e-15;
    if (rd > cap) rd = cap;
    if (rd < -cap) rd = -cap;
    theta = std::atanh(rd);
  }
  double phi = logit(p0) + logit(p1);
  return {theta, phi};
}

ProbabilityPair inverse_link(double theta, double phi, TargetMeasure measure) {
  require_finite(theta, phi);

  double p0, p1;
  if (measure == TargetMeasure::kRelativeRisk) {
    // quadratic in p0:  t(1-f) p0^2 + f(1+t) p0 - f = 0,  t = e^theta, f = e^phi.
    // Conjugate root p0 = 2f / (f(1+t) + sqrt(D)) with
    //   D = f^2 (1+t)^2 + 4 t f (1-f) = f^2 (t-1)^2 + 4 t f  > 0.
    // For phi > 0 the same expression scaled by e^{-phi} keeps every term
    // bounded by e^{2 max(|theta|,|phi|)}.
    double t = std::exp(theta);
    if (phi <= 0.0) {
      double f = std::exp(phi);
      double disc = f * f * (t - 1.0) * (t - 1.0) + 4.0 * t * f;
      double denom = f * (1.0 + t) + std::sqrt(disc);
      p0 = 2.0 * f / denom;
      p1 = 2.0 * f * t / denom;
    } else {
      double g = std::exp(-phi);
      double disc = (t - 1.0) * (t - 1.0) + 4.0 * t * g;
      double denom = (1.0 + t) + std::sqrt(disc);
      p0 = 2.0 / denom;
      p1 = 2.0 * t / denom;
    }
  } else {
    // quadratic in p0:  (1-f) p0^2 + (rho + f(2-rho)) p0 - f(1-rho) = 0.
    // Conjugate roots, shared discriminant D = rho^2 (1-f)^2 + 4f > 0:
    //   p0 = 2f(1-rho) / ( rho + f(2-rho) + sqrt(D))
    //   p1 = 2f(1+rho) / (-rho + f(2+rho) + sqrt(D))
    // The denominator with sign(rho) matching the leading term has no
    // cancellation, so compute that root and recover the other by adding
    // two nonnegative quantities.
    double rho = std::tanh(theta);
    if (phi <= 0.0) {
      double f = std::exp(phi);
      double sq = std::sqrt(rho * rho * (1.0 - f) * (1.0 - f) + 4.0 * f);
      if (rho >= 0.0) {
        p0 = 2.0 * f * (1.0 - rho) / (rho + f * (2.0 - rho) + sq);
        p1 = p0 + rho;
      } else {
        p1 = 2.0 * f * (1.0 + rho) / (-rho + f * (2.0 + rho) + sq);
        p0 = p1 - rho;
      }
    } else {
      double g = std::exp(-phi);
      double sq = std::sqrt(rho * rho * (g - 1.0) * (g - 1.0) + 4.0 * g);
      if (rho >= 0.0) {
        p0 = 2.0 * (1.0 - rho) / (rho * g + (2.0 - rho) + sq);
        p1 = p0 + rho;
      } else {
        p1 = 2.0 * (1.0 + rho) / (-rho * g + (2.0 + rho) + sq);
        p0 = p1 - rho;
      }
    }
  }

  return {clamp_open01(p0), clamp_open01(p1)};
}

LinkPartials inverse_link_partials(double theta, double phi, TargetMeasure measure) {
  ProbabilityPair p = inverse_link(theta, phi, measure);
  double p0 = p.p0, p1 = p.p1;
  double q0 = 1.0 - p0, q1 = 1.0 - p1;

  LinkPartials out{};
  if (measure == TargetMeasure::kRelativeRisk) {
    double denom = q0 + q1;
    out.dp0_dtheta = -p0 * q0 / denom;
    out.dp0_dphi = p0 * q0 * q1 / denom;
    out.dp1_dtheta = p1 * q1 / denom;
    out.dp1_dphi = p1 * q1 * q0 / denom;
  } else {
    double rho = p1 - p0;
    double s = 1.0 - rho * rho;  // d(RD)/d(theta)
    double v0 = p0 * q0, v1 = p1 * q1;
    double denom = v0 + v1;
    out.dp0_dtheta = -s * v0 / denom;
    out.dp0_dphi = v0 * v1 / denom;
    out.dp1_dtheta = s * v1 / denom;
    out.dp1_dphi = v0 * v1 / denom;
  }
  return out;
}

double h_transform(double y, double a, double theta, TargetMeasure measure) {
  if (!std::isfinite(theta)) throw_domain("non-finite theta in h transform");
  if (measure == TargetMeasure::kRelativeRisk) {
    return y * std::exp(-a * theta);
  }
  return y - a * std::tanh(theta);
}

std::vector<LinkPoint> link_curve_table(TargetMeasure measure,
                                        const std::vector<double>& theta_grid,
                                        const std::vector<double>& phi_grid) {
  if (theta_grid.empty() || phi_grid.empty()) {
    throw_spec("curve grids must be non-empty");
  }
  std::vector<LinkPoint> table;
  table.reserve(theta_grid.size() * phi_grid.size());
  for (double theta : theta_grid) {
    for (double phi : phi_grid) {
      ProbabilityPair p = inverse_link(theta, phi, measure);
      table.push_back({theta, phi, p.p0, p.p1});
    }
  }
  return table;
}

}  // namespace opreg
