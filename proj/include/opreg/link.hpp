#pragma once

#include <string>
#include <vector>

namespace opreg {

// Target association measure: log relative risk or arctanh risk difference.
enum class TargetMeasure { kRelativeRisk, kRiskDifference };

const char* to_string(TargetMeasure m);
TargetMeasure target_measure_from_string(const std::string& s);

struct ProbabilityPair {
  double p0;  // P(Y=1 | A=0, V)
  double p1;  // P(Y=1 | A=1, V)
};

struct ThetaPhi {
  double theta;  // log RR or arctanh RD
  double phi;    // log odds product
};

struct LinkPoint {
  double theta;
  double phi;
  double p0;
  double p1;
};

// Partial derivatives of the inverse link with respect to (theta, phi).
struct LinkPartials {
  double dp0_dtheta;
  double dp0_dphi;
  double dp1_dtheta;
  double dp1_dphi;
};

// (p0, p1) -> (theta, phi). Both probabilities must lie strictly in (0,1).
ThetaPhi forward_link(double p0, double p1, TargetMeasure measure);

// (theta, phi) -> (p0, p1), the closed-form root of the defining quadratic.
// Uses the rationalized (conjugate) form of the root, which is free of the
// removable 0/0 at phi = 0 and keeps both probabilities strictly inside
// (0,1) for all finite inputs.
ProbabilityPair inverse_link(double theta, double phi, TargetMeasure measure);

// Jacobian of inverse_link, computed analytically by inverting the Jacobian
// of the forward map at (p0, p1) = inverse_link(theta, phi).
LinkPartials inverse_link_partials(double theta, double phi, TargetMeasure measure);

// H transform: y * exp(-a*theta) for RR, y - a*tanh(theta) for RD.
double h_transform(double y, double a, double theta, TargetMeasure measure);

// Tabulates the inverse link over the outer product of the two grids,
// theta-major. Suitable for plotting the sigmoid profiles externally.
std::vector<LinkPoint> link_curve_table(TargetMeasure measure,
                                        const std::vector<double>& theta_grid,
                                        const std::vector<double>& phi_grid);

}  // namespace opreg
