#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gridse/grid_model.hpp"

namespace gridse {

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EstimationResult {
  Vector state;          // estimated state (angles for the AC estimator)
  Vector residual;       // z - h(x_hat), rows as given
  double objective = 0;  // ||residual||^2 / sigma^2
  int iterations = 0;
  double gradient_norm = 0;  // ||J^T r|| at the estimate (unweighted)
  bool converged = true;
};

struct GaussNewtonOptions {
  int max_iterations = 50;
  double step_tol = 1e-8;  // convergence on the infinity norm of the update
  bool throw_on_divergence = true;
};

/// Linear WLS: x_hat = argmin ||z - Hx||^2. Throws on rank-deficient H.
EstimationResult linear_wls(const MeasurementMatrix& h, const Vector& z,
                            double sigma = 1.0);

/// Nonlinear WLS on the AC model. Estimates the non-reference angles with
/// magnitudes held at the case operating values; Gauss-Newton with normal
/// equations and a QR fallback, damped by backtracking.
EstimationResult nonlinear_wls(const GridCase& c, const Vector& z,
                               const std::vector<int>* sensor_subset = nullptr,
                               double sigma = 1.0,
                               const GaussNewtonOptions& opts = {});

/// J-test: bad data iff ||r||^2 / sigma^2 > tau (strict).
bool j_test(const EstimationResult& r, double tau);

/// Upper-tail chi-square quantile: P(X > tau) = alpha with `dof` degrees.
double chi2_threshold(int dof, double alpha);

struct NormalizedResidue {
  Vector values;  // Omega * r
  Vector omega;   // diagonal of Omega; exactly 0 on zero-leverage rows
};

/// Residues normalized by their null-hypothesis std dev. Rows whose removal
/// breaks observability (W_ii ~ 0) get a zero normalizer.
NormalizedResidue normalized_residues(const Matrix& h, const Vector& r, double sigma);

/// Diagonal of the residual projector W = I - H(H^T H)^-1 H^T.
Vector projector_diagonal(const Matrix& h);

struct BadDataIteration {
  std::vector<int> active_sensors;
  EstimationResult estimate;
  double j_statistic = 0;
  double threshold = 0;
  bool detected = false;
  int removed_sensor = -1;  // -1: none
};

struct BadDataTrace {
  std::vector<BadDataIteration> iterations;
  std::vector<int> removed_sensors;
  bool halted_unidentifiable = false;  // detection positive but no removable sensor
  const EstimationResult& final_estimate() const { return iterations.back().estimate; }
};

/// Linear-model pipeline: estimate, J-test, remove the largest-|normalized
/// residue| sensor, repeat.
BadDataTrace bad_data_pipeline(const MeasurementMatrix& h, const Vector& z,
                               double sigma, double alpha);

/// Nonlinear (AC) pipeline; Jacobian and projector re-linearized at each
/// iteration's estimate.
BadDataTrace bad_data_pipeline(const GridCase& c, const Vector& z, double sigma,
                               double alpha,
                               const std::vector<int>* sensor_subset = nullptr);

std::string trace_to_text(const BadDataTrace& t, const GridCase* labels = nullptr);
void trace_csv(std::ostream& out, const BadDataTrace& t);

}  // namespace gridse
