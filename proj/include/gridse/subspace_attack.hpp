#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gridse/grid_model.hpp"

namespace gridse {

class AttackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when the requested attack does not exist for the given sets.
class InfeasibleAttack : public AttackError {
 public:
  using AttackError::AttackError;
};

/// Orthonormal basis of a measurement subspace, rows labeled by sensor ids.
struct SubspaceBasis {
  Matrix basis;                    // |sensors| x dim, orthonormal columns
  Vector singular_values;          // diagnostic spectrum (descending)
  std::vector<int> sensor_ids;     // row labels

  int row_of(int sensor_id) const;
};

/// Top-`dim` left singular vectors of the centered sample covariance.
SubspaceBasis estimate_subspace(const std::vector<Vector>& samples, int dim,
                                std::vector<int> sensor_ids = {});

/// Exact basis from a known measurement matrix (orthonormalized columns).
SubspaceBasis exact_basis(const MeasurementMatrix& h);

/// Eigengap diagnostic: dimension at the largest ratio of consecutive
/// singular values.
int estimate_dimension(const Vector& singular_values);

struct AttackPlan {
  std::vector<int> attacked;  // sensor ids carrying the attack
  Vector direction;           // unit vector aligned with `attacked`
  std::vector<int> framed;    // sensors targeted for removal (framing only)
  double eta = 1.0;           // scaling applied by default in apply_attack
  double objective = 0.0;     // QCQP value where applicable
};

struct AttackOptions {
  /// Feasibility: smallest singular value of the reduced basis must fall
  /// below tol * largest. 1.0 disables the gate (data-driven use).
  double feasibility_tol = 1e-6;
  /// Near-one-dimensionality: second-smallest singular value must exceed
  /// the smallest by this factor in the partial constructions.
  double null_gap_factor = 10.0;
};

/// Unobservable attack from a full-measurement subspace basis: the smallest
/// right singular direction of U with the adversary rows removed, mapped
/// through U and restricted to the adversary sensors.
AttackPlan unobservable_attack_full(const SubspaceBasis& u,
                                    const std::vector<int>& adversary,
                                    const AttackOptions& opts = {});

/// Partial-measurement variant: basis rows cover the observed sensors, the
/// attack is carried by the critical set C.
AttackPlan unobservable_attack_partial(const SubspaceBasis& u_o,
                                       const std::vector<int>& critical,
                                       const AttackOptions& opts = {});

/// Framing attack ingredients: residue projector, normalizer, and a basis of
/// the feasible attack directions R(U_1) ∩ A.
struct FramingProblem {
  Matrix projector;             // W = I - U(U^T U)^-1 U^T over all rows
  Vector omega;                 // diagonal normalizer, 0 where W_ii <= eps2
  std::vector<int> adversary;   // S_A
  std::vector<int> framed;      // S_F
  Matrix feasible_basis;        // m x k, columns span R(U_1) ∩ A
  double eps1 = 0.0;
  double eps2 = 0.0;
  std::vector<int> sensor_ids;  // row labels of projector/feasible_basis
};

FramingProblem build_framing_problem(const SubspaceBasis& u,
                                     const std::vector<int>& adversary,
                                     const std::vector<int>& framed,
                                     double eps1 = -1.0,  // <0: 1e-3 * sigma_max
                                     double eps2 = 1e-6);

/// Maximize the framed-sensor normalized-residue energy over unit attacks in
/// the feasible subspace, via the generalized symmetric eigenproblem in
/// feasible-basis coordinates.
AttackPlan solve_framing_qcqp(const FramingProblem& p);

/// Partial-observation framing: basis rows cover S_o \ C_2 and the attack is
/// carried by C_1.
AttackPlan framing_attack_partial(const SubspaceBasis& u_a,
                                  const std::vector<int>& c1,
                                  const AttackOptions& opts = {});

/// z + eta * (direction embedded at the attacked sensors).
Vector apply_attack(const Vector& z, const AttackPlan& plan, double eta);

/// eta such that ||eta * a||_1 / ||z||_1 equals `target`.
double eta_for_relative_magnitude(const Vector& z, const AttackPlan& plan,
                                  double target);

std::string plan_to_text(const AttackPlan& plan, const GridCase& c);
AttackPlan plan_from_text(std::istream& in, const GridCase& c);
void basis_spectrum_csv(std::ostream& out, const SubspaceBasis& u);

}  // namespace gridse
