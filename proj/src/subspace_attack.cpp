#include "gridse/subspace_attack.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace gridse {

int SubspaceBasis::row_of(int sensor_id) const {
  auto it = std::find(sensor_ids.begin(), sensor_ids.end(), sensor_id);
  if (it == sensor_ids.end())
    throw AttackError("sensor id " + std::to_string(sensor_id) + " not in basis");
  return static_cast<int>(it - sensor_ids.begin());
}

SubspaceBasis estimate_subspace(const std::vector<Vector>& samples, int dim,
                                std::vector<int> sensor_ids) {
  if (samples.empty()) throw AttackError("no samples");
  const long m = samples.front().size();
  if (dim < 1 || dim > m) throw AttackError("subspace dimension out of range");
  if (static_cast<int>(samples.size()) < dim + 1)
    throw AttackError("need at least dim+1 samples, got " +
                      std::to_string(samples.size()));

  Vector mean = Vector::Zero(m);
  for (const Vector& z : samples) mean += z;
  mean /= static_cast<double>(samples.size());

  Matrix cov = Matrix::Zero(m, m);
  for (const Vector& z : samples) {
    const Vector d = z - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(d);
  }
  cov = Matrix(cov.selfadjointView<Eigen::Lower>()) /
        static_cast<double>(samples.size() - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw AttackError("eigendecomposition failed");

  SubspaceBasis out;
  out.singular_values.resize(m);
  for (long i = 0; i < m; ++i)
    out.singular_values(i) = std::max(0.0, eig.eigenvalues()(m - 1 - i));
  if (out.singular_values(dim - 1) <=
      1e-12 * std::max(out.singular_values(0), 1e-300))
    throw AttackError("degenerate samples: covariance rank below dimension");
  out.basis.resize(m, dim);
  for (int j = 0; j < dim; ++j) out.basis.col(j) = eig.eigenvectors().col(m - 1 - j);
  if (sensor_ids.empty()) {
    for (long i = 0; i < m; ++i) out.sensor_ids.push_back(static_cast<int>(i));
  } else {
    if (static_cast<long>(sensor_ids.size()) != m)
      throw AttackError("sensor label count mismatch");
    out.sensor_ids = std::move(sensor_ids);
  }
  return out;
}

SubspaceBasis exact_basis(const MeasurementMatrix& h) {
  // Basis of R(H): columns = numeric rank (partial matrices carry zero
  // columns for unaffected states, so rank < cols is normal there).
  SubspaceBasis out;
  out.basis = orthonormal_range(h.entries);
  if (out.basis.cols() == 0) throw AttackError("zero measurement matrix");
  Eigen::JacobiSVD<Matrix> svd(h.entries);
  out.singular_values = svd.singularValues();
  out.sensor_ids = h.sensor_ids;
  return out;
}

int estimate_dimension(const Vector& sv) {
  if (sv.size() < 2) return static_cast<int>(sv.size());
  int best = 1;
  double best_ratio = 0.0;
  for (long i = 0; i + 1 < sv.size(); ++i) {
    const double denom = std::max(sv(i + 1), 1e-300);
    const double ratio = sv(i) / denom;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = static_cast<int>(i) + 1;
    }
  }
  return best;
}

namespace {

std::vector<int> rows_of(const SubspaceBasis& u, const std::vector<int>& sensors) {
  std::vector<int> rows;
  rows.reserve(sensors.size());
  for (int id : sensors) rows.push_back(u.row_of(id));
  return rows;
}

// Flip so the first entry with magnitude above tolerance is positive; makes
// constructed directions reproducible across sign-ambiguous SVDs.
void canonicalize_sign(Vector& v) {
  for (long i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-9) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

AttackPlan null_direction_attack(const SubspaceBasis& u,
                                 const std::vector<int>& carriers,
                                 const AttackOptions& opts, bool check_gap,
                                 const char* what) {
  if (carriers.empty()) throw InfeasibleAttack(std::string(what) + ": empty sensor set");
  const std::vector<int> removed = rows_of(u, carriers);
  const Matrix reduced = drop_rows(u.basis, removed);
  const SmallestSingular s = smallest_right_singular(reduced);
  if (s.sigma_min >= opts.feasibility_tol * std::max(s.sigma_max, 1e-300))
    throw InfeasibleAttack(std::string(what) +
                           ": reduced basis keeps full column rank (sigma_min " +
                           std::to_string(s.sigma_min) + ")");
  if (check_gap && s.sigma_next < opts.null_gap_factor * s.sigma_min &&
      s.sigma_next > 0.0 && s.sigma_min > 1e-14 * s.sigma_max)
    throw AttackError(std::string(what) + ": ambiguous null space (gap " +
                      std::to_string(s.sigma_next / s.sigma_min) + " < " +
                      std::to_string(opts.null_gap_factor) + ")");

  const Vector full = u.basis * s.v;
  AttackPlan plan;
  plan.attacked = carriers;
  plan.direction.resize(static_cast<long>(carriers.size()));
  for (size_t i = 0; i < carriers.size(); ++i)
    plan.direction(static_cast<long>(i)) = full(u.row_of(carriers[i]));
  const double norm = plan.direction.norm();
  if (norm <= 0.0) throw InfeasibleAttack(std::string(what) + ": zero direction");
  plan.direction /= norm;
  canonicalize_sign(plan.direction);
  return plan;
}

}  // namespace

AttackPlan unobservable_attack_full(const SubspaceBasis& u,
                                    const std::vector<int>& adversary,
                                    const AttackOptions& opts) {
  return null_direction_attack(u, adversary, opts, false, "unobservable attack");
}

AttackPlan unobservable_attack_partial(const SubspaceBasis& u_o,
                                       const std::vector<int>& critical,
                                       const AttackOptions& opts) {
  return null_direction_attack(u_o, critical, opts, true,
                               "partial unobservable attack");
}

AttackPlan framing_attack_partial(const SubspaceBasis& u_a,
                                  const std::vector<int>& c1,
                                  const AttackOptions& opts) {
  return null_direction_attack(u_a, c1, opts, true, "partial framing attack");
}

FramingProblem build_framing_problem(const SubspaceBasis& u,
                                     const std::vector<int>& adversary,
                                     const std::vector<int>& framed,
                                     double eps1, double eps2) {
  for (int id : adversary)
    if (std::find(framed.begin(), framed.end(), id) != framed.end())
      throw AttackError("adversary and framed sets overlap");
  const long m = u.basis.rows();

  FramingProblem p;
  p.adversary = adversary;
  p.framed = framed;
  p.sensor_ids = u.sensor_ids;
  p.eps2 = eps2;

  // W = I - U (U^T U)^-1 U^T; basis columns are orthonormal only for exact
  // bases, so keep the general form.
  const Matrix gram = u.basis.transpose() * u.basis;
  p.projector = Matrix::Identity(m, m) -
                u.basis * gram.ldlt().solve(u.basis.transpose());
  p.omega = Vector::Zero(m);
  for (long i = 0; i < m; ++i) {
    const double wii = p.projector(i, i);
    p.omega(i) = wii > eps2 ? 1.0 / std::sqrt(wii) : 0.0;
  }

  // Feasible directions: a = U_1 y with y in N(U_2); realized as U_A * V_hat
  // where V_hat collects the right singular vectors of U with the rows of
  // S_A ∪ S_F removed whose singular values fall below eps1.
  std::vector<int> drop = adversary;
  drop.insert(drop.end(), framed.begin(), framed.end());
  const Matrix u2 = drop_rows(u.basis, rows_of(u, drop));
  Eigen::JacobiSVD<Matrix> svd(
      u2.rows() >= u2.cols()
          ? u2
          : [&] {
              Matrix padded = Matrix::Zero(u2.cols(), u2.cols());
              padded.topRows(u2.rows()) = u2;
              return padded;
            }(),
      Eigen::ComputeThinV);
  const Vector sv = svd.singularValues();
  p.eps1 = eps1 >= 0.0 ? eps1 : 1e-3 * (sv.size() > 0 ? sv(0) : 0.0);

  std::vector<long> null_cols;
  for (long j = 0; j < sv.size(); ++j)
    if (sv(j) < p.eps1) null_cols.push_back(j);
  if (null_cols.empty())
    throw InfeasibleAttack("framing: empty feasible space (no singular value below eps1)");

  Matrix u_adv = Matrix::Zero(m, u.basis.cols());
  for (int id : adversary) u_adv.row(u.row_of(id)) = u.basis.row(u.row_of(id));
  p.feasible_basis.resize(m, static_cast<long>(null_cols.size()));
  for (size_t k = 0; k < null_cols.size(); ++k)
    p.feasible_basis.col(static_cast<long>(k)) =
        u_adv * svd.matrixV().col(null_cols[k]);
  return p;
}

AttackPlan solve_framing_qcqp(const FramingProblem& p) {
  if (p.feasible_basis.cols() == 0)
    throw InfeasibleAttack("framing: empty feasible basis");
  Matrix b = p.feasible_basis;

  // M y = framed rows of Omega * W * B y; maximize ||M y||^2 s.t. ||B y|| = 1.
  auto solve_once = [&](const Matrix& basis, Vector& y, double& value) {
    Matrix wb = p.projector * basis;
    for (long i = 0; i < wb.rows(); ++i) wb.row(i) *= p.omega(i);
    Matrix msel(static_cast<long>(p.framed.size()), basis.cols());
    for (size_t k = 0; k < p.framed.size(); ++k) {
      auto it = std::find(p.sensor_ids.begin(), p.sensor_ids.end(), p.framed[k]);
      if (it == p.sensor_ids.end()) throw AttackError("framed sensor not in problem rows");
      msel.row(static_cast<long>(k)) = wb.row(it - p.sensor_ids.begin());
    }
    const Matrix a = msel.transpose() * msel;
    const Matrix g = basis.transpose() * basis;
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(a, g);
    if (eig.info() != Eigen::Success) return false;
    const long top = eig.eigenvalues().size() - 1;
    value = eig.eigenvalues()(top);
    y = eig.eigenvectors().col(top);
    return std::isfinite(value) && y.allFinite();
  };

  Vector y;
  double value = 0.0;
  if (!solve_once(b, y, value)) {
    // Collinear feasible columns: re-orthonormalize once and retry.
    b = orthonormal_range(b, 1e-10);
    if (b.cols() == 0 || !solve_once(b, y, value))
      throw AttackError("framing QCQP: singular feasible Gram matrix");
  }

  Vector full = b * y;
  const double norm = full.norm();
  if (norm <= 0.0) throw AttackError("framing QCQP: zero direction");
  full /= norm;

  AttackPlan plan;
  plan.framed = p.framed;
  plan.attacked = p.adversary;
  plan.objective = value;
  plan.direction.resize(static_cast<long>(p.adversary.size()));
  for (size_t i = 0; i < p.adversary.size(); ++i) {
    auto it = std::find(p.sensor_ids.begin(), p.sensor_ids.end(), p.adversary[i]);
    plan.direction(static_cast<long>(i)) = full(it - p.sensor_ids.begin());
  }
  // Entries off the adversary support are zero by construction of B.
  plan.direction /= plan.direction.norm();
  canonicalize_sign(plan.direction);
  return plan;
}

Vector apply_attack(const Vector& z, const AttackPlan& plan, double eta) {
  Vector out = z;
  for (size_t i = 0; i < plan.attacked.size(); ++i) {
    const int row = plan.attacked[i];
    if (row < 0 || row >= z.size())
      throw AttackError("attack support outside measurement range");
    out(row) += eta * plan.direction(static_cast<long>(i));
  }
  return out;
}

double eta_for_relative_magnitude(const Vector& z, const AttackPlan& plan,
                                  double target) {
  const double a1 = plan.direction.lpNorm<1>();
  if (a1 <= 0.0) throw AttackError("zero attack direction");
  return target * z.lpNorm<1>() / a1;
}

std::string plan_to_text(const AttackPlan& plan, const GridCase& c) {
  std::ostringstream out;
  out.precision(17);
  out << "eta " << plan.eta << "\n";
  out << "objective " << plan.objective << "\n";
  for (size_t i = 0; i < plan.attacked.size(); ++i)
    out << "attack " << c.sensors()[static_cast<size_t>(plan.attacked[i])].label()
        << " " << plan.direction(static_cast<long>(i)) << "\n";
  for (int id : plan.framed)
    out << "framed " << c.sensors()[static_cast<size_t>(id)].label() << "\n";
  return out.str();
}

AttackPlan plan_from_text(std::istream& in, const GridCase& c) {
  AttackPlan plan;
  std::vector<double> entries;
  std::string tok;
  while (in >> tok) {
    if (tok == "eta") {
      in >> plan.eta;
    } else if (tok == "objective") {
      in >> plan.objective;
    } else if (tok == "attack") {
      std::string label;
      double v = 0.0;
      in >> label >> v;
      plan.attacked.push_back(c.sensor_id_or_throw(label));
      entries.push_back(v);
    } else if (tok == "framed") {
      std::string label;
      in >> label;
      plan.framed.push_back(c.sensor_id_or_throw(label));
    } else {
      throw AttackError("bad plan record: " + tok);
    }
  }
  plan.direction.resize(static_cast<long>(entries.size()));
  for (size_t i = 0; i < entries.size(); ++i)
    plan.direction(static_cast<long>(i)) = entries[i];
  return plan;
}

void basis_spectrum_csv(std::ostream& out, const SubspaceBasis& u) {
  out << "index,singular_value\n";
  out.precision(17);
  for (long i = 0; i < u.singular_values.size(); ++i)
    out << i << "," << u.singular_values(i) << "\n";
}

}  // namespace gridse
