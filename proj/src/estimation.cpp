#include "gridse/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

namespace gridse {

EstimationResult linear_wls(const MeasurementMatrix& h, const Vector& z,
                            double sigma) {
  if (z.size() != h.entries.rows())
    throw EstimationError("measurement/matrix row mismatch");
  Eigen::ColPivHouseholderQR<Matrix> qr(h.entries);
  qr.setThreshold(1e-8);
  if (qr.rank() < h.entries.cols())
    throw EstimationError("rank-deficient measurement matrix");
  EstimationResult out;
  out.state = qr.solve(z);
  out.residual = z - h.entries * out.state;
  out.objective = out.residual.squaredNorm() / (sigma * sigma);
  out.gradient_norm = (h.entries.transpose() * out.residual).norm();
  return out;
}

namespace {

Vector ac_measure_rows(const GridCase& c, const AcState& x,
                       const std::vector<int>& rows) {
  const Vector full = ac_measure(c, x);
  Vector out(static_cast<long>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    out(static_cast<long>(i)) = full(rows[i]);
  return out;
}

}  // namespace

EstimationResult nonlinear_wls(const GridCase& c, const Vector& z,
                               const std::vector<int>* sensor_subset,
                               double sigma, const GaussNewtonOptions& opts) {
  std::vector<int> rows;
  if (sensor_subset) {
    rows = *sensor_subset;
  } else {
    rows.resize(static_cast<size_t>(c.sensor_count()));
    for (int i = 0; i < c.sensor_count(); ++i) rows[static_cast<size_t>(i)] = i;
  }
  if (z.size() != static_cast<long>(rows.size()))
    throw EstimationError("measurement/subset size mismatch");

  const AcState x = c.operating_state();
  auto unpack = [&](const Vector& theta) {
    AcState s = x;
    for (int col = 0; col < c.dc_state_dim(); ++col)
      s.angle(c.bus_index(c.state_bus(col))) = theta(col);
    return s;
  };
  Vector theta(c.dc_state_dim());
  for (int col = 0; col < c.dc_state_dim(); ++col)
    theta(col) = x.angle(c.bus_index(c.state_bus(col)));

  Vector r = z - ac_measure_rows(c, unpack(theta), rows);
  double obj = r.squaredNorm();
  EstimationResult out;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    out.iterations = it;
    const Matrix J = ac_angle_jacobian(c, unpack(theta), &rows);
    Vector step;
    const Matrix jtj = J.transpose() * J;
    Eigen::LLT<Matrix> llt(jtj);
    if (llt.info() == Eigen::Success) {
      step = llt.solve(J.transpose() * r);
    } else {
      Eigen::ColPivHouseholderQR<Matrix> qr(J);
      qr.setThreshold(1e-10);
      if (qr.rank() == 0) throw EstimationError("singular normal equations");
      step = qr.solve(r);
    }
    if (!step.allFinite()) throw EstimationError("singular normal equations");

    double t = 1.0;
    Vector cand;
    double cand_obj = 0.0;
    for (int back = 0; back < 12; ++back) {
      cand = theta + t * step;
      cand_obj = (z - ac_measure_rows(c, unpack(cand), rows)).squaredNorm();
      if (cand_obj <= obj || step.lpNorm<Eigen::Infinity>() * t < opts.step_tol)
        break;
      t *= 0.5;
    }
    theta = cand;
    obj = cand_obj;
    if ((t * step).lpNorm<Eigen::Infinity>() < opts.step_tol) {
      out.converged = true;
      r = z - ac_measure_rows(c, unpack(theta), rows);
      out.state = theta;
      out.residual = r;
      out.objective = r.squaredNorm() / (sigma * sigma);
      out.gradient_norm = (ac_angle_jacobian(c, unpack(theta), &rows).transpose() * r).norm();
      return out;
    }
    r = z - ac_measure_rows(c, unpack(theta), rows);
  }
  out.converged = false;
  out.state = theta;
  out.residual = r;
  out.objective = r.squaredNorm() / (sigma * sigma);
  if (opts.throw_on_divergence)
    throw EstimationError("Gauss-Newton did not converge in " +
                          std::to_string(opts.max_iterations) + " iterations");
  return out;
}

bool j_test(const EstimationResult& r, double tau) { return r.objective > tau; }

double chi2_threshold(int dof, double alpha) {
  if (dof < 1) throw EstimationError("chi2_threshold: dof must be >= 1");
  if (alpha <= 0.0 || alpha >= 1.0)
    throw EstimationError("chi2_threshold: alpha must be in (0,1)");
  boost::math::chi_squared_distribution<double> dist(dof);
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

Vector projector_diagonal(const Matrix& h) {
  const Matrix q1 = orthonormal_range(h);
  Vector w(h.rows());
  for (long i = 0; i < h.rows(); ++i)
    w(i) = std::max(0.0, 1.0 - q1.row(i).squaredNorm());
  return w;
}

NormalizedResidue normalized_residues(const Matrix& h, const Vector& r,
                                      double sigma) {
  if (r.size() != h.rows()) throw EstimationError("residue/matrix row mismatch");
  NormalizedResidue out;
  const Vector w = projector_diagonal(h);
  const double m = static_cast<double>(h.rows());
  // Eq. 8's exact-zero branch via a numerical proxy: zero-leverage rows are
  // those with W_ii below 1e-8 relative to the mean diagonal trace(W)/m.
  const double cut = std::max(1e-8 * w.sum() / m, 1e-14);
  out.omega.resize(w.size());
  out.values.resize(w.size());
  for (long i = 0; i < w.size(); ++i) {
    out.omega(i) = w(i) < cut ? 0.0 : 1.0 / std::sqrt(sigma * sigma * w(i));
    out.values(i) = out.omega(i) * r(i);
  }
  return out;
}

// ------------------------------------------------------------- pipelines

namespace {

// One estimate/detect/identify step; shared by the linear and AC loops.
// `estimate` maps active sensor ids to an EstimationResult; `jacobian` gives
// the model matrix used for the residue normalization at that estimate.
template <typename EstimateFn, typename JacobianFn>
BadDataTrace run_pipeline(std::vector<int> active, int state_dim, double sigma,
                          double alpha, EstimateFn&& estimate,
                          JacobianFn&& jacobian) {
  std::sort(active.begin(), active.end());
  BadDataTrace trace;
  while (true) {
    BadDataIteration it;
    it.active_sensors = active;
    it.estimate = estimate(active);
    const int dof = static_cast<int>(active.size()) - state_dim;
    // A dof<1 system fits exactly; the chi-square test is vacuous there.
    it.threshold = dof >= 1 ? chi2_threshold(dof, alpha) : 0.0;
    it.j_statistic = it.estimate.objective;
    it.detected = dof >= 1 && j_test(it.estimate, it.threshold);
    if (!it.detected) {
      if (dof < 1) trace.halted_unidentifiable = true;
      trace.iterations.push_back(std::move(it));
      return trace;
    }
    const Matrix h = jacobian(active, it.estimate);
    const NormalizedResidue nr = normalized_residues(h, it.estimate.residual, sigma);
    // Largest |normalized residue| wins; `active` stays in ascending sensor-id
    // order, so keeping the first maximum breaks ties toward the lowest id.
    // Zero-leverage sensors (omega = 0) are unpickable.
    int best = -1;
    double best_mag = 0.0;
    for (long i = 0; i < nr.values.size(); ++i) {
      if (nr.omega(i) == 0.0) continue;
      const double mag = std::abs(nr.values(i));
      if (mag > best_mag) {
        best = static_cast<int>(i);
        best_mag = mag;
      }
    }
    if (best < 0) {
      trace.halted_unidentifiable = true;
      trace.iterations.push_back(std::move(it));
      return trace;
    }
    it.removed_sensor = active[static_cast<size_t>(best)];
    trace.removed_sensors.push_back(it.removed_sensor);
    trace.iterations.push_back(std::move(it));
    active.erase(active.begin() + best);
  }
}

}  // namespace

BadDataTrace bad_data_pipeline(const MeasurementMatrix& h, const Vector& z,
                               double sigma, double alpha) {
  if (z.size() != h.entries.rows())
    throw EstimationError("measurement/matrix row mismatch");
  auto estimate = [&](const std::vector<int>& active) {
    const MeasurementMatrix hk = h.select_rows(active);
    Vector zk(static_cast<long>(active.size()));
    for (size_t i = 0; i < active.size(); ++i)
      zk(static_cast<long>(i)) = z(h.row_of(active[i]));
    return linear_wls(hk, zk, sigma);
  };
  auto jacobian = [&](const std::vector<int>& active, const EstimationResult&) {
    return h.select_rows(active).entries;
  };
  return run_pipeline(h.sensor_ids, static_cast<int>(h.entries.cols()), sigma,
                      alpha, estimate, jacobian);
}

BadDataTrace bad_data_pipeline(const GridCase& c, const Vector& z, double sigma,
                               double alpha, const std::vector<int>* subset) {
  std::vector<int> active;
  if (subset) {
    active = *subset;
  } else {
    active.resize(static_cast<size_t>(c.sensor_count()));
    for (int i = 0; i < c.sensor_count(); ++i) active[static_cast<size_t>(i)] = i;
  }
  if (z.size() != static_cast<long>(active.size()))
    throw EstimationError("measurement/subset size mismatch");

  auto estimate = [&](const std::vector<int>& act) {
    Vector zk(static_cast<long>(act.size()));
    for (size_t i = 0; i < act.size(); ++i) {
      const auto pos = std::find(active.begin(), active.end(), act[i]);
      zk(static_cast<long>(i)) = z(pos - active.begin());
    }
    return nonlinear_wls(c, zk, &act, sigma);
  };
  auto jacobian = [&](const std::vector<int>& act, const EstimationResult& est) {
    AcState x = c.operating_state();
    for (int col = 0; col < c.dc_state_dim(); ++col)
      x.angle(c.bus_index(c.state_bus(col))) = est.state(col);
    return ac_angle_jacobian(c, x, &act);
  };
  return run_pipeline(active, c.dc_state_dim(), sigma, alpha, estimate, jacobian);
}

std::string trace_to_text(const BadDataTrace& t, const GridCase* labels) {
  std::ostringstream out;
  out.precision(10);
  for (size_t k = 0; k < t.iterations.size(); ++k) {
    const BadDataIteration& it = t.iterations[k];
    out << "iteration " << k + 1 << ": sensors=" << it.active_sensors.size()
        << " J=" << it.j_statistic << " tau=" << it.threshold
        << (it.detected ? " bad" : " good");
    if (it.removed_sensor >= 0) {
      out << " removed=";
      if (labels)
        out << labels->sensors()[static_cast<size_t>(it.removed_sensor)].label();
      else
        out << it.removed_sensor;
    }
    out << "\n";
  }
  if (t.halted_unidentifiable) out << "halted: no removable sensor\n";
  return out.str();
}

void trace_csv(std::ostream& out, const BadDataTrace& t) {
  out << "iteration,sensors,j_statistic,threshold,detected,removed_sensor\n";
  out.precision(17);
  for (size_t k = 0; k < t.iterations.size(); ++k) {
    const BadDataIteration& it = t.iterations[k];
    out << k + 1 << "," << it.active_sensors.size() << "," << it.j_statistic
        << "," << it.threshold << "," << (it.detected ? 1 : 0) << ","
        << it.removed_sensor << "\n";
  }
}

}  // namespace gridse
