#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gridse/estimation.hpp"
#include "test_support.hpp"

using namespace gridse;

namespace {

// ---- independent chi-square oracle: integrate the density numerically and
// invert the upper tail by bisection (no library calls).
double chi2_pdf(double x, int dof) {
  const double k = dof / 2.0;
  return std::exp((k - 1.0) * std::log(x) - x / 2.0 - k * std::log(2.0) -
                  std::lgamma(k));
}

double chi2_upper_tail(double tau, int dof) {
  const double span = std::max(50.0 * std::sqrt(2.0 * dof), 200.0);
  const int n = 200000;
  const double h = span / n;
  double s = chi2_pdf(tau + 1e-300, dof) + chi2_pdf(tau + span, dof);
  for (int i = 1; i < n; ++i)
    s += chi2_pdf(tau + i * h, dof) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double chi2_quantile_oracle(int dof, double alpha) {
  double lo = 0.0, hi = 10.0 * dof + 100.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_upper_tail(mid, dof) > alpha)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

MeasurementMatrix wrap(const Matrix& m) {
  MeasurementMatrix h;
  h.entries = m;
  for (long i = 0; i < m.rows(); ++i) h.sensor_ids.push_back(static_cast<int>(i));
  for (long j = 0; j < m.cols(); ++j) h.state_buses.push_back(static_cast<int>(j));
  return h;
}

// Brute-force normalized residues via the explicit (H^T H)^-1 formula.
Vector brute_force_normalized(const Matrix& h, const Vector& r, double sigma) {
  const Matrix w = Matrix::Identity(h.rows(), h.rows()) -
                   h * (h.transpose() * h).inverse() * h.transpose();
  Vector out(r.size());
  for (long i = 0; i < r.size(); ++i) {
    const double wii = w(i, i);
    out(i) = wii < 1e-8 ? 0.0 : r(i) / std::sqrt(sigma * sigma * wii);
  }
  return out;
}

}  // namespace

TEST_CASE("linear_wls basics") {
  {
    Matrix m(2, 1);
    m << 1, 1;
    const EstimationResult res = linear_wls(wrap(m), (Vector(2) << 1, 3).finished());
    CHECK(res.state(0) == doctest::Approx(2.0));
    CHECK(res.residual(0) == doctest::Approx(-1.0));
    CHECK(res.residual(1) == doctest::Approx(1.0));
  }
  {
    // z in the range space: zero residue
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Matrix m(8, 3);
    for (long i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    Vector x(3);
    x << 0.3, -1.2, 0.5;
    const EstimationResult res = linear_wls(wrap(m), m * x);
    CHECK(res.residual.cwiseAbs().maxCoeff() < 1e-12);
    CHECK((res.state - x).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("linear_wls matches the normal-equation oracle") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  Matrix m(10, 4);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  Vector xstar(4), e(10);
  for (long i = 0; i < 4; ++i) xstar(i) = g(rng);
  for (long i = 0; i < 10; ++i) e(i) = 0.01 * g(rng);
  const Vector z = m * xstar + e;
  const EstimationResult res = linear_wls(wrap(m), z);
  const Vector oracle = (m.transpose() * m).ldlt().solve(m.transpose() * z);
  CHECK((res.state - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("linear_wls rejects rank-deficient systems") {
  Matrix m(3, 2);
  m << 1, 1, 2, 2, 3, 3;
  CHECK_THROWS_AS(linear_wls(wrap(m), Vector::Zero(3)), EstimationError);
}

TEST_CASE("nonlinear_wls recovers a noiseless state") {
  const GridCase& c = ieee14();
  AcState x = c.operating_state();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const int ref = c.bus_index(c.reference_bus());
  for (int i = 0; i < c.bus_count(); ++i)
    if (i != ref) x.angle(i) += 0.02 * g(rng);
  const Vector z = ac_measure(c, x);
  const EstimationResult res = nonlinear_wls(c, z);
  REQUIRE(res.converged);
  for (int col = 0; col < c.dc_state_dim(); ++col)
    CHECK(std::abs(res.state(col) - x.angle(c.bus_index(c.state_bus(col)))) < 1e-6);
  CHECK(res.gradient_norm < 1e-6);
}

TEST_CASE("nonlinear_wls matches linear_wls in the small-signal regime") {
  // Flat operating point, tiny angles: the AC model is linear to well below
  // the comparison tolerance.
  std::vector<Bus> buses;
  for (int b = 1; b <= 4; ++b) buses.push_back(Bus{b, 1.0, 0.0});
  std::vector<Line> lines = {Line{1, 2, {0.01, 0.1}}, Line{2, 3, {0.02, 0.15}},
                             Line{3, 4, {0.0, 0.2}}, Line{4, 1, {0.01, 0.12}}};
  std::vector<SensorSpec> sensors;
  for (int b = 1; b <= 4; ++b)
    sensors.push_back(SensorSpec{SensorSpec::Kind::Injection, b, 0});
  for (const Line& l : lines) {
    sensors.push_back(SensorSpec{SensorSpec::Kind::Flow, l.from, l.to});
    sensors.push_back(SensorSpec{SensorSpec::Kind::Flow, l.to, l.from});
  }
  const GridCase c = GridCase::make(buses, 1, lines, sensors);

  const MeasurementMatrix h = dc_jacobian(c);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  Vector theta(3);
  for (int i = 0; i < 3; ++i) theta(i) = 1e-5 * g(rng);
  Vector z = h.entries * theta;
  for (long i = 0; i < z.size(); ++i) z(i) += 1e-8 * g(rng);

  const EstimationResult lin = linear_wls(h, z);
  const EstimationResult nl = nonlinear_wls(c, z);
  CHECK((lin.state - nl.state).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("j_test is a strict comparison") {
  EstimationResult r;
  r.objective = 0.0;
  CHECK_FALSE(j_test(r, 0.5));
  r.objective = 0.5;
  CHECK_FALSE(j_test(r, 0.5));  // boundary not exceeded
  r.objective = 0.5000001;
  CHECK(j_test(r, 0.5));
}

TEST_CASE("chi2_threshold against the quadrature oracle") {
  CHECK(chi2_threshold(1, 0.05) == doctest::Approx(3.841).epsilon(0.001));
  CHECK(chi2_threshold(10, 0.5) == doctest::Approx(9.342).epsilon(0.001));
  CHECK(chi2_threshold(1, 0.05) == doctest::Approx(chi2_quantile_oracle(1, 0.05)).epsilon(1e-4));
  CHECK(chi2_threshold(10, 0.5) == doctest::Approx(chi2_quantile_oracle(10, 0.5)).epsilon(1e-4));
  CHECK(chi2_threshold(27, 0.04) == doctest::Approx(chi2_quantile_oracle(27, 0.04)).epsilon(1e-4));
  // alpha -> 1 drives the threshold to zero
  CHECK(chi2_threshold(3, 0.999999) < 1e-3);
  CHECK(chi2_threshold(3, 0.2) > chi2_threshold(3, 0.8));
}

TEST_CASE("normalized residues: critical sensor gets zero") {
  Matrix m(3, 2);
  m << 1, 0, 0, 1, 0, 1;  // row 0 uniquely pins state 0
  Vector r(3);
  r << 0.5, 0.2, -0.2;
  const NormalizedResidue nr = normalized_residues(m, r, 1.0);
  CHECK(nr.omega(0) == 0.0);
  CHECK(nr.values(0) == 0.0);
  CHECK(nr.omega(1) > 0.0);
  // r = 0 -> all zero
  const NormalizedResidue zero = normalized_residues(m, Vector::Zero(3), 1.0);
  CHECK(zero.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("normalized residues have unit variance under the null") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  Matrix raw(12, 3);
  for (long i = 0; i < raw.size(); ++i) raw.data()[i] = g(rng);
  const Matrix q = orthonormal_range(raw);
  const MeasurementMatrix h = wrap(q);
  const double sigma = 0.1;
  const int draws = 4000;
  Vector second_moment = Vector::Zero(12);
  for (int d = 0; d < draws; ++d) {
    Vector x(3), e(12);
    for (int i = 0; i < 3; ++i) x(i) = g(rng);
    for (int i = 0; i < 12; ++i) e(i) = sigma * g(rng);
    const EstimationResult res = linear_wls(h, q * x + e);
    const NormalizedResidue nr = normalized_residues(q, res.residual, sigma);
    second_moment += nr.values.cwiseProduct(nr.values);
  }
  second_moment /= draws;
  for (int i = 0; i < 12; ++i)
    CHECK(second_moment(i) == doctest::Approx(1.0).epsilon(0.12));
}

TEST_CASE("normalized residues match the brute-force oracle") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 8 + trial % 12;  // up to 20 sensors
    const int n = 3 + trial % 4;
    Matrix h(m, n);
    for (long i = 0; i < h.size(); ++i) h.data()[i] = g(rng);
    Vector r(m);
    for (int i = 0; i < m; ++i) r(i) = g(rng);
    const NormalizedResidue nr = normalized_residues(h, r, 0.3);
    const Vector oracle = brute_force_normalized(h, r, 0.3);
    CHECK((nr.values - oracle).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("projector invariants: idempotent and annihilates H") {
  const MeasurementMatrix h = dc_jacobian(ieee14());
  const Matrix q = orthonormal_range(h.entries);
  const Matrix w = Matrix::Identity(54, 54) - q * q.transpose();
  CHECK((w * w - w).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((w * h.entries).cwiseAbs().maxCoeff() < 1e-9);
  const Vector wd = projector_diagonal(h.entries);
  CHECK((wd - w.diagonal()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("pipeline removes a gross error first, then passes clean") {
  const GridCase& c = ieee14();
  const MeasurementMatrix h = dc_jacobian(c);
  const double sigma = 0.01;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Vector x(13), z(54);
  for (int i = 0; i < 13; ++i) x(i) = 0.05 * g(rng);
  z = h.entries * x;
  for (int i = 0; i < 54; ++i) z(i) += sigma * g(rng);
  const int victim = c.sensor_id_or_throw("flow:6:11");
  z(victim) += 50.0 * sigma;

  const BadDataTrace t = bad_data_pipeline(h, z, sigma, 0.04);
  REQUIRE(t.iterations.size() >= 2);
  CHECK(t.iterations.front().detected);
  CHECK(t.removed_sensors.front() == victim);
  CHECK_FALSE(t.iterations.back().detected);
  CHECK_FALSE(t.halted_unidentifiable);
  // the identified sensor had the largest brute-force normalized residue
  const EstimationResult first = linear_wls(h, z, sigma);
  const Vector oracle = brute_force_normalized(h.entries, first.residual, sigma);
  int arg = 0;
  for (int i = 1; i < 54; ++i)
    if (std::abs(oracle(i)) > std::abs(oracle(arg))) arg = i;
  CHECK(arg == victim);
  // monotone sensor count: at most m - n iterations
  CHECK(t.iterations.size() <= 54 - 13 + 1);
}

TEST_CASE("pipeline terminates immediately on good data (usual case)") {
  const GridCase& c = ieee14();
  const double sigma = sigma_for_snr(c, 46.0);
  // seeds 40..49 give one natural false alarm at alpha = 0.04
  int clean = 0;
  for (int seed = 40; seed < 50; ++seed) {
    const auto samples =
        sample_measurements(c, 1, StateSampling{0.01, 0.0}, sigma, seed);
    const BadDataTrace t = bad_data_pipeline(c, samples[0], sigma, 0.04);
    if (t.iterations.size() == 1 && !t.iterations.front().detected) ++clean;
  }
  CHECK(clean == 9);
}

TEST_CASE("trace exports") {
  const GridCase& c = ieee14();
  const MeasurementMatrix h = dc_jacobian(c);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Vector z(54);
  for (int i = 0; i < 54; ++i) z(i) = 0.01 * g(rng);
  const BadDataTrace t = bad_data_pipeline(h, z, 0.01, 0.04);
  const std::string text = trace_to_text(t, &c);
  CHECK(text.find("iteration 1") != std::string::npos);
  std::ostringstream csv;
  trace_csv(csv, t);
  CHECK(csv.str().find("j_statistic") != std::string::npos);
}
