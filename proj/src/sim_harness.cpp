#include "gridse/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "gridse/observability.hpp"

namespace gridse {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // SplitMix64 step on base + golden-ratio increments.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

AttackKind parse_kind(const std::string& v, bool& known_h) {
  std::string base = v;
  known_h = false;
  const std::string suffix = "-known-h";
  if (base.size() > suffix.size() &&
      base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    known_h = true;
    base.resize(base.size() - suffix.size());
  }
  if (base == "none") return AttackKind::None;
  if (base == "unobservable-full") return AttackKind::UnobservableFull;
  if (base == "unobservable-partial") return AttackKind::UnobservablePartial;
  if (base == "framing-full") return AttackKind::FramingFull;
  if (base == "framing-partial") return AttackKind::FramingPartial;
  throw ModelError("unknown attack kind: " + v);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

Scenario parse_scenario(std::istream& in, const std::string& name) {
  Scenario s;
  s.name = name;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const auto eq = raw.find('=');
    if (eq == std::string::npos) {
      if (raw.find_first_not_of(" \t\r") != std::string::npos)
        throw ParseError(name + ": expected key=value", lineno);
      continue;
    }
    auto trim = [](std::string t) {
      const auto b = t.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = t.find_last_not_of(" \t\r");
      return t.substr(b, e - b + 1);
    };
    const std::string key = trim(raw.substr(0, eq));
    const std::string val = trim(raw.substr(eq + 1));
    try {
      if (key == "case") s.case_path = val;
      else if (key == "attack") s.kind = parse_kind(val, s.known_h);
      else if (key == "adversary") s.adversary = split_list(val);
      else if (key == "framed") s.framed = split_list(val);
      else if (key == "observed") s.observed = split_list(val);
      else if (key == "critical") s.critical = split_list(val);
      else if (key == "critical1") s.critical1 = split_list(val);
      else if (key == "critical2") s.critical2 = split_list(val);
      else if (key == "snr_db") s.snr_db = std::stod(val);
      else if (key == "alpha") s.alpha = std::stod(val);
      else if (key == "train_k") s.train_k = std::stoi(val);
      else if (key == "runs") s.runs = std::stoi(val);
      else if (key == "seed") s.seed = std::stoull(val);
      else if (key == "state_angle_std") s.state_angle_std = std::stod(val);
      else if (key == "state_mag_std") s.state_mag_std = std::stod(val);
      else if (key == "train") s.train_fresh = (val != "once");
      else if (key == "magnitudes") {
        s.magnitudes.clear();
        for (const std::string& item : split_list(val))
          s.magnitudes.push_back(std::stod(item));
      } else {
        throw ModelError("unknown scenario key: " + key);
      }
    } catch (const std::invalid_argument&) {
      throw ParseError(name + ": bad value for " + key, lineno);
    }
  }
  for (double mag : s.magnitudes)
    if (mag <= 0.0) throw ModelError(name + ": magnitudes must be positive");
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open scenario file: " + path);
  auto slash = path.find_last_of('/');
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem.resize(dot);
  return parse_scenario(in, stem);
}

// ----------------------------------------------------------------- runner

namespace {

struct ResolvedSets {
  std::vector<int> adversary;  // sensors carrying the attack (S_A, C, or C_1)
  std::vector<int> framed;     // sensors meant to be removed (S_F or C_2)
  std::vector<int> basis_rows; // rows the adversary observes
  int subspace_dim = 0;
};

ResolvedSets resolve_sets(const GridCase& c, const Scenario& s) {
  auto ids = [&](const std::vector<std::string>& labels) {
    std::vector<int> out;
    for (const std::string& l : labels) out.push_back(c.sensor_id_or_throw(l));
    return out;
  };
  ResolvedSets r;
  switch (s.kind) {
    case AttackKind::None:
      break;
    case AttackKind::UnobservableFull: {
      r.adversary = ids(s.adversary);
      if (r.adversary.empty()) throw ModelError("unobservable-full needs adversary=");
      for (int i = 0; i < c.sensor_count(); ++i) r.basis_rows.push_back(i);
      r.subspace_dim = c.dc_state_dim();
      break;
    }
    case AttackKind::UnobservablePartial: {
      r.adversary = ids(s.critical);
      r.basis_rows = ids(s.observed);
      if (r.adversary.empty() || r.basis_rows.empty())
        throw ModelError("unobservable-partial needs observed= and critical=");
      const MeasurementMatrix h_o = dc_jacobian(c, &r.basis_rows);
      r.subspace_dim = static_cast<int>(affected_states(h_o).size());
      break;
    }
    case AttackKind::FramingFull: {
      r.adversary = ids(s.adversary);
      r.framed = ids(s.framed);
      if (r.adversary.empty() || r.framed.empty())
        throw ModelError("framing-full needs adversary= and framed=");
      for (int i = 0; i < c.sensor_count(); ++i) r.basis_rows.push_back(i);
      r.subspace_dim = c.dc_state_dim();
      break;
    }
    case AttackKind::FramingPartial: {
      r.adversary = ids(s.critical1);
      r.framed = ids(s.critical2);
      std::vector<int> observed = ids(s.observed);
      if (r.adversary.empty() || r.framed.empty() || observed.empty())
        throw ModelError("framing-partial needs observed=, critical1=, critical2=");
      // The adversary never sees the to-be-framed sensors' rows.
      for (int id : observed)
        if (std::find(r.framed.begin(), r.framed.end(), id) == r.framed.end())
          r.basis_rows.push_back(id);
      const MeasurementMatrix h_o = dc_jacobian(c, &observed);
      r.subspace_dim = static_cast<int>(affected_states(h_o).size());
      break;
    }
  }
  for (int id : r.adversary)
    if (std::find(r.framed.begin(), r.framed.end(), id) != r.framed.end())
      throw ModelError("adversary and framed sets must be disjoint");
  return r;
}

AttackPlan make_plan(const SubspaceBasis& basis, const ResolvedSets& sets,
                     const Scenario& s) {
  AttackOptions opts;
  if (!s.known_h) {
    opts.feasibility_tol = 1.0;  // feasibility is a scenario property
    opts.null_gap_factor = 0.0;
  }
  AttackPlan plan;
  switch (s.kind) {
    case AttackKind::UnobservableFull:
      plan = unobservable_attack_full(basis, sets.adversary, opts);
      break;
    case AttackKind::UnobservablePartial:
      plan = unobservable_attack_partial(basis, sets.adversary, opts);
      break;
    case AttackKind::FramingFull: {
      double eps1 = -1.0;
      if (!s.known_h) {
        // Estimated bases lift the near-null singular values of U_2 above
        // the 1e-3 default; pick the threshold inside the spectral gap.
        std::vector<int> drop;
        for (int id : sets.adversary) drop.push_back(basis.row_of(id));
        for (int id : sets.framed) drop.push_back(basis.row_of(id));
        const SmallestSingular ss = smallest_right_singular(drop_rows(basis.basis, drop));
        eps1 = std::sqrt(std::max(ss.sigma_min, 1e-300) * std::max(ss.sigma_max, 1e-300));
      }
      plan = solve_framing_qcqp(
          build_framing_problem(basis, sets.adversary, sets.framed, eps1));
      break;
    }
    case AttackKind::FramingPartial:
      plan = framing_attack_partial(basis, sets.adversary, opts);
      plan.framed = sets.framed;
      break;
    case AttackKind::None:
      break;
  }
  return plan;
}

struct RunDraw {
  Vector theta_true;  // non-reference angles
  Vector z;           // noisy measurements, full sensor order
};

RunDraw draw_run(const GridCase& c, const Scenario& s, double sigma,
                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  AcState x = c.operating_state();
  const int ref = c.bus_index(c.reference_bus());
  for (int i = 0; i < c.bus_count(); ++i) {
    x.magnitude(i) += s.state_mag_std * gauss(rng);
    if (i != ref) x.angle(i) += s.state_angle_std * gauss(rng);
  }
  RunDraw d;
  d.z = ac_measure(c, x);
  for (long i = 0; i < d.z.size(); ++i) d.z(i) += sigma * gauss(rng);
  d.theta_true.resize(c.dc_state_dim());
  for (int col = 0; col < c.dc_state_dim(); ++col)
    d.theta_true(col) = x.angle(c.bus_index(c.state_bus(col)));
  return d;
}

std::vector<Vector> training_window(const GridCase& c, const Scenario& s,
                                    double sigma, std::uint64_t seed,
                                    const std::vector<int>& rows) {
  StateSampling sampling;
  sampling.angle_std = s.state_angle_std;
  sampling.magnitude_std = s.state_mag_std;
  std::vector<Vector> full = sample_measurements(c, s.train_k, sampling, sigma, seed);
  if (static_cast<int>(rows.size()) == c.sensor_count()) return full;
  std::vector<Vector> out;
  out.reserve(full.size());
  for (const Vector& z : full) {
    Vector zr(static_cast<long>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) zr(static_cast<long>(i)) = z(rows[i]);
    out.push_back(std::move(zr));
  }
  return out;
}

struct Accumulator {
  std::vector<double> errors;
  int detections = 0;
  int final_pass = 0;
  double framed_removed = 0.0;
  double adversary_removed = 0.0;

  void add(const BadDataTrace& trace, const Vector& theta_true,
           const std::vector<int>& framed, const std::vector<int>& adversary) {
    errors.push_back((trace.final_estimate().state - theta_true).norm());
    if (trace.iterations.front().detected) ++detections;
    if (!trace.halted_unidentifiable && !trace.iterations.back().detected)
      ++final_pass;
    auto overlap = [&](const std::vector<int>& set) {
      if (set.empty()) return 0.0;
      int hit = 0;
      for (int id : trace.removed_sensors)
        if (std::find(set.begin(), set.end(), id) != set.end()) ++hit;
      return static_cast<double>(hit) / static_cast<double>(set.size());
    };
    framed_removed += overlap(framed);
    adversary_removed += overlap(adversary);
  }

  MetricsRow row(double magnitude, double baseline_mean) const {
    MetricsRow r;
    const double n = static_cast<double>(errors.size());
    r.magnitude = magnitude;
    double mean = 0.0;
    for (double e : errors) mean += e;
    mean /= n;
    double var = 0.0;
    for (double e : errors) var += (e - mean) * (e - mean);
    var = n > 1 ? var / (n - 1) : 0.0;
    r.mean_error = mean;
    r.stderr_mean = std::sqrt(var / n);
    r.normalized_error = baseline_mean > 0 ? mean / baseline_mean : 0.0;
    r.detection_rate = detections / n;
    r.final_pass_rate = final_pass / n;
    r.framed_removed_rate = framed_removed / n;
    r.adversary_removed_rate = adversary_removed / n;
    return r;
  }
};

}  // namespace

MetricsTable run_scenario(const Scenario& s) {
  const GridCase c = GridCase::load(s.case_path);
  const double sigma = sigma_for_snr(c, s.snr_db);
  const ResolvedSets sets = resolve_sets(c, s);

  SubspaceBasis exact;
  if (s.kind != AttackKind::None && s.known_h) {
    const MeasurementMatrix h = dc_jacobian(c, &sets.basis_rows);
    exact = exact_basis(h);
  }
  AttackPlan known_plan;
  if (s.kind != AttackKind::None && s.known_h)
    known_plan = make_plan(exact, sets, s);

  SubspaceBasis trained_once;
  bool have_trained_once = false;

  Accumulator baseline;
  std::vector<Accumulator> per_magnitude(s.magnitudes.size());

  for (int run = 0; run < s.runs; ++run) {
    const RunDraw d = draw_run(c, s, sigma, derive_seed(s.seed, 2 * run));

    AttackPlan plan;
    if (s.kind != AttackKind::None) {
      if (s.known_h) {
        plan = known_plan;
      } else if (s.train_fresh || !have_trained_once) {
        const std::uint64_t tseed =
            derive_seed(s.seed, s.train_fresh ? 2 * run + 1 : 1);
        std::vector<Vector> window =
            training_window(c, s, sigma, tseed, sets.basis_rows);
        SubspaceBasis u = estimate_subspace(window, sets.subspace_dim, sets.basis_rows);
        if (!s.train_fresh) {
          trained_once = u;
          have_trained_once = true;
        }
        plan = make_plan(u, sets, s);
        if (!s.train_fresh) known_plan = plan;
      } else {
        plan = known_plan;
      }
    }

    baseline.add(bad_data_pipeline(c, d.z, sigma, s.alpha), d.theta_true,
                 sets.framed, sets.adversary);
    for (size_t mi = 0; mi < s.magnitudes.size(); ++mi) {
      const double eta = eta_for_relative_magnitude(d.z, plan, s.magnitudes[mi]);
      const Vector zbar = apply_attack(d.z, plan, eta);
      per_magnitude[mi].add(bad_data_pipeline(c, zbar, sigma, s.alpha),
                            d.theta_true, sets.framed, sets.adversary);
    }
  }

  MetricsTable t;
  MetricsRow base = baseline.row(0.0, 0.0);
  const double base_mean = base.mean_error;
  base.normalized_error = 1.0;
  t.rows.push_back(base);
  for (size_t mi = 0; mi < s.magnitudes.size(); ++mi)
    t.rows.push_back(per_magnitude[mi].row(s.magnitudes[mi], base_mean));
  return t;
}

ComparisonTable compare_methods(const std::vector<Scenario>& scenarios) {
  if (scenarios.empty()) throw ModelError("compare: no scenarios");
  ComparisonTable out;
  out.magnitudes = scenarios.front().magnitudes;
  for (const Scenario& s : scenarios) {
    if (s.case_path != scenarios.front().case_path)
      throw ModelError("compare: scenarios use different cases");
    if (s.magnitudes != out.magnitudes)
      throw ModelError("compare: magnitude grids differ");
    out.names.push_back(s.name);
    out.rows.push_back(run_scenario(s).rows);
  }
  return out;
}

void write_metrics_csv(std::ostream& out, const MetricsTable& t) {
  out << "magnitude,mean_error,normalized_error,stderr,detection_rate,"
         "framed_removed_rate,adversary_removed_rate\n";
  out.precision(12);
  for (const MetricsRow& r : t.rows)
    out << r.magnitude << "," << r.mean_error << "," << r.normalized_error << ","
        << r.stderr_mean << "," << r.detection_rate << ","
        << r.framed_removed_rate << "," << r.adversary_removed_rate << "\n";
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& t) {
  out << "magnitude";
  for (const std::string& n : t.names) out << ",normalized_error_" << n;
  for (size_t i = 1; i < t.names.size(); ++i) out << ",rel_diff_" << t.names[i];
  out << "\n";
  out.precision(12);
  // row 0 is the baseline in every table
  for (size_t ri = 0; ri < t.rows.front().size(); ++ri) {
    out << t.rows.front()[ri].magnitude;
    for (const auto& rows : t.rows) out << "," << rows[ri].normalized_error;
    const double ref = t.rows.front()[ri].normalized_error;
    for (size_t i = 1; i < t.rows.size(); ++i)
      out << ","
          << (ref > 0 ? (t.rows[i][ri].normalized_error - ref) / ref : 0.0);
    out << "\n";
  }
  out.flush();
}

}  // namespace gridse
