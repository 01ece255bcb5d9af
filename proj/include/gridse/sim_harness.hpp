#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gridse/estimation.hpp"
#include "gridse/grid_model.hpp"
#include "gridse/subspace_attack.hpp"

namespace gridse {

enum class AttackKind {
  None,
  UnobservableFull,
  UnobservablePartial,
  FramingFull,
  FramingPartial,
};

struct Scenario {
  std::string name;
  std::string case_path;
  AttackKind kind = AttackKind::None;
  bool known_h = false;  // exact-basis variant of the attack

  // Sensor sets as labels (inj:i / flow:i:j).
  std::vector<std::string> adversary;   // S_A (full attacks)
  std::vector<std::string> framed;      // S_F (framing-full)
  std::vector<std::string> observed;    // S_o (partial attacks)
  std::vector<std::string> critical;    // C  (unobservable-partial)
  std::vector<std::string> critical1;   // C_1 (framing-partial)
  std::vector<std::string> critical2;   // C_2 (framing-partial)

  double snr_db = 46.0;
  double alpha = 0.04;
  int train_k = 1000;
  std::vector<double> magnitudes;  // relative attack magnitudes, positive
  int runs = 1000;
  std::uint64_t seed = 1;
  double state_angle_std = 0.01;  // rad
  double state_mag_std = 0.0;     // p.u.; fusion center assumes the profile
  bool train_fresh = true;        // fresh training window per run
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(std::istream& in, const std::string& name);

struct MetricsRow {
  double magnitude = 0.0;
  double mean_error = 0.0;        // mean ||theta_hat - theta||_2
  double normalized_error = 0.0;  // ratio to the no-attack baseline
  double stderr_mean = 0.0;
  double detection_rate = 0.0;    // first-iteration J-test detections
  double framed_removed_rate = 0.0;
  double adversary_removed_rate = 0.0;
  double final_pass_rate = 0.0;   // pipeline terminated with a clean J-test
};

struct MetricsTable {
  std::vector<MetricsRow> rows;  // rows[0] is the magnitude-0 baseline
};

MetricsTable run_scenario(const Scenario& s);

struct ComparisonTable {
  std::vector<std::string> names;
  std::vector<double> magnitudes;
  std::vector<std::vector<MetricsRow>> rows;  // [scenario][row incl. baseline]
};

ComparisonTable compare_methods(const std::vector<Scenario>& scenarios);

void write_metrics_csv(std::ostream& out, const MetricsTable& t);
void write_comparison_csv(std::ostream& out, const ComparisonTable& t);

/// Fixed seed-splitting rule so concurrent/derived streams are stable.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace gridse
