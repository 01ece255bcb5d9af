#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gridse/estimation.hpp"
#include "gridse/grid_model.hpp"
#include "gridse/observability.hpp"
#include "gridse/sim_harness.hpp"
#include "gridse/subspace_attack.hpp"

namespace {

std::ostream& open_out(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw gridse::ModelError("cannot open output file: " + path);
  return file;
}

int run_command(const std::string& scn, const std::string& out_path,
                std::int64_t seed_override) {
  gridse::Scenario s = gridse::load_scenario(scn);
  if (seed_override >= 0) s.seed = static_cast<std::uint64_t>(seed_override);
  const gridse::MetricsTable table = gridse::run_scenario(s);
  std::ofstream file;
  gridse::write_metrics_csv(open_out(file, out_path), table);
  return 0;
}

int compare_command(const std::vector<std::string>& scns,
                    const std::string& out_path, std::int64_t seed_override) {
  std::vector<gridse::Scenario> scenarios;
  for (const std::string& p : scns) {
    scenarios.push_back(gridse::load_scenario(p));
    if (seed_override >= 0)
      scenarios.back().seed = static_cast<std::uint64_t>(seed_override);
  }
  const gridse::ComparisonTable table = gridse::compare_methods(scenarios);
  std::ofstream file;
  gridse::write_comparison_csv(open_out(file, out_path), table);
  return 0;
}

int check_command(const std::string& case_path, const std::string& adversary,
                  const std::string& observed, const std::string& critical) {
  const gridse::GridCase c = gridse::GridCase::load(case_path);
  const gridse::MeasurementMatrix h = gridse::dc_jacobian(c);

  std::vector<int> all_sensors;
  for (int i = 0; i < c.sensor_count(); ++i) all_sensors.push_back(i);
  gridse::ObservabilityReport full = gridse::spanning_tree_observable(c, all_sensors);
  std::cout << "system: " << (gridse::is_observable(h) ? "observable" : "unobservable")
            << " (rank " << gridse::numeric_rank(h.entries) << " of "
            << c.dc_state_dim() << "), spanning-tree criterion "
            << (full.observable ? "holds" : "fails") << "\n";

  bool feasible_needed = false, feasible = true;
  if (!adversary.empty()) {
    feasible_needed = true;
    const auto ids = gridse::parse_sensor_labels(c, adversary);
    const bool ok = gridse::attack_feasible(h, ids);
    const bool crit = ok && gridse::is_critical_set(h, ids);
    std::cout << "adversary set: unobservable attack "
              << (ok ? "feasible" : "infeasible")
              << (ok ? (crit ? " (critical set)" : " (not critical)") : "") << "\n";
    feasible = feasible && ok;
  }
  if (!observed.empty() && !critical.empty()) {
    feasible_needed = true;
    const auto obs = gridse::parse_sensor_labels(c, observed);
    const auto crit = gridse::parse_sensor_labels(c, critical);
    const bool partial = gridse::check_partial_conditions(c, obs, crit);
    const bool graph = gridse::check_graph_conditions(c, obs, crit);
    std::cout << "partial conditions: " << (partial ? "feasible" : "infeasible")
              << "; graph conditions: " << (graph ? "hold" : "fail") << "\n";
    const gridse::ReducedNetwork net = gridse::reduced_network(c, obs);
    std::cout << gridse::report_to_text(gridse::spanning_tree_observable(c, net), &c);
    feasible = feasible && partial;
  }
  return feasible_needed && !feasible ? 2 : 0;
}

int train_command(const std::string& case_path, int k, int dim, double snr_db,
                  std::uint64_t seed, const std::string& out_path) {
  const gridse::GridCase c = gridse::GridCase::load(case_path);
  const double sigma = gridse::sigma_for_snr(c, snr_db);
  const auto samples =
      gridse::sample_measurements(c, k, gridse::StateSampling{0.01, 0.0}, sigma, seed);
  std::vector<int> ids;
  for (int i = 0; i < c.sensor_count(); ++i) ids.push_back(i);
  const int use_dim = dim > 0 ? dim : c.dc_state_dim();
  const gridse::SubspaceBasis u = gridse::estimate_subspace(samples, use_dim, ids);
  std::ofstream file;
  gridse::basis_spectrum_csv(open_out(file, out_path), u);
  std::cerr << "estimated dim (eigengap): "
            << gridse::estimate_dimension(u.singular_values) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid state-estimation and data-attack workbench"};
  app.require_subcommand(1);

  std::string scn, out_path, case_path, adversary, observed, critical;
  std::vector<std::string> scns;
  std::int64_t seed_override = -1;
  std::uint64_t seed = 1;
  int k = 1000, dim = 0;
  double snr_db = 46.0;

  auto* run = app.add_subcommand("run", "Run a scenario, write the metrics CSV");
  run->add_option("scenario", scn, "scenario file")->required();
  run->add_option("--out", out_path, "output CSV (default stdout)");
  run->add_option("--seed", seed_override, "override the scenario seed");

  auto* cmp = app.add_subcommand("compare", "Run scenarios on a shared grid and join them");
  cmp->add_option("scenarios", scns, "scenario files")->required()->expected(-1);
  cmp->add_option("--out", out_path, "output CSV (default stdout)");
  cmp->add_option("--seed", seed_override, "override all scenario seeds");

  auto* chk = app.add_subcommand("check-observability", "Observability and attack-set checks");
  chk->add_option("case", case_path, "case file")->required();
  chk->add_option("--adversary", adversary, "comma-separated sensor labels");
  chk->add_option("--observed", observed, "comma-separated sensor labels");
  chk->add_option("--critical", critical, "comma-separated sensor labels");

  auto* trn = app.add_subcommand("train-subspace", "Estimate a measurement subspace");
  trn->add_option("case", case_path, "case file")->required();
  trn->add_option("K", k, "training sample count")->required();
  trn->add_option("--dim", dim, "subspace dimension (default: state dim)");
  trn->add_option("--snr", snr_db, "sensor SNR in dB");
  trn->add_option("--seed", seed, "sample seed");
  trn->add_option("--out", out_path, "spectrum CSV (default stdout)");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return run_command(scn, out_path, seed_override);
    if (cmp->parsed()) return compare_command(scns, out_path, seed_override);
    if (chk->parsed()) return check_command(case_path, adversary, observed, critical);
    if (trn->parsed()) return train_command(case_path, k, dim, snr_db, seed, out_path);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const gridse::InfeasibleAttack& e) {
    std::cerr << "infeasible attack: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
