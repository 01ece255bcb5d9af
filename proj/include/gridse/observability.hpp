#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridse/grid_model.hpp"

namespace gridse {

enum class SensorRole { Generic, Adversary, Observed, CriticalCandidate, Framed };

struct SensorSet {
  std::vector<int> ids;
  SensorRole role = SensorRole::Generic;
};

/// Spanning tree plus the sensor assigned to each tree edge.
struct TreeWitness {
  std::vector<int> tree_lines;               // indices into GridCase::lines()
  std::vector<std::pair<int, int>> cover;    // (line index, sensor id)
};

struct ObservabilityReport {
  bool observable = false;
  int rank = 0;
  int state_dim = 0;
  std::vector<int> affected_buses;           // for partial queries
  std::optional<TreeWitness> witness;
};

/// Full column rank, numerically (singular values below 1e-8 * sigma_max
/// count as zero).
bool is_observable(const MeasurementMatrix& h);

/// Theorem: an unobservable attack with adversary set S_A is feasible iff
/// removing those rows leaves H column-rank-deficient.
bool attack_feasible(const MeasurementMatrix& h, const std::vector<int>& adversary);

/// Removing C breaks observability while removing any strict subset does not
/// (leave-one-out suffices by rank monotonicity).
bool is_critical_set(const MeasurementMatrix& h, const std::vector<int>& critical);

/// Columns of h with any entry above 1e-12, as bus ids.
std::vector<int> affected_states(const MeasurementMatrix& h);

/// The states in `affected` are uniquely determined by the rows of h.
bool partial_observable(const MeasurementMatrix& h_o, const std::vector<int>& affected);

/// Critical set with respect to (S_o, X_o).
bool is_critical_wrt(const MeasurementMatrix& h_o, const std::vector<int>& affected,
                     const std::vector<int>& critical);

/// Graph-theoretic observability: an assignment of each injection sensor to
/// an incident line exists such that some spanning tree carries at least one
/// sensor per edge. Exact (matroid-intersection search); returns a witness
/// on success.
ObservabilityReport spanning_tree_observable(const GridCase& c,
                                             const std::vector<int>& sensors);

/// Same criterion on the reduced network of an observed sensor subset; the
/// tree must span the reduced vertices and the covering sensors are taken
/// from `cover_sensors` (defaults to the reduced network's own sensor list).
ObservabilityReport spanning_tree_observable(const GridCase& c, const ReducedNetwork& net,
                                             const std::vector<int>* cover_sensors = nullptr);

/// Conditions of the partial-measurement attack theorem:
///  1) X_o observable w.r.t. S_o,  2) C critical w.r.t. (S_o, X_o),
///  3) removing C makes the full system unobservable.
bool check_partial_conditions(const GridCase& c, const std::vector<int>& observed,
                              const std::vector<int>& critical);

/// Graph sufficient conditions: C is exactly the sensor set of a topology
/// cut, and for every s in C the reduced network has a sensor-covered
/// spanning tree using (S_o \ C) + {s}.
bool check_graph_conditions(const GridCase& c, const std::vector<int>& observed,
                            const std::vector<int>& critical);

std::string report_to_text(const ObservabilityReport& r, const GridCase* labels = nullptr);

}  // namespace gridse
