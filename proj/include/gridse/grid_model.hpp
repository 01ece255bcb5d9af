#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gridse/linalg.hpp"

namespace gridse {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Bus {
  int id = 0;
  double magnitude = 1.0;  // operating voltage magnitude, p.u.
  double angle = 0.0;      // operating phase angle, rad
};

struct Line {
  int from = 0;
  int to = 0;
  std::complex<double> impedance;  // series impedance, p.u.
  bool connected = true;
  /// DC susceptance B such that the linearized flow from->to is B*(ti - tj).
  double susceptance() const { return -(1.0 / impedance).imag(); }
};

struct SensorSpec {
  enum class Kind { Injection, Flow };
  Kind kind = Kind::Injection;
  int bus = 0;  // injection bus, or measuring end of a flow
  int to = 0;   // flow target bus (ignored for injections)

  std::string label() const;
  bool operator==(const SensorSpec& o) const {
    return kind == o.kind && bus == o.bus && (kind == Kind::Injection || to == o.to);
  }
};

/// AC state: per-bus magnitudes and angles in case bus order. The reference
/// angle is pinned, so the free coordinates number 2n-1.
struct AcState {
  Vector magnitude;
  Vector angle;
};

/// DC measurement matrix with row/column bookkeeping. Rows follow the sensor
/// ids given at construction; columns are the non-reference buses in case
/// order.
struct MeasurementMatrix {
  Matrix entries;
  std::vector<int> sensor_ids;   // row labels
  std::vector<int> state_buses;  // column labels (bus ids, reference omitted)

  MeasurementMatrix select_rows(const std::vector<int>& sensors) const;
  MeasurementMatrix remove_rows(const std::vector<int>& sensors) const;
  int row_of(int sensor_id) const;
};

/// Subgraph induced by a sensor subset: an edge is present iff a flow sensor
/// on it, or an injection at either endpoint, is observed.
struct ReducedNetwork {
  std::vector<int> vertices;  // bus ids
  std::vector<int> lines;     // indices into GridCase::lines()
  std::vector<int> sensors;   // the observed sensor ids
};

class GridCase {
 public:
  static GridCase load(const std::string& path);
  static GridCase parse(std::istream& in, const std::string& origin = "<stream>");
  /// Assemble a case directly (toy networks in tests).
  static GridCase make(std::vector<Bus> buses, int reference,
                       std::vector<Line> lines, std::vector<SensorSpec> sensors);

  int bus_count() const { return static_cast<int>(buses_.size()); }
  int line_count() const { return static_cast<int>(lines_.size()); }
  int sensor_count() const { return static_cast<int>(sensors_.size()); }
  int dc_state_dim() const { return bus_count() - 1; }

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<SensorSpec>& sensors() const { return sensors_; }
  int reference_bus() const { return reference_; }

  int bus_index(int bus_id) const;            // position in buses()
  int state_index(int bus_id) const;          // DC column, -1 for the reference
  int state_bus(int column) const;            // inverse of state_index
  const std::vector<int>& lines_at(int bus_id) const;
  const Line* line_between(int i, int j) const;

  int sensor_id(const SensorSpec& s) const;   // -1 if absent
  int sensor_id_or_throw(const std::string& label) const;
  int flow_line(int sensor_id) const;         // line index of a flow sensor

  AcState operating_state() const;

 private:
  void finalize();  // index maps + invariant checks

  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<SensorSpec> sensors_;
  int reference_ = 0;
  std::vector<std::vector<int>> incident_;          // bus index -> line indices
  std::vector<int> bus_pos_;                        // dense map via sorted ids
  std::vector<int> bus_ids_sorted_;
  std::vector<int> flow_line_;                      // sensor id -> line index (-1 for inj)
};

/// Real power seen by each sensor at the given AC state (per-unit).
Vector ac_measure(const GridCase& c, const AcState& x);

/// Linearized (DC) measurement matrix; optionally restricted to a sensor
/// subset (rows in the given order).
MeasurementMatrix dc_jacobian(const GridCase& c,
                              const std::vector<int>* sensor_subset = nullptr);

/// Jacobian of ac_measure w.r.t. the non-reference angles at the given state.
Matrix ac_angle_jacobian(const GridCase& c, const AcState& x,
                         const std::vector<int>* sensor_subset = nullptr);

struct StateSampling {
  double angle_std = 0.01;      // rad, non-reference buses
  double magnitude_std = 0.005; // p.u., all buses
};

/// Noise sigma giving the requested per-sensor SNR (dB) at the operating
/// state: SNR = 10*log10(mean_k z0_k^2 / sigma^2).
double sigma_for_snr(const GridCase& c, double snr_db);

/// K noisy measurement vectors at i.i.d. Gaussian states around the
/// operating point. Deterministic for a fixed seed.
std::vector<Vector> sample_measurements(const GridCase& c, int count,
                                        const StateSampling& sampling,
                                        double noise_std, std::uint64_t seed);

ReducedNetwork reduced_network(const GridCase& c, const std::vector<int>& observed);

/// CSV dump: header = sensor labels, one row per sample.
void write_measurement_csv(std::ostream& out, const GridCase& c,
                           const std::vector<Vector>& samples);

std::vector<int> parse_sensor_labels(const GridCase& c, const std::string& csv_list);

}  // namespace gridse
