#include "gridse/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace gridse {

std::string SensorSpec::label() const {
  if (kind == Kind::Injection) return "inj:" + std::to_string(bus);
  return "flow:" + std::to_string(bus) + ":" + std::to_string(to);
}

MeasurementMatrix MeasurementMatrix::select_rows(const std::vector<int>& sensors) const {
  MeasurementMatrix out;
  out.state_buses = state_buses;
  out.entries.resize(static_cast<long>(sensors.size()), entries.cols());
  out.sensor_ids = sensors;
  for (size_t k = 0; k < sensors.size(); ++k)
    out.entries.row(static_cast<long>(k)) = entries.row(row_of(sensors[k]));
  return out;
}

MeasurementMatrix MeasurementMatrix::remove_rows(const std::vector<int>& sensors) const {
  std::vector<int> keep;
  for (int id : sensor_ids)
    if (std::find(sensors.begin(), sensors.end(), id) == sensors.end())
      keep.push_back(id);
  return select_rows(keep);
}

int MeasurementMatrix::row_of(int sensor_id) const {
  auto it = std::find(sensor_ids.begin(), sensor_ids.end(), sensor_id);
  if (it == sensor_ids.end())
    throw ModelError("sensor id " + std::to_string(sensor_id) + " not in matrix");
  return static_cast<int>(it - sensor_ids.begin());
}

// ---------------------------------------------------------------- GridCase

GridCase GridCase::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open case file: " + path);
  return parse(in, path);
}

GridCase GridCase::parse(std::istream& in, const std::string& origin) {
  GridCase c;
  bool have_ref = false;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "bus") {
      Bus b;
      if (!(ls >> b.id >> b.magnitude >> b.angle))
        throw ParseError(origin + ": malformed bus record", lineno);
      c.buses_.push_back(b);
    } else if (tok == "ref") {
      if (!(ls >> c.reference_))
        throw ParseError(origin + ": malformed ref record", lineno);
      have_ref = true;
    } else if (tok == "line") {
      Line l;
      double r = 0.0, x = 0.0;
      int status = 1;
      if (!(ls >> l.from >> l.to >> r >> x >> status))
        throw ParseError(origin + ": malformed line record", lineno);
      l.impedance = {r, x};
      l.connected = status != 0;
      c.lines_.push_back(l);
    } else if (tok == "sensor") {
      SensorSpec s;
      std::string kind;
      if (!(ls >> kind)) throw ParseError(origin + ": malformed sensor record", lineno);
      if (kind == "inj") {
        s.kind = SensorSpec::Kind::Injection;
        if (!(ls >> s.bus)) throw ParseError(origin + ": malformed sensor record", lineno);
      } else if (kind == "flow") {
        s.kind = SensorSpec::Kind::Flow;
        if (!(ls >> s.bus >> s.to))
          throw ParseError(origin + ": malformed sensor record", lineno);
      } else {
        throw ParseError(origin + ": unknown sensor kind '" + kind + "'", lineno);
      }
      c.sensors_.push_back(s);
    } else {
      throw ParseError(origin + ": unknown record '" + tok + "'", lineno);
    }
  }
  if (!have_ref) throw ModelError(origin + ": missing ref record");
  c.finalize();
  return c;
}

GridCase GridCase::make(std::vector<Bus> buses, int reference,
                        std::vector<Line> lines, std::vector<SensorSpec> sensors) {
  GridCase c;
  c.buses_ = std::move(buses);
  c.lines_ = std::move(lines);
  c.sensors_ = std::move(sensors);
  c.reference_ = reference;
  c.finalize();
  return c;
}

void GridCase::finalize() {
  if (buses_.empty()) throw ModelError("case has no buses");
  bus_ids_sorted_.clear();
  for (const Bus& b : buses_) bus_ids_sorted_.push_back(b.id);
  std::sort(bus_ids_sorted_.begin(), bus_ids_sorted_.end());
  if (std::adjacent_find(bus_ids_sorted_.begin(), bus_ids_sorted_.end()) !=
      bus_ids_sorted_.end())
    throw ModelError("duplicate bus id");
  bus_pos_.assign(buses_.size(), -1);
  for (size_t i = 0; i < buses_.size(); ++i) {
    auto it = std::lower_bound(bus_ids_sorted_.begin(), bus_ids_sorted_.end(),
                               buses_[i].id);
    bus_pos_[static_cast<size_t>(it - bus_ids_sorted_.begin())] = static_cast<int>(i);
  }
  if (bus_index(reference_) < 0)
    throw ModelError("reference bus " + std::to_string(reference_) + " not in bus list");

  incident_.assign(buses_.size(), {});
  for (size_t li = 0; li < lines_.size(); ++li) {
    const Line& l = lines_[li];
    const int a = bus_index(l.from), b = bus_index(l.to);
    if (a < 0 || b < 0)
      throw ModelError("line " + std::to_string(l.from) + "-" + std::to_string(l.to) +
                       " references a bus absent from the bus list");
    incident_[static_cast<size_t>(a)].push_back(static_cast<int>(li));
    incident_[static_cast<size_t>(b)].push_back(static_cast<int>(li));
  }

  bool ref_covered = false;
  flow_line_.assign(sensors_.size(), -1);
  for (size_t si = 0; si < sensors_.size(); ++si) {
    const SensorSpec& s = sensors_[si];
    if (bus_index(s.bus) < 0)
      throw ModelError("sensor " + s.label() + " references missing bus");
    if (s.kind == SensorSpec::Kind::Flow) {
      const Line* l = line_between(s.bus, s.to);
      if (l == nullptr)
        throw ModelError("flow sensor " + s.label() + " references a missing line");
      flow_line_[si] = static_cast<int>(l - lines_.data());
      if (s.bus == reference_ || s.to == reference_) ref_covered = true;
    } else if (s.bus == reference_) {
      ref_covered = true;
    }
    for (size_t sj = si + 1; sj < sensors_.size(); ++sj)
      if (sensors_[si] == sensors_[sj])
        throw ModelError("duplicate sensor " + s.label());
  }
  if (!ref_covered)
    throw ModelError("no sensor incident to the reference bus");
}

int GridCase::bus_index(int bus_id) const {
  auto it = std::lower_bound(bus_ids_sorted_.begin(), bus_ids_sorted_.end(), bus_id);
  if (it == bus_ids_sorted_.end() || *it != bus_id) return -1;
  return bus_pos_[static_cast<size_t>(it - bus_ids_sorted_.begin())];
}

int GridCase::state_index(int bus_id) const {
  const int ref_pos = bus_index(reference_);
  const int pos = bus_index(bus_id);
  if (pos < 0) throw ModelError("unknown bus " + std::to_string(bus_id));
  if (pos == ref_pos) return -1;
  return pos < ref_pos ? pos : pos - 1;
}

int GridCase::state_bus(int column) const {
  const int ref_pos = bus_index(reference_);
  const int pos = column < ref_pos ? column : column + 1;
  return buses_[static_cast<size_t>(pos)].id;
}

const std::vector<int>& GridCase::lines_at(int bus_id) const {
  const int pos = bus_index(bus_id);
  if (pos < 0) throw ModelError("unknown bus " + std::to_string(bus_id));
  return incident_[static_cast<size_t>(pos)];
}

const Line* GridCase::line_between(int i, int j) const {
  for (const Line& l : lines_)
    if ((l.from == i && l.to == j) || (l.from == j && l.to == i)) return &l;
  return nullptr;
}

int GridCase::sensor_id(const SensorSpec& s) const {
  for (size_t i = 0; i < sensors_.size(); ++i)
    if (sensors_[i] == s) return static_cast<int>(i);
  return -1;
}

int GridCase::flow_line(int sensor_id) const {
  const int li = flow_line_.at(static_cast<size_t>(sensor_id));
  if (li < 0) throw ModelError("sensor is not a flow sensor");
  return li;
}

int GridCase::sensor_id_or_throw(const std::string& label) const {
  SensorSpec s;
  std::istringstream ls(label);
  std::string kind, field;
  std::getline(ls, kind, ':');
  if (kind == "inj") {
    s.kind = SensorSpec::Kind::Injection;
    if (!(ls >> s.bus)) throw ModelError("bad sensor label: " + label);
  } else if (kind == "flow") {
    s.kind = SensorSpec::Kind::Flow;
    std::getline(ls, field, ':');
    s.bus = std::stoi(field);
    std::getline(ls, field);
    s.to = std::stoi(field);
  } else {
    throw ModelError("bad sensor label: " + label);
  }
  const int id = sensor_id(s);
  if (id < 0) throw ModelError("sensor not in case: " + label);
  return id;
}

AcState GridCase::operating_state() const {
  AcState x;
  x.magnitude.resize(bus_count());
  x.angle.resize(bus_count());
  for (int i = 0; i < bus_count(); ++i) {
    x.magnitude(i) = buses_[static_cast<size_t>(i)].magnitude;
    x.angle(i) = buses_[static_cast<size_t>(i)].angle;
  }
  return x;
}

// -------------------------------------------------------------- AC model

namespace {

// Real power flowing from bus `a` toward bus `b` over line l (a is one of
// the endpoints). Zero when the line is disconnected.
double line_real_flow(const GridCase& c, const Line& l, int a, const AcState& x) {
  if (!l.connected) return 0.0;
  if (std::abs(l.impedance) == 0.0)
    throw ModelError("zero impedance on connected line " + std::to_string(l.from) +
                     "-" + std::to_string(l.to));
  const int b = l.from == a ? l.to : l.from;
  const int ia = c.bus_index(a), ib = c.bus_index(b);
  const std::complex<double> ea = std::polar(x.magnitude(ia), x.angle(ia));
  const std::complex<double> eb = std::polar(x.magnitude(ib), x.angle(ib));
  return (ea * std::conj((ea - eb) / l.impedance)).real();
}

double sensor_value(const GridCase& c, int sensor_id, const AcState& x) {
  const SensorSpec& s = c.sensors()[static_cast<size_t>(sensor_id)];
  if (s.kind == SensorSpec::Kind::Flow) {
    const Line& l = c.lines()[static_cast<size_t>(c.flow_line(sensor_id))];
    return line_real_flow(c, l, s.bus, x);
  }
  double p = 0.0;
  for (int li : c.lines_at(s.bus))
    p += line_real_flow(c, c.lines()[static_cast<size_t>(li)], s.bus, x);
  return p;
}

}  // namespace

Vector ac_measure(const GridCase& c, const AcState& x) {
  if (x.magnitude.size() != c.bus_count() || x.angle.size() != c.bus_count())
    throw ModelError("state dimension mismatch");
  Vector z(c.sensor_count());
  for (int k = 0; k < c.sensor_count(); ++k) z(k) = sensor_value(c, k, x);
  return z;
}

// -------------------------------------------------------------- DC model

namespace {

// Adds the DC terms of a flow from bus a to bus b over line l into row `r`.
void add_dc_flow(const GridCase& c, const Line& l, int a, Matrix& m, long r) {
  if (!l.connected) return;
  const int b = l.from == a ? l.to : l.from;
  const double susceptance = l.susceptance();
  const int ca = c.state_index(a), cb = c.state_index(b);
  if (ca >= 0) m(r, ca) += susceptance;
  if (cb >= 0) m(r, cb) -= susceptance;
}

}  // namespace

MeasurementMatrix dc_jacobian(const GridCase& c, const std::vector<int>* subset) {
  std::vector<int> rows;
  if (subset) {
    rows = *subset;
    for (int id : rows)
      if (id < 0 || id >= c.sensor_count())
        throw ModelError("sensor id out of range: " + std::to_string(id));
  } else {
    rows.resize(static_cast<size_t>(c.sensor_count()));
    for (int i = 0; i < c.sensor_count(); ++i) rows[static_cast<size_t>(i)] = i;
  }

  MeasurementMatrix H;
  H.sensor_ids = rows;
  for (int col = 0; col < c.dc_state_dim(); ++col)
    H.state_buses.push_back(c.state_bus(col));
  H.entries = Matrix::Zero(static_cast<long>(rows.size()), c.dc_state_dim());

  for (size_t k = 0; k < rows.size(); ++k) {
    const SensorSpec& s = c.sensors()[static_cast<size_t>(rows[k])];
    const long r = static_cast<long>(k);
    if (s.kind == SensorSpec::Kind::Flow) {
      add_dc_flow(c, c.lines()[static_cast<size_t>(c.flow_line(rows[k]))], s.bus,
                  H.entries, r);
    } else {
      for (int li : c.lines_at(s.bus))
        add_dc_flow(c, c.lines()[static_cast<size_t>(li)], s.bus, H.entries, r);
    }
  }
  return H;
}

Matrix ac_angle_jacobian(const GridCase& c, const AcState& x,
                         const std::vector<int>* subset) {
  std::vector<int> rows;
  if (subset) {
    rows = *subset;
  } else {
    rows.resize(static_cast<size_t>(c.sensor_count()));
    for (int i = 0; i < c.sensor_count(); ++i) rows[static_cast<size_t>(i)] = i;
  }
  Matrix J = Matrix::Zero(static_cast<long>(rows.size()), c.dc_state_dim());

  // dP(a->b)/dtheta_a = Va*Vb*(g sin d - b cos d), dP/dtheta_b = -that,
  // with d = theta_a - theta_b and y = 1/Z = g + jb.
  auto add_flow = [&](const Line& l, int a, long r) {
    if (!l.connected) return;
    const int b = l.from == a ? l.to : l.from;
    const int ia = c.bus_index(a), ib = c.bus_index(b);
    const std::complex<double> y = 1.0 / l.impedance;
    const double d = x.angle(ia) - x.angle(ib);
    const double slope = x.magnitude(ia) * x.magnitude(ib) *
                         (y.real() * std::sin(d) - y.imag() * std::cos(d));
    const int ca = c.state_index(a), cb = c.state_index(b);
    if (ca >= 0) J(r, ca) += slope;
    if (cb >= 0) J(r, cb) -= slope;
  };

  for (size_t k = 0; k < rows.size(); ++k) {
    const SensorSpec& s = c.sensors()[static_cast<size_t>(rows[k])];
    const long r = static_cast<long>(k);
    if (s.kind == SensorSpec::Kind::Flow) {
      add_flow(c.lines()[static_cast<size_t>(c.flow_line(rows[k]))], s.bus, r);
    } else {
      for (int li : c.lines_at(s.bus))
        add_flow(c.lines()[static_cast<size_t>(li)], s.bus, r);
    }
  }
  return J;
}

// -------------------------------------------------------------- sampling

double sigma_for_snr(const GridCase& c, double snr_db) {
  const Vector z0 = ac_measure(c, c.operating_state());
  const double mean_sq = z0.squaredNorm() / static_cast<double>(z0.size());
  return std::sqrt(mean_sq / std::pow(10.0, snr_db / 10.0));
}

std::vector<Vector> sample_measurements(const GridCase& c, int count,
                                        const StateSampling& sampling,
                                        double noise_std, std::uint64_t seed) {
  if (noise_std <= 0.0) throw ModelError("noise std must be positive");
  if (sampling.angle_std < 0.0 || sampling.magnitude_std < 0.0)
    throw ModelError("state covariance must be positive semidefinite");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const AcState op = c.operating_state();
  const int ref = c.bus_index(c.reference_bus());

  std::vector<Vector> out;
  out.reserve(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) {
    AcState x = op;
    for (int i = 0; i < c.bus_count(); ++i) {
      x.magnitude(i) += sampling.magnitude_std * gauss(rng);
      if (i != ref) x.angle(i) += sampling.angle_std * gauss(rng);
    }
    Vector z = ac_measure(c, x);
    for (int i = 0; i < z.size(); ++i) z(i) += noise_std * gauss(rng);
    out.push_back(std::move(z));
  }
  return out;
}

ReducedNetwork reduced_network(const GridCase& c, const std::vector<int>& observed) {
  if (observed.empty()) throw ModelError("empty observed sensor set");
  std::vector<char> line_in(static_cast<size_t>(c.line_count()), 0);
  for (int id : observed) {
    if (id < 0 || id >= c.sensor_count())
      throw ModelError("sensor id out of range: " + std::to_string(id));
    const SensorSpec& s = c.sensors()[static_cast<size_t>(id)];
    if (s.kind == SensorSpec::Kind::Flow) {
      const Line* l = c.line_between(s.bus, s.to);
      if (l->connected)
        line_in[static_cast<size_t>(l - c.lines().data())] = 1;
    } else {
      for (int li : c.lines_at(s.bus))
        if (c.lines()[static_cast<size_t>(li)].connected)
          line_in[static_cast<size_t>(li)] = 1;
    }
  }
  ReducedNetwork r;
  r.sensors = observed;
  std::vector<int> verts;
  for (int li = 0; li < c.line_count(); ++li) {
    if (!line_in[static_cast<size_t>(li)]) continue;
    r.lines.push_back(li);
    verts.push_back(c.lines()[static_cast<size_t>(li)].from);
    verts.push_back(c.lines()[static_cast<size_t>(li)].to);
  }
  std::sort(verts.begin(), verts.end());
  verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
  r.vertices = std::move(verts);
  return r;
}

void write_measurement_csv(std::ostream& out, const GridCase& c,
                           const std::vector<Vector>& samples) {
  for (int i = 0; i < c.sensor_count(); ++i)
    out << (i ? "," : "") << c.sensors()[static_cast<size_t>(i)].label();
  out << "\n";
  out.precision(17);
  for (const Vector& z : samples) {
    for (int i = 0; i < z.size(); ++i) out << (i ? "," : "") << z(i);
    out << "\n";
  }
}

std::vector<int> parse_sensor_labels(const GridCase& c, const std::string& csv_list) {
  std::vector<int> ids;
  std::istringstream ss(csv_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    ids.push_back(c.sensor_id_or_throw(item.substr(b, e - b + 1)));
  }
  return ids;
}

}  // namespace gridse
