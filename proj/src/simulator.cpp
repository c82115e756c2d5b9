#include "rampq/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rampq/errors.hpp"

namespace rampq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTol = 1e-9;

// Fraction of a step during which a vehicle whose front moves linearly from
// `from` to `to` covers the point 0 (detector at the origin of the frame).
double covered_fraction(double from, double to, double length) {
  if (to <= from) return from >= 0 && from - length <= 0 ? 1.0 : 0.0;
  const double lo = std::max(from, 0.0);
  const double hi = std::min(to, length);
  return hi > lo ? (hi - lo) / (to - from) : 0.0;
}

}  // namespace

void SpeedGrid::add(double t, double x, double v) {
  if (cells == 0 || x < 0) return;
  const int cell = std::min(cells - 1, static_cast<int>(x / cell_m));
  const int bin = static_cast<int>(t / bin_s);
  const std::size_t need = static_cast<std::size_t>(bin + 1) * cells;
  if (sum.size() < need) {
    sum.resize(need, 0.0);
    count.resize(need, 0);
  }
  sum[static_cast<std::size_t>(bin) * cells + cell] += v;
  count[static_cast<std::size_t>(bin) * cells + cell] += 1;
}

Simulator::Simulator(MergeNetwork net, DemandProfile demand, DriverParams drivers,
                     std::uint64_t seed)
    : net_(std::move(net)),
      demand_(std::move(demand)),
      drv_(drivers),
      rng_(seed),
      lanes_(net_.lane_count()),
      pending_(net_.lane_count()) {
  if (!(drv_.dt > 0) || drv_.tau < drv_.dt)
    throw ConfigError("drivers.tau: reaction time must be at least the step length");
  metrics_.speed_grid.cell_m = drv_.heat_cell_m;
  metrics_.speed_grid.bin_s = drv_.heat_bin_s;
  metrics_.speed_grid.cells =
      static_cast<int>(std::ceil(net_.mainline_length() / drv_.heat_cell_m));
}

double Simulator::safe_speed(double v, double gap, double leader_speed) const {
  if (gap == kInf) return kInf;
  return leader_speed +
         (gap - leader_speed * drv_.tau) / ((v + leader_speed) / (2.0 * drv_.decel) + drv_.tau);
}

// Courtesy yielding: the first lane-0 vehicle behind a ramp vehicle on the
// acceleration lane follows it as if it were a leader, provided it can do so
// without braking harder than the comfortable deceleration.
double Simulator::yield_speed(const Vehicle& v) const {
  const auto& accel = lanes_[net_.ramp_lane()];
  double best = kInf;
  for (auto it = accel.rbegin(); it != accel.rend(); ++it) {
    if (it->pos <= net_.ramp_len()) continue;
    const double x = net_.accel_to_mainline(it->pos);
    const double gap = x - it->length - v.pos - drv_.min_gap;
    if (gap < 0) continue;
    const double s = safe_speed(v.speed, gap, it->speed);
    if (s >= v.speed - drv_.decel * drv_.dt) best = std::min(best, s);
    break;
  }
  return best;
}

// Speed adaptation on the acceleration lane: a merging vehicle follows the
// nearest lane-0 vehicle fully ahead of it.
double Simulator::sync_speed(const Vehicle& v) const {
  const double x = net_.accel_to_mainline(v.pos);
  const auto& main = lanes_[0];
  for (auto it = main.rbegin(); it != main.rend(); ++it) {
    const double gap = it->pos - it->length - x - drv_.min_gap;
    if (gap >= 0) return safe_speed(v.speed, gap, it->speed);
  }
  return kInf;
}

double Simulator::next_speed(const Vehicle& v, double v_safe) {
  const double v_max = net_.speed_limit(v.lane);
  const double desired = std::min({v.speed + drv_.accel * drv_.dt, v_safe, v_max});
  const double dawdle = drv_.sigma * drv_.accel * drv_.dt * rng_.uniform();
  return std::max(0.0, desired - dawdle);
}

std::vector<Vehicle> Simulator::spawn_arrivals() {
  std::vector<Vehicle> inserted;
  const DemandRates rates = demand_.rates_at(t_);
  const int ramp = net_.ramp_lane();
  for (int lane = 0; lane < net_.lane_count(); ++lane) {
    const double rate =
        lane == ramp ? rates.ramp : rates.mainline / static_cast<double>(net_.mainline_lanes());
    const double p = std::min(1.0, rate * drv_.dt / 3600.0);
    if (p > 0 && rng_.bernoulli(p)) {
      pending_[lane].push_back(t_);
      ++counters_.demanded;
    }
    if (pending_[lane].empty()) continue;

    const double entry_speed = net_.speed_limit(lane);
    auto& vs = lanes_[lane];
    if (!vs.empty()) {
      const Vehicle& last = vs.back();
      const double gap = last.pos - last.length - drv_.min_gap;
      if (gap < 0 || safe_speed(entry_speed, gap, last.speed) < entry_speed) continue;
    }
    Vehicle v;
    v.id = next_id_++;
    v.lane = lane;
    v.pos = 0.0;
    v.speed = entry_speed;
    v.length = drv_.length;
    v.origin = lane == ramp ? Origin::Ramp : Origin::Mainline;
    v.entry_time = pending_[lane].front();
    pending_[lane].pop_front();
    vs.push_back(v);
    ++counters_.spawned;
    inserted.push_back(v);
  }
  return inserted;
}

void Simulator::advance() {
  const int ramp = net_.ramp_lane();
  const bool red = phase_ == SignalPhase::R;
  const double stop = net_.stop_line_pos();
  const double t_next = t_ + drv_.dt;

  // Speeds from the current state (parallel update), then positions front to
  // back with a spacing clamp against the already-moved leader.
  std::vector<std::vector<double>> new_speed(lanes_.size());
  for (std::size_t l = 0; l < lanes_.size(); ++l) {
    const auto& vs = lanes_[l];
    new_speed[l].resize(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const Vehicle& v = vs[i];
      double v_safe = kInf;
      if (i > 0) {
        const Vehicle& lead = vs[i - 1];
        v_safe = safe_speed(v.speed, lead.pos - lead.length - v.pos - drv_.min_gap, lead.speed);
      }
      if (static_cast<int>(l) == ramp) {
        if (red && v.pos <= stop) v_safe = std::min(v_safe, safe_speed(v.speed, stop - v.pos, 0.0));
        v_safe = std::min(v_safe, safe_speed(v.speed, net_.ramp_end() - v.pos, 0.0));
        if (v.pos > net_.ramp_len()) v_safe = std::min(v_safe, sync_speed(v));
      } else if (l == 0) {
        v_safe = std::min(v_safe, yield_speed(v));
      }
      new_speed[l][i] = next_speed(v, v_safe);
    }
  }

  const double det = net_.detector_pos();
  const int det_lane = net_.detector_lane();
  covered_ = 0.0;
  for (std::size_t l = 0; l < lanes_.size(); ++l) {
    auto& vs = lanes_[l];
    const bool is_ramp = static_cast<int>(l) == ramp;
    double lane_cover = 0.0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      Vehicle& v = vs[i];
      const double old = v.pos;
      double next = old + new_speed[l][i] * drv_.dt;
      double limit = kInf;
      if (i > 0) limit = vs[i - 1].pos - vs[i - 1].length - drv_.min_gap;
      if (is_ramp) {
        if (red && old <= stop) limit = std::min(limit, stop);
        limit = std::min(limit, net_.ramp_end());
      }
      if (next > limit) next = std::max(old, limit);
      v.pos = next;
      v.speed = (next - old) / drv_.dt;
      if (!is_ramp) {
        if (old < det && next >= det) ++downstream_count_;
        if (det_lane < 0 || static_cast<int>(l) == det_lane)
          lane_cover += covered_fraction(old - det, next - det, v.length);
      }
      if (is_ramp && red && old <= stop && next > stop + kTol) {
        std::ostringstream os;
        os << "vehicle " << v.id << " ran the red stop line at t=" << t_next;
        throw SimulationFault(os.str());
      }
    }
    covered_ += std::min(1.0, lane_cover);
  }

  // Exits at the downstream end of the mainline.
  for (int l = 0; l < net_.mainline_lanes(); ++l) {
    auto& vs = lanes_[l];
    auto it = vs.begin();
    while (it != vs.end() && it->pos >= net_.mainline_length()) {
      metrics_.travel.push_back({it->id, it->origin, it->entry_time, t_next});
      ++counters_.exited;
      ++it;
    }
    vs.erase(vs.begin(), it);
  }

  perform_merges();

  t_ = t_next;
  ++steps_;
  check_invariants();

  metrics_.samples.push_back({t_, probe_merge_speed(), probe_ramp_queue(),
                              covered_ / (det_lane < 0 ? net_.mainline_lanes() : 1), downstream_count_});
  for (int l = 0; l < net_.mainline_lanes(); ++l) {
    for (const auto& v : lanes_[l]) metrics_.speed_grid.add(t_ - drv_.dt, v.pos, v.speed);
  }
}

void Simulator::step() {
  spawn_arrivals();
  advance();
}

void Simulator::perform_merges() {
  auto& ramp = lanes_[net_.ramp_lane()];
  auto& target = lanes_[0];
  std::size_t i = 0;
  while (i < ramp.size()) {
    Vehicle& v = ramp[i];
    if (v.pos <= net_.ramp_len()) break;  // sorted: the rest are upstream of the gore
    const double x = net_.accel_to_mainline(v.pos);
    // target is sorted by decreasing pos: first index with pos < x is the lag.
    auto lag_it = std::find_if(target.begin(), target.end(),
                               [x](const Vehicle& o) { return o.pos < x; });
    bool ok = true;
    if (lag_it != target.begin()) {
      const Vehicle& lead = *(lag_it - 1);
      const double lead_gap = lead.pos - lead.length - x - drv_.min_gap;
      ok = lead_gap >= 0 && lead_gap >= v.speed * drv_.tau;
    }
    if (ok && lag_it != target.end()) {
      const double lag_gap = x - v.length - lag_it->pos - drv_.min_gap;
      ok = lag_gap >= 0 && lag_gap >= lag_it->speed * drv_.tau;
    }
    if (!ok) {
      ++i;
      continue;
    }
    Vehicle merged = v;
    merged.lane = 0;
    merged.pos = x;
    target.insert(lag_it, merged);
    ramp.erase(ramp.begin() + static_cast<std::ptrdiff_t>(i));
  }
}

double Simulator::probe_merge_speed() const {
  double sum = 0.0;
  int n = 0;
  for (int l = 0; l < net_.mainline_lanes(); ++l) {
    for (const auto& v : lanes_[l]) {
      if (v.pos >= net_.merge_start() && v.pos <= net_.merge_end()) {
        sum += v.speed;
        ++n;
      }
    }
  }
  return n == 0 ? net_.mainline_speed_limit() : sum / n;
}

double Simulator::probe_ramp_queue() const {
  const double stop = net_.stop_line_pos();
  const auto& vs = lanes_[net_.ramp_lane()];
  std::size_t i = 0;
  while (i < vs.size() && vs[i].pos > stop) ++i;  // past the stop line
  while (i < vs.size() && vs[i].speed >= drv_.queue_speed) ++i;
  if (i == vs.size()) return 0.0;
  std::size_t last = i;
  while (last + 1 < vs.size() && vs[last + 1].speed < drv_.queue_speed) ++last;
  const double rear = vs[last].pos - vs[last].length;
  return std::clamp(stop - rear, 0.0, net_.ramp_len());
}

double Simulator::probe_occupancy(double window_s) const {
  const auto& s = metrics_.samples;
  const std::size_t w = std::min(s.size(), static_cast<std::size_t>(std::llround(window_s / drv_.dt)));
  if (w == 0) return 0.0;
  double occupied = 0.0;
  for (std::size_t k = s.size() - w; k < s.size(); ++k) occupied += s[k].occupancy;
  return occupied / static_cast<double>(w);
}

double Simulator::probe_downstream_flow(double window_s) const {
  const auto& s = metrics_.samples;
  const std::size_t w = std::min(s.size(), static_cast<std::size_t>(std::llround(window_s / drv_.dt)));
  if (w == 0) return 0.0;
  const std::int64_t before = w == s.size() ? 0 : s[s.size() - w - 1].downstream_count;
  const double crossings = static_cast<double>(s.back().downstream_count - before);
  return crossings * 3600.0 / (static_cast<double>(w) * drv_.dt);
}

const Vehicle& Simulator::add_vehicle(int lane, double pos, double speed, Origin origin) {
  if (lane < 0 || lane >= net_.lane_count()) throw ContractError("add_vehicle: bad lane index");
  if (pos < 0 || pos >= net_.lane_end(lane)) throw ContractError("add_vehicle: position off the lane");
  if (speed < 0 || speed > net_.speed_limit(lane)) throw ContractError("add_vehicle: speed out of bounds");
  Vehicle v;
  v.id = next_id_++;
  v.lane = lane;
  v.pos = pos;
  v.speed = speed;
  v.length = drv_.length;
  v.origin = origin;
  v.entry_time = t_;
  auto& vs = lanes_[lane];
  auto it = std::find_if(vs.begin(), vs.end(), [pos](const Vehicle& o) { return o.pos < pos; });
  if (it != vs.begin()) {
    const Vehicle& lead = *(it - 1);
    if (lead.pos - lead.length - drv_.min_gap < pos - kTol)
      throw ContractError("add_vehicle: overlaps the vehicle ahead");
  }
  if (it != vs.end() && pos - v.length - drv_.min_gap < it->pos - kTol)
    throw ContractError("add_vehicle: overlaps the vehicle behind");
  it = vs.insert(it, v);
  ++counters_.demanded;
  ++counters_.spawned;
  return *it;
}

std::vector<Vehicle> Simulator::vehicles() const {
  std::vector<Vehicle> out;
  out.reserve(vehicle_count());
  for (const auto& vs : lanes_) out.insert(out.end(), vs.begin(), vs.end());
  return out;
}

std::size_t Simulator::vehicle_count() const {
  std::size_t n = 0;
  for (const auto& vs : lanes_) n += vs.size();
  return n;
}

void Simulator::check_invariants() const {
  auto fault = [this](const std::string& what) {
    std::ostringstream os;
    os << what << " at t=" << t_;
    throw SimulationFault(os.str());
  };
  if (counters_.spawned != static_cast<std::int64_t>(vehicle_count()) + counters_.exited)
    fault("conservation violated");
  for (std::size_t l = 0; l < lanes_.size(); ++l) {
    const auto& vs = lanes_[l];
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const Vehicle& v = vs[i];
      const double limit = net_.speed_limit(static_cast<int>(l));
      if (!(v.speed >= 0 && v.speed <= limit + kTol))
        fault("speed bound violated by vehicle " + std::to_string(v.id));
      if (v.pos < 0 || v.pos > net_.lane_end(static_cast<int>(l)) + kTol)
        fault("vehicle " + std::to_string(v.id) + " off its lane");
      if (i > 0) {
        const Vehicle& lead = vs[i - 1];
        if (v.pos + drv_.min_gap > lead.pos - lead.length + kTol)
          fault("collision between vehicles " + std::to_string(v.id) + " and " +
                std::to_string(lead.id));
      }
    }
  }
}

}  // namespace rampq
