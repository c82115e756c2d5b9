#include "rampq/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "rampq/errors.hpp"

namespace rampq {

namespace {

int column_of(double x, double length, int cols) {
  return static_cast<int>(std::floor(static_cast<double>(cols) * x / length));
}

double axis_position(const Vehicle& v, const MergeNetwork& net) {
  return v.lane == net.ramp_lane() ? v.pos + net.ramp_raster_offset() : v.pos;
}

}  // namespace

CellIndex signal_cell(const MergeNetwork& net, int cols) {
  const double x = net.stop_line_pos() + net.ramp_raster_offset();
  return {net.ramp_lane(), std::min(cols - 1, column_of(x, net.mainline_length(), cols))};
}

PositionMatrix rasterize(std::span<const Vehicle> vehicles, const MergeNetwork& net,
                         SignalPhase last_action, int cols) {
  const double length = net.mainline_length();
  PositionMatrix m(net.lane_count(), cols);
  for (const auto& v : vehicles) {
    const double x = axis_position(v, net);
    if (v.lane < 0 || v.lane >= net.lane_count() || x < 0 || x >= length) {
      std::ostringstream os;
      os << "vehicle " << v.id << " at lane " << v.lane << ", pos " << v.pos
         << " lies outside the raster extent";
      throw RasterError(os.str());
    }
    m.at(v.lane, column_of(x, length, cols)) = CellValues::kVehicle;
  }
  const CellIndex sig = signal_cell(net, cols);
  m.at(sig.row, sig.col) = signal_value(last_action);
  return m;
}

PositionMatrix downsample(const PositionMatrix& fine, int rows, int cols) {
  if (rows <= 0 || cols <= 0 || fine.rows % rows != 0 || fine.cols % cols != 0) {
    std::ostringstream os;
    os << "downsample: " << fine.rows << "x" << fine.cols << " is not a multiple of " << rows
       << "x" << cols;
    throw ConfigError(os.str());
  }
  const int br = fine.rows / rows;
  const int bc = fine.cols / cols;
  PositionMatrix out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      float value = CellValues::kEmpty;
      bool signal = false;
      for (int i = 0; i < br && !signal; ++i) {
        for (int j = 0; j < bc; ++j) {
          const float x = fine.at(r * br + i, c * bc + j);
          if (x == CellValues::kGreen || x == CellValues::kRed) {
            value = x;
            signal = true;
            break;
          }
          if (x == CellValues::kVehicle) value = CellValues::kVehicle;
        }
      }
      out.at(r, c) = value;
    }
  }
  return out;
}

PositionMatrix StateTensor::frame(int k) const {
  PositionMatrix m(rows, cols);
  const auto n = static_cast<std::ptrdiff_t>(rows) * cols;
  std::copy(data.begin() + k * n, data.begin() + (k + 1) * n, m.cells.begin());
  return m;
}

StateTensor stack_state(std::span<const PositionMatrix> history, int depth) {
  if (history.empty()) throw ContractError("stack_state: no frame observed yet");
  StateTensor s;
  s.frames = depth;
  s.rows = history.front().rows;
  s.cols = history.front().cols;
  const std::size_t n = static_cast<std::size_t>(s.rows) * s.cols;
  s.data.resize(n * depth);
  const int have = static_cast<int>(history.size());
  for (int k = 0; k < depth; ++k) {
    // slot k of depth maps to history index (have - depth + k), clamped at 0
    const int idx = std::max(0, have - depth + k);
    const auto& f = history[idx];
    if (f.rows != s.rows || f.cols != s.cols) throw ContractError("stack_state: frame shapes differ");
    std::copy(f.cells.begin(), f.cells.end(), s.data.begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  return s;
}

CompactFrame CompactFrame::from(const PositionMatrix& m, CellIndex signal) {
  CompactFrame f;
  f.rows = m.rows;
  f.cols = m.cols;
  f.signal_index = static_cast<std::uint32_t>(signal.row * m.cols + signal.col);
  f.signal = m.cells[f.signal_index];
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    if (m.cells[i] == CellValues::kVehicle) f.vehicle_cells.push_back(static_cast<std::uint16_t>(i));
  }
  return f;
}

void CompactFrame::scatter(std::span<float> out) const {
  for (auto i : vehicle_cells) out[i] = CellValues::kVehicle;
  out[signal_index] = signal;
}

PositionMatrix CompactFrame::expand() const {
  PositionMatrix m(rows, cols);
  scatter(m.cells);
  return m;
}

Encoder::Encoder(const MergeNetwork& net, Options opts) : net_(net), opts_(opts) {
  if (opts_.rows_out == 0) opts_.rows_out = net.lane_count();
  if (opts_.supersample < 1) throw ConfigError("encoder.supersample: must be >= 1");
  if (opts_.depth < 1) throw ConfigError("encoder.depth: must be >= 1");
  if (opts_.cols_out * net.lane_count() > 65535)
    throw ConfigError("encoder.cols: raster too large for compact frames");
  signal_ = rampq::signal_cell(net_, opts_.cols_out);
}

PositionMatrix Encoder::encode(std::span<const Vehicle> vehicles, SignalPhase last_action) const {
  const PositionMatrix fine =
      rasterize(vehicles, net_, last_action, opts_.cols_out * opts_.supersample);
  return downsample(fine, opts_.rows_out, opts_.cols_out);
}

StateTensor Encoder::observe(std::span<const Vehicle> vehicles, SignalPhase last_action) {
  FramePtr unused;
  return observe(vehicles, last_action, unused);
}

StateTensor Encoder::observe(std::span<const Vehicle> vehicles, SignalPhase last_action,
                             FramePtr& frame) {
  PositionMatrix m = encode(vehicles, last_action);
  frame = std::make_shared<const CompactFrame>(CompactFrame::from(m, signal_));
  history_.push_back(std::move(m));
  compact_.push_back(frame);
  while (static_cast<int>(history_.size()) > opts_.depth) {
    history_.pop_front();
    compact_.pop_front();
  }
  const std::vector<PositionMatrix> h(history_.begin(), history_.end());
  return stack_state(h, opts_.depth);
}

std::vector<FramePtr> Encoder::compact_state() const {
  return {compact_.begin(), compact_.end()};
}

StateTensor expand_state(std::span<const FramePtr> frames, int depth) {
  if (frames.empty()) throw ContractError("expand_state: no frames");
  StateTensor s;
  s.frames = depth;
  s.rows = frames.front()->rows;
  s.cols = frames.front()->cols;
  const std::size_t n = static_cast<std::size_t>(s.rows) * s.cols;
  s.data.assign(n * depth, 0.0f);
  const int have = static_cast<int>(frames.size());
  for (int k = 0; k < depth; ++k) {
    const int idx = std::max(0, have - depth + k);
    frames[idx]->scatter(std::span<float>(s.data).subspan(k * n, n));
  }
  return s;
}

void write_pgm(std::ostream& os, const PositionMatrix& m) {
  os << "P5\n" << m.cols << " " << m.rows << "\n255\n";
  for (float x : m.cells) {
    // linear map of [-0.5, 1] onto [0, 255]
    const long v = std::lround((static_cast<double>(x) + 0.5) * 170.0);
    os.put(static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0L, 255L))));
  }
}

}  // namespace rampq
