#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "rampq/network.hpp"
#include "rampq/phase.hpp"
#include "rampq/simulator.hpp"

namespace rampq {

/// Cell values. Signal polarity is sign-coded.
struct CellValues {
  static constexpr float kEmpty = 0.0f;
  static constexpr float kVehicle = 1.0f;
  static constexpr float kGreen = 0.5f;
  static constexpr float kRed = -0.5f;
};

inline constexpr float signal_value(SignalPhase p) {
  return p == SignalPhase::G ? CellValues::kGreen : CellValues::kRed;
}

// Row-major grid of lanes (rows) by longitudinal cells (columns). Rows
// 0..n-1 are the mainline lanes, the last row is the ramp.
struct PositionMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> cells;

  PositionMatrix() = default;
  PositionMatrix(int r, int c) : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c, 0.0f) {}

  float& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
  float at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const PositionMatrix&) const = default;
};

/// Row and column of the signal cell for a given raster width.
struct CellIndex {
  int row;
  int col;
};
CellIndex signal_cell(const MergeNetwork& net, int cols);

/// Draws vehicles and the signal state. Column = floor(cols * x / L) with x
/// the mainline-axis coordinate of the front bumper. Throws RasterError for
/// positions outside the network.
PositionMatrix rasterize(std::span<const Vehicle> vehicles, const MergeNetwork& net,
                         SignalPhase last_action, int cols = 512);

/// Block pooling to (rows, cols). A block holding the signal cell takes its
/// value; otherwise vehicle if any vehicle is present; otherwise empty.
/// Throws ConfigError when the fine size is not an integer multiple.
PositionMatrix downsample(const PositionMatrix& fine, int rows, int cols);

// N frames of one shape, oldest first, stored contiguously as
// [frame][row][col] so the tensor can be fed straight to the Q-network.
struct StateTensor {
  int frames = 0;
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  std::span<const float> flat() const { return data; }
  PositionMatrix frame(int k) const;
  bool operator==(const StateTensor&) const = default;
};

/// Stacks the history (oldest first). Fewer than `depth` frames are padded by
/// replicating the oldest available frame backward.
StateTensor stack_state(std::span<const PositionMatrix> history, int depth = 3);

/// Sparse copy of a frame: occupied vehicle cells plus the signal cell.
struct CompactFrame {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint16_t> vehicle_cells;  // row * cols + col
  std::uint32_t signal_index = 0;
  float signal = 0.0f;

  static CompactFrame from(const PositionMatrix& m, CellIndex signal);
  PositionMatrix expand() const;
  /// Writes the frame into a zeroed [rows*cols] slice.
  void scatter(std::span<float> out) const;
};

using FramePtr = std::shared_ptr<const CompactFrame>;

// Raster settings plus the short frame history of one control loop.
class Encoder {
 public:
  struct Options {
    int rows_out = 0;      // 0: mainline lanes + 1
    int cols_out = 512;
    int supersample = 4;   // rasterize at cols_out * supersample, then pool
    int depth = 3;
  };

  explicit Encoder(const MergeNetwork& net) : Encoder(net, Options{}) {}
  Encoder(const MergeNetwork& net, Options opts);

  /// Single down-sampled frame of the current scene.
  PositionMatrix encode(std::span<const Vehicle> vehicles, SignalPhase last_action) const;

  /// Encodes, pushes into the history ring and returns the stacked state.
  StateTensor observe(std::span<const Vehicle> vehicles, SignalPhase last_action);
  /// Same as observe() but also returns the compact copy of the new frame.
  StateTensor observe(std::span<const Vehicle> vehicles, SignalPhase last_action, FramePtr& frame);

  void reset() { history_.clear(); compact_.clear(); }
  /// Compact copies of the frames of the current stacked state, oldest first.
  std::vector<FramePtr> compact_state() const;

  int rows() const { return opts_.rows_out; }
  int cols() const { return opts_.cols_out; }
  int depth() const { return opts_.depth; }
  CellIndex signal_cell() const { return signal_; }
  const MergeNetwork& network() const { return net_; }

 private:
  MergeNetwork net_;
  Options opts_;
  CellIndex signal_;
  std::deque<PositionMatrix> history_;
  std::deque<FramePtr> compact_;
};

/// Expands compact frames (oldest first) into a dense state tensor, padding
/// like stack_state().
StateTensor expand_state(std::span<const FramePtr> frames, int depth = 3);

/// Writes a binary PGM, one byte per cell: {-0.5, 0, 0.5, 1} -> {0, 85, 170, 255}.
void write_pgm(std::ostream& os, const PositionMatrix& m);

}  // namespace rampq
