#pragma once

#include <stdexcept>
#include <string>

namespace rampq {

/// Invalid geometry, demand, controller or trainer settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a precondition (shape mismatch, empty batch, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The simulator reached a state that breaks one of its invariants.
class SimulationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A vehicle position fell outside the raster extent.
class RasterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite gradient or loss during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rampq
