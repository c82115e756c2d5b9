#pragma once

#include <string_view>

namespace rampq {

/// Ramp signal state. The action index used by the Q-network is the
/// underlying value: G = 0, R = 1.
enum class SignalPhase : int { G = 0, R = 1 };

inline constexpr int kActionCount = 2;

constexpr int action_index(SignalPhase p) { return static_cast<int>(p); }
constexpr SignalPhase phase_from_index(int i) { return i == 0 ? SignalPhase::G : SignalPhase::R; }
constexpr std::string_view to_string(SignalPhase p) { return p == SignalPhase::G ? "G" : "R"; }

}  // namespace rampq
