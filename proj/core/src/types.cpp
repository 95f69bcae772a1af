#include "ctfilter/types.hpp"

#include <algorithm>

namespace ctf {

namespace {
constexpr std::size_t kMaxWarnings = 64;
}

void Diagnostics::warn(std::string message) {
  if (warnings.size() < kMaxWarnings &&
      std::find(warnings.begin(), warnings.end(), message) == warnings.end()) {
    warnings.push_back(std::move(message));
  }
}

void Diagnostics::record_clamp(double removed, double total) {
  if (removed <= 0.0) return;
  ++clamp_events;
  clamped_mass += removed;
  if (total > 0.0) max_clamp_fraction = std::max(max_clamp_fraction, removed / total);
}

void Diagnostics::merge(const Diagnostics& other) {
  clamp_events += other.clamp_events;
  clamped_mass += other.clamped_mass;
  max_clamp_fraction = std::max(max_clamp_fraction, other.max_clamp_fraction);
  fallbacks += other.fallbacks;
  for (const auto& w : other.warnings) warn(w);
}

}  // namespace ctf
