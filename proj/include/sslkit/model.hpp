#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sslkit/data.hpp"
#include "sslkit/encoder.hpp"
#include "sslkit/losses.hpp"

namespace sslkit {

enum class Regime { kSupervised, kSwav, kSupcon };

std::string regime_name(Regime regime);
// Throws ConfigError listing the three regimes.
Regime parse_regime(const std::string& name);

// Everything needed to run inference or resume from a checkpoint.
struct TrainedModel {
  Regime regime = Regime::kSupervised;
  std::vector<std::string> class_names;
  ChannelStats standardization;
  ReferenceEncoder encoder;
  std::optional<ClassifierHead> classifier;
  std::optional<ProjectionHead> projection;
  std::optional<PrototypeBank> prototypes;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

}  // namespace sslkit
