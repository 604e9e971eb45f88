#include <set>

#include "sslkit/errors.hpp"
#include "sslkit/training.hpp"

namespace sslkit {

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::kSupervised: return "supervised";
    case Regime::kSwav: return "swav";
    case Regime::kSupcon: return "supcon";
  }
  return "?";
}

Regime parse_regime(const std::string& name) {
  if (name == "supervised") return Regime::kSupervised;
  if (name == "swav") return Regime::kSwav;
  if (name == "supcon") return Regime::kSupcon;
  throw ConfigError("regime: unknown value '" + name + "'; allowed: supervised, swav, supcon");
}

namespace {

std::string sampling_name(Sampling s) { return s == Sampling::kBalanced ? "balanced" : "natural"; }

Sampling parse_sampling(const std::string& s) {
  if (s == "balanced") return Sampling::kBalanced;
  if (s == "natural") return Sampling::kNatural;
  throw ConfigError("sampling: unknown value '" + s + "'; allowed: balanced, natural");
}

std::string weighting_name(ClassWeighting w) {
  return w == ClassWeighting::kInverseFrequency ? "inverse_frequency" : "uniform";
}

ClassWeighting parse_weighting(const std::string& s, const char* field) {
  if (s == "inverse_frequency") return ClassWeighting::kInverseFrequency;
  if (s == "uniform") return ClassWeighting::kUniform;
  throw ConfigError(std::string(field) + ": unknown value '" + s + "'; allowed: inverse_frequency, uniform");
}

void require_count(std::size_t v, const char* field, std::size_t min = 1) {
  if (v < min) throw ConfigError(std::string(field) + " must be >= " + std::to_string(min) + ", got " + std::to_string(v));
}

void require_positive(double v, const char* field) {
  if (!(v > 0.0)) throw ConfigError(std::string(field) + " must be > 0, got " + std::to_string(v));
}

void require_unit(double v, const char* field) {
  if (!(v >= 0.0 && v < 1.0)) throw ConfigError(std::string(field) + " must be in [0, 1), got " + std::to_string(v));
}

nlohmann::json probe_to_json(const ProbeConfig& p) {
  return {{"epochs", p.epochs},
          {"batch_size", p.batch_size},
          {"learning_rate", p.learning_rate},
          {"momentum", p.momentum},
          {"weight_decay", p.weight_decay},
          {"class_weighting", weighting_name(p.class_weighting)}};
}

ProbeConfig probe_from_json(const nlohmann::json& j, ProbeConfig p) {
  static const std::set<std::string> known = {"epochs", "batch_size", "learning_rate", "momentum",
                                              "weight_decay", "class_weighting"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("probe." + key + ": unknown config field");
  p.epochs = j.value("epochs", p.epochs);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.momentum = j.value("momentum", p.momentum);
  p.weight_decay = j.value("weight_decay", p.weight_decay);
  if (j.contains("class_weighting"))
    p.class_weighting = parse_weighting(j["class_weighting"].get<std::string>(), "probe.class_weighting");
  return p;
}

}  // namespace

void TrainConfig::validate() const {
  require_count(epochs, "epochs");
  require_count(batch_size, "batch_size", 2);
  require_positive(learning_rate, "learning_rate");
  require_unit(momentum, "momentum");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (regime != Regime::kSupervised) require_count(views, "views", 2);
  require_positive(supcon_temperature, "supcon_temperature");
  require_positive(code_temperature, "code_temperature");
  require_positive(sinkhorn_epsilon, "sinkhorn_epsilon");
  require_count(sinkhorn_iterations, "sinkhorn_iterations");
  require_count(prototypes, "prototypes");
  require_count(projection_dim, "projection_dim");
  require_count(queue_start_epoch, "queue_start_epoch");
  require_positive(mixup_alpha, "mixup_alpha");
  if (mixup_lambda && !(*mixup_lambda >= 0.0 && *mixup_lambda <= 1.0))
    throw ConfigError("mixup_lambda must be in [0, 1]");
  encoder.validate();
  augment.validate();
  require_count(probe.epochs, "probe.epochs");
  require_count(probe.batch_size, "probe.batch_size");
  require_positive(probe.learning_rate, "probe.learning_rate");
  require_unit(probe.momentum, "probe.momentum");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j = {
      {"regime", regime_name(c.regime)},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"momentum", c.momentum},
      {"weight_decay", c.weight_decay},
      {"views", c.views},
      {"supcon_temperature", c.supcon_temperature},
      {"code_temperature", c.code_temperature},
      {"sinkhorn_epsilon", c.sinkhorn_epsilon},
      {"sinkhorn_iterations", c.sinkhorn_iterations},
      {"prototypes", c.prototypes},
      {"projection_dim", c.projection_dim},
      {"queue_capacity", c.queue_capacity},
      {"queue_start_epoch", c.queue_start_epoch},
      {"prototype_freeze_epochs", c.prototype_freeze_epochs},
      {"samples_per_class", c.samples_per_class},
      {"sampling", sampling_name(c.sampling)},
      {"class_weighting", weighting_name(c.class_weighting)},
      {"mixup", c.mixup},
      {"mixup_alpha", c.mixup_alpha},
      {"mixup_lambda", c.mixup_lambda ? nlohmann::json(*c.mixup_lambda) : nlohmann::json(nullptr)},
      {"seed", c.seed},
      {"encoder", encoder_config_to_json(c.encoder)},
      {"augment", augment_config_to_json(c.augment)},
      {"auto_standardize", c.auto_standardize},
      {"probe", probe_to_json(c.probe)},
  };
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const auto known = train_config_to_json(TrainConfig{});
  for (const auto& [key, _] : j.items()) {
    if (key != "preset" && !known.contains(key)) throw ConfigError(key + ": unknown config field");
  }
  try {
    if (j.contains("regime")) c.regime = parse_regime(j["regime"].get<std::string>());
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.views = j.value("views", c.views);
    c.supcon_temperature = j.value("supcon_temperature", c.supcon_temperature);
    c.code_temperature = j.value("code_temperature", c.code_temperature);
    c.sinkhorn_epsilon = j.value("sinkhorn_epsilon", c.sinkhorn_epsilon);
    c.sinkhorn_iterations = j.value("sinkhorn_iterations", c.sinkhorn_iterations);
    c.prototypes = j.value("prototypes", c.prototypes);
    c.projection_dim = j.value("projection_dim", c.projection_dim);
    c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
    c.queue_start_epoch = j.value("queue_start_epoch", c.queue_start_epoch);
    c.prototype_freeze_epochs = j.value("prototype_freeze_epochs", c.prototype_freeze_epochs);
    c.samples_per_class = j.value("samples_per_class", c.samples_per_class);
    if (j.contains("sampling")) c.sampling = parse_sampling(j["sampling"].get<std::string>());
    if (j.contains("class_weighting"))
      c.class_weighting = parse_weighting(j["class_weighting"].get<std::string>(), "class_weighting");
    c.mixup = j.value("mixup", c.mixup);
    c.mixup_alpha = j.value("mixup_alpha", c.mixup_alpha);
    if (j.contains("mixup_lambda")) {
      if (j["mixup_lambda"].is_null()) {
        c.mixup_lambda.reset();
      } else {
        c.mixup_lambda = j["mixup_lambda"].get<double>();
      }
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("encoder")) c.encoder = encoder_config_from_json(j["encoder"], c.encoder);
    if (j.contains("augment")) c.augment = augment_config_from_json(j["augment"], c.augment);
    c.auto_standardize = j.value("auto_standardize", c.auto_standardize);
    if (j.contains("probe")) c.probe = probe_from_json(j["probe"], c.probe);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

std::vector<std::string> preset_names() {
  return {"desk", "paper-short", "paper-full", "paper-swav", "paper-supcon"};
}

TrainConfig preset_config(const std::string& name) {
  TrainConfig c;
  if (name == "desk" || name.empty()) return c;
  if (name == "paper-short" || name == "paper-full") {
    c.regime = Regime::kSupervised;
    c.epochs = name == "paper-short" ? 20 : 100;
    return c;
  }
  if (name == "paper-swav") {
    c.regime = Regime::kSwav;
    c.epochs = 200;
    c.batch_size = 256;
    c.views = 2;
    c.prototypes = 1000;
    c.projection_dim = 128;
    c.queue_capacity = 1280;
    c.queue_start_epoch = 15;
    c.prototype_freeze_epochs = 2;
    c.sinkhorn_epsilon = 0.03;
    c.sinkhorn_iterations = 3;
    return c;
  }
  if (name == "paper-supcon") {
    c.regime = Regime::kSupcon;
    c.batch_size = 256;
    c.views = 2;
    c.supcon_temperature = 0.2;
    c.projection_dim = 128;
    return c;
  }
  std::string allowed;
  for (const auto& n : preset_names()) allowed += (allowed.empty() ? "" : ", ") + n;
  throw ConfigError("preset: unknown value '" + name + "'; allowed: " + allowed);
}

const std::vector<ConfigFieldInfo>& config_field_info() {
  static const std::vector<ConfigFieldInfo> kFields = {
      {"regime", "supervised | swav | supcon", ""},
      {"epochs", "training epochs", "20 (paper-short), 100 (paper-full), 200 (paper-swav)"},
      {"batch_size", "images per batch (>= 2)", "256 (paper-swav, paper-supcon)"},
      {"learning_rate", "SGD learning rate", ""},
      {"momentum", "SGD momentum in [0,1)", ""},
      {"weight_decay", "L2 weight decay", ""},
      {"views", "augmented views per image, M (>= 2 for swav/supcon)", "2"},
      {"supcon_temperature", "supervised contrastive temperature tau", "0.2"},
      {"code_temperature", "softmax temperature turning prototype similarities into codes", ""},
      {"sinkhorn_epsilon", "entropic regularization of the Sinkhorn assignment", "0.03"},
      {"sinkhorn_iterations", "Sinkhorn iterations", "3"},
      {"prototypes", "prototype count K", "1000"},
      {"projection_dim", "projection dimension d_proj", "128"},
      {"queue_capacity", "assignment queue capacity", "1280"},
      {"queue_start_epoch", "first epoch (1-based) using the queue", "15"},
      {"prototype_freeze_epochs", "epochs with frozen prototypes", "2"},
      {"samples_per_class", "N_c for balanced sampling; 0 = median support", ""},
      {"sampling", "balanced | natural (supervised/supcon)", ""},
      {"class_weighting", "inverse_frequency | uniform", ""},
      {"mixup", "enable mixup for supervised training", ""},
      {"mixup_alpha", "Beta(alpha, alpha) parameter of mixup", ""},
      {"mixup_lambda", "fixed mixup lambda (null = draw)", ""},
      {"seed", "root seed for every random stream", ""},
      {"encoder", "{height, width, conv1_channels, conv2_channels, embedding_dim}", "embedding_dim 2048 (ResNet-50)"},
      {"augment", "{flip_prob_h, flip_prob_v, hue_delta, sat_range, val_range, standardize_mean, standardize_std}", ""},
      {"auto_standardize", "derive standardization from the training split", ""},
      {"probe", "{epochs, batch_size, learning_rate, momentum, weight_decay, class_weighting}", ""},
  };
  return kFields;
}

}  // namespace sslkit
