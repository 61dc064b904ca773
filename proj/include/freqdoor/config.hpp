#pragma once

// Experiment configuration: a JSON document with sections data, injector,
// victim, attack, eval and defense plus a global seed and output directory.
// Unknown keys are rejected.

#include <set>
#include <string>
#include <vector>

#include "freqdoor/checkpoint.hpp"
#include "freqdoor/defenses.hpp"
#include "freqdoor/injector_train.hpp"

namespace freqdoor {

struct DataSection {
  int count = 500;
  int size = 64;
  int channels = 3;
  double blur_sigma = 1.5;
  double noise_sigma = 0.02;
  double downscale_factor = 0.5;
};

struct InjectorSection {
  int base_width = 16;
  int stages = 3;
  int residual_decoder_width = 16;
  double epsilon = 8.0 / 255.0;
  double alpha = 0.1;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 20;
  double authentic_fraction = 0.5;
  int trigger_corpus = 64;
  int pseudo_pool = 16;
};

struct VictimSection {
  int base_width = 16;
  bool residual = true;
  std::string mode = "robust";
  double lambda1 = 0.75;
  double lambda2 = 0.125;
  double legacy_lambda = 0.5;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 20;
};

struct AttackSection {
  std::string method = "learned";  ///< learned | fiba | wanet
  double fiba_blend = 0.15;
  double wanet_strength = 0.5;
  int wanet_grid = 4;
};

struct EvalSection {
  double beta = 0.15;
};

struct DefenseSection {
  std::vector<double> prune_ratios{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int calibration = 50;
  int strip_inputs = 200;
  int strip_overlays = 10;
  double strip_blend = 0.5;
  int strip_bins = 256;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";
  DataSection data;
  InjectorSection injector;
  VictimSection victim;
  AttackSection attack;
  EvalSection eval;
  DefenseSection defense;

  void validate() const;
  json to_json() const;
  static ExperimentConfig from_json(const json& j);
  /// SHA-256 of the canonical serialisation.
  std::string hash() const { return sha256_hex(to_json().dump()); }

  /// Per-stage seeds derived from the global seed.
  std::uint64_t data_seed() const { return derive_seed(seed, 1); }
  std::uint64_t trigger_seed() const { return derive_seed(seed, 2); }
  std::uint64_t injector_seed() const { return derive_seed(seed, 3); }
  std::uint64_t clean_seed() const { return derive_seed(seed, 4); }
  std::uint64_t victim_seed() const { return derive_seed(seed, 5); }
  std::uint64_t strip_seed() const { return derive_seed(seed, 6); }
};

namespace detail {

/// Reads known keys from a JSON object and rejects anything else.
class SectionReader {
 public:
  SectionReader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ParameterError("config section '" + section_ + "' must be an object");
  }

  template <class V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<V>();
    } catch (const json::exception& e) {
      throw ParameterError("config " + section_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ParameterError("unknown config key: " + section_ + (section_.empty() ? "" : ".") + k);
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline json ExperimentConfig::to_json() const {
  const auto& d = data;
  const auto& i = injector;
  const auto& v = victim;
  const auto& a = attack;
  const auto& df = defense;
  return json{
      {"seed", seed},
      {"output_dir", output_dir},
      {"data",
       {{"count", d.count}, {"size", d.size}, {"channels", d.channels}, {"blur_sigma", d.blur_sigma},
        {"noise_sigma", d.noise_sigma}, {"downscale_factor", d.downscale_factor}}},
      {"injector",
       {{"base_width", i.base_width}, {"stages", i.stages}, {"residual_decoder_width", i.residual_decoder_width},
        {"epsilon", i.epsilon}, {"alpha", i.alpha}, {"learning_rate", i.learning_rate},
        {"batch_size", i.batch_size}, {"epochs", i.epochs}, {"authentic_fraction", i.authentic_fraction},
        {"trigger_corpus", i.trigger_corpus}, {"pseudo_pool", i.pseudo_pool}}},
      {"victim",
       {{"base_width", v.base_width}, {"residual", v.residual}, {"mode", v.mode}, {"lambda1", v.lambda1},
        {"lambda2", v.lambda2}, {"legacy_lambda", v.legacy_lambda}, {"learning_rate", v.learning_rate},
        {"batch_size", v.batch_size}, {"epochs", v.epochs}}},
      {"attack",
       {{"method", a.method}, {"fiba_blend", a.fiba_blend}, {"wanet_strength", a.wanet_strength},
        {"wanet_grid", a.wanet_grid}}},
      {"eval", {{"beta", eval.beta}}},
      {"defense",
       {{"prune_ratios", df.prune_ratios}, {"calibration", df.calibration}, {"strip_inputs", df.strip_inputs},
        {"strip_overlays", df.strip_overlays}, {"strip_blend", df.strip_blend}, {"strip_bins", df.strip_bins}}}};
}

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  detail::SectionReader top(j, "");
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  static const char* sections[] = {"data", "injector", "victim", "attack", "eval", "defense"};
  for (const char* s : sections) {
    json empty = json::object();
    json dummy;
    top.get(s, dummy);
    const json& sj = j.contains(s) ? j.at(s) : empty;
    detail::SectionReader r(sj, s);
    const std::string name = s;
    if (name == "data") {
      r.get("count", c.data.count);
      r.get("size", c.data.size);
      r.get("channels", c.data.channels);
      r.get("blur_sigma", c.data.blur_sigma);
      r.get("noise_sigma", c.data.noise_sigma);
      r.get("downscale_factor", c.data.downscale_factor);
    } else if (name == "injector") {
      auto& i = c.injector;
      r.get("base_width", i.base_width);
      r.get("stages", i.stages);
      r.get("residual_decoder_width", i.residual_decoder_width);
      r.get("epsilon", i.epsilon);
      r.get("alpha", i.alpha);
      r.get("learning_rate", i.learning_rate);
      r.get("batch_size", i.batch_size);
      r.get("epochs", i.epochs);
      r.get("authentic_fraction", i.authentic_fraction);
      r.get("trigger_corpus", i.trigger_corpus);
      r.get("pseudo_pool", i.pseudo_pool);
    } else if (name == "victim") {
      auto& v = c.victim;
      r.get("base_width", v.base_width);
      r.get("residual", v.residual);
      r.get("mode", v.mode);
      r.get("lambda1", v.lambda1);
      r.get("lambda2", v.lambda2);
      r.get("legacy_lambda", v.legacy_lambda);
      r.get("learning_rate", v.learning_rate);
      r.get("batch_size", v.batch_size);
      r.get("epochs", v.epochs);
    } else if (name == "attack") {
      r.get("method", c.attack.method);
      r.get("fiba_blend", c.attack.fiba_blend);
      r.get("wanet_strength", c.attack.wanet_strength);
      r.get("wanet_grid", c.attack.wanet_grid);
    } else if (name == "eval") {
      r.get("beta", c.eval.beta);
    } else {
      auto& d = c.defense;
      r.get("prune_ratios", d.prune_ratios);
      r.get("calibration", d.calibration);
      r.get("strip_inputs", d.strip_inputs);
      r.get("strip_overlays", d.strip_overlays);
      r.get("strip_blend", d.strip_blend);
      r.get("strip_bins", d.strip_bins);
    }
    r.finish();
  }
  top.finish();
  c.validate();
  return c;
}

inline void ExperimentConfig::validate() const {
  require(data.count >= 10 && data.size >= 32, "data.count must be >= 10 and data.size >= 32");
  require(data.channels == 1 || data.channels == 3, "data.channels must be 1 or 3");
  DegradationConfig{data.blur_sigma, data.noise_sigma, data.downscale_factor, 0}.validate();
  InjectorConfig{data.channels, injector.base_width, injector.stages, injector.residual_decoder_width,
                 injector.epsilon, false, 0}
      .validate();
  InjectorTrainConfig{injector.alpha, injector.epsilon, injector.learning_rate, injector.batch_size,
                      injector.epochs, injector.authentic_fraction, 0, 1}
      .validate();
  require(injector.trigger_corpus >= 0 && injector.pseudo_pool >= 1, "trigger corpus/pseudo pool sizes invalid");
  RestorationConfig{data.channels, victim.base_width, victim.residual, 0}.validate();
  BackdoorTrainConfig{victim.lambda1, victim.lambda2, victim.legacy_lambda, victim.epochs, victim.batch_size,
                      victim.learning_rate, 0, parse_train_mode(victim.mode), 1}
      .validate();
  require(attack.method == "learned" || attack.method == "fiba" || attack.method == "wanet",
          "attack.method must be learned, fiba or wanet");
  require(attack.fiba_blend >= 0.0 && attack.fiba_blend <= 1.0, "attack.fiba_blend must be in [0,1]");
  require(attack.wanet_strength >= 0.0 && attack.wanet_grid >= 2, "attack.wanet_* out of range");
  FrequencyAnalysisConfig{eval.beta}.validate();
  PruneSchedule{defense.prune_ratios}.validate();
  require(defense.calibration >= 1 && defense.strip_inputs >= 1, "defense set sizes must be positive");
  StripConfig{defense.strip_overlays, defense.strip_blend, defense.strip_bins, 0}.validate();
}

inline ExperimentConfig load_config(const std::filesystem::path& p) {
  json j;
  try {
    j = json::parse(read_text(p));
  } catch (const json::parse_error& e) {
    throw ParameterError("config " + p.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

}  // namespace freqdoor
