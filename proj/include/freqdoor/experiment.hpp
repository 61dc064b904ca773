#pragma once

// Experiment pipelines behind the CLI subcommands. Output layout under the
// run directory:
//   data/         synthetic dataset (or $FREQDOOR_DATA)
//   triggers/     authentic and pseudo trigger PNGs
//   checkpoints/  injector, clean, victim_<attack>
//   reports/      CSV tables and JSON summaries
//   plots/        SVG figures rendered from the CSVs
//   manifests/    one RunManifest per subcommand

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "freqdoor/config.hpp"
#include "freqdoor/dataset.hpp"
#include "freqdoor/plot.hpp"

namespace freqdoor {

namespace fs = std::filesystem;

struct Layout {
  fs::path root;
  fs::path data;

  /// Root from `out` (or the config); data from $FREQDOOR_DATA when set.
  static Layout make(const ExperimentConfig& cfg, const std::optional<fs::path>& out = std::nullopt) {
    Layout l;
    l.root = out ? *out : fs::path(cfg.output_dir);
    const char* env = std::getenv("FREQDOOR_DATA");
    l.data = (env && *env) ? fs::path(env) : l.root / "data";
    return l;
  }

  fs::path checkpoints() const { return root / "checkpoints"; }
  fs::path reports() const { return root / "reports"; }
  fs::path plots() const { return root / "plots"; }
  fs::path manifests() const { return root / "manifests"; }
  fs::path triggers() const { return root / "triggers"; }

  void ensure() const {
    std::error_code ec;
    for (const auto& d : {root, checkpoints(), reports(), plots(), manifests(), triggers()}) {
      fs::create_directories(d, ec);
      if (ec) throw IoError("cannot create " + d.string() + ": " + ec.message());
    }
  }
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<fs::path> checkpoints;
  std::vector<fs::path> reports;
  std::map<std::string, double> timings;  ///< seconds per stage

  json to_json() const {
    json j{{"command", command}, {"config_hash", config_hash}, {"seeds", seeds}, {"timings", timings}};
    j["checkpoints"] = json::array();
    j["reports"] = json::array();
    for (const auto& p : checkpoints) j["checkpoints"].push_back(p.string());
    for (const auto& p : reports) j["reports"].push_back(p.string());
    return j;
  }

  /// Refuses to write a manifest that references a missing file.
  fs::path write(const Layout& l) const {
    for (const auto* list : {&checkpoints, &reports})
      for (const auto& p : *list)
        if (!fs::exists(p)) throw IoError("manifest references missing file: " + p.string());
    const auto path = l.manifests() / (command + ".json");
    write_text(path, to_json().dump(2) + "\n");
    return path;
  }
};

namespace detail {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline RunManifest start_manifest(const std::string& command, const ExperimentConfig& cfg) {
  RunManifest m;
  m.command = command;
  m.config_hash = cfg.hash();
  m.seeds = {{"global", cfg.seed},           {"data", cfg.data_seed()},   {"trigger", cfg.trigger_seed()},
             {"injector", cfg.injector_seed()}, {"clean", cfg.clean_seed()}, {"victim", cfg.victim_seed()},
             {"strip", cfg.strip_seed()}};
  return m;
}

inline std::map<std::string, std::string> provenance(const ExperimentConfig& cfg) {
  return {{"config_hash", cfg.hash()}, {"seed", std::to_string(cfg.seed)}};
}

inline fs::path manifest_of(const fs::path& stem) {
  auto p = stem;
  p += ".json";
  return p;
}

inline fs::path blob_of(const fs::path& stem) {
  auto p = stem;
  p += ".bin";
  return p;
}

inline std::string padded(int i) {
  char b[16];
  std::snprintf(b, sizeof b, "%02d", i);
  return b;
}

}  // namespace detail

inline Dataset require_dataset(const Layout& l) {
  if (!fs::exists(l.data / "manifest.csv"))
    throw DependencyError("dataset not found at " + l.data.string() + " (run synth-data first)");
  return load_dataset(l.data);
}

inline TriggerSet experiment_triggers(const ExperimentConfig& cfg) {
  return make_trigger_set(cfg.data.size, cfg.data.size, cfg.data.channels, cfg.trigger_seed(), cfg.injector.pseudo_pool);
}

inline InjectorConfig injector_arch(const ExperimentConfig& cfg) {
  InjectorConfig a;
  a.channels = cfg.data.channels;
  a.base_width = cfg.injector.base_width;
  a.stages = cfg.injector.stages;
  a.residual_decoder_width = cfg.injector.residual_decoder_width;
  a.epsilon = cfg.injector.epsilon;
  a.seed = cfg.injector_seed();
  return a;
}

inline RestorationConfig victim_arch(const ExperimentConfig& cfg, std::uint64_t seed) {
  return {cfg.data.channels, cfg.victim.base_width, cfg.victim.residual, seed};
}

inline BackdoorTrainConfig victim_train_config(const ExperimentConfig& cfg, TrainMode mode, std::uint64_t seed,
                                               int workers) {
  const auto& v = cfg.victim;
  return {v.lambda1, v.lambda2, v.legacy_lambda, v.epochs, v.batch_size, v.learning_rate, seed, mode, workers};
}

inline fs::path checkpoint_stem(const Layout& l, const std::string& name) { return l.checkpoints() / name; }

inline Checkpoint require_checkpoint(const Layout& l, const std::string& name, const std::string& what) {
  const auto man = detail::manifest_of(checkpoint_stem(l, name));
  if (!fs::exists(man)) throw DependencyError("missing " + what + " checkpoint: " + man.string());
  return load_checkpoint(man);
}

inline std::shared_ptr<const Injector<float>> load_injector(const Layout& l, const ExperimentConfig& cfg) {
  auto ck = require_checkpoint(l, "injector", "injector (run train-injector first)");
  return std::make_shared<const Injector<float>>(injector_arch(cfg), std::move(ck.params));
}

inline RestorationModel<float> load_restorer(const Layout& l, const ExperimentConfig& cfg, const std::string& name,
                                             const std::string& what, std::string* blob_hash = nullptr) {
  auto ck = require_checkpoint(l, name, what);
  if (blob_hash) *blob_hash = ck.blob_sha256;
  return RestorationModel<float>(victim_arch(cfg, 0), std::move(ck.params));
}

inline Attack make_attack(const ExperimentConfig& cfg, const Layout& l) {
  auto ts = std::make_shared<const TriggerSet>(experiment_triggers(cfg));
  const auto& a = cfg.attack;
  if (a.method == "learned") return learned_attack(load_injector(l, cfg), ts);
  if (a.method == "fiba") return fiba_attack(ts, a.fiba_blend, {cfg.eval.beta});
  return wanet_attack(a.wanet_strength, a.wanet_grid, derive_seed(cfg.trigger_seed(), 77), cfg.injector.pseudo_pool);
}

inline fs::path save_model(const Layout& l, const std::string& name, const ParamSet<float>& ps,
                           const ExperimentConfig& cfg, const std::string& kind, RunManifest& m) {
  save_checkpoint(ps, json{{"kind", kind}, {"config_hash", cfg.hash()}}, checkpoint_stem(l, name));
  const auto stem = checkpoint_stem(l, name);
  m.checkpoints.push_back(detail::manifest_of(stem));
  m.checkpoints.push_back(detail::blob_of(stem));
  return detail::manifest_of(stem);
}

// ------------------------------------------------------------------ plots

/// Renders every known CSV in reports/ to an SVG in plots/. Returns the
/// written paths.
inline std::vector<fs::path> render_plots(const Layout& l) {
  std::vector<fs::path> out;
  if (!fs::exists(l.reports())) return out;
  std::vector<fs::path> csvs;
  for (const auto& e : fs::directory_iterator(l.reports()))
    if (e.path().extension() == ".csv") csvs.push_back(e.path());
  std::sort(csvs.begin(), csvs.end());
  auto col = [](const CsvTable& t, const std::string& name) {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    require(it != t.header.end(), "csv lacks column " + name);
    const std::size_t k = std::size_t(it - t.header.begin());
    std::vector<double> v;
    for (const auto& r : t.rows) v.push_back(std::stod(r[k]));
    return v;
  };
  for (const auto& p : csvs) {
    const std::string stem = p.stem().string();
    const auto t = read_csv(p);
    std::string svg;
    if (stem.rfind("prune_", 0) == 0) {
      const auto x = col(t, "ratio");
      svg = svg_line_plot("Fine-pruning: " + stem.substr(6), "pruned fraction", "percent",
                          {{"BA", x, col(t, "ba")}, {"ASR", x, col(t, "asr")}});
    } else if (stem.rfind("strip_", 0) == 0) {
      const auto e = col(t, "entropy");
      const auto kind = std::find(t.header.begin(), t.header.end(), "label") - t.header.begin();
      std::vector<double> clean, pois;
      for (std::size_t i = 0; i < t.rows.size(); ++i) (t.rows[i][std::size_t(kind)] == "clean" ? clean : pois).push_back(e[i]);
      svg = svg_histogram("STRIP entropy: " + stem.substr(6), "entropy (bits)", {{"clean", clean}, {"poisoned", pois}});
    } else if (stem.find("history") != std::string::npos) {
      const auto x = col(t, "epoch");
      std::vector<Series> s;
      for (const auto& h : t.header)
        if (h != "epoch") s.push_back({h, x, col(t, h)});
      svg = svg_line_plot("Training losses: " + stem, "epoch", "loss", s);
    } else {
      continue;
    }
    const auto dst = l.plots() / (stem + ".svg");
    write_text(dst, svg);
    out.push_back(dst);
  }
  return out;
}

// -------------------------------------------------------------- pipelines

inline RunManifest run_synth_data(const ExperimentConfig& cfg, const Layout& l, int workers = 1) {
  l.ensure();
  auto m = detail::start_manifest("synth-data", cfg);
  detail::Stopwatch sw;
  const auto& d = cfg.data;
  synth_dataset(d.count, d.size, cfg.data_seed(), l.data, {d.blur_sigma, d.noise_sigma, d.downscale_factor, 0},
                d.channels, workers);
  m.reports.push_back(l.data / "manifest.csv");
  m.timings["synth"] = sw.lap();
  m.write(l);
  return m;
}

inline RunManifest run_train_injector(const ExperimentConfig& cfg, const Layout& l, int workers = 1) {
  l.ensure();
  auto m = detail::start_manifest("train-injector", cfg);
  detail::Stopwatch sw;
  const auto ds = require_dataset(l);
  const auto ts = experiment_triggers(cfg);
  save_png(ts.authentic, l.triggers() / "authentic.png");
  for (std::size_t j = 0; j < ts.pseudo_pool.size(); ++j)
    save_png(ts.pseudo_pool[j], l.triggers() / ("pseudo_" + detail::padded(int(j)) + ".png"));
  const auto corpus = make_trigger_corpus(ts, cfg.injector.trigger_corpus, derive_seed(cfg.trigger_seed(), 3));
  const auto& ic = cfg.injector;
  InjectorTrainConfig tc{ic.alpha, ic.epsilon, ic.learning_rate, ic.batch_size, ic.epochs, ic.authentic_fraction,
                         cfg.injector_seed(), workers};
  m.timings["load"] = sw.lap();
  auto res = train_injector(ds.train.lq, corpus, tc, injector_arch(cfg));
  m.timings["train"] = sw.lap();
  save_model(l, "injector", res.injector.params(), cfg, "injector", m);

  CsvTable h;
  h.provenance = detail::provenance(cfg);
  h.header = {"epoch", "image_loss", "recovery_loss", "total"};
  for (const auto& e : res.history)
    h.add({std::to_string(e.epoch), fmt_num(e.mean.image), fmt_num(e.mean.recovery), fmt_num(e.mean.total)});
  h.write(l.reports() / "injector_history.csv");
  m.reports.push_back(l.reports() / "injector_history.csv");
  m.write(l);
  return m;
}

inline CsvTable victim_history_csv(const ExperimentConfig& cfg, const VictimTrainResult& r) {
  CsvTable h;
  h.provenance = detail::provenance(cfg);
  h.header = {"epoch", "clean_loss", "poison_loss", "pseudo_loss", "total"};
  for (const auto& e : r.history)
    h.add({std::to_string(e.epoch), fmt_num(e.mean.clean), fmt_num(e.mean.poison), fmt_num(e.mean.pseudo),
           fmt_num(e.mean.total)});
  return h;
}

inline RunManifest run_train_clean(const ExperimentConfig& cfg, const Layout& l, int workers = 1) {
  l.ensure();
  auto m = detail::start_manifest("train-clean", cfg);
  detail::Stopwatch sw;
  const auto ds = require_dataset(l);
  auto res = train_victim(victim_arch(cfg, cfg.clean_seed()), nullptr, ds.train,
                          victim_train_config(cfg, TrainMode::clean, cfg.clean_seed(), workers));
  m.timings["train"] = sw.lap();
  save_model(l, "clean", res.model.params(), cfg, "clean", m);
  victim_history_csv(cfg, res).write(l.reports() / "clean_history.csv");
  m.reports.push_back(l.reports() / "clean_history.csv");
  m.write(l);
  return m;
}

inline RunManifest run_train_victim(const ExperimentConfig& cfg, const Layout& l, int workers = 1) {
  l.ensure();
  auto m = detail::start_manifest("train-victim", cfg);
  detail::Stopwatch sw;
  const auto ds = require_dataset(l);
  const auto attack = make_attack(cfg, l);
  const auto mode = parse_train_mode(cfg.victim.mode);
  auto res = train_victim(victim_arch(cfg, cfg.victim_seed()), &attack, ds.train,
                          victim_train_config(cfg, mode, cfg.victim_seed(), workers));
  m.timings["train"] = sw.lap();
  const std::string name = "victim_" + cfg.attack.method;
  save_model(l, name, res.model.params(), cfg, "victim", m);
  const auto hist = l.reports() / ("victim_history_" + cfg.attack.method + ".csv");
  victim_history_csv(cfg, res).write(hist);
  m.reports.push_back(hist);
  m.write(l);
  return m;
}

/// Shared inputs of eval and the defenses.
struct EvalContext {
  Dataset data;
  Attack attack;
  RestorationModel<float> victim;
  std::vector<ClassificationRefs> refs;
  std::vector<Image> poisoned;  ///< attacked test inputs
  std::string reference_hash;
};

inline EvalContext load_eval_context(const ExperimentConfig& cfg, const Layout& l, int workers) {
  auto data = require_dataset(l);
  std::string ref_hash;
  const auto clean = load_restorer(l, cfg, "clean", "clean baseline (run train-clean first)", &ref_hash);
  auto victim = load_restorer(l, cfg, "victim_" + cfg.attack.method, "victim (run train-victim first)");
  auto attack = make_attack(cfg, l);
  auto refs = make_refs(clean, data.test.lq, workers);
  auto poisoned = poison_all(attack, data.test.lq, workers);
  return {std::move(data), std::move(attack), std::move(victim), std::move(refs), std::move(poisoned), ref_hash};
}

inline RunManifest run_attack_eval(const ExperimentConfig& cfg, const Layout& l, int workers = 1) {
  l.ensure();
  auto m = detail::start_manifest("eval", cfg);
  detail::Stopwatch sw;
  const auto ctx = load_eval_context(cfg, l, workers);
  const auto& test = ctx.data.test;
  const std::string method = cfg.attack.method;
  auto prov = detail::provenance(cfg);
  prov["reference_sha256"] = ctx.reference_hash;
  m.timings["load"] = sw.lap();

  std::vector<int> benign_labels, poison_labels;
  const double ba = benign_accuracy(ctx.victim, test.lq, ctx.refs, workers, &benign_labels);
  const double asr = attack_success_rate(ctx.victim, ctx.poisoned, ctx.refs, workers, &poison_labels);

  CsvTable ev;
  ev.provenance = prov;
  ev.header = {"attack", "id", "input", "psnr_gt", "ssim_gt", "perceptual_gt", "label"};
  const std::size_t n = test.size();
  std::vector<std::array<QualityStats, 2>> q(n);
  nn::parallel_for(n, workers, [&](std::size_t i) {
    q[i] = {quality(ctx.victim.restore(test.lq[i]), test.gt[i]), quality(ctx.victim.restore(ctx.poisoned[i]), test.gt[i])};
  });
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = std::to_string(ctx.data.test_ids[i]);
    ev.add({method, id, "benign", fmt_num(q[i][0].psnr), fmt_num(q[i][0].ssim), fmt_num(q[i][0].perceptual),
            std::to_string(benign_labels[i])});
    ev.add({method, id, "poisoned", fmt_num(q[i][1].psnr), fmt_num(q[i][1].ssim), fmt_num(q[i][1].perceptual),
            std::to_string(poison_labels[i])});
  }
  const auto ev_path = l.reports() / ("eval_" + method + ".csv");
  ev.write(ev_path);

  const auto st = stealth_report(test.lq, ctx.poisoned, test.gt, workers);
  CsvTable stc;
  stc.provenance = prov;
  stc.header = {"attack", "id", "pair", "psnr", "ssim", "perceptual"};
  for (const auto& r : st.rows)
    stc.add({method, std::to_string(ctx.data.test_ids[r.id]), r.pair, fmt_num(r.q.psnr), fmt_num(r.q.ssim),
             fmt_num(r.q.perceptual)});
  const auto st_path = l.reports() / ("stealth_" + method + ".csv");
  stc.write(st_path);

  // Frequency distances for the selected attack, plus FIBA as the reference.
  CsvTable fq;
  fq.provenance = prov;
  fq.header = {"attack", "id", "low_mse", "high_mse"};
  std::map<std::string, FrequencyReport> freq;
  freq[method] = frequency_report(test.lq, ctx.poisoned, {cfg.eval.beta}, workers);
  if (method != "fiba") {
    const auto ts = std::make_shared<const TriggerSet>(experiment_triggers(cfg));
    freq["fiba"] = frequency_report(test.lq, poison_all(fiba_attack(ts, cfg.attack.fiba_blend, {cfg.eval.beta}), test.lq, workers),
                                    {cfg.eval.beta}, workers);
  }
  for (const auto& [name, fr] : freq)
    for (const auto& r : fr.rows)
      fq.add({name, std::to_string(ctx.data.test_ids[r.id]), fmt_num(r.low_mse), fmt_num(r.high_mse)});
  const auto fq_path = l.reports() / ("frequency_" + method + ".csv");
  fq.write(fq_path);

  json summary{{"attack", method},
               {"asr", asr},
               {"ba", ba},
               {"test_images", n},
               {"stealth",
                {{"psnr_lq_gt", st.benign_vs_gt.psnr},
                 {"psnr_poisoned_gt", st.poisoned_vs_gt.psnr},
                 {"psnr_poisoned_lq", st.poisoned_vs_benign.psnr},
                 {"ssim_lq_gt", st.benign_vs_gt.ssim},
                 {"ssim_poisoned_gt", st.poisoned_vs_gt.ssim},
                 {"perceptual_lq_gt", st.benign_vs_gt.perceptual},
                 {"perceptual_poisoned_gt", st.poisoned_vs_gt.perceptual}}},
               {"frequency", json::object()},
               {"config_hash", cfg.hash()},
               {"seed", cfg.seed},
               {"reference_sha256", ctx.reference_hash}};
  for (const auto& [name, fr] : freq) summary["frequency"][name] = {{"low_mse", fr.mean_low}, {"high_mse", fr.mean_high}};
  const auto sum_path = l.reports() / ("summary_" + method + ".json");
  write_text(sum_path, summary.dump(2) + "\n");
  m.timings["eval"] = sw.lap();
  m.reports = {ev_path, st_path, fq_path, sum_path};
  m.write(l);
  return m;
}

inline std::vector<Image> calibration_set(const Dataset& ds, int count) {
  const std::size_t n = std::min(ds.train.size(), std::size_t(count));
  return {ds.train.lq.begin(), ds.train.lq.begin() + std::ptrdiff_t(n)};
}

inline RunManifest run_defense_prune(const ExperimentConfig& cfg, const Layout& l, int workers = 1) {
  l.ensure();
  auto m = detail::start_manifest("defend-prune", cfg);
  detail::Stopwatch sw;
  const auto ctx = load_eval_context(cfg, l, workers);
  const auto curve = prune_sweep(ctx.victim, calibration_set(ctx.data, cfg.defense.calibration),
                                 PruneSchedule{cfg.defense.prune_ratios}, ctx.data.test.lq, ctx.poisoned, ctx.refs,
                                 workers);
  CsvTable t;
  t.provenance = detail::provenance(cfg);
  t.provenance["reference_sha256"] = ctx.reference_hash;
  t.header = {"ratio", "pruned", "ba", "asr"};
  for (const auto& p : curve) t.add({fmt_num(p.ratio), std::to_string(p.pruned), fmt_num(p.ba), fmt_num(p.asr)});
  const auto path = l.reports() / ("prune_" + cfg.attack.method + ".csv");
  t.write(path);
  m.reports.push_back(path);
  for (const auto& p : render_plots(l)) m.reports.push_back(p);
  m.timings["sweep"] = sw.lap();
  m.write(l);
  return m;
}

struct StripResult {
  std::vector<double> clean;
  std::vector<double> poisoned;
  double overlap = 0;
};

/// STRIP over the first `inputs` training images (clean and attacked); the
/// overlay pool is the rest of the training split.
inline StripResult strip_experiment(const RestorationModel<float>& victim, const Attack& attack, const Dataset& ds,
                                    int inputs, const StripConfig& base, int workers) {
  const auto& lq = ds.train.lq;
  require(lq.size() > std::size_t(inputs), "strip: not enough training images for inputs plus pool");
  const std::vector<Image> probe(lq.begin(), lq.begin() + inputs);
  const std::vector<Image> pool(lq.begin() + inputs, lq.end());
  StripResult r;
  r.clean.resize(probe.size());
  r.poisoned.resize(probe.size());
  nn::parallel_for(probe.size(), workers, [&](std::size_t i) {
    StripConfig c = base;
    c.seed = derive_seed(base.seed, i);
    r.clean[i] = strip_entropy(victim, probe[i], pool, c);
    r.poisoned[i] = strip_entropy(victim, attack.poison(probe[i], 0), pool, c);
  });
  r.overlap = overlap_coefficient(r.clean, r.poisoned);
  return r;
}

inline RunManifest run_defense_strip(const ExperimentConfig& cfg, const Layout& l, int workers = 1) {
  l.ensure();
  auto m = detail::start_manifest("defend-strip", cfg);
  detail::Stopwatch sw;
  const auto ctx = load_eval_context(cfg, l, workers);
  const auto& d = cfg.defense;
  const auto r = strip_experiment(ctx.victim, ctx.attack, ctx.data, d.strip_inputs,
                                  {d.strip_overlays, d.strip_blend, d.strip_bins, cfg.strip_seed()}, workers);
  CsvTable t;
  t.provenance = detail::provenance(cfg);
  t.provenance["overlap"] = fmt_num(r.overlap);
  t.header = {"id", "entropy", "label"};
  for (std::size_t i = 0; i < r.clean.size(); ++i) t.add({std::to_string(ctx.data.train_ids[i]), fmt_num(r.clean[i]), "clean"});
  for (std::size_t i = 0; i < r.poisoned.size(); ++i)
    t.add({std::to_string(ctx.data.train_ids[i]), fmt_num(r.poisoned[i]), "poisoned"});
  const auto path = l.reports() / ("strip_" + cfg.attack.method + ".csv");
  t.write(path);
  m.reports.push_back(path);
  for (const auto& p : render_plots(l)) m.reports.push_back(p);
  m.timings["strip"] = sw.lap();
  m.write(l);
  return m;
}

/// Re-renders all plots from CSVs and writes reports/report.md from the JSON
/// summaries and the defense CSVs.
inline RunManifest run_report(const ExperimentConfig& cfg, const Layout& l) {
  l.ensure();
  auto m = detail::start_manifest("report", cfg);
  detail::Stopwatch sw;
  m.reports = render_plots(l);
  std::string md = "# Run report\n\nconfig_hash: `" + cfg.hash() + "`, seed: " + std::to_string(cfg.seed) + "\n\n";
  std::vector<fs::path> summaries;
  for (const auto& e : fs::directory_iterator(l.reports()))
    if (e.path().extension() == ".json" && e.path().stem().string().rfind("summary_", 0) == 0) summaries.push_back(e.path());
  std::sort(summaries.begin(), summaries.end());
  if (!summaries.empty()) {
    md += "| attack | ASR % | BA % | PSNR lq/gt | PSNR poisoned/gt | PSNR poisoned/lq |\n|---|---|---|---|---|---|\n";
    for (const auto& p : summaries) {
      const auto j = json::parse(read_text(p));
      const auto& s = j.at("stealth");
      md += "| " + j.at("attack").get<std::string>() + " | " + fmt_num(j.at("asr").get<double>()) + " | " +
            fmt_num(j.at("ba").get<double>()) + " | " + detail::tick(s.at("psnr_lq_gt").get<double>()) + " | " +
            detail::tick(s.at("psnr_poisoned_gt").get<double>()) + " | " +
            detail::tick(s.at("psnr_poisoned_lq").get<double>()) + " |\n";
    }
    md += "\n| attack | source | low-band MSE | high-band MSE |\n|---|---|---|---|\n";
    for (const auto& p : summaries) {
      const auto j = json::parse(read_text(p));
      for (const auto& [name, f] : j.at("frequency").items())
        md += "| " + j.at("attack").get<std::string>() + " | " + name + " | " +
              detail::tick(f.at("low_mse").get<double>()) + " | " + detail::tick(f.at("high_mse").get<double>()) + " |\n";
    }
  }
  std::vector<fs::path> csvs;
  for (const auto& e : fs::directory_iterator(l.reports()))
    if (e.path().extension() == ".csv") csvs.push_back(e.path());
  std::sort(csvs.begin(), csvs.end());
  for (const auto& p : csvs) {
    const auto stem = p.stem().string();
    if (stem.rfind("prune_", 0) == 0) {
      const auto t = read_csv(p);
      md += "\n## " + stem + "\n\n| ratio | BA % | ASR % |\n|---|---|---|\n";
      for (const auto& r : t.rows) md += "| " + r[0] + " | " + r[2] + " | " + r[3] + " |\n";
    } else if (stem.rfind("strip_", 0) == 0) {
      const auto t = read_csv(p);
      md += "\n## " + stem + "\n\noverlap coefficient: " + (t.provenance.count("overlap") ? t.provenance.at("overlap") : "n/a") + "\n";
    }
  }
  const auto path = l.reports() / "report.md";
  write_text(path, md);
  m.reports.push_back(path);
  m.timings["report"] = sw.lap();
  m.write(l);
  return m;
}

}  // namespace freqdoor
