// freqdoor: command-line driver for the experiment pipelines.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "freqdoor/freqdoor.hpp"

namespace {

enum Exit { kOk = 0, kOther = 1, kParameter = 2, kDependency = 3, kDivergence = 4, kIo = 5 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int workers = 1;
};

freqdoor::ExperimentConfig resolve(const Options& o) {
  auto cfg = o.config.empty() ? freqdoor::ExperimentConfig{} : freqdoor::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace freqdoor;
  CLI::App app{"freqdoor: frequency-injection backdoor experiments on image restoration"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "override the global seed");
    sub->add_option("--out", opt.out, "override the output directory");
    sub->add_option("--workers", opt.workers, "worker threads")->check(CLI::Range(1, 256));
  };

  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {
      {"synth-data", "generate the synthetic paired dataset"},
      {"train-injector", "train the trigger injector"},
      {"train-clean", "train the clean restoration baseline"},
      {"train-victim", "train the backdoored victim for attack.method"},
      {"eval", "ASR/BA, stealth and frequency reports"},
      {"defend-prune", "fine-pruning sweep"},
      {"defend-strip", "STRIP entropy distributions"},
      {"report", "render plots and report.md from existing reports"},
  };
  for (const auto& c : cmds) add_common(app.add_subcommand(c.name, c.help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kParameter;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = resolve(opt);
    const auto layout = Layout::make(cfg);
    const int w = opt.workers;
    RunManifest m;
    if (cmd == "synth-data") m = run_synth_data(cfg, layout, w);
    else if (cmd == "train-injector") m = run_train_injector(cfg, layout, w);
    else if (cmd == "train-clean") m = run_train_clean(cfg, layout, w);
    else if (cmd == "train-victim") m = run_train_victim(cfg, layout, w);
    else if (cmd == "eval") m = run_attack_eval(cfg, layout, w);
    else if (cmd == "defend-prune") m = run_defense_prune(cfg, layout, w);
    else if (cmd == "defend-strip") m = run_defense_strip(cfg, layout, w);
    else m = run_report(cfg, layout);
    std::cout << (layout.manifests() / (m.command + ".json")).string() << "\n";
    return kOk;
  } catch (const DependencyError& e) {
    std::cerr << "freqdoor " << cmd << ": dependency error: " << e.what() << "\n";
    return kDependency;
  } catch (const DivergenceError& e) {
    std::cerr << "freqdoor " << cmd << ": divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const ParameterError& e) {
    std::cerr << "freqdoor " << cmd << ": invalid parameter: " << e.what() << "\n";
    return kParameter;
  } catch (const IoError& e) {
    std::cerr << "freqdoor " << cmd << ": i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "freqdoor " << cmd << ": " << e.what() << "\n";
    return kOther;
  }
}
