#include "ist/commands.hpp"
#include "ist/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Interpretable style transfer on toy mel-spectrograms"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  bool paper = false;
  ist::CommandOptions opts;
  std::string out_dir = ".", ckpt, dataset, generated, target;

  app.add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "override one key, e.g. --set steps=500");
  app.add_flag("--paper", paper, "start from the paper-scale preset");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--ckpt", ckpt, "model checkpoint");
  app.add_option("--dataset", dataset, "exported dataset (generated from the config when absent)");
  app.add_option("--eval-seed", opts.eval_seed, "seed for inference-time noise");

  for (const std::string& name : ist::kCommands) app.add_subcommand(name);
  app.get_subcommand("sample")->add_option("--count", opts.count, "number of samples");
  app.get_subcommand("sample")->add_option("--content", opts.content, "content id (default cycles)");
  app.get_subcommand("transfer")->add_option("--pairs", opts.pairs, "non-parallel test pairs");
  app.get_subcommand("transfer")->add_option("--images", opts.count, "pairs rendered to PGM");
  app.get_subcommand("eval")->add_option("--generated", generated, "mel file to score");
  app.get_subcommand("eval")->add_option("--target", target, "reference mel file");
  app.get_subcommand("eval")->add_option("--key", opts.mels_key, "tensor name inside the mel files");
  app.get_subcommand("traverse")->add_option("--points", opts.points, "values per latent dim");
  app.get_subcommand("traverse")->add_option("--content", opts.content, "content id");
  app.get_subcommand("bridge-train")->add_option("--steps", opts.bridge_steps, "bridge iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    opts.config = paper ? ist::ModelConfig::paper_preset() : ist::ModelConfig{};
    if (!config_path.empty()) opts.config = ist::load_config(config_path, opts.config);
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ist::ConfigError("--set expects key=value, got '" + s + "'");
      opts.config.set(s.substr(0, eq), s.substr(eq + 1));
      opts.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    opts.config.validate();
    opts.out_dir = out_dir;
    opts.checkpoint = ckpt;
    opts.dataset = dataset;
    opts.generated = generated;
    opts.target = target;
    return ist::run(app.get_subcommands().front()->get_name(), opts, std::cout);
  } catch (const ist::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
