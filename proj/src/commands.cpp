#include "ist/commands.hpp"

#include "ist/checkpoint.hpp"
#include "ist/errors.hpp"
#include "ist/experiments.hpp"
#include "ist/io.hpp"

#include <ostream>

namespace fs = std::filesystem;

namespace ist {

namespace {

ToyDataset load_or_make_dataset(const CommandOptions& o, const ModelConfig& cfg) {
  if (!o.dataset.empty()) return dataset_from_tensors(TensorFile::load(o.dataset));
  return make_dataset(static_cast<std::size_t>(cfg.dataset_n), cfg.seed);
}

TrainState require_checkpoint(const CommandOptions& o) {
  if (o.checkpoint.empty()) throw StateError("this command needs --ckpt");
  if (!fs::exists(o.checkpoint)) throw StateError("checkpoint not found: " + o.checkpoint.string());
  return load_checkpoint(o.checkpoint);
}

// Overrides that only affect inference may be applied to a loaded model.
ModelConfig inference_config(const TrainState& s, const CommandOptions& o) {
  ModelConfig cfg = s.config;
  for (const auto& [key, value] : o.overrides) {
    if (key == "sample_style") cfg.set(key, value);
  }
  return cfg;
}

int content_for(const CommandOptions& o, int i) { return o.content >= 0 ? o.content : i % kContentIds; }

int cmd_train(const CommandOptions& o, std::ostream& log) {
  TrainState state = !o.checkpoint.empty() && fs::exists(o.checkpoint) ? load_checkpoint(o.checkpoint)
                                                                        : TrainState::create(o.config);
  const ToyDataset data = load_or_make_dataset(o, state.config);
  fs::create_directories(o.out_dir);
  dataset_to_tensors(data).save(o.out_dir / "dataset.ckpt");
  CsvWriter csv(o.out_dir / "train_log.csv", kLossColumns);
  const std::int64_t until = total_steps(state.config);
  run_training(state, data, until, [&](const LossRecord& r) {
    csv.row(loss_row(r));
    if (r.step % 1000 == 0 || r.step == until) {
      log << "step " << r.step << " L_rec " << r.rec << " KL " << r.kl << " beta " << r.beta << "\n";
    }
  });
  save_checkpoint(state, o.out_dir / "model.ckpt");
  log << "wrote " << (o.out_dir / "model.ckpt").string() << "\n";
  return 0;
}

int cmd_bridge_train(const CommandOptions& o, std::ostream& log) {
  TrainState state = require_checkpoint(o);
  if (!state.config.use_bridge) throw StateError("bridge is disabled in this checkpoint's configuration");
  const ToyDataset data = load_or_make_dataset(o, state.config);
  fs::create_directories(o.out_dir);
  CsvWriter csv(o.out_dir / "bridge_log.csv", kLossColumns);
  const int steps = o.bridge_steps > 0 ? o.bridge_steps : state.config.steps;
  const std::vector<double> losses = run_bridge_training(state, data, steps);
  for (int i = 1; i <= steps; ++i) {
    LossRecord r;
    r.step = i;
    r.beta = state.current_beta();
    r.bridge = losses[static_cast<std::size_t>(i - 1)];
    r.total = r.bridge;
    csv.row(loss_row(r));
  }
  log << "bridge steps " << steps << " final L_B " << losses.back() << "\n";
  save_checkpoint(state, o.out_dir / "model.ckpt");
  log << "wrote " << (o.out_dir / "model.ckpt").string() << "\n";
  return 0;
}

void write_mels(const fs::path& path, const std::vector<ToyMel>& coarse, const std::vector<ToyMel>& refined) {
  TensorFile f;
  add_mels(f, "mels.coarse", coarse);
  add_mels(f, "mels.refined", refined);
  f.save(path);
}

int cmd_sample(const CommandOptions& o, std::ostream& log) {
  const TrainState state = require_checkpoint(o);
  const ModelConfig cfg = inference_config(state, o);
  fs::create_directories(o.out_dir);
  RngStream rng(o.eval_seed);
  std::vector<ToyMel> coarse, refined;
  for (int i = 0; i < o.count; ++i) {
    const std::vector<int> seq(kFrames, content_for(o, i));
    const Synthesis s = synthesize_from_bridge(state.model, cfg, seq, rng);
    export_pgm(s.refined, o.out_dir / ("sample_" + std::to_string(i) + ".pgm"));
    coarse.push_back(s.coarse);
    refined.push_back(s.refined);
  }
  write_mels(o.out_dir / "samples.mels", coarse, refined);
  log << "wrote " << o.count << " samples to " << o.out_dir.string() << "\n";
  return 0;
}

int cmd_transfer(const CommandOptions& o, std::ostream& log) {
  const TrainState state = require_checkpoint(o);
  const ModelConfig cfg = inference_config(state, o);
  const ToyDataset data = load_or_make_dataset(o, state.config);
  fs::create_directories(o.out_dir);
  const TransferEval ev = evaluate_transfer(state.model, cfg, data, static_cast<std::size_t>(o.pairs), o.eval_seed);
  CsvWriter csv(o.out_dir / "transfer.csv", {"pair", "reference", "content_source", "E", "P", "V",
                                             "E_hat", "P_hat", "V_hat", "hit"});
  std::vector<ToyMel> outputs;
  for (std::size_t k = 0; k < ev.pairs.size(); ++k) {
    const TransferPair& p = ev.pairs[k];
    csv.row({std::to_string(k), std::to_string(p.reference), std::to_string(p.content_source),
             format_number(p.truth.energy), format_number(p.truth.pitch_level),
             format_number(p.truth.pitch_variation), format_number(p.estimate.energy),
             format_number(p.estimate.pitch_level), format_number(p.estimate.pitch_variation),
             p.hit ? "1" : "0"});
    if (static_cast<int>(k) < o.count) {
      export_pgm(hstack({data.samples[p.reference].mel, p.output}),
                 o.out_dir / ("transfer_" + std::to_string(k) + ".pgm"));
    }
    outputs.push_back(p.output);
  }
  TensorFile f;
  add_mels(f, "mels.refined", outputs);
  f.save(o.out_dir / "transfer.mels");
  log << "transfer hit rate " << ev.hit_rate << " over " << ev.pairs.size() << " pairs\n";
  return 0;
}

std::vector<ToyMel> load_mel_set(const fs::path& path, const std::string& key) {
  const TensorFile f = TensorFile::load(path);
  if (f.has(key)) return get_mels(f, key);
  if (f.has("dataset.mels")) return get_mels(f, "dataset.mels");
  throw ValidationError(path.string() + " has no tensor '" + key + "'");
}

int cmd_eval(const CommandOptions& o, std::ostream& log) {
  fs::create_directories(o.out_dir);
  CsvWriter csv(o.out_dir / "eval.csv", {"set", "n", "FD", "MCD", "MSE"});
  if (!o.generated.empty() || !o.target.empty()) {
    if (o.generated.empty() || o.target.empty()) throw UsageError("eval needs both --generated and --target");
    const std::vector<ToyMel> gen = load_mel_set(o.generated, o.mels_key);
    const std::vector<ToyMel> tgt = load_mel_set(o.target, o.mels_key);
    const double fd = toy_fd(gen, tgt);
    std::string mcd_field = "", mse_field = "";
    if (gen.size() == tgt.size()) {
      double m = 0.0, e = 0.0;
      for (std::size_t i = 0; i < gen.size(); ++i) {
        m += mcd(gen[i], tgt[i]);
        e += (gen[i] - tgt[i]).array().square().mean();
      }
      mcd_field = format_number(m / static_cast<double>(gen.size()));
      mse_field = format_number(e / static_cast<double>(gen.size()));
    }
    csv.row({"generated", std::to_string(gen.size()), format_number(fd), mcd_field, mse_field});
    log << "FD " << fd << (mcd_field.empty() ? "" : " MCD " + mcd_field) << "\n";
    return 0;
  }
  const TrainState state = require_checkpoint(o);
  const ModelConfig cfg = inference_config(state, o);
  const ToyDataset data = load_or_make_dataset(o, state.config);
  const ReconstructionEval ev = evaluate_reconstruction(state.model, cfg, data, o.eval_seed);
  const std::string n = std::to_string(ev.count);
  csv.row({"coarse", n, format_number(ev.fd_coarse), format_number(ev.mcd_coarse), format_number(ev.mse_coarse)});
  csv.row({"refined", n, format_number(ev.fd_refined), format_number(ev.mcd_refined), format_number(ev.mse_refined)});
  log << "coarse FD " << ev.fd_coarse << " MCD " << ev.mcd_coarse << "; refined FD " << ev.fd_refined
      << " MCD " << ev.mcd_refined << "\n";
  return 0;
}

int cmd_traverse(const CommandOptions& o, std::ostream& log) {
  const TrainState state = require_checkpoint(o);
  const ModelConfig cfg = inference_config(state, o);
  fs::create_directories(o.out_dir);
  const int content = o.content >= 0 ? o.content : 0;
  const std::vector<int> seq(kFrames, content);
  const StyleModel& m = state.model;
  for (int d = 0; d < m.posterior.latent_dim(); ++d) {
    std::vector<double> values;
    for (int k = 0; k < o.points; ++k) {
      const double u = o.points > 1 ? -2.0 + 4.0 * k / (o.points - 1) : 0.0;
      values.push_back(m.latent_centre(0, d) + u * m.latent_spread(0, d));
    }
    export_pgm(hstack(traverse_latent(m, cfg, d, values, seq, o.eval_seed)),
               o.out_dir / ("traverse_dim" + std::to_string(d) + ".pgm"));
  }
  const ExclusivityReport rep = traversal_report(m, cfg, content, o.eval_seed, o.points);
  CsvWriter csv(o.out_dir / "traverse.csv", {"dim", "r_E", "r_P", "r_V", "exclusivity", "degenerate"});
  for (const DimExclusivity& d : rep.dims) {
    csv.row({std::to_string(d.dim), format_number(d.r_energy), format_number(d.r_pitch),
             format_number(d.r_variation), format_number(d.exclusivity), d.degenerate ? "1" : "0"});
  }
  log << "best dims: E " << rep.best_energy_dim << ", P " << rep.best_pitch_dim << ", V "
      << rep.best_variation_dim << "\n";
  return 0;
}

int cmd_ablate(const CommandOptions& o, std::ostream& log) {
  fs::create_directories(o.out_dir);
  const ToyDataset data = load_or_make_dataset(o, o.config);
  CsvWriter csv(o.out_dir / "ablation.csv", {"config", "FD", "MCD", "MSE"});
  for (const AblationVariant& v : ablation_variants(o.config)) {
    TrainState state = TrainState::create(v.config);
    run_training(state, data, total_steps(v.config));
    const ReconstructionEval ev = evaluate_reconstruction(state.model, v.config, data, o.eval_seed);
    csv.row({v.name, format_number(ev.fd_refined), format_number(ev.mcd_refined), format_number(ev.mse_refined)});
    log << v.name << ": FD " << ev.fd_refined << " MCD " << ev.mcd_refined << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::string& command, const CommandOptions& options, std::ostream& log) {
  if (command == "train") return cmd_train(options, log);
  if (command == "bridge-train") return cmd_bridge_train(options, log);
  if (command == "sample") return cmd_sample(options, log);
  if (command == "transfer") return cmd_transfer(options, log);
  if (command == "eval") return cmd_eval(options, log);
  if (command == "traverse") return cmd_traverse(options, log);
  if (command == "ablate") return cmd_ablate(options, log);
  throw UsageError("unknown command '" + command + "'");
}

}  // namespace ist
