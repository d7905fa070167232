#include "ist/checkpoint.hpp"
#include "ist/commands.hpp"
#include "ist/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ist;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ist_test_commands" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelConfig tiny() {
  ModelConfig c;
  c.mode = Mode::two_stage;
  c.latent_dim = 4;
  c.codebook_size = 8;
  c.encoder_dim = 8;
  c.content_dim = 4;
  c.decoder_hidden = 12;
  c.decoder_layers = 1;
  c.refiner_hidden = 12;
  c.refiner_layers = 1;
  c.cond_proj_dim = 4;
  c.bridge_hidden = 12;
  c.bridge_layers = 1;
  c.T_refiner = 4;
  c.T_bridge = 4;
  c.batch = 4;
  c.steps = 6;
  c.dataset_n = 30;
  return c;
}

CommandOptions options_in(const fs::path& dir) {
  CommandOptions o;
  o.config = tiny();
  o.out_dir = dir;
  return o;
}

std::ostringstream sink;

// One trained model shared by the inference tests.
const fs::path& trained_model() {
  static const fs::path ckpt = [] {
    const fs::path dir = fresh_dir("model");
    run("train", options_in(dir), sink);
    return dir / "model.ckpt";
  }();
  return ckpt;
}

}  // namespace

TEST_CASE("unknown commands and missing checkpoints") {
  const fs::path dir = fresh_dir("errors");
  CommandOptions o = options_in(dir);
  CHECK_THROWS_AS(run("fly", o, sink), UsageError);
  for (const char* cmd : {"bridge-train", "sample", "transfer", "traverse", "eval"}) {
    CAPTURE(cmd);
    CHECK_THROWS_AS(run(cmd, o, sink), StateError);
  }
  o.checkpoint = dir / "absent.ckpt";
  CHECK_THROWS_AS(run("sample", o, sink), StateError);
  o.generated = dir / "g.mels";
  CHECK_THROWS_AS(run("eval", o, sink), UsageError);
}

TEST_CASE("train writes its artifacts and is reproducible") {
  const fs::path a = fresh_dir("train_a"), b = fresh_dir("train_b");
  CHECK(run("train", options_in(a), sink) == 0);
  CHECK(run("train", options_in(b), sink) == 0);
  for (const char* f : {"model.ckpt", "dataset.ckpt", "train_log.csv"}) CHECK(fs::exists(a / f));
  CHECK(slurp(a / "train_log.csv") == slurp(b / "train_log.csv"));
  CHECK(slurp(a / "model.ckpt") == slurp(b / "model.ckpt"));

  const CsvTable log = read_csv(a / "train_log.csv");
  CHECK(log.header == kLossColumns);
  REQUIRE(log.rows.size() == 12);
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    CHECK(std::stoll(log.rows[i][0]) == static_cast<long long>(i + 1));
    const double beta = std::stod(log.rows[i][3]);
    CHECK(beta >= 0.0);
    CHECK(beta <= 1.0);
  }
  // Stage two leaves the controller untouched.
  const TrainState s = load_checkpoint(a / "model.ckpt");
  CHECK(s.step == 12);
}

TEST_CASE("train resumes from an existing checkpoint") {
  const fs::path dir = fresh_dir("resume");
  CommandOptions o = options_in(dir);
  o.config.steps = 3;
  run("train", o, sink);
  TrainState partial = load_checkpoint(dir / "model.ckpt");
  partial.config.steps = 6;
  save_checkpoint(partial, dir / "model.ckpt");
  o.checkpoint = dir / "model.ckpt";
  run("train", o, sink);
  CHECK(read_csv(dir / "train_log.csv").rows.size() == 6);
  CHECK(load_checkpoint(dir / "model.ckpt").step == 12);
}

TEST_CASE("bridge-train logs only the bridge loss") {
  const fs::path dir = fresh_dir("bridge");
  CommandOptions o = options_in(dir);
  o.checkpoint = trained_model();
  o.bridge_steps = 3;
  CHECK(run("bridge-train", o, sink) == 0);
  const CsvTable t = read_csv(dir / "bridge_log.csv");
  REQUIRE(t.rows.size() == 3);
  CHECK(std::stod(t.rows[0][6]) > 0.0);
  CHECK(std::stod(t.rows[0][1]) == 0.0);
}

TEST_CASE("sample, then score the samples against themselves") {
  const fs::path dir = fresh_dir("sample");
  CommandOptions o = options_in(dir);
  o.checkpoint = trained_model();
  o.count = 3;
  CHECK(run("sample", o, sink) == 0);
  for (int i = 0; i < 3; ++i) CHECK(fs::exists(dir / ("sample_" + std::to_string(i) + ".pgm")));
  const PgmImage img = read_pgm(dir / "sample_0.pgm");
  CHECK(img.width == kFrames);
  CHECK(img.height == kBands);

  CommandOptions e;
  e.out_dir = dir;
  e.generated = dir / "samples.mels";
  e.target = dir / "samples.mels";
  CHECK(run("eval", e, sink) == 0);
  const CsvTable t = read_csv(dir / "eval.csv");
  REQUIRE(t.rows.size() == 1);
  CHECK(std::stoi(t.rows[0][1]) == 3);
  CHECK(std::abs(std::stod(t.rows[0][2])) < 1e-6);
  CHECK(std::stod(t.rows[0][3]) == 0.0);
  CHECK(std::stod(t.rows[0][4]) == 0.0);
}

TEST_CASE("eval on the test split reports coarse and refined rows") {
  const fs::path dir = fresh_dir("eval");
  CommandOptions o = options_in(dir);
  o.checkpoint = trained_model();
  CHECK(run("eval", o, sink) == 0);
  const CsvTable t = read_csv(dir / "eval.csv");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "coarse");
  CHECK(t.rows[1][0] == "refined");
  CHECK(std::stoi(t.rows[0][1]) == 3);
}

TEST_CASE("transfer writes one row per pair") {
  const fs::path dir = fresh_dir("transfer");
  CommandOptions o = options_in(dir);
  o.checkpoint = trained_model();
  o.pairs = 5;
  o.count = 2;
  CHECK(run("transfer", o, sink) == 0);
  const CsvTable t = read_csv(dir / "transfer.csv");
  CHECK(t.header.size() == 10);
  CHECK(t.rows.size() == 5);
  CHECK(fs::exists(dir / "transfer_1.pgm"));
  CHECK_FALSE(fs::exists(dir / "transfer_2.pgm"));
  for (const auto& row : t.rows) CHECK((row[9] == "0" || row[9] == "1"));
}

TEST_CASE("traverse covers every latent dim") {
  const fs::path dir = fresh_dir("traverse");
  CommandOptions o = options_in(dir);
  o.checkpoint = trained_model();
  o.points = 5;
  CHECK(run("traverse", o, sink) == 0);
  CHECK(read_csv(dir / "traverse.csv").rows.size() == 4);
  const PgmImage img = read_pgm(dir / "traverse_dim3.pgm");
  CHECK(img.width == 5 * kFrames);
}

TEST_CASE("ablate reports four configurations") {
  const fs::path dir = fresh_dir("ablate");
  CommandOptions o = options_in(dir);
  o.config.steps = 2;
  CHECK(run("ablate", o, sink) == 0);
  const CsvTable t = read_csv(dir / "ablation.csv");
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows[0][0] == "full");
  CHECK(t.rows[3][0] == "w/o Diffusion Bridge");
}
