#include "ist/config.hpp"

#include "ist/errors.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace ist {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::vaefs: return "vaefs";
    case Mode::one_stage: return "one_stage";
    case Mode::two_stage: return "two_stage";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  if (text == "vaefs") return Mode::vaefs;
  if (text == "one_stage") return Mode::one_stage;
  if (text == "two_stage") return Mode::two_stage;
  throw ConfigError("mode: expected vaefs|one_stage|two_stage, got '" + std::string(text) + "'");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(std::string(key) + ": cannot parse '" + std::string(text) + "'");
  }
  return value;
}

double parse_double(std::string_view key, std::string_view text) {
  // from_chars for double is missing on older libstdc++.
  std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw ConfigError(std::string(key) + ": cannot parse '" + s + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(std::string(key) + ": expected true|false, got '" + std::string(text) + "'");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Field {
  std::function<void(ModelConfig&, std::string_view)> set;
  std::function<std::string(const ModelConfig&)> get;
};

#define IST_INT_FIELD(name)                                                              \
  {                                                                                      \
#name, Field {                                                                           \
      [](ModelConfig& c, std::string_view v) { c.name = parse_number<int>(#name, v); }, \
          [](const ModelConfig& c) { return std::to_string(c.name); }                   \
    }                                                                                    \
  }
#define IST_DOUBLE_FIELD(name)                                                           \
  {                                                                                      \
#name, Field {                                                                           \
      [](ModelConfig& c, std::string_view v) { c.name = parse_double(#name, v); },       \
          [](const ModelConfig& c) { return fmt_double(c.name); }                        \
    }                                                                                    \
  }
#define IST_BOOL_FIELD(name)                                                             \
  {                                                                                      \
#name, Field {                                                                           \
      [](ModelConfig& c, std::string_view v) { c.name = parse_bool(#name, v); },         \
          [](const ModelConfig& c) { return std::string(c.name ? "true" : "false"); }   \
    }                                                                                    \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"mode", Field{[](ModelConfig& c, std::string_view v) { c.mode = parse_mode(v); },
                     [](const ModelConfig& c) { return std::string(to_string(c.mode)); }}},
      IST_INT_FIELD(latent_dim),
      IST_INT_FIELD(codebook_size),
      IST_DOUBLE_FIELD(gamma),
      IST_DOUBLE_FIELD(kp),
      IST_DOUBLE_FIELD(ki),
      IST_DOUBLE_FIELD(beta_min),
      IST_DOUBLE_FIELD(beta_max),
      IST_DOUBLE_FIELD(kl_target),
      IST_DOUBLE_FIELD(kl_ema_decay),
      IST_DOUBLE_FIELD(rec_weight),
      IST_INT_FIELD(T_refiner),
      IST_INT_FIELD(T_bridge),
      IST_INT_FIELD(steps),
      IST_INT_FIELD(batch),
      IST_DOUBLE_FIELD(lr),
      {"seed", Field{[](ModelConfig& c, std::string_view v) {
                       c.seed = parse_number<std::uint64_t>("seed", v);
                     },
                     [](const ModelConfig& c) { return std::to_string(c.seed); }}},
      IST_INT_FIELD(dataset_n),
      IST_INT_FIELD(ramp),
      IST_BOOL_FIELD(use_controlvae),
      IST_BOOL_FIELD(use_vq),
      IST_BOOL_FIELD(use_bridge),
      IST_BOOL_FIELD(ema_codebook),
      IST_BOOL_FIELD(sample_style),
      IST_INT_FIELD(encoder_dim),
      IST_INT_FIELD(content_dim),
      IST_INT_FIELD(decoder_hidden),
      IST_INT_FIELD(decoder_layers),
      IST_INT_FIELD(refiner_hidden),
      IST_INT_FIELD(refiner_layers),
      IST_DOUBLE_FIELD(refiner_data_scale),
      IST_INT_FIELD(cond_proj_dim),
      IST_INT_FIELD(bridge_hidden),
      IST_INT_FIELD(bridge_layers),
  };
  return table;
}

#undef IST_INT_FIELD
#undef IST_DOUBLE_FIELD
#undef IST_BOOL_FIELD

void require(bool ok, const char* key, const char* rule) {
  if (!ok) throw ConfigError(std::string(key) + ": must be " + rule);
}

}  // namespace

ModelConfig ModelConfig::paper_preset() {
  ModelConfig c;
  c.latent_dim = 32;
  c.codebook_size = 1024;
  c.gamma = 0.25;
  c.kp = 0.01;
  c.ki = 0.0001;
  c.beta_min = 0.0;
  c.kl_target = 3.0;
  c.T_refiner = 1000;
  c.T_bridge = 1000;
  c.steps = 320000;
  return c;
}

void ModelConfig::validate() const {
  require(latent_dim >= 1, "latent_dim", ">= 1");
  require(codebook_size >= 1, "codebook_size", ">= 1");
  require(gamma >= 0.0, "gamma", ">= 0");
  require(kp >= 0.0, "kp", ">= 0");
  require(ki >= 0.0, "ki", ">= 0");
  require(beta_min >= 0.0, "beta_min", ">= 0");
  require(beta_max >= beta_min, "beta_max", ">= beta_min");
  require(kl_target >= 0.0, "kl_target", ">= 0");
  require(kl_ema_decay >= 0.0 && kl_ema_decay < 1.0, "kl_ema_decay", "in [0, 1)");
  require(rec_weight > 0.0, "rec_weight", "> 0");
  require(T_refiner >= 1, "T_refiner", ">= 1");
  require(T_bridge >= 1, "T_bridge", ">= 1");
  require(steps >= 0, "steps", ">= 0");
  require(batch >= 1, "batch", ">= 1");
  require(lr > 0.0, "lr", "> 0");
  require(dataset_n >= 10, "dataset_n", ">= 10");
  require(ramp >= 0, "ramp", ">= 0");
  require(encoder_dim >= 1, "encoder_dim", ">= 1");
  require(content_dim >= 1, "content_dim", ">= 1");
  require(decoder_hidden >= 1, "decoder_hidden", ">= 1");
  require(decoder_layers >= 0, "decoder_layers", ">= 0");
  require(refiner_hidden >= 1, "refiner_hidden", ">= 1");
  require(refiner_layers >= 0, "refiner_layers", ">= 0");
  require(refiner_data_scale >= 0.0, "refiner_data_scale", ">= 0");
  require(cond_proj_dim >= 1, "cond_proj_dim", ">= 1");
  require(bridge_hidden >= 1, "bridge_hidden", ">= 1");
  require(bridge_layers >= 0, "bridge_layers", ">= 0");
}

std::string ModelConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + "=" + field.get(*this) + "\n";
  return out;
}

void ModelConfig::set(std::string_view key, std::string_view value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + std::string(key) + "'");
}

const std::vector<std::string>& ModelConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [key, field] : fields()) out.push_back(key);
    return out;
  }();
  return names;
}

ModelConfig parse_config(std::string_view text, const ModelConfig& base) {
  ModelConfig cfg = base;
  std::map<std::string, int> line_of;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
    line_of[key] = line_no;
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    // validate() messages start with the offending key
    const std::string msg = e.what();
    const auto it = line_of.find(msg.substr(0, msg.find(':')));
    if (it == line_of.end()) throw;
    throw ConfigError("line " + std::to_string(it->second) + ": " + msg);
  }
  return cfg;
}

ModelConfig load_config(const std::filesystem::path& path, const ModelConfig& base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), base);
}

}  // namespace ist
