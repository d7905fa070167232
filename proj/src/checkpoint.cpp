#include "ist/checkpoint.hpp"

#include "ist/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ist {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::uint64_t byte_sum(const std::string& bytes) {
  std::uint64_t sum = 0;
  for (unsigned char c : bytes) sum += c;
  return sum;
}

void check_name(const std::string& name) {
  if (name.empty() || name.find_first_of(" \t\n\r") != std::string::npos) {
    throw ValidationError("tensor name '" + name + "' must be non-empty without whitespace");
  }
}

}  // namespace

void TensorFile::add(const std::string& name, Tensor tensor) {
  check_name(name);
  if (element_count(tensor.shape) != tensor.data.size()) {
    throw DimensionError("tensor " + name + ": shape does not match data length");
  }
  for (auto& [n, t] : entries_) {
    if (n == name) {
      t = std::move(tensor);
      return;
    }
  }
  entries_.emplace_back(name, std::move(tensor));
}

void TensorFile::add(const std::string& name, const Mat& m) {
  Tensor t;
  t.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<float>(m(r, c)));
  }
  add(name, std::move(t));
}

void TensorFile::add_text(const std::string& name, const std::string& text) {
  Tensor t;
  t.shape = {text.size()};
  for (unsigned char c : text) t.data.push_back(static_cast<float>(c));
  add(name, std::move(t));
}

bool TensorFile::has(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& TensorFile::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw IntegrityError("checkpoint has no tensor '" + name + "'");
}

Mat TensorFile::matrix(const std::string& name) const {
  const Tensor& t = get(name);
  if (t.shape.size() != 2) throw DimensionError("tensor " + name + " is not a matrix");
  Mat m(static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[i++];
  }
  return m;
}

std::string TensorFile::text(const std::string& name) const {
  const Tensor& t = get(name);
  std::string out;
  out.reserve(t.data.size());
  for (float f : t.data) out.push_back(static_cast<char>(static_cast<unsigned char>(f)));
  return out;
}

std::string TensorFile::serialize() const {
  std::string header;
  std::size_t offset = 0;
  for (const auto& [name, t] : entries_) {
    header += name + " " + std::to_string(t.shape.size());
    for (std::size_t d : t.shape) header += " " + std::to_string(d);
    header += " " + std::to_string(offset) + "\n";
    offset += t.data.size() * sizeof(float);
  }
  header += "\n";
  std::string out = header;
  out.reserve(header.size() + offset + sizeof(std::uint64_t));
  for (const auto& [name, t] : entries_) {
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  const std::uint64_t sum = byte_sum(out);
  out.append(reinterpret_cast<const char*>(&sum), sizeof(sum));
  return out;
}

TensorFile TensorFile::parse(const std::string& bytes) {
  std::size_t body_start = 1;
  if (bytes.empty() || bytes[0] != '\n') {
    const auto header_end = bytes.find("\n\n");
    if (header_end == std::string::npos) throw IntegrityError("checkpoint header is not terminated");
    body_start = header_end + 2;
  }
  if (bytes.size() < sizeof(std::uint64_t)) throw IntegrityError("checkpoint truncated");
  const std::size_t payload = bytes.size() - sizeof(std::uint64_t);
  if (body_start > payload) throw IntegrityError("checkpoint truncated");
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + payload, sizeof(stored));
  if (byte_sum(bytes.substr(0, payload)) != stored) throw IntegrityError("checkpoint checksum mismatch");

  TensorFile file;
  std::istringstream header(bytes.substr(0, body_start));
  std::string line;
  std::size_t expected_offset = 0;
  while (std::getline(header, line) && !line.empty()) {
    std::istringstream fields(line);
    std::string name;
    std::size_t ndims = 0;
    if (!(fields >> name >> ndims)) throw IntegrityError("malformed checkpoint header line: " + line);
    Tensor t;
    t.shape.resize(ndims);
    for (auto& d : t.shape) {
      if (!(fields >> d)) throw IntegrityError("malformed checkpoint header line: " + line);
    }
    std::size_t offset = 0;
    std::string extra;
    if (!(fields >> offset) || (fields >> extra)) {
      throw IntegrityError("malformed checkpoint header line: " + line);
    }
    if (offset != expected_offset) throw IntegrityError("tensor " + name + ": offset disagrees with header");
    const std::size_t count = element_count(t.shape);
    const std::size_t nbytes = count * sizeof(float);
    if (body_start + offset + nbytes > payload) {
      throw IntegrityError("tensor " + name + ": body shorter than header");
    }
    t.data.resize(count);
    std::memcpy(t.data.data(), bytes.data() + body_start + offset, nbytes);
    expected_offset += nbytes;
    file.add(name, std::move(t));
  }
  if (body_start + expected_offset != payload) {
    throw IntegrityError("checkpoint body length disagrees with header");
  }
  return file;
}

void TensorFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

TensorFile TensorFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

namespace {

void add_adam(TensorFile& f, const std::string& prefix, const AdamState& adam) {
  f.add_text(prefix + ".step", std::to_string(adam.step));
  for (const auto& [name, m] : adam.m) f.add(prefix + ".m." + name, m);
  for (const auto& [name, v] : adam.v) f.add(prefix + ".v." + name, v);
}

void read_adam(const TensorFile& f, const std::string& prefix, AdamState& adam) {
  adam.step = std::stoll(f.text(prefix + ".step"));
  adam.m.clear();
  adam.v.clear();
  const std::string pm = prefix + ".m.", pv = prefix + ".v.";
  for (const auto& [name, t] : f.entries()) {
    if (name.rfind(pm, 0) == 0) adam.m[name.substr(pm.size())] = f.matrix(name);
    if (name.rfind(pv, 0) == 0) adam.v[name.substr(pv.size())] = f.matrix(name);
  }
}

template <class Target>
void read_into(const TensorFile& f, const std::string& name, Target& target) {
  Mat m = f.matrix(name);
  if (m.rows() != target.rows() || m.cols() != target.cols()) {
    throw IntegrityError("tensor " + name + " has an unexpected shape");
  }
  target = std::move(m);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

TensorFile state_to_tensors(TrainState& state) {
  TensorFile f;
  f.add_text("meta.config", state.config.to_text());
  f.add_text("meta.step", std::to_string(state.step));
  f.add_text("meta.trained", state.model.trained ? "1" : "0");
  f.add_text("meta.rng", state.rng.serialize());
  for (Parameter* p : state.model.all_params()) f.add(p->name, p->value);
  f.add("codebook.cluster_size", state.model.codebook.cluster_size);
  f.add("codebook.embed_sum", state.model.codebook.embed_sum);
  f.add("latent.centre", state.model.latent_centre);
  f.add("latent.spread", state.model.latent_spread);
  add_adam(f, "adam", state.adam);
  add_adam(f, "bridge_adam", state.bridge_adam);
  f.add_text("controller.error_sum", fmt_double(state.controller.error_sum));
  f.add_text("controller.beta", fmt_double(state.controller.beta));
  f.add_text("controller.updates", std::to_string(state.controller.updates));
  f.add_text("kl_ema.value", fmt_double(state.kl_smoother.value));
  f.add_text("kl_ema.seeded", state.kl_smoother.seeded ? "1" : "0");
  return f;
}

TrainState state_from_tensors(const TensorFile& f) {
  TrainState s = TrainState::create(parse_config(f.text("meta.config")));
  s.step = std::stoll(f.text("meta.step"));
  s.model.trained = f.text("meta.trained") == "1";
  s.rng.deserialize(f.text("meta.rng"));
  for (Parameter* p : s.model.all_params()) read_into(f, p->name, p->value);
  read_into(f, "codebook.cluster_size", s.model.codebook.cluster_size);
  read_into(f, "codebook.embed_sum", s.model.codebook.embed_sum);
  read_into(f, "latent.centre", s.model.latent_centre);
  read_into(f, "latent.spread", s.model.latent_spread);
  read_adam(f, "adam", s.adam);
  read_adam(f, "bridge_adam", s.bridge_adam);
  s.controller.error_sum = std::stod(f.text("controller.error_sum"));
  s.controller.beta = std::stod(f.text("controller.beta"));
  s.controller.updates = std::stoll(f.text("controller.updates"));
  s.kl_smoother.value = std::stod(f.text("kl_ema.value"));
  s.kl_smoother.seeded = f.text("kl_ema.seeded") == "1";
  return s;
}

void save_checkpoint(TrainState& state, const std::filesystem::path& path) {
  state_to_tensors(state).save(path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  return state_from_tensors(TensorFile::load(path));
}

void add_mels(TensorFile& file, const std::string& name, const std::vector<ToyMel>& mels) {
  Tensor t;
  const std::size_t rows = mels.empty() ? 0 : static_cast<std::size_t>(mels.front().rows());
  const std::size_t cols = mels.empty() ? 0 : static_cast<std::size_t>(mels.front().cols());
  t.shape = {mels.size(), rows, cols};
  for (const ToyMel& m : mels) {
    if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols) {
      throw DimensionError("add_mels: mels differ in shape");
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<float>(m(r, c)));
    }
  }
  file.add(name, std::move(t));
}

std::vector<ToyMel> get_mels(const TensorFile& file, const std::string& name) {
  const Tensor& t = file.get(name);
  if (t.shape.size() != 3) throw DimensionError("tensor " + name + " is not a mel stack");
  std::vector<ToyMel> out;
  std::size_t i = 0;
  for (std::size_t n = 0; n < t.shape[0]; ++n) {
    ToyMel m(static_cast<Eigen::Index>(t.shape[1]), static_cast<Eigen::Index>(t.shape[2]));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[i++];
    }
    out.push_back(std::move(m));
  }
  return out;
}

TensorFile dataset_to_tensors(const ToyDataset& data) {
  TensorFile f;
  f.add_text("dataset.seed", std::to_string(data.seed));
  std::vector<ToyMel> mels;
  Mat factors(static_cast<Eigen::Index>(data.size()), 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ToySample& s = data.samples[i];
    mels.push_back(s.mel);
    factors.row(static_cast<Eigen::Index>(i)) << s.factors.energy, s.factors.pitch_level,
        s.factors.pitch_variation, s.factors.content;
  }
  add_mels(f, "dataset.mels", mels);
  f.add("dataset.factors", factors);
  return f;
}

ToyDataset dataset_from_tensors(const TensorFile& f) {
  ToyDataset data;
  data.seed = std::stoull(f.text("dataset.seed"));
  const std::vector<ToyMel> mels = get_mels(f, "dataset.mels");
  const Mat factors = f.matrix("dataset.factors");
  if (factors.rows() != static_cast<Eigen::Index>(mels.size()) || factors.cols() != 4) {
    throw IntegrityError("dataset factors disagree with mel count");
  }
  for (std::size_t i = 0; i < mels.size(); ++i) {
    ToySample s;
    s.mel = mels[i];
    const auto r = static_cast<Eigen::Index>(i);
    s.factors.energy = factors(r, 0);
    s.factors.pitch_level = factors(r, 1);
    s.factors.pitch_variation = factors(r, 2);
    s.factors.content = static_cast<int>(factors(r, 3));
    s.content_sequence.assign(kFrames, s.factors.content);
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace ist
