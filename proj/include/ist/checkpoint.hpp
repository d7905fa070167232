#pragma once

#include "ist/pipeline.hpp"
#include "ist/toydata.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ist {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

// Named 32-bit tensors in the checkpoint container:
//   header  one line per tensor "name ndims dim... offset" (offset in bytes
//           into the body), then a blank line
//   body    little-endian IEEE-754 floats in header order
//   trailer little-endian uint64, sum of every header and body byte
class TensorFile {
 public:
  void add(const std::string& name, Tensor tensor);
  void add(const std::string& name, const Mat& m);  // row-major [rows, cols]
  // Text stored one byte per element.
  void add_text(const std::string& name, const std::string& text);

  bool has(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Mat matrix(const std::string& name) const;
  std::string text(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

  std::string serialize() const;
  static TensorFile parse(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static TensorFile load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

TensorFile state_to_tensors(TrainState& state);
TrainState state_from_tensors(const TensorFile& file);

void save_checkpoint(TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

TensorFile dataset_to_tensors(const ToyDataset& data);
ToyDataset dataset_from_tensors(const TensorFile& file);

// A stack of equally shaped mels under `name` ([n, bands, frames]).
void add_mels(TensorFile& file, const std::string& name, const std::vector<ToyMel>& mels);
std::vector<ToyMel> get_mels(const TensorFile& file, const std::string& name);

}  // namespace ist
