#pragma once

#include "ist/pipeline.hpp"
#include "ist/tensor.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace ist {

// Plain "P2" image, one pixel per matrix entry, with row 0 of the image
// holding the last matrix row (highest band). [min, max] maps linearly onto
// [0, 255]; a constant matrix is all zeros.
void export_pgm(const Mat& m, const std::filesystem::path& path);

struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<int> pixels;  // row-major, image order
};
PgmImage read_pgm(const std::filesystem::path& path);

// Side-by-side strip of equally sized matrices sharing one intensity range.
Mat hstack(const std::vector<Mat>& parts);

// Shortest decimal text that reads back as the same double.
std::string format_number(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);
  void row(const std::vector<double>& values);

 private:
  std::ofstream out_;
  std::size_t columns_ = 0;
};

inline const std::vector<std::string> kLossColumns = {"step", "L_rec", "KL", "beta", "L_Q", "L_R", "L_B", "L_All"};
std::vector<double> loss_row(const LossRecord& r);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace ist
