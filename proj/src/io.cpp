#include "ist/io.hpp"

#include "ist/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace ist {

void export_pgm(const Mat& m, const std::filesystem::path& path) {
  if (m.size() == 0) throw DimensionError("export_pgm: empty matrix");
  require_finite(m, "export_pgm");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const double lo = m.minCoeff();
  const double hi = m.maxCoeff();
  const double range = hi - lo;
  out << "P2\n" << m.cols() << " " << m.rows() << "\n255\n";
  for (Eigen::Index r = m.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const int px = range > 0.0 ? static_cast<int>(std::lround((m(r, c) - lo) / range * 255.0)) : 0;
      out << (c ? " " : "") << px;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string magic;
  PgmImage img;
  if (!(in >> magic) || magic != "P2" || !(in >> img.width >> img.height >> img.maxval)) {
    throw IoError(path.string() + " is not a plain PGM");
  }
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  for (int& px : img.pixels) {
    if (!(in >> px)) throw IoError(path.string() + ": truncated pixel data");
  }
  return img;
}

Mat hstack(const std::vector<Mat>& parts) {
  if (parts.empty()) return Mat();
  Eigen::Index cols = 0;
  for (const Mat& p : parts) {
    if (p.rows() != parts.front().rows()) throw DimensionError("hstack: row counts differ");
    cols += p.cols();
  }
  Mat out(parts.front().rows(), cols);
  Eigen::Index at = 0;
  for (const Mat& p : parts) {
    out.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return out;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw IoError("cannot write " + path.string());
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw DimensionError("csv row has the wrong number of fields");
  for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
  out_ << '\n';
  out_.flush();
  if (!out_) throw IoError("csv write failed");
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> fields;
  fields.reserve(values.size());
  for (double v : values) fields.push_back(format_number(v));
  row(fields);
}

std::vector<double> loss_row(const LossRecord& r) {
  return {static_cast<double>(r.step), r.rec, r.kl, r.beta, r.vq, r.refiner, r.bridge, r.total};
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  return table;
}

}  // namespace ist
