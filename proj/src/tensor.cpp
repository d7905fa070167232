#include "ist/tensor.hpp"

#include "ist/errors.hpp"

#include <cmath>
#include <string>

namespace ist {

void require_finite(const Mat& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NumericError("non-finite value in " + std::string(what));
  }
}

void round_to_storage(Mat& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
}

void round_to_storage(RowVec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(static_cast<float>(v[i]));
}

double round_to_storage(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace ist
