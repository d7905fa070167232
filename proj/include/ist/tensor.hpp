#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace ist {

// Dense 64-bit matrix. Batched data is laid out one sample (or frame) per row.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(const Mat& m, std::string_view what);

// Rounds every entry to the nearest 32-bit float. Persistent training state is
// kept float-representable so checkpoints round-trip exactly.
void round_to_storage(Mat& m);
void round_to_storage(RowVec& v);
double round_to_storage(double x);

}  // namespace ist
