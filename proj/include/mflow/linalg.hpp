#pragma once

#include <Eigen/Dense>

namespace mflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// exp(A) by scaling and squaring with a degree-13 Pade approximant.
Mat expm(const Mat& a);

// Closest orthogonal matrix (polar factor); determinant sign is kept.
Mat polar_orthonormalize(const Mat& m);

// Least-squares slope of log2(err) against log2(h). Only finite, positive
// errors are used.
double fitted_log2_slope(const Eigen::ArrayXd& h, const Eigen::ArrayXd& err);

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace mflow
