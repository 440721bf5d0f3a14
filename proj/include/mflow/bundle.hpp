#pragma once

#include <string>
#include <vector>

#include "mflow/driver.hpp"
#include "mflow/linalg.hpp"

namespace mflow {

enum class GroupTag { so2, so3, so2xso2 };

std::string_view group_name(GroupTag g);

// Orthogonality and unit determinant (per block for so2xso2) to tol.
bool in_group(const Mat& g, GroupTag tag, double tol = 1e-10);

// Standard basis of so(3): rotations about the x, y and z axes.
Mat so3_basis(int axis);

struct GroupPath {
    std::vector<double> times;
    std::vector<Mat> mats;
};

struct TrivialBundleFactors {
    GroupPath eta;   // (exp(A Z_t), I) acting on the left
    GroupPath psi;   // (I, y0^{-1} exp(B Z_t) y0) acting on the right
    GroupPath composite;
    GroupPath direct;  // exp(diag(A, B) Z_t) diag(x0, y0)
    double max_error = 0.0;
};

// G x H with the product acting block-diagonally; all factors closed form.
TrivialBundleFactors trivial_bundle_decompose(const Mat& a, const Mat& b, const DriverPath& z, const Mat& x0,
                                              const Mat& y0);

// g = h (+) n with h the isotropy algebra; projections by least squares on
// the skew part, exact for orthonormal bases.
struct ReductiveSplit {
    std::vector<Mat> vertical;    // basis of h
    std::vector<Mat> horizontal;  // basis of n

    Mat project_vertical(const Mat& w) const;
    Mat project_horizontal(const Mat& w) const;
    // max |proj_h(Ad(exp(s V)) N)| over the basis and a few angles s
    double invariance_defect() const;
    ReductiveSplit swapped() const { return {horizontal, vertical}; }
};

// SO(3)/SO(2): h = span{E3}, n = span{E1, E2}; the base point is the north pole.
ReductiveSplit sphere_split();

struct ReductiveResult {
    GroupPath eta;
    GroupPath psi;
    GroupPath direct;  // g0 exp(W Z_t)
    std::vector<std::vector<Mat>> jump_samples;  // eta along each jump transport
    std::vector<double> jump_sizes;
    Mat vertical_gen;
    Mat horizontal_gen;
    bool complete = true;
    std::string stop_reason;
    double max_composite_error = 0.0;
};

// phi_t = g0 exp(W Z_t) = eta_t psi_t with psi_t = exp(V Z_t), V = proj_h W,
// and d eta = eta Ad(psi_t) H dZ (Marcus), H = proj_n W, eta_0 = g0.
ReductiveResult reductive_decompose(const Mat& w, const ReductiveSplit& split, const DriverPath& z,
                                    const Mat& g0);

struct LiftCheck {
    double projection = 0.0;  // max distance on the sphere between pi(eta) and pi(phi)
    double connection = 0.0;  // max |proj_h(eta^{-1} d eta)| / |dZ|
};

LiftCheck horizontal_lift_check(const ReductiveResult& r, const ReductiveSplit& split, const DriverPath& z);

}  // namespace mflow
