#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mflow/driver.hpp"
#include "mflow/fields.hpp"

namespace mflow {

// Views of a square matrix split after the first k rows and columns.
struct BlockPartition {
    int k = 1;
    int l = 1;
    Mat a1, a2, a3, a4;

    static BlockPartition of(const Mat& a, int k);
    Mat assemble() const;
};

inline constexpr double kDefaultEpsDet = 1e-6;

// F(t) = eta(t) psi(t), eta = [[g1, g2], [0, I]], psi = [[I, 0], [g3, g4]].
struct FactorPair {
    std::string route;  // "algebraic" or "sde"
    int k = 1;
    std::vector<double> times;  // grid times with stored factors (before breakdown)
    std::vector<Mat> eta;
    std::vector<Mat> psi;
    std::vector<double> det_f4;
    std::optional<double> breakdown;
    bool crossing = false;  // det F4 changed sign across a jump
    std::optional<double> crossing_time;
    bool scheme_failure = false;  // non-finite state before breakdown
    std::string failure_reason;

    std::size_t size() const { return times.size(); }
    Mat product(std::size_t i) const { return eta[i] * psi[i]; }
};

struct BreakdownResult {
    std::optional<double> time;
    bool crossing = false;
    std::optional<double> crossing_time;
};

// Splits F into (eta, psi); throws BreakdownError if |det F4| < eps_det.
std::pair<Mat, Mat> split_factors(const Mat& f, int k, double eps_det = kDefaultEpsDet);

FactorPair decompose_linear_algebraic(const Mat& a, const DriverPath& z, int k,
                                      double eps_det = kDefaultEpsDet);

// The four coupled matrix equations for (g1, g2, g3, g4) as one vector field
// on the stacked state (column-major blocks, in that order).
class ConstituentField final : public VectorField {
public:
    ConstituentField(const Mat& a, int k);
    int state_dim() const override { return n_ * n_; }
    int driver_dim() const override { return 1; }
    Mat eval(const Vec& s) const override;

    Vec pack(const Mat& g1, const Mat& g2, const Mat& g3, const Mat& g4) const;
    void unpack(const Vec& s, Mat& g1, Mat& g2, Mat& g3, Mat& g4) const;
    Vec identity_state() const;

private:
    BlockPartition b_;
    int n_;
};

FactorPair decompose_linear_sde(const Mat& a, const DriverPath& z, int k,
                                double eps_det = kDefaultEpsDet);

// First grid time where |det F4| < eps_det or det F4 changes sign over a
// continuous step. Sign changes across a jump only raise the crossing flag.
BreakdownResult breakdown_time(const Mat& a, const DriverPath& z, int k,
                               double eps_det = kDefaultEpsDet);

struct SpectrumCounts {
    int reals = 0;
    int pairs = 0;
};

SpectrumCounts spectrum_counts(const Mat& a);

struct SchurSelection {
    Mat p;           // orthogonal
    int k = 0;
    Mat conjugated;  // P^T A P with the lower-left (n-k) x k block set to zero
};

// Orders a real Schur form so that `reals` real eigenvalues and `pairs`
// complex pairs lead; the first k = reals + 2 pairs columns of P span an
// invariant subspace.
SchurSelection schur_foliation_select(const Mat& a, int reals, int pairs);

// F = f_1 f_2 ... f_m psi, factor j changing only rows in
// [dims[j-1], dims[j]) (dims[-1] = 0); psi changes rows [dims.back(), n).
std::vector<Mat> cascade_factorize(const Mat& f, const std::vector<int>& flag_dims);

}  // namespace mflow
