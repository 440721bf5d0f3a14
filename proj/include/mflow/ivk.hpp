#pragma once

#include <vector>

#include "mflow/driver.hpp"
#include "mflow/fields.hpp"
#include "mflow/marcus.hpp"

namespace mflow {

// Stochastic flow p -> F_t(p) of one field along a scalar driver. Linear and
// affine fields use the matrix exponential; other fields are re-solved from
// t = 0 for every query, with derivatives by central differences.
class FlowMap {
public:
    FlowMap(const FieldSpec& field, const DriverPath& z);

    // Map at grid index i, after (left = false) or before (left = true) any
    // jump at t_i.
    Vec value(std::size_t i, const Vec& p, bool left = false) const;
    Mat jacobian(std::size_t i, const Vec& p, bool left = false) const;
    // Second derivative F''(p)(v, v).
    Vec second(std::size_t i, const Vec& p, const Vec& v, bool left = false) const;
    bool exact() const { return exact_; }
    const VectorField& field() const { return *field_; }

private:
    Mat linear_part(std::size_t i, bool left) const;
    Vec replay(std::size_t i, const Vec& p, bool left) const;

    FieldPtr field_;
    const DriverPath* z_;
    bool exact_ = false;
    bool affine_ = false;
    Mat gen_;
    int n_ = 0;
};

struct IvkTerms {
    Vec ito;
    Vec finite_variation;
    Vec jump;
    Vec total() const { return ito + finite_variation + jump; }
};

struct IvkOptions {
    // false reverses the jump order (F before G); only for the negative check
    bool g_jumps_first = true;
};

// The three-part integral of F_{s*} Y(G_s) along Z, with G_0 = id.
IvkTerms gen_ivk_integral(const FieldSpec& x, const FieldSpec& y, const DriverPath& z,
                          const Vec& x0, const IvkOptions& opts = {});

struct IvkReport {
    Vec lhs;         // F_T(G_T(x0))
    Vec rhs;         // x0 + X-integral along w + IVK integral
    Vec x_integral;
    IvkTerms terms;
    double residual = 0.0;
};

IvkReport ivk_report(const FieldSpec& x, const FieldSpec& y, const DriverPath& z, const Vec& x0,
                     const IvkOptions& opts = {});
double verify_ivk(const FieldSpec& x, const FieldSpec& y, const DriverPath& z, const Vec& x0);

// Max over probes and steps of |d(F o G) - dF(G) - F_* dG|.
double verify_leibniz(const FieldSpec& x, const FieldSpec& y, const DriverPath& z,
                      const std::vector<Vec>& probes);

struct TruncationCheck {
    double observed = 0.0;
    double bound = 0.0;
    double omitted_square_sum = 0.0;
    double constant = 0.0;  // the estimated K
    bool holds() const { return observed <= bound; }
};

// Compares F_T(G_T(x0)) computed with the coupled fine and coarse drivers.
TruncationCheck truncation_error_bound_check(const FieldSpec& x, const FieldSpec& y,
                                             const DriverPath& fine, const DriverPath& coarse,
                                             const Vec& x0);

}  // namespace mflow
