#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mflow/linalg.hpp"

namespace mflow {

// A map x -> X(x) with X(x) an out_dim x driver_dim matrix. For a vector
// field out_dim == state_dim; marcus_integral also accepts other shapes.
class VectorField {
public:
    virtual ~VectorField() = default;
    virtual int state_dim() const = 0;
    virtual int driver_dim() const = 0;
    virtual int out_dim() const { return state_dim(); }
    virtual Mat eval(const Vec& x) const = 0;
    virtual Vec apply(const Vec& x, const Vec& dz) const { return eval(x) * dz; }
    // Jacobian of column `col` of X. Central differences unless overridden.
    virtual Mat jacobian(const Vec& x, int col) const;
    Mat jacobian_dir(const Vec& x, const Vec& dz) const;
    virtual bool exact_jacobian() const { return false; }
    // Bound on |d/dx (X(x) dz)| near x, used to size jump substeps.
    virtual double lipschitz(const Vec& x, const Vec& dz) const;
};

using FieldPtr = std::shared_ptr<const VectorField>;

struct LinearSpec {
    std::vector<Mat> mats;  // one generator per driver component
};

struct AffineSpec {
    std::vector<Mat> mats;
    std::vector<Vec> offsets;
};

struct Monomial {
    int row = 0;
    int col = 0;
    double coef = 0.0;
    std::vector<int> powers;  // one exponent per state coordinate
};

struct PolynomialSpec {
    int state_dim = 1;
    int driver_dim = 1;
    std::vector<Monomial> terms;  // total degree <= 3
};

// State is vec(g) (column-major) of an m x m matrix; X_c(g) = W_c g.
struct RightInvariantSpec {
    std::vector<Mat> algebra;
    int group_dim = 0;
};

enum class CatalogName { pendulum, vertical_sine, cubic_shear, van_der_pol };

struct CatalogSpec {
    CatalogName name = CatalogName::pendulum;
    double param = 1.0;
};

using FieldVariant = std::variant<LinearSpec, AffineSpec, PolynomialSpec, RightInvariantSpec, CatalogSpec>;

struct FieldSpec {
    FieldVariant variant;
    int state_dim() const;
    int driver_dim() const;
    std::string tag() const;
};

FieldSpec linear_field(const Mat& a);
FieldSpec affine_field(const Mat& a, const Vec& b);
FieldSpec catalog_field(CatalogName name, double param = 1.0);
FieldSpec right_invariant_field(const Mat& w);

std::string_view catalog_name(CatalogName name);
std::optional<CatalogName> catalog_from_name(std::string_view s);
std::vector<CatalogName> catalog_entries();
std::string_view catalog_description(CatalogName name);

void validate(const FieldSpec& spec);

FieldPtr make_field(const FieldSpec& spec);

Mat evaluate(const FieldSpec& spec, const Vec& x);
Mat jacobian(const FieldSpec& spec, const Vec& x, int col = 0);

// Generators for the exact path of linear fields; empty otherwise. Affine
// fields are embedded as (n+1) x (n+1) matrices acting on (x, 1).
std::optional<std::vector<Mat>> linear_generators(const FieldSpec& spec);
std::optional<std::vector<Mat>> affine_generators(const FieldSpec& spec);

struct OdeFlowResult {
    Vec endpoint;
    std::vector<Vec> samples;  // at u = i / substeps, i = 0..substeps
    int substeps = 1;
};

// Default jump-transport accuracy target for the substep rule.
inline constexpr double kJumpTransportTol = 1e-11;

// Substeps used for the time-one flow of X dz from x: at least 16 and
// 8|dz|Lip, raised until the RK4 error estimate meets kJumpTransportTol.
int jump_substeps(const VectorField& field, const Vec& dz, const Vec& x);

// Time-one flow of u' = X(u) dz by classical RK4. `substeps` <= 0 selects
// the rule above; a positive value is used as a lower bound.
OdeFlowResult ode_flow(const VectorField& field, const Vec& dz, const Vec& x0, int substeps = 0);
OdeFlowResult ode_flow(const FieldSpec& spec, const Vec& dz, const Vec& x0, int substeps = 0);

// Fixed-step RK4 with exactly `substeps` steps (no rule applied).
OdeFlowResult ode_flow_fixed(const VectorField& field, const Vec& dz, const Vec& x0, int substeps);

// Catalog of diffeomorphisms used by the change-of-variables check.
enum class DiffeoName { identity, affine, cubic_plus_identity };

struct Diffeo {
    DiffeoName name = DiffeoName::identity;
    Mat a;          // affine: x -> a x + b
    Vec b;
    double c = 1.0;  // cubic: x_i -> x_i + c x_i^3
    int dim = 2;

    Vec apply(const Vec& x) const;
    Mat jacobian(const Vec& x) const;
    // Throws DomainError if the inverse cannot be found at y.
    Vec inverse(const Vec& y) const;
};

// Pushforward field y -> f'(f^{-1} y) X(f^{-1} y).
class PushforwardField : public VectorField {
public:
    PushforwardField(Diffeo f, FieldPtr x) : f_(std::move(f)), x_(std::move(x)) {}
    int state_dim() const override { return x_->state_dim(); }
    int driver_dim() const override { return x_->driver_dim(); }
    Mat eval(const Vec& y) const override;

private:
    Diffeo f_;
    FieldPtr x_;
};

}  // namespace mflow
