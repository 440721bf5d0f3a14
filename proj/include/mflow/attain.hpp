#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mflow {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Tangent of the leaf through (x, y); need not be normalized. A zero vector
// outside the excluded set is a degeneracy.
using LineField = std::function<Vec2(double, double)>;

struct Raster {
    double xmin = -1.0, xmax = 1.0, ymin = -1.0, ymax = 1.0;
    int nx = 100, ny = 100;

    double dx() const { return (xmax - xmin) / nx; }
    double dy() const { return (ymax - ymin) / ny; }
    std::size_t cells() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i); }
    double cx(int i) const { return xmin + (i + 0.5) * dx(); }
    double cy(int j) const { return ymin + (j + 0.5) * dy(); }
    // -1 outside the window
    long cell_of(double x, double y) const;
};

using Mask = std::vector<std::uint8_t>;

struct FoliationPair {
    std::string name;
    LineField horizontal;
    LineField vertical;
    std::vector<Vec2> excluded;  // removed points, e.g. the origin
};

FoliationPair cartesian_pair();
// Hyperbolas xy = a as the vertical family, their rotation by pi/4
// (y^2 - x^2 = c) as the horizontal family; the origin is removed.
FoliationPair hyperbolic_pair();
// Vertical: y = c - |sec x| with the lines x = r pi + pi/2.
// Horizontal: y = c - |csc x| with the lines x = r pi.
FoliationPair secant_pair();

enum class Exec { serial, parallel };

// Cells within one cell diagonal of an excluded point.
Mask excluded_mask(const Raster& r, const FoliationPair& pair);

// A cell belongs to the result iff the streamline through its centre meets a
// cell of `seed` (traced both ways, RK2 midpoint, step half a cell).
Mask saturate(const Mask& seed, const LineField& field, const Raster& r, const Mask& excluded,
              Exec exec = Exec::parallel);

// Cells crossed by the leaf through p.
Mask saturate_point(Vec2 p, const LineField& field, const Raster& r, const Mask& excluded);

double coverage(const Mask& m, const Mask& excluded);
// Fraction of non-excluded cells where the mask equals pred(centre).
double agreement(const Mask& m, const Raster& r, const Mask& excluded,
                 const std::function<bool(double, double)>& pred);
std::size_t count(const Mask& m);

// Alternating saturations from p. vertical_first gives A^k = H(V(...)).
std::vector<Mask> saturation_chain(Vec2 p, const FoliationPair& pair, const Raster& r, int depth,
                                   bool vertical_first, Exec exec = Exec::parallel);

struct AttainResult {
    Raster raster;
    Vec2 p;
    std::vector<Mask> masks;        // A^1 .. A^kmax
    std::vector<double> coverage;   // per k
    std::vector<int> closed;        // per k: 1 if closed under one more vertical saturation, -1 not checked
    std::optional<int> index;       // smallest k with full coverage and closure
    bool window_unbounded = false;
    Mask excluded;

    // per cell: first k with the cell attained, 0 if never
    std::vector<int> first_reached() const;
};

inline constexpr double kCoverageFull = 0.995;

AttainResult attainable_sets(Vec2 p, const FoliationPair& pair, const Raster& r, int kmax,
                             Exec exec = Exec::parallel);

// Both saturation orders to depth k, intersected.
Mask co_attainable(Vec2 p, const FoliationPair& pair, const Raster& r, int k, Exec exec = Exec::parallel);

struct CommuteResult {
    bool commute = false;
    double mismatch = 0.0;
};

CommuteResult commute_check(Vec2 p, const FoliationPair& pair, const Raster& r, int k,
                            Exec exec = Exec::parallel);

// Width in x of the attained cells on the row nearest to y.
double row_extent(const Mask& m, const Raster& r, double y, double* lo = nullptr, double* hi = nullptr);

// Binary PGM (P5): 0 outside, 255 min(k, 8) / 8 for first-reached k.
std::string to_pgm(const AttainResult& res);

}  // namespace mflow
