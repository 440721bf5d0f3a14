#include "mflow/attain.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "mflow/errors.hpp"

namespace mflow {

long Raster::cell_of(double x, double y) const
{
    if (!(x >= xmin && x < xmax && y >= ymin && y < ymax)) return -1;
    const int i = std::min(nx - 1, static_cast<int>(std::floor((x - xmin) / dx())));
    const int j = std::min(ny - 1, static_cast<int>(std::floor((y - ymin) / dy())));
    return static_cast<long>(index(i, j));
}

FoliationPair cartesian_pair()
{
    return {"cartesian", [](double, double) { return Vec2{1.0, 0.0}; },
            [](double, double) { return Vec2{0.0, 1.0}; }, {}};
}

FoliationPair hyperbolic_pair()
{
    return {"hyperbolic", [](double x, double y) { return Vec2{y, x}; },
            [](double x, double y) { return Vec2{x, -y}; }, {Vec2{0.0, 0.0}}};
}

FoliationPair secant_pair()
{
    return {"secant",
            [](double x, double) {
                const double s = std::sin(x);
                return Vec2{s * std::abs(s), std::cos(x)};
            },
            [](double x, double) {
                const double c = std::cos(x);
                return Vec2{c * std::abs(c), -std::sin(x)};
            },
            {}};
}

Mask excluded_mask(const Raster& r, const FoliationPair& pair)
{
    Mask m(r.cells(), 0);
    const double rad = std::hypot(r.dx(), r.dy());
    for (const auto& e : pair.excluded)
        for (int j = 0; j < r.ny; ++j)
            for (int i = 0; i < r.nx; ++i)
                if (std::hypot(r.cx(i) - e.x, r.cy(j) - e.y) < rad) m[r.index(i, j)] = 1;
    return m;
}

namespace {

struct Tracer {
    const LineField& field;
    const Raster& r;
    const Mask& excluded;
    double h;
    long cap;

    Tracer(const LineField& f, const Raster& rr, const Mask& ex)
        : field(f), r(rr), excluded(ex), h(0.5 * std::min(rr.dx(), rr.dy())), cap(8L * (rr.nx + rr.ny))
    {
    }

    Vec2 unit(double x, double y, Vec2 prev) const
    {
        const Vec2 v = field(x, y);
        const double n = std::sqrt(v.x * v.x + v.y * v.y);
        if (!(n > 1e-300)) throw DegeneracyError("line field vanishes", x, y);
        Vec2 d{v.x / n, v.y / n};
        if (d.x * prev.x + d.y * prev.y < 0.0) d = {-d.x, -d.y};
        return d;
    }

    // Follows the leaf from (x, y) in direction sign; visit(cell) returning
    // true stops the trace and makes it return true.
    template <class Visit>
    bool run(double x, double y, double sign, Visit&& visit) const
    {
        const Vec2 v0 = field(x, y);
        Vec2 prev{sign * v0.x, sign * v0.y};
        long last = r.cell_of(x, y);
        const long nx = r.nx;
        for (long s = 0; s < cap; ++s) {
            const Vec2 d1 = unit(x, y, prev);
            const double mx = x + 0.5 * h * d1.x, my = y + 0.5 * h * d1.y;
            const Vec2 d2 = unit(mx, my, d1);
            x += h * d2.x;
            y += h * d2.y;
            prev = d2;
            const long c = r.cell_of(x, y);
            if (c < 0 || excluded[static_cast<std::size_t>(c)]) return false;
            if (c == last) continue;
            // a diagonal move also touches the two shared neighbours; visiting
            // them keeps one-cell-wide curves from leaking
            if (last >= 0 && c % nx != last % nx && c / nx != last / nx) {
                const long a = (last / nx) * nx + c % nx;
                const long b = (c / nx) * nx + last % nx;
                if (!excluded[static_cast<std::size_t>(a)] && visit(static_cast<std::size_t>(a))) return true;
                if (!excluded[static_cast<std::size_t>(b)] && visit(static_cast<std::size_t>(b))) return true;
            }
            last = c;
            if (visit(static_cast<std::size_t>(c))) return true;
        }
        return false;
    }
};

void saturate_rows(const Mask& seed, const Tracer& t, const Raster& r, const Mask& excluded, Mask& out, int j)
{
    for (int i = 0; i < r.nx; ++i) {
        const std::size_t c = r.index(i, j);
        if (excluded[c]) continue;
        if (seed[c]) {
            out[c] = 1;
            continue;
        }
        auto hit = [&](std::size_t cell) { return seed[cell] != 0; };
        const double x = r.cx(i), y = r.cy(j);
        if (t.run(x, y, 1.0, hit) || t.run(x, y, -1.0, hit)) out[c] = 1;
    }
}

}  // namespace

Mask saturate(const Mask& seed, const LineField& field, const Raster& r, const Mask& excluded, Exec exec)
{
    if (seed.size() != r.cells() || excluded.size() != r.cells())
        throw ParameterError("saturate: mask size does not match the raster");
    Mask out(r.cells(), 0);
    const Tracer t(field, r, excluded);
    if (exec == Exec::serial) {
        for (int j = 0; j < r.ny; ++j) saturate_rows(seed, t, r, excluded, out, j);
        return out;
    }
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j < r.ny; ++j) {
        try {
            saturate_rows(seed, t, r, excluded, out, j);
        } catch (...) {
#pragma omp critical(mflow_saturate_error)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return out;
}

Mask saturate_point(Vec2 p, const LineField& field, const Raster& r, const Mask& excluded)
{
    const long c0 = r.cell_of(p.x, p.y);
    if (c0 < 0) throw ParameterError("saturate_point: point outside the window");
    if (excluded[static_cast<std::size_t>(c0)]) throw ParameterError("saturate_point: point in the excluded set");
    Mask out(r.cells(), 0);
    out[static_cast<std::size_t>(c0)] = 1;
    const Tracer t(field, r, excluded);
    auto mark = [&](std::size_t cell) {
        out[cell] = 1;
        return false;
    };
    t.run(p.x, p.y, 1.0, mark);
    t.run(p.x, p.y, -1.0, mark);
    return out;
}

std::size_t count(const Mask& m)
{
    return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; }));
}

double coverage(const Mask& m, const Mask& excluded)
{
    std::size_t in = 0, total = 0;
    for (std::size_t c = 0; c < m.size(); ++c) {
        if (excluded[c]) continue;
        ++total;
        in += m[c] ? 1 : 0;
    }
    return total ? static_cast<double>(in) / static_cast<double>(total) : 0.0;
}

double agreement(const Mask& m, const Raster& r, const Mask& excluded,
                 const std::function<bool(double, double)>& pred)
{
    std::size_t agree = 0, total = 0;
    for (int j = 0; j < r.ny; ++j)
        for (int i = 0; i < r.nx; ++i) {
            const std::size_t c = r.index(i, j);
            if (excluded[c]) continue;
            ++total;
            if ((m[c] != 0) == pred(r.cx(i), r.cy(j))) ++agree;
        }
    return total ? static_cast<double>(agree) / static_cast<double>(total) : 0.0;
}

std::vector<Mask> saturation_chain(Vec2 p, const FoliationPair& pair, const Raster& r, int depth,
                                   bool vertical_first, Exec exec)
{
    const Mask ex = excluded_mask(r, pair);
    const LineField& first = vertical_first ? pair.vertical : pair.horizontal;
    const LineField& second = vertical_first ? pair.horizontal : pair.vertical;
    std::vector<Mask> out;
    Mask cur = saturate_point(p, first, r, ex);
    for (int k = 1; k <= depth; ++k) {
        if (k > 1) cur = saturate(cur, first, r, ex, exec);
        cur = saturate(cur, second, r, ex, exec);
        out.push_back(cur);
    }
    return out;
}

std::vector<int> AttainResult::first_reached() const
{
    std::vector<int> f(raster.cells(), 0);
    for (std::size_t k = masks.size(); k-- > 0;)
        for (std::size_t c = 0; c < f.size(); ++c)
            if (masks[k][c]) f[c] = static_cast<int>(k + 1);
    return f;
}

AttainResult attainable_sets(Vec2 p, const FoliationPair& pair, const Raster& r, int kmax, Exec exec)
{
    if (kmax < 1) throw ParameterError("attainable_sets: kmax must be >= 1");
    AttainResult res;
    res.raster = r;
    res.p = p;
    res.excluded = excluded_mask(r, pair);
    res.masks = saturation_chain(p, pair, r, kmax, true, exec);
    for (int k = 0; k < kmax; ++k) {
        const Mask& m = res.masks[static_cast<std::size_t>(k)];
        const double cov = coverage(m, res.excluded);
        res.coverage.push_back(cov);
        int closed = -1;
        if (cov >= kCoverageFull && !res.index) {
            // fixed point of the next vertical saturation
            const Mask next = saturate(m, pair.vertical, r, res.excluded, exec);
            closed = next == m ? 1 : 0;
            if (closed) res.index = k + 1;
        }
        res.closed.push_back(closed);
    }
    res.window_unbounded = !res.index.has_value();
    return res;
}

Mask co_attainable(Vec2 p, const FoliationPair& pair, const Raster& r, int k, Exec exec)
{
    const Mask a = saturation_chain(p, pair, r, k, true, exec).back();
    const Mask b = saturation_chain(p, pair, r, k, false, exec).back();
    Mask out(a.size());
    for (std::size_t c = 0; c < a.size(); ++c) out[c] = a[c] && b[c];
    return out;
}

CommuteResult commute_check(Vec2 p, const FoliationPair& pair, const Raster& r, int k, Exec exec)
{
    const Mask ex = excluded_mask(r, pair);
    const Mask a = saturation_chain(p, pair, r, k, true, exec).back();
    const Mask b = saturation_chain(p, pair, r, k, false, exec).back();
    std::size_t diff = 0, total = 0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        if (ex[c]) continue;
        ++total;
        if ((a[c] != 0) != (b[c] != 0)) ++diff;
    }
    CommuteResult cr;
    cr.mismatch = total ? static_cast<double>(diff) / static_cast<double>(total) : 0.0;
    cr.commute = cr.mismatch <= 1.0 - kCoverageFull;
    return cr;
}

double row_extent(const Mask& m, const Raster& r, double y, double* lo, double* hi)
{
    int j = static_cast<int>(std::floor((y - r.ymin) / r.dy()));
    j = std::clamp(j, 0, r.ny - 1);
    int first = -1, last = -1;
    for (int i = 0; i < r.nx; ++i)
        if (m[r.index(i, j)]) {
            if (first < 0) first = i;
            last = i;
        }
    if (first < 0) return 0.0;
    const double a = r.xmin + first * r.dx(), b = r.xmin + (last + 1) * r.dx();
    if (lo) *lo = a;
    if (hi) *hi = b;
    return b - a;
}

std::string to_pgm(const AttainResult& res)
{
    const Raster& r = res.raster;
    const auto first = res.first_reached();
    std::ostringstream os;
    os << "P5\n" << r.nx << ' ' << r.ny << "\n255\n";
    std::string body(r.cells(), '\0');
    // image rows run top to bottom
    for (int j = 0; j < r.ny; ++j)
        for (int i = 0; i < r.nx; ++i) {
            const int k = first[r.index(i, j)];
            const int level = k == 0 ? 0 : 255 * std::min(k, 8) / 8;
            body[static_cast<std::size_t>(r.ny - 1 - j) * static_cast<std::size_t>(r.nx) + static_cast<std::size_t>(i)] =
                static_cast<char>(level);
        }
    os << body;
    return os.str();
}

}  // namespace mflow
