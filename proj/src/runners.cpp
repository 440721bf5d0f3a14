#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mflow/attain.hpp"
#include "mflow/bundle.hpp"
#include "mflow/errors.hpp"
#include "mflow/flowdec.hpp"
#include "mflow/ivk.hpp"
#include "mflow/lindec.hpp"
#include "mflow/marcus.hpp"
#include "mflow/scenario.hpp"

namespace mflow {

namespace {

constexpr double kPi = std::numbers::pi;

Mat rotation_generator()
{
    Mat a(2, 2);
    a << 0.0, -1.0, 1.0, 0.0;
    return a;
}

Mat shear_generator()
{
    Mat a(2, 2);
    a << 0.0, 1.0, 0.0, 0.0;
    return a;
}

Vec vec_of(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

Eigen::ArrayXd arr(const std::vector<double>& v) { return vec_of(v).array(); }

double mean(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::size_t factor_of(double coarse, double fine) { return static_cast<std::size_t>(std::llround(coarse / fine)); }

// Fine path at the smallest dt with coarsened copies, coarsest first.
std::vector<DriverPath> coupled_levels(const RunContext& ctx, std::uint64_t seed, double coarse_dt, int levels)
{
    const double fine_dt = coarse_dt / std::ldexp(1.0, levels - 1);
    const DriverPath fine = ctx.driver(seed, fine_dt);
    std::vector<DriverPath> out;
    for (int l = 0; l < levels; ++l) {
        const auto f = std::size_t{1} << static_cast<unsigned>(levels - 1 - l);
        out.push_back(f == 1 ? fine : coarsen(fine, f));
    }
    return out;
}

Mat random_normal(std::mt19937_64& rng, int n, double scale)
{
    std::normal_distribution<double> nd(0.0, scale);
    Mat m(n, n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) m(r, c) = nd(rng);
    return m;
}

// ---------------------------------------------------------------- driver

void driver_sample(RunContext& ctx)
{
    int ok = 1;
    for (auto seed : ctx.seeds()) {
        const DriverPath z = ctx.driver(seed);
        const auto tag = std::to_string(seed);
        ctx.emit("driver_" + tag + ".csv", driver_csv(z));
        ctx.emit_json("driver_" + tag + ".json", driver_header(z));
        ok &= z.values.allFinite() ? 1 : 0;
    }
    ctx.check("finite_paths", ok, "finite_paths", 1.0, Cmp::eq);
}

// ---------------------------------------------------------------- marcus

void marcus_solve(RunContext& ctx)
{
    const FieldSpec field = ctx.field(catalog_field(CatalogName::pendulum));
    const Vec x0 = vec_of(ctx.param_list("x0", std::vector<double>(static_cast<std::size_t>(field.state_dim()), 0.5)));
    if (x0.size() != field.state_dim()) throw ConfigError("x0 has the wrong dimension", "params.x0");
    int complete = 0;
    for (auto seed : ctx.seeds()) {
        const DriverPath z = ctx.driver(seed);
        const StatePath p = solve_path(field, z, x0);
        const auto tag = std::to_string(seed);
        ctx.emit("state_" + tag + ".csv", state_csv(p));
        ctx.emit_json("state_" + tag + ".json", state_header(p));
        complete += p.complete() ? 1 : 0;
    }
    ctx.check("complete_paths", complete, "complete_paths", static_cast<double>(ctx.seeds().size()), Cmp::eq);
}

void marcus_order(RunContext& ctx)
{
    Mat a(2, 2);
    a << -0.2, -1.0, 1.0, 0.1;
    const FieldSpec field = ctx.field(linear_field(a));
    const auto gens = linear_generators(field);
    if (!gens || gens->size() != 1) throw ConfigError("marcus.order needs a linear field with one generator", "field");
    const Mat& gen = gens->front();
    const Vec x0 = vec_of(ctx.param_list("x0", std::vector<double>(static_cast<std::size_t>(gen.rows()), 1.0)));
    const int levels = ctx.param_int("levels", 5);
    const double dt0 = ctx.base_dt();

    std::vector<double> hs, errs;
    std::vector<std::vector<double>> per_level(static_cast<std::size_t>(levels));
    for (auto seed : ctx.seeds()) {
        const auto paths = coupled_levels(ctx, seed, dt0, levels);
        for (int l = 0; l < levels; ++l) {
            const DriverPath& z = paths[static_cast<std::size_t>(l)];
            const StatePath p = solve_path(field, z, x0);
            double e = 0.0;
            for (std::size_t i = 0; i < z.points(); ++i)
                e = std::max(e, (p.state(i) - expm(gen * z.values(0, static_cast<Eigen::Index>(i))) * x0).norm());
            per_level[static_cast<std::size_t>(l)].push_back(e);
        }
    }
    for (int l = 0; l < levels; ++l) {
        hs.push_back(dt0 / std::ldexp(1.0, l));
        errs.push_back(mean(per_level[static_cast<std::size_t>(l)]));
    }
    const double slope = fitted_log2_slope(arr(hs), arr(errs));
    ctx.results()["dt"] = hs;
    ctx.results()["mean_max_error"] = errs;
    ctx.results()["slope"] = slope;
    ctx.check("strong_order_slope", slope, "min_slope", 0.9, Cmp::ge);

    double worst = 0.0;
    const int probes = ctx.param_int("transport_probes", 41);
    const double max_jump = ctx.param("transport_max_jump", 1.0);
    for (int q = 0; q < probes; ++q) {
        const double dz = -max_jump + 2.0 * max_jump * q / (probes - 1);
        const Vec got = ode_flow(field, Vec::Constant(1, dz), x0).endpoint;
        worst = std::max(worst, (got - expm(gen * dz) * x0).norm());
    }
    ctx.results()["transport_error"] = worst;
    ctx.check("jump_transport_error", worst, "transport_tol", 1e-9);
}

// ---------------------------------------------------------------- ivk

void ivk_formula(RunContext& ctx)
{
    const FieldSpec x = ctx.param_field("x_field", linear_field(rotation_generator()));
    const FieldSpec y = ctx.param_field("y_field", linear_field(shear_generator()));
    const Vec x0 = vec_of(ctx.param_list("x0", {1.0, 0.5}));
    const int levels = ctx.param_int("levels", 3);
    const double dt0 = ctx.base_dt();

    std::vector<std::vector<double>> per_level(static_cast<std::size_t>(levels));
    for (auto seed : ctx.seeds()) {
        const auto paths = coupled_levels(ctx, seed, dt0, levels);
        for (int l = 0; l < levels; ++l)
            per_level[static_cast<std::size_t>(l)].push_back(verify_ivk(x, y, paths[static_cast<std::size_t>(l)], x0));
    }
    std::vector<double> hs, res, ratios;
    for (int l = 0; l < levels; ++l) {
        hs.push_back(dt0 / std::ldexp(1.0, l));
        res.push_back(mean(per_level[static_cast<std::size_t>(l)]));
        if (l > 0) ratios.push_back(res.back() / res[res.size() - 2]);
    }
    double dev = 0.0;
    for (double r : ratios) dev = std::max(dev, std::abs(r - 0.5) / 0.5);
    ctx.results()["dt"] = hs;
    ctx.results()["mean_residual"] = res;
    ctx.results()["halving_ratios"] = ratios;
    ctx.results()["slope"] = fitted_log2_slope(arr(hs), arr(res));
    ctx.check("halving_ratio_relative_deviation", dev, "ratio_tol", 0.2);

    // commuting pair: X and a combination of X and the identity
    const Mat xr = rotation_generator();
    const Mat yc = ctx.param("commuting_rotation", 0.5) * xr + ctx.param("commuting_scale", 0.3) * Mat::Identity(2, 2);
    const double dtc = ctx.param("commuting_dt", 1e-4);
    const DriverPath zc = ctx.driver(ctx.seed(), dtc);
    const IvkReport rep = ivk_report(linear_field(xr), linear_field(yc), zc, x0);
    const Vec exact = expm((xr + yc) * zc.values(0, zc.values.cols() - 1)) * x0;
    const double err = (rep.lhs - exact).norm();
    ctx.results()["commuting_composed_error"] = err;
    ctx.results()["commuting_ivk_residual"] = rep.residual;
    ctx.check("commuting_composed_error", err, "commuting_tol", 1e-6);
}

void ivk_truncation(RunContext& ctx)
{
    const FieldSpec x = ctx.param_field("x_field", linear_field(rotation_generator()));
    const FieldSpec y = ctx.param_field("y_field", catalog_field(CatalogName::vertical_sine, 0.5));
    const Vec x0 = vec_of(ctx.param_list("x0", {0.3, 0.2}));
    const double coarse_eps = ctx.param("coarse_eps_qv", 0.05);
    const auto& d = ctx.scenario().driver;
    const LevyParams lp{d.value("alpha", 1.5), d.value("scale", 1.0), d.value("sigma", 1.0)};
    const double horizon = d.value("horizon", 1.0);
    const double cut = levy_threshold(lp, horizon, coarse_eps);
    ctx.results()["coarse_threshold"] = cut;

    std::size_t held = 0, total = 0;
    double worst_ratio = 0.0;
    for (auto seed : ctx.seeds()) {
        const DriverPath fine = ctx.driver(seed);
        const DriverPath coarse = remove_small_jumps(fine, cut);
        const TruncationCheck t = truncation_error_bound_check(x, y, fine, coarse, x0);
        ++total;
        held += t.holds() ? 1 : 0;
        if (t.bound > 0.0) worst_ratio = std::max(worst_ratio, t.observed / t.bound);
    }
    const double frac = total ? static_cast<double>(held) / static_cast<double>(total) : 0.0;
    ctx.results()["bound_held"] = held;
    ctx.results()["seeds"] = total;
    ctx.results()["worst_observed_over_bound"] = worst_ratio;
    ctx.check("bound_holds_fraction", frac, "min_fraction", 0.95, Cmp::ge);

    // one folded jump of size delta on a pure-jump driver
    const auto sizes = ctx.param_list("single_jump_sizes", {0.4, 0.2, 0.1, 0.05});
    std::vector<double> observed;
    for (double delta : sizes) {
        const DriverPath z = jump_path(horizon, {0.5 * horizon}, {Vec::Constant(1, delta)}, ctx.base_dt());
        const DriverPath folded = remove_small_jumps(z, 2.0 * delta);
        observed.push_back(truncation_error_bound_check(x, y, z, folded, x0).observed);
    }
    const double slope = fitted_log2_slope(arr(sizes), arr(observed));
    ctx.results()["single_jump_observed"] = observed;
    ctx.results()["single_jump_slope"] = slope;
    ctx.check("single_jump_slope", slope, "min_jump_slope", 1.9, Cmp::ge);
}

// ---------------------------------------------------------------- lindec

void lindec_rotation(RunContext& ctx)
{
    const Mat a = rotation_generator();
    const DriverPath z = ctx.driver(ctx.seed());
    const FactorPair f = decompose_linear_algebraic(a, z, 1);
    ctx.emit("factors.csv", factor_csv(f));
    ctx.emit_json("factors.json", factor_summary(f, kDefaultEpsDet));

    double recompose = 0.0, entries = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double t = z.values(0, static_cast<Eigen::Index>(i));
        recompose = std::max(recompose, (f.product(i) - expm(a * t)).cwiseAbs().maxCoeff());
        Mat eta(2, 2), psi(2, 2);
        eta << 1.0 / std::cos(t), -std::tan(t), 0.0, 1.0;
        psi << 1.0, 0.0, std::sin(t), std::cos(t);
        entries = std::max({entries, (f.eta[i] - eta).cwiseAbs().maxCoeff(), (f.psi[i] - psi).cwiseAbs().maxCoeff()});
    }
    ctx.results()["stored_points"] = f.size();
    ctx.results()["grid_points"] = z.points();
    ctx.check("factors_cover_grid", static_cast<double>(f.size()), "grid_points", static_cast<double>(z.points()),
              Cmp::eq);
    ctx.check("recomposition_error", recompose, "recompose_tol", 1e-9);
    ctx.check("closed_form_entry_error", entries, "entry_tol", 1e-9);

    // |det F4| = |cos t| < sin(margin) first holds at t = pi/2 - margin
    const double margin = ctx.param("margin", 0.1);
    const double horizon = ctx.param("breakdown_horizon", 2.0);
    const double dt = ctx.base_dt();
    const DriverPath zb = deterministic_time(horizon, dt);
    const BreakdownResult br = breakdown_time(a, zb, 1, std::sin(margin));
    const double target = kPi / 2.0 - margin;
    const double steps = br.time ? std::abs(*br.time - target) / dt : std::numeric_limits<double>::infinity();
    ctx.results()["breakdown_time"] = br.time ? Json(*br.time) : Json(nullptr);
    ctx.results()["breakdown_target"] = target;
    ctx.results()["breakdown_eps_det"] = std::sin(margin);
    ctx.check("breakdown_offset_steps", steps, "breakdown_steps", 1.0);
}

void lindec_constituent(RunContext& ctx)
{
    const int count = ctx.param_int("generators", 20);
    const int n = ctx.param_int("n", 4);
    const int k = ctx.param_int("k", 2);
    const double scale = ctx.param("generator_scale", 0.5);
    const double guard = ctx.param("det_guard", 0.05);
    const auto dts = ctx.param_list("dts", {1e-3, 5e-4, 2.5e-4});
    const double fine_dt = *std::min_element(dts.begin(), dts.end());
    const double coarse_dt = *std::max_element(dts.begin(), dts.end());

    // each generator gets its own driver sample; per-path constants vary a lot,
    // so levels are aggregated by the geometric mean over generators
    std::vector<std::vector<double>> dev(dts.size());
    int failures = 0, windows = 0;
    for (auto seed : ctx.seeds()) {
        std::mt19937_64 rng(seed);
        for (int g = 0; g < count; ++g) {
            const Mat a = random_normal(rng, n, scale);
            const DriverPath fine = ctx.driver(seed + static_cast<std::uint64_t>(g), fine_dt);
            const DriverPath zc = coarsen(fine, factor_of(coarse_dt, fine_dt));
            // comparison window: coarse grid times before |det F4| first drops below the guard
            const FactorPair oracle_c = decompose_linear_algebraic(a, zc, k, guard);
            const std::size_t window = oracle_c.size();
            windows += window > 1 ? 1 : 0;
            for (std::size_t l = 0; l < dts.size(); ++l) {
                const std::size_t f = factor_of(dts[l], fine_dt);
                const DriverPath z = f == 1 ? fine : coarsen(fine, f);
                const FactorPair sde = decompose_linear_sde(a, z, k);
                const FactorPair alg = decompose_linear_algebraic(a, z, k);
                failures += sde.scheme_failure ? 1 : 0;
                const std::size_t stride = factor_of(coarse_dt, dts[l]);
                double e = 0.0;
                for (std::size_t c = 0; c < window; ++c) {
                    const std::size_t i = c * stride;
                    if (i >= sde.size() || i >= alg.size()) break;
                    e = std::max({e, (sde.eta[i] - alg.eta[i]).norm(), (sde.psi[i] - alg.psi[i]).norm()});
                }
                dev[l].push_back(e);
            }
        }
    }
    std::vector<double> means;
    for (const auto& v : dev) {
        double lg = 0.0;
        for (double e : v) lg += std::log(std::max(e, 1e-300));
        means.push_back(std::exp(lg / static_cast<double>(v.size())));
    }
    const double slope = fitted_log2_slope(arr(dts), arr(means));
    ctx.results()["dts"] = dts;
    ctx.results()["geomean_max_deviation"] = means;
    ctx.results()["slope"] = slope;
    ctx.results()["nonempty_windows"] = windows;
    ctx.check("deviation_slope", slope, "min_slope", 0.8, Cmp::ge);
    ctx.check("scheme_failures", failures, "max_scheme_failures", 0.0);
}

void lindec_no_explosion(RunContext& ctx)
{
    const int count = ctx.param_int("spectra", 100);
    const int n_min = ctx.param_int("n_min", 3);
    const int n_max = ctx.param_int("n_max", 6);
    const double re_max = ctx.param("real_part_max", 0.5);
    const double im_min = ctx.param("imag_min", 0.5);
    const double im_max = ctx.param("imag_max", 2.0);
    const double max_cond = ctx.param("max_condition", 50.0);

    int nonfinite = 0, breakdowns = 0, runs = 0;
    double min_det = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(ctx.seed());
    std::uniform_real_distribution<double> re(-re_max, re_max), im(im_min, im_max);
    for (int s = 0; s < count; ++s) {
        const int n = std::uniform_int_distribution<int>(n_min, n_max)(rng);
        const int pairs = std::uniform_int_distribution<int>(0, n / 2)(rng);
        const int reals = n - 2 * pairs;
        Mat d = Mat::Zero(n, n);
        for (int i = 0; i < reals; ++i) d(i, i) = re(rng);
        for (int p = 0; p < pairs; ++p) {
            const int i = reals + 2 * p;
            const double u = re(rng), v = im(rng);
            d(i, i) = u;
            d(i + 1, i + 1) = u;
            d(i, i + 1) = -v;
            d(i + 1, i) = v;
        }
        Mat q;
        do {
            q = Mat::Identity(n, n) + random_normal(rng, n, 0.4);
            Eigen::JacobiSVD<Mat> svd(q);
            if (svd.singularValues()(0) / svd.singularValues()(n - 1) < max_cond) break;
        } while (true);
        const Mat a = q * d * q.inverse();
        // feasible (a, b): 1 <= a + 2b <= n - 1
        int ra = 0, pb = 0;
        do {
            ra = std::uniform_int_distribution<int>(0, reals)(rng);
            pb = std::uniform_int_distribution<int>(0, pairs)(rng);
        } while (ra + 2 * pb < 1 || ra + 2 * pb > n - 1);
        const SchurSelection sel = schur_foliation_select(a, ra, pb);
        const DriverPath z = ctx.driver(ctx.seed() + static_cast<std::uint64_t>(s) + 1);
        const FactorPair f = decompose_linear_sde(sel.conjugated, z, sel.k);
        ++runs;
        nonfinite += f.scheme_failure ? 1 : 0;
        breakdowns += f.breakdown ? 1 : 0;
        for (double v : f.det_f4) min_det = std::min(min_det, std::abs(v));
    }
    ctx.results()["runs"] = runs;
    ctx.results()["min_abs_det_f4"] = min_det;
    ctx.check("nonfinite_guards", nonfinite, "max_nonfinite", 0.0);
    ctx.check("breakdowns", breakdowns, "max_breakdowns", 0.0);
}

// ---------------------------------------------------------------- flowdec

void flowdec_alternate(RunContext& ctx)
{
    const FieldSpec field = ctx.field(linear_field(rotation_generator()));
    const Vec x0 = vec_of(ctx.param_list("x0", {1.0, 0.0}));
    const double eps = ctx.param("eps_det", kFlowEpsDet);
    const double radius = ctx.param("window_radius", 0.5);
    const int resolution = ctx.param_int("resolution", 5);
    const double probe = ctx.param("probe_offset", 0.1);
    const auto margins = ctx.param_list("margins", {1e-2, 5e-3, 2.5e-3});
    const DriverPath z = ctx.driver(ctx.seed());
    const double horizon = z.horizon;
    const auto sampler = std::make_shared<const FlowSampler>(field, z);

    std::vector<AlternateFactorization> facs;
    for (double m : margins) facs.push_back(alternate_decompose(sampler, x0, horizon, eps, m, radius, resolution));
    const auto& main = facs.front();
    ctx.emit_json("alternate.json", alternate_summary(main));
    for (std::size_t f = 0; f < main.factors.size(); ++f)
        ctx.emit("factor_" + std::to_string(f) + ".csv", point_factor_csv(main.factors[f]));

    std::vector<Vec> probes = {x0};
    for (const auto& [dx, dy] : {std::pair{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}})
        probes.push_back(x0 + probe * (Vec(2) << dx, dy).finished());
    double worst = 0.0;
    for (std::size_t i = 0; i <= main.last_index(); ++i)
        for (const auto& p : probes) worst = std::max(worst, (recompose(main, i, p) - sampler->flow(i, p)).norm());

    int violations = 0;
    Json bps = Json::array();
    for (std::size_t m = 0; m < facs.size(); ++m) {
        bps.push_back(facs[m].breakpoint_times());
        if (m == 0) continue;
        const auto prev = facs[m - 1].breakpoint_times(), cur = facs[m].breakpoint_times();
        if (prev.size() != cur.size()) {
            ++violations;
            continue;
        }
        // a smaller margin never moves a restart earlier
        for (std::size_t b = 0; b < cur.size(); ++b) violations += cur[b] < prev[b] ? 1 : 0;
    }
    ctx.results()["margins"] = margins;
    ctx.results()["breakpoint_times"] = bps;
    ctx.results()["restarts"] = main.restarts();
    ctx.results()["covered_until"] = z.grid[main.last_index()];
    ctx.results()["stalled"] = main.stalled;
    ctx.check("restarts", static_cast<double>(main.restarts()), "min_restarts", 2.0, Cmp::ge);
    ctx.check("covers_horizon", z.grid[main.last_index()], "horizon", horizon, Cmp::ge);
    ctx.check("recomposition_error", worst, "recompose_tol", 1e-4);
    ctx.check("margin_monotonicity_violations", violations, "max_violations", 0.0);
}

// ---------------------------------------------------------------- attain

FoliationPair foliation_by_name(const std::string& name)
{
    if (name == "cartesian") return cartesian_pair();
    if (name == "hyperbolic") return hyperbolic_pair();
    if (name == "secant") return secant_pair();
    throw ConfigError("unknown foliation '" + name + "'", "params.foliation");
}

// Cells whose centre is at least one cell width from the strip edge and on
// the wrong side.
int strip_violations(const Mask& m, const Raster& r, const Mask& ex, double lo, double hi)
{
    int bad = 0;
    for (int j = 0; j < r.ny; ++j)
        for (int i = 0; i < r.nx; ++i) {
            const auto c = r.index(i, j);
            if (ex[c]) continue;
            const double x = r.cx(i);
            const bool inside = x >= lo && x <= hi;
            const double dist = std::min(std::abs(x - lo), std::abs(x - hi));
            if ((m[c] != 0) != inside && dist > r.dx()) ++bad;
        }
    return bad;
}

void attain_example(RunContext& ctx)
{
    const FoliationPair pair = foliation_by_name(ctx.param_string("foliation", "hyperbolic"));
    const auto window = ctx.param_list("window", {-3.0, 3.0, -3.0, 3.0});
    const auto res = ctx.param_list("resolution", {600.0, 600.0});
    const auto pv = ctx.param_list("p", {1.0, 1.0});
    const int kmax = ctx.param_int("kmax", 4);
    const std::string reference = ctx.param_string("reference", "none");
    if (window.size() != 4) throw ConfigError("window needs [xmin, xmax, ymin, ymax]", "params.window");
    if (res.size() != 2) throw ConfigError("resolution needs [nx, ny]", "params.resolution");
    if (pv.size() != 2) throw ConfigError("p needs [x, y]", "params.p");
    Raster r{window[0], window[1], window[2], window[3], static_cast<int>(res[0]), static_cast<int>(res[1])};
    const Vec2 p{pv[0], pv[1]};

    const AttainResult out = attainable_sets(p, pair, r, kmax);
    ctx.emit("attainable.pgm", to_pgm(out));
    ctx.emit_json("attain.json", attain_report(out, pair));
    ctx.results()["coverage"] = out.coverage;
    ctx.results()["index"] = out.index ? Json(*out.index) : Json(nullptr);
    ctx.results()["window_unbounded"] = out.window_unbounded;

    if (reference == "hyperbolic_index") {
        const double a1 = agreement(out.masks.front(), r, out.excluded, [](double x, double y) { return x + y > 0.0; });
        ctx.results()["a1_agreement"] = a1;
        ctx.check("a1_halfplane_agreement", a1, "min_a1_agreement", 0.99, Cmp::ge);
        ctx.check("index", out.index ? *out.index : -1, "expected_index", 3.0, Cmp::eq);
        const Mask c1 = co_attainable(p, pair, r, 1);
        const double q = agreement(c1, r, out.excluded, [](double x, double y) { return x > 0.0 && y > 0.0; });
        ctx.results()["c1_agreement"] = q;
        ctx.check("c1_quadrant_agreement", q, "min_c1_agreement", 0.98, Cmp::ge);
    } else if (reference == "secant_strips") {
        const int kcheck = std::min(kmax, ctx.param_int("strip_levels", 5));
        Json extents = Json::array();
        int total = 0;
        for (int k = 1; k <= kcheck; ++k) {
            const Mask& m = out.masks[static_cast<std::size_t>(k - 1)];
            const int bad = strip_violations(m, r, out.excluded, -k * kPi + kPi / 2.0, k * kPi + kPi / 2.0);
            double lo = 0.0, hi = 0.0;
            row_extent(m, r, p.y, &lo, &hi);
            extents.push_back({{"k", k}, {"violations", bad}, {"row_lo_over_pi", lo / kPi}, {"row_hi_over_pi", hi / kPi}});
            total += bad;
        }
        ctx.results()["strips"] = extents;
        ctx.check("strip_violation_cells", total, "max_strip_violations", 0.0);
        ctx.check("window_unbounded", out.window_unbounded ? 1.0 : 0.0, "expect_unbounded", 1.0, Cmp::eq);
    } else if (reference != "none") {
        throw ConfigError("unknown reference '" + reference + "'", "params.reference");
    } else {
        ctx.check("coverage_computed", static_cast<double>(out.coverage.size()), "kmax", kmax, Cmp::eq);
    }
}

// ---------------------------------------------------------------- bundle

void bundle_trivial(RunContext& ctx)
{
    const Mat a = rotation_generator() * ctx.param("a_scale", 1.0);
    const Mat b = rotation_generator() * ctx.param("b_scale", 0.5);
    const Mat x0 = expm(rotation_generator() * ctx.param("x0_angle", 0.3));
    const Mat y0 = expm(rotation_generator() * ctx.param("y0_angle", -1.1));
    const DriverPath z = ctx.driver(ctx.seed());
    const auto f = trivial_bundle_decompose(a, b, z, x0, y0);
    ctx.emit("eta.csv", group_path_csv(f.eta));
    ctx.emit("psi.csv", group_path_csv(f.psi));
    ctx.results()["max_error"] = f.max_error;
    ctx.check("composite_vs_direct", f.max_error, "tol", 1e-12);

    const Mat zero = Mat::Zero(2, 2);
    const auto pure_h = trivial_bundle_decompose(a, zero, z, x0, y0);
    const auto pure_v = trivial_bundle_decompose(zero, b, z, x0, y0);
    double id_err = 0.0;
    for (std::size_t i = 0; i < z.points(); ++i)
        id_err = std::max({id_err, (pure_h.psi.mats[i] - Mat::Identity(4, 4)).norm(),
                           (pure_v.eta.mats[i] - Mat::Identity(4, 4)).norm()});
    ctx.check("degenerate_factor_identity", id_err, "tol", 1e-12);
}

void bundle_reductive(RunContext& ctx)
{
    const Mat w = ctx.param("w_e1", 1.0) * so3_basis(0) + ctx.param("w_e2", 0.0) * so3_basis(1) +
                  ctx.param("w_e3", 1.0) * so3_basis(2);
    const Mat g0 = Mat::Identity(3, 3);
    const ReductiveSplit split = sphere_split();
    const int levels = ctx.param_int("levels", 4);
    const double dt0 = ctx.base_dt();
    const double proj_dt = ctx.param("projection_dt", 1e-4);

    ctx.results()["invariance_defect"] = split.invariance_defect();
    std::vector<std::vector<double>> per_level(static_cast<std::size_t>(levels));
    for (auto seed : ctx.seeds()) {
        const auto paths = coupled_levels(ctx, seed, dt0, levels);
        for (int l = 0; l < levels; ++l)
            per_level[static_cast<std::size_t>(l)].push_back(
                reductive_decompose(w, split, paths[static_cast<std::size_t>(l)], g0).max_composite_error);
    }
    std::vector<double> hs, errs;
    for (int l = 0; l < levels; ++l) {
        hs.push_back(dt0 / std::ldexp(1.0, l));
        errs.push_back(mean(per_level[static_cast<std::size_t>(l)]));
    }
    const double slope = fitted_log2_slope(arr(hs), arr(errs));
    ctx.results()["dt"] = hs;
    ctx.results()["mean_composite_error"] = errs;
    ctx.results()["slope"] = slope;
    ctx.check("composite_slope_deviation", std::abs(slope - 1.0), "slope_tol", 0.3);

    double proj = 0.0, conn = 0.0, swapped_conn = std::numeric_limits<double>::infinity();
    for (auto seed : ctx.seeds()) {
        const DriverPath z = ctx.driver(seed, proj_dt);
        const auto r = reductive_decompose(w, split, z, g0);
        const auto c = horizontal_lift_check(r, split, z);
        proj = std::max(proj, c.projection);
        conn = std::max(conn, c.connection);
        const auto sw = reductive_decompose(w, split.swapped(), z, g0);
        swapped_conn = std::min(swapped_conn, horizontal_lift_check(sw, split, z).connection);
        if (seed == ctx.seed()) {
            ctx.emit("eta.csv", group_path_csv(r.eta));
            ctx.emit("psi.csv", group_path_csv(r.psi));
        }
    }
    ctx.results()["projection_residual"] = proj;
    ctx.results()["connection_residual"] = conn;
    ctx.results()["swapped_connection_residual"] = swapped_conn;
    ctx.check("projection_residual", proj, "projection_tol", 1e-4);
    ctx.check("connection_residual", conn, "connection_tol", 1e-5);
    // the negative control must fail the same test
    ctx.check("swapped_connection_residual", swapped_conn, "connection_tol", 1e-5, Cmp::gt);
}

}  // namespace

const std::map<std::string, Experiment>& experiments()
{
    static const std::map<std::string, Experiment> table = {
        {"driver.sample", driver_sample},
        {"marcus.solve", marcus_solve},
        {"marcus.order", marcus_order},
        {"ivk.formula", ivk_formula},
        {"ivk.truncation", ivk_truncation},
        {"lindec.rotation_factorization", lindec_rotation},
        {"lindec.constituent_equivalence", lindec_constituent},
        {"lindec.no_explosion", lindec_no_explosion},
        {"flowdec.alternate", flowdec_alternate},
        {"attain.example", attain_example},
        {"bundle.trivial", bundle_trivial},
        {"bundle.reductive", bundle_reductive},
    };
    return table;
}

}  // namespace mflow
