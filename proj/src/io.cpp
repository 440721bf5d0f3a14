#include "mflow/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mflow/errors.hpp"

namespace mflow {

std::string fmt_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

namespace {

void put_mat(std::ostringstream& os, const Mat& m)
{
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) os << ',' << fmt_double(m(r, c));
}

void put_mat_header(std::ostringstream& os, const std::string& name, const Mat& m)
{
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) os << ',' << name << '_' << r << c;
}

}  // namespace

std::string driver_csv(const DriverPath& z)
{
    std::ostringstream os;
    os << 't';
    for (int k = 0; k < z.dim; ++k) os << ",z" << k;
    os << ",jump";
    for (int k = 0; k < z.dim; ++k) os << ",dz" << k;
    os << '\n';
    for (std::size_t i = 0; i < z.points(); ++i) {
        os << fmt_double(z.grid[i]);
        for (int k = 0; k < z.dim; ++k) os << ',' << fmt_double(z.values(k, static_cast<Eigen::Index>(i)));
        const JumpEvent* j = z.jump(i);
        os << ',' << (j ? 1 : 0);
        for (int k = 0; k < z.dim; ++k) os << ',' << fmt_double(j ? j->size[k] : 0.0);
        os << '\n';
    }
    return os.str();
}

Json driver_header(const DriverPath& z)
{
    Json j;
    j["kind"] = z.kind;
    j["seed"] = z.seed;
    j["horizon"] = z.horizon;
    j["dim"] = z.dim;
    j["points"] = z.points();
    Json params = Json::object();
    for (const auto& [k, v] : z.params) params[k] = v;
    j["params"] = params;
    const auto qv = quadratic_variation(z);
    j["qv"] = {{"continuous", to_json(qv.continuous)}, {"discrete", to_json(qv.discrete)}};
    j["jumps"] = z.jumps.size();
    j["jump_square_sum"] = z.jump_square_sum();
    return j;
}

std::string state_csv(const StatePath& p)
{
    std::ostringstream os;
    os << 't';
    for (Eigen::Index k = 0; k < p.states.rows(); ++k) os << ",x" << k;
    os << ",jump\n";
    for (std::size_t i = 0; i < p.points(); ++i) {
        os << fmt_double(p.grid[i]);
        for (Eigen::Index k = 0; k < p.states.rows(); ++k)
            os << ',' << fmt_double(p.states(k, static_cast<Eigen::Index>(i)));
        os << ',' << (p.jump_at[i] >= 0 ? 1 : 0) << '\n';
    }
    return os.str();
}

Json state_header(const StatePath& p)
{
    Json j;
    j["points"] = p.points();
    j["state_dim"] = p.states.rows();
    j["status"] = p.complete() ? "complete" : "stopped";
    if (!p.complete()) {
        j["stop_time"] = p.stop_time;
        j["stop_reason"] = p.stop_reason;
    }
    Json jumps = Json::array();
    for (const auto& r : p.jumps)
        jumps.push_back({{"t", r.time}, {"size", to_json(r.size)}, {"substeps", r.substeps}});
    j["jumps"] = jumps;
    return j;
}

std::string matrix_path_csv(const std::vector<double>& times, const std::vector<Mat>& mats)
{
    std::ostringstream os;
    os << 't';
    if (!mats.empty()) put_mat_header(os, "m", mats.front());
    os << '\n';
    for (std::size_t i = 0; i < mats.size(); ++i) {
        os << fmt_double(times[i]);
        put_mat(os, mats[i]);
        os << '\n';
    }
    return os.str();
}

std::string matrix_flow_csv(const MatrixFlowPath& p) { return matrix_path_csv(p.times, p.flows); }

std::string group_path_csv(const GroupPath& p) { return matrix_path_csv(p.times, p.mats); }

std::string factor_csv(const FactorPair& f)
{
    std::ostringstream os;
    os << 't';
    if (f.size() > 0) {
        put_mat_header(os, "eta", f.eta.front());
        put_mat_header(os, "psi", f.psi.front());
    }
    os << ",det_f4\n";
    for (std::size_t i = 0; i < f.size(); ++i) {
        os << fmt_double(f.times[i]);
        put_mat(os, f.eta[i]);
        put_mat(os, f.psi[i]);
        os << ',' << fmt_double(f.det_f4[i]) << '\n';
    }
    return os.str();
}

Json factor_summary(const FactorPair& f, double eps_det)
{
    Json j;
    j["route"] = f.route;
    j["k"] = f.k;
    j["eps_det"] = eps_det;
    j["stored_points"] = f.size();
    j["breakdown"] = f.breakdown ? Json(*f.breakdown) : Json(nullptr);
    j["crossing"] = f.crossing;
    j["crossing_time"] = f.crossing_time ? Json(*f.crossing_time) : Json(nullptr);
    j["scheme_failure"] = f.scheme_failure;
    if (f.scheme_failure) j["failure_reason"] = f.failure_reason;
    return j;
}

Json alternate_summary(const AlternateFactorization& fac)
{
    Json j;
    j["x0"] = to_json(fac.x0);
    j["margin"] = fac.margin;
    j["eps_det"] = fac.eps_det;
    j["restarts"] = fac.restarts();
    j["breakpoint_indices"] = fac.breakpoints;
    j["breakpoint_times"] = fac.breakpoint_times();
    Json factors = Json::array();
    for (const auto& f : fac.factors)
        factors.push_back({{"from", f.from},
                           {"to", f.to},
                           {"center", to_json(f.window.center)},
                           {"radius", f.window.radius()},
                           {"masked", f.masked},
                           {"residual", f.residual}});
    j["factors"] = factors;
    j["stalled"] = fac.stalled;
    if (!fac.diagnostic.empty()) j["diagnostic"] = fac.diagnostic;
    return j;
}

std::string point_factor_csv(const PointFactorization& f)
{
    std::ostringstream os;
    os << "x,y,psi2,beta,eta1,det\n";
    for (std::size_t i = 0; i < f.xs.size(); ++i)
        for (std::size_t k = 0; k < f.ys.size(); ++k) {
            const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(k);
            os << fmt_double(f.xs[i]) << ',' << fmt_double(f.ys[k]) << ',' << fmt_double(f.psi2(a, b)) << ','
               << fmt_double(f.beta(a, b)) << ',' << fmt_double(f.eta1(a, b)) << ',' << fmt_double(f.det(a, b))
               << '\n';
        }
    return os.str();
}

Json attain_report(const AttainResult& res, const FoliationPair& pair)
{
    const Raster& r = res.raster;
    Json j;
    j["foliation"] = pair.name;
    j["window"] = {r.xmin, r.xmax, r.ymin, r.ymax};
    j["resolution"] = {r.nx, r.ny};
    j["p"] = {res.p.x, res.p.y};
    j["coverage_full"] = kCoverageFull;
    j["coverage"] = res.coverage;
    j["closed"] = res.closed;
    j["index"] = res.index ? Json(*res.index) : Json(nullptr);
    j["verdict"] = res.index ? "index " + std::to_string(*res.index) : std::string("window-unbounded");
    return j;
}

Json to_json(const Mat& m)
{
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Json to_json(const Vec& v)
{
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Mat mat_from_json(const Json& j, const std::string& field)
{
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw ConfigError("expected a non-empty array of rows", field);
    const auto rows = j.size(), cols = j.front().size();
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ConfigError("ragged matrix", field);
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw ConfigError("matrix entry is not a number", field);
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

Vec vec_from_json(const Json& j, const std::string& field)
{
    if (!j.is_array()) throw ConfigError("expected an array", field);
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError("vector entry is not a number", field);
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Json field_to_json(const FieldSpec& spec)
{
    Json j;
    j["state_dim"] = spec.state_dim();
    j["driver_dim"] = spec.driver_dim();
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, LinearSpec>) {
                j["variant"] = "linear";
                Json mats = Json::array();
                for (const auto& m : v.mats) mats.push_back(to_json(m));
                j["generators"] = mats;
            } else if constexpr (std::is_same_v<T, AffineSpec>) {
                j["variant"] = "affine";
                Json mats = Json::array(), offs = Json::array();
                for (const auto& m : v.mats) mats.push_back(to_json(m));
                for (const auto& b : v.offsets) offs.push_back(to_json(b));
                j["generators"] = mats;
                j["offsets"] = offs;
            } else if constexpr (std::is_same_v<T, PolynomialSpec>) {
                j["variant"] = "polynomial";
                Json terms = Json::array();
                for (const auto& t : v.terms)
                    terms.push_back({{"row", t.row}, {"col", t.col}, {"coef", t.coef}, {"powers", t.powers}});
                j["terms"] = terms;
            } else if constexpr (std::is_same_v<T, RightInvariantSpec>) {
                j["variant"] = "right_invariant";
                Json mats = Json::array();
                for (const auto& m : v.algebra) mats.push_back(to_json(m));
                j["algebra"] = mats;
                j["group_dim"] = v.group_dim;
            } else {
                j["variant"] = "catalog";
                j["name"] = catalog_name(v.name);
                j["param"] = v.param;
            }
        },
        spec.variant);
    return j;
}

namespace {

const Json& need(const Json& j, const std::string& key, const std::string& ctx)
{
    if (!j.is_object() || !j.contains(key)) throw ConfigError("missing key '" + key + "'", ctx + "." + key);
    return j.at(key);
}

std::vector<Mat> mats_from(const Json& j, const std::string& ctx)
{
    if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty list of matrices", ctx);
    std::vector<Mat> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(mat_from_json(j[i], ctx + "[" + std::to_string(i) + "]"));
    return out;
}

}  // namespace

FieldSpec field_from_json(const Json& j)
{
    const std::string ctx = "field";
    const auto& variant = need(j, "variant", ctx);
    if (!variant.is_string()) throw ConfigError("variant must be a string", ctx + ".variant");
    const auto name = variant.get<std::string>();
    FieldSpec spec;
    if (name == "linear") {
        spec.variant = LinearSpec{mats_from(need(j, "generators", ctx), ctx + ".generators")};
    } else if (name == "affine") {
        AffineSpec a;
        a.mats = mats_from(need(j, "generators", ctx), ctx + ".generators");
        const auto& offs = need(j, "offsets", ctx);
        if (!offs.is_array()) throw ConfigError("expected a list of vectors", ctx + ".offsets");
        for (std::size_t i = 0; i < offs.size(); ++i)
            a.offsets.push_back(vec_from_json(offs[i], ctx + ".offsets[" + std::to_string(i) + "]"));
        spec.variant = std::move(a);
    } else if (name == "polynomial") {
        PolynomialSpec p;
        p.state_dim = need(j, "state_dim", ctx).get<int>();
        p.driver_dim = j.value("driver_dim", 1);
        const auto& terms = need(j, "terms", ctx);
        if (!terms.is_array()) throw ConfigError("expected a list of terms", ctx + ".terms");
        for (const auto& t : terms) {
            Monomial m;
            m.row = t.value("row", 0);
            m.col = t.value("col", 0);
            m.coef = need(t, "coef", ctx + ".terms").get<double>();
            m.powers = need(t, "powers", ctx + ".terms").get<std::vector<int>>();
            p.terms.push_back(std::move(m));
        }
        spec.variant = std::move(p);
    } else if (name == "right_invariant") {
        RightInvariantSpec r;
        r.algebra = mats_from(need(j, "algebra", ctx), ctx + ".algebra");
        r.group_dim = static_cast<int>(r.algebra.front().rows());
        spec.variant = std::move(r);
    } else if (name == "catalog") {
        const auto& n = need(j, "name", ctx);
        const auto cat = n.is_string() ? catalog_from_name(n.get<std::string>()) : std::nullopt;
        if (!cat) throw ConfigError("unknown catalog field", ctx + ".name");
        spec.variant = CatalogSpec{*cat, j.value("param", 1.0)};
    } else {
        throw ConfigError("unknown field variant '" + name + "'", ctx + ".variant");
    }
    try {
        validate(spec);
    } catch (const ParameterError& e) {
        throw ConfigError(e.what(), ctx);
    }
    return spec;
}

void write_text(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw Error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace mflow
