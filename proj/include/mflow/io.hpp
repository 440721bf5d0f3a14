#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mflow/attain.hpp"
#include "mflow/bundle.hpp"
#include "mflow/driver.hpp"
#include "mflow/fields.hpp"
#include "mflow/flowdec.hpp"
#include "mflow/lindec.hpp"
#include "mflow/marcus.hpp"

namespace mflow {

using Json = nlohmann::ordered_json;

// Shortest round-trip representation.
std::string fmt_double(double v);

// t, z_0..z_{d-1}, jump, dz_0..dz_{d-1}
std::string driver_csv(const DriverPath& z);
Json driver_header(const DriverPath& z);

// t, x_0..x_{n-1}, jump
std::string state_csv(const StatePath& p);
Json state_header(const StatePath& p);

// t, m_00, m_10, ... (column-major)
std::string matrix_path_csv(const std::vector<double>& times, const std::vector<Mat>& mats);
std::string matrix_flow_csv(const MatrixFlowPath& p);
std::string group_path_csv(const GroupPath& p);

// t, eta (column-major), psi (column-major), det_f4
std::string factor_csv(const FactorPair& f);
Json factor_summary(const FactorPair& f, double eps_det);

Json alternate_summary(const AlternateFactorization& fac);
// x, y, psi2, beta, eta1, det, masked over the factor's sample grid
std::string point_factor_csv(const PointFactorization& f);

Json attain_report(const AttainResult& res, const FoliationPair& pair);

Json to_json(const Mat& m);
Json to_json(const Vec& v);
Mat mat_from_json(const Json& j, const std::string& field);
Vec vec_from_json(const Json& j, const std::string& field);

// {"variant": "linear" | "affine" | "polynomial" | "right_invariant" | "catalog", ...}
Json field_to_json(const FieldSpec& spec);
FieldSpec field_from_json(const Json& j);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace mflow
