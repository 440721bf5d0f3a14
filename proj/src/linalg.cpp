#include "mflow/linalg.hpp"

#include <cmath>
#include <vector>

namespace mflow {

Mat expm(const Mat& a)
{
    static constexpr double b[14] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};
    static constexpr double theta13 = 5.371920351148152;

    const Eigen::Index n = a.rows();
    if (n == 0) return a;
    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int s = 0;
    if (norm1 > theta13) s = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    const Mat as = a / std::ldexp(1.0, s);

    const Mat ident = Mat::Identity(n, n);
    const Mat a2 = as * as;
    const Mat a4 = a2 * a2;
    const Mat a6 = a4 * a2;
    const Mat u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                        b[3] * a2 + b[1] * ident;
    const Mat u = as * u_inner;
    const Mat v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                  b[2] * a2 + b[0] * ident;
    Mat r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < s; ++i) r = r * r;
    return r;
}

Mat polar_orthonormalize(const Mat& m)
{
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

double fitted_log2_slope(const Eigen::ArrayXd& h, const Eigen::ArrayXd& err)
{
    std::vector<double> xs, ys;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        if (err[i] > 0.0 && std::isfinite(err[i]) && h[i] > 0.0) {
            xs.push_back(std::log2(h[i]));
            ys.push_back(std::log2(err[i]));
        }
    }
    if (xs.size() < 2) return std::nan("");
    double mx = 0, my = 0;
    for (size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
    mx /= xs.size();
    my /= ys.size();
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace mflow
