#include "holopose/rotation.hpp"

#include <algorithm>
#include <cmath>

namespace holopose {

namespace {

constexpr double kDegenerateTol = 1e-9;

Mat3 skew(const Vec3 &v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

}  // namespace

const char *to_string(KeypointFrame frame) {
    switch (frame) {
    case KeypointFrame::root_relative: return "root_relative";
    case KeypointFrame::lifted_absolute: return "lifted_absolute";
    case KeypointFrame::fk_absolute: return "fk_absolute";
    }
    return "unknown";
}

Vec6 Rotation6D::vector() const {
    Vec6 v;
    v << a1, a2;
    return v;
}

Rotation6D Rotation6D::from_vector(const Eigen::Ref<const Vec6> &v) {
    return {v.head<3>(), v.tail<3>()};
}

Mat3 r6_to_matrix(const Rotation6D &r) {
    const double n1 = r.a1.norm();
    if (!(n1 > kDegenerateTol))
        throw Error(ErrorCode::numeric, "degenerate 6D rotation: first vector is near zero");
    const Vec3 b1 = r.a1 / n1;
    const Vec3 u = r.a2 - b1.dot(r.a2) * b1;
    const double nu = u.norm();
    if (!(nu > kDegenerateTol * std::max(1.0, r.a2.norm())))
        throw Error(ErrorCode::numeric, "degenerate 6D rotation: vectors are near parallel");
    const Vec3 b2 = u / nu;
    Mat3 R;
    R.col(0) = b1;
    R.col(1) = b2;
    R.col(2) = b1.cross(b2);
    return R;
}

Eigen::Matrix<double, 9, 6> r6_to_matrix_jacobian(const Rotation6D &r) {
    const double n1 = r.a1.norm();
    if (!(n1 > kDegenerateTol))
        throw Error(ErrorCode::numeric, "degenerate 6D rotation: first vector is near zero");
    const Vec3 b1 = r.a1 / n1;
    const double proj = b1.dot(r.a2);
    const Vec3 u = r.a2 - proj * b1;
    const double nu = u.norm();
    if (!(nu > kDegenerateTol * std::max(1.0, r.a2.norm())))
        throw Error(ErrorCode::numeric, "degenerate 6D rotation: vectors are near parallel");
    const Vec3 b2 = u / nu;
    const Mat3 I = Mat3::Identity();

    const Mat3 db1_da1 = (I - b1 * b1.transpose()) / n1;
    // u = a2 - (b1 . a2) b1
    const Mat3 du_db1 = -(b1 * r.a2.transpose() + proj * I);
    const Mat3 du_da1 = du_db1 * db1_da1;
    const Mat3 du_da2 = I - b1 * b1.transpose();
    const Mat3 db2_du = (I - b2 * b2.transpose()) / nu;
    const Mat3 db2_da1 = db2_du * du_da1;
    const Mat3 db2_da2 = db2_du * du_da2;
    // b3 = b1 x b2
    const Mat3 db3_da1 = -skew(b2) * db1_da1 + skew(b1) * db2_da1;
    const Mat3 db3_da2 = skew(b1) * db2_da2;

    Eigen::Matrix<double, 9, 6> J = Eigen::Matrix<double, 9, 6>::Zero();
    J.block<3, 3>(0, 0) = db1_da1;
    J.block<3, 3>(3, 0) = db2_da1;
    J.block<3, 3>(3, 3) = db2_da2;
    J.block<3, 3>(6, 0) = db3_da1;
    J.block<3, 3>(6, 3) = db3_da2;
    return J;
}

bool is_rotation(const Mat3 &R, double tolerance) {
    if (!R.allFinite())
        return false;
    const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tolerance && std::abs(R.determinant() - 1.0) <= tolerance;
}

Rotation6D matrix_to_r6(const Mat3 &R, double tolerance) {
    if (!is_rotation(R, tolerance))
        throw Error(ErrorCode::invalid_argument, "matrix_to_r6: input is not a rotation matrix");
    return {R.col(0), R.col(1)};
}

Mat3 axis_angle(const Vec3 &axis, double angle_rad) {
    return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

double geodesic_angle(const Mat3 &Ra, const Mat3 &Rb) {
    const double c = std::clamp(((Ra.transpose() * Rb).trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::clamp(std::acos(c) * kRadToDeg, 0.0, 180.0);
}

Vec3 euler_xyz_degrees(const Mat3 &R) {
    const double sy = std::clamp(-R(2, 0), -1.0, 1.0);
    const double y = std::asin(sy);
    double x;
    double z;
    if (std::abs(sy) < 1.0 - 1e-12) {
        x = std::atan2(R(2, 1), R(2, 2));
        z = std::atan2(R(1, 0), R(0, 0));
    } else {
        // gimbal lock: only x - z (or x + z) is defined; put everything in x
        z = 0.0;
        x = std::atan2(-R(1, 2), R(1, 1));
    }
    return Vec3(x, y, z) * kRadToDeg;
}

Mat3 from_euler_xyz_degrees(const Vec3 &xyz) {
    const Vec3 r = xyz * kDegToRad;
    return (Eigen::AngleAxisd(r.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(r.y(), Vec3::UnitY()) *
            Eigen::AngleAxisd(r.x(), Vec3::UnitX()))
        .toRotationMatrix();
}

double wrapped_angle_difference(double a_deg, double b_deg) {
    double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

EulerErrors euler_angle_errors(const Mat3 &R_pred, const Mat3 &R_gt) {
    const Vec3 ep = euler_xyz_degrees(R_pred);
    const Vec3 eg = euler_xyz_degrees(R_gt);
    EulerErrors out;
    for (int k = 0; k < 3; ++k)
        out.degrees[k] = wrapped_angle_difference(ep[k], eg[k]);
    auto locked = [](const Vec3 &e) { return std::abs(std::abs(e.y()) - 90.0) <= 1e-6; };
    out.gimbal_lock = locked(ep) || locked(eg);
    return out;
}

}  // namespace holopose
