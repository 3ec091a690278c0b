#pragma once

#include "holopose/types.hpp"

#include <Eigen/Core>

namespace holopose {

using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Continuous 6D rotation parameterization: the first two columns of a
/// rotation matrix before Gram-Schmidt orthonormalization.
struct Rotation6D {
    Vec3 a1 = Vec3::UnitX();
    Vec3 a2 = Vec3::UnitY();

    Vec6 vector() const;
    static Rotation6D from_vector(const Eigen::Ref<const Vec6> &v);
};

/// Gram-Schmidt: b1 = a1/|a1|, b2 = orthonormalized a2, b3 = b1 x b2.
/// Throws ErrorCode::numeric when a1 is near zero or a1, a2 are near parallel.
Mat3 r6_to_matrix(const Rotation6D &r);

/// Derivative of the column-major entries of r6_to_matrix(r) with respect to
/// (a1, a2). Row 3*c + k holds d R(k, c).
Eigen::Matrix<double, 9, 6> r6_to_matrix_jacobian(const Rotation6D &r);

/// First two columns of R. Throws ErrorCode::invalid_argument unless R is a
/// rotation within `tolerance`.
Rotation6D matrix_to_r6(const Mat3 &R, double tolerance = 1e-9);

bool is_rotation(const Mat3 &R, double tolerance = 1e-9);

/// Rotation of `angle_rad` about `axis` (normalized internally).
Mat3 axis_angle(const Vec3 &axis, double angle_rad);

/// Geodesic distance on SO(3) in degrees, clamped to [0, 180].
double geodesic_angle(const Mat3 &Ra, const Mat3 &Rb);

/// Extrinsic XYZ Euler angles (R = Rz(z) * Ry(y) * Rx(x)), degrees.
Vec3 euler_xyz_degrees(const Mat3 &R);
Mat3 from_euler_xyz_degrees(const Vec3 &xyz);

struct EulerErrors {
    Vec3 degrees = Vec3::Zero();  // per-axis |difference| wrapped into [0, 180]
    bool gimbal_lock = false;     // either input has |y| within 1e-6 deg of 90
};

EulerErrors euler_angle_errors(const Mat3 &R_pred, const Mat3 &R_gt);

/// |a - b| for angles in degrees, wrapped into [0, 180].
double wrapped_angle_difference(double a_deg, double b_deg);

}  // namespace holopose
