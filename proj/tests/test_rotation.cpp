#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "holopose/rotation.hpp"

#include "support.hpp"

using namespace holopose;

namespace {

Rotation6D r6(double a, double b, double c, double d, double e, double f) {
    return {Vec3(a, b, c), Vec3(d, e, f)};
}

}  // namespace

TEST_CASE("gram-schmidt examples") {
    CHECK((r6_to_matrix(r6(1, 0, 0, 0, 1, 0)) - Mat3::Identity()).norm() == 0.0);
    CHECK((r6_to_matrix(r6(2, 0, 0, 0, 3, 0)) - Mat3::Identity()).norm() == 0.0);
    Mat3 expected;
    expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((r6_to_matrix(r6(0, 1, 0, -1, 0, 0)) - expected).norm() < 1e-15);
}

TEST_CASE("degenerate 6D input") {
    CHECK_THROWS_AS(r6_to_matrix(r6(0, 0, 0, 0, 1, 0)), Error);
    CHECK_THROWS_AS(r6_to_matrix(r6(1, 0, 0, 2, 0, 0)), Error);
    try {
        r6_to_matrix(r6(1, 0, 0, -3, 0, 0));
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::numeric);
    }
}

TEST_CASE("matrix to 6D") {
    const auto r = matrix_to_r6(Mat3::Identity());
    CHECK(r.a1 == Vec3::UnitX());
    CHECK(r.a2 == Vec3::UnitY());
    Mat3 bad = Mat3::Identity();
    bad(0, 0) = 1.1;
    CHECK_THROWS_AS(matrix_to_r6(bad), Error);
    Mat3 reflection = Mat3::Identity();
    reflection(2, 2) = -1.0;
    CHECK_THROWS_AS(matrix_to_r6(reflection), Error);
}

TEST_CASE("6D round trip on random rotations") {
    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 R = axis_angle(support::random_unit(rng), rng.uniform(-kPi, kPi));
        CHECK((r6_to_matrix(matrix_to_r6(R)) - R).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("gram-schmidt output is always a rotation") {
    Rng rng(22);
    for (int i = 0; i < 1000; ++i) {
        const Rotation6D r{Vec3(rng.normal(), rng.normal(), rng.normal()),
                           Vec3(rng.normal(), rng.normal(), rng.normal())};
        CHECK(is_rotation(r6_to_matrix(r), 1e-9));
    }
}

TEST_CASE("gram-schmidt absorbs positive scaling and shear") {
    Rng rng(23);
    for (int i = 0; i < 500; ++i) {
        const Rotation6D r{Vec3(rng.normal(), rng.normal(), rng.normal()),
                           Vec3(rng.normal(), rng.normal(), rng.normal())};
        const double s1 = rng.uniform(0.1, 10), s2 = rng.uniform(0.1, 10), c = rng.normal(0, 5);
        const Rotation6D scaled{s1 * r.a1, s2 * r.a2 + c * r.a1};
        CHECK((r6_to_matrix(scaled) - r6_to_matrix(r)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("6D jacobian matches central differences") {
    Rng rng(24);
    for (int i = 0; i < 50; ++i) {
        const Rotation6D r{Vec3(rng.normal(), rng.normal(), rng.normal()),
                           Vec3(rng.normal(), rng.normal(), rng.normal())};
        auto f = [](const VecX &v) {
            const Mat3 R = r6_to_matrix(Rotation6D::from_vector(v));
            return VecX(Eigen::Map<const VecX>(R.data(), 9));
        };
        const MatX fd = support::central_differences(f, r.vector(), 1e-6);
        CHECK(support::relative_error(r6_to_matrix_jacobian(r), fd) < 1e-5);
    }
}

TEST_CASE("geodesic angle") {
    const Mat3 Ra = from_euler_xyz_degrees(Vec3(10, 20, 30));
    CHECK(geodesic_angle(Ra, Ra) == doctest::Approx(0.0));
    CHECK(geodesic_angle(Ra, Ra * axis_angle(Vec3::UnitX(), 30 * kDegToRad)) == doctest::Approx(30.0));
    // Round-off pushing the trace argument past 1 still yields 0.
    Mat3 nudged = Mat3::Identity() * (1.0 + 1e-15);
    CHECK(geodesic_angle(Mat3::Identity(), nudged) == 0.0);
    CHECK(geodesic_angle(Mat3::Identity(), axis_angle(Vec3::UnitY(), kPi)) == doctest::Approx(180.0));
}

TEST_CASE("geodesic angle is a metric on random triples") {
    Rng rng(25);
    for (int i = 0; i < 500; ++i) {
        const Mat3 A = support::random_rotation(rng), B = support::random_rotation(rng),
                   C = support::random_rotation(rng);
        CHECK(geodesic_angle(A, B) == doctest::Approx(geodesic_angle(B, A)).epsilon(1e-12));
        CHECK(geodesic_angle(A, C) <= geodesic_angle(A, B) + geodesic_angle(B, C) + 1e-6);
    }
}

TEST_CASE("euler angle errors") {
    const Mat3 R = from_euler_xyz_degrees(Vec3(20, 30, 40));
    CHECK(euler_angle_errors(R, R).degrees.norm() == doctest::Approx(0.0));
    const auto e = euler_angle_errors(axis_angle(Vec3::UnitZ(), 10 * kDegToRad) * R, R);
    CHECK(e.degrees.x() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(e.degrees.y() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(e.degrees.z() == doctest::Approx(10.0));
    CHECK_FALSE(e.gimbal_lock);
    const auto wrap = euler_angle_errors(from_euler_xyz_degrees(Vec3(0, 0, -179)), from_euler_xyz_degrees(Vec3(0, 0, 179)));
    CHECK(wrap.degrees.z() == doctest::Approx(2.0));
    CHECK(wrapped_angle_difference(-179, 179) == doctest::Approx(2.0));
    CHECK(wrapped_angle_difference(0, 180) == doctest::Approx(180.0));
}

TEST_CASE("gimbal lock is flagged") {
    const auto e = euler_angle_errors(from_euler_xyz_degrees(Vec3(0, 90, 0)), Mat3::Identity());
    CHECK(e.gimbal_lock);
    CHECK(e.degrees.allFinite());
}

TEST_CASE("euler decomposition round trip") {
    Rng rng(26);
    for (int i = 0; i < 500; ++i) {
        const Vec3 a(rng.uniform(-179, 179), rng.uniform(-89, 89), rng.uniform(-179, 179));
        CHECK((euler_xyz_degrees(from_euler_xyz_degrees(a)) - a).norm() < 1e-9);
    }
}
