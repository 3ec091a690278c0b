#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "holopose/render.hpp"

#include "support.hpp"

#include <cmath>
#include <filesystem>

using namespace holopose;

namespace {

const char *kArm = R"(<robot name="arm">
  <link name="base"><capsule a="0 0 0" b="0 0 100" radius="30"/></link>
  <link name="upper"><capsule a="0 0 0" b="200 0 0" radius="20"/></link>
  <joint name="shoulder" type="revolute">
    <parent link="base"/><child link="upper"/>
    <origin xyz="0 0 100" rpy="0 0 0"/><axis xyz="0 0 1"/>
  </joint>
  <keypoint name="foot" link="base" xyz="0 0 0"/>
  <keypoint name="hip" link="base" xyz="0 0 100"/>
  <keypoint name="hand" link="upper" xyz="200 0 0"/>
</robot>)";

CameraIntrinsics cam() { return CameraIntrinsics::centered(500, 500, 160, 120); }

BinaryMask union_of(const BinaryMask &a, const BinaryMask &b) {
    BinaryMask m(a.width, a.height);
    for (std::size_t p = 0; p < m.pixels.size(); ++p)
        m.pixels[p] = a.pixels[p] | b.pixels[p];
    return m;
}

// Brute-force distance: dense sampling of the segment, exact point-to-ray.
double sampled_distance(const Vec3 &dir, const Vec3 &a, const Vec3 &b) {
    double best = 1e300;
    for (int i = 0; i <= 20000; ++i) {
        const Vec3 p = a + (b - a) * (i / 20000.0);
        const double s = std::max(0.0, dir.dot(p) / dir.squaredNorm());
        best = std::min(best, (s * dir - p).norm());
    }
    return best;
}

}  // namespace

TEST_CASE("capsule placement") {
    const auto model = parse_robot_description(kArm);
    // Zero-state centroid is (66.7, 0, 66.7); "hip" is the nearest keypoint.
    REQUIRE(model.root_keypoint == 1);
    const auto c0 = pose_capsules(model, JointState{{0.0}}, RigidPose::identity());
    REQUIRE(c0.size() == 2);
    CHECK((c0[0].a - Vec3(0, 0, -100)).norm() < 1e-12);
    CHECK((c0[0].b - Vec3(0, 0, 0)).norm() < 1e-12);
    CHECK((c0[1].b - Vec3(200, 0, 0)).norm() < 1e-12);
    CHECK(c0[1].radius == 20.0);

    const Vec3 t(10, -20, 1500);
    const auto shifted = pose_capsules(model, JointState{{0.0}}, {Mat3::Identity(), t});
    for (std::size_t i = 0; i < c0.size(); ++i) {
        CHECK((shifted[i].a - (c0[i].a + t)).norm() < 1e-12);
        CHECK((shifted[i].b - (c0[i].b + t)).norm() < 1e-12);
    }

    const Mat3 Rz = axis_angle(Vec3::UnitZ(), kPi / 2);
    const auto turned = pose_capsules(model, JointState{{0.0}}, {Rz, Vec3::Zero()});
    CHECK((turned[1].b - Vec3(0, 200, 0)).norm() < 1e-12);
    const auto bent = pose_capsules(model, JointState{{90.0}}, RigidPose::identity());
    CHECK((bent[1].b - Vec3(0, 200, 0)).norm() < 1e-12);
}

TEST_CASE("ray to segment distance") {
    CHECK(ray_segment_distance(Vec3::UnitZ(), Vec3(5, 0, 10), Vec3(5, 0, 20)) == doctest::Approx(5.0));
    // Segment behind the origin: nearest ray point is the origin.
    CHECK(ray_segment_distance(Vec3::UnitZ(), Vec3(0, 3, -10), Vec3(0, 4, -10)) == doctest::Approx(std::sqrt(109.0)));
    // Crossing segment.
    CHECK(ray_segment_distance(Vec3::UnitZ(), Vec3(-1, 2, 5), Vec3(1, 2, 5)) == doctest::Approx(2.0));
    Rng rng(61);
    for (int i = 0; i < 200; ++i) {
        const Vec3 dir(rng.normal(0, 0.3), rng.normal(0, 0.3), 1.0);
        const Vec3 a(rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-50, 300));
        const Vec3 b(rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-50, 300));
        const double d = ray_segment_distance(dir, a, b);
        const double oracle = sampled_distance(dir, a, b);
        CHECK(d <= oracle + 1e-9);
        CHECK(d >= oracle - 0.02);
    }
}

TEST_CASE("sphere renders as a disc") {
    auto K = CameraIntrinsics::centered(500, 500, 200, 200);
    const Vec3 c(0, 0, 1000);
    const double r = 50.0;
    const auto m = rasterize_silhouette({{c, c, r}}, K).mask;
    // Oracle: pixel-center rays within r of the sphere center.
    std::size_t expected = 0;
    for (int v = 0; v < K.height; ++v)
        for (int u = 0; u < K.width; ++u) {
            const Vec3 dir = Vec3((u + 0.5 - K.cx) / K.fx, (v + 0.5 - K.cy) / K.fy, 1.0).normalized();
            const bool hit = (c - c.dot(dir) * dir).norm() <= r;
            expected += hit;
            CHECK(m.at(u, v) == hit);
        }
    CHECK(m.count() == expected);
    // Disc radius close to fx * r / z = 25 px.
    const double radius_px = std::sqrt(m.count() / kPi);
    CHECK(radius_px == doctest::Approx(25.0).epsilon(0.02));
}

TEST_CASE("capsule behind the camera") {
    const auto r = rasterize_silhouette({{Vec3(0, 0, -500), Vec3(0, 0, -300), 50}}, cam());
    CHECK(r.empty_projection);
    CHECK(r.mask.count() == 0);
    CHECK(r.mask.width == 160);
    CHECK(rasterize_silhouette({}, cam()).empty_projection);
}

TEST_CASE("disjoint capsules render as a union") {
    const Capsule a{Vec3(-100, 0, 1000), Vec3(-60, 20, 1000), 10};
    const Capsule b{Vec3(60, -20, 900), Vec3(100, 0, 1100), 15};
    const auto K = cam();
    const auto ma = rasterize_silhouette({a}, K).mask;
    const auto mb = rasterize_silhouette({b}, K).mask;
    CHECK(ma.count() > 0);
    CHECK(mb.count() > 0);
    CHECK(rasterize_silhouette({a, b}, K).mask == union_of(ma, mb));
}

TEST_CASE("rasterization is deterministic and monotone in radius") {
    const auto model = load_robot_description(std::string(HOLOPOSE_DATA_DIR) + "/robots/panda.urdf");
    Rng rng(62);
    const auto K = CameraIntrinsics::centered(300, 300, 160, 120);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> q;
        for (const auto &lim : model.state_limits())
            q.push_back(rng.uniform(lim.lower, lim.upper));
        const RigidPose pose{support::random_rotation(rng), Vec3(rng.normal(0, 50), rng.normal(0, 50), 1800)};
        auto caps = pose_capsules(model, JointState{q}, pose);
        const auto m1 = rasterize_silhouette(caps, K).mask;
        CHECK(rasterize_silhouette(caps, K).mask == m1);
        for (auto &c : caps)
            c.radius *= 1.3;
        const auto m2 = rasterize_silhouette(caps, K).mask;
        for (std::size_t p = 0; p < m1.pixels.size(); ++p)
            if (m1.pixels[p])
                CHECK(m2.pixels[p]);
    }
}

TEST_CASE("mask iou") {
    BinaryMask a(10, 10), b(10, 10), c(10, 10);
    for (int v = 0; v < 10; ++v)
        for (int u = 0; u < 10; ++u) {
            a.set(u, v, true);
            b.set(u, v, u < 5);
        }
    c.set(0, 0, true);
    CHECK(mask_iou(a, a) == 1.0);
    CHECK(mask_iou(b, a) == 0.5);
    CHECK(mask_iou(a, b) == mask_iou(b, a));
    BinaryMask d(10, 10);
    d.set(9, 9, true);
    CHECK(mask_iou(c, d) == 0.0);
    CHECK(mask_iou(BinaryMask(10, 10), BinaryMask(10, 10)) == 1.0);
    CHECK_THROWS_AS(mask_iou(a, BinaryMask(5, 5)), Error);
}

TEST_CASE("pgm round trip") {
    BinaryMask m(7, 3);
    m.set(0, 0, true);
    m.set(6, 2, true);
    m.set(3, 1, true);
    const auto path = (std::filesystem::temp_directory_path() / "holopose_mask.pgm").string();
    write_pgm(m, path);
    CHECK(read_pgm(path) == m);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_pgm(path), Error);
}
