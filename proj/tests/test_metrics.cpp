#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "holopose/metrics.hpp"

#include "support.hpp"

#include <cmath>

using namespace holopose;

namespace {

KeypointSet points(std::vector<Vec3> p) {
    KeypointSet s;
    s.points = std::move(p);
    return s;
}

EvalRecord record(double add, int inframe) {
    EvalRecord r;
    r.add = add;
    r.inframe_count = inframe;
    r.joint_errors = {1.0};
    r.joint_kinds = {JointKind::revolute};
    return r;
}

// Midpoint Riemann sum of the accuracy curve.
double riemann_auc(const std::vector<double> &v, double max_threshold, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) * max_threshold / n;
        int below = 0;
        for (double x : v)
            below += x < t;
        acc += static_cast<double>(below) / v.size();
    }
    return 100.0 * acc / n;
}

}  // namespace

TEST_CASE("add distance") {
    const auto a = points({Vec3(0, 0, 0), Vec3(100, 0, 0)});
    CHECK(add_distance(a, a) == 0.0);
    CHECK(add_distance(points({Vec3(0, 50, 0), Vec3(100, 50, 0)}), a) == doctest::Approx(50.0));
    CHECK(add_distance(points({Vec3(30, 0, 0), Vec3(100, 0, 50)}), a) == doctest::Approx(40.0));
    CHECK_THROWS_AS(add_distance(a, points({Vec3::Zero()})), Error);
    CHECK_THROWS_AS(add_distance(points({}), points({})), Error);
}

TEST_CASE("add distance satisfies the triangle inequality") {
    Rng rng(71);
    for (int t = 0; t < 300; ++t) {
        std::vector<Vec3> a, b, c;
        for (int k = 0; k < 7; ++k) {
            a.emplace_back(rng.normal(0, 100), rng.normal(0, 100), rng.normal(0, 100));
            b.emplace_back(rng.normal(0, 100), rng.normal(0, 100), rng.normal(0, 100));
            c.emplace_back(rng.normal(0, 100), rng.normal(0, 100), rng.normal(0, 100));
        }
        CHECK(add_distance(points(a), points(c)) <=
              add_distance(points(a), points(b)) + add_distance(points(b), points(c)) + 1e-9);
    }
}

TEST_CASE("auc") {
    const std::vector<double> zeros(5, 0.0), fifties(5, 50.0), big{100.0, 250.0};
    CHECK(auc(zeros) == 100.0);
    CHECK(auc(fifties) == 50.0);
    CHECK(auc(big) == 0.0);
    CHECK(auc(fifties, 200.0) == 75.0);
    CHECK_THROWS_AS(auc(std::vector<double>{}), Error);
    CHECK_THROWS_AS(auc(zeros, 0.0), Error);
    CHECK_THROWS_AS(auc(std::vector<double>{-1.0}), Error);
}

TEST_CASE("auc matches a riemann sum") {
    Rng rng(72);
    for (int s = 0; s < 10; ++s) {
        std::vector<double> v(1 + static_cast<int>(rng.uniform() * 50));
        for (auto &x : v)
            x = std::abs(rng.normal(0, 60));
        CHECK(std::abs(riemann_auc(v, 100.0, 100000) - auc(v)) < 0.01);
    }
}

TEST_CASE("auc does not increase when an add value grows") {
    Rng rng(73);
    for (int s = 0; s < 300; ++s) {
        std::vector<double> v(10);
        for (auto &x : v)
            x = std::abs(rng.normal(0, 70));
        const double before = auc(v);
        v[static_cast<int>(rng.uniform() * 10)] += rng.uniform(0, 50);
        CHECK(auc(v) <= before);
    }
}

TEST_CASE("means and medians") {
    const std::vector<double> one{7.0}, two{10.0, 30.0}, odd{5.0, 1.0, 3.0};
    CHECK(mean(one) == 7.0);
    CHECK(mean(two) == 20.0);
    CHECK(median(two) == 20.0);
    CHECK(median(odd) == 3.0);
    CHECK(mean_add(two) == 20.0);
    CHECK(mean_depth_error(two) == 20.0);
    const std::vector<Vec3> eul{Vec3(1, 2, 3), Vec3(4, 5, 6)};
    CHECK(mean_rotation_error(eul) == 3.5);
    CHECK_THROWS_AS(mean(std::vector<double>{}), Error);
}

TEST_CASE("joint errors pooled by kind") {
    const std::vector<double> e{2.0, 4.0, 3.0};
    const std::vector<JointKind> k{JointKind::revolute, JointKind::revolute, JointKind::prismatic};
    const auto m = mean_joint_error(e, k);
    CHECK(m.revolute_deg == 3.0);
    CHECK(m.prismatic_mm == 3.0);
    CHECK(m.revolute_count == 2);
    CHECK(m.prismatic_count == 1);
    const std::vector<double> r{1.0, 5.0};
    const std::vector<JointKind> rk{JointKind::revolute, JointKind::revolute};
    const auto only = mean_joint_error(r, rk);
    CHECK(only.prismatic_count == 0);
    CHECK(only.prismatic_mm == 0.0);
    CHECK_THROWS_AS(mean_joint_error(std::vector<double>{}, std::vector<JointKind>{}), Error);
    CHECK_THROWS_AS(mean_joint_error(e, rk), Error);
}

TEST_CASE("stratification by in-frame count") {
    const std::vector<EvalRecord> same{record(10, 7), record(30, 7)};
    const auto one = stratify_by_inframe(same);
    REQUIRE(one.size() == 1);
    CHECK(one[0].inframe == 7);
    CHECK(one[0].images == 2);
    CHECK(one[0].mean_add == 20.0);

    const std::vector<EvalRecord> split{record(0, 5), record(100, 4), record(0, 5), record(100, 4)};
    const auto rows = stratify_by_inframe(split);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].inframe == 5);
    CHECK(rows[0].auc == 100.0);
    CHECK(rows[0].mean_add == 0.0);
    CHECK(rows[1].inframe == 4);
    CHECK(rows[1].auc == 0.0);
    CHECK(rows[1].mean_add == 100.0);
    // Counts 6, 3, 2 never occur and get no row.
    CHECK(strata_csv(rows) == "inframe_kps,images,auc,mean_add\n5,2,100,0\n4,2,0,100\n");
    CHECK(stratify_by_inframe(std::vector<EvalRecord>{}).empty());
}

TEST_CASE("summary report") {
    std::vector<EvalRecord> rs{record(10, 7), record(30, 6)};
    rs[0].euler_errors = Vec3(1, 1, 1);
    rs[1].euler_errors = Vec3(3, 3, 3);
    rs[0].translation_error = 4.0;
    rs[1].translation_error = 6.0;
    const auto s = summarize(rs);
    CHECK(s.images == 2);
    CHECK(s.auc == doctest::Approx(80.0));
    CHECK(s.mean_add == 20.0);
    CHECK(s.median_add == 20.0);
    CHECK(s.mean_rotation_error == 2.0);
    CHECK(s.mean_translation_error == 5.0);
    CHECK(s.joints.revolute_deg == 1.0);
    const auto text = metrics_report(s);
    CHECK(text.find("auc = 80\n") != std::string::npos);
    CHECK(text.find("mean_add = 20\n") != std::string::npos);
}

TEST_CASE("six significant digits") {
    CHECK(format6(1.0) == "1");
    CHECK(format6(2.0 / 3.0) == "0.666667");
    CHECK(format6(123456789.0) == "1.23457e+08");
}
