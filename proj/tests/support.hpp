#pragma once

// Shared test fixtures: random serial chains written as robot description
// text, and an independent forward-kinematics oracle built from explicit
// 4x4 homogeneous matrices.

#include "holopose/kinematics.hpp"
#include "holopose/rng.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace support {

using holopose::Vec3;
using Mat4 = Eigen::Matrix4d;

struct JointDef {
    std::string kind;  // revolute, prismatic, fixed
    Vec3 xyz = Vec3::Zero();
    Vec3 rpy = Vec3::Zero();
    Vec3 axis = Vec3::UnitZ();
    double lower = 0.0, upper = 0.0;
};

struct KeypointDef {
    int link = 0;
    Vec3 offset = Vec3::Zero();
};

// Serial chain: joint i connects link i to link i + 1.
struct ChainDef {
    std::vector<JointDef> joints;
    std::vector<KeypointDef> keypoints;

    int dof() const {
        int n = 0;
        for (const auto &j : joints)
            n += j.kind != "fixed";
        return n;
    }
};

inline Vec3 random_unit(holopose::Rng &rng) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    return v.normalized();
}

inline ChainDef random_chain(holopose::Rng &rng, int max_dof, double prismatic_share = 0.25,
                             double fixed_share = 0.15) {
    ChainDef c;
    const int dof = 1 + static_cast<int>(rng.uniform() * max_dof);
    while (c.dof() < dof) {
        JointDef j;
        const double u = rng.uniform();
        j.kind = u < fixed_share ? "fixed" : (u < fixed_share + prismatic_share ? "prismatic" : "revolute");
        j.xyz = Vec3(rng.uniform(-150, 150), rng.uniform(-150, 150), rng.uniform(50, 250));
        j.rpy = Vec3(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3));
        j.axis = random_unit(rng);
        if (j.kind == "revolute") {
            j.lower = -170.0;
            j.upper = 170.0;
        } else if (j.kind == "prismatic") {
            j.lower = -100.0;
            j.upper = 100.0;
        }
        c.joints.push_back(j);
    }
    const int links = static_cast<int>(c.joints.size()) + 1;
    const int n = 3 + static_cast<int>(rng.uniform() * 6);
    for (int k = 0; k < n; ++k)
        c.keypoints.push_back({static_cast<int>(rng.uniform() * links),
                               Vec3(rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-100, 100))});
    return c;
}

inline std::string fmt(const Vec3 &v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", v.x(), v.y(), v.z());
    return buf;
}

inline std::string to_urdf(const ChainDef &c, const std::string &name = "chain") {
    std::string s = "<robot name=\"" + name + "\">\n";
    for (std::size_t l = 0; l <= c.joints.size(); ++l)
        s += "  <link name=\"l" + std::to_string(l) + "\"/>\n";
    for (std::size_t i = 0; i < c.joints.size(); ++i) {
        const auto &j = c.joints[i];
        s += "  <joint name=\"j" + std::to_string(i) + "\" type=\"" + j.kind + "\">\n";
        s += "    <parent link=\"l" + std::to_string(i) + "\"/><child link=\"l" + std::to_string(i + 1) + "\"/>\n";
        s += "    <origin xyz=\"" + fmt(j.xyz) + "\" rpy=\"" + fmt(j.rpy) + "\"/>\n";
        if (j.kind != "fixed") {
            s += "    <axis xyz=\"" + fmt(j.axis) + "\"/>\n";
            char buf[96];
            std::snprintf(buf, sizeof buf, "    <limit lower=\"%.17g\" upper=\"%.17g\"/>\n", j.lower, j.upper);
            s += buf;
        }
        s += "  </joint>\n";
    }
    for (std::size_t k = 0; k < c.keypoints.size(); ++k)
        s += "  <keypoint name=\"k" + std::to_string(k) + "\" link=\"l" + std::to_string(c.keypoints[k].link) +
             "\" xyz=\"" + fmt(c.keypoints[k].offset) + "\"/>\n";
    return s + "</robot>\n";
}

inline Mat4 translation(const Vec3 &p) {
    Mat4 T = Mat4::Identity();
    T(0, 3) = p.x();
    T(1, 3) = p.y();
    T(2, 3) = p.z();
    return T;
}

inline Mat4 rot_x(double a) {
    Mat4 T = Mat4::Identity();
    T(1, 1) = std::cos(a), T(1, 2) = -std::sin(a);
    T(2, 1) = std::sin(a), T(2, 2) = std::cos(a);
    return T;
}

inline Mat4 rot_y(double a) {
    Mat4 T = Mat4::Identity();
    T(0, 0) = std::cos(a), T(0, 2) = std::sin(a);
    T(2, 0) = -std::sin(a), T(2, 2) = std::cos(a);
    return T;
}

inline Mat4 rot_z(double a) {
    Mat4 T = Mat4::Identity();
    T(0, 0) = std::cos(a), T(0, 1) = -std::sin(a);
    T(1, 0) = std::sin(a), T(1, 1) = std::cos(a);
    return T;
}

// Rodrigues: I + sin(a) K + (1 - cos(a)) K^2 for unit axis k.
inline Mat4 rodrigues(const Vec3 &k, double a) {
    Eigen::Matrix3d K;
    K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
    Mat4 T = Mat4::Identity();
    T.topLeftCorner<3, 3>() = Eigen::Matrix3d::Identity() + std::sin(a) * K + (1.0 - std::cos(a)) * K * K;
    return T;
}

// Keypoints in the base frame; q in degrees / mm, one value per moving joint.
inline std::vector<Vec3> oracle_base_keypoints(const ChainDef &c, const std::vector<double> &q) {
    std::vector<Mat4> link(c.joints.size() + 1, Mat4::Identity());
    int s = 0;
    for (std::size_t i = 0; i < c.joints.size(); ++i) {
        const auto &j = c.joints[i];
        const Vec3 axis = j.axis.normalized();
        Mat4 motion = Mat4::Identity();
        if (j.kind == "revolute")
            motion = rodrigues(axis, q[s++] * M_PI / 180.0);
        else if (j.kind == "prismatic")
            motion = translation(axis * q[s++]);
        // URDF rpy: fixed-axis roll, pitch, yaw.
        link[i + 1] = link[i] * translation(j.xyz) * rot_z(j.rpy.z()) * rot_y(j.rpy.y()) * rot_x(j.rpy.x()) * motion;
    }
    std::vector<Vec3> out;
    for (const auto &k : c.keypoints) {
        Eigen::Vector4d h(k.offset.x(), k.offset.y(), k.offset.z(), 1.0);
        out.push_back((link[k.link] * h).head<3>());
    }
    return out;
}

// Root: keypoint nearest the zero-state centroid, lowest index on ties.
inline int oracle_root(const ChainDef &c) {
    const auto X = oracle_base_keypoints(c, std::vector<double>(c.dof(), 0.0));
    Vec3 centroid = Vec3::Zero();
    for (const auto &x : X)
        centroid += x;
    centroid /= static_cast<double>(X.size());
    int best = 0;
    for (std::size_t k = 1; k < X.size(); ++k)
        if ((X[k] - centroid).norm() < (X[best] - centroid).norm() - 1e-9)
            best = static_cast<int>(k);
    return best;
}

// Camera-frame keypoints: the root keypoint lands on t.
inline std::vector<Vec3> oracle_fk(const ChainDef &c, const std::vector<double> &q, const Eigen::Matrix3d &R,
                                   const Vec3 &t) {
    const auto X = oracle_base_keypoints(c, q);
    const Vec3 root = X[oracle_root(c)];
    std::vector<Vec3> out;
    for (const auto &x : X)
        out.push_back(R * (x - root) + t);
    return out;
}

inline std::vector<double> random_q(const ChainDef &c, holopose::Rng &rng) {
    std::vector<double> q;
    for (const auto &j : c.joints)
        if (j.kind != "fixed")
            q.push_back(rng.uniform(j.lower, j.upper));
    return q;
}

inline Eigen::Matrix3d random_rotation(holopose::Rng &rng) {
    Eigen::Quaterniond quat(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    return quat.normalized().toRotationMatrix();
}

// max |a - b| / max(max |b|, floor)
inline double relative_error(const holopose::MatX &a, const holopose::MatX &b, double floor = 1e-12) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

// Central differences of f: R^n -> R^m at x with step h.
template <typename F>
holopose::MatX central_differences(F f, const holopose::VecX &x, double h) {
    const holopose::VecX f0 = f(x);
    holopose::MatX J(f0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        holopose::VecX xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return J;
}

}  // namespace support
