#pragma once

#include "holopose/kinematics.hpp"
#include "holopose/types.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace holopose {

struct CameraIntrinsics {
    double fx = 600.0;
    double fy = 600.0;
    double cx = 320.0;
    double cy = 240.0;
    int width = 640;
    int height = 480;

    /// Intrinsics with the principal point at the image center.
    static CameraIntrinsics centered(double fx, double fy, int width, int height);
    void validate() const;
};

struct Projection {
    std::vector<Vec2> points;
    std::vector<bool> in_frame;  // 0 <= u < width and 0 <= v < height

    int inframe_count() const;
};

Vec2 project_point(const Vec3 &p, const CameraIntrinsics &K);

/// d(u, v) / d(x, y, z) at p.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3 &p, const CameraIntrinsics &K);

/// Throws ErrorCode::invalid_argument ("behind camera") on any z <= 0.
Projection project(std::span<const Vec3> points, const CameraIntrinsics &K);
Projection project(const KeypointSet &points, const CameraIntrinsics &K);

struct DepthEstimate {
    double coarse = 0.0;  // d_c, mm
    double lambda = 1.0;
    double depth = 0.0;   // d = lambda * d_c, mm
};

/// d_c = sqrt(fx * fy * A_real / A_bbox).
double coarse_depth(const CameraIntrinsics &K, double real_area_mm2, double bbox_area_px2);

/// Throws ErrorCode::numeric when the refined depth is not positive.
DepthEstimate refine_depth(double lambda, double coarse);

struct LiftedKeypoints {
    KeypointSet lifted;  // lifted_absolute
    Vec3 translation = Vec3::Zero();
};

/// P'_i = P^r_i + (0, 0, d); t = P'_root.
LiftedKeypoints lift_keypoints(const KeypointSet &root_relative, double depth, int root_index);

/// Inverse of lift_keypoints: P^r_i = P_i - (0, 0, d).
KeypointSet to_root_relative(const KeypointSet &absolute, double depth);

struct BoundingBox {
    Vec2 min = Vec2::Zero();
    Vec2 max = Vec2::Zero();

    double width() const { return max.x() - min.x(); }
    double height() const { return max.y() - min.y(); }
    double area() const { return width() * height(); }
};

/// Box over the in-frame points, expanded by `padding` pixels and clipped to
/// [0, width] x [0, height]. Throws when no point is in frame.
BoundingBox keypoint_bbox(const Projection &projection, double padding, const CameraIntrinsics &K);

/// Robot area constant used by the coarse depth: product of the two largest
/// extents of the zero-state keypoint bounding box, mm^2.
double real_area(const RobotModel &model);

}  // namespace holopose
