#include "holopose/camera.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

namespace holopose {

CameraIntrinsics CameraIntrinsics::centered(double fx, double fy, int width, int height) {
    return {fx, fy, 0.5 * width, 0.5 * height, width, height};
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
        throw Error(ErrorCode::validation, "camera focal lengths must be positive");
    if (width <= 0 || height <= 0)
        throw Error(ErrorCode::validation, "camera image size must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy))
        throw Error(ErrorCode::validation, "camera principal point must be finite");
}

int Projection::inframe_count() const {
    return static_cast<int>(std::count(in_frame.begin(), in_frame.end(), true));
}

Vec2 project_point(const Vec3 &p, const CameraIntrinsics &K) {
    if (!(p.z() > 0.0))
        throw Error(ErrorCode::invalid_argument, "point behind camera (z <= 0)");
    return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3 &p, const CameraIntrinsics &K) {
    const double iz = 1.0 / p.z();
    Eigen::Matrix<double, 2, 3> J;
    J << K.fx * iz, 0.0, -K.fx * p.x() * iz * iz,
         0.0, K.fy * iz, -K.fy * p.y() * iz * iz;
    return J;
}

Projection project(std::span<const Vec3> points, const CameraIntrinsics &K) {
    Projection out;
    out.points.reserve(points.size());
    out.in_frame.reserve(points.size());
    for (const auto &p : points) {
        const Vec2 uv = project_point(p, K);
        out.points.push_back(uv);
        out.in_frame.push_back(uv.x() >= 0.0 && uv.x() < K.width && uv.y() >= 0.0 && uv.y() < K.height);
    }
    return out;
}

Projection project(const KeypointSet &points, const CameraIntrinsics &K) {
    return project(std::span<const Vec3>(points.points), K);
}

double coarse_depth(const CameraIntrinsics &K, double real_area_mm2, double bbox_area_px2) {
    if (!(real_area_mm2 > 0.0) || !(bbox_area_px2 > 0.0))
        throw Error(ErrorCode::invalid_argument, "coarse depth needs positive areas");
    return std::sqrt(K.fx * K.fy * real_area_mm2 / bbox_area_px2);
}

DepthEstimate refine_depth(double lambda, double coarse) {
    if (!(coarse > 0.0))
        throw Error(ErrorCode::invalid_argument, "coarse depth must be positive");
    const double d = lambda * coarse;
    if (!(d > 0.0))
        throw Error(ErrorCode::numeric, "non-positive depth");
    return {coarse, lambda, d};
}

LiftedKeypoints lift_keypoints(const KeypointSet &root_relative, double depth, int root_index) {
    if (root_index < 0 || root_index >= static_cast<int>(root_relative.size()))
        throw Error(ErrorCode::invalid_argument, "root keypoint index out of range");
    LiftedKeypoints out;
    out.lifted.frame = KeypointFrame::lifted_absolute;
    out.lifted.points.reserve(root_relative.size());
    for (const auto &p : root_relative.points)
        out.lifted.points.push_back(p + Vec3(0.0, 0.0, depth));
    out.translation = out.lifted.points[root_index];
    return out;
}

KeypointSet to_root_relative(const KeypointSet &absolute, double depth) {
    KeypointSet out;
    out.frame = KeypointFrame::root_relative;
    out.points.reserve(absolute.size());
    for (const auto &p : absolute.points)
        out.points.push_back(p - Vec3(0.0, 0.0, depth));
    return out;
}

BoundingBox keypoint_bbox(const Projection &projection, double padding, const CameraIntrinsics &K) {
    BoundingBox box;
    bool any = false;
    for (std::size_t i = 0; i < projection.points.size(); ++i) {
        if (!projection.in_frame[i])
            continue;
        const Vec2 &p = projection.points[i];
        if (!any) {
            box.min = box.max = p;
            any = true;
        } else {
            box.min = box.min.cwiseMin(p);
            box.max = box.max.cwiseMax(p);
        }
    }
    if (!any)
        throw Error(ErrorCode::invalid_argument, "bounding box needs at least one in-frame keypoint");
    box.min.array() -= padding;
    box.max.array() += padding;
    const Vec2 lo(0.0, 0.0);
    const Vec2 hi(K.width, K.height);
    box.min = box.min.cwiseMax(lo).cwiseMin(hi);
    box.max = box.max.cwiseMax(lo).cwiseMin(hi);
    return box;
}

double real_area(const RobotModel &model) {
    const auto X = keypoints_in_base(model, JointState{std::vector<double>(model.dof, 0.0)});
    Vec3 lo = X.front();
    Vec3 hi = X.front();
    for (const auto &x : X) {
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
    }
    std::array<double, 3> ext{hi.x() - lo.x(), hi.y() - lo.y(), hi.z() - lo.z()};
    std::sort(ext.begin(), ext.end(), std::greater<>());
    return ext[0] * ext[1];
}

}  // namespace holopose
