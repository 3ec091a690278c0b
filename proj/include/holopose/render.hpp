#pragma once

#include "holopose/camera.hpp"
#include "holopose/kinematics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace holopose {

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, 0 or 1

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

    bool at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u] != 0; }
    void set(int u, int v, bool on) { pixels[static_cast<std::size_t>(v) * width + u] = on ? 1 : 0; }
    std::size_t count() const;
    bool operator==(const BinaryMask &) const = default;
};

/// Capsules of every link, posed into the camera frame.
std::vector<Capsule> pose_capsules(const RobotModel &model, const JointState &q, const RigidPose &pose);

struct RasterResult {
    BinaryMask mask;
    bool empty_projection = false;  // no capsule reaches in front of the camera
};

/// A pixel is set iff its center ray passes within a capsule's radius.
RasterResult rasterize_silhouette(const std::vector<Capsule> &capsules, const CameraIntrinsics &K);

/// Shortest distance between the ray {s * dir : s >= 0} and the segment [a, b].
double ray_segment_distance(const Vec3 &dir, const Vec3 &a, const Vec3 &b);

/// |A and B| / |A or B|; 1 when both are empty.
double mask_iou(const BinaryMask &a, const BinaryMask &b);

/// Binary PGM (P5); nonzero reads as set, set pixels written as 255.
void write_pgm(const BinaryMask &mask, const std::string &path);
BinaryMask read_pgm(const std::string &path);

}  // namespace holopose
