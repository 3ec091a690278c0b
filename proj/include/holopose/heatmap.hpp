#pragma once

#include "holopose/kinematics.hpp"
#include "holopose/types.hpp"

#include <string>
#include <vector>

namespace holopose {

/// Voxel grid over a root-relative metric box. Voxel-space coordinates are
/// ordered (k, i, j) along (D, H', W'), which map onto metric (z, y, x).
struct VoxelGridSpec {
    int depth = 64;   // D, along z
    int height = 64;  // H', along y
    int width = 64;   // W', along x
    Vec3 extent_min = Vec3::Constant(-1000.0);  // metric (x, y, z), mm
    Vec3 extent_max = Vec3::Constant(1000.0);

    std::size_t voxel_count() const;
    void validate() const;
    std::size_t index(int k, int i, int j) const {
        return (static_cast<std::size_t>(k) * height + i) * width + j;
    }
};

/// Default grid: 64^3 cube centered on `center` with half-extent 1.25x the
/// robot's maximum reach.
VoxelGridSpec default_grid(const RobotModel &model, const Vec3 &center = Vec3::Zero());

/// N per-keypoint volumes, each stored row-major as [k][i][j].
struct Heatmap3D {
    VoxelGridSpec grid;
    std::vector<std::vector<double>> volumes;
};

/// Softmax over all voxels of each raw score volume.
Heatmap3D normalize(const VoxelGridSpec &grid, const std::vector<std::vector<double>> &scores);
std::vector<double> softmax(const std::vector<double> &scores);

/// Expected (k, i, j) under a normalized volume. Throws when the volume is not
/// normalized within 1e-9 or carries negative weights.
Vec3 soft_argmax(const VoxelGridSpec &grid, const std::vector<double> &volume);

/// d soft_argmax(softmax(scores)) / d scores, a 3 x V matrix.
MatX soft_argmax_gradient(const VoxelGridSpec &grid, const std::vector<double> &scores);

/// Voxel (k, i, j) -> metric (x, y, z) at voxel centers: index 0 lands on the
/// center of the first cell along each axis.
Vec3 voxel_to_metric(const Vec3 &voxel, const VoxelGridSpec &grid);

/// Inverse of voxel_to_metric without range checking.
Vec3 metric_to_voxel(const Vec3 &point, const VoxelGridSpec &grid);

KeypointSet keypoints_from_heatmaps(const Heatmap3D &heatmap);

/// Binary fixture format: magic "HPHM", u32 version, u32 N, D, H', W',
/// f64 extent_min[3], extent_max[3], then N*D*H'*W' f64 values, all little-endian.
void write_heatmap(const Heatmap3D &heatmap, const std::string &path);
Heatmap3D read_heatmap(const std::string &path);

}  // namespace holopose
