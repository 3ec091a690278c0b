#include "holopose/heatmap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace holopose {

static_assert(std::endian::native == std::endian::little, "heatmap fixtures assume a little-endian host");

std::size_t VoxelGridSpec::voxel_count() const {
    return static_cast<std::size_t>(depth) * height * width;
}

void VoxelGridSpec::validate() const {
    if (depth < 1 || height < 1 || width < 1)
        throw Error(ErrorCode::validation, "voxel grid counts must be at least 1");
    if (!((extent_max - extent_min).minCoeff() > 0.0))
        throw Error(ErrorCode::validation, "voxel grid extent must have positive volume");
}

VoxelGridSpec default_grid(const RobotModel &model, const Vec3 &center) {
    const double half = 1.25 * max_reach(model);
    VoxelGridSpec grid;
    grid.extent_min = center - Vec3::Constant(half);
    grid.extent_max = center + Vec3::Constant(half);
    return grid;
}

std::vector<double> softmax(const std::vector<double> &scores) {
    if (scores.empty())
        throw Error(ErrorCode::invalid_argument, "softmax of an empty volume");
    for (double s : scores)
        if (!std::isfinite(s))
            throw Error(ErrorCode::invalid_argument, "heatmap scores must be finite");
    const double peak = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t v = 0; v < scores.size(); ++v) {
        out[v] = std::exp(scores[v] - peak);
        sum += out[v];
    }
    for (double &w : out)
        w /= sum;
    return out;
}

Heatmap3D normalize(const VoxelGridSpec &grid, const std::vector<std::vector<double>> &scores) {
    grid.validate();
    Heatmap3D out;
    out.grid = grid;
    out.volumes.reserve(scores.size());
    for (const auto &volume : scores) {
        if (volume.size() != grid.voxel_count())
            throw Error(ErrorCode::invalid_argument, "heatmap volume size does not match the grid");
        out.volumes.push_back(softmax(volume));
    }
    return out;
}

Vec3 soft_argmax(const VoxelGridSpec &grid, const std::vector<double> &volume) {
    if (volume.size() != grid.voxel_count())
        throw Error(ErrorCode::invalid_argument, "heatmap volume size does not match the grid");
    double sum = 0.0;
    Vec3 acc = Vec3::Zero();
    std::size_t v = 0;
    for (int k = 0; k < grid.depth; ++k)
        for (int i = 0; i < grid.height; ++i)
            for (int j = 0; j < grid.width; ++j, ++v) {
                const double w = volume[v];
                if (w < 0.0 || !std::isfinite(w))
                    throw Error(ErrorCode::invalid_argument, "unnormalized heatmap: negative or non-finite weight");
                sum += w;
                acc += w * Vec3(k, i, j);
            }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorCode::invalid_argument, "unnormalized heatmap: weights do not sum to 1");
    return acc;
}

MatX soft_argmax_gradient(const VoxelGridSpec &grid, const std::vector<double> &scores) {
    const auto p = softmax(scores);
    const Vec3 c = soft_argmax(grid, p);
    MatX G(3, p.size());
    std::size_t v = 0;
    for (int k = 0; k < grid.depth; ++k)
        for (int i = 0; i < grid.height; ++i)
            for (int j = 0; j < grid.width; ++j, ++v)
                G.col(v) = p[v] * (Vec3(k, i, j) - c);
    return G;
}

Vec3 voxel_to_metric(const Vec3 &voxel, const VoxelGridSpec &grid) {
    const Vec3 counts(grid.depth, grid.height, grid.width);
    constexpr double tol = 1e-9;
    for (int a = 0; a < 3; ++a)
        if (!(voxel[a] >= -tol && voxel[a] <= counts[a] - 1.0 + tol))
            throw Error(ErrorCode::invalid_argument, "voxel coordinate outside the index box");
    // (k, i, j) -> (z, y, x)
    const Vec3 idx(voxel[2], voxel[1], voxel[0]);
    const Vec3 n(grid.width, grid.height, grid.depth);
    const Vec3 pitch = (grid.extent_max - grid.extent_min).cwiseQuotient(n);
    return grid.extent_min + (idx.array() + 0.5).matrix().cwiseProduct(pitch);
}

Vec3 metric_to_voxel(const Vec3 &point, const VoxelGridSpec &grid) {
    const Vec3 n(grid.width, grid.height, grid.depth);
    const Vec3 pitch = (grid.extent_max - grid.extent_min).cwiseQuotient(n);
    const Vec3 idx = (point - grid.extent_min).cwiseQuotient(pitch).array() - 0.5;
    return {idx[2], idx[1], idx[0]};
}

KeypointSet keypoints_from_heatmaps(const Heatmap3D &heatmap) {
    heatmap.grid.validate();
    KeypointSet out;
    out.frame = KeypointFrame::root_relative;
    out.points.reserve(heatmap.volumes.size());
    for (const auto &volume : heatmap.volumes)
        out.points.push_back(voxel_to_metric(soft_argmax(heatmap.grid, volume), heatmap.grid));
    return out;
}

namespace {

constexpr char kMagic[4] = {'H', 'P', 'H', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream &out, const T &v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream &in, const std::string &path) {
    T v;
    if (!in.read(reinterpret_cast<char *>(&v), sizeof(T)))
        throw Error(ErrorCode::parse, "truncated heatmap file '" + path + "'");
    return v;
}

}  // namespace

void write_heatmap(const Heatmap3D &heatmap, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::io, "cannot write heatmap file '" + path + "'");
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint32_t>(heatmap.volumes.size()));
    put(out, static_cast<std::uint32_t>(heatmap.grid.depth));
    put(out, static_cast<std::uint32_t>(heatmap.grid.height));
    put(out, static_cast<std::uint32_t>(heatmap.grid.width));
    for (int a = 0; a < 3; ++a)
        put(out, heatmap.grid.extent_min[a]);
    for (int a = 0; a < 3; ++a)
        put(out, heatmap.grid.extent_max[a]);
    for (const auto &volume : heatmap.volumes) {
        if (volume.size() != heatmap.grid.voxel_count())
            throw Error(ErrorCode::invalid_argument, "heatmap volume size does not match the grid");
        out.write(reinterpret_cast<const char *>(volume.data()),
                  static_cast<std::streamsize>(volume.size() * sizeof(double)));
    }
    if (!out)
        throw Error(ErrorCode::io, "failed writing heatmap file '" + path + "'");
}

Heatmap3D read_heatmap(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open heatmap file '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw Error(ErrorCode::parse, "'" + path + "' is not a heatmap file");
    if (get<std::uint32_t>(in, path) != kVersion)
        throw Error(ErrorCode::parse, "unsupported heatmap file version in '" + path + "'");
    Heatmap3D hm;
    const auto n = get<std::uint32_t>(in, path);
    hm.grid.depth = static_cast<int>(get<std::uint32_t>(in, path));
    hm.grid.height = static_cast<int>(get<std::uint32_t>(in, path));
    hm.grid.width = static_cast<int>(get<std::uint32_t>(in, path));
    for (int a = 0; a < 3; ++a)
        hm.grid.extent_min[a] = get<double>(in, path);
    for (int a = 0; a < 3; ++a)
        hm.grid.extent_max[a] = get<double>(in, path);
    hm.grid.validate();
    hm.volumes.assign(n, std::vector<double>(hm.grid.voxel_count()));
    for (auto &volume : hm.volumes)
        if (!in.read(reinterpret_cast<char *>(volume.data()),
                     static_cast<std::streamsize>(volume.size() * sizeof(double))))
            throw Error(ErrorCode::parse, "truncated heatmap file '" + path + "'");
    return hm;
}

}  // namespace holopose
