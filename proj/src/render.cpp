#include "holopose/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace holopose {

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](auto p) { return p != 0; }));
}

std::vector<Capsule> pose_capsules(const RobotModel &model, const JointState &q, const RigidPose &pose) {
    const auto T = link_transforms(model, to_internal(model, q));
    const auto &root_kp = model.keypoints[model.root_keypoint];
    const Vec3 root = T[root_kp.link] * root_kp.offset;
    std::vector<Capsule> out;
    for (std::size_t l = 0; l < model.links.size(); ++l)
        for (const auto &c : model.links[l].capsules)
            out.push_back({pose.rotation * (T[l] * c.a - root) + pose.translation,
                           pose.rotation * (T[l] * c.b - root) + pose.translation, c.radius});
    return out;
}

double ray_segment_distance(const Vec3 &dir, const Vec3 &a, const Vec3 &b) {
    // Convex problem over s >= 0, r in [0, 1]: the minimum is the interior
    // stationary point when feasible, otherwise it lies on a boundary edge.
    const Vec3 e = b - a;
    const double dd = dir.dot(dir);
    const double ee = e.dot(e);
    auto point_to_ray = [&](const Vec3 &p) {
        const double s = std::max(0.0, dir.dot(p) / dd);
        return (s * dir - p).norm();
    };
    double best = std::min(point_to_ray(a), point_to_ray(b));
    if (ee > 0.0) {
        // s = 0: origin to segment
        const double r0 = std::clamp(-e.dot(a) / ee, 0.0, 1.0);
        best = std::min(best, (a + r0 * e).norm());
        const double de = dir.dot(e);
        const double denom = dd * ee - de * de;
        if (denom > 1e-14 * dd * ee) {
            const double da = dir.dot(a);
            const double ea = e.dot(a);
            const double r = (de * da - dd * ea) / denom;
            const double s = (da + r * de) / dd;
            if (r > 0.0 && r < 1.0 && s > 0.0)
                best = std::min(best, (s * dir - (a + r * e)).norm());
        }
    }
    return best;
}

RasterResult rasterize_silhouette(const std::vector<Capsule> &capsules, const CameraIntrinsics &K) {
    K.validate();
    RasterResult out{BinaryMask(K.width, K.height), true};
    for (const auto &c : capsules) {
        if (std::max(c.a.z(), c.b.z()) + c.radius <= 0.0)
            continue;
        out.empty_projection = false;

        // Pixel window: projected corners of the capsule's bounding box when it
        // lies entirely in front of the camera, the whole image otherwise.
        int u0 = 0, v0 = 0, u1 = K.width - 1, v1 = K.height - 1;
        const Vec3 lo = c.a.cwiseMin(c.b).array() - c.radius;
        const Vec3 hi = c.a.cwiseMax(c.b).array() + c.radius;
        if (lo.z() > 0.0) {
            double umin = std::numeric_limits<double>::infinity(), vmin = umin;
            double umax = -umin, vmax = -umin;
            for (int corner = 0; corner < 8; ++corner) {
                const Vec3 p((corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(),
                             (corner & 4) ? hi.z() : lo.z());
                const Vec2 uv = project_point(p, K);
                umin = std::min(umin, uv.x());
                umax = std::max(umax, uv.x());
                vmin = std::min(vmin, uv.y());
                vmax = std::max(vmax, uv.y());
            }
            u0 = std::max(0, static_cast<int>(std::floor(umin - 1.0)));
            v0 = std::max(0, static_cast<int>(std::floor(vmin - 1.0)));
            u1 = std::min(K.width - 1, static_cast<int>(std::ceil(umax + 1.0)));
            v1 = std::min(K.height - 1, static_cast<int>(std::ceil(vmax + 1.0)));
        }
        for (int v = v0; v <= v1; ++v)
            for (int u = u0; u <= u1; ++u) {
                if (out.mask.at(u, v))
                    continue;
                const Vec3 dir((u + 0.5 - K.cx) / K.fx, (v + 0.5 - K.cy) / K.fy, 1.0);
                if (ray_segment_distance(dir, c.a, c.b) <= c.radius)
                    out.mask.set(u, v, true);
            }
    }
    return out;
}

double mask_iou(const BinaryMask &a, const BinaryMask &b) {
    if (a.width != b.width || a.height != b.height)
        throw Error(ErrorCode::invalid_argument, "mask dimensions differ");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t p = 0; p < a.pixels.size(); ++p) {
        const bool x = a.pixels[p] != 0;
        const bool y = b.pixels[p] != 0;
        inter += (x && y);
        uni += (x || y);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void write_pgm(const BinaryMask &mask, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::io, "cannot write mask '" + path + "'");
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<char> row(mask.width);
    for (int v = 0; v < mask.height; ++v) {
        for (int u = 0; u < mask.width; ++u)
            row[u] = mask.at(u, v) ? static_cast<char>(255) : 0;
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    if (!out)
        throw Error(ErrorCode::io, "failed writing mask '" + path + "'");
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream &in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty())
                break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

}  // namespace

BinaryMask read_pgm(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open mask '" + path + "'");
    if (pgm_token(in) != "P5")
        throw Error(ErrorCode::parse, "'" + path + "' is not a binary PGM (P5)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(pgm_token(in));
        h = std::stoi(pgm_token(in));
        maxval = std::stoi(pgm_token(in));
    } catch (const std::exception &) {
        throw Error(ErrorCode::parse, "malformed PGM header in '" + path + "'");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw Error(ErrorCode::parse, "unsupported PGM header in '" + path + "'");
    BinaryMask mask(w, h);
    std::vector<char> data(static_cast<std::size_t>(w) * h);
    if (!in.read(data.data(), static_cast<std::streamsize>(data.size())))
        throw Error(ErrorCode::parse, "truncated PGM '" + path + "'");
    for (std::size_t p = 0; p < data.size(); ++p)
        mask.pixels[p] = data[p] != 0 ? 1 : 0;
    return mask;
}

}  // namespace holopose
