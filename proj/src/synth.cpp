#include "holopose/synth.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace holopose {

using ojson = nlohmann::ordered_json;

bool SceneRecord::operator==(const SceneRecord &o) const {
    auto same_pts = [](const KeypointSet &a, const KeypointSet &b) {
        return a.frame == b.frame && a.points == b.points;
    };
    return scene_id == o.scene_id && robot == o.robot && seed == o.seed && q.values == o.q.values &&
           rotation == o.rotation && rotation_6d.a1 == o.rotation_6d.a1 && rotation_6d.a2 == o.rotation_6d.a2 &&
           translation == o.translation && depth == o.depth && camera.fx == o.camera.fx &&
           camera.fy == o.camera.fy && camera.cx == o.camera.cx && camera.cy == o.camera.cy &&
           camera.width == o.camera.width && camera.height == o.camera.height &&
           same_pts(keypoints_fk, o.keypoints_fk) && same_pts(keypoints_lifted, o.keypoints_lifted) &&
           same_pts(keypoints_root_relative, o.keypoints_root_relative) && keypoints_2d == o.keypoints_2d &&
           in_frame == o.in_frame && inframe_count == o.inframe_count && observed_2d == o.observed_2d &&
           observed_root_relative == o.observed_root_relative && mask_file == o.mask_file;
}

void GenConfig::validate() const {
    auto range = [](double lo, double hi, const char *what) {
        if (!(lo <= hi))
            throw Error(ErrorCode::validation, std::string("generator range ") + what + " is empty");
    };
    if (scenes < 0)
        throw Error(ErrorCode::validation, "scene count must be non-negative");
    range(distance_min, distance_max, "distance");
    range(elevation_min, elevation_max, "elevation");
    range(azimuth_min, azimuth_max, "azimuth");
    range(roll_min, roll_max, "roll");
    if (!(distance_min > 0.0))
        throw Error(ErrorCode::validation, "camera distance must be positive");
    if (!(elevation_min > -89.0 && elevation_max < 89.0))
        throw Error(ErrorCode::validation, "camera elevation must stay within (-89, 89) degrees");
    if (!(noise_px >= 0.0) || !(noise_mm >= 0.0) || !(target_jitter >= 0.0))
        throw Error(ErrorCode::validation, "noise levels and jitter must be non-negative");
    if (!(truncation_prob >= 0.0 && truncation_prob <= 1.0) || !(mask_corruption >= 0.0 && mask_corruption <= 1.0))
        throw Error(ErrorCode::validation, "probabilities must lie in [0, 1]");
    if (!(focal > 0.0) || width <= 0 || height <= 0)
        throw Error(ErrorCode::validation, "camera parameters must be positive");
    if (min_inframe < 1 || max_retries < 1)
        throw Error(ErrorCode::validation, "min_inframe and max_retries must be positive");
}

SceneRecord make_record(const RobotModel &model, long scene_id, const JointState &q, const RigidPose &pose,
                        const CameraIntrinsics &camera) {
    SceneRecord r;
    r.scene_id = scene_id;
    r.robot = model.name;
    r.q = q;
    r.rotation = pose.rotation;
    r.rotation_6d = matrix_to_r6(pose.rotation, 1e-9);
    r.translation = pose.translation;
    r.depth = pose.translation.z();
    r.camera = camera;
    r.keypoints_fk = forward_kinematics(model, q, pose);
    r.keypoints_lifted = r.keypoints_fk;
    r.keypoints_lifted.frame = KeypointFrame::lifted_absolute;
    r.keypoints_root_relative = to_root_relative(r.keypoints_lifted, r.depth);
    const auto proj = project(r.keypoints_fk, camera);
    r.keypoints_2d = proj.points;
    r.in_frame = proj.in_frame;
    r.inframe_count = proj.inframe_count();
    r.observed_2d = r.keypoints_2d;
    r.observed_root_relative = r.keypoints_root_relative.points;
    return r;
}

namespace {

JointState sample_joints(const RobotModel &model, Rng &rng) {
    JointState q{std::vector<double>(model.dof, 0.0)};
    const auto limits = model.state_limits();
    for (int j = 0; j < model.dof; ++j)
        q.values[j] = limits[j].bounded() ? rng.uniform(limits[j].lower, limits[j].upper) : 0.0;
    return q;
}

// Camera looking at the jittered root keypoint; returns the keypoint-anchored
// pose. Every draw comes from `rng` so retries stay deterministic.
RigidPose sample_camera(const std::vector<Vec3> &X, int root, const GenConfig &cfg, Rng &rng) {
    const double dist = rng.uniform(cfg.distance_min, cfg.distance_max);
    const double el = rng.uniform(cfg.elevation_min, cfg.elevation_max) * kDegToRad;
    const double az = rng.uniform(cfg.azimuth_min, cfg.azimuth_max) * kDegToRad;
    const double roll = rng.uniform(cfg.roll_min, cfg.roll_max) * kDegToRad;
    Vec3 jitter;
    for (int a = 0; a < 3; ++a)
        jitter[a] = rng.uniform(-cfg.target_jitter, cfg.target_jitter);

    const Vec3 target = X[root] + jitter;
    const Vec3 position = target + dist * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    const Vec3 z = (target - position).normalized();
    const Vec3 x = z.cross(Vec3::UnitZ()).normalized();
    const Vec3 y = z.cross(x);
    Mat3 R;
    R.row(0) = x.transpose();
    R.row(1) = y.transpose();
    R.row(2) = z.transpose();
    R = axis_angle(Vec3::UnitZ(), roll) * R;
    // Re-orthonormalize so the stored rotation passes strict checks.
    R = r6_to_matrix({R.col(0), R.col(1)});
    return {R, R * (X[root] - position)};
}

bool all_in_front(const std::vector<Vec3> &X, int root, const RigidPose &pose) {
    for (const auto &x : X)
        if (!((pose.rotation * (x - X[root]) + pose.translation).z() > 1.0))
            return false;
    return true;
}

CameraIntrinsics base_camera(const GenConfig &cfg) {
    return CameraIntrinsics::centered(cfg.focal, cfg.focal, cfg.width, cfg.height);
}

struct Placement {
    RigidPose pose;
    CameraIntrinsics camera;
};

Placement place_camera(const RobotModel &model, const std::vector<Vec3> &X, const GenConfig &cfg, Rng &rng,
                       bool truncate) {
    const CameraIntrinsics K0 = base_camera(cfg);
    const int N = model.num_keypoints();
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        const RigidPose pose = sample_camera(X, model.root_keypoint, cfg, rng);
        if (!all_in_front(X, model.root_keypoint, pose))
            continue;
        std::vector<Vec3> P;
        for (const auto &x : X)
            P.push_back(pose.rotation * (x - X[model.root_keypoint]) + pose.translation);
        if (!truncate) {
            if (project(P, K0).inframe_count() == N)
                return {pose, K0};
            continue;
        }
        // Truncation shifts the principal point, equivalent to cropping the image.
        for (int shift = 0; shift < cfg.max_retries; ++shift) {
            CameraIntrinsics K = K0;
            K.cx += rng.uniform(-0.9, 0.9) * cfg.width;
            K.cy += rng.uniform(-0.9, 0.9) * cfg.height;
            const int count = project(P, K).inframe_count();
            if (count < N && count >= std::min(cfg.min_inframe, N))
                return {pose, K};
        }
    }
    throw Error(ErrorCode::numeric, "no camera placement satisfied the scene constraints after " +
                                        std::to_string(cfg.max_retries) + " retries");
}

}  // namespace

SceneRecord add_observation_noise(const SceneRecord &record, double sigma_px, double sigma_mm, Rng &rng) {
    if (sigma_px < 0.0 || sigma_mm < 0.0)
        throw Error(ErrorCode::invalid_argument, "noise sigma must be non-negative");
    SceneRecord out = record;
    if (sigma_px > 0.0)
        for (auto &p : out.observed_2d)
            for (int a = 0; a < 2; ++a)
                p[a] += rng.normal(0.0, sigma_px);
    if (sigma_mm > 0.0)
        for (auto &p : out.observed_root_relative)
            for (int a = 0; a < 3; ++a)
                p[a] += rng.normal(0.0, sigma_mm);
    return out;
}

SceneRecord sample_scene(const RobotModel &model, const GenConfig &config, long index) {
    config.validate();
    Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(index));
    const JointState q = sample_joints(model, rng);
    const auto X = keypoints_in_base(model, q);
    const bool truncate = config.truncation_prob > 0.0 && rng.uniform() < config.truncation_prob;
    const Placement placement = place_camera(model, X, config, rng, truncate);
    SceneRecord record = make_record(model, index, q, placement.pose, placement.camera);
    record.seed = config.seed;
    return add_observation_noise(record, config.noise_px, config.noise_mm, rng);
}

TwoViewScene sample_two_view(const RobotModel &model, const GenConfig &config, long index) {
    config.validate();
    Rng rng = Rng::stream(config.seed ^ 0x5457'4F56'4945'5753ULL, static_cast<std::uint64_t>(index));
    const JointState q = sample_joints(model, rng);
    const auto X = keypoints_in_base(model, q);
    const Placement a = place_camera(model, X, config, rng, false);
    const Placement b = place_camera(model, X, config, rng, false);
    TwoViewScene scene;
    scene.view_a = make_record(model, index, q, a.pose, a.camera);
    scene.view_b = make_record(model, index, q, b.pose, b.camera);
    scene.view_a.seed = scene.view_b.seed = config.seed;
    scene.view_a = add_observation_noise(scene.view_a, config.noise_px, config.noise_mm, rng);
    scene.view_b = add_observation_noise(scene.view_b, config.noise_px, config.noise_mm, rng);
    // p_b = R_b R_a^T (p_a - t_a) + t_b
    const Mat3 R_ab = b.pose.rotation * a.pose.rotation.transpose();
    scene.a_to_b = {R_ab, b.pose.translation - R_ab * a.pose.translation};
    return scene;
}

BinaryMask segmentation_mask(const RobotModel &model, const SceneRecord &record, double corruption,
                             std::uint64_t seed) {
    BinaryMask mask =
        rasterize_silhouette(pose_capsules(model, record.q, {record.rotation, record.translation}), record.camera)
            .mask;
    if (corruption > 0.0) {
        Rng rng = Rng::stream(seed ^ 0x4D41'534B'0000'0000ULL, static_cast<std::uint64_t>(record.scene_id));
        for (auto &p : mask.pixels)
            if (rng.uniform() < corruption)
                p = p ? 0 : 1;
    }
    return mask;
}

void validate_record(const SceneRecord &r, const RobotModel *model, double tol) {
    auto fail = [&](const std::string &what) {
        throw Error(ErrorCode::validation, "frame inconsistency in scene " + std::to_string(r.scene_id) + ": " + what);
    };
    const std::size_t N = r.keypoints_fk.size();
    if (r.keypoints_lifted.size() != N || r.keypoints_root_relative.size() != N || r.keypoints_2d.size() != N ||
        r.in_frame.size() != N || r.observed_2d.size() != N || r.observed_root_relative.size() != N)
        fail("keypoint arrays differ in length");
    if (!is_rotation(r.rotation, tol))
        fail("rotation matrix is not orthonormal");
    if ((r6_to_matrix(r.rotation_6d) - r.rotation).cwiseAbs().maxCoeff() > tol)
        fail("6D rotation disagrees with rotation matrix");
    if (std::abs(r.depth - r.translation.z()) > tol)
        fail("root depth differs from translation z");
    for (std::size_t i = 0; i < N; ++i) {
        const Vec3 lifted = r.keypoints_root_relative.points[i] + Vec3(0.0, 0.0, r.depth);
        if ((lifted - r.keypoints_lifted.points[i]).cwiseAbs().maxCoeff() > tol)
            fail("lifted keypoint " + std::to_string(i) + " differs from root-relative keypoint plus depth");
        if ((r.keypoints_lifted.points[i] - r.keypoints_fk.points[i]).cwiseAbs().maxCoeff() > tol)
            fail("lifted keypoint " + std::to_string(i) + " differs from forward-kinematics keypoint");
    }
    if (model) {
        if (static_cast<int>(N) != model->num_keypoints())
            fail("keypoint count does not match the robot model");
        if ((r.keypoints_lifted.points[model->root_keypoint] - r.translation).cwiseAbs().maxCoeff() > tol)
            fail("translation differs from the lifted root keypoint");
        const auto P = forward_kinematics(*model, r.q, {r.rotation, r.translation});
        for (std::size_t i = 0; i < N; ++i)
            if ((P.points[i] - r.keypoints_fk.points[i]).cwiseAbs().maxCoeff() > tol)
                fail("keypoint " + std::to_string(i) + " differs from forward kinematics of the stored state");
    }
    const auto proj = project(r.keypoints_fk, r.camera);
    for (std::size_t i = 0; i < N; ++i) {
        if ((proj.points[i] - r.keypoints_2d[i]).cwiseAbs().maxCoeff() > tol)
            fail("2D keypoint " + std::to_string(i) + " differs from projection");
        if (proj.in_frame[i] != r.in_frame[i])
            fail("in-frame flag " + std::to_string(i) + " differs from projection");
    }
    if (proj.inframe_count() != r.inframe_count)
        fail("in-frame count differs from the stored flags");
}

namespace {

ojson vec_json(const Eigen::Ref<const VecX> &v) {
    ojson a = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

template <typename V>
ojson points_json(const std::vector<V> &pts) {
    ojson a = ojson::array();
    for (const auto &p : pts)
        a.push_back(vec_json(p));
    return a;
}

template <int D>
Eigen::Matrix<double, D, 1> vec_from(const ojson &j) {
    if (!j.is_array() || j.size() != D)
        throw Error(ErrorCode::parse, "expected an array of " + std::to_string(D) + " numbers");
    Eigen::Matrix<double, D, 1> v;
    for (int i = 0; i < D; ++i)
        v[i] = j.at(i).get<double>();
    return v;
}

template <int D>
std::vector<Eigen::Matrix<double, D, 1>> points_from(const ojson &j) {
    std::vector<Eigen::Matrix<double, D, 1>> out;
    for (const auto &p : j)
        out.push_back(vec_from<D>(p));
    return out;
}

}  // namespace

std::string record_to_json_line(const SceneRecord &r) {
    ojson j;
    j["schema_version"] = kDatasetSchemaVersion;
    j["scene_id"] = r.scene_id;
    j["robot"] = r.robot;
    j["seed"] = r.seed;
    j["q"] = r.q.values;
    ojson rows = ojson::array();
    for (int i = 0; i < 3; ++i)
        rows.push_back(vec_json(r.rotation.row(i).transpose()));
    j["rotation"] = rows;
    j["rotation_6d"] = vec_json(r.rotation_6d.vector());
    j["translation"] = vec_json(r.translation);
    j["depth"] = r.depth;
    j["camera"] = {{"fx", r.camera.fx}, {"fy", r.camera.fy},         {"cx", r.camera.cx},
                   {"cy", r.camera.cy}, {"width", r.camera.width}, {"height", r.camera.height}};
    j["keypoints_fk"] = points_json(r.keypoints_fk.points);
    j["keypoints_lifted"] = points_json(r.keypoints_lifted.points);
    j["keypoints_root_relative"] = points_json(r.keypoints_root_relative.points);
    j["keypoints_2d"] = points_json(r.keypoints_2d);
    std::vector<int> flags(r.in_frame.begin(), r.in_frame.end());
    j["in_frame"] = flags;
    j["inframe_count"] = r.inframe_count;
    j["observed_2d"] = points_json(r.observed_2d);
    j["observed_root_relative"] = points_json(r.observed_root_relative);
    if (r.mask_file)
        j["mask_file"] = *r.mask_file;
    return j.dump();
}

SceneRecord record_from_json_line(const std::string &line) {
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const ojson::parse_error &e) {
        throw Error(ErrorCode::parse, std::string("malformed record: ") + e.what());
    }
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kDatasetSchemaVersion)
            throw Error(ErrorCode::validation, "unsupported schema_version " + std::to_string(version));
        SceneRecord r;
        r.scene_id = j.at("scene_id").get<long>();
        r.robot = j.at("robot").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.q.values = j.at("q").get<std::vector<double>>();
        const auto &rows = j.at("rotation");
        if (!rows.is_array() || rows.size() != 3)
            throw Error(ErrorCode::parse, "rotation must have 3 rows");
        for (int i = 0; i < 3; ++i)
            r.rotation.row(i) = vec_from<3>(rows.at(i)).transpose();
        r.rotation_6d = Rotation6D::from_vector(vec_from<6>(j.at("rotation_6d")));
        r.translation = vec_from<3>(j.at("translation"));
        r.depth = j.at("depth").get<double>();
        const auto &cam = j.at("camera");
        r.camera = {cam.at("fx").get<double>(), cam.at("fy").get<double>(), cam.at("cx").get<double>(),
                    cam.at("cy").get<double>(), cam.at("width").get<int>(), cam.at("height").get<int>()};
        r.camera.validate();
        r.keypoints_fk = {points_from<3>(j.at("keypoints_fk")), KeypointFrame::fk_absolute};
        r.keypoints_lifted = {points_from<3>(j.at("keypoints_lifted")), KeypointFrame::lifted_absolute};
        r.keypoints_root_relative = {points_from<3>(j.at("keypoints_root_relative")), KeypointFrame::root_relative};
        r.keypoints_2d = points_from<2>(j.at("keypoints_2d"));
        for (int f : j.at("in_frame").get<std::vector<int>>())
            r.in_frame.push_back(f != 0);
        r.inframe_count = j.at("inframe_count").get<int>();
        r.observed_2d = points_from<2>(j.at("observed_2d"));
        r.observed_root_relative = points_from<3>(j.at("observed_root_relative"));
        if (j.contains("mask_file"))
            r.mask_file = j.at("mask_file").get<std::string>();
        return r;
    } catch (const ojson::exception &e) {
        throw Error(ErrorCode::parse, std::string("malformed record: ") + e.what());
    }
}

void write_file_atomic(const std::string &path, const std::string &contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::io, "cannot write '" + tmp + "'");
        out << contents;
        out.flush();
        if (!out)
            throw Error(ErrorCode::io, "failed writing '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw Error(ErrorCode::io, "cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

void write_dataset(const std::vector<SceneRecord> &records, const std::string &path) {
    std::string contents;
    for (const auto &r : records) {
        contents += record_to_json_line(r);
        contents += '\n';
    }
    write_file_atomic(path, contents);
}

std::vector<SceneRecord> read_dataset(const std::string &path, const RobotModel *model) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open dataset '" + path + "'");
    std::vector<SceneRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        try {
            SceneRecord r = record_from_json_line(line);
            if (model && r.robot != model->name)
                throw Error(ErrorCode::validation, "record robot '" + r.robot + "' does not match model '" +
                                                       model->name + "'");
            validate_record(r, model);
            records.push_back(std::move(r));
        } catch (const Error &e) {
            throw Error(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace holopose
