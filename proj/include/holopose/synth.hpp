#pragma once

#include "holopose/camera.hpp"
#include "holopose/kinematics.hpp"
#include "holopose/render.hpp"
#include "holopose/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace holopose {

inline constexpr int kDatasetSchemaVersion = 1;

/// One synthetic observation with ground truth in all three keypoint frames.
struct SceneRecord {
    long scene_id = 0;
    std::string robot;
    std::uint64_t seed = 0;

    JointState q;  // degrees / mm
    Mat3 rotation = Mat3::Identity();
    Rotation6D rotation_6d;
    Vec3 translation = Vec3::Zero();  // camera-frame root keypoint, mm
    double depth = 0.0;               // root depth, equals translation.z()
    CameraIntrinsics camera;

    KeypointSet keypoints_fk;             // P
    KeypointSet keypoints_lifted;         // P'
    KeypointSet keypoints_root_relative;  // P^r
    std::vector<Vec2> keypoints_2d;       // project(P)
    std::vector<bool> in_frame;
    int inframe_count = 0;

    // Observations handed to the estimator; equal to ground truth before noise.
    std::vector<Vec2> observed_2d;
    std::vector<Vec3> observed_root_relative;

    std::optional<std::string> mask_file;

    bool operator==(const SceneRecord &other) const;
};

struct GenConfig {
    std::uint64_t seed = 0;
    int scenes = 100;
    double distance_min = 1500.0;  // camera to look-at point, mm
    double distance_max = 2500.0;
    double elevation_min = -10.0;  // degrees above the base x-y plane
    double elevation_max = 50.0;
    double azimuth_min = -180.0;
    double azimuth_max = 180.0;
    double roll_min = -15.0;
    double roll_max = 15.0;
    double target_jitter = 100.0;  // look-at offset from the root keypoint, mm
    double focal = 500.0;          // fx = fy, px
    int width = 640;
    int height = 480;
    double noise_px = 0.0;
    double noise_mm = 0.0;
    double truncation_prob = 0.0;
    int min_inframe = 4;       // truncated scenes keep at least this many keypoints
    double mask_corruption = 0.0;
    int max_retries = 200;

    void validate() const;
};

/// Assembles a consistent record from ground truth: FK keypoints, lifted and
/// root-relative frames, projections and in-frame flags. Observations are set
/// to the exact values.
SceneRecord make_record(const RobotModel &model, long scene_id, const JointState &q, const RigidPose &pose,
                        const CameraIntrinsics &camera);

/// Deterministic in (config.seed, index).
SceneRecord sample_scene(const RobotModel &model, const GenConfig &config, long index);

/// Gaussian perturbation of the observed 2D (px) and root-relative 3D (mm)
/// keypoints; ground-truth fields are untouched.
SceneRecord add_observation_noise(const SceneRecord &record, double sigma_px, double sigma_mm, Rng &rng);

/// Two cameras observing the same robot state. `a_to_b` maps camera-a
/// coordinates into camera b.
struct TwoViewScene {
    SceneRecord view_a;
    SceneRecord view_b;
    RigidPose a_to_b;
};

TwoViewScene sample_two_view(const RobotModel &model, const GenConfig &config, long index);

/// Ground-truth silhouette with each pixel flipped with probability
/// `corruption`, standing in for a segmentation model's output.
BinaryMask segmentation_mask(const RobotModel &model, const SceneRecord &record, double corruption,
                             std::uint64_t seed);

/// Cross-checks the stored frames: lifting, root translation, rotation 6D vs
/// matrix, projections, in-frame counts and (with a model) forward kinematics.
/// Throws ErrorCode::validation with "frame inconsistency" on failure.
void validate_record(const SceneRecord &record, const RobotModel *model = nullptr, double tolerance = 1e-6);

/// Newline-delimited JSON, one scene per line, written atomically.
void write_dataset(const std::vector<SceneRecord> &records, const std::string &path);
std::vector<SceneRecord> read_dataset(const std::string &path, const RobotModel *model = nullptr);

std::string record_to_json_line(const SceneRecord &record);
SceneRecord record_from_json_line(const std::string &line);

/// Writes `contents` to `path` through a temporary file and rename.
void write_file_atomic(const std::string &path, const std::string &contents);

}  // namespace holopose
