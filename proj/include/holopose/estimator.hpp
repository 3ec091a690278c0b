#pragma once

#include "holopose/camera.hpp"
#include "holopose/kinematics.hpp"
#include "holopose/metrics.hpp"
#include "holopose/synth.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace holopose {

struct ResidualWeights {
    double px = 1.0;           // 2D reprojection residuals
    double mm = 1.0;           // root-relative 3D residuals
    double consistency = 1.0;  // FK keypoints vs lifted observations
};

/// Observations of one scene. Optional blocks switch their residuals on.
struct FitProblem {
    RobotModel model;
    CameraIntrinsics camera;
    std::vector<Vec2> observed_2d;
    std::vector<bool> visible;  // per keypoint, gates the 2D residual
    std::optional<std::vector<Vec3>> observed_root_relative;
    std::vector<bool> visible_3d;  // empty: same as `visible`
    std::optional<double> observed_depth;  // enables the consistency residual
    std::optional<JointState> known_q;
    ResidualWeights weights;
    long scene_id = 0;

    int visible_count() const;
    void validate() const;
};

struct FitConfig {
    int max_iterations = 200;
    double damping_init = 1e-3;
    double damping_up = 10.0;
    double damping_down = 0.1;
    double step_tolerance = 1e-8;
    double relative_decrease_tolerance = 1e-10;
    int starts = 8;
    std::uint64_t seed = 0;
    double bbox_padding = 20.0;  // px, for the depth seed
    bool sample_joint_starts = false;  // starts after the first draw q within limits
    int kinematic_starts = 4;          // extra starts from the keypoint-geometry search

    void validate() const;
};

enum class FitStatus { converged, max_iterations, diverged };

const char *to_string(FitStatus status);
FitStatus fit_status_from_string(const std::string &text);

struct StartDiagnostics {
    int start = 0;
    double residual_norm = 0.0;
    int iterations = 0;
    FitStatus status = FitStatus::diverged;
    std::vector<double> trace;  // residual norm at the start and after each accepted step; not serialized
};

struct FitResult {
    long scene_id = 0;
    std::string robot;
    JointState q;
    Rotation6D rotation_6d;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double depth = 0.0;  // translation.z()
    double residual_norm = 0.0;
    int iterations = 0;
    FitStatus status = FitStatus::diverged;
    int best_start = 0;
    bool known_joints = false;
    bool underconstrained = false;
    std::vector<StartDiagnostics> starts;
    std::vector<std::string> warnings;

    RigidPose pose() const { return {rotation, translation}; }
};

struct StartPoint {
    JointState q;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
};

/// Rotations for the multi-start: the 24 rotational symmetries of the cube in
/// farthest-point order from the identity, then seeded random rotations.
Mat3 start_rotation(int start_index, std::uint64_t seed);

/// q0 = limit midpoints for start 0 (or the known state), seeded draws within
/// the limits for later starts; t0 from the coarse depth of the
/// visible keypoints' bounding box and the back-projected 2D centroid.
StartPoint initialize(const FitProblem &problem, int start_index, const FitConfig &config = {});

/// Starts from the root-relative 3D observations: joints are gridded in tree
/// order with a beam search scored by rigid alignment of the keypoints placed
/// so far; the pose comes from aligning all of them. Empty without 3D
/// observations or with a known joint state.
std::vector<StartPoint> kinematic_starts(const FitProblem &problem, int count, const FitConfig &config = {});

/// Weighted stacked residual norm at a given state.
double residual_norm(const FitProblem &problem, const JointState &q, const RigidPose &pose);

/// Levenberg-Marquardt over (q, 6D rotation, t) from every start; the lowest
/// residual wins, ties going to the lowest start index.
FitResult fit(const FitProblem &problem, const FitConfig &config = {});

/// Optimizes (R, t) only; q echoes problem.known_q.
FitResult fit_known_joints(const FitProblem &problem, const FitConfig &config = {});

/// Averages joint states and the pose-aligned translations of two views; the
/// rotation stays that of view b. Output is expressed in camera b.
FitResult fuse_two_view(const FitResult &a, const FitResult &b, const RigidPose &a_to_b);

struct ProblemOptions {
    bool use_root_relative = true;
    bool use_consistency = false;  // needs an observed depth
    std::optional<double> observed_depth;
    bool known_joints = false;
    ResidualWeights weights;
};

/// Builds a problem from a record's observations (never its ground truth,
/// except q in known-joint mode).
FitProblem problem_from_record(const RobotModel &model, const SceneRecord &record, const ProblemOptions &options = {});

/// Scores a fit against a record's ground truth.
EvalRecord evaluate_fit(const RobotModel &model, const SceneRecord &record, const FitResult &result);

std::string result_to_json_line(const FitResult &result);
FitResult result_from_json_line(const std::string &line);
void write_results(const std::vector<FitResult> &results, const std::string &path);
std::vector<FitResult> read_results(const std::string &path);

}  // namespace holopose
