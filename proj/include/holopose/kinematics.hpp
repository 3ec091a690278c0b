#pragma once

#include "holopose/rotation.hpp"
#include "holopose/types.hpp"

#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace holopose {

enum class JointKind { revolute, prismatic, fixed };

const char *to_string(JointKind kind);

/// Closed interval in public units (degrees for revolute, mm for prismatic).
struct JointLimits {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    bool bounded() const;
    double midpoint() const;  // 0 when unbounded
};

/// Capsule geometry attached to a link, in link coordinates (mm).
struct Capsule {
    Vec3 a = Vec3::Zero();
    Vec3 b = Vec3::Zero();
    double radius = 0.0;
};

struct Link {
    std::string name;
    int parent_joint = -1;  // index into RobotModel::joints, -1 for the base
    std::vector<Capsule> capsules;
};

struct JointSpec {
    std::string name;
    JointKind kind = JointKind::fixed;
    int parent = -1;  // link index
    int child = -1;   // link index
    Vec3 origin_xyz = Vec3::Zero();  // mm
    Vec3 origin_rpy = Vec3::Zero();  // radians, fixed-axis roll-pitch-yaw
    Vec3 axis = Vec3::UnitZ();
    JointLimits limits;
    int state_index = -1;  // position in the joint state vector, -1 when fixed
    int document_index = -1;  // position in the source document

    Eigen::Isometry3d origin() const;
};

struct KeypointSpec {
    std::string name;
    int link = -1;
    Vec3 offset = Vec3::Zero();  // mm in link frame
};

/// Kinematic tree parsed from a robot description. `joints` is stored
/// parent-before-child; joint state indices follow the document order of the
/// non-fixed joints.
struct RobotModel {
    std::string name;
    std::vector<Link> links;
    std::vector<JointSpec> joints;
    std::vector<KeypointSpec> keypoints;
    int base_link = 0;
    int root_keypoint = 0;
    int dof = 0;

    int num_keypoints() const { return static_cast<int>(keypoints.size()); }
    int link_index(std::string_view link_name) const;  // -1 when absent
    /// Joint kind for each state index.
    std::vector<JointKind> state_kinds() const;
    std::vector<JointLimits> state_limits() const;
    /// Returns the model with its keypoints reordered so that new keypoint k is
    /// old keypoint order[k]; the root keypoint follows its keypoint.
    RobotModel permuted_keypoints(const std::vector<int> &order) const;
};

/// Per-joint states in public units: degrees (revolute) or mm (prismatic).
struct JointState {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

/// Parse the URDF subset: <robot>, <link> (optional <capsule a b radius>),
/// <joint type=revolute|prismatic|fixed> with <parent>, <child>, <origin xyz rpy>,
/// <axis xyz>, <limit lower upper>, and <keypoint name link xyz>. Lengths are mm,
/// rpy radians, revolute limits degrees.
RobotModel parse_robot_description(std::string_view text);
RobotModel load_robot_description(const std::string &path);

/// Emits a document that parses back into an identical model.
std::string to_robot_description(const RobotModel &model);

/// Canonical one-line-per-item text dump for golden files.
std::string dump_model(const RobotModel &model);

/// Validates and finalizes a model assembled in code: topological joint order,
/// state indices, dof and root keypoint. Same checks as the parser.
RobotModel finalize_model(RobotModel model);

/// Index of the keypoint nearest the centroid of all keypoints in the
/// zero-state configuration, ties resolved to the lowest index.
int select_root_keypoint(const RobotModel &model);

JointState clamp_to_limits(const RobotModel &model, const JointState &q);

/// Internal units (radians / mm) <-> public units (degrees / mm).
VecX to_internal(const RobotModel &model, const JointState &q);
JointState to_public(const RobotModel &model, const Eigen::Ref<const VecX> &q_internal);

/// Link frames in the base frame for internal joint values.
std::vector<Eigen::Isometry3d> link_transforms(const RobotModel &model,
                                               const Eigen::Ref<const VecX> &q_internal);

/// Keypoints expressed in the robot base frame.
std::vector<Vec3> keypoints_in_base(const RobotModel &model, const JointState &q);

/// P = R * (X(q) - X_root(q)) + t.
KeypointSet forward_kinematics(const RobotModel &model, const JointState &q, const RigidPose &pose);

/// Camera-frame placement of the robot base, given the keypoint-anchored pose.
RigidPose base_to_camera(const RobotModel &model, const JointState &q, const RigidPose &pose);

/// Pose parameters used by the Jacobian and the fitter.
struct PoseParams {
    Rotation6D rotation;
    Vec3 translation = Vec3::Zero();

    RigidPose to_pose() const { return {r6_to_matrix(rotation), translation}; }
    static PoseParams from_pose(const RigidPose &pose);
};

/// Jacobian of the stacked keypoint coordinates (3N rows) with respect to
/// [joint states in internal units (J) | 6D rotation (6) | translation (3)].
MatX fk_jacobian(const RobotModel &model, const JointState &q, const PoseParams &pose);

/// Maximum distance from the root keypoint to any keypoint reachable under the
/// joint limits (a chain-length upper bound), mm.
double max_reach(const RobotModel &model);

}  // namespace holopose
