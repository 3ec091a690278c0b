#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>
#include <vector>

namespace holopose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

enum class ErrorCode {
    invalid_argument,  // precondition or dimension violation
    parse,             // malformed input document or record
    validation,        // well-formed input that breaks an invariant
    numeric,           // degenerate numeric configuration
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Camera-to-robot transform. Points attached to the robot map into the camera
// frame as R * (x - x_root) + t, so t is the camera-frame root keypoint.
struct RigidPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidPose identity() { return {}; }
    Vec3 apply(const Vec3 &p) const { return rotation * p + translation; }
    RigidPose compose(const RigidPose &inner) const {
        return {rotation * inner.rotation, rotation * inner.translation + translation};
    }
    RigidPose inverse() const {
        Mat3 rt = rotation.transpose();
        return {rt, -(rt * translation)};
    }
};

enum class KeypointFrame { root_relative, lifted_absolute, fk_absolute };

const char *to_string(KeypointFrame frame);

struct KeypointSet {
    std::vector<Vec3> points;
    KeypointFrame frame = KeypointFrame::fk_absolute;

    std::size_t size() const { return points.size(); }
};

}  // namespace holopose
