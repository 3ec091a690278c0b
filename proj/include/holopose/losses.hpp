#pragma once

#include "holopose/camera.hpp"
#include "holopose/kinematics.hpp"
#include "holopose/render.hpp"

#include <string>
#include <utility>
#include <vector>

namespace holopose {

struct LossWeights {
    double kpts = 10.0;  // lambda in the ground-truth total
    double mc = 1.0;     // lambda_mc in the self-supervised total

    void validate() const;
};

double depth_loss(double d, double d_hat);
double joint_loss(const JointState &q, const JointState &q_hat);
double rot_loss(const Mat3 &R, const Mat3 &R_hat);
double trans_loss(const Vec3 &t, const Vec3 &t_hat);

/// 3D L2 over the flattened 3N vector (mm) plus 2D L2 over the flattened 2N
/// projections (px).
double kpts_loss(const KeypointSet &P, const KeypointSet &P_hat, const CameraIntrinsics &K);
/// Same form on lifted keypoints P' and their projections.
double kpts_loss_prime(const KeypointSet &P_lifted, const KeypointSet &P_lifted_hat, const CameraIntrinsics &K);

double gt_total(double joint, double rot, double trans, double kpts, double kpts_prime, const LossWeights &w);

/// L2 over the flattened difference of FK and lifted keypoints.
double keypoint_consistency(const KeypointSet &P_fk, const KeypointSet &P_lifted);

struct MaskConsistency {
    double loss = 0.0;
    bool both_empty = false;  // union is empty; loss reported as 0
};

/// 1 - IoU of the rendered and segmentation masks.
MaskConsistency mask_consistency(const BinaryMask &render, const BinaryMask &seg);

double self_total(double kc, double mc, const LossWeights &w);

/// Named loss components in fixed order plus both totals.
struct LossReport {
    double depth = 0.0;
    double joint = 0.0;
    double rot = 0.0;
    double trans = 0.0;
    double kpts = 0.0;
    double kpts_prime = 0.0;
    double kc = 0.0;
    double mc = 0.0;
    double gt_total = 0.0;
    double self_total = 0.0;
    LossWeights weights;

    std::vector<std::pair<std::string, double>> entries() const;
    /// One `key = value` line per entry.
    std::string to_text() const;
};

/// Ground truth and fixed predicted inputs against which the differentiable
/// parameters (q, 6D rotation, t, d) are scored.
struct LossTarget {
    JointState q;  // public units
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double depth = 0.0;
    KeypointSet P;                 // ground-truth fk_absolute keypoints
    KeypointSet P_lifted;          // ground-truth lifted keypoints
    KeypointSet P_root_relative_hat;  // predicted root-relative keypoints
    CameraIntrinsics camera;
    LossWeights weights;
};

/// Differentiable parameters. q is in public units (degrees / mm) as the joint
/// loss is defined on them.
struct LossParams {
    JointState q;
    Rotation6D rotation;
    Vec3 translation = Vec3::Zero();
    double depth = 0.0;
};

enum class LossTerm { depth, joint, rot, trans, kpts, kpts_prime, kc, gt_total };

const char *to_string(LossTerm term);

/// Evaluates every term; the mask term is supplied by the caller (0 when absent).
LossReport evaluate_losses(const RobotModel &model, const LossTarget &target, const LossParams &params,
                           double mask_term = 0.0);

double evaluate_loss(const RobotModel &model, LossTarget const &target, const LossParams &params, LossTerm term);

/// Gradient of a term with respect to [q (J, public units) | rotation (6) |
/// t (3) | d (1)]. Kinks (zero L2 residual, L1 equality) yield zero.
VecX loss_gradient(const RobotModel &model, const LossTarget &target, const LossParams &params, LossTerm term);

}  // namespace holopose
