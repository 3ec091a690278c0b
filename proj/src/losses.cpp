#include "holopose/losses.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace holopose {

void LossWeights::validate() const {
    if (!(kpts >= 0.0) || !(mc >= 0.0))
        throw Error(ErrorCode::validation, "loss weights must be non-negative");
}

namespace {

void require_same_count(const KeypointSet &a, const KeypointSet &b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::invalid_argument, "keypoint count mismatch: " + std::to_string(a.size()) + " vs " +
                                                     std::to_string(b.size()));
}

double flat_l2_3d(const KeypointSet &a, const KeypointSet &b) {
    require_same_count(a, b);
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        sq += (a.points[i] - b.points[i]).squaredNorm();
    return std::sqrt(sq);
}

double flat_l2_2d(const Projection &a, const Projection &b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.points.size(); ++i)
        sq += (a.points[i] - b.points[i]).squaredNorm();
    return std::sqrt(sq);
}

// Gradient of |r| given dr/dtheta; zero at the kink.
VecX norm_gradient(const VecX &r, const MatX &J) {
    const double n = r.norm();
    if (n == 0.0)
        return VecX::Zero(J.cols());
    return J.transpose() * r / n;
}

}  // namespace

double depth_loss(double d, double d_hat) { return std::abs(d - d_hat); }

double joint_loss(const JointState &q, const JointState &q_hat) {
    if (q.size() != q_hat.size())
        throw Error(ErrorCode::invalid_argument, "joint state length mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        sq += (q.values[i] - q_hat.values[i]) * (q.values[i] - q_hat.values[i]);
    return std::sqrt(sq);
}

double rot_loss(const Mat3 &R, const Mat3 &R_hat) {
    if (!is_rotation(R, 1e-6) || !is_rotation(R_hat, 1e-6))
        throw Error(ErrorCode::invalid_argument, "rotation loss needs rotation matrices");
    return (R - R_hat).norm();
}

double trans_loss(const Vec3 &t, const Vec3 &t_hat) { return (t - t_hat).norm(); }

double kpts_loss(const KeypointSet &P, const KeypointSet &P_hat, const CameraIntrinsics &K) {
    require_same_count(P, P_hat);
    return flat_l2_3d(P, P_hat) + flat_l2_2d(project(P, K), project(P_hat, K));
}

double kpts_loss_prime(const KeypointSet &P_lifted, const KeypointSet &P_lifted_hat, const CameraIntrinsics &K) {
    return kpts_loss(P_lifted, P_lifted_hat, K);
}

double gt_total(double joint, double rot, double trans, double kpts, double kpts_prime, const LossWeights &w) {
    return joint + rot + trans + w.kpts * (kpts + kpts_prime);
}

double keypoint_consistency(const KeypointSet &P_fk, const KeypointSet &P_lifted) {
    return flat_l2_3d(P_fk, P_lifted);
}

MaskConsistency mask_consistency(const BinaryMask &render, const BinaryMask &seg) {
    if (render.width != seg.width || render.height != seg.height)
        throw Error(ErrorCode::invalid_argument, "mask dimensions differ");
    if (render.count() == 0 && seg.count() == 0)
        return {0.0, true};
    return {1.0 - mask_iou(render, seg), false};
}

double self_total(double kc, double mc, const LossWeights &w) { return kc + w.mc * mc; }

std::vector<std::pair<std::string, double>> LossReport::entries() const {
    return {{"depth", depth},       {"joint", joint},           {"rot", rot},
            {"trans", trans},       {"kpts", kpts},             {"kpts_prime", kpts_prime},
            {"kc", kc},             {"mc", mc},                 {"lambda_kpts", weights.kpts},
            {"lambda_mc", weights.mc}, {"gt_total", gt_total}, {"self_total", self_total}};
}

std::string LossReport::to_text() const {
    std::ostringstream out;
    for (const auto &[key, value] : entries()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6g", value);
        out << key << " = " << buf << "\n";
    }
    return out.str();
}

const char *to_string(LossTerm term) {
    switch (term) {
    case LossTerm::depth: return "depth";
    case LossTerm::joint: return "joint";
    case LossTerm::rot: return "rot";
    case LossTerm::trans: return "trans";
    case LossTerm::kpts: return "kpts";
    case LossTerm::kpts_prime: return "kpts_prime";
    case LossTerm::kc: return "kc";
    case LossTerm::gt_total: return "gt_total";
    }
    return "unknown";
}

namespace {

struct Predictions {
    KeypointSet P_hat;
    KeypointSet P_lifted_hat;
    Mat3 R_hat;
};

Predictions predict(const RobotModel &model, const LossTarget &target, const LossParams &params) {
    Predictions p;
    p.R_hat = r6_to_matrix(params.rotation);
    p.P_hat = forward_kinematics(model, params.q, {p.R_hat, params.translation});
    p.P_lifted_hat =
        lift_keypoints(target.P_root_relative_hat, params.depth, model.root_keypoint).lifted;
    return p;
}

}  // namespace

LossReport evaluate_losses(const RobotModel &model, const LossTarget &target, const LossParams &params,
                           double mask_term) {
    target.weights.validate();
    const auto p = predict(model, target, params);
    LossReport r;
    r.weights = target.weights;
    r.depth = depth_loss(target.depth, params.depth);
    r.joint = joint_loss(target.q, params.q);
    r.rot = rot_loss(target.rotation, p.R_hat);
    r.trans = trans_loss(target.translation, params.translation);
    r.kpts = kpts_loss(target.P, p.P_hat, target.camera);
    r.kpts_prime = kpts_loss_prime(target.P_lifted, p.P_lifted_hat, target.camera);
    r.kc = keypoint_consistency(p.P_hat, p.P_lifted_hat);
    r.mc = mask_term;
    r.gt_total = holopose::gt_total(r.joint, r.rot, r.trans, r.kpts, r.kpts_prime, r.weights);
    r.self_total = holopose::self_total(r.kc, r.mc, r.weights);
    return r;
}

double evaluate_loss(const RobotModel &model, const LossTarget &target, const LossParams &params, LossTerm term) {
    const auto r = evaluate_losses(model, target, params);
    switch (term) {
    case LossTerm::depth: return r.depth;
    case LossTerm::joint: return r.joint;
    case LossTerm::rot: return r.rot;
    case LossTerm::trans: return r.trans;
    case LossTerm::kpts: return r.kpts;
    case LossTerm::kpts_prime: return r.kpts_prime;
    case LossTerm::kc: return r.kc;
    case LossTerm::gt_total: return r.gt_total;
    }
    return 0.0;
}

VecX loss_gradient(const RobotModel &model, const LossTarget &target, const LossParams &params, LossTerm term) {
    const int J = model.dof;
    const int N = model.num_keypoints();
    const int n = J + 10;
    const int rot0 = J;
    const int t0 = J + 6;
    const int d0 = J + 9;

    if (term == LossTerm::gt_total) {
        const double w = target.weights.kpts;
        return loss_gradient(model, target, params, LossTerm::joint) +
               loss_gradient(model, target, params, LossTerm::rot) +
               loss_gradient(model, target, params, LossTerm::trans) +
               w * (loss_gradient(model, target, params, LossTerm::kpts) +
                    loss_gradient(model, target, params, LossTerm::kpts_prime));
    }

    VecX g = VecX::Zero(n);
    switch (term) {
    case LossTerm::depth: {
        const double diff = params.depth - target.depth;
        g[d0] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        return g;
    }
    case LossTerm::joint: {
        if (params.q.size() != target.q.size())
            throw Error(ErrorCode::invalid_argument, "joint state length mismatch");
        VecX r(J);
        for (int i = 0; i < J; ++i)
            r[i] = params.q.values[i] - target.q.values[i];
        const double nr = r.norm();
        if (nr > 0.0)
            g.head(J) = r / nr;
        return g;
    }
    case LossTerm::rot: {
        const Mat3 diff = r6_to_matrix(params.rotation) - target.rotation;
        const Eigen::Map<const Eigen::Matrix<double, 9, 1>> r(diff.data());
        const double nr = r.norm();
        if (nr > 0.0)
            g.segment<6>(rot0) = r6_to_matrix_jacobian(params.rotation).transpose() * r / nr;
        return g;
    }
    case LossTerm::trans: {
        const Vec3 r = params.translation - target.translation;
        const double nr = r.norm();
        if (nr > 0.0)
            g.segment<3>(t0) = r / nr;
        return g;
    }
    default: break;
    }

    const auto p = predict(model, target, params);
    // d P_hat / d theta, with joint columns rescaled to public units.
    MatX dP = MatX::Zero(3 * N, n);
    dP.leftCols(J + 9) = fk_jacobian(model, params.q, {params.rotation, params.translation});
    const auto kinds = model.state_kinds();
    for (int j = 0; j < J; ++j)
        if (kinds[j] == JointKind::revolute)
            dP.col(j) *= kDegToRad;
    // d P'_hat / d theta: only d moves the lifted keypoints.
    MatX dPl = MatX::Zero(3 * N, n);
    for (int k = 0; k < N; ++k)
        dPl(3 * k + 2, d0) = 1.0;

    auto stacked = [&](const KeypointSet &a, const KeypointSet &b) {
        VecX r(3 * N);
        for (int k = 0; k < N; ++k)
            r.segment<3>(3 * k) = a.points[k] - b.points[k];
        return r;
    };
    auto projected = [&](const KeypointSet &pred, const KeypointSet &gt, const MatX &dpred) {
        VecX r(2 * N);
        MatX J2(2 * N, n);
        for (int k = 0; k < N; ++k) {
            r.segment<2>(2 * k) = project_point(pred.points[k], target.camera) - project_point(gt.points[k], target.camera);
            J2.middleRows(2 * k, 2) = projection_jacobian(pred.points[k], target.camera) * dpred.middleRows(3 * k, 3);
        }
        return std::make_pair(r, J2);
    };

    switch (term) {
    case LossTerm::kpts: {
        require_same_count(target.P, p.P_hat);
        const auto [r2, J2] = projected(p.P_hat, target.P, dP);
        return norm_gradient(stacked(p.P_hat, target.P), dP) + norm_gradient(r2, J2);
    }
    case LossTerm::kpts_prime: {
        require_same_count(target.P_lifted, p.P_lifted_hat);
        const auto [r2, J2] = projected(p.P_lifted_hat, target.P_lifted, dPl);
        return norm_gradient(stacked(p.P_lifted_hat, target.P_lifted), dPl) + norm_gradient(r2, J2);
    }
    case LossTerm::kc:
        return norm_gradient(stacked(p.P_hat, p.P_lifted_hat), dP - dPl);
    default: break;
    }
    return g;
}

}  // namespace holopose
