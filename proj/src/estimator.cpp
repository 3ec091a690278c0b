#include "holopose/estimator.hpp"

#include "json.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace holopose {

using ojson = nlohmann::ordered_json;

int FitProblem::visible_count() const {
    return static_cast<int>(std::count(visible.begin(), visible.end(), true));
}

void FitProblem::validate() const {
    const auto N = static_cast<std::size_t>(model.num_keypoints());
    camera.validate();
    if (observed_2d.size() != N || visible.size() != N)
        throw Error(ErrorCode::invalid_argument, "2D observations do not match the model's keypoint count");
    if (observed_root_relative && observed_root_relative->size() != N)
        throw Error(ErrorCode::invalid_argument, "3D observations do not match the model's keypoint count");
    if (!visible_3d.empty() && visible_3d.size() != N)
        throw Error(ErrorCode::invalid_argument, "3D visibility does not match the model's keypoint count");
    if (observed_depth && !observed_root_relative)
        throw Error(ErrorCode::invalid_argument, "consistency residual needs root-relative observations");
    if (!(weights.px >= 0.0) || !(weights.mm >= 0.0) || !(weights.consistency >= 0.0))
        throw Error(ErrorCode::validation, "residual weights must be non-negative");
    if (known_q && static_cast<int>(known_q->size()) != model.dof)
        throw Error(ErrorCode::invalid_argument, "known joint state has " + std::to_string(known_q->size()) +
                                                     " values, model has dof " + std::to_string(model.dof));
    if (!known_q && visible_count() < 4)
        throw Error(ErrorCode::validation, "unknown joint state needs at least 4 visible 2D keypoints, got " +
                                               std::to_string(visible_count()));
    if (visible_count() < 1)
        throw Error(ErrorCode::validation, "no visible keypoints");
}

void FitConfig::validate() const {
    if (max_iterations < 1 || starts < 1)
        throw Error(ErrorCode::validation, "max_iterations and starts must be positive");
    if (!(damping_init > 0.0) || !(damping_up > 1.0) || !(damping_down > 0.0 && damping_down < 1.0))
        throw Error(ErrorCode::validation, "damping factors must satisfy init > 0, up > 1, 0 < down < 1");
    if (!(step_tolerance > 0.0) || !(relative_decrease_tolerance > 0.0) || !(bbox_padding >= 0.0))
        throw Error(ErrorCode::validation, "tolerances must be positive");
}

const char *to_string(FitStatus status) {
    switch (status) {
    case FitStatus::converged: return "converged";
    case FitStatus::max_iterations: return "max_iterations";
    case FitStatus::diverged: return "diverged";
    }
    return "unknown";
}

FitStatus fit_status_from_string(const std::string &text) {
    if (text == "converged")
        return FitStatus::converged;
    if (text == "max_iterations")
        return FitStatus::max_iterations;
    if (text == "diverged")
        return FitStatus::diverged;
    throw Error(ErrorCode::parse, "unknown fit status '" + text + "'");
}

namespace {

std::vector<Mat3> cube_rotations() {
    std::vector<Mat3> all;
    std::array<int, 3> perm{0, 1, 2};
    do {
        for (int signs = 0; signs < 8; ++signs) {
            Mat3 R = Mat3::Zero();
            for (int r = 0; r < 3; ++r)
                R(r, perm[r]) = (signs >> r) & 1 ? -1.0 : 1.0;
            if (R.determinant() > 0.0)
                all.push_back(R);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    // Farthest-point ordering from the identity (first in the enumeration).
    std::vector<Mat3> ordered{all.front()};
    std::vector<bool> used(all.size(), false);
    used[0] = true;
    while (ordered.size() < all.size()) {
        int best = -1;
        double best_dist = -1.0;
        for (std::size_t i = 0; i < all.size(); ++i) {
            if (used[i])
                continue;
            double d = 360.0;
            for (const auto &R : ordered)
                d = std::min(d, geodesic_angle(R, all[i]));
            if (d > best_dist + 1e-9) {
                best_dist = d;
                best = static_cast<int>(i);
            }
        }
        used[best] = true;
        ordered.push_back(all[best]);
    }
    return ordered;
}

const std::vector<Mat3> &start_set() {
    static const std::vector<Mat3> set = cube_rotations();
    return set;
}

class Objective {
public:
    Objective(const FitProblem &problem, bool optimize_q, JointState fixed_q)
        : p_(problem), optimize_q_(optimize_q), fixed_q_(std::move(fixed_q)),
          J_(problem.model.dof), nq_(optimize_q ? problem.model.dof : 0),
          kinds_(problem.model.state_kinds()), limits_(problem.model.state_limits()) {
        vis3_ = p_.visible_3d.empty() ? p_.visible : p_.visible_3d;
        rows_ = 2 * p_.visible_count();
        if (p_.observed_root_relative) {
            const int n3 = static_cast<int>(std::count(vis3_.begin(), vis3_.end(), true));
            rows_ += 3 * n3;
            if (p_.observed_depth)
                rows_ += 3 * n3;
        }
    }

    int parameters() const { return nq_ + 9; }
    int rows() const { return rows_; }

    VecX pack(const JointState &q, const Mat3 &R, const Vec3 &t) const {
        VecX theta(parameters());
        if (nq_ > 0)
            theta.head(nq_) = to_internal(p_.model, q);
        theta.segment<6>(nq_) = matrix_to_r6(R, 1e-6).vector();
        theta.segment<3>(nq_ + 6) = t;
        return theta;
    }

    JointState joints(const VecX &theta) const {
        return optimize_q_ ? to_public(p_.model, theta.head(nq_)) : fixed_q_;
    }
    Rotation6D rotation(const VecX &theta) const { return Rotation6D::from_vector(theta.segment<6>(nq_)); }
    Vec3 translation(const VecX &theta) const { return theta.segment<3>(nq_ + 6); }

    // Joint limits by projection; 6D rotation re-orthonormalized.
    void project(VecX &theta) const {
        for (int j = 0; j < nq_; ++j) {
            const double scale = kinds_[j] == JointKind::revolute ? kDegToRad : 1.0;
            theta[j] = std::clamp(theta[j], limits_[j].lower * scale, limits_[j].upper * scale);
        }
        const Mat3 R = r6_to_matrix(rotation(theta));
        theta.segment<3>(nq_) = R.col(0);
        theta.segment<3>(nq_ + 3) = R.col(1);
    }

    // Residual and optionally Jacobian; false when a visible keypoint falls
    // behind the camera or the rotation is degenerate.
    bool evaluate(const VecX &theta, VecX &r, MatX *jac) const {
        const JointState q = joints(theta);
        const Rotation6D r6 = rotation(theta);
        const Vec3 t = translation(theta);
        Mat3 R;
        try {
            R = r6_to_matrix(r6);
        } catch (const Error &) {
            return false;
        }
        const auto P = forward_kinematics(p_.model, q, {R, t});
        MatX fk;
        if (jac) {
            fk = fk_jacobian(p_.model, q, {r6, t});
            jac->setZero(rows_, parameters());
        }
        // Column map from fk_jacobian layout [J | 6 | 3] to theta layout.
        auto theta_block = [&](int k) -> MatX {
            MatX out(3, parameters());
            if (nq_ > 0)
                out.leftCols(nq_) = fk.block(3 * k, 0, 3, J_);
            out.rightCols(9) = fk.block(3 * k, J_, 3, 9);
            return out;
        };

        r.resize(rows_);
        int row = 0;
        const auto N = p_.model.num_keypoints();
        const double wpx = p_.weights.px;
        for (int k = 0; k < N; ++k) {
            if (!p_.visible[k])
                continue;
            if (!(P.points[k].z() > 1e-6))
                return false;
            r.segment<2>(row) = wpx * (project_point(P.points[k], p_.camera) - p_.observed_2d[k]);
            if (jac)
                jac->middleRows(row, 2) = wpx * projection_jacobian(P.points[k], p_.camera) * theta_block(k);
            row += 2;
        }
        if (p_.observed_root_relative) {
            const auto &obs = *p_.observed_root_relative;
            const double wmm = p_.weights.mm;
            const int tz = nq_ + 8;
            for (int k = 0; k < N; ++k) {
                if (!vis3_[k])
                    continue;
                r.segment<3>(row) = wmm * (P.points[k] - Vec3(0.0, 0.0, t.z()) - obs[k]);
                if (jac) {
                    MatX block = theta_block(k);
                    block(2, tz) -= 1.0;
                    jac->middleRows(row, 3) = wmm * block;
                }
                row += 3;
            }
            if (p_.observed_depth) {
                const double wkc = p_.weights.consistency;
                const Vec3 lift(0.0, 0.0, *p_.observed_depth);
                for (int k = 0; k < N; ++k) {
                    if (!vis3_[k])
                        continue;
                    r.segment<3>(row) = wkc * (P.points[k] - (obs[k] + lift));
                    if (jac)
                        jac->middleRows(row, 3) = wkc * theta_block(k);
                    row += 3;
                }
            }
        }
        return r.allFinite();
    }

private:
    const FitProblem &p_;
    bool optimize_q_;
    JointState fixed_q_;
    int J_;
    int nq_;
    std::vector<JointKind> kinds_;
    std::vector<JointLimits> limits_;
    std::vector<bool> vis3_;
    int rows_ = 0;
};

struct RunOutcome {
    VecX theta;
    double cost = std::numeric_limits<double>::infinity();  // 0.5 |r|^2
    int iterations = 0;
    FitStatus status = FitStatus::diverged;
    std::vector<double> trace;  // residual norm at the start and after each accepted step
};

RunOutcome levenberg_marquardt(const Objective &obj, VecX theta, const FitConfig &cfg) {
    RunOutcome out;
    obj.project(theta);
    VecX r;
    MatX J;
    if (!obj.evaluate(theta, r, &J)) {
        out.theta = theta;
        return out;
    }
    double cost = 0.5 * r.squaredNorm();
    double mu = cfg.damping_init;
    out.status = FitStatus::max_iterations;
    out.trace.push_back(std::sqrt(2.0 * cost));

    for (int it = 0; it < cfg.max_iterations; ++it) {
        out.iterations = it + 1;
        const VecX g = J.transpose() * r;
        if (cost == 0.0 || g.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + cost)) {
            out.status = FitStatus::converged;
            break;
        }
        const MatX A = J.transpose() * J;
        VecX diag = A.diagonal();
        const double floor = 1e-12 * std::max(1.0, diag.maxCoeff());
        diag = diag.cwiseMax(floor);

        bool accepted = false;
        bool done = false;
        while (!accepted) {
            MatX M = A;
            M.diagonal() += mu * diag;
            const VecX delta = M.ldlt().solve(-g);
            if (!delta.allFinite()) {
                mu *= cfg.damping_up;
                if (mu > 1e32) {
                    done = true;
                    break;
                }
                continue;
            }
            if (delta.norm() < cfg.step_tolerance) {
                out.status = FitStatus::converged;
                done = true;
                break;
            }
            VecX candidate = theta + delta;
            obj.project(candidate);
            VecX r_new;
            MatX J_new;
            const bool ok = obj.evaluate(candidate, r_new, &J_new);
            const double cost_new = ok ? 0.5 * r_new.squaredNorm() : std::numeric_limits<double>::infinity();
            if (cost_new < cost) {
                const double rel = (cost - cost_new) / cost;
                theta = candidate;
                r = std::move(r_new);
                J = std::move(J_new);
                cost = cost_new;
                out.trace.push_back(std::sqrt(2.0 * cost));
                mu = std::max(mu * cfg.damping_down, 1e-15);
                accepted = true;
                if (rel < cfg.relative_decrease_tolerance) {
                    out.status = FitStatus::converged;
                    done = true;
                }
            } else {
                mu *= cfg.damping_up;
                if (mu > 1e32) {
                    // No descent direction left at machine precision.
                    out.status = FitStatus::converged;
                    done = true;
                    break;
                }
            }
        }
        if (done)
            break;
    }
    out.theta = theta;
    out.cost = cost;
    return out;
}


// Least-squares rigid alignment R*x + c ~ y (Kabsch); returns the residual sum
// of squares.
double kabsch(const std::vector<Vec3> &x, const std::vector<Vec3> &y, Mat3 &R, Vec3 &c) {
    const auto n = static_cast<double>(x.size());
    Vec3 mx = Vec3::Zero(), my = Vec3::Zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    Mat3 H = Mat3::Zero();
    for (std::size_t i = 0; i < x.size(); ++i)
        H += (x[i] - mx) * (y[i] - my).transpose();
    Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 D = Mat3::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0)
        D(2, 2) = -1.0;
    R = svd.matrixV() * D * svd.matrixU().transpose();
    c = my - R * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        ss += (R * x[i] + c - y[i]).squaredNorm();
    return ss;
}

struct Candidate {
    std::vector<double> q;
    double cost = 0.0;
};

}  // namespace

std::vector<StartPoint> kinematic_starts(const FitProblem &problem, int count, const FitConfig &config) {
    std::vector<StartPoint> out;
    if (count <= 0 || !problem.observed_root_relative || problem.known_q)
        return out;
    const RobotModel &model = problem.model;
    const auto &obs = *problem.observed_root_relative;
    const auto &vis = problem.visible_3d.empty() ? problem.visible : problem.visible_3d;
    const auto limits = model.state_limits();
    const int N = model.num_keypoints();

    // Stage of a keypoint: the last state joint (in tree order) above its link.
    std::vector<int> order;  // state indices in tree order
    for (const auto &j : model.joints)
        if (j.kind != JointKind::fixed)
            order.push_back(j.state_index);
    std::vector<int> position(model.dof, 0);
    for (std::size_t i = 0; i < order.size(); ++i)
        position[order[i]] = static_cast<int>(i);
    std::vector<int> stage(N, -1);
    for (int k = 0; k < N; ++k) {
        for (int link = model.keypoints[k].link; model.links[link].parent_joint >= 0;) {
            const auto &j = model.joints[model.links[link].parent_joint];
            if (j.kind != JointKind::fixed)
                stage[k] = std::max(stage[k], position[j.state_index]);
            link = j.parent;
        }
    }

    // Joints that place no new visible keypoint are gridded together with the
    // next one that does.
    std::vector<std::vector<int>> groups;
    std::vector<int> pending;
    for (int p = 0; p < static_cast<int>(order.size()); ++p) {
        pending.push_back(order[p]);
        bool places = false;
        for (int k = 0; k < N; ++k)
            places = places || (vis[k] && stage[k] == p);
        if (places) {
            groups.push_back(pending);
            pending.clear();
        }
    }

    constexpr int kBeam = 32;
    constexpr int kGrid = 24;          // values per joint
    constexpr double kBudget = 576.0;  // grid points per beam entry and group
    std::vector<double> mid(model.dof);
    for (int j = 0; j < model.dof; ++j)
        mid[j] = limits[j].midpoint();
    std::vector<Candidate> beam{{mid, 0.0}};
    int placed = -1;  // last tree position whose keypoints are active
    for (const auto &group : groups) {
        placed = position[group.back()];
        const int per = std::clamp(static_cast<int>(std::floor(std::pow(kBudget, 1.0 / group.size()))), 2, kGrid);
        std::vector<int> active;
        for (int k = 0; k < N; ++k)
            if (vis[k] && stage[k] <= placed)
                active.push_back(k);
        std::vector<Vec3> y;
        for (int k : active)
            y.push_back(obs[k]);

        std::vector<Candidate> next;
        long combos = 1;
        for (std::size_t g = 0; g < group.size(); ++g)
            combos *= per;
        for (const auto &cand : beam) {
            for (long c = 0; c < combos; ++c) {
                Candidate n{cand.q, 0.0};
                long rest = c;
                for (int j : group) {
                    const int i = static_cast<int>(rest % per);
                    rest /= per;
                    if (limits[j].bounded())
                        n.q[j] = limits[j].lower + (i + 0.5) / per * (limits[j].upper - limits[j].lower);
                }
                const auto X = keypoints_in_base(model, JointState{n.q});
                std::vector<Vec3> x;
                for (int k : active)
                    x.push_back(X[k]);
                Mat3 R;
                Vec3 t;
                n.cost = kabsch(x, y, R, t);
                next.push_back(std::move(n));
            }
        }
        std::stable_sort(next.begin(), next.end(),
                         [](const Candidate &a, const Candidate &b) { return a.cost < b.cost; });
        if (next.size() > kBeam)
            next.resize(kBeam);
        beam = std::move(next);
    }

    const StartPoint base = initialize(problem, 0, config);
    std::vector<Vec3> y;
    std::vector<int> active;
    for (int k = 0; k < N; ++k)
        if (vis[k]) {
            active.push_back(k);
            y.push_back(obs[k]);
        }
    for (int i = 0; i < count && i < static_cast<int>(beam.size()); ++i) {
        StartPoint s;
        s.q = JointState{beam[i].q};
        const auto X = keypoints_in_base(model, s.q);
        std::vector<Vec3> x;
        for (int k : active)
            x.push_back(X[k]);
        Vec3 c;
        kabsch(x, y, s.rotation, c);
        // x, y of the root-relative frame are absolute; only z lacks the depth.
        s.translation = s.rotation * X[model.root_keypoint] + c;
        s.translation.z() += base.translation.z();
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

FitResult run_fit(const FitProblem &problem, const FitConfig &config, bool known) {
    problem.validate();
    config.validate();
    if (known && !problem.known_q)
        throw Error(ErrorCode::invalid_argument, "known-joint fit needs a known joint state");
    const JointState fixed_q = known ? *problem.known_q : JointState{};
    const Objective obj(problem, !known, fixed_q);

    FitResult result;
    result.scene_id = problem.scene_id;
    result.robot = problem.model.name;
    result.known_joints = known;
    const int effective = (known ? 0 : problem.model.dof) + 6;
    result.underconstrained = obj.rows() < effective;
    if (result.underconstrained)
        result.warnings.push_back("under-constrained: " + std::to_string(obj.rows()) + " residuals for " +
                                  std::to_string(effective) + " degrees of freedom");
    if (!known && problem.visible_count() < 6)
        result.warnings.push_back("fewer than 6 visible keypoints");

    int best = -1;
    RunOutcome best_run;
    std::vector<StartPoint> seeds = known ? std::vector<StartPoint>{}
                                          : kinematic_starts(problem, config.kinematic_starts, config);
    const int total = config.starts + static_cast<int>(seeds.size());
    for (int s = 0; s < total; ++s) {
        const StartPoint start = s < config.starts ? initialize(problem, s, config) : seeds[s - config.starts];
        const RunOutcome run = levenberg_marquardt(obj, obj.pack(known ? fixed_q : start.q, start.rotation,
                                                                 start.translation), config);
        result.starts.push_back({s, std::sqrt(2.0 * run.cost), run.iterations, run.status, run.trace});
        const bool finite = std::isfinite(run.cost);
        const bool better = best < 0 || (finite && !(best_run.cost <= run.cost));
        if (better && (finite || best < 0)) {
            best = s;
            best_run = run;
        }
    }

    result.best_start = best;
    result.iterations = best_run.iterations;
    result.status = best_run.status;
    result.residual_norm = std::sqrt(2.0 * best_run.cost);
    result.q = obj.joints(best_run.theta);
    result.rotation = r6_to_matrix(obj.rotation(best_run.theta));
    result.rotation_6d = matrix_to_r6(result.rotation, 1e-6);
    result.translation = obj.translation(best_run.theta);
    result.depth = result.translation.z();
    return result;
}

}  // namespace

Mat3 start_rotation(int start_index, std::uint64_t seed) {
    if (start_index < 0)
        throw Error(ErrorCode::invalid_argument, "start index must be non-negative");
    const auto &set = start_set();
    if (start_index < static_cast<int>(set.size()))
        return set[start_index];
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(start_index));
    Eigen::Quaterniond quat(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    return quat.normalized().toRotationMatrix();
}

StartPoint initialize(const FitProblem &problem, int start_index, const FitConfig &config) {
    const auto &K = problem.camera;
    StartPoint s;
    if (problem.known_q) {
        s.q = *problem.known_q;
    } else {
        s.q.values.resize(problem.model.dof);
        const auto limits = problem.model.state_limits();
        for (int j = 0; j < problem.model.dof; ++j)
            s.q.values[j] = limits[j].midpoint();
        // Later starts spread q over the limits; a clamped joint cannot travel
        // around its range, so rotation diversity alone leaves such minima.
        if (start_index > 0 && config.sample_joint_starts) {
            Rng rng = Rng::stream(config.seed ^ 0x6A09E667F3BCC908ULL, static_cast<std::uint64_t>(start_index));
            for (int j = 0; j < problem.model.dof; ++j)
                if (limits[j].bounded())
                    s.q.values[j] = rng.uniform(limits[j].lower, limits[j].upper);
        }
    }
    s.rotation = start_rotation(start_index, config.seed);

    std::vector<Vec2> visible;
    Vec2 centroid = Vec2::Zero();
    for (std::size_t k = 0; k < problem.observed_2d.size(); ++k) {
        if (!problem.visible[k])
            continue;
        visible.push_back(problem.observed_2d[k]);
        centroid += problem.observed_2d[k];
    }
    if (visible.empty())
        throw Error(ErrorCode::validation, "no visible keypoints");
    centroid /= static_cast<double>(visible.size());

    // No clipping to the image: truncated views keep their observed extent.
    Vec2 lo = visible.front(), hi = lo;
    for (const auto &p : visible) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec2 extent = (hi - lo).array() + 2.0 * config.bbox_padding;
    const double bbox_area = std::max(extent.x() * extent.y(), 1.0);
    const double area = real_area(problem.model);
    const double depth = area > 0.0 ? coarse_depth(K, area, bbox_area) : 1000.0;
    s.translation = {(centroid.x() - K.cx) * depth / K.fx, (centroid.y() - K.cy) * depth / K.fy, depth};
    return s;
}

double residual_norm(const FitProblem &problem, const JointState &q, const RigidPose &pose) {
    const bool known = problem.known_q.has_value();
    const Objective obj(problem, !known, known ? *problem.known_q : JointState{});
    VecX r;
    if (!obj.evaluate(obj.pack(known ? *problem.known_q : q, pose.rotation, pose.translation), r, nullptr))
        return std::numeric_limits<double>::infinity();
    return r.norm();
}

FitResult fit(const FitProblem &problem, const FitConfig &config) {
    FitProblem unknown = problem;
    unknown.known_q.reset();
    return run_fit(unknown, config, false);
}

FitResult fit_known_joints(const FitProblem &problem, const FitConfig &config) {
    if (!problem.known_q)
        throw Error(ErrorCode::invalid_argument, "known-joint fit needs a known joint state");
    return run_fit(problem, config, true);
}

FitResult fuse_two_view(const FitResult &a, const FitResult &b, const RigidPose &a_to_b) {
    if (a.robot != b.robot || a.q.size() != b.q.size())
        throw Error(ErrorCode::invalid_argument, "cannot fuse results from different robot models");
    if (!is_rotation(a_to_b.rotation, 1e-6))
        throw Error(ErrorCode::invalid_argument, "relative camera pose rotation is not orthonormal");
    FitResult out = b;
    for (std::size_t j = 0; j < b.q.size(); ++j)
        out.q.values[j] = 0.5 * (a.q.values[j] + b.q.values[j]);
    out.translation = 0.5 * (a_to_b.apply(a.translation) + b.translation);
    out.depth = out.translation.z();
    out.residual_norm = std::max(a.residual_norm, b.residual_norm);
    out.status = (a.status == FitStatus::converged && b.status == FitStatus::converged) ? FitStatus::converged
                                                                                       : b.status;
    out.starts.clear();
    return out;
}

FitProblem problem_from_record(const RobotModel &model, const SceneRecord &record, const ProblemOptions &options) {
    if (static_cast<int>(record.observed_2d.size()) != model.num_keypoints())
        throw Error(ErrorCode::invalid_argument, "record keypoint count does not match the model");
    FitProblem p;
    p.model = model;
    p.camera = record.camera;
    p.observed_2d = record.observed_2d;
    p.visible = record.in_frame;
    p.scene_id = record.scene_id;
    p.weights = options.weights;
    if (options.use_root_relative) {
        p.observed_root_relative = record.observed_root_relative;
        if (options.use_consistency) {
            if (!options.observed_depth)
                throw Error(ErrorCode::invalid_argument, "consistency residual needs an observed depth");
            p.observed_depth = options.observed_depth;
        }
    }
    if (options.known_joints)
        p.known_q = record.q;
    return p;
}

EvalRecord evaluate_fit(const RobotModel &model, const SceneRecord &record, const FitResult &result) {
    if (result.scene_id != record.scene_id)
        throw Error(ErrorCode::invalid_argument, "result and record scene ids differ");
    EvalRecord e;
    e.scene_id = record.scene_id;
    const auto P = forward_kinematics(model, result.q, result.pose());
    e.add = add_distance(P, record.keypoints_fk);
    const auto kinds = model.state_kinds();
    for (int j = 0; j < model.dof; ++j) {
        const double diff = result.q.values[j] - record.q.values[j];
        e.joint_errors.push_back(std::abs(diff));
        e.joint_kinds.push_back(kinds[j]);
    }
    e.euler_errors = euler_angle_errors(result.rotation, record.rotation).degrees;
    e.geodesic_error = geodesic_angle(result.rotation, record.rotation);
    e.translation_error = (result.translation - record.translation).norm();
    e.depth_error = std::abs(result.depth - record.depth);
    e.inframe_count = record.inframe_count;
    return e;
}

namespace {

ojson vec_json(const Eigen::Ref<const VecX> &v) {
    ojson a = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

}  // namespace

std::string result_to_json_line(const FitResult &r) {
    ojson j;
    j["scene_id"] = r.scene_id;
    j["robot"] = r.robot;
    j["known_joints"] = r.known_joints;
    j["q"] = r.q.values;
    j["rotation_6d"] = vec_json(r.rotation_6d.vector());
    ojson rows = ojson::array();
    for (int i = 0; i < 3; ++i)
        rows.push_back(vec_json(r.rotation.row(i).transpose()));
    j["rotation"] = rows;
    j["translation"] = vec_json(r.translation);
    j["depth"] = r.depth;
    j["residual_norm"] = r.residual_norm;
    j["iterations"] = r.iterations;
    j["status"] = to_string(r.status);
    j["best_start"] = r.best_start;
    j["underconstrained"] = r.underconstrained;
    ojson starts = ojson::array();
    for (const auto &s : r.starts)
        starts.push_back({{"start", s.start},
                          {"residual_norm", s.residual_norm},
                          {"iterations", s.iterations},
                          {"status", to_string(s.status)}});
    j["starts"] = starts;
    j["warnings"] = r.warnings;
    return j.dump();
}

FitResult result_from_json_line(const std::string &line) {
    try {
        const ojson j = ojson::parse(line);
        FitResult r;
        r.scene_id = j.at("scene_id").get<long>();
        r.robot = j.at("robot").get<std::string>();
        r.known_joints = j.at("known_joints").get<bool>();
        r.q.values = j.at("q").get<std::vector<double>>();
        const auto r6 = j.at("rotation_6d").get<std::vector<double>>();
        if (r6.size() != 6)
            throw Error(ErrorCode::parse, "rotation_6d must have 6 entries");
        r.rotation_6d = {Vec3(r6[0], r6[1], r6[2]), Vec3(r6[3], r6[4], r6[5])};
        const auto &rows = j.at("rotation");
        for (int i = 0; i < 3; ++i) {
            const auto row = rows.at(i).get<std::vector<double>>();
            if (row.size() != 3)
                throw Error(ErrorCode::parse, "rotation rows must have 3 entries");
            r.rotation.row(i) << row[0], row[1], row[2];
        }
        const auto t = j.at("translation").get<std::vector<double>>();
        if (t.size() != 3)
            throw Error(ErrorCode::parse, "translation must have 3 entries");
        r.translation = {t[0], t[1], t[2]};
        r.depth = j.at("depth").get<double>();
        r.residual_norm = j.at("residual_norm").get<double>();
        r.iterations = j.at("iterations").get<int>();
        r.status = fit_status_from_string(j.at("status").get<std::string>());
        r.best_start = j.at("best_start").get<int>();
        r.underconstrained = j.at("underconstrained").get<bool>();
        for (const auto &s : j.at("starts"))
            r.starts.push_back({s.at("start").get<int>(), s.at("residual_norm").get<double>(),
                                s.at("iterations").get<int>(),
                                fit_status_from_string(s.at("status").get<std::string>()),
                                {}});
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        return r;
    } catch (const ojson::exception &e) {
        throw Error(ErrorCode::parse, std::string("malformed result: ") + e.what());
    }
}

void write_results(const std::vector<FitResult> &results, const std::string &path) {
    std::string contents;
    for (const auto &r : results) {
        contents += result_to_json_line(r);
        contents += '\n';
    }
    write_file_atomic(path, contents);
}

std::vector<FitResult> read_results(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open results '" + path + "'");
    std::vector<FitResult> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        try {
            out.push_back(result_from_json_line(line));
        } catch (const Error &e) {
            throw Error(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace holopose
