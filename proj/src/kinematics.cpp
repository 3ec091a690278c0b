#include "holopose/kinematics.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

namespace holopose {

namespace pt = boost::property_tree;

const char *to_string(JointKind kind) {
    switch (kind) {
    case JointKind::revolute: return "revolute";
    case JointKind::prismatic: return "prismatic";
    case JointKind::fixed: return "fixed";
    }
    return "unknown";
}

bool JointLimits::bounded() const { return std::isfinite(lower) && std::isfinite(upper); }

double JointLimits::midpoint() const { return bounded() ? 0.5 * (lower + upper) : 0.0; }

Eigen::Isometry3d JointSpec::origin() const {
    Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
    T.linear() = (Eigen::AngleAxisd(origin_rpy.z(), Vec3::UnitZ()) *
                  Eigen::AngleAxisd(origin_rpy.y(), Vec3::UnitY()) *
                  Eigen::AngleAxisd(origin_rpy.x(), Vec3::UnitX()))
                     .toRotationMatrix();
    T.translation() = origin_xyz;
    return T;
}

int RobotModel::link_index(std::string_view link_name) const {
    for (std::size_t i = 0; i < links.size(); ++i)
        if (links[i].name == link_name)
            return static_cast<int>(i);
    return -1;
}

std::vector<JointKind> RobotModel::state_kinds() const {
    std::vector<JointKind> kinds(dof, JointKind::revolute);
    for (const auto &j : joints)
        if (j.state_index >= 0)
            kinds[j.state_index] = j.kind;
    return kinds;
}

std::vector<JointLimits> RobotModel::state_limits() const {
    std::vector<JointLimits> limits(dof);
    for (const auto &j : joints)
        if (j.state_index >= 0)
            limits[j.state_index] = j.limits;
    return limits;
}

RobotModel RobotModel::permuted_keypoints(const std::vector<int> &order) const {
    if (order.size() != keypoints.size())
        throw Error(ErrorCode::invalid_argument, "keypoint permutation has wrong length");
    RobotModel out = *this;
    std::vector<bool> seen(order.size(), false);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const int src = order[k];
        if (src < 0 || src >= num_keypoints() || seen[src])
            throw Error(ErrorCode::invalid_argument, "invalid keypoint permutation");
        seen[src] = true;
        out.keypoints[k] = keypoints[src];
        if (src == root_keypoint)
            out.root_keypoint = static_cast<int>(k);
    }
    return out;
}

namespace {

Vec3 parse_vec3(const std::string &text, const std::string &what) {
    std::istringstream in(text);
    Vec3 v;
    if (!(in >> v.x() >> v.y() >> v.z()))
        throw Error(ErrorCode::parse, "cannot parse 3-vector for " + what + ": '" + text + "'");
    std::string rest;
    if (in >> rest)
        throw Error(ErrorCode::parse, "trailing data in 3-vector for " + what + ": '" + text + "'");
    return v;
}

double parse_double(const std::string &text, const std::string &what) {
    std::istringstream in(text);
    double v;
    if (!(in >> v))
        throw Error(ErrorCode::parse, "cannot parse number for " + what + ": '" + text + "'");
    return v;
}

std::string attr(const pt::ptree &node, const std::string &key, const std::string &what) {
    auto v = node.get_optional<std::string>("<xmlattr>." + key);
    if (!v)
        throw Error(ErrorCode::parse, what + " is missing attribute '" + key + "'");
    return *v;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_vec(const Vec3 &v, const char *spec) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), spec, v.x(), v.y(), v.z());
    return buf;
}

Vec3 normalized_axis(const Vec3 &axis, const std::string &joint) {
    const double n = axis.norm();
    if (!(n > 1e-12) || !axis.allFinite())
        throw Error(ErrorCode::validation, "joint '" + joint + "' has a zero axis");
    return std::abs(n - 1.0) > 1e-12 ? Vec3(axis / n) : axis;
}

}  // namespace

RobotModel finalize_model(RobotModel model) {
    const int num_links = static_cast<int>(model.links.size());
    if (num_links == 0)
        throw Error(ErrorCode::validation, "robot description declares no links");

    // Restore document order when re-finalizing an already finalized model.
    const bool has_doc_order = std::all_of(model.joints.begin(), model.joints.end(),
                                           [](const JointSpec &j) { return j.document_index >= 0; });
    if (has_doc_order)
        std::stable_sort(model.joints.begin(), model.joints.end(),
                         [](const JointSpec &a, const JointSpec &b) { return a.document_index < b.document_index; });
    for (std::size_t j = 0; j < model.joints.size(); ++j)
        model.joints[j].document_index = static_cast<int>(j);

    std::vector<int> parent_joint(num_links, -1);
    for (std::size_t j = 0; j < model.joints.size(); ++j) {
        const auto &joint = model.joints[j];
        if (joint.parent < 0 || joint.parent >= num_links || joint.child < 0 || joint.child >= num_links)
            throw Error(ErrorCode::validation, "joint '" + joint.name + "' references an unknown link");
        if (joint.parent == joint.child)
            throw Error(ErrorCode::validation, "cyclic joint graph at joint '" + joint.name + "'");
        if (parent_joint[joint.child] >= 0)
            throw Error(ErrorCode::validation,
                        "link '" + model.links[joint.child].name + "' has more than one parent joint");
        parent_joint[joint.child] = static_cast<int>(j);
        if (joint.kind != JointKind::fixed && joint.limits.lower > joint.limits.upper)
            throw Error(ErrorCode::validation, "joint '" + joint.name + "' has lower limit above upper limit");
    }

    std::vector<int> roots;
    for (int l = 0; l < num_links; ++l)
        if (parent_joint[l] < 0)
            roots.push_back(l);
    if (roots.empty())
        throw Error(ErrorCode::validation, "cyclic joint graph: no root link");
    if (roots.size() > 1)
        throw Error(ErrorCode::validation, "joint graph is not a single tree: link '" +
                                               model.links[roots[1]].name + "' is disconnected");

    // Breadth-first from the root; children visited in document order.
    std::vector<std::vector<int>> children(num_links);
    for (std::size_t j = 0; j < model.joints.size(); ++j)
        children[model.joints[j].parent].push_back(static_cast<int>(j));
    std::vector<int> order;
    std::queue<int> frontier;
    frontier.push(roots[0]);
    while (!frontier.empty()) {
        const int link = frontier.front();
        frontier.pop();
        for (int j : children[link]) {
            order.push_back(j);
            frontier.push(model.joints[j].child);
        }
    }
    if (order.size() != model.joints.size())
        throw Error(ErrorCode::validation, "cyclic joint graph");

    // State indices follow document order of the non-fixed joints.
    int dof = 0;
    for (auto &joint : model.joints) {
        joint.axis = normalized_axis(joint.axis, joint.name);
        joint.state_index = joint.kind == JointKind::fixed ? -1 : dof++;
    }

    std::vector<JointSpec> sorted;
    sorted.reserve(order.size());
    for (int j : order)
        sorted.push_back(model.joints[j]);
    model.joints = std::move(sorted);
    for (auto &link : model.links)
        link.parent_joint = -1;
    for (std::size_t j = 0; j < model.joints.size(); ++j)
        model.links[model.joints[j].child].parent_joint = static_cast<int>(j);

    model.base_link = roots[0];
    model.dof = dof;

    if (model.keypoints.empty())
        throw Error(ErrorCode::validation, "robot description declares no keypoints");
    for (const auto &kp : model.keypoints)
        if (kp.link < 0 || kp.link >= num_links)
            throw Error(ErrorCode::validation, "keypoint '" + kp.name + "' references a missing link");
    for (const auto &link : model.links)
        for (const auto &c : link.capsules)
            if (!(c.radius > 0.0) || !c.a.allFinite() || !c.b.allFinite())
                throw Error(ErrorCode::validation, "link '" + link.name + "' has an invalid capsule");

    model.root_keypoint = select_root_keypoint(model);
    return model;
}

RobotModel parse_robot_description(std::string_view text) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(text)};
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error &e) {
        throw Error(ErrorCode::parse, std::string("malformed XML: ") + e.what());
    }
    auto robot_node = tree.get_child_optional("robot");
    if (!robot_node)
        throw Error(ErrorCode::parse, "malformed robot description: missing <robot> element");

    RobotModel model;
    model.name = robot_node->get<std::string>("<xmlattr>.name", "robot");

    std::map<std::string, int> link_ids;
    for (const auto &[tag, node] : *robot_node) {
        if (tag != "link")
            continue;
        Link link;
        link.name = attr(node, "name", "<link>");
        if (link_ids.count(link.name))
            throw Error(ErrorCode::validation, "duplicate link '" + link.name + "'");
        for (const auto &[ctag, cnode] : node) {
            if (ctag != "capsule")
                continue;
            Capsule c;
            const std::string what = "capsule of link '" + link.name + "'";
            c.a = parse_vec3(attr(cnode, "a", what), what);
            c.b = parse_vec3(attr(cnode, "b", what), what);
            c.radius = parse_double(attr(cnode, "radius", what), what);
            link.capsules.push_back(c);
        }
        link_ids[link.name] = static_cast<int>(model.links.size());
        model.links.push_back(std::move(link));
    }

    auto lookup = [&](const std::string &name, const std::string &what) {
        auto it = link_ids.find(name);
        if (it == link_ids.end())
            throw Error(ErrorCode::validation, what + " references missing link '" + name + "'");
        return it->second;
    };

    for (const auto &[tag, node] : *robot_node) {
        if (tag == "joint") {
            JointSpec joint;
            joint.name = attr(node, "name", "<joint>");
            const std::string what = "joint '" + joint.name + "'";
            const std::string type = attr(node, "type", what);
            if (type == "revolute")
                joint.kind = JointKind::revolute;
            else if (type == "prismatic")
                joint.kind = JointKind::prismatic;
            else if (type == "fixed")
                joint.kind = JointKind::fixed;
            else
                throw Error(ErrorCode::validation, "unknown joint kind '" + type + "' in " + what);

            auto parent = node.get_child_optional("parent");
            auto child = node.get_child_optional("child");
            if (!parent || !child)
                throw Error(ErrorCode::parse, what + " needs <parent> and <child>");
            joint.parent = lookup(attr(*parent, "link", what), what);
            joint.child = lookup(attr(*child, "link", what), what);
            if (auto origin = node.get_child_optional("origin")) {
                joint.origin_xyz = parse_vec3(origin->get<std::string>("<xmlattr>.xyz", "0 0 0"), what);
                joint.origin_rpy = parse_vec3(origin->get<std::string>("<xmlattr>.rpy", "0 0 0"), what);
            }
            if (auto axis = node.get_child_optional("axis"))
                joint.axis = parse_vec3(attr(*axis, "xyz", what), what);
            if (auto limit = node.get_child_optional("limit")) {
                if (auto lo = limit->get_optional<std::string>("<xmlattr>.lower"))
                    joint.limits.lower = parse_double(*lo, what);
                if (auto hi = limit->get_optional<std::string>("<xmlattr>.upper"))
                    joint.limits.upper = parse_double(*hi, what);
            } else if (joint.kind == JointKind::revolute) {
                joint.limits = {-180.0, 180.0};
            }
            model.joints.push_back(std::move(joint));
        } else if (tag == "keypoint") {
            KeypointSpec kp;
            kp.name = attr(node, "name", "<keypoint>");
            const std::string what = "keypoint '" + kp.name + "'";
            kp.link = lookup(attr(node, "link", what), what);
            kp.offset = parse_vec3(node.get<std::string>("<xmlattr>.xyz", "0 0 0"), what);
            model.keypoints.push_back(std::move(kp));
        }
    }
    return finalize_model(std::move(model));
}

RobotModel load_robot_description(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::io, "cannot open robot description '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_robot_description(ss.str());
}

std::string to_robot_description(const RobotModel &model) {
    auto v17 = [](const Vec3 &v) { return fmt17(v.x()) + " " + fmt17(v.y()) + " " + fmt17(v.z()); };
    std::ostringstream out;
    out << "<robot name=\"" << model.name << "\">\n";
    for (const auto &link : model.links) {
        if (link.capsules.empty()) {
            out << "  <link name=\"" << link.name << "\"/>\n";
            continue;
        }
        out << "  <link name=\"" << link.name << "\">\n";
        for (const auto &c : link.capsules)
            out << "    <capsule a=\"" << v17(c.a) << "\" b=\"" << v17(c.b) << "\" radius=\"" << fmt17(c.radius)
                << "\"/>\n";
        out << "  </link>\n";
    }
    std::vector<const JointSpec *> ordered;
    for (const auto &j : model.joints)
        ordered.push_back(&j);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const JointSpec *a, const JointSpec *b) { return a->document_index < b->document_index; });
    for (const JointSpec *j : ordered) {
        out << "  <joint name=\"" << j->name << "\" type=\"" << to_string(j->kind) << "\">\n";
        out << "    <parent link=\"" << model.links[j->parent].name << "\"/>\n";
        out << "    <child link=\"" << model.links[j->child].name << "\"/>\n";
        out << "    <origin xyz=\"" << v17(j->origin_xyz) << "\" rpy=\"" << v17(j->origin_rpy) << "\"/>\n";
        out << "    <axis xyz=\"" << v17(j->axis) << "\"/>\n";
        if (j->kind != JointKind::fixed) {
            out << "    <limit";
            if (std::isfinite(j->limits.lower))
                out << " lower=\"" << fmt17(j->limits.lower) << "\"";
            if (std::isfinite(j->limits.upper))
                out << " upper=\"" << fmt17(j->limits.upper) << "\"";
            out << "/>\n";
        }
        out << "  </joint>\n";
    }
    for (const auto &kp : model.keypoints)
        out << "  <keypoint name=\"" << kp.name << "\" link=\"" << model.links[kp.link].name << "\" xyz=\""
            << v17(kp.offset) << "\"/>\n";
    out << "</robot>\n";
    return out.str();
}

std::string dump_model(const RobotModel &model) {
    std::ostringstream out;
    out << "robot " << model.name << " dof=" << model.dof << " links=" << model.links.size()
        << " keypoints=" << model.keypoints.size() << " root=" << model.root_keypoint
        << " base=" << model.links[model.base_link].name << "\n";
    for (const auto &j : model.joints) {
        char lim[96];
        std::snprintf(lim, sizeof(lim), "[%.9g,%.9g]", j.limits.lower, j.limits.upper);
        out << "joint " << j.name << " " << to_string(j.kind) << " state=" << j.state_index
            << " parent=" << model.links[j.parent].name << " child=" << model.links[j.child].name
            << " xyz=" << fmt_vec(j.origin_xyz, "(%.9g,%.9g,%.9g)") << " rpy=" << fmt_vec(j.origin_rpy, "(%.9g,%.9g,%.9g)")
            << " axis=" << fmt_vec(j.axis, "(%.9g,%.9g,%.9g)");
        if (j.kind != JointKind::fixed)
            out << " limits=" << lim;
        out << "\n";
    }
    for (std::size_t k = 0; k < model.keypoints.size(); ++k) {
        const auto &kp = model.keypoints[k];
        out << "keypoint " << k << " " << kp.name << " link=" << model.links[kp.link].name
            << " xyz=" << fmt_vec(kp.offset, "(%.9g,%.9g,%.9g)") << "\n";
    }
    return out.str();
}

std::vector<Eigen::Isometry3d> link_transforms(const RobotModel &model, const Eigen::Ref<const VecX> &q_internal) {
    if (q_internal.size() != model.dof)
        throw Error(ErrorCode::invalid_argument, "joint state has " + std::to_string(q_internal.size()) +
                                                     " values, model has dof " + std::to_string(model.dof));
    std::vector<Eigen::Isometry3d> T(model.links.size(), Eigen::Isometry3d::Identity());
    for (const auto &j : model.joints) {
        Eigen::Isometry3d motion = Eigen::Isometry3d::Identity();
        if (j.kind == JointKind::revolute)
            motion.linear() = Eigen::AngleAxisd(q_internal[j.state_index], j.axis).toRotationMatrix();
        else if (j.kind == JointKind::prismatic)
            motion.translation() = j.axis * q_internal[j.state_index];
        T[j.child] = T[j.parent] * j.origin() * motion;
    }
    return T;
}

VecX to_internal(const RobotModel &model, const JointState &q) {
    if (static_cast<int>(q.size()) != model.dof)
        throw Error(ErrorCode::invalid_argument, "joint state has " + std::to_string(q.size()) +
                                                     " values, model has dof " + std::to_string(model.dof));
    VecX out(model.dof);
    for (const auto &j : model.joints)
        if (j.state_index >= 0)
            out[j.state_index] = q.values[j.state_index] * (j.kind == JointKind::revolute ? kDegToRad : 1.0);
    return out;
}

JointState to_public(const RobotModel &model, const Eigen::Ref<const VecX> &q_internal) {
    if (q_internal.size() != model.dof)
        throw Error(ErrorCode::invalid_argument, "joint state dimension mismatch");
    JointState out{std::vector<double>(model.dof)};
    for (const auto &j : model.joints)
        if (j.state_index >= 0)
            out.values[j.state_index] = q_internal[j.state_index] * (j.kind == JointKind::revolute ? kRadToDeg : 1.0);
    return out;
}

std::vector<Vec3> keypoints_in_base(const RobotModel &model, const JointState &q) {
    const auto T = link_transforms(model, to_internal(model, q));
    std::vector<Vec3> out;
    out.reserve(model.keypoints.size());
    for (const auto &kp : model.keypoints)
        out.push_back(T[kp.link] * kp.offset);
    return out;
}

int select_root_keypoint(const RobotModel &model) {
    const auto X = keypoints_in_base(model, JointState{std::vector<double>(model.dof, 0.0)});
    Vec3 center = Vec3::Zero();
    for (const auto &x : X)
        center += x;
    center /= static_cast<double>(X.size());
    int best = 0;
    double best_dist = (X[0] - center).norm();
    for (std::size_t k = 1; k < X.size(); ++k) {
        const double d = (X[k] - center).norm();
        if (d < best_dist - 1e-9) {
            best = static_cast<int>(k);
            best_dist = d;
        }
    }
    return best;
}

JointState clamp_to_limits(const RobotModel &model, const JointState &q) {
    if (static_cast<int>(q.size()) != model.dof)
        throw Error(ErrorCode::invalid_argument, "joint state dimension mismatch");
    JointState out = q;
    for (const auto &j : model.joints)
        if (j.state_index >= 0)
            out.values[j.state_index] = std::clamp(q.values[j.state_index], j.limits.lower, j.limits.upper);
    return out;
}

KeypointSet forward_kinematics(const RobotModel &model, const JointState &q, const RigidPose &pose) {
    const auto X = keypoints_in_base(model, q);
    const Vec3 root = X[model.root_keypoint];
    KeypointSet out;
    out.frame = KeypointFrame::fk_absolute;
    out.points.reserve(X.size());
    for (const auto &x : X)
        out.points.push_back(pose.rotation * (x - root) + pose.translation);
    return out;
}

RigidPose base_to_camera(const RobotModel &model, const JointState &q, const RigidPose &pose) {
    const auto X = keypoints_in_base(model, q);
    return {pose.rotation, pose.translation - pose.rotation * X[model.root_keypoint]};
}

PoseParams PoseParams::from_pose(const RigidPose &pose) {
    return {matrix_to_r6(pose.rotation, 1e-6), pose.translation};
}

MatX fk_jacobian(const RobotModel &model, const JointState &q, const PoseParams &pose) {
    const VecX qi = to_internal(model, q);
    const auto T = link_transforms(model, qi);
    const int N = model.num_keypoints();
    const int J = model.dof;
    const Mat3 R = r6_to_matrix(pose.rotation);
    const auto dR = r6_to_matrix_jacobian(pose.rotation);

    std::vector<Vec3> X(N);
    for (int k = 0; k < N; ++k)
        X[k] = T[model.keypoints[k].link] * model.keypoints[k].offset;

    // Joint columns in the base frame: d X_k / d q_j.
    auto base_columns = [&](int k) {
        Eigen::Matrix<double, 3, Eigen::Dynamic> cols = Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, J);
        int joint = model.links[model.keypoints[k].link].parent_joint;
        while (joint >= 0) {
            const auto &js = model.joints[joint];
            if (js.state_index >= 0) {
                const Eigen::Isometry3d frame = T[js.parent] * js.origin();
                const Vec3 axis = frame.linear() * js.axis;
                if (js.kind == JointKind::revolute)
                    cols.col(js.state_index) = axis.cross(X[k] - frame.translation());
                else
                    cols.col(js.state_index) = axis;
            }
            joint = model.links[js.parent].parent_joint;
        }
        return cols;
    };

    const auto root_cols = base_columns(model.root_keypoint);
    MatX jac = MatX::Zero(3 * N, J + 9);
    for (int k = 0; k < N; ++k) {
        const Vec3 Y = X[k] - X[model.root_keypoint];
        if (J > 0)
            jac.block(3 * k, 0, 3, J) = R * (base_columns(k) - root_cols);
        Eigen::Matrix<double, 3, 6> drot = Eigen::Matrix<double, 3, 6>::Zero();
        for (int c = 0; c < 3; ++c)
            drot += Y[c] * dR.block<3, 6>(3 * c, 0);
        jac.block<3, 6>(3 * k, J) = drot;
        jac.block<3, 3>(3 * k, J + 6) = Mat3::Identity();
    }
    return jac;
}

double max_reach(const RobotModel &model) {
    std::vector<double> link_bound(model.links.size(), 0.0);
    for (const auto &j : model.joints) {
        double travel = 0.0;
        if (j.kind == JointKind::prismatic)
            travel = j.limits.bounded() ? std::max(std::abs(j.limits.lower), std::abs(j.limits.upper)) : 0.0;
        link_bound[j.child] = link_bound[j.parent] + j.origin_xyz.norm() + travel;
    }
    std::vector<double> bound(model.keypoints.size());
    for (std::size_t k = 0; k < model.keypoints.size(); ++k)
        bound[k] = link_bound[model.keypoints[k].link] + model.keypoints[k].offset.norm();
    double reach = 0.0;
    for (double b : bound)
        reach = std::max(reach, b + bound[model.root_keypoint]);
    return reach;
}

}  // namespace holopose
