#include "holopose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace holopose {

std::string format6(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

double add_distance(const KeypointSet &P_pred, const KeypointSet &P_gt) {
    if (P_pred.size() != P_gt.size())
        throw Error(ErrorCode::invalid_argument, "ADD needs matched keypoint counts");
    if (P_pred.size() == 0)
        throw Error(ErrorCode::invalid_argument, "ADD of empty keypoint sets");
    double sum = 0.0;
    for (std::size_t i = 0; i < P_pred.size(); ++i)
        sum += (P_pred.points[i] - P_gt.points[i]).norm();
    return sum / static_cast<double>(P_pred.size());
}

double auc(std::span<const double> add_values, double max_threshold) {
    if (add_values.empty())
        throw Error(ErrorCode::invalid_argument, "AUC of an empty sequence");
    if (!(max_threshold > 0.0))
        throw Error(ErrorCode::invalid_argument, "AUC threshold must be positive");
    // Sorted accumulation keeps the result independent of input order.
    std::vector<double> sorted(add_values.begin(), add_values.end());
    std::sort(sorted.begin(), sorted.end());
    double acc = 0.0;
    for (double v : sorted) {
        if (v < 0.0 || std::isnan(v))
            throw Error(ErrorCode::invalid_argument, "ADD values must be non-negative");
        acc += std::max(0.0, max_threshold - std::min(v, max_threshold));
    }
    return 100.0 * acc / max_threshold / static_cast<double>(sorted.size());
}

double mean(std::span<const double> values) {
    if (values.empty())
        throw Error(ErrorCode::invalid_argument, "mean of an empty sequence");
    double sum = 0.0;
    for (double v : values)
        sum += v;
    return sum / static_cast<double>(values.size());
}

double mean_add(std::span<const double> add_values) { return mean(add_values); }

double mean_depth_error(std::span<const double> depth_errors) { return mean(depth_errors); }

double mean_rotation_error(std::span<const Vec3> euler_errors) {
    if (euler_errors.empty())
        throw Error(ErrorCode::invalid_argument, "mean of an empty sequence");
    double sum = 0.0;
    for (const auto &e : euler_errors)
        sum += e.sum();
    return sum / (3.0 * static_cast<double>(euler_errors.size()));
}

JointErrorMeans mean_joint_error(std::span<const double> errors, std::span<const JointKind> kinds) {
    if (errors.size() != kinds.size())
        throw Error(ErrorCode::invalid_argument, "joint errors and kinds differ in length");
    JointErrorMeans out;
    double rev = 0.0;
    double pri = 0.0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (kinds[i] == JointKind::revolute) {
            rev += errors[i];
            ++out.revolute_count;
        } else if (kinds[i] == JointKind::prismatic) {
            pri += errors[i];
            ++out.prismatic_count;
        }
    }
    if (out.revolute_count == 0 && out.prismatic_count == 0)
        throw Error(ErrorCode::invalid_argument, "mean joint error of an empty sequence");
    if (out.revolute_count > 0)
        out.revolute_deg = rev / out.revolute_count;
    if (out.prismatic_count > 0)
        out.prismatic_mm = pri / out.prismatic_count;
    return out;
}

JointErrorMeans mean_joint_error(std::span<const EvalRecord> records) {
    std::vector<double> errors;
    std::vector<JointKind> kinds;
    for (const auto &r : records) {
        errors.insert(errors.end(), r.joint_errors.begin(), r.joint_errors.end());
        kinds.insert(kinds.end(), r.joint_kinds.begin(), r.joint_kinds.end());
    }
    return mean_joint_error(errors, kinds);
}

std::vector<StratumRow> stratify_by_inframe(std::span<const EvalRecord> records, double max_threshold) {
    std::map<int, std::vector<double>, std::greater<>> groups;
    for (const auto &r : records)
        groups[r.inframe_count].push_back(r.add);
    std::vector<StratumRow> rows;
    for (const auto &[count, adds] : groups)
        rows.push_back({count, static_cast<int>(adds.size()), auc(adds, max_threshold), mean(adds)});
    return rows;
}

std::string strata_csv(const std::vector<StratumRow> &rows) {
    std::ostringstream out;
    out << "inframe_kps,images,auc,mean_add\n";
    for (const auto &r : rows)
        out << r.inframe << "," << r.images << "," << format6(r.auc) << "," << format6(r.mean_add) << "\n";
    return out.str();
}

double median(std::vector<double> values) {
    if (values.empty())
        throw Error(ErrorCode::invalid_argument, "median of an empty sequence");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MetricsSummary summarize(std::span<const EvalRecord> records, double max_threshold) {
    if (records.empty())
        throw Error(ErrorCode::invalid_argument, "no records to summarize");
    MetricsSummary s;
    std::vector<double> adds, geo, trans, depth;
    std::vector<Vec3> euler;
    for (const auto &r : records) {
        adds.push_back(r.add);
        geo.push_back(r.geodesic_error);
        trans.push_back(r.translation_error);
        depth.push_back(r.depth_error);
        euler.push_back(r.euler_errors);
    }
    s.images = static_cast<int>(records.size());
    s.auc = auc(adds, max_threshold);
    s.mean_add = mean_add(adds);
    s.median_add = median(adds);
    bool any_joint = false;
    for (const auto &r : records)
        any_joint = any_joint || !r.joint_errors.empty();
    if (any_joint)
        s.joints = mean_joint_error(records);
    s.mean_rotation_error = mean_rotation_error(euler);
    s.mean_geodesic_error = mean(geo);
    s.mean_translation_error = mean(trans);
    s.mean_depth_error = mean_depth_error(depth);
    return s;
}

std::string metrics_report(const MetricsSummary &s) {
    std::ostringstream out;
    out << "images = " << s.images << "\n";
    out << "auc = " << format6(s.auc) << "\n";
    out << "mean_add = " << format6(s.mean_add) << "\n";
    out << "median_add = " << format6(s.median_add) << "\n";
    out << "mean_joint_error_revolute_deg = " << format6(s.joints.revolute_deg) << "\n";
    out << "mean_joint_error_prismatic_mm = " << format6(s.joints.prismatic_mm) << "\n";
    out << "mean_rotation_error_deg = " << format6(s.mean_rotation_error) << "\n";
    out << "mean_geodesic_error_deg = " << format6(s.mean_geodesic_error) << "\n";
    out << "mean_translation_error_mm = " << format6(s.mean_translation_error) << "\n";
    out << "mean_depth_error_mm = " << format6(s.mean_depth_error) << "\n";
    if (s.has_mask_consistency)
        out << "mean_mask_consistency = " << format6(s.mean_mask_consistency) << "\n";
    return out.str();
}

}  // namespace holopose
