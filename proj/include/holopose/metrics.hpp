#pragma once

#include "holopose/kinematics.hpp"
#include "holopose/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace holopose {

/// Per-scene evaluation of one prediction against ground truth.
struct EvalRecord {
    long scene_id = 0;
    double add = 0.0;                  // mm
    std::vector<double> joint_errors;  // |q_pred - q_gt| per joint, degrees or mm
    std::vector<JointKind> joint_kinds;
    Vec3 euler_errors = Vec3::Zero();  // degrees
    double geodesic_error = 0.0;       // degrees
    double translation_error = 0.0;    // mm
    double depth_error = 0.0;          // mm
    int inframe_count = 0;
};

/// Mean per-keypoint Euclidean distance, mm.
double add_distance(const KeypointSet &P_pred, const KeypointSet &P_gt);

/// Area under the accuracy-vs-threshold curve on [0, max_threshold], percent.
/// Each value v contributes max(0, max - min(v, max)) / max / n.
double auc(std::span<const double> add_values, double max_threshold = 100.0);

double mean(std::span<const double> values);
double mean_add(std::span<const double> add_values);
double mean_depth_error(std::span<const double> depth_errors);

/// Mean of per-axis Euler errors pooled over all axes and records, degrees.
double mean_rotation_error(std::span<const Vec3> euler_errors);

struct JointErrorMeans {
    double revolute_deg = 0.0;
    double prismatic_mm = 0.0;
    int revolute_count = 0;   // number of pooled values
    int prismatic_count = 0;
};

/// Pools absolute joint errors by joint kind. A kind without values reports 0
/// with count 0. Throws when both are empty.
JointErrorMeans mean_joint_error(std::span<const double> errors, std::span<const JointKind> kinds);
JointErrorMeans mean_joint_error(std::span<const EvalRecord> records);

struct StratumRow {
    int inframe = 0;
    int images = 0;
    double auc = 0.0;
    double mean_add = 0.0;
};

/// One row per observed in-frame keypoint count, ordered by decreasing count.
std::vector<StratumRow> stratify_by_inframe(std::span<const EvalRecord> records, double max_threshold = 100.0);

/// CSV with header `inframe_kps,images,auc,mean_add`.
std::string strata_csv(const std::vector<StratumRow> &rows);

struct MetricsSummary {
    int images = 0;
    double auc = 0.0;
    double mean_add = 0.0;
    double median_add = 0.0;
    JointErrorMeans joints;
    double mean_rotation_error = 0.0;  // Euler, degrees
    double mean_geodesic_error = 0.0;  // degrees
    double mean_translation_error = 0.0;
    double mean_depth_error = 0.0;
    bool has_mask_consistency = false;
    double mean_mask_consistency = 0.0;
};

MetricsSummary summarize(std::span<const EvalRecord> records, double max_threshold = 100.0);

/// `key = value` lines with 6 significant digits.
std::string metrics_report(const MetricsSummary &summary);

double median(std::vector<double> values);

/// Fixed 6-significant-digit formatting used by every text report.
std::string format6(double value);

}  // namespace holopose
