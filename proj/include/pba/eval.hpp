#pragma once

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "pba/errors.hpp"
#include "pba/geometry.hpp"
#include "pba/lm.hpp"

namespace pba {

struct AteResult {
  double ate_rot = 0.0;    // degrees
  double ate_trans = 0.0;  // meters
  std::vector<double> per_pose_rot_err;
  std::vector<double> per_pose_trans_err;
};

/// Absolute trajectory error without alignment (the anchor pose is shared).
/// Per pose: dR = R R_hat^T, dt = t - dR t_hat; the rotation error is the
/// angle of dR.
inline AteResult ate(const std::vector<Pose>& ground_truth, const std::vector<Pose>& estimate) {
  if (ground_truth.size() != estimate.size()) {
    throw LengthMismatch("trajectories have different lengths");
  }
  if (ground_truth.empty()) throw LengthMismatch("trajectories are empty");
  AteResult r;
  r.per_pose_rot_err.reserve(ground_truth.size());
  r.per_pose_trans_err.reserve(ground_truth.size());
  double sum_rot = 0.0;
  double sum_trans = 0.0;
  for (std::size_t k = 0; k < ground_truth.size(); ++k) {
    const Mat3 dr = ground_truth[k].rotation * estimate[k].rotation.transpose();
    const Vec3 dt = ground_truth[k].translation - dr * estimate[k].translation;
    const double angle = rad_to_deg(rotation_angle(dr));
    const double dist = dt.norm();
    r.per_pose_rot_err.push_back(angle);
    r.per_pose_trans_err.push_back(dist);
    sum_rot += angle * angle;
    sum_trans += dist * dist;
  }
  const double n = static_cast<double>(ground_truth.size());
  r.ate_rot = std::sqrt(sum_rot / n);
  r.ate_trans = std::sqrt(sum_trans / n);
  return r;
}

struct RunRecord {
  std::string method;
  SolveReport report;
  AteResult ate;
};

struct ComparisonRow {
  std::string method;
  int iterations = 0;
  double ate_rot = 0.0;
  double ate_trans = 0.0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double qr_time = 0.0;
  double init_time = 0.0;
  double optimization_time = 0.0;
  double per_iteration_time = 0.0;
};

inline std::vector<ComparisonRow> compare_runs(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw InvalidInput("compare_runs needs at least one run");
  std::vector<ComparisonRow> rows;
  rows.reserve(runs.size());
  for (const auto& run : runs) {
    const SolveReport& rep = run.report;
    ComparisonRow row;
    row.method = run.method.empty() ? std::string(to_string(rep.method)) : run.method;
    row.iterations = rep.iterations;
    row.ate_rot = run.ate.ate_rot;
    row.ate_trans = run.ate.ate_trans;
    row.initial_cost = rep.initial_cost;
    row.final_cost = rep.final_cost;
    row.qr_time = rep.qr_time;
    row.init_time = rep.init_time;
    row.optimization_time = rep.optimization_time;
    row.per_iteration_time = rep.iterations > 0 ? rep.optimization_time / rep.iterations : 0.0;
    rows.push_back(row);
  }
  return rows;
}

inline constexpr const char* kComparisonHeader =
    "method,iterations,ate_rot,ate_trans,initial_cost,final_cost,qr_time,init_time,"
    "optimization_time,per_iteration_time";

/// 17 significant digits, '.' separator regardless of locale.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows,
                                 bool header = true) {
  if (header) os << kComparisonHeader << '\n';
  for (const auto& r : rows) {
    os << r.method << ',' << r.iterations << ',' << format_double(r.ate_rot) << ','
       << format_double(r.ate_trans) << ',' << format_double(r.initial_cost) << ','
       << format_double(r.final_cost) << ',' << format_double(r.qr_time) << ','
       << format_double(r.init_time) << ',' << format_double(r.optimization_time) << ','
       << format_double(r.per_iteration_time) << '\n';
  }
}

}  // namespace pba
