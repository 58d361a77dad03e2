#pragma once

#include <chrono>
#include <cmath>
#include <concepts>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "pba/errors.hpp"
#include "pba/geometry.hpp"
#include "pba/problem.hpp"

namespace pba {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

enum class Method { reduced, direct, pl2pl };
enum class Termination { function_tol, parameter_tol, max_iter };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::reduced: return "reduced";
    case Method::direct: return "direct";
    case Method::pl2pl: return "pl2pl";
  }
  return "?";
}

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::function_tol: return "function_tol";
    case Termination::parameter_tol: return "parameter_tol";
    case Termination::max_iter: return "max_iter";
  }
  return "?";
}

struct LMConfig {
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  int max_iterations = 1000;
  double function_tolerance = 1e-10;
  double parameter_tolerance = 1e-10;
  Method method = Method::reduced;

  void validate() const {
    if (!(function_tolerance > 0.0) || !(parameter_tolerance > 0.0)) {
      throw InvalidInput("tolerances must be positive");
    }
    if (max_iterations < 1) throw InvalidInput("max_iterations must be >= 1");
    if (!(lambda_up > 1.0) || !(lambda_down > 1.0)) {
      throw InvalidInput("lambda factors must exceed 1");
    }
    if (!(lambda_init > 0.0)) throw InvalidInput("lambda_init must be positive");
  }
};

/// Block normal equations J^T J, J^T delta over variable poses 1..N-1 and all
/// planes. Pose blocks are stored at index (pose - 1); the anchor has none.
struct NormalEquations {
  int num_poses = 0;
  int num_planes = 0;
  std::vector<Mat6> a_blocks;
  std::vector<Mat3> b_blocks;
  std::map<std::pair<int, int>, Mat63> w_blocks;  // keyed (pose, plane)
  std::vector<Vec6> grad_pose;
  std::vector<Vec3> grad_plane;
  double cost = 0.0;

  NormalEquations() = default;
  NormalEquations(int n_poses, int n_planes)
      : num_poses(n_poses),
        num_planes(n_planes),
        a_blocks(static_cast<std::size_t>(std::max(n_poses - 1, 0)), Mat6::Zero()),
        b_blocks(static_cast<std::size_t>(n_planes), Mat3::Zero()),
        grad_pose(static_cast<std::size_t>(std::max(n_poses - 1, 0)), Vec6::Zero()),
        grad_plane(static_cast<std::size_t>(n_planes), Vec3::Zero()) {}

  /// Accumulates one residual block: rows of J w.r.t. the pose increment
  /// (ignored when !has_pose), the plane increment, and the residual.
  template <typename JP, typename JL, typename R>
  void add(int pose, int plane, bool has_pose, const Eigen::MatrixBase<JP>& jp,
           const Eigen::MatrixBase<JL>& jl, const Eigen::MatrixBase<R>& r) {
    b_blocks[plane].noalias() += jl.transpose() * jl;
    grad_plane[plane].noalias() += jl.transpose() * r;
    cost += r.squaredNorm();
    if (!has_pose) return;
    a_blocks[pose - 1].noalias() += jp.transpose() * jp;
    grad_pose[pose - 1].noalias() += jp.transpose() * r;
    auto [it, inserted] = w_blocks.try_emplace({pose, plane}, Mat63::Zero());
    it->second.noalias() += jp.transpose() * jl;
  }
};

/// A residual model exposes its cost and streams its linearized blocks to a
/// sink with signature (pose, plane, has_pose, J_pose, J_plane, residual).
template <typename M>
concept ResidualModel = requires(const M& m, const ProblemState& s) {
  { m.num_poses() } -> std::convertible_to<int>;
  { m.num_planes() } -> std::convertible_to<int>;
  { m.cost(s) } -> std::convertible_to<double>;
};

template <ResidualModel Model>
NormalEquations assemble(const Model& model, const ProblemState& state) {
  NormalEquations ne(model.num_poses(), model.num_planes());
  model.for_each_block(state, [&ne](int pose, int plane, bool has_pose, const auto& jp,
                                    const auto& jl, const auto& r) {
    ne.add(pose, plane, has_pose, jp, jl, r);
  });
  return ne;
}

/// Increment for every pose (entry 0, the anchor, stays zero) and plane.
struct Step {
  std::vector<Vec6> pose;
  std::vector<Vec3> plane;

  [[nodiscard]] double norm() const {
    double s = 0.0;
    for (const auto& v : pose) s += v.squaredNorm();
    for (const auto& v : plane) s += v.squaredNorm();
    return std::sqrt(s);
  }
};

/// Solves (J^T J + lambda I) xi = -J^T delta by eliminating the plane blocks:
/// S = A + lambda I - W (B + lambda I)^-1 W^T is factored densely with LLT,
/// then planes are recovered by back-substitution.
inline Step lm_step(const NormalEquations& ne, double lambda) {
  const int np = std::max(ne.num_poses - 1, 0);
  const int nl = ne.num_planes;

  std::vector<Mat3> b_inv(static_cast<std::size_t>(nl));
  for (int j = 0; j < nl; ++j) {
    const Mat3 damped = ne.b_blocks[j] + lambda * Mat3::Identity();
    Eigen::LLT<Mat3> llt(damped);
    if (llt.info() != Eigen::Success) {
      throw SingularSystem("plane block " + std::to_string(j) + " not positive definite");
    }
    b_inv[j] = llt.solve(Mat3::Identity());
  }

  // W blocks grouped by plane, poses ascending within each group.
  std::vector<std::vector<std::pair<int, const Mat63*>>> by_plane(static_cast<std::size_t>(nl));
  for (const auto& [key, w] : ne.w_blocks) by_plane[key.second].emplace_back(key.first, &w);

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(6 * np, 6 * np);
  Eigen::VectorXd rhs(6 * np);
  for (int i = 0; i < np; ++i) {
    s.block<6, 6>(6 * i, 6 * i) = ne.a_blocks[i] + lambda * Mat6::Identity();
    rhs.segment<6>(6 * i) = -ne.grad_pose[i];
  }
  std::vector<Mat63> y;
  for (int j = 0; j < nl; ++j) {
    const auto& group = by_plane[j];
    y.resize(group.size());
    for (std::size_t a = 0; a < group.size(); ++a) {
      y[a].noalias() = *group[a].second * b_inv[j];
      rhs.segment<6>(6 * (group[a].first - 1)).noalias() += y[a] * ne.grad_plane[j];
    }
    // Lower triangle only; LLT reads nothing else.
    for (std::size_t a = 0; a < group.size(); ++a) {
      const int row = group[a].first - 1;
      for (std::size_t b = 0; b <= a; ++b) {
        const int col = group[b].first - 1;
        s.block<6, 6>(6 * row, 6 * col).noalias() -= y[a] * group[b].second->transpose();
      }
    }
  }

  Step step;
  step.pose.assign(static_cast<std::size_t>(std::max(ne.num_poses, 0)), Vec6::Zero());
  step.plane.assign(static_cast<std::size_t>(nl), Vec3::Zero());

  Eigen::VectorXd xp;
  if (np > 0) {
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(s);
    if (llt.info() != Eigen::Success) {
      throw SingularSystem("reduced pose system not positive definite");
    }
    xp = llt.solve(rhs);
    if (!xp.allFinite()) throw SingularSystem("reduced pose system produced non-finite step");
    for (int i = 0; i < np; ++i) step.pose[i + 1] = xp.segment<6>(6 * i);
  }

  for (int j = 0; j < nl; ++j) {
    Vec3 r = -ne.grad_plane[j];
    for (const auto& [pose, w] : by_plane[j]) r.noalias() -= w->transpose() * step.pose[pose];
    step.plane[j] = b_inv[j] * r;
  }
  return step;
}

/// Applies a step: rotation right-increment, additive translation and CP.
/// Pose 0 is copied untouched.
inline ProblemState apply_step(const ProblemState& state, const Step& step) {
  ProblemState out = state;
  for (std::size_t i = 1; i < out.poses.size(); ++i) {
    Pose& p = out.poses[i];
    p.rotation = p.rotation * rotation_from_angle_axis(step.pose[i].head<3>());
    if ((p.rotation.transpose() * p.rotation - Mat3::Identity()).norm() > 1e-9) {
      p.rotation = project_to_rotation(p.rotation);
    }
    p.translation += step.pose[i].tail<3>();
  }
  for (std::size_t j = 0; j < out.plane_cps.size(); ++j) out.plane_cps[j].cp += step.plane[j];
  return out;
}

/// Norm of the non-anchor translations and plane CP vectors; rotations enter
/// through local increments whose value at the current iterate is zero.
inline double state_norm(const ProblemState& state) {
  double s = 0.0;
  for (std::size_t i = 1; i < state.poses.size(); ++i) s += state.poses[i].translation.squaredNorm();
  for (const auto& cp : state.plane_cps) s += cp.cp.squaredNorm();
  return std::sqrt(s);
}

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;  // cost after this iteration (unchanged on rejection)
  double lambda = 0.0;  // damping used to compute this iteration's step
  double step_norm = 0.0;
  double wall_time = 0.0;  // seconds since the start of the LM loop
  bool accepted = false;
};

struct SolveReport {
  Method method = Method::reduced;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  Termination termination = Termination::max_iter;
  std::vector<IterationRecord> trace;
  double qr_time = 0.0;
  double init_time = 0.0;
  double optimization_time = 0.0;
};

struct SolveResult {
  ProblemState state;
  SolveReport report;
};

namespace detail {
using Clock = std::chrono::steady_clock;
inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace detail

/// Classic Levenberg-Marquardt over any ResidualModel.
///
/// Each attempted step is one iteration. A step is accepted when it strictly
/// lowers the cost (lambda /= lambda_down), otherwise rejected
/// (lambda *= lambda_up). Stops when a trial step changes the cost by at
/// most ftol * cost, when ||xi|| <= ptol * (||state|| + ptol), or after
/// max_iterations. Trial states whose planes degenerate count as rejected.
template <ResidualModel Model>
SolveResult run_lm(const Model& model, const ProblemState& initial, const LMConfig& cfg) {
  cfg.validate();
  const auto t0 = detail::Clock::now();

  SolveResult result;
  SolveReport& report = result.report;
  report.method = cfg.method;
  ProblemState state = initial;

  NormalEquations ne = assemble(model, state);
  double cost = ne.cost;
  if (!std::isfinite(cost)) throw DivergedNaN("initial cost is not finite");
  report.initial_cost = cost;

  double lambda = cfg.lambda_init;
  bool stale = false;
  bool done = false;
  for (int iter = 1; iter <= cfg.max_iterations && !done; ++iter) {
    if (stale) {
      ne = assemble(model, state);
      stale = false;
    }
    IterationRecord rec;
    rec.iteration = iter;
    rec.lambda = lambda;

    Step step;
    try {
      step = lm_step(ne, lambda);
    } catch (const SingularSystem&) {
      lambda *= cfg.lambda_up;
      rec.cost = cost;
      rec.wall_time = detail::seconds_since(t0);
      report.trace.push_back(rec);
      continue;
    }
    rec.step_norm = step.norm();
    if (!std::isfinite(rec.step_norm)) throw DivergedNaN("non-finite LM step");

    ProblemState trial = apply_step(state, step);
    double trial_cost = std::numeric_limits<double>::infinity();
    try {
      trial_cost = model.cost(trial);
      if (!std::isfinite(trial_cost)) throw DivergedNaN("cost became non-finite");
    } catch (const DegeneratePlane&) {
      // stays +inf, the step is rejected
    }

    // Cost change of the trial, accepted or not.
    if (std::abs(cost - trial_cost) <= cfg.function_tolerance * (cost + 1e-20)) {
      report.termination = Termination::function_tol;
      done = true;
    }
    if (trial_cost < cost) {
      state = std::move(trial);
      cost = trial_cost;
      lambda /= cfg.lambda_down;
      stale = true;
      rec.accepted = true;
    } else {
      lambda *= cfg.lambda_up;
    }
    if (!done && rec.step_norm <= cfg.parameter_tolerance *
                                      (state_norm(state) + cfg.parameter_tolerance)) {
      report.termination = Termination::parameter_tol;
      done = true;
    }
    rec.cost = cost;
    rec.wall_time = detail::seconds_since(t0);
    report.trace.push_back(rec);
  }
  if (!done) report.termination = Termination::max_iter;

  report.iterations = static_cast<int>(report.trace.size());
  report.final_cost = cost;
  report.optimization_time = detail::seconds_since(t0);
  result.state = std::move(state);
  return result;
}

}  // namespace pba
