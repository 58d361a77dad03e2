#pragma once

#include <chrono>
#include <span>
#include <vector>

#include "pba/errors.hpp"
#include "pba/lm.hpp"
#include "pba/pl2pl.hpp"
#include "pba/problem.hpp"
#include "pba/reduction.hpp"

namespace pba {

namespace detail {
inline std::vector<PlaneHesse> planes_of(const ProblemState& state) {
  std::vector<PlaneHesse> planes;
  planes.reserve(state.plane_cps.size());
  for (const auto& cp : state.plane_cps) planes.push_back(cp_to_plane(cp));
  return planes;
}
}  // namespace detail

/// Point-to-plane model on cached reduced blocks. The points are not kept:
/// after construction every iteration costs O(1) per observation.
class ReducedModel {
 public:
  explicit ReducedModel(const ProblemGraph& graph)
      : num_poses_(graph.num_poses()), num_planes_(graph.num_planes()) {
    blocks_.reserve(graph.observations.size());
    for (const auto& obs : graph.observations) blocks_.push_back(factorize(obs));
  }

  [[nodiscard]] int num_poses() const { return num_poses_; }
  [[nodiscard]] int num_planes() const { return num_planes_; }
  [[nodiscard]] const std::vector<ReducedBlock>& blocks() const { return blocks_; }

  [[nodiscard]] double cost(const ProblemState& state) const {
    const auto planes = detail::planes_of(state);
    double c = 0.0;
    for (const auto& b : blocks_) {
      c += (b.m * coefficient_vector(state.poses[b.pose_index], planes[b.plane_index]))
               .squaredNorm();
    }
    return c;
  }

  template <typename Sink>
  void for_each_block(const ProblemState& state, Sink&& sink) const {
    for (const auto& b : blocks_) {
      const StateCoefficients sc =
          state_coefficients(state.poses[b.pose_index], state.plane_cps[b.plane_index]);
      const ReducedSystemBlocks rb = reduced_blocks(b, sc, b.pose_index == 0);
      sink(b.pose_index, b.plane_index, rb.has_pose, rb.j_pose, rb.j_plane, rb.delta_r);
    }
  }

 private:
  int num_poses_;
  int num_planes_;
  std::vector<ReducedBlock> blocks_;
};

/// Point-to-plane model evaluated on every point each iteration.
class DirectModel {
 public:
  explicit DirectModel(const ProblemGraph& graph) : graph_(&graph) {}

  [[nodiscard]] int num_poses() const { return graph_->num_poses(); }
  [[nodiscard]] int num_planes() const { return graph_->num_planes(); }

  [[nodiscard]] double cost(const ProblemState& state) const {
    const auto planes = detail::planes_of(state);
    double c = 0.0;
    for (const auto& obs : graph_->observations) {
      const auto nu = coefficient_vector(state.poses[obs.pose_index], planes[obs.plane_index]);
      for (const Vec3& p : obs.points) {
        const double r = coefficient_row(p).dot(nu.transpose());
        c += r * r;
      }
    }
    return c;
  }

  template <typename Sink>
  void for_each_block(const ProblemState& state, Sink&& sink) const {
    for (const auto& obs : graph_->observations) {
      const StateCoefficients sc =
          state_coefficients(state.poses[obs.pose_index], state.plane_cps[obs.plane_index]);
      const FullSystemBlocks fb =
          full_blocks(std::span<const Vec3>(obs.points), sc, obs.pose_index == 0);
      sink(obs.pose_index, obs.plane_index, fb.has_pose, fb.j_pose, fb.j_plane, fb.delta);
    }
  }

 private:
  const ProblemGraph* graph_;
};

/// Normal equations of the point-to-plane cost through either provider.
/// Method::pl2pl is not a point-to-plane provider and is rejected.
inline NormalEquations assemble(const ProblemGraph& graph, const ProblemState& state,
                                Method provider) {
  switch (provider) {
    case Method::reduced: return assemble(ReducedModel(graph), state);
    case Method::direct: return assemble(DirectModel(graph), state);
    case Method::pl2pl: break;
  }
  throw InvalidInput("assemble: provider must be reduced or direct");
}

inline void check_state_shape(const ProblemGraph& graph, const ProblemState& state) {
  if (state.poses.size() != graph.poses.size() || state.plane_cps.size() != graph.planes.size()) {
    throw InvalidInput("state does not match graph dimensions");
  }
}

/// Runs Levenberg-Marquardt with the method selected in `config`.
/// Reduced mode records its one-time factorization time in report.qr_time.
inline SolveResult solve(const ProblemGraph& graph, const ProblemState& initial_state,
                         const LMConfig& config) {
  using Clock = std::chrono::steady_clock;
  const auto seconds = [](Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
  };

  auto t0 = Clock::now();
  graph.validate();
  check_state_shape(graph, initial_state);
  const double check_time = seconds(t0);

  switch (config.method) {
    case Method::reduced: {
      t0 = Clock::now();
      const ReducedModel model(graph);
      const double qr_time = seconds(t0);
      SolveResult r = run_lm(model, initial_state, config);
      r.report.qr_time = qr_time;
      r.report.init_time = check_time;
      return r;
    }
    case Method::direct: {
      SolveResult r = run_lm(DirectModel(graph), initial_state, config);
      r.report.init_time = check_time;
      return r;
    }
    case Method::pl2pl: {
      SolveResult r = solve_pl2pl(graph, initial_state, config);
      r.report.init_time += check_time;
      return r;
    }
  }
  throw InvalidInput("unknown method");
}

}  // namespace pba
