#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <vector>

#include "pba/lm.hpp"
#include "pba/solver.hpp"
#include "pba/synth.hpp"

namespace pba {

struct BenchConfig {
  std::vector<int> ks{10, 100, 1000};
  std::vector<Method> methods{Method::reduced, Method::direct};
  int n_poses = 20;
  int repeats = 5;
  std::uint64_t seed = 1;
};

struct BenchPoint {
  int k = 0;
  Method method = Method::reduced;
  int observations = 0;
  double assembly_seconds = 0.0;  // one normal-equation assembly, best of repeats
};

namespace detail {

template <typename Model>
double time_assembly(const Model& model, const ProblemState& state, int repeats) {
  using Clock = std::chrono::steady_clock;
  double best = std::numeric_limits<double>::infinity();
  double sink = 0.0;
  for (int r = 0; r < repeats; ++r) {
    // Enough inner runs that a sample lasts well above timer resolution.
    int inner = 1;
    double elapsed = 0.0;
    for (;;) {
      const auto t0 = Clock::now();
      for (int i = 0; i < inner; ++i) sink += assemble(model, state).cost;
      elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
      if (elapsed > 0.02 || inner >= (1 << 20)) break;
      inner *= 4;
    }
    best = std::min(best, elapsed / inner);
  }
  volatile double keep = sink;
  (void)keep;
  return best;
}

}  // namespace detail

/// Times one assembly of J^T J and J^T delta per method and per K. All K share
/// the scene generated at the largest K; smaller K keep each observation's
/// first K points.
inline std::vector<BenchPoint> run_bench(const BenchConfig& cfg) {
  if (cfg.ks.empty()) throw InvalidInput("bench needs at least one K");
  SceneSpec spec;
  spec.n_poses = cfg.n_poses;
  spec.points_per_observation = *std::max_element(cfg.ks.begin(), cfg.ks.end());
  spec.seed = cfg.seed;
  const GeneratedScene full = generate(spec);
  const ProblemState state = make_initial_state(full.graph, noise_level(1, cfg.seed));

  std::vector<BenchPoint> out;
  for (int k : cfg.ks) {
    if (k < 1) throw InvalidInput("bench K must be positive");
    ProblemGraph graph = full.graph;
    for (auto& obs : graph.observations) obs.points.resize(static_cast<std::size_t>(k));
    for (Method m : cfg.methods) {
      BenchPoint p;
      p.k = k;
      p.method = m;
      p.observations = static_cast<int>(graph.observations.size());
      switch (m) {
        case Method::reduced:
          p.assembly_seconds = detail::time_assembly(ReducedModel(graph), state, cfg.repeats);
          break;
        case Method::direct:
          p.assembly_seconds = detail::time_assembly(DirectModel(graph), state, cfg.repeats);
          break;
        case Method::pl2pl: {
          Summaries s = summarize(graph);
          const Pl2plModel model(std::move(s.summaries), graph.num_poses(), graph.num_planes());
          p.assembly_seconds = detail::time_assembly(model, state, cfg.repeats);
          break;
        }
      }
      out.push_back(p);
    }
  }
  return out;
}

inline double bench_time(const std::vector<BenchPoint>& pts, int k, Method m) {
  for (const auto& p : pts) {
    if (p.k == k && p.method == m) return p.assembly_seconds;
  }
  throw InvalidInput("no bench point for requested K and method");
}

}  // namespace pba
