// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "test_util.hpp"

namespace {

using namespace pba;
using testing::Rng;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

// 1: thin QR reconstructs the coefficient matrix.
Outcome criterion_1() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const int ks[] = {1, 2, 3, 4, 5, 50, 500};
  double worst_recon = 0.0, worst_orth = 0.0;
  for (int set = 0; set < 200; ++set) {
    const int k = ks[set % 7];
    std::vector<Vec3> pts;
    switch ((set / 7) % 3) {
      case 0: pts = testing::random_points(rng, k, 5.0); break;
      case 1: {  // rank-deficient: a few distinct points repeated
        const auto base = testing::random_points(rng, 2, 5.0);
        for (int i = 0; i < k; ++i) pts.push_back(base[static_cast<std::size_t>(i % 2)]);
        break;
      }
      default: {  // exactly coplanar
        const Vec3 o = testing::random_vec(rng, 3.0);
        const Vec3 u = testing::random_vec(rng, 2.0);
        const Vec3 v = testing::random_vec(rng, 2.0);
        for (int i = 0; i < k; ++i) {
          pts.push_back(o + testing::uniform(rng, -1, 1) * u + testing::uniform(rng, -1, 1) * v);
        }
      }
    }
    const ThinQr qr = thin_qr(pts);
    const ReducedBlock b = factorize(pts);
    const Eigen::MatrixXd c = build_coefficients(pts);
    const Eigen::MatrixXd recon = qr.q * Eigen::MatrixXd(b.m);
    worst_recon = std::max(worst_recon, (recon - c).norm() / c.norm());
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(qr.q.cols(), qr.q.cols());
    worst_orth = std::max(worst_orth, (qr.q.transpose() * qr.q - eye).norm());
    if (b.rows() != std::min(k, 4)) return {false, "unexpected reduced row count"};
  }
  const double t = seconds_since(t0);
  return {worst_recon <= 1e-10 && worst_orth <= 1e-12 && t < 5.0,
          fmt("max ||QM-C||/||C|| = %.2e, max ||Q^TQ-I|| = %.2e, %.2f s", worst_recon, worst_orth,
              t)};
}

double block_rel(const Eigen::Ref<const Eigen::MatrixXd>& reduced,
                 const Eigen::Ref<const Eigen::MatrixXd>& full) {
  return (reduced - full).norm() / std::max(full.norm(), 1e-300);
}

// 2: reduced and full normal equations agree blockwise.
Outcome criterion_2() {
  const auto t0 = Clock::now();
  Rng rng(202);
  double worst = 0.0;
  for (int g = 0; g < 50; ++g) {
    const int n = 2 + static_cast<int>(rng() % 9);
    const int m = 1 + static_cast<int>(rng() % 6);
    const auto inst = testing::random_instance(rng, n, m, 1, 200);
    const auto r = assemble(inst.graph, inst.state, Method::reduced);
    const auto d = assemble(inst.graph, inst.state, Method::direct);
    for (std::size_t i = 0; i < d.a_blocks.size(); ++i) {
      worst = std::max(worst, block_rel(r.a_blocks[i], d.a_blocks[i]));
      worst = std::max(worst, block_rel(r.grad_pose[i], d.grad_pose[i]));
    }
    for (std::size_t j = 0; j < d.b_blocks.size(); ++j) {
      worst = std::max(worst, block_rel(r.b_blocks[j], d.b_blocks[j]));
      worst = std::max(worst, block_rel(r.grad_plane[j], d.grad_plane[j]));
    }
    if (r.w_blocks.size() != d.w_blocks.size()) return {false, "coupling block sets differ"};
    for (const auto& [key, w] : d.w_blocks) worst = std::max(worst, block_rel(r.w_blocks.at(key), w));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 30.0, fmt("max blockwise relative error %.2e, %.2f s", worst, t)};
}

// 3: reduced and direct LM produce the same iterate sequence.
Outcome criterion_3() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int mismatched = 0;
  int total_iters = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec spec;
    spec.n_poses = 30;
    spec.points_per_observation = 100;
    spec.seed = 300 + seed;
    const auto scene = generate(spec);
    const auto init = make_initial_state(scene.graph, noise_level(2, seed));
    LMConfig cfg;
    cfg.method = Method::reduced;
    const auto r = solve(scene.graph, init, cfg);
    cfg.method = Method::direct;
    const auto d = solve(scene.graph, init, cfg);
    if (r.report.iterations != d.report.iterations ||
        r.report.termination != d.report.termination) {
      ++mismatched;
      continue;
    }
    total_iters += r.report.iterations;
    for (std::size_t k = 0; k < r.report.trace.size(); ++k) {
      const double a = r.report.trace[k].cost;
      const double b = d.report.trace[k].cost;
      worst = std::max(worst, std::abs(a - b) / std::max(std::abs(b), 1e-300));
    }
  }
  const double t = seconds_since(t0);
  return {mismatched == 0 && worst <= 1e-8 && t < 120.0,
          fmt("max per-iteration cost difference %.2e over %.0f iterations, %.0f runs with "
              "differing length/termination, %.1f s",
              worst, total_iters, mismatched, t)};
}

// 4: analytic Jacobians against central differences.
Outcome criterion_4() {
  Rng rng(404);
  const double h = 1e-6;
  double worst_pose = 0.0, worst_plane = 0.0, worst_pl2pl = 0.0;
  int states = 0;
  while (states < 100) {
    const Pose pose = testing::random_pose(rng);
    const PlaneCP cp = plane_to_cp(testing::random_plane(rng));
    if (std::abs(transform_plane(pose, cp_to_plane(cp)).offset) < 0.1) continue;
    ++states;
    const auto sc = state_coefficients(pose, cp);
    const PlaneObservationSummary summary{1, 0, testing::random_plane(rng), 1.0};
    const auto lin = pl2pl_linearize(pose, cp, summary);

    Eigen::Matrix<double, 13, 6> fd_pose;
    Eigen::Matrix<double, 13, 3> fd_plane;
    Eigen::Matrix<double, 3, 9> fd_pl2pl;
    const auto pl2pl_at = [&](const Pose& p, const PlaneCP& c) {
      // independent oracle: CP difference through transform_plane
      return Vec3(plane_to_cp(summary.local_plane).cp -
                  plane_to_cp(transform_plane(p, cp_to_plane(c))).cp);
    };
    for (int dof = 0; dof < 6; ++dof) {
      Vec6 e = Vec6::Zero();
      e(dof) = h;
      const Pose pp = testing::retract(pose, e);
      const Pose pm = testing::retract(pose, -e);
      fd_pose.col(dof) =
          (state_coefficients(pp, cp).nu - state_coefficients(pm, cp).nu) / (2 * h);
      fd_pl2pl.col(dof) = (pl2pl_at(pp, cp) - pl2pl_at(pm, cp)) / (2 * h);
    }
    for (int dof = 0; dof < 3; ++dof) {
      PlaneCP cpp = cp, cpm = cp;
      cpp.cp(dof) += h;
      cpm.cp(dof) -= h;
      fd_plane.col(dof) =
          (state_coefficients(pose, cpp).nu - state_coefficients(pose, cpm).nu) / (2 * h);
      fd_pl2pl.col(6 + dof) = (pl2pl_at(pose, cpp) - pl2pl_at(pose, cpm)) / (2 * h);
    }
    Eigen::Matrix<double, 3, 9> analytic;
    analytic << lin.j_pose, lin.j_plane;
    worst_pose = std::max(worst_pose, testing::rel_diff(sc.v_pose, fd_pose));
    worst_plane = std::max(worst_plane, testing::rel_diff(sc.v_plane, fd_plane));
    worst_pl2pl = std::max(worst_pl2pl, testing::rel_diff(analytic, fd_pl2pl));
  }
  const bool ok = worst_pose <= 1e-5 && worst_plane <= 1e-5 && worst_pl2pl <= 1e-5;
  return {ok, fmt("max relative error V_pose %.2e, V_plane %.2e, PL2PL %.2e", worst_pose,
                  worst_plane, worst_pl2pl)};
}

ProblemState reanchor(const ProblemState& s, const Pose& g) {
  ProblemState out = s;
  for (auto& p : out.poses) p = pose_compose(g, p);
  for (auto& cp : out.plane_cps) {
    cp = plane_to_cp(transform_plane(pose_inverse(g), cp_to_plane(cp)));
  }
  return out;
}

// 5: point-to-plane cost is invariant to re-anchoring, plane-to-plane is not.
Outcome criterion_5() {
  Rng rng(505);
  const auto inst = testing::random_instance(rng, 8, 5, 20, 100, 0.01, 0.05);
  const double base = total_cost(inst.graph, inst.state);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose g = testing::random_pose(rng, 50.0);
    worst = std::max(worst, std::abs(total_cost(inst.graph, reanchor(inst.state, g)) - base) / base);
  }
  const auto s = summarize(inst.graph);
  const Pl2plModel model(s.summaries, inst.graph.num_poses(), inst.graph.num_planes());
  const double pl_before = model.cost(inst.state);
  const double pl_after = model.cost(reanchor(inst.state, {Mat3::Identity(), Vec3(100, 0, 0)}));
  const double change = std::abs(pl_after - pl_before) / pl_before;
  return {worst <= 1e-9 && change > 1e-6,
          fmt("PBA max relative change %.2e over 100 re-anchorings, PL2PL relative change %.2e "
              "under a 100 m shift",
              worst, change)};
}

struct DeskRun {
  GeneratedScene scene;
  SolveResult result;
  double ate_before = 0.0;
  double wall = 0.0;
};

DeskRun desk_run() {
  SceneSpec spec;
  spec.n_poses = 200;
  spec.extra_planes = 6;
  spec.points_per_observation = 200;
  spec.point_noise_sigma = 0.01;
  spec.seed = 606;
  DeskRun run;
  run.scene = generate(spec);
  const auto init = make_initial_state(run.scene.graph, noise_level(1, 606));
  run.ate_before = ate(run.scene.graph.poses, init.poses).ate_trans;
  const auto t0 = Clock::now();
  run.result = solve(run.scene.graph, init, LMConfig{});
  run.wall = seconds_since(t0);
  return run;
}

// 6: convergence at desk scale.
Outcome criterion_6(const DeskRun& run) {
  const auto& rep = run.result.report;
  const double floor = run.scene.noise_sum_sq;
  const double ate_after = ate(run.scene.graph.poses, run.result.state.poses).ate_trans;
  const bool ok = run.scene.graph.num_planes() == 12 && rep.final_cost <= 2.0 * floor &&
                  ate_after <= 0.1 * run.ate_before && rep.iterations <= 1000 && run.wall <= 60.0;
  return {ok, fmt("final cost %.4g vs noise floor %.4g, ATE_t %.3e -> %.3e m", rep.final_cost,
                  floor, run.ate_before, ate_after) +
                  fmt(", %.0f iterations, %.2f s", rep.iterations, run.wall)};
}

// 9: factorization overhead on the criterion-6 instance.
Outcome criterion_9(const DeskRun& run) {
  const auto& rep = run.result.report;
  const double total = rep.qr_time + rep.init_time + rep.optimization_time;
  return {rep.qr_time > 0.0 && rep.qr_time <= 0.1 * total,
          fmt("QR %.4f s of %.4f s total (%.1f%%)", rep.qr_time, total, 100.0 * rep.qr_time / total)};
}

// 7: PBA at least as accurate as PL2PL from level-3 initializations.
Outcome criterion_7() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SceneSpec spec;
    spec.seed = 700 + seed;
    const auto scene = generate(spec);
    const auto init = make_initial_state(scene.graph, noise_level(3, seed));
    LMConfig cfg;
    const auto pba_res = solve(scene.graph, init, cfg);
    cfg.method = Method::pl2pl;
    const auto pl_res = solve(scene.graph, init, cfg);
    const auto a = ate(scene.graph.poses, pba_res.state.poses);
    const auto b = ate(scene.graph.poses, pl_res.state.poses);
    if (a.ate_rot <= b.ate_rot && a.ate_trans <= b.ate_trans) ++wins;
    detail += fmt(" [%.3g/%.3g deg, %.3g/%.3g m]", a.ate_rot, b.ate_rot, a.ate_trans, b.ate_trans);
  }
  return {wins >= 4, fmt("PBA no worse on %.0f of 5 (PBA/PL2PL):", wins) + detail};
}

// 8: assembly cost flat in K for the reduced path, linear for the direct one.
Outcome criterion_8() {
  const auto pts = run_bench(BenchConfig{});
  const double r10 = bench_time(pts, 10, Method::reduced);
  const double r1000 = bench_time(pts, 1000, Method::reduced);
  const double d10 = bench_time(pts, 10, Method::direct);
  const double d1000 = bench_time(pts, 1000, Method::direct);
  const double reduced_ratio = r1000 / r10;
  const double direct_ratio = d1000 / d10;
  const double speedup = d1000 / r1000;
  return {reduced_ratio <= 2.0 && direct_ratio >= 20.0 && speedup >= 20.0,
          fmt("reduced K1000/K10 %.2f, direct K1000/K10 %.1f, speedup at K=1000 %.1fx",
              reduced_ratio, direct_ratio, speedup)};
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  std::vector<std::pair<int, Outcome>> results;
  const auto report = [&results](int id, const Outcome& o) {
    std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(id, o);
  };

  report(1, guarded(criterion_1));
  report(2, guarded(criterion_2));
  report(3, guarded(criterion_3));
  report(4, guarded(criterion_4));
  report(5, guarded(criterion_5));

  DeskRun desk;
  std::string desk_error;
  try {
    desk = desk_run();
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  if (desk_error.empty()) {
    report(6, guarded([&] { return criterion_6(desk); }));
  } else {
    report(6, {false, "exception: " + desk_error});
  }
  report(7, guarded(criterion_7));
  report(8, guarded(criterion_8));
  if (desk_error.empty()) {
    report(9, guarded([&] { return criterion_9(desk); }));
  } else {
    report(9, {false, "exception: " + desk_error});
  }

  int failed = 0;
  for (const auto& [id, o] : results) failed += o.pass ? 0 : 1;
  std::printf("%d of %zu criteria passed\n", static_cast<int>(results.size()) - failed,
              results.size());
  return failed == 0 ? 0 : 1;
}
