// pba: generate synthetic planar scenes, perturb them, refine them with
// planar bundle adjustment (reduced / direct / plane-to-plane), evaluate the
// trajectory error and benchmark normal-equation assembly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pba/io.hpp"
#include "pba/pba.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 2,
  kInfeasible = 3,
  kDegenerate = 4,
  kDiverged = 5,
};

std::string format6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed) {
  pba::SceneSpec spec;
  try {
    if (!config_path.empty()) {
      spec = pba::io::scene_spec_from_json(pba::io::read_json_file(config_path));
    }
    if (seed) spec.seed = *seed;
    spec.validate();
  } catch (const pba::Error& e) {
    std::cerr << "generate: config error: " << e.what() << '\n';
    return kUsage;
  }
  try {
    const pba::GeneratedScene scene = pba::generate(spec);
    pba::io::write_json_file(out_path, pba::io::graph_to_json(scene.graph));
    std::cout << "poses " << scene.graph.num_poses() << " planes " << scene.graph.num_planes()
              << " observations " << scene.graph.observations.size() << " points "
              << scene.graph.num_points() << '\n';
  } catch (const pba::InfeasibleScene& e) {
    std::cerr << "generate: infeasible scene: " << e.what() << '\n';
    return kInfeasible;
  }
  return kOk;
}

int cmd_perturb(const std::string& in_path, const std::string& out_path, std::optional<int> level,
                std::optional<double> sigma_rot, std::optional<double> sigma_trans,
                std::uint64_t seed) {
  pba::NoiseSpec noise;
  if (level && (sigma_rot || sigma_trans)) {
    std::cerr << "perturb: give either --level or --sigma-rot/--sigma-trans, not both\n";
    return kUsage;
  }
  if (level) {
    if (*level < 1 || *level > 3) {
      std::cerr << "perturb: --level must be 1, 2 or 3\n";
      return kUsage;
    }
    noise = pba::noise_level(*level, seed);
  } else if (sigma_rot && sigma_trans) {
    if (*sigma_rot < 0.0 || *sigma_trans < 0.0) {
      std::cerr << "perturb: sigmas must be non-negative\n";
      return kUsage;
    }
    noise = {*sigma_rot, *sigma_trans, seed};
  } else {
    std::cerr << "perturb: need --level or both --sigma-rot and --sigma-trans\n";
    return kUsage;
  }

  pba::ProblemGraph graph;
  try {
    graph = pba::io::graph_from_json(pba::io::read_json_file(in_path));
  } catch (const pba::Error& e) {
    std::cerr << "perturb: " << e.what() << '\n';
    return kUsage;
  }
  try {
    const pba::ProblemState init = pba::make_initial_state(graph, noise);
    auto j = pba::io::state_to_json(init);
    j["meta"] = {{"sigma_rot", noise.sigma_rot},
                 {"sigma_trans", noise.sigma_trans},
                 {"seed", noise.seed}};
    pba::io::write_json_file(out_path, j);
  } catch (const pba::DegeneratePlane& e) {
    std::cerr << "perturb: degenerate initialization: " << e.what() << '\n';
    return kDegenerate;
  } catch (const pba::DegenerateFit& e) {
    std::cerr << "perturb: degenerate initialization: " << e.what() << '\n';
    return kDegenerate;
  }
  return kOk;
}

struct SolveArgs {
  std::string dataset;
  std::string init;
  std::string method = "reduced";
  std::string out;
  std::string trace;
  int max_iters = 1000;
  double ftol = 1e-10;
  double ptol = 1e-10;
};

int cmd_solve(const SolveArgs& a) {
  pba::LMConfig cfg;
  if (a.method == "reduced") {
    cfg.method = pba::Method::reduced;
  } else if (a.method == "direct") {
    cfg.method = pba::Method::direct;
  } else if (a.method == "pl2pl") {
    cfg.method = pba::Method::pl2pl;
  } else {
    std::cerr << "solve: unknown method " << a.method << '\n';
    return kUsage;
  }
  cfg.max_iterations = a.max_iters;
  cfg.function_tolerance = a.ftol;
  cfg.parameter_tolerance = a.ptol;

  pba::ProblemGraph graph;
  pba::ProblemState init;
  try {
    cfg.validate();
    graph = pba::io::graph_from_json(pba::io::read_json_file(a.dataset));
    init = pba::io::state_from_json(pba::io::read_json_file(a.init));
    pba::check_state_shape(graph, init);
  } catch (const pba::Error& e) {
    std::cerr << "solve: " << e.what() << '\n';
    return kUsage;
  }

  pba::SolveResult result;
  try {
    result = pba::solve(graph, init, cfg);
  } catch (const pba::DivergedNaN& e) {
    std::cerr << "solve: diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const pba::DegeneratePlane& e) {
    std::cerr << "solve: degenerate input: " << e.what() << '\n';
    return kDegenerate;
  }

  const pba::SolveReport& rep = result.report;
  auto j = pba::io::state_to_json(result.state);
  j["report"] = pba::io::report_to_json(rep);
  try {
    pba::io::write_json_file(a.out, j);
    if (!a.trace.empty()) {
      std::ofstream t(a.trace);
      if (!t) throw pba::InvalidInput("cannot write " + a.trace);
      pba::io::write_trace_csv(t, rep);
    }
  } catch (const pba::Error& e) {
    std::cerr << "solve: " << e.what() << '\n';
    return kUsage;
  }
  std::cout << "method " << pba::to_string(rep.method) << " iterations " << rep.iterations
            << " termination " << pba::to_string(rep.termination) << '\n'
            << "initial_cost " << format6(rep.initial_cost) << " final_cost "
            << format6(rep.final_cost) << '\n'
            << "qr_time " << format6(rep.qr_time) << " init_time " << format6(rep.init_time)
            << " optimization_time " << format6(rep.optimization_time) << '\n';
  return kOk;
}

pba::SolveReport report_from_json(const pba::io::json& j) {
  pba::SolveReport r;
  const std::string m = j.value("method", "reduced");
  r.method = m == "direct" ? pba::Method::direct
             : m == "pl2pl" ? pba::Method::pl2pl
                            : pba::Method::reduced;
  r.iterations = j.value("iterations", 0);
  r.initial_cost = j.value("initial_cost", 0.0);
  r.final_cost = j.value("final_cost", 0.0);
  r.qr_time = j.value("qr_time", 0.0);
  r.init_time = j.value("init_time", 0.0);
  r.optimization_time = j.value("optimization_time", 0.0);
  return r;
}

int cmd_evaluate(const std::string& dataset, const std::string& result_path,
                 const std::string& csv_path) {
  pba::ProblemGraph graph;
  pba::ProblemState est;
  pba::io::json result_json;
  try {
    graph = pba::io::graph_from_json(pba::io::read_json_file(dataset));
    result_json = pba::io::read_json_file(result_path);
    est = pba::io::state_from_json(result_json);
  } catch (const pba::Error& e) {
    std::cerr << "evaluate: " << e.what() << '\n';
    return kUsage;
  }
  pba::AteResult a;
  try {
    a = pba::ate(graph.poses, est.poses);
  } catch (const pba::LengthMismatch& e) {
    std::cerr << "evaluate: " << e.what() << '\n';
    return kUsage;
  }
  std::cout << "ate_rot_deg " << format6(a.ate_rot) << '\n'
            << "ate_trans_m " << format6(a.ate_trans) << '\n';

  if (!csv_path.empty()) {
    pba::RunRecord run;
    if (result_json.contains("report")) {
      run.report = report_from_json(result_json.at("report"));
    } else {
      run.method = "unsolved";
    }
    run.ate = a;
    const bool fresh =
        !std::filesystem::exists(csv_path) || std::filesystem::file_size(csv_path) == 0;
    std::ofstream out(csv_path, std::ios::app);
    if (!out) {
      std::cerr << "evaluate: cannot append to " << csv_path << '\n';
      return kUsage;
    }
    pba::write_comparison_csv(out, pba::compare_runs({run}), fresh);
  }
  return kOk;
}

int cmd_bench(const std::vector<int>& ks, int poses, int repeats, std::uint64_t seed,
              const std::string& out_path) {
  pba::BenchConfig cfg;
  cfg.ks = ks;
  cfg.n_poses = poses;
  cfg.repeats = repeats;
  cfg.seed = seed;
  std::vector<pba::BenchPoint> pts;
  try {
    pts = pba::run_bench(cfg);
  } catch (const pba::InfeasibleScene& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return kInfeasible;
  } catch (const pba::Error& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return kUsage;
  }

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) {
      std::cerr << "bench: cannot write " << out_path << '\n';
      return kUsage;
    }
  }
  std::ostream& os = out_path.empty() ? std::cout : file;
  os << "k,method,observations,assembly_seconds\n";
  for (const auto& p : pts) {
    os << p.k << ',' << pba::to_string(p.method) << ',' << p.observations << ','
       << pba::format_double(p.assembly_seconds) << '\n';
  }
  if (!out_path.empty()) {
    for (const auto& p : pts) {
      std::cout << "K=" << p.k << ' ' << pba::to_string(p.method) << ' '
                << format6(p.assembly_seconds * 1e3) << " ms\n";
    }
  }
  for (int k : ks) {
    try {
      const double r = pba::bench_time(pts, k, pba::Method::reduced);
      const double d = pba::bench_time(pts, k, pba::Method::direct);
      std::cout << "K=" << k << " speedup(direct/reduced) " << format6(d / r) << '\n';
    } catch (const pba::Error&) {
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar bundle adjustment toolkit"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> gen_seed;
  std::string gen_config;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  gen->add_option("--config", gen_config, "Scene config JSON (defaults when omitted)");
  gen->add_option("--seed", gen_seed, "Override the scene seed");
  gen->add_option("--out", gen_out, "Output dataset path")->required();

  std::string pert_in;
  std::string pert_out;
  std::optional<int> pert_level;
  std::optional<double> pert_sr;
  std::optional<double> pert_st;
  std::uint64_t pert_seed = 0;
  auto* pert = app.add_subcommand("perturb", "Perturb poses and initialize planes");
  pert->add_option("dataset", pert_in, "Dataset path")->required();
  pert->add_option("--out", pert_out, "Output initialization path")->required();
  pert->add_option("--level", pert_level, "Noise level 1, 2 or 3");
  pert->add_option("--sigma-rot", pert_sr, "Euler-angle STD in degrees");
  pert->add_option("--sigma-trans", pert_st, "Translation STD in meters");
  pert->add_option("--seed", pert_seed, "Noise seed");

  SolveArgs sa;
  auto* sol = app.add_subcommand("solve", "Refine poses and planes");
  sol->add_option("dataset", sa.dataset, "Dataset path")->required();
  sol->add_option("init", sa.init, "Initialization path")->required();
  sol->add_option("--method", sa.method, "reduced | direct | pl2pl");
  sol->add_option("--out", sa.out, "Output result path")->required();
  sol->add_option("--trace", sa.trace, "Per-iteration trace CSV");
  sol->add_option("--max-iters", sa.max_iters, "Maximum LM iterations");
  sol->add_option("--ftol", sa.ftol, "Function tolerance");
  sol->add_option("--ptol", sa.ptol, "Parameter tolerance");

  std::string ev_dataset;
  std::string ev_result;
  std::string ev_csv;
  auto* ev = app.add_subcommand("evaluate", "Absolute trajectory error of a result");
  ev->add_option("dataset", ev_dataset, "Dataset path")->required();
  ev->add_option("result", ev_result, "Result or initialization path")->required();
  ev->add_option("--csv", ev_csv, "Append a comparison row to this CSV");

  std::vector<int> b_ks{10, 100, 1000};
  int b_poses = 20;
  int b_repeats = 5;
  std::uint64_t b_seed = 1;
  std::string b_out;
  auto* bench = app.add_subcommand("bench", "Time normal-equation assembly versus K");
  bench->add_option("--ks", b_ks, "Points per observation to sweep")->delimiter(',');
  bench->add_option("--poses", b_poses, "Poses in the benchmark scene");
  bench->add_option("--repeats", b_repeats, "Timing repeats (best is kept)");
  bench->add_option("--seed", b_seed, "Scene seed");
  bench->add_option("--out", b_out, "Write the timing table to this CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_generate(gen_config, gen_out, gen_seed);
    if (*pert) return cmd_perturb(pert_in, pert_out, pert_level, pert_sr, pert_st, pert_seed);
    if (*sol) return cmd_solve(sa);
    if (*ev) return cmd_evaluate(ev_dataset, ev_result, ev_csv);
    if (*bench) return cmd_bench(b_ks, b_poses, b_repeats, b_seed, b_out);
  } catch (const pba::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
