// Command-line front end for the fault-identification mission.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 inconclusive verdict.

#include "swarmfault/config.hpp"
#include "swarmfault/io.hpp"
#include "swarmfault/mission.hpp"
#include "swarmfault/spatial_index.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace swarmfault;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitInconclusive = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool json = false;
};

RunConfig load(const Globals& g) {
  RunConfig cfg = default_run_config();
  if (!g.config.empty()) {
    if (!fs::exists(g.config)) throw UsageError("config file not found: " + g.config);
    try {
      cfg = load_run_config(g.config);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  if (g.seed) cfg.mission.seed = *g.seed;
  if (!g.out.empty()) cfg.output = g.out;
  return cfg;
}

void emit(const Globals& g, const json& j, const std::string& text) {
  if (g.json)
    std::cout << j.dump(2) << '\n';
  else
    std::cout << text;
}

json probe_json(const FaultReport& r) {
  json a = json::array();
  for (std::size_t i = 0; i < r.axes.size(); ++i) {
    auto name = [](AxisResponse x) { return x == AxisResponse::Responsive ? "responsive" : "unresponsive"; };
    a.push_back({{"agent", i}, {"x", name(r.axes[i][0])}, {"y", name(r.axes[i][1])}, {"step", r.probe_steps[i]}});
  }
  return a;
}

std::string probe_text(const FaultReport& r) {
  std::string s;
  for (std::size_t i = 0; i < r.axes.size(); ++i) {
    s += "agent " + std::to_string(i) + ":";
    for (int ax = 0; ax < 2; ++ax)
      s += std::string(ax == 0 ? " x=" : " y=") +
           (r.axes[i][ax] == AxisResponse::Responsive ? "responsive" : "UNRESPONSIVE");
    s += '\n';
  }
  return s;
}

struct ProbedTwin {
  FaultReport report;
  TwinState twin;
};

// Probe the real agents and build the twin worlds for the suspect axis.
ProbedTwin probe_twin(const MissionConfig& m) {
  RealWorld real(m.world, m.faults);
  ProbedTwin out{probe(real), {}};
  const auto suspect = out.report.first_unresponsive();
  if (!suspect) throw std::runtime_error("probe found no unresponsive axis; nothing to discriminate");
  out.twin = TwinState::from_observed(real.state(), suspect->first, suspect->second);
  return out;
}

WorldState beta_start(const MissionConfig& m, const std::string& start_trace) {
  if (start_trace.empty()) return initial_state(m.world);
  const auto trace = read_trace_jsonl(start_trace);
  WorldState s = state_at(trace, trace.size() - 1);
  s.physical = s.observed;
  return s;
}

PlanMode parse_mode(const std::string& s) {
  try {
    return plan_mode_from_string(s);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault identification and conveyance planning for a small disk swarm"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Override the configured seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--json", g.json, "Machine-readable output on stdout");

  auto* probe_cmd = app.add_subcommand("probe", "Probe every agent axis on the real world");

  auto* train_alpha_cmd = app.add_subcommand("train-alpha", "Train the discrimination policy on the twin worlds");

  std::string beta_start_trace;
  auto* train_beta_cmd = app.add_subcommand("train-beta", "Train the conveyance policy under the configured fault");
  train_beta_cmd->add_option("--start", beta_start_trace, "Trace whose last line is the starting state");

  std::string plan_stage = "alpha", plan_ckpt, plan_mode;
  int plan_horizon = 0;
  auto* plan_cmd = app.add_subcommand("plan", "Roll a trained policy out into an open-loop plan");
  plan_cmd->add_option("--stage", plan_stage, "alpha or beta")->check(CLI::IsMember({"alpha", "beta"}));
  plan_cmd->add_option("--checkpoint", plan_ckpt, "Policy checkpoint")->required();
  plan_cmd->add_option("--mode", plan_mode, "stochastic or greedy (default from config)");
  plan_cmd->add_option("--horizon", plan_horizon, "Plan length (default from config)");
  plan_cmd->add_option("--start", beta_start_trace, "Beta only: trace whose last line is the starting state");

  std::string exec_plan, exec_output;
  auto* execute_cmd = app.add_subcommand("execute", "Replay a plan trace on the real agents");
  execute_cmd->add_option("--plan", exec_plan, "Plan trace (commands are replayed from its first state)")->required();
  execute_cmd->add_option("--output", exec_output, "Trace file to write (default OUT/trace.jsonl)");

  std::string cls_real, cls_a, cls_s;
  double cls_margin = -1.0;
  auto* classify_cmd = app.add_subcommand("classify", "Pick the hypothesis closer to the observed trajectory");
  classify_cmd->add_option("--real", cls_real, "Observed trace")->required();
  classify_cmd->add_option("--pred-a", cls_a, "Prediction under the actuator hypothesis")->required();
  classify_cmd->add_option("--pred-s", cls_s, "Prediction under the sensor hypothesis")->required();
  classify_cmd->add_option("--margin", cls_margin, "Relative margin (default from config)");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run the full mission and write every artifact");

  int sr_seeds = 0, sr_threads = 0;
  std::optional<double> sr_theta;
  auto* success_cmd = app.add_subcommand("success-rate", "Fraction of seeds whose discrimination plan works");
  success_cmd->add_option("--seeds", sr_seeds, "Number of seeds (default from config)");
  success_cmd->add_option("--theta", sr_theta, "Working threshold on the per-step divergence");
  success_cmd->add_option("--threads", sr_threads, "Seeds trained concurrently");

  int bench_reps = 0;
  auto* bench_cmd = app.add_subcommand("bench-spatial", "Scaling benchmark of grid versus all-pairs neighbor search");
  bench_cmd->add_option("--repetitions", bench_reps, "Timing repetitions per size");

  std::string plot_real, plot_a, plot_s, plot_output, plot_title;
  bool plot_no_collisions = false, plot_no_goals = false;
  auto* plot_cmd = app.add_subcommand("plot", "Render trace files to SVG");
  plot_cmd->add_option("--real", plot_real, "Observed trace");
  plot_cmd->add_option("--pred-a", plot_a, "Actuator-hypothesis prediction");
  plot_cmd->add_option("--pred-s", plot_s, "Sensor-hypothesis prediction");
  plot_cmd->add_option("--output", plot_output, "SVG path (default OUT/plot.svg)");
  plot_cmd->add_option("--title", plot_title, "Plot title");
  plot_cmd->add_flag("--no-collisions", plot_no_collisions, "Omit collision markers");
  plot_cmd->add_flag("--no-goals", plot_no_goals, "Omit goal markers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    const RunConfig cfg = load(g);
    const MissionConfig& m = cfg.mission;
    const fs::path out = cfg.output;

    if (*probe_cmd) {
      RealWorld real(m.world, m.faults);
      const auto report = probe(real);
      emit(g, {{"probe", probe_json(report)}}, probe_text(report));
      return 0;
    }

    if (*train_alpha_cmd) {
      const auto pt = probe_twin(m);
      StageConfig sc = m.alpha;
      sc.train.seed = derive_seed(m.seed, 1);
      const auto result = train_alpha(pt.twin, m.world, sc);
      fs::create_directories(out / "checkpoints");
      save_checkpoint(out / "checkpoints/alpha.ckpt", result.model);
      write_training_curve_csv(out / "curve_alpha.csv", result.curve);
      const double last = result.curve.empty() ? 0.0 : result.curve.back().mean_episode_reward;
      emit(g, {{"checkpoint", (out / "checkpoints/alpha.ckpt").string()}, {"final_mean_episode_reward", last}},
           "checkpoint " + (out / "checkpoints/alpha.ckpt").string() + "\nfinal mean episode reward " + fmt(last) +
               "\n");
      return 0;
    }

    if (*train_beta_cmd) {
      StageConfig sc = m.beta;
      sc.train.seed = derive_seed(m.seed, 3);
      const auto result = train_beta(beta_start(m, beta_start_trace), m.faults, m.world, m.beta_reward, m.convey, sc);
      fs::create_directories(out / "checkpoints");
      save_checkpoint(out / "checkpoints/beta.ckpt", result.model);
      write_training_curve_csv(out / "curve_beta.csv", result.curve);
      const double last = result.curve.empty() ? 0.0 : result.curve.back().mean_episode_reward;
      emit(g, {{"checkpoint", (out / "checkpoints/beta.ckpt").string()}, {"final_mean_episode_reward", last}},
           "checkpoint " + (out / "checkpoints/beta.ckpt").string() + "\nfinal mean episode reward " + fmt(last) +
               "\n");
      return 0;
    }

    if (*plan_cmd) {
      const auto model = load_checkpoint(plan_ckpt);
      const bool alpha = plan_stage == "alpha";
      const StageConfig& sc = alpha ? m.alpha : m.beta;
      const PlanMode mode = plan_mode.empty() ? sc.plan_mode : parse_mode(plan_mode);
      const int horizon = plan_horizon != 0 ? plan_horizon : sc.horizon;
      fs::create_directories(out);
      if (alpha) {
        const auto pt = probe_twin(m);
        const auto plan = make_alpha_plan(model, pt.twin, m.world, horizon, mode, derive_seed(m.seed, 2));
        write_trace_jsonl(out / "pred_ha.jsonl", make_trace(plan.start_a, plan.records_a));
        write_trace_jsonl(out / "pred_hs.jsonl", make_trace(plan.start_s, plan.records_s));
        emit(g,
             {{"pred_ha", (out / "pred_ha.jsonl").string()},
              {"pred_hs", (out / "pred_hs.jsonl").string()},
              {"max_step_divergence", plan.max_step_divergence()},
              {"total_divergence", plan.total_divergence()}},
             "wrote " + (out / "pred_ha.jsonl").string() + " and " + (out / "pred_hs.jsonl").string() +
                 "\nmax per-step divergence " + fmt(plan.max_step_divergence()) + "\n");
      } else {
        const auto plan = make_beta_plan(model, beta_start(m, beta_start_trace), m.faults, m.world, m.beta_reward, m.convey,
                                         horizon, mode, derive_seed(m.seed, 4));
        write_trace_jsonl(out / "pred_beta.jsonl", make_trace(plan.start, plan.records));
        emit(g, {{"pred_beta", (out / "pred_beta.jsonl").string()}, {"completed", plan.completed},
                 {"arrival_ticks", plan.arrival_ticks}},
             "wrote " + (out / "pred_beta.jsonl").string() + "\ncompleted " + (plan.completed ? "yes" : "no") + "\n");
      }
      return 0;
    }

    if (*execute_cmd) {
      const auto trace = read_trace_jsonl(exec_plan);
      RealWorld real(m.world, m.faults, state_at(trace, 0));
      Plan plan{trace_commands(trace), 0, exec_plan};
      const std::size_t before = real.log().size();
      execute_plan(plan, real);
      const std::vector<StepRecord> records(real.log().begin() + static_cast<std::ptrdiff_t>(before),
                                            real.log().end());
      const fs::path target = exec_output.empty() ? out / "trace.jsonl" : fs::path(exec_output);
      if (target.has_parent_path()) fs::create_directories(target.parent_path());
      write_trace_jsonl(target, make_trace(state_at(trace, 0), records));
      emit(g, {{"trace", target.string()}, {"steps", records.size()}},
           "wrote " + target.string() + " (" + std::to_string(records.size()) + " steps)\n");
      return 0;
    }

    if (*classify_cmd) {
      const double margin = cls_margin >= 0.0 ? cls_margin : m.classify_margin;
      const auto c = classify(read_trajectory_jsonl(cls_real), read_trajectory_jsonl(cls_a),
                              read_trajectory_jsonl(cls_s), margin);
      emit(g, {{"verdict", to_string(c.verdict)}, {"distance_a", c.distance_a}, {"distance_s", c.distance_s}},
           std::string("verdict ") + to_string(c.verdict) + "\ndistance_a " + fmt(c.distance_a) + "\ndistance_s " +
               fmt(c.distance_s) + "\n");
      return c.verdict == Verdict::Inconclusive ? kExitInconclusive : 0;
    }

    if (*pipeline_cmd) {
      const auto report = run_pipeline(m, out);
      std::string text = probe_text(report.probe);
      text += "status " + report.status + "\n";
      if (report.status != "no_fault") {
        text += std::string("verdict ") + to_string(report.verdict) + "\nmax per-step divergence " +
                fmt(report.divergence_max_step) + "\n";
      }
      if (report.status == "complete")
        text += std::string("mission complete ") + (report.mission_complete ? "yes" : "no") + "\n";
      text += "report " + (out / "report.json").string() + "\n";
      emit(g, to_json(report), text);
      return report.status == "inconclusive" ? kExitInconclusive : 0;
    }

    if (*success_cmd) {
      const int seeds = sr_seeds > 0 ? sr_seeds : cfg.harness.seeds;
      const int threads = sr_threads > 0 ? sr_threads : cfg.harness.threads;
      const double theta = sr_theta.value_or(m.theta_work);
      const auto sr = success_rate(m, seeds, theta, threads);
      fs::create_directories(out);
      std::string csv = "seed,working,max_step_divergence,total_divergence\n";
      json rows = json::array();
      for (const auto& r : sr.records) {
        csv += std::to_string(r.seed) + ',' + (r.working ? "1" : "0") + ',' + fmt(r.max_step_divergence) + ',' +
               fmt(r.total_divergence) + '\n';
        rows.push_back({{"seed", r.seed},
                        {"working", r.working},
                        {"max_step_divergence", r.max_step_divergence},
                        {"total_divergence", r.total_divergence}});
      }
      write_text_file(out / "success_rate.csv", csv);
      emit(g, {{"rate", sr.rate}, {"theta_work", theta}, {"seeds", rows}},
           "success rate " + fmt(sr.rate) + " over " + std::to_string(seeds) + " seeds (theta " + fmt(theta) +
               ")\nper-seed records in " + (out / "success_rate.csv").string() + "\n");
      return 0;
    }

    if (*bench_cmd) {
      BenchOptions opts;
      opts.density = cfg.harness.bench_density;
      opts.seed = m.seed;
      const auto bench =
          bench_scaling(cfg.harness.bench_sizes, bench_reps > 0 ? bench_reps : cfg.harness.bench_repetitions, opts);
      fs::create_directories(out);
      write_text_file(out / "bench.csv", bench_csv(bench));
      json rows = json::array();
      std::string text;
      for (const auto& r : bench.rows) {
        rows.push_back({{"n", r.n}, {"grid_median_ns", r.grid_median_ns}, {"naive_median_ns", r.naive_median_ns}});
        text += "N=" + std::to_string(r.n) + " grid " + fmt(r.grid_median_ns) + " ns, naive " +
                fmt(r.naive_median_ns) + " ns\n";
      }
      text += "slope grid " + fmt(bench.grid_slope) + ", naive " + fmt(bench.naive_slope) + "\n";
      emit(g, {{"rows", rows}, {"grid_slope", bench.grid_slope}, {"naive_slope", bench.naive_slope}}, text);
      return 0;
    }

    if (*plot_cmd) {
      PlotInput input;
      input.arena_size = m.world.arena_size;
      input.radii = m.world.radii();
      for (const auto& a : m.world.agents) input.goals.push_back(a.goal);
      if (!plot_real.empty()) input.real = read_trace_jsonl(plot_real);
      if (!plot_a.empty()) input.pred_a = read_trace_jsonl(plot_a);
      if (!plot_s.empty()) input.pred_s = read_trace_jsonl(plot_s);
      if (!input.real && !input.pred_a && !input.pred_s) throw UsageError("plot needs at least one trace");
      PlotSpec spec;
      spec.show_real = input.real.has_value();
      spec.show_pred_a = input.pred_a.has_value();
      spec.show_pred_s = input.pred_s.has_value();
      spec.collision_markers = !plot_no_collisions;
      spec.goal_markers = !plot_no_goals;
      spec.title = plot_title;
      const fs::path target = plot_output.empty() ? out / "plot.svg" : fs::path(plot_output);
      if (target.has_parent_path()) fs::create_directories(target.parent_path());
      emit_plot(input, spec, target);
      emit(g, {{"plot", target.string()}}, "wrote " + target.string() + "\n");
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
