// ncs: delay-robust stability toolkit for a networked two-link arm.
//
// Subcommands cover the full workflow: synthesize Lyapunov data for the
// delay-free loop, estimate per-channel increment gains, audit the bound
// assumptions, certify stability at a fixed cycle bound, bisect the largest
// certifiable bound, simulate the closed loop over lossy links, export the
// certification LMI in SDPA sparse format, and merge artifacts into a report.
//
// Exit codes: 0 success, 1 analysis findings (not certifiable, assumption
// violations, unsettled simulation), 2 input or usage errors.

#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "ncs/analysis.hpp"
#include "ncs/config.hpp"
#include "ncs/log.hpp"
#include "ncs/matrix.hpp"
#include "ncs/report.hpp"
#include "ncs/robot.hpp"
#include "ncs/sdp.hpp"
#include "ncs/sim.hpp"
#include "ncs/svg.hpp"

namespace {

using ncs::json;

constexpr double kZeroCapFloor = 1e-12;  // stands in for r_k when T = 0

std::vector<double> channel_caps(double T) {
  return std::vector<double>(4, std::max(2.0 * T, kZeroCapFloor));
}

// F/W/S/M either from the fixture files or synthesized from scratch.
ncs::SystemBounds bounds_for(const ncs::ToolkitConfig& cfg, double T) {
  if (cfg.mk_source == "fixture")
    return ncs::load_system_bounds(cfg.fixture_dir, 4, channel_caps(T));

  ncs::LyapunovCertificate cert =
      ncs::synthesize_lyapunov(ncs::error_dynamics_matrix(cfg.robot), cfg.solver);
  ncs::SystemBounds b;
  b.n = 4;
  b.q = 4;
  b.F = cert.bound_F();
  b.W = cert.bound_W();
  b.S = cert.bound_S();
  b.M = ncs::estimate_increment_gains(cfg.robot, cfg.domain(), cfg.estimate_samples,
                                      cfg.solver.seed, cfg.bias_form);
  b.r = channel_caps(T);
  ncs::validate_bounds(b);
  return b;
}

json verdict_json(const ncs::SdpVerdict& v) {
  json j;
  j["status"] = ncs::to_string(v.status);
  j["margin"] = v.margin;
  j["iterations"] = v.iterations;
  return j;
}

json state_json(const ncs::RobotState& x) {
  return json::array({x[0], x[1], x[2], x[3]});
}

// Sensor/actuator composition of the four links: torque 1 reads joint-1 data
// over link 1 and joint-2 data over link 3; torque 2 reads links 2 and 4.
const std::vector<std::pair<std::size_t, std::size_t>> kChannels = {
    {0, 0}, {0, 1}, {1, 0}, {1, 1}};

int cmd_synth(const ncs::ToolkitConfig& cfg) {
  const ncs::Mat a = ncs::error_dynamics_matrix(cfg.robot);
  const ncs::LyapunovCertificate cert = ncs::synthesize_lyapunov(a, cfg.solver);

  json j;
  j["alpha"] = cert.alpha;
  j["P"] = ncs::mat_to_json(cert.P.mat());
  j["Q"] = ncs::mat_to_json(cert.Q.mat());
  j["A"] = ncs::mat_to_json(cert.A);
  j["derived"]["F"] = ncs::mat_to_json(cert.bound_F());
  j["derived"]["W"] = ncs::mat_to_json(cert.bound_W());
  j["derived"]["S"] = ncs::mat_to_json(cert.bound_S().mat());
  ncs::write_json_artifact(cfg.output_dir, "lyapunov", j);
  ncs::write_report(cfg.output_dir, cfg.echo);
  ncs::log::info("lyapunov certificate: alpha = " + std::to_string(cert.alpha));
  return 0;
}

int cmd_estimate_gains(const ncs::ToolkitConfig& cfg) {
  const auto gains = ncs::estimate_increment_gains(cfg.robot, cfg.domain(),
                                                   cfg.estimate_samples, cfg.solver.seed,
                                                   cfg.bias_form);
  json j;
  j["samples"] = cfg.estimate_samples;
  j["seed"] = cfg.solver.seed;
  json arr = json::array();
  for (const auto& m : gains) arr.push_back(ncs::mat_to_json(m));
  j["M"] = std::move(arr);
  ncs::write_json_artifact(cfg.output_dir, "increment_gains", j);
  ncs::write_report(cfg.output_dir, cfg.echo);
  return 0;
}

int cmd_verify(const ncs::ToolkitConfig& cfg) {
  const ncs::SystemBounds b = bounds_for(cfg, cfg.analysis_T);
  const ncs::AssumptionAudit audit =
      ncs::verify_assumptions(b, cfg.robot, cfg.domain(), cfg.audit_samples,
                              cfg.solver.seed, nullptr, cfg.bias_form);

  json j;
  j["samples"] = audit.samples;
  j["total_violations"] = audit.total();
  json counts = json::object();
  for (const auto& [name, c] : audit.counts) counts[name] = c;
  j["counts"] = std::move(counts);
  json wit = json::array();
  for (const auto& v : audit.witnesses) {
    json w;
    w["inequality"] = v.inequality;
    w["row"] = v.row;
    w["lhs"] = v.lhs;
    w["rhs"] = v.rhs;
    w["state"] = state_json(v.state);
    if (v.uses_delayed) {
      json d = json::array();
      for (const auto& s : v.delayed) d.push_back(state_json(s));
      w["delayed"] = std::move(d);
    }
    wit.push_back(std::move(w));
  }
  j["witnesses"] = std::move(wit);
  ncs::write_json_artifact(cfg.output_dir, "assumptions", j);
  ncs::write_report(cfg.output_dir, cfg.echo);

  if (audit.total() > 0) {
    ncs::log::info("assumption audit found " + std::to_string(audit.total()) +
                   " violations over " + std::to_string(audit.samples) + " samples");
    return 1;
  }
  ncs::log::info("assumption audit clean over " + std::to_string(audit.samples) + " samples");
  return 0;
}

int cmd_analyze(const ncs::ToolkitConfig& cfg) {
  const ncs::SystemBounds b = bounds_for(cfg, cfg.analysis_T);
  const ncs::SdpVerdict v = ncs::check_stability(b, cfg.solver, {cfg.coupling});

  json j;
  j["T"] = cfg.analysis_T;
  j["delay_cap"] = b.r.front();
  j["verdict"] = verdict_json(v);
  ncs::write_json_artifact(cfg.output_dir, "analysis", j);
  ncs::write_report(cfg.output_dir, cfg.echo);
  ncs::log::info(std::string("analysis at T = ") + std::to_string(cfg.analysis_T) + ": " +
                 ncs::to_string(v.status));
  return v.status == ncs::SdpStatus::feasible ? 0 : 1;
}

int cmd_bound(const ncs::ToolkitConfig& cfg) {
  auto bounds_of = [&](double T) { return bounds_for(cfg, T); };
  const ncs::BoundSearchResult res = ncs::max_delay_bound(
      bounds_of, cfg.t_lo, cfg.t_hi, cfg.tolerance, cfg.solver, {cfg.coupling});

  json j;
  j["t_star"] = res.t_star;
  j["tolerance"] = res.tolerance;
  json probes = json::array();
  for (const auto& p : res.probes) {
    json pj;
    pj["T"] = p.T;
    pj["status"] = ncs::to_string(p.status);
    pj["margin"] = p.margin;
    probes.push_back(std::move(pj));
  }
  j["probes"] = std::move(probes);
  ncs::write_json_artifact(cfg.output_dir, "bound", j);

  ncs::PlotSeries ok{"certified", {}, false}, bad{"not certified", {}, false};
  double mmin = 0.0, mmax = 0.0;
  for (const auto& p : res.probes) {
    (p.status == ncs::SdpStatus::feasible ? ok : bad).points.push_back({p.T, p.margin});
    mmin = std::min(mmin, p.margin);
    mmax = std::max(mmax, p.margin);
  }
  ncs::PlotSeries star{"largest certified T", {{res.t_star, mmin}, {res.t_star, mmax}}, true};
  ncs::write_text_file(ncs::fs::path(cfg.output_dir) / "margin_vs_T.svg",
                       ncs::render_svg_plot("certification margin vs cycle bound",
                                            "cycle bound T [s]", "margin",
                                            {ok, bad, star}));
  ncs::write_report(cfg.output_dir, cfg.echo);
  ncs::log::info("largest certified cycle bound: " + std::to_string(res.t_star));
  return 0;
}

int cmd_simulate(const ncs::ToolkitConfig& cfg) {
  const double declared_cap = 2.0 * cfg.network.control_cycle;
  const ncs::DelayTraces traces = ncs::generate_delays(cfg.network, kChannels, declared_cap);

  const ncs::RobotState eq = ncs::equilibrium(cfg.robot);
  ncs::Vec x0(4), eqv(4);
  for (std::size_t i = 0; i < 4; ++i) {
    eqv[i] = eq[i];
    x0[i] = eq[i] + cfg.initial_offset[i];
  }

  const ncs::RobotParams params = cfg.robot;
  const ncs::BiasForm form = cfg.bias_form;
  auto field = [&params, form](double, const ncs::Vec& x, const std::vector<ncs::Vec>& aged,
                               ncs::Vec& out) {
    const ncs::RobotState xs{x[0], x[1], x[2], x[3]};
    std::array<ncs::RobotState, 4> d;
    for (std::size_t c = 0; c < 4; ++c) d[c] = {aged[c][0], aged[c][1], aged[c][2], aged[c][3]};
    const ncs::RobotState dx = ncs::closed_loop_f(params, xs, d, form);
    out.assign(dx.begin(), dx.end());
  };

  ncs::IntegrateOptions opt;
  opt.dt = cfg.sim_dt;
  opt.store_stride = cfg.store_stride;
  opt.equilibrium = eqv;
  const ncs::Trajectory traj =
      ncs::integrate_dde(field, x0, traces, cfg.network.horizon, opt);
  const ncs::StabilityMetrics metrics = ncs::stability_metrics(traj);

  {
    std::ostringstream csv;
    ncs::write_trajectory_csv(csv, traj);
    ncs::write_text_file(ncs::fs::path(cfg.output_dir) / "trajectory.csv", csv.str());
  }

  json j;
  j["settled"] = metrics.settled;
  if (std::isfinite(metrics.settling_time))
    j["settling_time"] = metrics.settling_time;
  else
    j["settling_time"] = nullptr;
  j["peak_error"] = metrics.peak_error;
  j["final_error"] = metrics.final_error;
  j["divergent"] = traj.divergent;
  json dmax = json::array();
  for (std::size_t c = 0; c < 4; ++c) dmax.push_back(traces.max_delay(c));
  j["max_delay"] = std::move(dmax);
  j["delay_cap"] = ncs::scenario_delay_cap(cfg.network);
  ncs::write_json_artifact(cfg.output_dir, "simulation", j);

  {
    ncs::PlotSeries err{"error norm", {}, true};
    for (std::size_t i = 0; i < traj.times.size(); ++i)
      err.points.push_back({traj.times[i], traj.err_norm[i]});
    ncs::write_text_file(ncs::fs::path(cfg.output_dir) / "error_norm.svg",
                         ncs::render_svg_plot("tracking error norm", "t [s]", "|x - x_eq|",
                                              {err}));
    std::vector<ncs::PlotSeries> ds;
    for (std::size_t c = 0; c < 4; ++c) {
      ncs::PlotSeries s{"d" + std::to_string(c + 1), {}, true};
      for (std::size_t i = 0; i < traj.times.size(); ++i)
        s.points.push_back({traj.times[i], traj.delays[i][c]});
      ds.push_back(std::move(s));
    }
    ncs::write_text_file(ncs::fs::path(cfg.output_dir) / "delays.svg",
                         ncs::render_svg_plot("channel delays", "t [s]", "delay [s]", ds));
  }
  ncs::write_report(cfg.output_dir, cfg.echo);

  ncs::log::info(std::string("simulation ") + (metrics.settled ? "settled" : "did not settle") +
                 ", final error " + std::to_string(metrics.final_error));
  return metrics.settled ? 0 : 1;
}

int cmd_export_sdpa(const ncs::ToolkitConfig& cfg) {
  const ncs::SystemBounds b = bounds_for(cfg, cfg.analysis_T);
  const ncs::LmiProblem prob = ncs::build_certification_lmi(b, {cfg.coupling});
  const std::string text = ncs::export_sdpa(prob);
  ncs::write_text_file(ncs::fs::path(cfg.output_dir) / "problem.dat-s", text);

  json j;
  j["file"] = "problem.dat-s";
  j["T"] = cfg.analysis_T;
  j["variables"] = prob.layout.total_scalars();
  json dims = json::array();
  for (const auto& c : prob.constraints) dims.push_back(c.dim());
  j["block_dims"] = std::move(dims);
  ncs::write_json_artifact(cfg.output_dir, "sdpa", j);
  ncs::write_report(cfg.output_dir, cfg.echo);
  return 0;
}

int cmd_report(const ncs::ToolkitConfig& cfg) {
  const std::size_t found = ncs::write_report(cfg.output_dir, cfg.echo);
  if (found == 0) {
    throw ncs::InputError("no artifacts found in " + cfg.output_dir +
                          "; run an analysis command first");
  }
  ncs::log::info("merged " + std::to_string(found) + " artifact sections");
  return 0;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  std::vector<std::string> overrides;
};

ncs::ToolkitConfig load_from(const CommonArgs& args) {
  std::vector<std::string> ov = args.overrides;
  if (args.seed >= 0) {
    ov.push_back("solver.seed=" + std::to_string(args.seed));
    ov.push_back("network.seed=" + std::to_string(args.seed));
  }
  ncs::ToolkitConfig cfg = ncs::load_config(args.config_path, ov);
  if (!args.out_dir.empty()) {
    cfg.output_dir = args.out_dir;
    cfg.echo["output_dir"] = args.out_dir;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delay-robust stability toolkit for a networked two-link arm"};
  app.require_subcommand(1);
  app.footer(ncs::config_help() +
             "\nEnvironment: NCS_LOG=error|info|debug controls stderr logging.\n");

  CommonArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON config file")->required();
    sub->add_option("--out", args.out_dir, "artifact directory (overrides output_dir)");
    sub->add_option("--seed", args.seed, "override solver and network seeds");
    sub->add_option("--override", args.overrides,
                    "config override key.path=value (repeatable)");
    return sub;
  };

  auto* synth = add_common(app.add_subcommand(
      "synth-lyapunov", "synthesize Lyapunov data for the delay-free loop"));
  auto* estimate = add_common(app.add_subcommand(
      "estimate-mk", "estimate per-channel increment gain matrices"));
  auto* verify = add_common(app.add_subcommand(
      "verify-assumptions", "audit the comparison-system bounds by sampling"));
  auto* analyze = add_common(app.add_subcommand(
      "analyze", "certify stability at the configured cycle bound"));
  auto* bound = add_common(app.add_subcommand(
      "bound", "bisect the largest certifiable cycle bound"));
  auto* simulate = add_common(app.add_subcommand(
      "simulate", "integrate the closed loop over one delay realization"));
  auto* exporter = add_common(app.add_subcommand(
      "export-sdpa", "write the certification LMI in SDPA sparse format"));
  auto* report = add_common(app.add_subcommand(
      "report", "merge existing artifacts into report.json"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const ncs::ToolkitConfig cfg = load_from(args);
    if (synth->parsed()) return cmd_synth(cfg);
    if (estimate->parsed()) return cmd_estimate_gains(cfg);
    if (verify->parsed()) return cmd_verify(cfg);
    if (analyze->parsed()) return cmd_analyze(cfg);
    if (bound->parsed()) return cmd_bound(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (exporter->parsed()) return cmd_export_sdpa(cfg);
    if (report->parsed()) return cmd_report(cfg);
  } catch (const ncs::InputError& e) {
    ncs::log::error(e.what());
    return 2;
  } catch (const std::exception& e) {
    ncs::log::error(std::string("failure: ") + e.what());
    return 2;
  }
  return 2;
}
