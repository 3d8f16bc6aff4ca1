#include "cvar/app.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "cvar/forecast.hpp"
#include "cvar/parallel.hpp"

namespace cvar::app {

namespace fs = std::filesystem;

SamplerKind parse_sampler(const std::string& s) {
  if (s == "alg1") return SamplerKind::alg1;
  if (s == "alg2") return SamplerKind::alg2;
  throw ParamError("unknown sampler '" + s + "' (expected alg1 or alg2)");
}

TargetForm parse_target(const std::string& s) {
  if (s == "collapsed") return TargetForm::collapsed;
  if (s == "joint") return TargetForm::joint;
  throw ParamError("unknown target form '" + s + "' (expected collapsed or joint)");
}

namespace {

std::string out_path(const std::string& dir, const std::string& file) {
  fs::create_directories(dir);
  return (fs::path(dir) / file).string();
}

PriorSpec build_prior(const EcmDesign& design, int series_len,
                      const PriorOverrides& o) {
  return default_prior(design, series_len, o.lambda, o.tau, o.h);
}

Json prior_json(const PriorOverrides& o) {
  return Json{{"lambda", o.lambda}, {"tau", o.tau}, {"h", o.h}};
}

void write_meta(const std::string& dir, const std::string& file,
                const std::string& command, Json config) {
  Json meta;
  meta["command"] = command;
  meta["version"] = kVersion;
  meta["config"] = std::move(config);
  write_json(meta, out_path(dir, file));
}

SamplerConfig make_sampler_config(SamplerKind kind, const FitContext& ctx,
                                  TargetForm target, int thin,
                                  RngStream tune_rng) {
  SamplerConfig cfg;
  cfg.kind = kind;
  cfg.target_form = target;
  cfg.thin = thin;
  const EcmDesign& d = ctx.design();
  if (kind == SamplerKind::alg1 && (d.n - d.r) * d.r > 0) {
    const ThinBeta init = ThinBeta::from_free(
        d.n, d.r, ctx.prior().beta_mean.bottomRows(d.n - d.r));
    cfg.alg1 = pretune_local_sd(
        [&](const ThinBeta& b) { return ctx.log_target(b); }, d.n, d.r, init,
        tune_rng);
  } else {
    cfg.alg2 = Alg2Config::make(d.n, d.r);
  }
  return cfg;
}

ChainTrace run_one_chain(const EcmDesign& design, const PriorSpec& prior,
                         SamplerKind sampler, TargetForm target, int iters,
                         int burnin, int thin, const ChainInit& init,
                         RngStream rng) {
  const FitContext ctx = FitContext::make(design, prior);
  const SamplerConfig cfg =
      make_sampler_config(sampler, ctx, target, thin, rng.derive(0xA1));
  return run_chain(ctx, cfg, iters, burnin, init, rng.derive(0xC4));
}

Eigen::MatrixXd panel_tail(const TimeSeriesPanel& panel, int p) {
  return panel.levels.bottomRows(p);
}

}  // namespace

std::vector<FittedRank> fit_ranks(const TimeSeriesPanel& panel, int lag,
                                  const std::vector<int>& ranks,
                                  SamplerKind sampler, int iters, int burnin,
                                  const PriorOverrides& prior,
                                  std::uint64_t seed, std::uint64_t stream_salt,
                                  int jobs) {
  std::vector<FittedRank> fits(ranks.size());
  parallel_for_index(ranks.size(), jobs, [&](std::size_t i) {
    const int r = ranks[i];
    FittedRank fit;
    fit.r = r;
    fit.design = std::make_unique<EcmDesign>(build_ecm_design(panel, lag, r));
    fit.prior = std::make_unique<PriorSpec>(
        build_prior(*fit.design, panel.rows(), prior));
    const RngStream rng(seed, splitmix64(stream_salt ^ (0xB5 + 7919ULL * r)));
    fit.trace = run_one_chain(*fit.design, *fit.prior, sampler,
                              TargetForm::collapsed, iters, burnin, 1,
                              ChainInit::ml(), rng);
    fits[i] = std::move(fit);
  });
  return fits;
}

std::vector<RankFit> rank_views(const std::vector<FittedRank>& fits,
                                bool include_rank_zero) {
  std::vector<RankFit> views;
  for (const auto& f : fits) {
    if (f.r == 0 && !include_rank_zero) continue;
    views.push_back(RankFit{f.r, f.design.get(), f.prior.get(), &f.trace});
  }
  return views;
}

int run_synth(const SynthConfig& cfg) {
  TrueModel model;
  if (!cfg.preset.empty()) {
    model = preset_model(cfg.preset);
  } else {
    if (cfg.n < 1) throw ParamError("synth: give --preset or --n/--p/--rank");
    if (cfg.r > cfg.n) throw ParamError("synth: rank cannot exceed n");
    RngStream model_rng(cfg.seed, 101);
    model = random_true_model(cfg.n, cfg.p, cfg.r, model_rng);
  }
  RngStream sim_rng(cfg.seed, 202);
  const TimeSeriesPanel panel = simulate(model, cfg.rows, sim_rng);
  write_panel_csv(panel, out_path(cfg.out, cfg.name + ".csv"));

  Json truth;
  truth["n"] = model.n;
  truth["p"] = model.p;
  truth["r"] = model.r;
  truth["mu"] = vector_to_json(model.mu);
  truth["alpha"] = matrix_to_json(model.alpha);
  truth["beta_free"] = matrix_to_json(model.beta.free);
  Json psis = Json::array();
  for (const auto& psi : model.psi) psis.push_back(matrix_to_json(psi));
  truth["psi"] = std::move(psis);
  truth["sigma"] = matrix_to_json(model.sigma.m());
  write_json(truth, out_path(cfg.out, cfg.name + "_truth.json"));

  Json config;
  config["preset"] = cfg.preset;
  config["n"] = cfg.n;
  config["p"] = cfg.p;
  config["rank"] = cfg.r;
  config["rows"] = cfg.rows;
  config["name"] = cfg.name;
  config["seed"] = cfg.seed;
  write_meta(cfg.out, cfg.name + "_meta.json", "synth", std::move(config));
  std::cout << "synth: wrote " << panel.rows() << "x" << panel.dim()
            << " panel to " << out_path(cfg.out, cfg.name + ".csv") << "\n";
  return kExitOk;
}

int run_fit(const FitConfig& cfg) {
  const TimeSeriesPanel panel = read_panel_csv(cfg.data);
  const EcmDesign design = build_ecm_design(panel, cfg.lag, cfg.rank);
  const PriorSpec prior = build_prior(design, panel.rows(), cfg.prior);
  const ChainInit init =
      cfg.init == "prior" ? ChainInit::prior() : ChainInit::ml();

  const ChainTrace trace = run_one_chain(
      design, prior, parse_sampler(cfg.sampler), parse_target(cfg.target),
      cfg.iters, cfg.burnin, cfg.thin, init, RngStream(cfg.seed, 0));

  const PointEstimates est = point_estimates(trace);
  const Diagnostics diag = diagnostics(trace);

  write_trace_csv(trace, out_path(cfg.out, "trace.csv"));
  write_json(estimates_json(est, design.gamma_rows),
             out_path(cfg.out, "estimates.json"));
  write_json(diagnostics_json(diag), out_path(cfg.out, "diagnostics.json"));

  Json config;
  config["data"] = cfg.data;
  config["lag"] = cfg.lag;
  config["rank"] = cfg.rank;
  config["sampler"] = cfg.sampler;
  config["target"] = cfg.target;
  config["init"] = cfg.init;
  config["iters"] = cfg.iters;
  config["burnin"] = cfg.burnin;
  config["thin"] = cfg.thin;
  config["prior"] = prior_json(cfg.prior);
  config["seed"] = cfg.seed;
  config["jobs"] = cfg.jobs;
  Json meta;
  meta["command"] = "fit";
  meta["version"] = kVersion;
  meta["config"] = std::move(config);
  Json accept;
  accept["beta_accept_rate"] = diag.beta_accept_rate;
  for (const auto& ms : diag.moves)
    accept[move_kind_name(ms.kind)] = ms.rate();
  meta["acceptance"] = std::move(accept);
  meta["watchdog_fraction"] = diag.alpha_watchdog_fraction;
  meta["retained"] = trace.retained();
  write_json(meta, out_path(cfg.out, "fit_meta.json"));

  std::cout << "fit: rank " << cfg.rank << ", " << trace.retained()
            << " retained draws, beta acceptance "
            << diag.beta_accept_rate << ", tr(Sigma) MMSE "
            << est.trace_sigma_mmse << "\n";
  if (diag.alpha_watchdog_fraction > kWatchdogHardLimit) {
    std::cerr << "fit: watchdog hard-fail, " << diag.alpha_watchdog_fraction
              << " of retained states have alpha ~ 0\n";
    return kExitWatchdog;
  }
  if (diag.watchdog_flag) {
    std::cerr << "fit: warning, alpha ~ 0 in " << diag.alpha_watchdog_fraction
              << " of retained states (local identification trap)\n";
  }
  return kExitOk;
}

int run_rank_scan(const RankScanConfig& cfg) {
  const TimeSeriesPanel panel = read_panel_csv(cfg.data);
  const int n = panel.dim();
  std::vector<int> windows = cfg.window_grid;
  if (windows.empty()) windows.push_back(panel.rows());
  for (int w : windows) {
    if (w < cfg.lag + 2 || w > panel.rows()) {
      throw ParamError("rank: window " + std::to_string(w) +
                       " outside [lag+2, panel rows]");
    }
  }
  const int reps = std::max(1, cfg.replicates);
  const SamplerKind sampler = parse_sampler(cfg.sampler);

  std::vector<int> ranks;
  for (int r = 1; r <= n; ++r) ranks.push_back(r);

  struct Task {
    std::size_t w_idx;
    int rep;
    RankPosterior rp;
  };
  std::vector<Task> tasks;
  for (std::size_t w = 0; w < windows.size(); ++w)
    for (int rep = 0; rep < reps; ++rep) tasks.push_back(Task{w, rep, {}});

  // One worker per (window, replicate); chains inside run serially unless
  // there is spare capacity.
  const int jobs = resolve_jobs(cfg.jobs);
  const int inner_jobs = tasks.size() >= static_cast<std::size_t>(jobs)
                             ? 1
                             : std::max(1, jobs / static_cast<int>(tasks.size()));
  parallel_for_index(tasks.size(), jobs, [&](std::size_t ti) {
    Task& task = tasks[ti];
    TimeSeriesPanel sub;
    sub.labels = panel.labels;
    sub.levels = panel.levels.topRows(windows[task.w_idx]);
    const std::uint64_t salt =
        (static_cast<std::uint64_t>(task.w_idx) << 32) |
        static_cast<std::uint64_t>(task.rep);
    const std::vector<FittedRank> fits =
        fit_ranks(sub, cfg.lag, ranks, sampler, cfg.iters, cfg.burnin,
                  cfg.prior, cfg.seed, salt, inner_jobs);
    task.rp = rank_posterior(rank_views(fits, false), n,
                             L1Exponent::matrix_t, inner_jobs);
  });

  // Aggregate log BFs across replicates per window.
  Eigen::MatrixXd mean_bf = Eigen::MatrixXd::Zero(n + 1, static_cast<int>(windows.size()));
  Eigen::MatrixXd sd_bf = mean_bf;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    for (int r = 0; r <= n; ++r) {
      double s = 0.0, s2 = 0.0;
      for (const Task& task : tasks) {
        if (task.w_idx != w) continue;
        const double v = task.rp.log_bf(r);
        s += v;
        s2 += v * v;
      }
      const double mean = s / reps;
      mean_bf(r, static_cast<int>(w)) = mean;
      sd_bf(r, static_cast<int>(w)) =
          reps > 1 ? std::sqrt(std::max(0.0, (s2 - reps * mean * mean) / (reps - 1)))
                   : 0.0;
    }
  }

  auto write_table = [&](const Eigen::MatrixXd& m, const std::string& file) {
    std::ofstream out(out_path(cfg.out, file));
    out << "rank";
    for (int w : windows) out << ",T" << w;
    out << "\n";
    for (int r = 0; r <= n; ++r) {
      out << r;
      for (int w = 0; w < m.cols(); ++w) out << "," << format_double(m(r, w));
      out << "\n";
    }
  };
  write_table(mean_bf, "logbf_mean.csv");
  write_table(sd_bf, "logbf_sd.csv");

  Json report = Json::array();
  for (std::size_t w = 0; w < windows.size(); ++w) {
    Json jw;
    jw["window"] = windows[w];
    Json reps_json = Json::array();
    for (const Task& task : tasks) {
      if (task.w_idx != w) continue;
      Json jr = rank_posterior_json(task.rp);
      jr["replicate"] = task.rep;
      reps_json.push_back(std::move(jr));
    }
    jw["replicates"] = std::move(reps_json);
    Json mean_col = Json::array();
    for (int r = 0; r <= n; ++r) mean_col.push_back(mean_bf(r, static_cast<int>(w)));
    jw["mean_log_bf"] = std::move(mean_col);
    report.push_back(std::move(jw));
  }
  write_json(report, out_path(cfg.out, "rank_report.json"));

  Json config;
  config["data"] = cfg.data;
  config["lag"] = cfg.lag;
  config["sampler"] = cfg.sampler;
  config["iters"] = cfg.iters;
  config["burnin"] = cfg.burnin;
  Json grid = Json::array();
  for (int w : windows) grid.push_back(w);
  config["window_grid"] = std::move(grid);
  config["replicates"] = reps;
  config["prior"] = prior_json(cfg.prior);
  config["seed"] = cfg.seed;
  config["jobs"] = cfg.jobs;
  write_meta(cfg.out, "rank_meta.json", "rank", std::move(config));

  std::cout << "rank: " << windows.size() << " window(s) x " << reps
            << " replicate(s); MAP of last window/replicate = "
            << tasks.back().rp.map_rank() << "\n";
  return kExitOk;
}

namespace {

struct PredictOutputs {
  ForecastResult result;
  RankPosterior rp;
  bool scanned = false;
  int used_rank = -1;
};

PredictOutputs predict_on_panel(const TimeSeriesPanel& panel,
                                const PredictConfig& cfg,
                                std::uint64_t stream_salt, int jobs) {
  const int n = panel.dim();
  const SamplerKind sampler = parse_sampler(cfg.sampler);
  ForecastRequest req;
  req.horizon = cfg.horizon;
  req.n_noise_paths = cfg.paths;
  req.levels = cfg.levels;
  req.mode = cfg.mode == "bma" ? ForecastMode::bma : ForecastMode::bmos;

  PredictOutputs out;
  RngStream noise_rng(cfg.seed, splitmix64(stream_salt ^ 0xF0CA57ULL));

  if (req.mode == ForecastMode::bmos && cfg.rank.has_value()) {
    const std::vector<FittedRank> fits =
        fit_ranks(panel, cfg.lag, {*cfg.rank}, sampler, cfg.iters, cfg.burnin,
                  cfg.prior, cfg.seed, stream_salt, jobs);
    out.used_rank = *cfg.rank;
    out.result = predict_fixed_rank(fits[0].trace, cfg.lag,
                                    panel_tail(panel, cfg.lag), req, noise_rng,
                                    jobs);
    return out;
  }

  // Scan all ranks; rank 0 needs no chain for the Bayes factors but its
  // (exact) chain joins the predictive mixture.
  std::vector<int> ranks;
  for (int r = 0; r <= n; ++r) ranks.push_back(r);
  const std::vector<FittedRank> fits =
      fit_ranks(panel, cfg.lag, ranks, sampler, cfg.iters, cfg.burnin,
                cfg.prior, cfg.seed, stream_salt, jobs);
  out.rp = rank_posterior(rank_views(fits, false), n, L1Exponent::matrix_t, jobs);
  out.scanned = true;

  if (req.mode == ForecastMode::bmos) {
    const int map = out.rp.map_rank();
    out.used_rank = map;
    out.result = predict_fixed_rank(fits[static_cast<std::size_t>(map)].trace,
                                    cfg.lag, panel_tail(panel, cfg.lag), req,
                                    noise_rng, jobs);
  } else {
    out.result = predict_bma(rank_views(fits, true), out.rp, cfg.lag,
                             panel_tail(panel, cfg.lag), req, noise_rng, jobs);
  }
  return out;
}

}  // namespace

int run_predict(const PredictConfig& cfg) {
  const TimeSeriesPanel panel = read_panel_csv(cfg.data);
  const int jobs = resolve_jobs(cfg.jobs);

  if (cfg.eval_windows > 0) {
    // Squared-error study over random windows: fit on each window, predict
    // `horizon` steps, compare against the realized continuation under both
    // model selection and model averaging.
    const int len = cfg.eval_window_len;
    if (len < cfg.lag + 2)
      throw ParamError("predict: eval window shorter than lag+2");
    const int max_start = panel.rows() - len - cfg.horizon;
    if (max_start < 0)
      throw ParamError("predict: panel too short for the evaluation windows");

    RngStream window_rng(cfg.seed, 777);
    std::ofstream csv(out_path(cfg.out, "prediction_eval.csv"));
    csv << "window,start,day,sqerr_bmos,sqerr_bma,iqr_bmos,iqr_bma\n";

    int wider = 0;
    for (int w = 0; w < cfg.eval_windows; ++w) {
      const int start = static_cast<int>(window_rng.uniform() * (max_start + 1));
      TimeSeriesPanel sub;
      sub.labels = panel.labels;
      sub.levels = panel.levels.middleRows(start, len);

      PredictConfig bmos_cfg = cfg;
      bmos_cfg.mode = "bmos";
      bmos_cfg.rank.reset();
      PredictConfig bma_cfg = cfg;
      bma_cfg.mode = "bma";
      const std::uint64_t salt = 0x11E * (static_cast<std::uint64_t>(w) + 1);
      const PredictOutputs bmos = predict_on_panel(sub, bmos_cfg, salt, jobs);
      const PredictOutputs bma = predict_on_panel(sub, bma_cfg, salt, jobs);

      const Eigen::MatrixXd realized =
          panel.levels.middleRows(start + len, cfg.horizon);
      double iqr_bmos_term = 0.0, iqr_bma_term = 0.0;
      for (int day = 0; day < cfg.horizon; ++day) {
        const double se_bmos =
            (bmos.result.mean_path.row(day) - realized.row(day)).squaredNorm();
        const double se_bma =
            (bma.result.mean_path.row(day) - realized.row(day)).squaredNorm();
        const double iqr_bmos =
            (bmos.result.q75.row(day) - bmos.result.q25.row(day)).mean();
        const double iqr_bma =
            (bma.result.q75.row(day) - bma.result.q25.row(day)).mean();
        csv << w << "," << start << "," << (day + 1) << ","
            << format_double(se_bmos) << "," << format_double(se_bma) << ","
            << format_double(iqr_bmos) << "," << format_double(iqr_bma) << "\n";
        if (day == cfg.horizon - 1) {
          iqr_bmos_term = iqr_bmos;
          iqr_bma_term = iqr_bma;
        }
      }
      if (iqr_bma_term >= iqr_bmos_term) ++wider;
    }
    Json summary;
    summary["windows"] = cfg.eval_windows;
    summary["bma_iqr_geq_bmos_fraction"] =
        static_cast<double>(wider) / cfg.eval_windows;
    write_json(summary, out_path(cfg.out, "eval_summary.json"));
    std::cout << "predict: evaluation over " << cfg.eval_windows
              << " windows; BMA terminal IQR >= BMOS in "
              << (static_cast<double>(wider) / cfg.eval_windows) << "\n";
  } else {
    const PredictOutputs outputs = predict_on_panel(panel, cfg, 0, jobs);
    write_forecast_csv(outputs.result, panel.labels,
                       out_path(cfg.out, "forecast.csv"));
    Json fj;
    fj["mode"] = cfg.mode;
    fj["horizon"] = cfg.horizon;
    fj["levels"] = cfg.levels;
    fj["mean_path"] = matrix_to_json(outputs.result.mean_path);
    fj["paths_used"] = outputs.result.paths_used;
    fj["paths_dropped"] = outputs.result.paths_dropped;
    fj["overflow_flag"] = outputs.result.overflow_flag;
    if (outputs.scanned) {
      fj["rank_posterior"] = rank_posterior_json(outputs.rp);
    }
    if (outputs.used_rank >= 0) fj["rank_used"] = outputs.used_rank;
    write_json(fj, out_path(cfg.out, "forecast.json"));
    std::cout << "predict: " << cfg.mode << " forecast over " << cfg.horizon
              << " steps written\n";
  }

  Json config;
  config["data"] = cfg.data;
  config["lag"] = cfg.lag;
  config["mode"] = cfg.mode;
  if (cfg.rank.has_value()) config["rank"] = *cfg.rank;
  config["horizon"] = cfg.horizon;
  config["paths"] = cfg.paths;
  config["levels"] = cfg.levels;
  config["sampler"] = cfg.sampler;
  config["iters"] = cfg.iters;
  config["burnin"] = cfg.burnin;
  config["eval_windows"] = cfg.eval_windows;
  config["eval_window_len"] = cfg.eval_window_len;
  config["prior"] = prior_json(cfg.prior);
  config["seed"] = cfg.seed;
  config["jobs"] = cfg.jobs;
  write_meta(cfg.out, "predict_meta.json", "predict", std::move(config));
  return kExitOk;
}

}  // namespace cvar::app
