#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvar/app.hpp"

namespace {

using cvar::app::kExitNumeric;
using cvar::app::kExitUsage;
using Json = nlohmann::json;

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

/// Load a config JSON; a metadata file written by a previous run is accepted
/// too (its "config" object is used), so any emitted *_meta.json replays the
/// run that produced it.
Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cvar::ParamError("cannot open config file: " + path);
  Json j;
  in >> j;
  if (j.contains("config") && j["config"].is_object()) return j["config"];
  return j;
}

/// Apply file values to options the command line did not set.
class ConfigMerge {
 public:
  ConfigMerge(CLI::App* cmd, const Json* cfg) : cmd_(cmd), cfg_(cfg) {}

  template <class T>
  void fill(const std::string& flag, const std::string& key, T& value) {
    if (!cfg_ || !cfg_->contains(key)) return;
    const CLI::Option* opt = cmd_->get_option("--" + flag);
    if (opt && opt->count() > 0) return;  // command line wins
    value = cfg_->at(key).get<T>();
  }

  void fill_windows(const std::string& key, std::vector<int>& grid,
                    const std::string& flag) {
    if (!cfg_ || !cfg_->contains(key)) return;
    const CLI::Option* opt = cmd_->get_option("--" + flag);
    if (opt && opt->count() > 0) return;
    const Json& v = cfg_->at(key);
    grid.clear();
    if (v.is_string()) {
      grid = parse_int_list(v.get<std::string>());
    } else {
      for (const auto& e : v) grid.push_back(e.get<int>());
    }
  }

 private:
  CLI::App* cmd_;
  const Json* cfg_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Bayesian cointegrated VAR: Gibbs/adaptive-MH estimation, "
               "Bayes-factor rank inference, and model-averaged forecasting"};
  cli.require_subcommand(1);
  cli.set_help_all_flag("--help-all");

  cvar::app::SynthConfig synth;
  cvar::app::FitConfig fit;
  cvar::app::RankScanConfig rank;
  cvar::app::PredictConfig predict;
  std::string config_path;
  std::string window_csv;
  int predict_rank = -1;
  bool diffs_flag = false;

  CLI::App* c_synth = cli.add_subcommand("synth", "generate a synthetic panel");
  c_synth->add_option("--preset", synth.preset,
                      "named model (sugita-n4r2, highdim-n10r5)");
  c_synth->add_option("--n", synth.n, "series dimension (random model)");
  c_synth->add_option("--lag", synth.p, "lag order");
  c_synth->add_option("--rank", synth.r, "true cointegration rank");
  c_synth->add_option("--rows", synth.rows, "observations to emit");
  c_synth->add_option("--name", synth.name, "output file stem");
  c_synth->add_option("--out", synth.out, "output directory");
  c_synth->add_option("--seed", synth.seed, "rng seed");
  c_synth->add_option("--config", config_path, "JSON config / meta file");

  CLI::App* c_fit = cli.add_subcommand("fit", "run one chain at a fixed rank");
  c_fit->add_option("--data", fit.data, "panel CSV");
  c_fit->add_option("--lag", fit.lag, "lag order p");
  c_fit->add_option("--rank", fit.rank, "cointegration rank r");
  c_fit->add_option("--sampler", fit.sampler, "alg1 | alg2");
  c_fit->add_option("--target", fit.target, "collapsed | joint");
  c_fit->add_option("--init", fit.init, "ml | prior");
  c_fit->add_option("--iters", fit.iters, "sweeps J");
  c_fit->add_option("--burnin", fit.burnin, "burn-in sweeps");
  c_fit->add_option("--thin", fit.thin, "store every m-th sweep");
  c_fit->add_option("--prior-lambda", fit.prior.lambda, "prior scale lambda");
  c_fit->add_option("--prior-tau", fit.prior.tau, "prior scale tau (default 1/T)");
  c_fit->add_option("--prior-h", fit.prior.h, "Sigma prior dof (default n+1)");
  c_fit->add_option("--out", fit.out, "output directory");
  c_fit->add_option("--seed", fit.seed, "rng seed");
  c_fit->add_option("--jobs", fit.jobs, "worker threads (0 = hardware)");
  c_fit->add_option("--config", config_path, "JSON config / meta file");

  CLI::App* c_rank = cli.add_subcommand("rank", "Bayes-factor rank scan");
  c_rank->add_option("--data", rank.data, "panel CSV");
  c_rank->add_option("--lag", rank.lag, "lag order p");
  c_rank->add_option("--sampler", rank.sampler, "alg1 | alg2");
  c_rank->add_option("--iters", rank.iters, "sweeps per chain");
  c_rank->add_option("--burnin", rank.burnin, "burn-in sweeps");
  c_rank->add_option("--window-grid", window_csv,
                     "comma list of growing prefix lengths, e.g. 50,100,150");
  c_rank->add_option("--replicates", rank.replicates,
                     "independent chains per window");
  c_rank->add_option("--prior-lambda", rank.prior.lambda, "prior scale lambda");
  c_rank->add_option("--prior-tau", rank.prior.tau, "prior scale tau");
  c_rank->add_option("--prior-h", rank.prior.h, "Sigma prior dof");
  c_rank->add_option("--out", rank.out, "output directory");
  c_rank->add_option("--seed", rank.seed, "rng seed");
  c_rank->add_option("--jobs", rank.jobs, "worker threads (0 = hardware)");
  c_rank->add_option("--config", config_path, "JSON config / meta file");

  CLI::App* c_pred = cli.add_subcommand("predict", "BMOS/BMA forecasting");
  c_pred->add_option("--data", predict.data, "panel CSV");
  c_pred->add_option("--lag", predict.lag, "lag order p");
  c_pred->add_option("--mode", predict.mode, "bmos | bma");
  c_pred->add_option("--rank", predict_rank, "fixed rank (skips the scan)");
  c_pred->add_option("--horizon", predict.horizon, "steps ahead");
  c_pred->add_option("--paths", predict.paths, "sampled predictive paths");
  c_pred->add_flag("--diffs", diffs_flag, "emit differences instead of levels");
  c_pred->add_option("--sampler", predict.sampler, "alg1 | alg2");
  c_pred->add_option("--iters", predict.iters, "sweeps per chain");
  c_pred->add_option("--burnin", predict.burnin, "burn-in sweeps");
  c_pred->add_option("--eval-windows", predict.eval_windows,
                     "evaluate over this many random windows");
  c_pred->add_option("--eval-window-len", predict.eval_window_len,
                     "fit length of each evaluation window");
  c_pred->add_option("--prior-lambda", predict.prior.lambda, "prior scale lambda");
  c_pred->add_option("--prior-tau", predict.prior.tau, "prior scale tau");
  c_pred->add_option("--prior-h", predict.prior.h, "Sigma prior dof");
  c_pred->add_option("--out", predict.out, "output directory");
  c_pred->add_option("--seed", predict.seed, "rng seed");
  c_pred->add_option("--jobs", predict.jobs, "worker threads (0 = hardware)");
  c_pred->add_option("--config", config_path, "JSON config / meta file");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    Json cfg_json;
    const Json* cfg = nullptr;
    if (!config_path.empty()) {
      cfg_json = load_config(config_path);
      cfg = &cfg_json;
    }

    if (c_synth->parsed()) {
      ConfigMerge m(c_synth, cfg);
      m.fill("preset", "preset", synth.preset);
      m.fill("n", "n", synth.n);
      m.fill("lag", "p", synth.p);
      m.fill("rank", "rank", synth.r);
      m.fill("rows", "rows", synth.rows);
      m.fill("name", "name", synth.name);
      m.fill("out", "out", synth.out);
      m.fill("seed", "seed", synth.seed);
      return cvar::app::run_synth(synth);
    }
    if (c_fit->parsed()) {
      ConfigMerge m(c_fit, cfg);
      m.fill("data", "data", fit.data);
      m.fill("lag", "lag", fit.lag);
      m.fill("rank", "rank", fit.rank);
      m.fill("sampler", "sampler", fit.sampler);
      m.fill("target", "target", fit.target);
      m.fill("init", "init", fit.init);
      m.fill("iters", "iters", fit.iters);
      m.fill("burnin", "burnin", fit.burnin);
      m.fill("thin", "thin", fit.thin);
      m.fill("out", "out", fit.out);
      m.fill("seed", "seed", fit.seed);
      m.fill("jobs", "jobs", fit.jobs);
      if (cfg && cfg->contains("prior")) {
        const Json& p = cfg->at("prior");
        if (c_fit->get_option("--prior-lambda")->count() == 0 && p.contains("lambda"))
          fit.prior.lambda = p["lambda"].get<double>();
        if (c_fit->get_option("--prior-tau")->count() == 0 && p.contains("tau"))
          fit.prior.tau = p["tau"].get<double>();
        if (c_fit->get_option("--prior-h")->count() == 0 && p.contains("h"))
          fit.prior.h = p["h"].get<double>();
      }
      if (fit.data.empty()) throw cvar::ParamError("fit: --data is required");
      return cvar::app::run_fit(fit);
    }
    if (c_rank->parsed()) {
      ConfigMerge m(c_rank, cfg);
      m.fill("data", "data", rank.data);
      m.fill("lag", "lag", rank.lag);
      m.fill("sampler", "sampler", rank.sampler);
      m.fill("iters", "iters", rank.iters);
      m.fill("burnin", "burnin", rank.burnin);
      m.fill("replicates", "replicates", rank.replicates);
      m.fill("out", "out", rank.out);
      m.fill("seed", "seed", rank.seed);
      m.fill("jobs", "jobs", rank.jobs);
      if (!window_csv.empty()) rank.window_grid = parse_int_list(window_csv);
      m.fill_windows("window_grid", rank.window_grid, "window-grid");
      if (rank.data.empty()) throw cvar::ParamError("rank: --data is required");
      return cvar::app::run_rank_scan(rank);
    }
    if (c_pred->parsed()) {
      ConfigMerge m(c_pred, cfg);
      m.fill("data", "data", predict.data);
      m.fill("lag", "lag", predict.lag);
      m.fill("mode", "mode", predict.mode);
      m.fill("horizon", "horizon", predict.horizon);
      m.fill("paths", "paths", predict.paths);
      m.fill("sampler", "sampler", predict.sampler);
      m.fill("iters", "iters", predict.iters);
      m.fill("burnin", "burnin", predict.burnin);
      m.fill("eval-windows", "eval_windows", predict.eval_windows);
      m.fill("eval-window-len", "eval_window_len", predict.eval_window_len);
      m.fill("out", "out", predict.out);
      m.fill("seed", "seed", predict.seed);
      m.fill("jobs", "jobs", predict.jobs);
      if (c_pred->get_option("--rank")->count() > 0) {
        predict.rank = predict_rank;
      } else if (cfg && cfg->contains("rank")) {
        predict.rank = cfg->at("rank").get<int>();
      }
      if (diffs_flag) predict.levels = false;
      else if (cfg && cfg->contains("levels"))
        predict.levels = cfg->at("levels").get<bool>();
      if (predict.data.empty())
        throw cvar::ParamError("predict: --data is required");
      return cvar::app::run_predict(predict);
    }
  } catch (const cvar::ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cvar::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cvar::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
