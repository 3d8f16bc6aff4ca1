#include "cvar/io.hpp"

#include <fstream>

#include "cvar/panel.hpp"

namespace cvar {

void write_trace_csv(const ChainTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParamError("cannot write trace CSV: " + path);
  if (trace.retained() == 0) throw ParamError("write_trace_csv: empty trace");

  const ChainState& first = trace.retained_state(0);
  const int n = first.beta.n;
  const int r = first.beta.r;
  const int nf = n - r;
  const int k = static_cast<int>(first.B.rows());

  out << "iter";
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < nf; ++i)
      out << ",beta_" << (r + i + 1) << "_" << (j + 1);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < k; ++i) out << ",B_" << (i + 1) << "_" << (j + 1);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out << ",Sigma_" << (i + 1) << "_" << (j + 1);
  out << "\n";

  for (std::size_t s = 0; s < trace.retained(); ++s) {
    const ChainState& st = trace.retained_state(s);
    const long long iter =
        static_cast<long long>(trace.burnin_stored + s + 1) * trace.thin;
    out << iter;
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < nf; ++i)
        out << "," << format_double(st.beta.free(i, j));
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < k; ++i) out << "," << format_double(st.B(i, j));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        out << "," << format_double(st.Sigma.m()(i, j));
    out << "\n";
  }
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void write_json(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParamError("cannot write JSON: " + path);
  out << j.dump(2) << "\n";
}

Json estimates_json(const PointEstimates& est, int gamma_rows) {
  const int r = est.beta_mmse.r;
  Json j;
  j["beta_free_mmse"] = matrix_to_json(est.beta_mmse.free);
  j["beta_free_sd"] = matrix_to_json(est.beta_sd);
  j["B_mmse"] = matrix_to_json(est.B_mmse);
  j["B_sd"] = matrix_to_json(est.B_sd);
  j["Sigma_mmse"] = matrix_to_json(est.Sigma_mmse.m());
  j["Sigma_sd"] = matrix_to_json(est.Sigma_sd);
  j["mu_mmse"] = vector_to_json(est.B_mmse.row(0).transpose());
  j["mu_sd"] = vector_to_json(est.B_sd.row(0).transpose());
  if (r > 0) {
    j["alpha_mmse"] = matrix_to_json(est.B_mmse.bottomRows(r).transpose());
    j["alpha_sd"] = matrix_to_json(est.B_sd.bottomRows(r).transpose());
  }
  j["trace_sigma_mmse"] = est.trace_sigma_mmse;
  j["trace_sigma_sd"] = est.trace_sigma_sd;
  j["gamma_rows"] = gamma_rows;
  return j;
}

Json diagnostics_json(const Diagnostics& diag) {
  Json j;
  Json params = Json::array();
  for (const auto& p : diag.params) {
    params.push_back(Json{{"name", p.name}, {"ess", p.ess}, {"act", p.act}});
  }
  j["params"] = std::move(params);
  Json moves = Json::array();
  for (const auto& m : diag.moves) {
    moves.push_back(Json{{"kind", move_kind_name(m.kind)},
                         {"proposed", m.proposed},
                         {"accepted", m.accepted},
                         {"rate", m.rate()}});
  }
  j["moves"] = std::move(moves);
  j["beta_accept_rate"] = diag.beta_accept_rate;
  j["min_ess"] = diag.min_ess;
  j["alpha_watchdog_fraction"] = diag.alpha_watchdog_fraction;
  j["watchdog_flag"] = diag.watchdog_flag;
  return j;
}

Json rank_posterior_json(const RankPosterior& rp) {
  Json j;
  j["log_bf"] = vector_to_json(rp.log_bf);
  j["probs"] = vector_to_json(rp.probs);
  j["map_rank"] = rp.map_rank();
  Json ranks = Json::array();
  for (const auto& d : rp.diag) {
    Json e;
    e["r"] = d.r;
    e["log_bf"] = d.log_bf;
    e["mc_se"] = d.mc_se;
    e["log_prior_alpha0"] = d.log_prior0;
    e["log_posterior_alpha0"] = d.log_post0;
    e["log_correction"] = d.log_cr;
    e["max_shift"] = d.max_shift;
    e["n_terms"] = d.n_terms;
    e["dropped"] = d.dropped;
    e["excluded"] = d.excluded;
    if (!d.error.empty()) e["error"] = d.error;
    ranks.push_back(std::move(e));
  }
  j["ranks"] = std::move(ranks);
  return j;
}

void write_forecast_csv(const ForecastResult& result,
                        const std::vector<std::string>& labels,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParamError("cannot write forecast CSV: " + path);
  const int h = static_cast<int>(result.mean_path.rows());
  const int n = static_cast<int>(result.mean_path.cols());
  const bool bands = result.q05.size() > 0;

  out << "step";
  for (int j = 0; j < n; ++j) {
    const std::string& lbl = labels[static_cast<std::size_t>(j)];
    out << "," << lbl << "_mean";
    if (bands) {
      out << "," << lbl << "_q05," << lbl << "_q25," << lbl << "_q50,"
          << lbl << "_q75," << lbl << "_q95";
    }
  }
  out << "\n";
  for (int s = 0; s < h; ++s) {
    out << (s + 1);
    for (int j = 0; j < n; ++j) {
      out << "," << format_double(result.mean_path(s, j));
      if (bands) {
        out << "," << format_double(result.q05(s, j)) << ","
            << format_double(result.q25(s, j)) << ","
            << format_double(result.q50(s, j)) << ","
            << format_double(result.q75(s, j)) << ","
            << format_double(result.q95(s, j));
      }
    }
    out << "\n";
  }
}

}  // namespace cvar
