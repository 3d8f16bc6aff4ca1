#pragma once

#include <string>

#include <json.hpp>

#include "cvar/forecast.hpp"
#include "cvar/gibbs.hpp"
#include "cvar/rank.hpp"

namespace cvar {

using Json = nlohmann::ordered_json;

/// One row per retained iteration; columns are flattened parameter names:
/// free beta entries as beta_<row>_<col> (full-matrix 1-based indices),
/// every B entry, and the upper triangle of Sigma.
void write_trace_csv(const ChainTrace& trace, const std::string& path);

Json matrix_to_json(const Eigen::MatrixXd& m);
Json vector_to_json(const Eigen::VectorXd& v);

void write_json(const Json& j, const std::string& path);

Json estimates_json(const PointEstimates& est, int gamma_rows);
Json diagnostics_json(const Diagnostics& diag);
Json rank_posterior_json(const RankPosterior& rp);

void write_forecast_csv(const ForecastResult& result,
                        const std::vector<std::string>& labels,
                        const std::string& path);

}  // namespace cvar
