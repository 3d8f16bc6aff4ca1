// Timing comparison of the serial reference kernels against their OpenMP
// versions: the per-draw Bayes-factor terms, the forecast mean-path map,
// and a pool of independent chains.

#include <chrono>
#include <cstdio>

#include "cvar/app.hpp"
#include "cvar/forecast.hpp"
#include "cvar/parallel.hpp"
#include "cvar/rank.hpp"
#include "cvar/synth.hpp"

using namespace cvar;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

template <class F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return seconds_since(t0);
}

}  // namespace

int main() {
  const int jobs = resolve_jobs(0);
  std::printf("hardware threads: %d\n\n", jobs);

  const TrueModel model = preset_model("sugita-n4r2");
  RngStream rng(42, 7);
  const TimeSeriesPanel panel = simulate(model, 100, rng);
  const EcmDesign design = build_ecm_design(panel, model.p, model.r);
  const PriorSpec prior = default_prior(design, panel.rows());
  const FitContext ctx = FitContext::make(design, prior);

  SamplerConfig scfg;
  scfg.kind = SamplerKind::alg2;
  scfg.alg2 = Alg2Config::make(design.n, design.r);
  ChainTrace trace;
  const double chain_s = timed([&] {
    trace = run_chain(ctx, scfg, 20000, 10000, ChainInit::ml(), RngStream(42, 1));
  });
  std::printf("20000-sweep chain for draw material: %.2fs (%zu retained)\n\n",
              chain_s, trace.retained());

  std::printf("kernel 1: Bayes-factor per-draw terms (%zu draws)\n",
              trace.retained());
  std::vector<double> serial_terms, parallel_terms;
  const double t_ser = timed([&] {
    serial_terms =
        posterior_alpha_zero_terms_serial(trace, ctx, L1Exponent::matrix_t);
  });
  const double t_par = timed([&] {
    parallel_terms =
        posterior_alpha_zero_terms(trace, ctx, L1Exponent::matrix_t, jobs);
  });
  bool identical = serial_terms == parallel_terms;
  std::printf("  serial %.3fs | omp(%d) %.3fs | speedup %.2fx | bit-identical: %s\n\n",
              t_ser, jobs, t_par, t_ser / t_par, identical ? "yes" : "NO");

  std::printf("kernel 2: forecast mean paths (horizon 20)\n");
  const Eigen::MatrixXd tail = panel.levels.bottomRows(model.p);
  Eigen::MatrixXd mp_ser, mp_par;
  std::size_t dropped = 0;
  const double f_ser = timed([&] {
    mp_ser = mean_path_kernel_serial(trace, model.p, tail, 20, true, &dropped);
  });
  const double f_par = timed([&] {
    mp_par = mean_path_kernel(trace, model.p, tail, 20, true, &dropped, jobs);
  });
  identical = (mp_ser - mp_par).cwiseAbs().maxCoeff() == 0.0;
  std::printf("  serial %.3fs | omp(%d) %.3fs | speedup %.2fx | bit-identical: %s\n\n",
              f_ser, jobs, f_par, f_ser / f_par, identical ? "yes" : "NO");

  std::printf("kernel 3: chain pool (4 ranks)\n");
  const std::vector<int> ranks{1, 2, 3, 4};
  const double c_ser = timed([&] {
    app::fit_ranks(panel, model.p, ranks, SamplerKind::alg2, 4000, 2000, {},
                   42, 5, 1);
  });
  const double c_par = timed([&] {
    app::fit_ranks(panel, model.p, ranks, SamplerKind::alg2, 4000, 2000, {},
                   42, 5, jobs);
  });
  std::printf("  serial %.3fs | omp(%d) %.3fs | speedup %.2fx\n", c_ser, jobs,
              c_par, c_ser / c_par);
  return 0;
}
