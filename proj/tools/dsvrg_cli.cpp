#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dsvrg/cluster.hpp"
#include "dsvrg/data_alloc.hpp"
#include "dsvrg/io.hpp"
#include "dsvrg/lowerbound.hpp"

namespace {

using namespace dsvrg;

const std::vector<std::string> kConfigKeys = {
    "source",  "path",      "rescale_labels", "synth",      "synth_n",  "synth_d",          "synth_kappa",
    "data_seed", "rff_dim", "rff_bandwidth",  "loss",       "lambda_rule", "lambda",        "gamma",
    "m",       "C",         "n_tilde",        "algorithms", "eta",      "T",                "K",
    "P",       "sigma",     "seeds",          "epsilon",    "max_rounds", "checkpoint_every", "output",
    "hard_k",  "hard_u",    "hard_kappa_prime", "hard_mu_prime", "hard_n", "hard_v"};

int cmd_allocate(Index N, Index m, Index C, Index Q, std::uint64_t seed, const std::string& out) {
  const auto cap = CapacityConfig::make(N, m, C);
  const auto plan = allocate(N, m, Q, cap, seed);
  if (out.empty() || out == "-") {
    write_plan(std::cout, plan);
  } else {
    std::ofstream os(out);
    if (!os) fail(ErrorCode::Io, "cannot write " + out);
    write_plan(os, plan);
  }
  std::cerr << "extra_transfers=" << plan.extra_transfers << " resampled=" << plan.resampled
            << " bound=" << format_double(expected_extra_comm_bound(Q, N)) << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::map<std::string, std::string>& overrides, bool practical,
            bool shortcut, bool dump_config) {
  ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : parse_config_file(config_path);
  for (const auto& [k, v] : overrides) set_config_field(cfg, k, v);
  if (practical) cfg.practical = true;
  if (shortcut) cfg.shortcut = true;
  validate_config(cfg);
  if (dump_config) {
    write_config(std::cout, cfg);
    return 0;
  }
  const auto rep = run_experiment(cfg, &std::cerr);
  std::cout << "lambda=" << format_double(rep.lambda) << " L=" << format_double(rep.info.L)
            << " mu=" << format_double(rep.info.mu) << " kappa=" << format_double(rep.info.kappa) << "\n";
  for (const auto& r : rep.runs) {
    const auto& led = r.result.ledger;
    const double gap = led.gap_trace.empty() ? 0.0 : led.gap_trace.back().gap;
    std::cout << r.algo << " seed=" << r.seed << " rounds=" << led.rounds << " vectors=" << led.vectors_sent
              << " runtime=" << led.parallel_runtime << " gap=" << format_double(gap) << " -> " << r.csv_path << "\n";
  }
  std::cout << "plot script: " << rep.plot_path << "\n";
  return 0;
}

int cmd_probe(HardParams p, Index n_tilde, Index rounds, const std::string& algo, std::uint64_t seed,
              const std::string& export_path) {
  if (p.u == 0) p.u = default_repetitions(p.kappa_prime, p.k);
  p.validate();
  if (!export_path.empty()) {
    std::ofstream os(export_path);
    if (!os) fail(ErrorCode::Io, "cannot write " + export_path);
    write_hard_instance(os, p);
  }
  HardInstance f(p);
  const SmoothnessInfo info{p.L(), p.mu(), p.kappa()};
  const Vector x0 = Vector::Zero(static_cast<Eigen::Index>(p.d()));
  const GapOracle gap = [&f](const Vector& x) { return f.gap(x); };
  SpanProbe probe(p.b());
  RunResult res;
  if (algo == "accel_grad") {
    const auto plan = adversarial_plan(p, 1, seed);
    Cluster cl(plan);
    cl.set_probe(&probe);
    AccelGradOptions ao;
    ao.max_rounds = rounds;
    ao.gap = gap;
    res = accel_grad_run(f, cl, info, x0, ao);
  } else if (algo == "dsvrg") {
    const Index T = std::max<Index>(1, n_tilde);
    const Index K = rounds;
    const auto plan = adversarial_plan(p, std::max<Index>(n_tilde, (T * K + p.m() - 1) / p.m()), seed);
    Cluster cl(plan);
    cl.set_probe(&probe);
    SvrgConfig cfg{1.0 / (16.0 * p.L()), T, K, false};
    RunOptions ro{gap, 0.0, rounds};
    res = dsvrg_run(f, cl, cfg, x0, ro);
  } else {
    fail(ErrorCode::Config, "algo: expected accel_grad or dsvrg");
  }
  std::cout << "# k=" << p.k << " u=" << p.u << " b=" << p.b() << " kappa_prime=" << format_double(p.kappa_prime)
            << " h=" << format_double(pbar_minimizer(p).h) << "\n";
  std::cout << "round,max_support,reachable\n";
  for (Index r = 0; r < probe.trace().size(); ++r)
    std::cout << r << ',' << probe.trace()[r] << ',' << reachable_dim(r, p.k) << "\n";
  std::cout << "checkpoint,rounds,gap,bound\n";
  for (const auto& c : res.ledger.gap_trace)
    std::cout << c.stage << ',' << c.rounds << ',' << format_double(c.gap) << ','
              << format_double(span_gap_lower_bound(p, std::min(p.b(), reachable_dim(c.rounds, p.k)))) << "\n";
  std::cout << "max_growth=" << probe.max_growth() << "\n";
  return 0;
}

int cmd_synth(const std::string& kind, Index N, Index d, double kappa, std::uint64_t seed, const std::string& out) {
  std::ofstream os(out);
  if (!os) fail(ErrorCode::Io, "cannot write " + out);
  if (kind == "ridge") {
    const auto s = synth_ridge(N, d, kappa, seed);
    write_libsvm(os, s.data);
    std::cout << "lambda=" << format_double(s.lambda) << "\n";
  } else if (kind == "logistic") {
    write_libsvm(os, synth_logistic(N, d, seed));
  } else {
    fail(ErrorCode::Config, "kind: expected ridge or logistic");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed SVRG simulator"};
  app.require_subcommand(1);

  auto* alloc = app.add_subcommand("allocate", "Run data allocation and print the plan");
  Index aN = 1000, am = 10, aC = 200, aQ = 100;
  std::uint64_t aseed = 1;
  std::string aout;
  alloc->add_option("--N", aN, "number of functions")->capture_default_str();
  alloc->add_option("--m", am, "number of machines")->capture_default_str();
  alloc->add_option("--C", aC, "per-machine capacity")->capture_default_str();
  alloc->add_option("--Q", aQ, "number of sampled indices")->capture_default_str();
  alloc->add_option("--seed", aseed, "seed")->capture_default_str();
  alloc->add_option("--out", aout, "plan file (default stdout)");

  auto* run = app.add_subcommand("run", "Run an experiment from a config file and flags");
  std::string config_path;
  bool practical = false, shortcut = false, dump = false;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> raw(kConfigKeys.size());
  run->add_option("--config", config_path, "key = value config file");
  run->add_flag("--practical", practical, "allow eta = 1/L (voids the step-size guarantee)");
  run->add_flag("--shortcut", shortcut, "use R_j = S_j (biased, practical mode)");
  run->add_flag("--dump-config", dump, "print the resolved config and exit");
  for (std::size_t i = 0; i < kConfigKeys.size(); ++i)
    run->add_option("--" + kConfigKeys[i], raw[i], "config field " + kConfigKeys[i]);

  auto* probe = app.add_subcommand("lowerbound-probe", "Instrumented run on an adversarial hard instance");
  HardParams hp;
  hp.k = 2;
  hp.u = 0;
  hp.kappa_prime = 100.0;
  hp.n = 5;
  hp.v = 20;
  Index pnt = 2, prounds = 50;
  std::string palgo = "accel_grad", pexport;
  std::uint64_t pseed = 1;
  probe->add_option("--k", hp.k)->capture_default_str();
  probe->add_option("--u", hp.u, "repetitions (0: h^(2b) <= 1e-16)")->capture_default_str();
  probe->add_option("--kappa-prime", hp.kappa_prime)->capture_default_str();
  probe->add_option("--mu-prime", hp.mu_prime)->capture_default_str();
  probe->add_option("--n", hp.n, "blocks")->capture_default_str();
  probe->add_option("--v", hp.v, "copies")->capture_default_str();
  probe->add_option("--n-tilde", pnt, "samples per machine and SVRG stage length")->capture_default_str();
  probe->add_option("--rounds", prounds)->capture_default_str();
  probe->add_option("--algo", palgo, "accel_grad or dsvrg")->capture_default_str();
  probe->add_option("--seed", pseed)->capture_default_str();
  probe->add_option("--export", pexport, "write the instance description here");

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset in LIBSVM format");
  std::string skind = "ridge", sout;
  Index sN = 2000, sd = 20;
  double skappa = 100.0;
  std::uint64_t sseed = 1;
  synth->add_option("--kind", skind, "ridge or logistic")->capture_default_str();
  synth->add_option("--N", sN)->capture_default_str();
  synth->add_option("--d", sd)->capture_default_str();
  synth->add_option("--kappa", skappa)->capture_default_str();
  synth->add_option("--seed", sseed)->capture_default_str();
  synth->add_option("--out", sout)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*alloc) return cmd_allocate(aN, am, aC, aQ, aseed, aout);
    if (*run) {
      for (std::size_t i = 0; i < kConfigKeys.size(); ++i)
        if (run->count("--" + kConfigKeys[i])) overrides[kConfigKeys[i]] = raw[i];
      if (practical) std::cerr << "warning: --practical sets eta = 1/L, beyond the 1/(4L) bound\n";
      return cmd_run(config_path, overrides, practical, shortcut, dump);
    }
    if (*probe) return cmd_probe(hp, pnt, prounds, palgo, pseed, pexport);
    if (*synth) return cmd_synth(skind, sN, sd, skappa, sseed, sout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_status();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
