// coalld: rate evaluation, coalescent simulation and verification studies
// for the tree-top functionals of Kingman's coalescent.
//
// Output is CSV (default) or JSON; every file starts with '#'-prefixed
// metadata lines that echo the configuration that produced it, so any table
// can be reproduced from its own header.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or domain error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coalld/coalescent.hpp"
#include "coalld/io.hpp"
#include "coalld/mc.hpp"
#include "coalld/rates.hpp"
#include "coalld/verify.hpp"
#include "coalld/version.hpp"

namespace {

struct GlobalOpts {
  std::string out;  // empty = stdout
  std::string format = "csv";
  std::uint64_t seed = 42;
  int threads = coalld::mc::default_threads();
};

std::vector<double> parse_grid(const std::string& spec) {
  // "a:b:step" inclusive of both ends (within half a step), or a single value
  std::vector<double> grid;
  const auto c1 = spec.find(':');
  if (c1 == std::string::npos) {
    grid.push_back(std::stod(spec));
    return grid;
  }
  const auto c2 = spec.find(':', c1 + 1);
  if (c2 == std::string::npos) {
    throw std::invalid_argument("grid must be a:b:step or a single value");
  }
  const double a = std::stod(spec.substr(0, c1));
  const double b = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
  const double step = std::stod(spec.substr(c2 + 1));
  if (!(step > 0.0) || b < a) {
    throw std::invalid_argument("grid requires a <= b and step > 0");
  }
  for (double x = a; x <= b + 0.5 * step; x += step) grid.push_back(x);
  return grid;
}

void emit(const GlobalOpts& g, const coalld::io::Table& table,
          coalld::io::Metadata meta, const std::string& path_override = "") {
  meta.insert(meta.begin(), {"version", coalld::kVersion});
  const std::string path = path_override.empty() ? g.out : path_override;
  std::ostringstream buf;
  if (g.format == "json") {
    coalld::io::write_json(buf, table, meta);
  } else {
    coalld::io::write_csv(buf, table, meta);
  }
  if (path.empty()) {
    std::cout << buf.str();
  } else {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    f << buf.str();
  }
}

std::string grid_echo(const std::vector<double>& grid) {
  std::ostringstream os;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i) os << " ";
    os << coalld::io::format_double(grid[i]);
  }
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_rate(const GlobalOpts& g, const std::string& function,
             const std::string& grid_spec) {
  using namespace coalld;
  const auto grid = parse_grid(grid_spec);
  io::Table t;
  t.name = "rate_" + function;
  io::Metadata meta = {{"command", "rate " + function + " --grid " + grid_spec},
                       {"function", function},
                       {"seed", std::to_string(g.seed)}};

  auto val_or_nan = [](auto&& fn) -> std::vector<double> {
    try {
      return fn();
    } catch (const std::domain_error&) {
      return {};
    }
  };

  if (function == "I_tilde") {
    t.columns = {"x", "value", "abs_err_estimate", "c_star", "t_star",
                 "converged"};
    for (const double x : grid) {
      auto row = val_or_nan([&]() -> std::vector<double> {
        const auto s = eval_I_tilde(x);
        return {x, s.value, 1e-8, s.c_star, s.t_star, s.converged ? 1.0 : 0.0};
      });
      if (row.empty()) {
        const double nan = std::nan("");
        row = {x, nan, nan, nan, nan, 0.0};
      }
      t.rows.push_back(row);
    }
  } else if (function == "bounds") {
    t.columns = {"x", "t3_bound", "g", "g_upper_bound", "angel_bound"};
    for (const double x : grid) {
      const double nan = std::nan("");
      double t3 = nan, gg = nan, gu = nan, an = nan;
      try {
        t3 = bound_T3(x);
      } catch (const std::domain_error&) {}
      try {
        const auto p = bound_positivity_g(x);
        gg = p.g;
        gu = p.implied_upper_bound;
      } catch (const std::domain_error&) {}
      try {
        an = bound_angel(x);
      } catch (const std::domain_error&) {}
      t.rows.push_back({x, t3, gg, gu, an});
    }
  } else {
    t.columns = {"x", "value", "abs_err_estimate"};
    for (const double x : grid) {
      const double nan = std::nan("");
      std::vector<double> row;
      try {
        if (function == "I") {
          const auto r = eval_I(x);
          row = {x, r.infinite ? std::numeric_limits<double>::infinity()
                               : r.value,
                 r.infinite ? 0.0 : r.abs_err_estimate};
        } else if (function == "I_hat") {
          const auto r = eval_I_hat(x);
          row = {x, r.infinite ? std::numeric_limits<double>::infinity()
                               : r.value,
                 r.infinite ? 0.0 : r.abs_err_estimate};
        } else if (function == "Lambda") {
          row = {x, eval_Lambda(x), 1e-10};
        } else if (function == "f") {
          row = {x, eval_f(x), 4e-16};
        } else if (function == "rate_up") {
          const auto r = rate_up_Wn(x);
          row = {x, r.value, r.abs_err_estimate};
        } else {
          std::cerr << "unknown rate function: " << function << "\n";
          return 2;
        }
      } catch (const std::domain_error&) {
        row = {x, nan, nan};
      }
      t.rows.push_back(row);
    }
  }
  emit(g, t, meta);
  return 0;
}

int cmd_figure(const GlobalOpts& g, const std::string& name, int resolution,
               const std::string& outdir) {
  using namespace coalld;
  auto path_for = [&](const std::string& stem) {
    const std::string ext = g.format == "json" ? ".json" : ".csv";
    return outdir + "/" + stem + ext;
  };
  io::Metadata meta = {{"command", "figure " + name + " --resolution " +
                                       std::to_string(resolution)},
                       {"figure", name}};

  if (name == "fig_T1") {
    io::Table tf;
    tf.name = "fig_T1_f";
    tf.columns = {"t", "f"};
    for (int i = 0; i < resolution; ++i) {
      const double t = -10.0 + (0.999 - (-10.0)) * i / (resolution - 1);
      tf.rows.push_back({t, eval_f(t)});
    }
    emit(g, tf, meta, path_for("fig_T1_f"));
    io::Table ti;
    ti.name = "fig_T1_I";
    ti.columns = {"x", "I"};
    for (int i = 0; i < resolution; ++i) {
      const double x = 0.05 + (8.0 - 0.05) * i / (resolution - 1);
      ti.rows.push_back({x, eval_I(x).value});
    }
    emit(g, ti, meta, path_for("fig_T1_I"));
    return 0;
  }
  if (name == "fig_cor1") {
    io::Table full;
    full.name = "fig_cor1_Ihat";
    full.columns = {"x", "I_hat"};
    for (int i = 0; i < resolution; ++i) {
      const double x = 0.0 + 5.0 * i / (resolution - 1);
      full.rows.push_back({x, eval_I_hat(x).value});
    }
    emit(g, full, meta, path_for("fig_cor1_Ihat"));
    io::Table ov;
    ov.name = "fig_cor1";
    ov.columns = {"x", "I_hat", "angel_bound"};
    for (int i = 0; i < resolution; ++i) {
      const double x = 1.5 + (2.5 - 1.5) * (i + 1) / (resolution + 1);
      ov.rows.push_back({x, eval_I_hat(x).value, bound_angel(x)});
    }
    emit(g, ov, meta, path_for("fig_cor1"));
    return 0;
  }
  if (name == "fig_T2a") {
    io::Table t;
    t.name = "fig_T2a";
    t.columns = {"x", "I_tilde", "t3_bound", "converged"};
    for (int i = 0; i < resolution; ++i) {
      const double x = 1.0 + (i + 1) * 1.0 / (resolution + 1);
      const auto s = eval_I_tilde(x);
      t.rows.push_back({x, s.value, bound_T3(x), s.converged ? 1.0 : 0.0});
    }
    emit(g, t, meta, path_for("fig_T2a"));
    return 0;
  }
  std::cerr << "unknown figure: " << name << "\n";
  return 2;
}

int cmd_simulate(const GlobalOpts& g, const std::string& statistic,
                 double size_param, std::uint64_t trials, double delta,
                 const std::string& method) {
  using namespace coalld;
  io::Table t;
  t.name = "simulate_" + statistic;
  t.columns = {"trial", "sample"};
  long K = 0;
  double bias = 0.0;
  std::vector<double> samples;

  if (statistic == "nTn") {
    const long n = static_cast<long>(size_param);
    if (n < 1) throw std::domain_error("simulate nTn: requires n >= 1");
    K = default_cutoff(n, delta);
    bias = 2.0 / static_cast<double>(K);
    const auto weights = stage_time_weights(K);
    samples = mc::collect(trials, g.threads, [&](std::uint64_t i) {
      return static_cast<double>(n) *
             truncated_tail_time(RngStream{g.seed, i}, n, K, weights);
    });
  } else if (statistic == "epsNeps") {
    const double eps = size_param;
    if (!(eps > 0.0)) throw std::domain_error("simulate epsNeps: eps > 0");
    K = std::max(default_cutoff(1, delta),
                 static_cast<long>(std::ceil(30.0 / eps)));
    bias = 2.0 / static_cast<double>(K);
    samples = mc::collect(trials, g.threads, [&](std::uint64_t i) {
      return eps * static_cast<double>(
                       line_count_at(RngStream{g.seed, i}, eps, K));
    });
  } else if (statistic == "Wn") {
    const long n = static_cast<long>(size_param);
    if (n < 1) throw std::domain_error("simulate Wn: requires n >= 1");
    const WnMethod m =
        method == "ordered" ? WnMethod::ordered : WnMethod::direct;
    samples = mc::collect(trials, g.threads, [&](std::uint64_t i) {
      return sample_Wn(n, m, RngStream{g.seed, i});
    });
  } else {
    std::cerr << "unknown statistic: " << statistic << "\n";
    return 2;
  }

  t.rows.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    t.rows.push_back({static_cast<double>(i), samples[i]});
  }
  io::Metadata meta = {
      {"command", "simulate " + statistic + " --size " +
                      io::format_double(size_param) + " --trials " +
                      std::to_string(trials) + " --seed " +
                      std::to_string(g.seed) + " --delta " +
                      io::format_double(delta) +
                      (statistic == "Wn" ? " --method " + method : "")},
      {"statistic", statistic},
      {"size_param", io::format_double(size_param)},
      {"trials", std::to_string(trials)},
      {"seed", std::to_string(g.seed)},
      {"truncation_K", std::to_string(K)},
      {"bias_bound", io::format_double(bias)},
  };
  emit(g, t, meta);
  return 0;
}

int cmd_verify(const GlobalOpts& g, const std::string& suite, double budget) {
  using namespace coalld;
  verify::Options opt;
  opt.budget = budget;
  opt.seed = g.seed;
  opt.threads = g.threads;
  const auto checks = verify::run_suite(suite, opt);
  auto table = verify::report_table(checks);
  io::Metadata meta = {
      {"command", "verify --suite " + suite + " --budget " +
                      io::format_double(budget) + " --seed " +
                      std::to_string(g.seed)},
      {"suite", suite},
      {"budget", io::format_double(budget)},
      {"seed", std::to_string(g.seed)},
  };
  emit(g, table, meta);
  bool all = true;
  for (const auto& c : checks) all = all && c.pass;
  if (!all) {
    for (const auto& c : checks) {
      if (!c.pass) {
        std::cerr << "FAIL " << c.name
                  << " measured=" << io::format_double(c.measured)
                  << " reference=" << io::format_double(c.reference) << "\n";
      }
    }
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-deviation rates and Monte Carlo for Kingman's "
               "coalescent tree-top functionals"};
  app.set_version_flag("--version", coalld::kVersion);
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOpts g;
  app.add_option("--out", g.out, "output file (default stdout)");
  app.add_option("--format", g.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", g.seed, "RNG seed recorded in all outputs");
  app.add_option("--threads", g.threads,
                 "worker threads (default $COALLD_THREADS or hardware)");

  auto* rate = app.add_subcommand("rate", "evaluate a rate function on a grid");
  std::string rate_fn;
  std::string rate_grid = "0.5:5:0.5";
  rate->add_option("function", rate_fn,
                   "one of I, I_hat, Lambda, f, I_tilde, rate_up, bounds")
      ->required();
  rate->add_option("--grid", rate_grid, "a:b:step or a single value");

  auto* figure = app.add_subcommand("figure", "emit figure curve data");
  std::string fig_name;
  int fig_res = 200;
  std::string fig_dir = ".";
  figure->add_option("name", fig_name, "fig_T1, fig_cor1 or fig_T2a")
      ->required();
  figure->add_option("--resolution", fig_res, "points per curve");
  figure->add_option("--outdir", fig_dir, "directory for the emitted files");

  auto* sim = app.add_subcommand("simulate", "write raw statistic samples");
  std::string sim_stat;
  double sim_size = 10;
  std::uint64_t sim_trials = 10000;
  double sim_delta = 1e-4;
  std::string sim_method = "direct";
  sim->add_option("statistic", sim_stat, "nTn, epsNeps or Wn")->required();
  sim->add_option("--size", sim_size, "n (nTn, Wn) or eps (epsNeps)");
  sim->add_option("--trials", sim_trials, "number of samples");
  sim->add_option("--delta", sim_delta,
                  "truncation bias target (tail statistics)");
  sim->add_option("--method", sim_method, "Wn only: direct or ordered")
      ->check(CLI::IsMember({"direct", "ordered"}));

  auto* ver = app.add_subcommand("verify", "run verification suites");
  std::string ver_suite = "all";
  double ver_budget = 1.0;
  ver->add_option("--suite", ver_suite,
                  "rates, distributions, ldp-slopes or all")
      ->check(CLI::IsMember({"rates", "distributions", "ldp-slopes", "all"}));
  ver->add_option("--budget", ver_budget,
                  "trial-count multiplier (1.0 = full acceptance scale)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2; --help/--version exit 0
  }

  try {
    if (rate->parsed()) return cmd_rate(g, rate_fn, rate_grid);
    if (figure->parsed()) return cmd_figure(g, fig_name, fig_res, fig_dir);
    if (sim->parsed()) {
      return cmd_simulate(g, sim_stat, sim_size, sim_trials, sim_delta,
                          sim_method);
    }
    if (ver->parsed()) return cmd_verify(g, ver_suite, ver_budget);
  } catch (const std::domain_error& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
