// Command-line front end: run, converge, dump-filters, dump-operator.
//
// Exit codes: 0 ok, 1 config error, 2 runtime failure, 3 threshold breach
// under --check.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "awcm/derivative.hpp"
#include "awcm/driver.hpp"
#include "awcm/filters.hpp"
#include "awcm/format.hpp"
#include "awcm/threads.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;
constexpr int kBreach = 3;

void dump_filters(int p) {
  const auto fb = awcm::build_filter_bank(p);
  auto table = [](const char* name, const std::map<int, awcm::Rational>& m) {
    std::cout << "# " << name << "\n";
    for (const auto& [k, r] : m)
      std::cout << k << ' ' << r.numerator() << '/' << r.denominator() << ' ' << awcm::format_double(awcm::to_double(r))
                << '\n';
  };
  std::cout << "# order " << p << "\n";
  table("h", fb.h());
  table("h_dual", fb.h_dual());
  table("g", fb.g());
  table("g_dual", fb.g_dual());
  std::cout << "# boundary rows (left; right rows mirror)\n";
  for (std::size_t m = 0; m < fb.boundary_rows().size(); ++m) {
    for (std::size_t i = 0; i < fb.boundary_rows()[m].size(); ++i) {
      const auto& r = fb.boundary_rows()[m][i];
      std::cout << "row " << m << ' ' << i << ' ' << r.numerator() << '/' << r.denominator() << ' '
                << awcm::format_double(awcm::to_double(r)) << '\n';
    }
  }
}

void dump_operator(int p, int alpha) {
  const auto fb = awcm::build_filter_bank(p);
  const auto op = awcm::build_diff_operator(fb, 0, alpha);
  std::cout << "# order " << p << " alpha " << alpha << " radius " << op.radius() << "\n# interior\n";
  for (int k = -op.radius(); k <= op.radius(); ++k)
    std::cout << k << ' ' << awcm::format_double(op.interior()[static_cast<std::size_t>(k + op.radius())] + 0.0) << '\n';
  std::cout << "# boundary rows (node, column, exact, float)\n";
  for (std::size_t i = 0; i < op.boundary_rows().size(); ++i) {
    for (std::size_t m = 0; m < op.boundary_rows()[i].size(); ++m) {
      const auto& r = op.boundary_rows()[i][m];
      std::cout << "row " << i << ' ' << m << ' ' << r.numerator() << '/' << r.denominator() << ' '
                << awcm::format_double(awcm::to_double(r)) << '\n';
    }
  }
}

// Thresholds checked by --check.
bool self_check(const awcm::RunConfig& c, const awcm::ErrorReport& rep) {
  bool ok = rep.ok;
  if (!rep.ok) std::cerr << "check: run failed: " << rep.failure << '\n';
  if (rep.outputs.empty()) return false;
  const auto& first = rep.outputs.front();
  for (const auto& o : rep.outputs) {
    if (o.max_error && *o.max_error > 10.0 * c.eps) {
      std::cerr << "check: t=" << awcm::format_double(o.t) << " max_error=" << awcm::format_double(*o.max_error)
                << " exceeds 10*eps\n";
      ok = false;
    }
    if (o.asymmetry && !(*o.asymmetry < 1e-6)) {
      std::cerr << "check: t=" << awcm::format_double(o.t) << " asymmetry=" << awcm::format_double(*o.asymmetry) << '\n';
      ok = false;
    }
    if (o.mass && first.mass && !(std::abs(*o.mass - *first.mass) < 1e-3 * std::abs(*first.mass))) {
      std::cerr << "check: t=" << awcm::format_double(o.t) << " mass drift exceeds 1e-3\n";
      ok = false;
    }
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive wavelet collocation solver"};
  app.require_subcommand(1);

  std::string config_path;
  bool check = false;
  bool quiet = false;
  std::string dump_grid_path;
  auto* run_cmd = app.add_subcommand("run", "Run a configuration");
  run_cmd->add_option("config", config_path, "JSON configuration")->required();
  run_cmd->add_flag("--check", check, "Exit 3 if an accuracy threshold is breached");
  run_cmd->add_flag("--quiet", quiet, "No progress output");
  run_cmd->add_option("--dump-grid", dump_grid_path, "Write the final grid to this file");

  std::vector<double> eps_list;
  std::vector<int> p_list;
  auto* conv_cmd = app.add_subcommand("converge", "Convergence sweep over eps and p");
  conv_cmd->add_option("config", config_path, "JSON configuration")->required();
  conv_cmd->add_option("--eps", eps_list, "Thresholds")->required()->delimiter(',');
  conv_cmd->add_option("--p", p_list, "Orders")->required()->delimiter(',');

  int p = 6;
  int alpha = 1;
  auto* filt_cmd = app.add_subcommand("dump-filters", "Print filter tables");
  filt_cmd->add_option("--p", p, "Order")->required();
  auto* op_cmd = app.add_subcommand("dump-operator", "Print derivative stencils");
  op_cmd->add_option("--p", p, "Order")->required();
  op_cmd->add_option("--alpha", alpha, "Derivative order (1 or 2)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    awcm::configure_threads_from_env();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (*filt_cmd) {
      dump_filters(p);
      return kOk;
    }
    if (*op_cmd) {
      if (alpha != 1 && alpha != 2) throw awcm::ConfigError("alpha: expected 1 or 2");
      dump_operator(p, alpha);
      return kOk;
    }
    const awcm::RunConfig cfg = awcm::load_config(config_path);
    if (*conv_cmd) {
      for (double e : eps_list)
        if (!(e > 0.0)) throw awcm::ConfigError("--eps: thresholds must be positive");
      const auto table = awcm::converge(cfg, eps_list, p_list, &std::cerr);
      table.write(std::cout);
      for (const auto& r : table.rows)
        if (!r.ok) return kRuntimeError;
      return kOk;
    }
    awcm::RunOptions opt;
    opt.progress = quiet ? nullptr : &std::cerr;
    if (!dump_grid_path.empty()) {
      opt.on_finish = [&](const awcm::SparseField& f) {
        std::ofstream out(dump_grid_path);
        awcm::dump_grid(f, out);
      };
    }
    const auto rep = awcm::run(cfg, opt);
    rep.write(std::cout);
    if (!rep.ok) {
      std::cerr << "error: " << rep.failure << '\n';
      return kRuntimeError;
    }
    if (check && !self_check(cfg, rep)) return kBreach;
    return kOk;
  } catch (const awcm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const awcm::FilterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
