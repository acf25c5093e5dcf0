// bench: run single experiments or regenerate the benchmark tables.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rknfc/bench.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNonConvergence = 2;
constexpr int kExitInvalid = 3;

void emit(std::ostream& os, const std::vector<rknfc::RunReport>& rows, const std::string& format) {
  if (format == "csv") {
    rknfc::emit_csv(os, rows);
  } else if (format == "json") {
    os << rknfc::to_json(rows).dump(2) << '\n';
  } else {
    rknfc::emit_markdown(os, rows);
  }
}

int write_output(const std::vector<rknfc::RunReport>& rows, const std::string& format,
                 const std::string& out_path) {
  if (out_path.empty()) {
    emit(std::cout, rows, format);
    return kExitOk;
  }
  std::ofstream f(out_path);
  if (!f) {
    std::cerr << "error: cannot write '" << out_path << "'\n";
    return kExitInvalid;
  }
  emit(f, rows, format);
  return kExitOk;
}

int exit_code(const std::vector<rknfc::RunReport>& rows) {
  int code = kExitOk;
  for (const auto& r : rows) {
    if (r.status == rknfc::RunStatus::Invalid) return kExitInvalid;
    if (r.status == rknfc::RunStatus::NonConvergence) code = kExitNonConvergence;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-step benchmarks for RKN Fourier collocation methods"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help message and exit");

  rknfc::ExperimentPlan plan;
  std::string method = "rkn-tfc-b";
  std::string jacobian = "analytic";
  std::string tableau;
  std::string format = "md";
  std::string out_path;

  auto* run = app.add_subcommand("run", "integrate one problem with one method");
  run->add_option("--problem", plan.problem, "problem name (kepler, henon-heiles)")->required();
  run->add_option("--method", method, "rkn-tfc-b | rkn-tfc-b-oi | rkn-tfc-f | rkn-tfc-n | dirkn-f")
      ->required();
  run->add_option("--tend", plan.t_end, "end time")->required();
  run->add_option("--h", plan.h, "step size")->required();
  run->add_option("--k", plan.k, "number of stages")->capture_default_str();
  run->add_option("--r", plan.r, "number of Legendre coefficients")->capture_default_str();
  run->add_option("--tol", plan.tol, "iteration tolerance")->capture_default_str();
  run->add_option("--max-iter", plan.max_iter, "iteration cap per step")->capture_default_str();
  run->add_option("--inner", plan.inner_iter, "inner iterations (rkn-tfc-b-oi)")
      ->capture_default_str();
  run->add_option("--jacobian", jacobian, "analytic | fd")
      ->check(CLI::IsMember({"analytic", "fd"}))
      ->capture_default_str();
  run->add_option("--tableau", tableau, "DIRKN tableau file");
  run->add_option("--repetitions", plan.repetitions, "timing repetitions")->capture_default_str();
  run->add_option("--format", format, "csv | md | json")
      ->check(CLI::IsMember({"csv", "md", "json"}))
      ->capture_default_str();
  run->add_option("--out", out_path, "output file (default stdout)");

  std::string grid_name;
  unsigned jobs = 0;
  auto* table = app.add_subcommand("table", "regenerate a benchmark table");
  table->add_option("--paper-grid", grid_name, "table4 | table5")
      ->check(CLI::IsMember({"table4", "table5"}))
      ->required();
  table->add_option("--tableau", tableau, "DIRKN tableau file (DIRKN rows skipped without it)");
  table->add_option("--tol", plan.tol, "iteration tolerance")->capture_default_str();
  table->add_option("--max-iter", plan.max_iter, "iteration cap per step")->capture_default_str();
  table->add_option("--repetitions", plan.repetitions, "timing repetitions")->capture_default_str();
  table->add_option("--jobs", jobs, "parallel cells (0 = hardware concurrency)");
  table->add_option("--format", format, "csv | md | json")
      ->check(CLI::IsMember({"csv", "md", "json"}))
      ->capture_default_str();
  table->add_option("--out", out_path, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (!tableau.empty()) plan.tableau_path = tableau;
    plan.jacobian =
        jacobian == "fd" ? rknfc::JacobianMode::FiniteDifference : rknfc::JacobianMode::Analytic;

    std::vector<rknfc::RunReport> rows;
    if (*run) {
      plan.method = rknfc::parse_method(method);
      rows.push_back(rknfc::run(plan));
      if (rows.back().status != rknfc::RunStatus::Ok) {
        std::cerr << "error: " << rows.back().message << '\n';
      }
    } else {
      rknfc::TableGrid grid = rknfc::benchmark_grid(grid_name);
      const std::string problem = grid.problem;
      grid.base = plan;
      grid.base.problem = problem;
      rows = rknfc::run_table(grid, jobs);
      for (const auto& r : rows) {
        if (r.status == rknfc::RunStatus::NonConvergence || r.status == rknfc::RunStatus::Invalid) {
          std::cerr << "warning: " << rknfc::to_string(r.plan.method) << " (" << r.plan.t_end << ','
                    << r.plan.h << "): " << r.message << '\n';
        }
      }
    }
    const int io = write_output(rows, format, out_path);
    if (io != kExitOk) return io;
    return exit_code(rows);
  } catch (const rknfc::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}
