// pq-spectra: threshold, spectrum sweeps and eigenpair verification from a TOML run file.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "pqspectra/error.hpp"
#include "pqspectra/sweep.hpp"

namespace {

using namespace pqspectra;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kBadConfig = 2;
constexpr int kNoThreshold = 3;

struct Overrides {
  std::optional<int> workers;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
};

// Parses and validates; prints every violated hypothesis before giving up.
std::optional<std::pair<RunPlan, ProblemSpec>> load(const std::string& path, const Overrides& o) {
  try {
    RunPlan plan = parse_config(path);
    if (o.workers) plan.solver.workers = *o.workers;
    if (o.out) plan.output.dir = *o.out;
    if (o.seed) plan.solver.seed = *o.seed;
    ProblemSpec spec = build_problem(plan);
    const auto report = validate_problem(spec);
    if (!report.ok) {
      for (const auto& m : report.messages) std::cerr << "error: " << m << "\n";
      return std::nullopt;
    }
    return std::pair{std::move(plan), std::move(spec)};
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return std::nullopt;
  }
}

void print_threshold(const char* name, const ThresholdResult& t) {
  std::printf("%s = %s  (iterations %d, kkt residual %.3g, cone residual %.3g)\n", name,
              format_number(t.lambda1).c_str(), t.iterations, t.kkt.stationarity_residual, t.cone_residual);
}

int run(const std::string& config, const Overrides& o) {
  auto loaded = load(config, o);
  if (!loaded) return kBadConfig;
  auto& [plan, spec] = *loaded;
  SweepReport report;
  try {
    report = run_sweep(plan, spec);
  } catch (const ConvergenceFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNoThreshold;
  }
  print_threshold("lambda1", report.threshold);
  print_threshold("lambda_1q", report.q_laplacian);
  for (const auto& row : report.rows) {
    std::printf("  lambda %-24s %-18s", format_number(row.lambda).c_str(), to_string(row.status));
    if (row.pair) std::printf(" %-9s J %s residual %.2e", to_string(row.pair->case_tag),
                              format_number(row.pair->values.J_lambda).c_str(), row.pair->weak_residual_norm);
    if (!row.message.empty()) std::printf(" %s", row.message.c_str());
    std::printf("\n");
  }
  try {
    emit_outputs(report, plan);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  std::printf("wrote %s\n", plan.output.dir.string().c_str());
  return kOk;
}

int lambda1(const std::string& config, const Overrides& o) {
  auto loaded = load(config, o);
  if (!loaded) return kBadConfig;
  auto& [plan, spec] = *loaded;
  try {
    const auto options = threshold_options(plan);
    const auto t = solve_lambda1(spec, options);
    const auto tq = solve_lambda_1q(spec, options);
    print_threshold("lambda1", t);
    print_threshold("lambda_1q", tq);
    for (const auto& r : t.restarts) {
      std::printf("  restart %-16s %s  converged %d  residual %.2e\n", r.seed_name.c_str(),
                  format_number(r.value).c_str(), r.converged ? 1 : 0, r.stationarity);
    }
    const auto c = check_consistency(spec, t, tq, plan.solver.consistency_samples, plan.solver.seed);
    std::printf("consistency: %s (relative difference to lambda_1q %.3g)\n", c.ok ? "ok" : "FAILED",
                c.relative_difference);
    if (o.out) {
      prepare_output_dir(plan.output.dir);
      write_field(plan.output.dir / "threshold_minimizer.dat", t.minimizer, spec.domain(),
                  "lambda1 = " + format_number(t.lambda1) + " unit mass");
    }
  } catch (const ConvergenceFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNoThreshold;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}

int verify(const std::string& config, const std::string& field_file, double lambda, const Overrides& o) {
  auto loaded = load(config, o);
  if (!loaded) return kBadConfig;
  auto& [plan, spec] = *loaded;
  try {
    const auto field = read_field(field_file, spec.domain());
    const auto r = kkt_check(spec, lambda, field, spectrum_options(plan));
    std::printf("lambda %s\nweak residual %.3e\ncone residual %.3e\nmass identity defect %.3e\nnonconstant %s\n",
                format_number(lambda).c_str(), r.weak_residual_norm, r.cone_residual, r.mass_identity_defect,
                r.nonconstant ? "yes" : "no");
    for (const auto& f : r.failures) std::printf("failed: %s\n", f.c_str());
    std::printf("%s\n", r.passed ? "PASS" : "FAIL");
    return r.passed ? kOk : kFailed;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectrum of the (p,q)-Laplacian with a Steklov-type boundary condition"};
  app.require_subcommand(1);
  Overrides o;
  int workers = 0;
  std::string out;
  std::uint64_t seed = 0;
  auto* workers_opt = app.add_option("--workers", workers, "Concurrent sweep rows")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");

  std::string config, field_file;
  double lambda = 0.0;
  auto* run_cmd = app.add_subcommand("run", "Compute lambda1 and sweep the lambda grid");
  run_cmd->add_option("config", config, "TOML run file")->required();
  auto* l1_cmd = app.add_subcommand("lambda1", "Compute lambda1 and lambda_1q only");
  l1_cmd->add_option("config", config, "TOML run file")->required();
  auto* verify_cmd = app.add_subcommand("verify", "Check a nodal field as an eigenfunction");
  verify_cmd->add_option("config", config, "TOML run file")->required();
  verify_cmd->add_option("field-file", field_file, "x [y] value columns")->required();
  verify_cmd->add_option("lambda", lambda, "Eigenvalue to test")->required();
  // Global flags are accepted after the subcommand too.
  for (auto* sub : {run_cmd, l1_cmd, verify_cmd}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  if (*workers_opt) o.workers = workers;
  if (*out_opt) o.out = out;
  if (*seed_opt) o.seed = seed;

  if (*run_cmd) return run(config, o);
  if (*l1_cmd) return lambda1(config, o);
  return verify(config, field_file, lambda, o);
}
