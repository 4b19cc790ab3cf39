#pragma once

// Run configuration, lambda sweeps and report files.
//
// A sweep computes lambda1 once and then classifies every requested lambda:
// 0 is the trivial eigenvalue, (0, lambda1] carries a nonexistence certificate,
// and every lambda above lambda1 gets a verified eigenpair.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pqspectra/problem.hpp"
#include "pqspectra/spectrum.hpp"
#include "pqspectra/threshold.hpp"

namespace pqspectra {

struct DomainPlan {
  std::string kind = "interval";  // "interval" or "rectangle"
  std::array<double, 4> bounds{0.0, 1.0, 0.0, 1.0};
  std::array<int, 2> elements{256, 0};
};

struct LambdaGrid {
  std::vector<double> values;       // absolute lambdas
  std::vector<double> multipliers;  // multiples of lambda1
  bool empty() const { return values.empty() && multipliers.empty(); }
};

struct SolverPlan {
  double tol = 1e-8;
  double constraint_tol = 1e-10;
  int max_iters = 4000;
  int restarts = 3;
  std::uint64_t seed = 0;
  int probes = 32;
  int consistency_samples = 50;
  int workers = 1;
};

struct OutputPlan {
  std::filesystem::path dir = "out";
  std::vector<std::string> formats{"csv", "json", "dat"};
  /// Record measured wall time in sweep.csv. Off by default so the file is reproducible.
  bool wall_time = false;
  bool wants(std::string_view format) const;
};

struct RunPlan {
  double p = 0.0;
  double q = 0.0;
  DomainPlan domain;
  WeightSpec weight_a = ConstantWeight{1.0};
  WeightSpec weight_b = ConstantWeight{0.0};
  LambdaGrid grid;
  SolverPlan solver;
  OutputPlan output;
};

/// Throws ConfigError with the source name and line on syntax or schema errors.
RunPlan parse_config(const std::filesystem::path& path);
RunPlan parse_config_text(std::string_view text, std::string_view source = "<config>");

/// Mesh and weights for a plan. Throws InvalidInput (message naming H_ab) on negative weights;
/// hypothesis checks are left to validate_problem.
ProblemSpec build_problem(const RunPlan& plan);

/// 64-bit FNV-1a of the canonical plan (worker count and output location excluded), as hex.
std::string config_hash(const RunPlan& plan);

enum class RowStatus { EigenvalueZero, NoSolution, BoundaryExcluded, Eigenpair, Failed };

const char* to_string(RowStatus status);

struct SweepRow {
  double lambda = 0.0;
  RowStatus status = RowStatus::Failed;
  std::optional<EigenPair> pair;
  std::optional<NonexistenceCertificate> certificate;
  std::string message;  // failure reason
  double wall_ms = 0.0;
};

struct SweepReport {
  std::shared_ptr<const Mesh> mesh;
  ThresholdResult threshold;
  ThresholdResult q_laplacian;
  ConsistencyReport consistency;
  std::vector<SweepRow> rows;  // sorted by lambda
  std::string config_hash;
  std::size_t node_count = 0;
  double mesh_size = 0.0;
  std::uint64_t seed = 0;
};

SpectrumOptions spectrum_options(const RunPlan& plan);
ThresholdOptions threshold_options(const RunPlan& plan);

/// Throws ConvergenceFailure only when lambda1 itself fails; row failures stay in the rows.
SweepReport run_sweep(const RunPlan& plan, const ProblemSpec& spec);
SweepReport run_sweep(const RunPlan& plan);

/// Writes sweep.csv, summary.json and the .dat files requested by plan.output.
/// Creates the output directory when its parent exists.
void emit_outputs(const SweepReport& report, const RunPlan& plan);

/// Ensures `dir` exists, creating it only if its parent does. Throws Error naming the path.
void prepare_output_dir(const std::filesystem::path& dir);

/// Number format used in every report: 17 significant digits, locale-independent.
std::string format_number(double value);

/// Whitespace-separated "x [y] value" rows, one per mesh node in node order.
void write_field(const std::filesystem::path& path, const DiscreteField& field, const Mesh& mesh,
                 std::string_view header = {});
/// Reads a file written by write_field (or any file with the same layout) back onto `mesh`.
DiscreteField read_field(const std::filesystem::path& path, const Mesh& mesh);

}  // namespace pqspectra
