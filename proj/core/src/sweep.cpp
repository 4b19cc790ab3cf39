#include "pqspectra/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "pqspectra/error.hpp"

namespace pqspectra {

bool OutputPlan::wants(std::string_view format) const {
  return std::find(formats.begin(), formats.end(), format) != formats.end();
}

const char* to_string(RowStatus status) {
  switch (status) {
    case RowStatus::EigenvalueZero: return "eigenvalue_zero";
    case RowStatus::NoSolution: return "no_solution";
    case RowStatus::BoundaryExcluded: return "boundary_excluded";
    case RowStatus::Eigenpair: return "eigenpair";
    case RowStatus::Failed: return "failed";
  }
  return "unknown";
}

std::string format_number(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  if (ec != std::errc{}) throw Error("format_number: conversion failed");
  return {buf, end};
}

// ---------------------------------------------------------------- config

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const toml::node* node, const std::string& what) const {
    std::string where = source_;
    if (node != nullptr && node->source().begin) where += ":" + std::to_string(node->source().begin.line);
    throw ConfigError(where + ": " + what);
  }

  const toml::table* table(const toml::table& parent, std::string_view key, bool required) const {
    const toml::node* node = parent.get(key);
    if (node == nullptr) {
      if (required) fail(&parent, "missing section [" + std::string(key) + "]");
      return nullptr;
    }
    if (!node->is_table()) fail(node, "'" + std::string(key) + "' must be a table");
    return node->as_table();
  }

  void allow_only(const toml::table& t, std::initializer_list<std::string_view> keys, std::string_view where) const {
    for (const auto& [k, v] : t) {
      if (std::find(keys.begin(), keys.end(), k.str()) == keys.end()) {
        fail(&v, "unknown key '" + std::string(k.str()) + "' in [" + std::string(where) + "]");
      }
    }
  }

  double number(const toml::node& node, std::string_view key) const {
    if (auto d = node.value<double>(); d && (node.is_floating_point() || node.is_integer())) return *d;
    fail(&node, "'" + std::string(key) + "' must be a number");
  }

  std::optional<double> number(const toml::table& t, std::string_view key) const {
    const toml::node* node = t.get(key);
    if (node == nullptr) return std::nullopt;
    return number(*node, key);
  }

  std::optional<std::int64_t> integer(const toml::table& t, std::string_view key) const {
    const toml::node* node = t.get(key);
    if (node == nullptr) return std::nullopt;
    if (!node->is_integer()) fail(node, "'" + std::string(key) + "' must be an integer");
    return node->as_integer()->get();
  }

  std::optional<std::string> string(const toml::table& t, std::string_view key) const {
    const toml::node* node = t.get(key);
    if (node == nullptr) return std::nullopt;
    if (!node->is_string()) fail(node, "'" + std::string(key) + "' must be a string");
    return node->as_string()->get();
  }

  std::optional<bool> boolean(const toml::table& t, std::string_view key) const {
    const toml::node* node = t.get(key);
    if (node == nullptr) return std::nullopt;
    if (!node->is_boolean()) fail(node, "'" + std::string(key) + "' must be a boolean");
    return node->as_boolean()->get();
  }

  std::optional<std::vector<double>> numbers(const toml::table& t, std::string_view key) const {
    const toml::node* node = t.get(key);
    if (node == nullptr) return std::nullopt;
    if (!node->is_array()) fail(node, "'" + std::string(key) + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *node->as_array()) out.push_back(number(e, key));
    return out;
  }

  std::optional<std::vector<std::string>> strings(const toml::table& t, std::string_view key) const {
    const toml::node* node = t.get(key);
    if (node == nullptr) return std::nullopt;
    if (!node->is_array()) fail(node, "'" + std::string(key) + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *node->as_array()) {
      if (!e.is_string()) fail(&e, "'" + std::string(key) + "' must be an array of strings");
      out.push_back(e.as_string()->get());
    }
    return out;
  }

  const toml::node* node(const toml::table& t, std::string_view key) const { return t.get(key); }

 private:
  std::string source_;
};

WeightSpec parse_weight(const Reader& r, const toml::table* t, WeightSpec fallback, std::string_view where) {
  if (t == nullptr) return fallback;
  const auto kind = r.string(*t, "kind").value_or("constant");
  if (kind == "constant") {
    r.allow_only(*t, {"kind", "value"}, where);
    return ConstantWeight{r.number(*t, "value").value_or(1.0)};
  }
  if (kind == "indicator") {
    r.allow_only(*t, {"kind", "lower", "upper", "inside", "outside"}, where);
    IndicatorWeight w;
    auto box = [&](std::string_view key, std::array<double, 2>& out) {
      if (const auto v = r.numbers(*t, key)) {
        if (v->empty() || v->size() > 2) r.fail(r.node(*t, key), "'" + std::string(key) + "' needs 1 or 2 entries");
        std::copy(v->begin(), v->end(), out.begin());
      }
    };
    box("lower", w.lower);
    box("upper", w.upper);
    w.inside = r.number(*t, "inside").value_or(1.0);
    w.outside = r.number(*t, "outside").value_or(0.0);
    return w;
  }
  if (kind == "nodal_table") {
    r.allow_only(*t, {"kind", "values"}, where);
    const auto v = r.numbers(*t, "values");
    if (!v) r.fail(t, "nodal_table weight needs 'values'");
    return NodalTableWeight{*v};
  }
  r.fail(r.node(*t, "kind"), "unknown weight kind '" + kind + "' (constant, indicator, nodal_table)");
}

}  // namespace

RunPlan parse_config_text(std::string_view text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw ConfigError(msg.str());
  }
  const Reader r{std::string(source)};
  r.allow_only(root, {"problem", "domain", "weights", "lambda_grid", "solver", "output"}, "top level");
  RunPlan plan;

  const auto* problem = r.table(root, "problem", true);
  r.allow_only(*problem, {"p", "q"}, "problem");
  const auto p = r.number(*problem, "p");
  const auto q = r.number(*problem, "q");
  if (!p || !q) r.fail(problem, "[problem] needs both p and q");
  plan.p = *p;
  plan.q = *q;

  if (const auto* domain = r.table(root, "domain", false)) {
    r.allow_only(*domain, {"kind", "bounds", "elements"}, "domain");
    plan.domain.kind = r.string(*domain, "kind").value_or("interval");
    const bool rect = plan.domain.kind == "rectangle";
    if (!rect && plan.domain.kind != "interval") {
      r.fail(r.node(*domain, "kind"), "domain kind must be 'interval' or 'rectangle'");
    }
    if (!rect) plan.domain.elements = {256, 0};
    else plan.domain.elements = {32, 32};
    if (const auto b = r.numbers(*domain, "bounds")) {
      if (b->size() != (rect ? 4u : 2u)) {
        r.fail(r.node(*domain, "bounds"), rect ? "rectangle bounds are [x0, x1, y0, y1]" : "interval bounds are [x0, x1]");
      }
      std::copy(b->begin(), b->end(), plan.domain.bounds.begin());
    }
    if (const toml::node* e = r.node(*domain, "elements")) {
      if (e->is_integer()) {
        const auto n = static_cast<int>(e->as_integer()->get());
        plan.domain.elements = {n, rect ? n : 0};
      } else if (e->is_array() && rect && e->as_array()->size() == 2 && e->as_array()->is_homogeneous<std::int64_t>()) {
        plan.domain.elements = {static_cast<int>(e->as_array()->get(0)->as_integer()->get()),
                                static_cast<int>(e->as_array()->get(1)->as_integer()->get())};
      } else {
        r.fail(e, rect ? "'elements' must be an integer or [nx, ny]" : "'elements' must be an integer");
      }
      if (plan.domain.elements[0] < 2 || (rect && plan.domain.elements[1] < 2)) {
        r.fail(e, "resolution must be at least 2 elements per direction");
      }
    }
  }

  if (const auto* weights = r.table(root, "weights", false)) {
    r.allow_only(*weights, {"a", "b"}, "weights");
    plan.weight_a = parse_weight(r, r.table(*weights, "a", false), ConstantWeight{1.0}, "weights.a");
    plan.weight_b = parse_weight(r, r.table(*weights, "b", false), ConstantWeight{0.0}, "weights.b");
  }

  if (const auto* grid = r.table(root, "lambda_grid", false)) {
    r.allow_only(*grid, {"values", "multipliers", "count", "range"}, "lambda_grid");
    plan.grid.values = r.numbers(*grid, "values").value_or(std::vector<double>{});
    plan.grid.multipliers = r.numbers(*grid, "multipliers").value_or(std::vector<double>{});
    const auto count = r.integer(*grid, "count");
    const auto range = r.numbers(*grid, "range");
    if (count.has_value() != range.has_value()) r.fail(grid, "'count' and 'range' go together");
    if (count) {
      if (*count < 1) r.fail(r.node(*grid, "count"), "'count' must be positive");
      if (range->size() != 2 || !((*range)[0] <= (*range)[1])) {
        r.fail(r.node(*grid, "range"), "'range' is [low, high] multiples of lambda1");
      }
      for (std::int64_t k = 0; k < *count; ++k) {
        const double s = *count == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(*count - 1);
        plan.grid.multipliers.push_back((*range)[0] + s * ((*range)[1] - (*range)[0]));
      }
    }
    for (const auto* list : {&plan.grid.values, &plan.grid.multipliers}) {
      for (double v : *list) {
        if (!(v >= 0.0) || !std::isfinite(v)) r.fail(grid, "lambda grid entries must be finite and >= 0");
      }
    }
  }

  if (const auto* solver = r.table(root, "solver", false)) {
    r.allow_only(*solver,
                 {"tol", "constraint_tol", "max_iters", "restarts", "seed", "probes", "consistency_samples", "workers"},
                 "solver");
    auto& s = plan.solver;
    s.tol = r.number(*solver, "tol").value_or(s.tol);
    s.constraint_tol = r.number(*solver, "constraint_tol").value_or(s.constraint_tol);
    s.max_iters = static_cast<int>(r.integer(*solver, "max_iters").value_or(s.max_iters));
    s.restarts = static_cast<int>(r.integer(*solver, "restarts").value_or(s.restarts));
    if (const auto seed = r.integer(*solver, "seed")) {
      if (*seed < 0) r.fail(r.node(*solver, "seed"), "'seed' must be nonnegative");
      s.seed = static_cast<std::uint64_t>(*seed);
    }
    s.probes = static_cast<int>(r.integer(*solver, "probes").value_or(s.probes));
    s.consistency_samples = static_cast<int>(r.integer(*solver, "consistency_samples").value_or(s.consistency_samples));
    s.workers = static_cast<int>(r.integer(*solver, "workers").value_or(s.workers));
    if (!(s.tol > 0.0) || !(s.constraint_tol > 0.0)) r.fail(solver, "tolerances must be positive");
    if (s.max_iters < 1 || s.restarts < 1 || s.probes < 0 || s.consistency_samples < 0 || s.workers < 1) {
      r.fail(solver, "max_iters, restarts and workers must be >= 1; probes and consistency_samples >= 0");
    }
  }

  if (const auto* output = r.table(root, "output", false)) {
    r.allow_only(*output, {"dir", "formats", "wall_time"}, "output");
    if (const auto dir = r.string(*output, "dir")) plan.output.dir = *dir;
    if (const auto formats = r.strings(*output, "formats")) {
      for (const auto& f : *formats) {
        if (f != "csv" && f != "json" && f != "dat") {
          r.fail(r.node(*output, "formats"), "unknown format '" + f + "' (csv, json, dat)");
        }
      }
      plan.output.formats = *formats;
    }
    plan.output.wall_time = r.boolean(*output, "wall_time").value_or(false);
  }
  return plan;
}

RunPlan parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open configuration file");
  std::ostringstream text;
  text << in.rdbuf();
  auto plan = parse_config_text(text.str(), path.string());
  // Relative output directories are taken relative to the working directory.
  return plan;
}

ProblemSpec build_problem(const RunPlan& plan) {
  std::shared_ptr<const Mesh> mesh;
  const auto& d = plan.domain;
  if (d.kind == "rectangle") {
    mesh = std::make_shared<const Mesh>(build_rectangle_mesh(d.elements[0], d.elements[1], d.bounds));
  } else {
    mesh = std::make_shared<const Mesh>(build_interval_mesh(d.elements[0], d.bounds[0], d.bounds[1]));
  }
  return make_problem(mesh, plan.p, plan.q, plan.weight_a, plan.weight_b);
}

namespace {

void canonical_numbers(std::ostream& os, std::string_view key, const std::vector<double>& v) {
  os << key << "=[";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << format_number(v[i]);
  os << "]\n";
}

void canonical_weight(std::ostream& os, std::string_view key, const WeightSpec& w) {
  os << key << "=";
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ConstantWeight>) {
          os << "constant(" << format_number(x.value) << ")\n";
        } else if constexpr (std::is_same_v<T, IndicatorWeight>) {
          os << "indicator(" << format_number(x.lower[0]) << "," << format_number(x.lower[1]) << ","
             << format_number(x.upper[0]) << "," << format_number(x.upper[1]) << "," << format_number(x.inside)
             << "," << format_number(x.outside) << ")\n";
        } else {
          canonical_numbers(os, "nodal_table", x.values);
        }
      },
      w);
}

}  // namespace

std::string config_hash(const RunPlan& plan) {
  std::ostringstream os;
  os << "p=" << format_number(plan.p) << "\nq=" << format_number(plan.q) << "\n";
  os << "domain=" << plan.domain.kind;
  for (double b : plan.domain.bounds) os << "," << format_number(b);
  os << "," << plan.domain.elements[0] << "," << plan.domain.elements[1] << "\n";
  canonical_weight(os, "a", plan.weight_a);
  canonical_weight(os, "b", plan.weight_b);
  canonical_numbers(os, "values", plan.grid.values);
  canonical_numbers(os, "multipliers", plan.grid.multipliers);
  const auto& s = plan.solver;
  os << "tol=" << format_number(s.tol) << "\nconstraint_tol=" << format_number(s.constraint_tol)
     << "\nmax_iters=" << s.max_iters << "\nrestarts=" << s.restarts << "\nseed=" << s.seed << "\nprobes=" << s.probes
     << "\nconsistency_samples=" << s.consistency_samples << "\nwall_time=" << plan.output.wall_time << "\n";
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- sweep

ThresholdOptions threshold_options(const RunPlan& plan) {
  ThresholdOptions o;
  o.descent.max_iters = plan.solver.max_iters;
  o.restarts = plan.solver.restarts;
  o.seed = plan.solver.seed;
  return o;
}

SpectrumOptions spectrum_options(const RunPlan& plan) {
  SpectrumOptions o;
  o.descent.max_iters = plan.solver.max_iters;
  o.tol = plan.solver.tol;
  o.constraint_tol = plan.solver.constraint_tol;
  o.probes = plan.solver.probes;
  o.seed = plan.solver.seed;
  return o;
}

namespace {

SweepRow solve_row(const ProblemSpec& spec, double lambda, const ThresholdResult& threshold,
                   const SpectrumOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  SweepRow row;
  row.lambda = lambda;
  const double lambda1 = threshold.lambda1;
  try {
    if (lambda == 0.0) {
      row.pair = zero_eigenpair(spec);
      row.status = RowStatus::EigenvalueZero;
    } else if (lambda <= lambda1 * (1.0 + options.boundary_tol)) {
      row.certificate = certify_nonexistence(spec, lambda, threshold, options);
      row.status = row.certificate->boundary_case ? RowStatus::BoundaryExcluded : RowStatus::NoSolution;
    } else {
      row.pair = solve_eigenpair(spec, lambda, threshold, options);
      row.status = RowStatus::Eigenpair;
    }
  } catch (const std::exception& e) {
    row.status = RowStatus::Failed;
    row.pair.reset();
    row.certificate.reset();
    row.message = e.what();
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

}  // namespace

SweepReport run_sweep(const RunPlan& plan, const ProblemSpec& spec) {
  SweepReport report;
  report.mesh = spec.mesh;
  report.config_hash = config_hash(plan);
  report.node_count = spec.domain().node_count();
  report.mesh_size = spec.domain().mesh_size();
  report.seed = plan.solver.seed;

  const auto topts = threshold_options(plan);
  report.threshold = solve_lambda1(spec, topts);
  report.q_laplacian = solve_lambda_1q(spec, topts);
  report.consistency = check_consistency(spec, report.threshold, report.q_laplacian, plan.solver.consistency_samples,
                                         plan.solver.seed);

  const double lambda1 = report.threshold.lambda1;
  std::vector<double> lambdas = plan.grid.values;
  for (double m : plan.grid.multipliers) lambdas.push_back(m * lambda1);
  if (!lambdas.empty() && std::find(lambdas.begin(), lambdas.end(), 0.0) == lambdas.end()) lambdas.push_back(0.0);
  std::sort(lambdas.begin(), lambdas.end());

  report.rows.resize(lambdas.size());
  const auto base = spectrum_options(plan);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < lambdas.size(); i = next++) {
      SpectrumOptions options = base;
      options.seed = mix_seed(plan.solver.seed, i);
      report.rows[i] = solve_row(spec, lambdas[i], report.threshold, options);
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(plan.solver.workers), lambdas.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return report;
}

SweepReport run_sweep(const RunPlan& plan) { return run_sweep(plan, build_problem(plan)); }

// ---------------------------------------------------------------- output

void prepare_output_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::is_directory(dir, ec)) return;
  if (fs::exists(dir, ec)) throw Error(dir.string() + ": exists and is not a directory");
  const fs::path parent = fs::absolute(dir, ec).parent_path();
  if (!fs::is_directory(parent, ec)) throw Error(dir.string() + ": parent directory " + parent.string() + " does not exist");
  if (!fs::create_directory(dir, ec) && !fs::is_directory(dir)) {
    throw Error(dir.string() + ": cannot create directory: " + ec.message());
  }
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw Error(path.string() + ": write failed");
}

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json threshold_json(const ThresholdResult& t) {
  nlohmann::ordered_json j;
  j["value"] = number_or_null(t.lambda1);
  j["iterations"] = t.iterations;
  j["cone_residual"] = t.cone_residual;
  j["mass_residual"] = t.mass_residual;
  nlohmann::ordered_json kkt;
  for (std::size_t i = 0; i < t.kkt.names.size(); ++i) kkt[t.kkt.names[i]] = t.kkt.multipliers[i];
  kkt["stationarity_residual"] = t.kkt.stationarity_residual;
  kkt["multiplier_scaling"] = t.kkt.multiplier_scaling;
  kkt["identity_defect"] = t.kkt_identity_defect;
  j["kkt"] = kkt;
  auto restarts = nlohmann::ordered_json::array();
  for (const auto& r : t.restarts) {
    restarts.push_back({{"seed", r.seed_name},
                        {"value", number_or_null(r.value)},
                        {"iterations", r.iterations},
                        {"converged", r.converged},
                        {"stationarity", r.stationarity}});
  }
  j["restarts"] = restarts;
  return j;
}

}  // namespace

void write_field(const std::filesystem::path& path, const DiscreteField& field, const Mesh& mesh,
                 std::string_view header) {
  if (field.size() != mesh.node_count()) throw InvalidInput("write_field: field does not match the mesh");
  auto out = open_output(path);
  if (!header.empty()) out << "# " << header << "\n";
  out << (mesh.dimension() == 1 ? "# x value\n" : "# x y value\n");
  const auto& nodes = mesh.nodes();
  const auto& v = field.values();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out << format_number(nodes[i][0]) << ' ';
    if (mesh.dimension() == 2) out << format_number(nodes[i][1]) << ' ';
    out << format_number(v[i]) << '\n';
  }
  close_output(out, path);
}

DiscreteField read_field(const std::filesystem::path& path, const Mesh& mesh) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(path.string() + ": cannot open field file");
  const std::size_t columns = static_cast<std::size_t>(mesh.dimension()) + 1;
  const auto& nodes = mesh.nodes();
  const double tol = 1e-9 * std::max(1.0, mesh.mesh_size());
  std::vector<double> values;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    fields.imbue(std::locale::classic());
    std::vector<double> row;
    for (double x; fields >> x;) row.push_back(x);
    if (!fields.eof() || row.size() != columns) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                         " numeric columns");
    }
    const std::size_t i = values.size();
    if (i >= nodes.size()) throw InvalidInput(path.string() + ": more rows than mesh nodes");
    for (std::size_t c = 0; c + 1 < columns; ++c) {
      if (std::abs(row[c] - nodes[i][c]) > tol) {
        throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": coordinates do not match mesh node " +
                           std::to_string(i));
      }
    }
    values.push_back(row.back());
  }
  if (values.size() != nodes.size()) {
    throw InvalidInput(path.string() + ": " + std::to_string(values.size()) + " rows for " +
                       std::to_string(nodes.size()) + " mesh nodes");
  }
  return DiscreteField(mesh, std::move(values));
}

void emit_outputs(const SweepReport& report, const RunPlan& plan) {
  namespace fs = std::filesystem;
  const fs::path dir = plan.output.dir;
  prepare_output_dir(dir);

  if (plan.output.wants("csv")) {
    const fs::path path = dir / "sweep.csv";
    auto out = open_output(path);
    out << "lambda,status,case_tag,J_value,T1,T2,T3,weak_residual,iterations,wall_ms\n";
    for (const auto& row : report.rows) {
      out << format_number(row.lambda) << ',' << to_string(row.status) << ',';
      if (row.pair) {
        const auto& e = *row.pair;
        out << to_string(e.case_tag) << ',' << format_number(e.values.J_lambda) << ',' << format_number(e.values.T1)
            << ',' << format_number(e.values.T2) << ',' << format_number(e.values.T3) << ','
            << format_number(e.weak_residual_norm) << ',' << e.iterations << ',';
      } else {
        out << "none,,,,,,0,";
      }
      out << format_number(plan.output.wall_time ? row.wall_ms : 0.0) << '\n';
    }
    close_output(out, path);
  }

  if (plan.output.wants("json")) {
    nlohmann::ordered_json j;
    j["lambda1"] = number_or_null(report.threshold.lambda1);
    j["lambda_1q"] = number_or_null(report.q_laplacian.lambda1);
    j["threshold"] = threshold_json(report.threshold);
    j["q_laplacian"] = threshold_json(report.q_laplacian);
    const auto& c = report.consistency;
    j["consistency"] = {{"ok", c.ok},
                        {"samples", c.samples},
                        {"scale_parameter", c.scale_parameter},
                        {"min_rayleigh_pq_scaled", number_or_null(c.min_rayleigh_pq)},
                        {"max_relative_gap", c.max_relative_gap},
                        {"scaled_above_lambda1", c.scaled_above_lambda1},
                        {"pointwise_order", c.pointwise_order},
                        {"relative_difference", c.relative_difference},
                        {"p_below_q", c.p_below_q},
                        {"equal_when_p_below_q", c.equal_when_p_below_q},
                        {"lambda1_at_least_lambda_1q", c.lambda1_at_least_lambda_1q}};
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < report.rows.size(); ++k) {
      const auto& row = report.rows[k];
      nlohmann::ordered_json r;
      r["index"] = k;
      r["lambda"] = row.lambda;
      r["lambda_over_lambda1"] = row.lambda / report.threshold.lambda1;
      r["status"] = to_string(row.status);
      if (row.pair) {
        const auto& e = *row.pair;
        r["case_tag"] = to_string(e.case_tag);
        r["J_value"] = e.values.J_lambda;
        r["m_lambda"] = e.m_lambda;
        r["T1"] = e.values.T1;
        r["T2"] = e.values.T2;
        r["T3"] = e.values.T3;
        r["weak_residual"] = e.weak_residual_norm;
        r["cone_residual"] = e.cone_residual;
        r["nehari_residual"] = e.nehari_residual;
        r["mass_identity_defect"] = number_or_null(e.mass_identity_defect);
        nlohmann::ordered_json kkt;
        for (std::size_t i = 0; i < e.kkt.names.size(); ++i) kkt[e.kkt.names[i]] = e.kkt.multipliers[i];
        kkt["stationarity_residual"] = e.kkt.stationarity_residual;
        r["kkt"] = kkt;
        r["seed"] = e.seed_name;
        if (plan.output.wants("dat")) r["field_file"] = "eigenfunction_" + std::to_string(k) + ".dat";
      }
      if (row.certificate) {
        const auto& cert = *row.certificate;
        r["certificate"] = {{"evidence", cert.evidence},
                            {"margin", cert.margin},
                            {"min_probe_rayleigh_q", number_or_null(cert.min_probe_rayleigh)},
                            {"probe_count", cert.probe_count},
                            {"boundary_case", cert.boundary_case}};
      }
      if (!row.message.empty()) r["message"] = row.message;
      rows.push_back(r);
    }
    j["rows"] = rows;
    j["provenance"] = {{"config_hash", report.config_hash},
                       {"p", plan.p},
                       {"q", plan.q},
                       {"domain", plan.domain.kind},
                       {"node_count", report.node_count},
                       {"mesh_size", report.mesh_size},
                       {"seed", report.seed}};
    const fs::path path = dir / "summary.json";
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    close_output(out, path);
  }

  if (plan.output.wants("dat")) {
    const Mesh& mesh = *report.mesh;
    for (std::size_t k = 0; k < report.rows.size(); ++k) {
      const auto& row = report.rows[k];
      if (!row.pair) continue;
      write_field(dir / ("eigenfunction_" + std::to_string(k) + ".dat"), row.pair->field, mesh,
                  "lambda = " + format_number(row.lambda) + " case = " + to_string(row.pair->case_tag));
    }
    write_field(dir / "threshold_minimizer.dat", report.threshold.minimizer, mesh,
                "lambda1 = " + format_number(report.threshold.lambda1) + " unit mass");
    // One line per grid point: 1 marks an eigenvalue. Together with lambda1 this
    // is the plot of the spectrum {0} u (lambda1, inf).
    const fs::path path = dir / "spectrum.dat";
    auto out = open_output(path);
    out << "# lambda1 = " << format_number(report.threshold.lambda1) << "\n# lambda lambda_over_lambda1 is_eigenvalue J_value\n";
    for (const auto& row : report.rows) {
      const bool eig = row.status == RowStatus::EigenvalueZero || row.status == RowStatus::Eigenpair;
      out << format_number(row.lambda) << ' ' << format_number(row.lambda / report.threshold.lambda1) << ' '
          << (eig ? 1 : 0) << ' ' << format_number(row.pair ? row.pair->values.J_lambda : 0.0) << '\n';
    }
    close_output(out, path);
  }
}

}  // namespace pqspectra
