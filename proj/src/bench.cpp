#include "mmdpcn/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "mmdpcn/baselines.hpp"
#include "mmdpcn/errors.hpp"
#include "mmdpcn/hierarchy.hpp"
#include "mmdpcn/io.hpp"
#include "mmdpcn/state_infer.hpp"

namespace mmdpcn {

namespace {

struct PatchOutcome {
  StateVector state;
  SolveTrace trace;
};

PatchOutcome solve_one(const std::string& method, const Vector& y, const LayerModel& model, const HyperParams& hp,
                       const WoodburySolver& solver, const BenchConfig& bench) {
  if (method == "mm") {
    StateResult r = infer_state(y, nullptr, model, hp, solver, StateVector::filled(model.c.cols(), kDefaultStateInit),
                                bench.baseline.max_iter);
    return {std::move(r.state), std::move(r.trace)};
  }
  BaselineConfig cfg = bench.baseline;
  cfg.method = parse_baseline_method(method);
  BaselineResult r = baseline_solve(y, nullptr, model, hp, cfg);
  return {std::move(r.state), std::move(r.trace)};
}

template <typename F>
void for_each_index(std::size_t n, std::size_t threads, F&& f) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) f(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

BenchInput bench_input(const BenchConfig& bench, std::uint64_t seed) {
  if (bench.patches_dir.empty()) {
    SparseGenerativeSpec spec = bench.data;
    spec.seed = seed;
    SparseGenerativeData d = make_sparse_generative(spec);
    return {std::move(d.c), std::move(d.patches)};
  }
  const std::size_t p = bench.data.p;
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(p))));
  require(side * side == p, ErrorKind::ConfigError, "bench p must be a square number when reading patch files");
  BenchInput in;
  for (const Frame& raw : load_frames_dir(bench.patches_dir)) {
    const Frame f = to_grayscale(raw);
    require(f.height % side == 0 && f.width % side == 0, ErrorKind::GridMismatch,
            "bench frames must tile into " + std::to_string(side) + "x" + std::to_string(side) + " patches");
    const PatchBatch batch = decompose_frame(f, f.height / side, f.width / side);
    for (const auto& patch : batch.patches) {
      in.patches.push_back(patch);
      if (bench.data.count > 0 && in.patches.size() == bench.data.count) break;
    }
    if (bench.data.count > 0 && in.patches.size() == bench.data.count) break;
  }
  require(!in.patches.empty(), ErrorKind::EmptyVector, "no patches found in " + bench.patches_dir);
  in.c = LayerModel::random({p, bench.data.k, 1, 1}, seed).c;
  return in;
}

BenchReport run_bench(const BenchInput& input, const BenchConfig& bench, const std::vector<std::string>& methods) {
  require(!methods.empty(), ErrorKind::InvalidArgument, "bench: no methods selected");
  for (const auto& m : methods)
    require(m == "mm" || m == "ista" || m == "fista" || m == "adam", ErrorKind::InvalidArgument,
            "bench: unknown method '" + m + "'");
  require(!input.patches.empty(), ErrorKind::EmptyVector, "bench: no patches");
  const std::size_t k = input.c.cols();
  const LayerModel model{Matrix(k, k), Matrix(k, 1), input.c};
  const WoodburySolver solver(input.c);
  const std::size_t n = input.patches.size();

  std::vector<std::vector<PatchOutcome>> outcomes(methods.size(), std::vector<PatchOutcome>(n));
  for (std::size_t m = 0; m < methods.size(); ++m)
    for_each_index(n, bench.threads, [&](std::size_t i) {
      outcomes[m][i] = solve_one(methods[m], input.patches[i], model, bench.hp, solver, bench);
    });

  BenchReport report;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodRun run;
    run.method = methods[m];
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& o : outcomes) best = std::min(best, o[i].trace.final_objective());
      const PatchOutcome& o = outcomes[m][i];
      run.energy.push_back(state_objective(input.patches[i], o.state.values, nullptr, model, bench.hp));
      run.spa.push_back(zero_percent(o.state.values.span(), bench.hp.clamp_state));
      run.iters_to_1pct.push_back(static_cast<double>(o.trace.iterations_to_within(0.01, best)));
      run.traces.push_back(o.trace);
    }
    report.runs.push_back(std::move(run));
  }
  return report;
}

const MethodRun& BenchReport::run(const std::string& method) const {
  for (const auto& r : runs)
    if (r.method == method) return r;
  fail(ErrorKind::InvalidArgument, "bench report has no method '" + method + "'");
}

std::vector<MetricRow> BenchReport::metric_rows() const {
  std::vector<MetricRow> rows;
  for (const auto& r : runs) {
    rows.push_back(summarize(r.method + ".energy", r.energy));
    rows.push_back(summarize(r.method + ".spa", r.spa));
    rows.push_back(summarize(r.method + ".iters_to_1pct", r.iters_to_1pct));
  }
  return rows;
}

std::vector<MetricRow> BenchReport::timing_rows() const {
  std::vector<MetricRow> rows;
  for (const auto& r : runs) {
    std::vector<double> wall;
    for (const auto& t : r.traces) wall.push_back(t.wall_time);
    rows.push_back(summarize(r.method + ".wall_seconds", wall));
  }
  return rows;
}

std::string trace_csv(const MethodRun& run) {
  std::ostringstream os;
  os << "patch,iteration,objective,sparsity\n";
  for (std::size_t p = 0; p < run.traces.size(); ++p) {
    const SolveTrace& t = run.traces[p];
    for (std::size_t i = 0; i < t.objective_per_iter.size(); ++i) {
      os << p << "," << i << "," << format_double(t.objective_per_iter[i]) << ",";
      os << (i < t.sparsity_per_iter.size() ? format_double(t.sparsity_per_iter[i]) : "") << "\n";
    }
  }
  return os.str();
}

}  // namespace mmdpcn
