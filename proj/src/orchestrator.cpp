#include "kernelloop/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kernelloop::orchestrator {

namespace {

using Clock = std::chrono::steady_clock;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string part;
    std::stringstream ss(line);
    while (std::getline(ss, part, '\t')) out.push_back(part);
    return out;
}

}  // namespace

double compose_projected(const std::vector<std::pair<double, double>>& fs) {
    double covered = 0.0, weighted = 0.0;
    for (const auto& [f, s] : fs) {
        if (f < 0.0 || f > 1.0) throw DomainError("fraction outside [0,1]");
        if (s <= 0.0) throw DomainError("speedup must be positive");
        covered += f;
        weighted += f / s;
    }
    if (covered > 1.0 + 1e-9) throw DomainError("fractions sum above 1");
    return 1.0 / (weighted + (1.0 - covered));
}

RunSummary orchestrate(const std::vector<planner::Workspace>& workspaces,
                       const MutatorFactory& factory,
                       const OrchestrateOptions& options,
                       const BenchFactory& bench_factory) {
    RunSummary summary;
    const auto t0 = Clock::now();
    double remaining = options.total_budget_seconds;

    for (const auto& ws : workspaces) {
        KernelRunSummary ks;
        ks.name = ws.spec.name;
        ks.f = ws.f;

        loop::LoopOptions lo;
        lo.criteria = options.criteria;
        lo.criteria.time_budget_seconds =
            std::max(0.0, std::min(options.criteria.time_budget_seconds,
                                   remaining));
        lo.store = options.store;
        lo.max_iterations = options.max_iterations_per_kernel;

        const auto k0 = Clock::now();
        try {
            auto mutator = factory(ws);
            const loop::LoopResult r =
                loop::run_loop(ws, *mutator, lo, bench_factory(ws));
            ks.baseline_throughput = r.t_baseline;
            ks.final_throughput = r.t_best;
            ks.s = r.t_baseline > 0 ? r.t_best / r.t_baseline : 1.0;
            ks.experiments = r.experiments;
            ks.kept = r.kept;
            ks.move_on_reason = r.reason;
        } catch (const std::exception& e) {
            ks.skip_reason = e.what();
            ks.move_on_reason = loop::StopReason::baseline_failure;
        }
        ks.wall_seconds =
            std::chrono::duration<double>(Clock::now() - k0).count();
        remaining -= ks.wall_seconds;
        summary.kernels.push_back(std::move(ks));
    }

    std::vector<std::pair<double, double>> fs;
    for (const auto& ks : summary.kernels)
        if (ks.skip_reason.empty()) fs.emplace_back(ks.f, ks.s);
    summary.projected_S = fs.empty() ? 1.0 : compose_projected(fs);
    summary.total_wall_seconds =
        std::chrono::duration<double>(Clock::now() - t0).count();
    return summary;
}

RunSummary orchestrate(const std::vector<planner::Workspace>& workspaces,
                       const MutatorFactory& factory,
                       const OrchestrateOptions& options,
                       const harness::Harness& h) {
    return orchestrate(workspaces, factory, options,
                       [&h](const planner::Workspace& ws) -> loop::BenchFn {
                           return [&h, &ws](const zoo::CandidateConfig& c) {
                               return h.bench(c, ws.spec);
                           };
                       });
}

EndToEndResult verify_end_to_end(const profiler::ModelDesc& model,
                                 const std::vector<planner::Workspace>& workspaces,
                                 int timing_iters) {
    struct ResolvedOp {
        KernelType type;
        const profiler::ModelOp* op;
        std::vector<TensorBuffer> inputs;
        std::optional<zoo::CandidateConfig> starter;    // executable types
        std::optional<zoo::CandidateConfig> optimized;  // workspace match
    };

    std::vector<ResolvedOp> ops;
    for (const auto& op : model.ops) {
        const auto t = profiler::op_type(op);
        if (!t)
            throw DomainError("end-to-end: op '" + op.op_name +
                              "' does not classify");
        ResolvedOp r;
        r.type = *t;
        r.op = &op;
        r.inputs = zoo::make_inputs(*t, op.shape, op.dtype, 77);
        if (zoo::is_executable(*t)) {
            r.starter = zoo::default_config(*t);
            for (const auto& ws : workspaces) {
                if (ws.spec.kernel_type == *t &&
                    ws.spec.primary_shape == op.shape &&
                    ws.spec.dtype == op.dtype) {
                    r.optimized = ws.read_config();
                    break;
                }
            }
        }
        ops.push_back(std::move(r));
    }

    EndToEndResult result;

    // correctness: every optimized op against the oracle at spec tolerance
    for (const auto& r : ops) {
        if (!r.optimized) continue;
        const Tolerance tol = tolerance_for(r.op->dtype);
        const TensorBuffer ref =
            zoo::reference_execute(r.type, r.op->shape, r.inputs, r.op->dtype);
        const TensorBuffer out = zoo::candidate_execute(*r.optimized,
                                                        r.op->shape, r.inputs,
                                                        r.op->dtype);
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (!within_tolerance(out.get(i), ref.get(i), tol)) {
                result.correct = false;
                result.failing_op = r.op->op_name;
                break;
            }
        }
        if (!result.correct) break;
    }

    // speedup: starter configs vs optimized configs, total model time
    auto run_model = [&](bool optimized) {
        double total = 0.0;
        for (const auto& r : ops) {
            auto exec_once = [&] {
                if (r.starter) {
                    const zoo::CandidateConfig& cfg =
                        optimized && r.optimized ? *r.optimized : *r.starter;
                    zoo::candidate_execute(cfg, r.op->shape, r.inputs,
                                           r.op->dtype);
                } else {
                    zoo::reference_execute(r.type, r.op->shape, r.inputs,
                                           r.op->dtype);
                }
            };
            exec_once();  // warm
            double best = 1e300;
            for (int it = 0; it < timing_iters; ++it) {
                const auto t0 = Clock::now();
                for (int rep = 0; rep < r.op->repeat; ++rep) exec_once();
                best = std::min(
                    best, std::chrono::duration<double>(Clock::now() - t0)
                              .count());
            }
            total += best;
        }
        return total;
    };

    result.reference_seconds = run_model(false);
    result.optimized_seconds = run_model(true);
    result.measured_S = result.optimized_seconds > 0
                            ? result.reference_seconds / result.optimized_seconds
                            : 1.0;
    return result;
}

double fast_p(const std::vector<ProblemResult>& results, double p) {
    if (results.empty())
        throw DomainError("fast_p undefined for an empty result set");
    if (p < 1.0) throw DomainError("fast_p threshold must be >= 1");
    std::size_t hits = 0;
    for (const auto& r : results)
        if (r.correct && r.speedup >= p) ++hits;
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

ScoreResult score(const std::vector<ProblemResult>& results) {
    ScoreResult s;
    s.problems = static_cast<int>(results.size());
    for (double p : kFastPThresholds) s.per_threshold[p] = fast_p(results, p);
    return s;
}

std::vector<ProblemResult> load_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open results: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "# kernelloop-results v1")
        throw ParseError(path.string() + ": bad results header");
    std::vector<ProblemResult> results;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto parts = split_tabs(line);
        if (parts.size() != 3)
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected problem\\tcorrect\\tspeedup");
        ProblemResult r;
        r.problem = parts[0];
        r.correct = parts[1] == "true" || parts[1] == "1";
        r.speedup = std::stod(parts[2]);
        results.push_back(std::move(r));
    }
    return results;
}

void save_results(const std::vector<ProblemResult>& results,
                  const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write results: " + path.string());
    out << "# kernelloop-results v1\n";
    for (const auto& r : results)
        out << r.problem << "\t" << (r.correct ? "true" : "false") << "\t"
            << format_double(r.speedup) << "\n";
}

std::string format_report(const RunSummary& summary) {
    std::string out = "# kernelloop-report v1\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-40s %8s %12s %12s %8s %6s %6s %s\n",
                  "kernel", "f", "baseline", "final", "s", "exp", "kept",
                  "stop");
    out += line;
    for (const auto& ks : summary.kernels) {
        if (!ks.skip_reason.empty()) {
            std::snprintf(line, sizeof line, "%-40s %8.4f skipped: %s\n",
                          ks.name.c_str(), ks.f, ks.skip_reason.c_str());
            out += line;
            continue;
        }
        std::snprintf(line, sizeof line,
                      "%-40s %8.4f %12.4g %12.4g %8.3f %6d %6d %s\n",
                      ks.name.c_str(), ks.f, ks.baseline_throughput,
                      ks.final_throughput, ks.s, ks.experiments, ks.kept,
                      loop::to_string(ks.move_on_reason).c_str());
        out += line;
    }
    out += "projected_S\t" + format_double(summary.projected_S) + "\n";
    if (summary.measured_S)
        out += "measured_S\t" + format_double(*summary.measured_S) + "\n";
    out += "total_wall_seconds\t" + format_double(summary.total_wall_seconds) +
           "\n";
    return out;
}

void write_report(const RunSummary& summary,
                  const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path.string());
    out << format_report(summary);
}

}  // namespace kernelloop::orchestrator
