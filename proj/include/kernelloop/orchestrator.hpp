#pragma once

// Phase B multi-kernel sequencing by Amdahl impact, Phase C end-to-end
// verification, and the fast_p batch scorer.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kernelloop/harness.hpp"
#include "kernelloop/loop.hpp"
#include "kernelloop/planner.hpp"
#include "kernelloop/profiler.hpp"

namespace kernelloop::orchestrator {

struct KernelRunSummary {
    std::string name;
    double f = 0.0;
    double baseline_throughput = 0.0;
    double final_throughput = 0.0;
    double s = 1.0;  // final / baseline
    int experiments = 0;
    int kept = 0;
    loop::StopReason move_on_reason = loop::StopReason::none;
    double wall_seconds = 0.0;
    std::string skip_reason;  // non-empty when the kernel was skipped
};

struct RunSummary {
    std::vector<KernelRunSummary> kernels;
    double projected_S = 1.0;
    std::optional<double> measured_S;
    double total_wall_seconds = 0.0;
};

// Composition of per-kernel contributions:
// overall = 1 / (sum_i f_i/s_i + (1 - sum_i f_i)). Order-invariant.
double compose_projected(const std::vector<std::pair<double, double>>& fs);

using MutatorFactory =
    std::function<std::unique_ptr<loop::Mutator>(const planner::Workspace&)>;

struct OrchestrateOptions {
    loop::MoveOnCriteria criteria;
    double total_budget_seconds = 7200.0;
    loop::StoreKind store = loop::StoreKind::git;
    int max_iterations_per_kernel = 0;
};

// Runs the keep/revert loop on each workspace in plan order (descending f),
// capping each kernel's time criterion by the remaining total budget.
// Baseline failures skip the kernel with a logged reason.
using BenchFactory =
    std::function<loop::BenchFn(const planner::Workspace&)>;
RunSummary orchestrate(const std::vector<planner::Workspace>& workspaces,
                       const MutatorFactory& factory,
                       const OrchestrateOptions& options,
                       const BenchFactory& bench_factory);
RunSummary orchestrate(const std::vector<planner::Workspace>& workspaces,
                       const MutatorFactory& factory,
                       const OrchestrateOptions& options,
                       const harness::Harness& h);

struct EndToEndResult {
    bool correct = true;
    std::string failing_op;
    double measured_S = 1.0;
    double reference_seconds = 0.0;
    double optimized_seconds = 0.0;
};

// Phase C: re-runs the model with starter configs and with the optimized
// workspace configs, checks every optimized op against the oracle at the
// spec tolerance, and reports total-time speedup.
EndToEndResult verify_end_to_end(const profiler::ModelDesc& model,
                                 const std::vector<planner::Workspace>& workspaces,
                                 int timing_iters = 3);

// ---------------------------------------------------------------------------
// fast_p scoring
// ---------------------------------------------------------------------------

inline constexpr double kFastPThresholds[] = {1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};

struct ProblemResult {
    std::string problem;
    bool correct = false;
    double speedup = 0.0;
};

// Fraction of problems solved correctly with speedup >= p.
double fast_p(const std::vector<ProblemResult>& results, double p);

struct ScoreResult {
    int problems = 0;
    std::map<double, double> per_threshold;
};
ScoreResult score(const std::vector<ProblemResult>& results);

// Results file: "# kernelloop-results v1", then problem\tcorrect\tspeedup.
std::vector<ProblemResult> load_results(const std::filesystem::path& path);
void save_results(const std::vector<ProblemResult>& results,
                  const std::filesystem::path& path);

// Human-readable global report plus the machine-readable summary block.
std::string format_report(const RunSummary& summary);
void write_report(const RunSummary& summary, const std::filesystem::path& path);

}  // namespace kernelloop::orchestrator
