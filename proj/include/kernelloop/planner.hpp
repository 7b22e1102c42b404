#pragma once

// Phase A extraction: turn a profile into ranked kernel workspaces with
// Amdahl-law projections and what-if tables.

#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "kernelloop/core.hpp"
#include "kernelloop/profiler.hpp"
#include "kernelloop/zoo.hpp"

namespace kernelloop::planner {

// End-to-end speedup from accelerating a fraction f of runtime by s:
// S = 1 / ((1 - f) + f / s). Throws DomainError outside 0<=f<=1, s>0.
double amdahl(double f, double s);

inline constexpr double kWhatIfSpeedups[] = {1.5, 2.0, 3.0, 5.0};

struct PlanEntry {
    KernelSpec kernel_spec;
    double f = 0.0;                  // fraction of profiled time
    std::map<double, double> what_if;  // s -> projected S
};

struct OptimizationPlan {
    std::vector<PlanEntry> entries;  // descending f, ties by name
    HardwareSpec hardware;
};

struct PlanOptions {
    // Entries below this fraction are dropped; the Amdahl ceiling
    // 1/(1-0.01) makes them unprofitable by default.
    double min_fraction = 0.01;
};

// Merges supported-type entries by (kernel_type, shape, dtype) and ranks
// them. Throws DomainError when nothing is optimizable.
OptimizationPlan build_plan(const profiler::Profile& profile,
                            const PlanOptions& opts = {});

std::string plan_to_text(const OptimizationPlan& plan);
OptimizationPlan plan_from_text(const std::string& text);
void save_plan(const OptimizationPlan& plan, const std::filesystem::path& p);
OptimizationPlan load_plan(const std::filesystem::path& p);

struct Workspace {
    std::filesystem::path dir;
    KernelSpec spec;
    double f = 0.0;

    std::filesystem::path spec_path() const { return dir / "kernel.spec"; }
    std::filesystem::path config_path() const { return dir / "candidate.cfg"; }
    std::filesystem::path ledger_path() const { return dir / "ledger.tsv"; }

    zoo::CandidateConfig read_config() const;
    void write_config(const zoo::CandidateConfig& c) const;
};

// One directory per plan entry: spec file, starter config, empty ledger.
// Refuses to clobber an existing workspace unless forced.
std::vector<Workspace> extract_workspaces(const OptimizationPlan& plan,
                                          const std::filesystem::path& out_dir,
                                          bool force = false);
Workspace load_workspace(const std::filesystem::path& dir);

// kernel.spec round trip ("# kernelloop-spec v1", key=value lines).
void save_spec_file(const KernelSpec& spec, double f,
                    const std::filesystem::path& path);
std::pair<KernelSpec, double> load_spec_file(const std::filesystem::path& path);

// The ledger header shared with the loop module.
inline constexpr const char* kLedgerHeader =
    "iter\ttimestamp\tdigest\tdecision\tpassed\tfailed_stage\tthroughput\t"
    "pct_peak\tdescription";

}  // namespace kernelloop::planner
