#pragma once

// The single-kernel keep/revert optimization loop: workspace versioning,
// TSV ledger, move-on criteria, and the pluggable mutator interface that
// stands in for an LLM agent.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kernelloop/core.hpp"
#include "kernelloop/harness.hpp"
#include "kernelloop/planner.hpp"
#include "kernelloop/zoo.hpp"

namespace kernelloop::loop {

struct ExperimentRecord {
    int iteration = 0;
    std::string timestamp;
    std::string config_digest;
    bool keep = false;
    bool passed = false;
    std::string failed_stage;  // empty when passed; "proposal" for mutator
                               // failures
    std::optional<double> throughput;
    std::optional<double> pct_of_peak;
    std::string description;

    std::string to_tsv() const;
};

struct MoveOnCriteria {
    int max_consecutive_reverts = 5;
    double peak_fraction = 0.90;
    double time_budget_seconds = 7200.0;
    double speedup_target = 2.0;
};

enum class StopReason {
    none,
    consecutive_reverts,
    peak,
    time,
    speedup,
    exhausted,
    baseline_failure,
    iteration_limit,
};
std::string to_string(StopReason r);

// keep iff passed and t' exceeds the 1.01x bar, strictly.
bool keep_decision(bool passed, double t_prime, double t_best);

// First criterion met, in the fixed precedence reverts > peak > time >
// speedup.
std::pair<bool, StopReason> should_move_on(
    int n_rev, double elapsed_seconds, double t_best, double t_baseline,
    const std::optional<RooflineStatus>& roofline,
    const MoveOnCriteria& criteria);

// ---------------------------------------------------------------------------
// Mutators
// ---------------------------------------------------------------------------

struct Proposal {
    zoo::CandidateConfig config;
    std::string description;
};

// Raised by a mutator whose proposal attempt failed (malformed response,
// timeout, no-change echo); the loop logs a revert-equivalent record and
// continues.
struct FailedProposal : Error {
    using Error::Error;
};

class Mutator {
  public:
    virtual ~Mutator() = default;
    // nullopt = exhausted. The returned config must be valid and differ
    // from k_best.
    virtual std::optional<Proposal> next(
        const zoo::CandidateConfig& k_best,
        const std::vector<ExperimentRecord>& history,
        const std::optional<RooflineStatus>& roofline) = 0;
};

// Deterministic tier-ordered coordinate search over the parameter space.
// Memory-bound kernels explore tier-2 parameters first, compute-bound
// tier 1 first, then ascending tiers; never re-proposes a digest already
// in history.
std::unique_ptr<Mutator> make_playbook_mutator(KernelType k);

// Uniform random single-parameter changes (seeded).
std::unique_ptr<Mutator> make_random_mutator(KernelType k, std::uint64_t seed);

// Spawns `command` per call, feeds a framed request document (CONFIG,
// HISTORY, ROOFLINE, SPEC) on stdin and parses a framed response (CONFIG,
// DESCRIPTION) from stdout. Malformed responses and timeouts surface as
// FailedProposal.
struct ExternalMutatorOptions {
    double timeout_seconds = 120.0;
    int history_lines = 50;
};
std::unique_ptr<Mutator> make_external_mutator(std::string command,
                                               std::string spec_text,
                                               ExternalMutatorOptions opts = {});

// "playbook" | "random" | "exec:<command>"
std::unique_ptr<Mutator> make_mutator(const std::string& spec_string,
                                      const planner::Workspace& ws,
                                      std::uint64_t seed,
                                      ExternalMutatorOptions opts = {});

// ---------------------------------------------------------------------------
// Version store
// ---------------------------------------------------------------------------

enum class StoreKind { git, snapshot };

class VersionStore {
  public:
    virtual ~VersionStore() = default;
    virtual void init(const std::vector<std::string>& tracked_files) = 0;
    virtual void commit(const std::string& message) = 0;
    // Equivalent of `git reset --hard HEAD~1`.
    virtual void rollback_last() = 0;
    // Restore tracked files to the last committed state without moving it.
    virtual void discard_changes() = 0;
    virtual int commit_count() const = 0;
    // Tracked files changed on disk relative to the last commit.
    virtual std::vector<std::string> dirty_files() const = 0;
};

std::unique_ptr<VersionStore> make_version_store(
    StoreKind kind, const std::filesystem::path& workspace_dir);
bool git_available();

// ---------------------------------------------------------------------------
// The loop
// ---------------------------------------------------------------------------

using BenchFn =
    std::function<harness::VerificationReport(const zoo::CandidateConfig&)>;

struct LoopOptions {
    MoveOnCriteria criteria;
    StoreKind store = StoreKind::git;
    int max_iterations = 0;  // 0 = no explicit cap
};

struct LoopResult {
    zoo::CandidateConfig k_best;
    double t_best = 0.0;
    double t_baseline = 0.0;
    StopReason reason = StopReason::none;
    std::vector<ExperimentRecord> records;  // baseline first
    int experiments = 0;
    int kept = 0;
    double wall_seconds = 0.0;
};

// Algorithm: bench the starter to establish t_best, then repeatedly ask
// the mutator for a candidate, write it to the workspace's single config
// file, commit, bench, and keep (advance) or revert (hard rollback).
// Throws DomainError when the baseline itself fails verification.
LoopResult run_loop(const planner::Workspace& ws, Mutator& mutator,
                    const LoopOptions& options, const BenchFn& bench);

// Convenience wrapper using the real harness as the evaluation function.
LoopResult run_loop(const planner::Workspace& ws, Mutator& mutator,
                    const LoopOptions& options, const harness::Harness& h);

}  // namespace kernelloop::loop
