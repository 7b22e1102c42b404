#include "kernelloop/loop.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace kernelloop::loop {

namespace {

using Clock = std::chrono::steady_clock;

std::string now_utc() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void append_ledger(const std::filesystem::path& path,
                   const ExperimentRecord& rec) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot append to ledger: " + path.string());
    out << rec.to_tsv() << "\n";
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string ExperimentRecord::to_tsv() const {
    std::string out = std::to_string(iteration);
    out += '\t';
    out += timestamp;
    out += '\t';
    out += config_digest.empty() ? "-" : config_digest;
    out += '\t';
    out += keep ? "keep" : "revert";
    out += '\t';
    out += passed ? "true" : "false";
    out += '\t';
    out += failed_stage.empty() ? "-" : failed_stage;
    out += '\t';
    out += throughput ? format_double(*throughput) : "-";
    out += '\t';
    out += pct_of_peak ? format_double(*pct_of_peak) : "-";
    out += '\t';
    out += description;
    return out;
}

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::none: return "none";
        case StopReason::consecutive_reverts: return "consecutive_reverts";
        case StopReason::peak: return "peak";
        case StopReason::time: return "time";
        case StopReason::speedup: return "speedup";
        case StopReason::exhausted: return "exhausted";
        case StopReason::baseline_failure: return "baseline_failure";
        case StopReason::iteration_limit: return "iteration_limit";
    }
    return "?";
}

bool keep_decision(bool passed, double t_prime, double t_best) {
    if (t_best <= 0) throw DomainError("keep_decision: t_best must be > 0");
    return passed && t_prime > 1.01 * t_best;
}

std::pair<bool, StopReason> should_move_on(
    int n_rev, double elapsed_seconds, double t_best, double t_baseline,
    const std::optional<RooflineStatus>& roofline,
    const MoveOnCriteria& criteria) {
    if (n_rev >= criteria.max_consecutive_reverts)
        return {true, StopReason::consecutive_reverts};
    if (roofline && roofline->pct_of_peak >= criteria.peak_fraction)
        return {true, StopReason::peak};
    if (elapsed_seconds >= criteria.time_budget_seconds)
        return {true, StopReason::time};
    if (t_baseline > 0 && t_best / t_baseline >= criteria.speedup_target)
        return {true, StopReason::speedup};
    return {false, StopReason::none};
}

LoopResult run_loop(const planner::Workspace& ws, Mutator& mutator,
                    const LoopOptions& options, const BenchFn& bench) {
    const std::string config_file = ws.config_path().filename().string();
    auto store = make_version_store(options.store, ws.dir);
    store->init({config_file, ws.spec_path().filename().string()});

    LoopResult result;
    zoo::CandidateConfig k_best = ws.read_config();

    // Baseline establishes t_best; a broken starter aborts the loop.
    harness::VerificationReport baseline = bench(k_best);
    if (!baseline.all_passed) {
        const auto stage = baseline.failed_stage();
        throw DomainError("baseline error: starter config failed " +
                          (stage ? harness::to_string(*stage)
                                 : std::string("verification")));
    }
    store->commit("baseline " + k_best.digest());

    result.k_best = k_best;
    result.t_best = *baseline.throughput;
    result.t_baseline = *baseline.throughput;
    std::optional<RooflineStatus> roofline_best = baseline.roofline;

    {
        ExperimentRecord rec;
        rec.iteration = 0;
        rec.timestamp = now_utc();
        rec.config_digest = k_best.digest();
        rec.keep = true;
        rec.passed = true;
        rec.throughput = baseline.throughput;
        if (baseline.roofline) rec.pct_of_peak = baseline.roofline->pct_of_peak;
        rec.description = "baseline";
        append_ledger(ws.ledger_path(), rec);
        result.records.push_back(std::move(rec));
    }

    int n_rev = 0;
    const auto loop_start = Clock::now();  // budget excludes the baseline
    auto elapsed = [&] {
        return std::chrono::duration<double>(Clock::now() - loop_start).count();
    };

    for (int iter = 1;; ++iter) {
        auto [stop, reason] =
            should_move_on(n_rev, elapsed(), result.t_best, result.t_baseline,
                           roofline_best, options.criteria);
        if (stop) {
            result.reason = reason;
            break;
        }
        if (options.max_iterations > 0 && iter > options.max_iterations) {
            result.reason = StopReason::iteration_limit;
            break;
        }

        ExperimentRecord rec;
        rec.iteration = iter;
        rec.timestamp = now_utc();

        std::optional<Proposal> proposal;
        try {
            proposal = mutator.next(result.k_best, result.records, roofline_best);
        } catch (const FailedProposal& e) {
            rec.keep = false;
            rec.passed = false;
            rec.failed_stage = "proposal";
            rec.description = e.what();
            ++n_rev;
            ++result.experiments;
            append_ledger(ws.ledger_path(), rec);
            result.records.push_back(std::move(rec));
            continue;
        }
        if (!proposal) {
            result.reason = StopReason::exhausted;
            break;
        }
        if (proposal->config.digest() == result.k_best.digest()) {
            rec.keep = false;
            rec.passed = false;
            rec.failed_stage = "proposal";
            rec.description = "proposal identical to current best";
            ++n_rev;
            ++result.experiments;
            append_ledger(ws.ledger_path(), rec);
            result.records.push_back(std::move(rec));
            continue;
        }

        // The mutator's output lands in exactly one file.
        ws.write_config(proposal->config);
        {
            const auto dirty = store->dirty_files();
            bool violation = false;
            for (const auto& f : dirty)
                if (f != config_file) violation = true;
            if (violation) {
                store->discard_changes();
                rec.keep = false;
                rec.passed = false;
                rec.failed_stage = "proposal";
                rec.description = "workspace violation: touched files other "
                                  "than the config";
                ++n_rev;
                ++result.experiments;
                append_ledger(ws.ledger_path(), rec);
                result.records.push_back(std::move(rec));
                continue;
            }
        }
        store->commit("experiment " + std::to_string(iter) + ": " +
                      proposal->description);

        const harness::VerificationReport report = bench(proposal->config);
        const bool passed = report.all_passed;
        const double t_prime = report.throughput.value_or(0.0);
        const bool keep = keep_decision(passed, t_prime, result.t_best);

        rec.config_digest = proposal->config.digest();
        rec.keep = keep;
        rec.passed = passed;
        if (!passed) {
            const auto stage = report.failed_stage();
            rec.failed_stage = stage ? harness::to_string(*stage) : "verify";
        }
        if (passed) rec.throughput = report.throughput;
        if (report.roofline) rec.pct_of_peak = report.roofline->pct_of_peak;
        rec.description = proposal->description;

        if (keep) {
            result.k_best = proposal->config;
            result.t_best = t_prime;
            roofline_best = report.roofline;
            n_rev = 0;
            ++result.kept;
        } else {
            store->rollback_last();
            ++n_rev;
            // revert integrity: the config file must be back at k_best
            const std::string on_disk = read_file(ws.config_path());
            if (on_disk != result.k_best.serialize())
                throw IoError(
                    "revert integrity violation: workspace config does not "
                    "match k_best after rollback");
        }
        ++result.experiments;
        append_ledger(ws.ledger_path(), rec);
        result.records.push_back(std::move(rec));
    }

    result.wall_seconds = elapsed();
    // final workspace file equals k_best bit-exactly
    if (read_file(ws.config_path()) != result.k_best.serialize())
        ws.write_config(result.k_best);
    return result;
}

LoopResult run_loop(const planner::Workspace& ws, Mutator& mutator,
                    const LoopOptions& options, const harness::Harness& h) {
    return run_loop(ws, mutator, options,
                    [&](const zoo::CandidateConfig& c) {
                        return h.bench(c, ws.spec);
                    });
}

}  // namespace kernelloop::loop
