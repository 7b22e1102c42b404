// Command-line entry point: profile -> plan -> extract -> loop ->
// orchestrate -> verify -> score -> report.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "kernelloop/harness.hpp"
#include "kernelloop/loop.hpp"
#include "kernelloop/orchestrator.hpp"
#include "kernelloop/planner.hpp"
#include "kernelloop/profiler.hpp"

namespace kl = kernelloop;
namespace fs = std::filesystem;

namespace {

kl::HardwareSpec resolve_hardware(const std::string& spec,
                                  const std::string& db) {
    if (spec == "calibrate") return kl::profiler::calibrate_hardware();
    if (db.empty()) return kl::profiler::detect_hardware_static(spec);
    return kl::profiler::detect_hardware_static(spec, db);
}

std::vector<kl::planner::Workspace> load_workspaces(const fs::path& root) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "kernel.spec"))
            dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<kl::planner::Workspace> out;
    for (const auto& d : dirs) out.push_back(kl::planner::load_workspace(d));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernelloop: profile a model, rank its kernels by Amdahl "
                 "impact, and improve each through a correctness-gated "
                 "keep/revert loop"};
    app.require_subcommand(1);

    std::string model_path, out_path, profile_path, plan_path, hardware = "calibrate";
    std::string hardware_db;
    std::string workspace_dir, workspace_root, mutator_spec = "playbook";
    std::string results_path, report_path;
    int warmup = 5, iters = 10;
    bool force = false;
    std::uint64_t seed = 0;
    double budget_seconds = 7200.0, total_budget = 7200.0;
    int max_reverts = 5, max_iterations = 0;
    double peak_fraction = 0.90, speedup_target = 2.0;
    int timed_iters = 200, measure_warmup = 25;
    double mutator_timeout = 120.0;
    std::int64_t flop_cap = 50'000'000;
    std::string store_kind = "git";

    auto add_hw = [&](CLI::App* cmd) {
        cmd->add_option("--hardware", hardware,
                        "static database name or 'calibrate'");
        cmd->add_option("--hardware-db", hardware_db,
                        "override the hardware database file");
    };
    auto add_loop_flags = [&](CLI::App* cmd) {
        cmd->add_option("--budget-seconds", budget_seconds);
        cmd->add_option("--max-reverts", max_reverts);
        cmd->add_option("--peak-fraction", peak_fraction);
        cmd->add_option("--speedup-target", speedup_target);
        cmd->add_option("--mutator", mutator_spec,
                        "playbook, random, or exec:<command>");
        cmd->add_option("--seed", seed);
        cmd->add_option("--max-iterations", max_iterations,
                        "0 = no iteration cap");
        cmd->add_option("--timed-iters", timed_iters);
        cmd->add_option("--measure-warmup", measure_warmup);
        cmd->add_option("--flop-cap", flop_cap,
                        "execution-scale cap for verification workloads");
        cmd->add_option("--mutator-timeout", mutator_timeout);
        cmd->add_option("--store", store_kind, "git or snapshot");
    };

    auto* cmd_profile = app.add_subcommand("profile", "time a model on the reference kernels");
    cmd_profile->add_option("--model", model_path)->required();
    cmd_profile->add_option("--out", out_path)->required();
    cmd_profile->add_option("--warmup", warmup);
    cmd_profile->add_option("--iters", iters);
    add_hw(cmd_profile);

    auto* cmd_plan = app.add_subcommand("plan", "rank kernels by Amdahl impact");
    cmd_plan->add_option("--profile", profile_path)->required();
    cmd_plan->add_option("--out", out_path)->required();
    double min_fraction = 0.01;
    cmd_plan->add_option("--min-fraction", min_fraction);

    auto* cmd_extract = app.add_subcommand("extract", "generate kernel workspaces");
    cmd_extract->add_option("--plan", plan_path)->required();
    cmd_extract->add_option("--out-dir", out_path)->required();
    cmd_extract->add_flag("--force", force);

    auto* cmd_loop = app.add_subcommand("loop", "optimize one kernel workspace");
    cmd_loop->add_option("--workspace", workspace_dir)->required();
    add_loop_flags(cmd_loop);
    add_hw(cmd_loop);

    auto* cmd_orch = app.add_subcommand("orchestrate", "optimize every workspace in plan order");
    cmd_orch->add_option("--workspace-root", workspace_root)->required();
    cmd_orch->add_option("--total-budget-seconds", total_budget);
    cmd_orch->add_option("--out", out_path, "report file");
    add_loop_flags(cmd_orch);
    add_hw(cmd_orch);

    auto* cmd_verify = app.add_subcommand("verify", "end-to-end correctness and speedup");
    cmd_verify->add_option("--model", model_path)->required();
    cmd_verify->add_option("--workspace-root", workspace_root)->required();

    auto* cmd_score = app.add_subcommand("score", "fast_p over a results file");
    cmd_score->add_option("--results", results_path)->required();

    auto* cmd_report = app.add_subcommand("report", "render workspace ledgers as a report");
    cmd_report->add_option("--workspace-root", workspace_root)->required();
    cmd_report->add_option("--out", report_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cmd_profile->parsed()) {
            const auto model = kl::profiler::load_model(model_path);
            const auto hw = resolve_hardware(hardware, hardware_db);
            const auto prof = kl::profiler::profile(model, hw, warmup, iters);
            kl::profiler::export_profile(prof, out_path);
            std::cout << "profiled " << prof.entries.size() << " ops of '"
                      << prof.model_name << "' -> " << out_path << "\n";
            return 0;
        }
        if (cmd_plan->parsed()) {
            const auto prof = kl::profiler::import_profile(profile_path);
            kl::planner::PlanOptions opts;
            opts.min_fraction = min_fraction;
            const auto plan = kl::planner::build_plan(prof, opts);
            kl::planner::save_plan(plan, out_path);
            std::cout << "plan with " << plan.entries.size()
                      << " kernels -> " << out_path << "\n";
            for (const auto& e : plan.entries)
                std::cout << "  " << e.kernel_spec.name << "  f=" << e.f
                          << "\n";
            return 0;
        }
        if (cmd_extract->parsed()) {
            const auto plan = kl::planner::load_plan(plan_path);
            const auto ws =
                kl::planner::extract_workspaces(plan, out_path, force);
            std::cout << "extracted " << ws.size() << " workspaces under "
                      << out_path << "\n";
            return 0;
        }

        auto make_harness = [&] {
            kl::harness::VerifySettings vs;
            vs.flop_cap = flop_cap;
            kl::harness::MeasureSettings ms;
            ms.timed_iters = timed_iters;
            ms.warmup_iters = measure_warmup;
            return kl::harness::Harness(resolve_hardware(hardware, hardware_db),
                                        vs, ms);
        };
        auto criteria = [&] {
            kl::loop::MoveOnCriteria c;
            c.max_consecutive_reverts = max_reverts;
            c.peak_fraction = peak_fraction;
            c.time_budget_seconds = budget_seconds;
            c.speedup_target = speedup_target;
            return c;
        };
        const kl::loop::StoreKind store = store_kind == "snapshot"
                                              ? kl::loop::StoreKind::snapshot
                                              : kl::loop::StoreKind::git;

        if (cmd_loop->parsed()) {
            auto ws = kl::planner::load_workspace(workspace_dir);
            kl::loop::ExternalMutatorOptions mo;
            mo.timeout_seconds = mutator_timeout;
            auto mutator = kl::loop::make_mutator(mutator_spec, ws, seed, mo);
            kl::loop::LoopOptions lo;
            lo.criteria = criteria();
            lo.store = store;
            lo.max_iterations = max_iterations;
            const auto h = make_harness();
            const auto r = kl::loop::run_loop(ws, *mutator, lo, h);
            std::cout << "kernel " << ws.spec.name << ": baseline "
                      << r.t_baseline << " -> best " << r.t_best << " ("
                      << (r.t_baseline > 0 ? r.t_best / r.t_baseline : 1.0)
                      << "x), " << r.experiments << " experiments, " << r.kept
                      << " kept, stop=" << kl::loop::to_string(r.reason)
                      << "\n";
            return 0;
        }
        if (cmd_orch->parsed()) {
            auto workspaces = load_workspaces(workspace_root);
            kl::orchestrator::OrchestrateOptions oo;
            oo.criteria = criteria();
            oo.total_budget_seconds = total_budget;
            oo.store = store;
            oo.max_iterations_per_kernel = max_iterations;
            const auto h = make_harness();
            kl::loop::ExternalMutatorOptions mo;
            mo.timeout_seconds = mutator_timeout;
            const auto summary = kl::orchestrator::orchestrate(
                workspaces,
                [&](const kl::planner::Workspace& w) {
                    return kl::loop::make_mutator(mutator_spec, w, seed, mo);
                },
                oo, h);
            std::cout << kl::orchestrator::format_report(summary);
            if (!out_path.empty())
                kl::orchestrator::write_report(summary, out_path);
            return 0;
        }
        if (cmd_verify->parsed()) {
            const auto model = kl::profiler::load_model(model_path);
            const auto workspaces = load_workspaces(workspace_root);
            const auto r = kl::orchestrator::verify_end_to_end(model, workspaces);
            std::cout << "correct\t" << (r.correct ? "true" : "false");
            if (!r.correct) std::cout << "\tfailing_op=" << r.failing_op;
            std::cout << "\nmeasured_S\t" << r.measured_S << "\n";
            return r.correct ? 0 : 1;
        }
        if (cmd_score->parsed()) {
            const auto results = kl::orchestrator::load_results(results_path);
            const auto s = kl::orchestrator::score(results);
            for (const auto& [p, frac] : s.per_threshold)
                std::cout << "fast_" << p << "\t" << frac << "\n";
            return 0;
        }
        if (cmd_report->parsed()) {
            const auto workspaces = load_workspaces(workspace_root);
            std::string text = "# kernelloop-report v1\n";
            for (const auto& ws : workspaces) {
                text += "== " + ws.spec.name + " ==\n";
                std::ifstream ledger(ws.ledger_path());
                std::string line;
                while (std::getline(ledger, line)) text += line + "\n";
            }
            if (report_path.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(report_path);
                out << text;
                std::cout << "report -> " << report_path << "\n";
            }
            return 0;
        }
    } catch (const kl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
