#include <algorithm>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "kernelloop/loop.hpp"

namespace kernelloop::loop {

namespace {

// ---------------------------------------------------------------------------
// Playbook: deterministic tier-ordered coordinate sweep.
// ---------------------------------------------------------------------------

class PlaybookMutator final : public Mutator {
  public:
    explicit PlaybookMutator(KernelType k) : kernel_(k) {}

    std::optional<Proposal> next(
        const zoo::CandidateConfig& k_best,
        const std::vector<ExperimentRecord>& history,
        const std::optional<RooflineStatus>& roofline) override {
        std::set<std::string> seen;
        seen.insert(k_best.digest());
        for (const auto& r : history) seen.insert(r.config_digest);

        const bool memory_bound =
            roofline ? roofline->bound == Regime::memory
                     : regime_of(kernel_) == Regime::memory;
        // memory-bound kernels lead with the tier-2 memory parameters
        std::vector<int> tier_order = memory_bound
                                          ? std::vector<int>{2, 1, 3, 4, 5, 6}
                                          : std::vector<int>{1, 2, 3, 4, 5, 6};

        const auto params = zoo::enumerate_params(kernel_, k_best.variant);
        for (int tier : tier_order) {
            for (const auto& p : params) {
                if (p.tier != tier) continue;
                for (const auto& value : p.domain) {
                    zoo::CandidateConfig cand =
                        apply(k_best, p.name, value);
                    if (cand == k_best) continue;
                    const std::string digest = cand.digest();
                    if (seen.count(digest)) continue;
                    return Proposal{std::move(cand),
                                    "tier " + std::to_string(tier) + ": set " +
                                        p.name + "=" + value};
                }
            }
        }
        return std::nullopt;
    }

  private:
    zoo::CandidateConfig apply(const zoo::CandidateConfig& base,
                               const std::string& param,
                               const std::string& value) const {
        if (param == "variant") {
            zoo::CandidateConfig cand = zoo::variant_config(kernel_, value);
            // carry shared parameters across the variant switch
            for (auto& [key, v] : cand.params) {
                auto it = base.params.find(key);
                if (it != base.params.end()) v = it->second;
            }
            return cand;
        }
        zoo::CandidateConfig cand = base;
        cand.params[param] = value;
        return cand;
    }

    KernelType kernel_;
};

// ---------------------------------------------------------------------------
// Random single-parameter changes.
// ---------------------------------------------------------------------------

class RandomMutator final : public Mutator {
  public:
    RandomMutator(KernelType k, std::uint64_t seed)
        : kernel_(k), state_(seed ^ 0x72616e646f6d21ull) {}

    std::optional<Proposal> next(
        const zoo::CandidateConfig& k_best,
        const std::vector<ExperimentRecord>& history,
        const std::optional<RooflineStatus>&) override {
        std::set<std::string> seen;
        seen.insert(k_best.digest());
        for (const auto& r : history) seen.insert(r.config_digest);

        const auto params = zoo::enumerate_params(kernel_, k_best.variant);
        for (int attempt = 0; attempt < 256; ++attempt) {
            const auto& p = params[next_u64() % params.size()];
            const auto& value = p.domain[next_u64() % p.domain.size()];
            zoo::CandidateConfig cand;
            if (p.name == "variant") {
                cand = zoo::variant_config(kernel_, value);
                for (auto& [key, v] : cand.params) {
                    auto it = k_best.params.find(key);
                    if (it != k_best.params.end()) v = it->second;
                }
            } else {
                cand = k_best;
                cand.params[p.name] = value;
            }
            if (cand == k_best || seen.count(cand.digest())) continue;
            return Proposal{std::move(cand),
                            "random: set " + p.name + "=" + value};
        }
        return std::nullopt;
    }

  private:
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    KernelType kernel_;
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// External subprocess mutator.
// ---------------------------------------------------------------------------

class ExternalMutator final : public Mutator {
  public:
    ExternalMutator(std::string command, std::string spec_text,
                    ExternalMutatorOptions opts)
        : command_(std::move(command)),
          spec_text_(std::move(spec_text)),
          opts_(opts) {}

    std::optional<Proposal> next(
        const zoo::CandidateConfig& k_best,
        const std::vector<ExperimentRecord>& history,
        const std::optional<RooflineStatus>& roofline) override {
        const std::string request = build_request(k_best, history, roofline);
        const std::string output = run_subprocess(request);
        return parse_response(output, k_best);
    }

  private:
    std::string build_request(
        const zoo::CandidateConfig& k_best,
        const std::vector<ExperimentRecord>& history,
        const std::optional<RooflineStatus>& roofline) const {
        std::string req = "# kernelloop-mutator-request v1\n";
        req += "--- CONFIG\n" + k_best.serialize();
        req += "--- HISTORY\n";
        const std::size_t start =
            history.size() > static_cast<std::size_t>(opts_.history_lines)
                ? history.size() - static_cast<std::size_t>(opts_.history_lines)
                : 0;
        for (std::size_t i = start; i < history.size(); ++i)
            req += history[i].to_tsv() + "\n";
        req += "--- ROOFLINE\n";
        if (roofline) {
            req += std::string("bound=") +
                   (roofline->bound == Regime::compute ? "compute" : "memory") +
                   "\n";
            req += "arithmetic_intensity=" +
                   std::to_string(roofline->arithmetic_intensity) + "\n";
            req += "pct_of_peak=" + std::to_string(roofline->pct_of_peak) + "\n";
        }
        req += "--- SPEC\n" + spec_text_;
        if (!spec_text_.empty() && spec_text_.back() != '\n') req += "\n";
        req += "--- END\n";
        return req;
    }

    std::string run_subprocess(const std::string& request) const {
        int in_pipe[2], out_pipe[2];
        if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
            throw Error("mutator error: pipe failed");
        const pid_t pid = fork();
        if (pid < 0) throw Error("mutator error: fork failed");
        if (pid == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            close(in_pipe[0]);
            close(in_pipe[1]);
            close(out_pipe[0]);
            close(out_pipe[1]);
            execl("/bin/sh", "sh", "-c", command_.c_str(),
                  static_cast<char*>(nullptr));
            _exit(127);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);

        // The request is far below the pipe buffer; a single write suffices.
        ssize_t written =
            write(in_pipe[1], request.data(), request.size());
        (void)written;
        close(in_pipe[1]);

        std::string output;
        const auto deadline =
            std::chrono::steady_clock::now() +
            std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(opts_.timeout_seconds));
        bool timed_out = false;
        char buf[4096];
        while (true) {
            const auto now = std::chrono::steady_clock::now();
            if (now >= deadline) {
                timed_out = true;
                break;
            }
            const int wait_ms = static_cast<int>(
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline -
                                                                      now)
                    .count());
            pollfd pfd{out_pipe[0], POLLIN, 0};
            const int pr = poll(&pfd, 1, std::max(1, wait_ms));
            if (pr == 0) {
                timed_out = true;
                break;
            }
            if (pr < 0) {
                if (errno == EINTR) continue;
                break;
            }
            const ssize_t got = read(out_pipe[0], buf, sizeof buf);
            if (got <= 0) break;  // EOF or error
            output.append(buf, static_cast<std::size_t>(got));
        }
        close(out_pipe[0]);
        if (timed_out) {
            kill(pid, SIGKILL);
            waitpid(pid, nullptr, 0);
            throw FailedProposal("mutator timeout after " +
                                 std::to_string(opts_.timeout_seconds) + "s");
        }
        int status = 0;
        waitpid(pid, &status, 0);
        if (!WIFEXITED(status) || WEXITSTATUS(status) == 127)
            throw Error("mutator error: cannot spawn '" + command_ + "'");
        if (WEXITSTATUS(status) != 0)
            throw FailedProposal("mutator exited with status " +
                                 std::to_string(WEXITSTATUS(status)));
        return output;
    }

    std::optional<Proposal> parse_response(
        const std::string& output, const zoo::CandidateConfig& k_best) const {
        std::stringstream ss(output);
        std::string line, section;
        std::string config_text, description;
        bool saw_config = false;
        while (std::getline(ss, line)) {
            if (line.rfind("--- ", 0) == 0) {
                section = line.substr(4);
                if (section == "CONFIG") saw_config = true;
                continue;
            }
            if (section == "CONFIG") config_text += line + "\n";
            else if (section == "DESCRIPTION" && description.empty() &&
                     !line.empty())
                description = line;
        }
        if (!saw_config || config_text.empty())
            throw FailedProposal("malformed mutator response: no CONFIG section");
        zoo::CandidateConfig cand;
        try {
            cand = zoo::CandidateConfig::parse(config_text);
            zoo::validate_config(cand);
        } catch (const std::exception& e) {
            throw FailedProposal(std::string("malformed mutator response: ") +
                                 e.what());
        }
        if (cand == k_best)
            throw FailedProposal("mutator returned the current config unchanged");
        if (description.empty()) description = "external proposal";
        return Proposal{std::move(cand), std::move(description)};
    }

    std::string command_;
    std::string spec_text_;
    ExternalMutatorOptions opts_;
};

}  // namespace

std::unique_ptr<Mutator> make_playbook_mutator(KernelType k) {
    return std::make_unique<PlaybookMutator>(k);
}

std::unique_ptr<Mutator> make_random_mutator(KernelType k, std::uint64_t seed) {
    return std::make_unique<RandomMutator>(k, seed);
}

std::unique_ptr<Mutator> make_external_mutator(std::string command,
                                               std::string spec_text,
                                               ExternalMutatorOptions opts) {
    return std::make_unique<ExternalMutator>(std::move(command),
                                             std::move(spec_text), opts);
}

std::unique_ptr<Mutator> make_mutator(const std::string& spec_string,
                                      const planner::Workspace& ws,
                                      std::uint64_t seed,
                                      ExternalMutatorOptions opts) {
    if (spec_string == "playbook")
        return make_playbook_mutator(ws.spec.kernel_type);
    if (spec_string == "random")
        return make_random_mutator(ws.spec.kernel_type, seed);
    if (spec_string.rfind("exec:", 0) == 0) {
        std::ifstream in(ws.spec_path());
        std::stringstream ss;
        ss << in.rdbuf();
        return make_external_mutator(spec_string.substr(5), ss.str(), opts);
    }
    throw DomainError("unknown mutator '" + spec_string + "'");
}

}  // namespace kernelloop::loop
