#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "kernelloop/loop.hpp"

namespace kernelloop::loop {

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    out += "'";
    return out;
}

// Runs a command, returns (exit code, stdout).
std::pair<int, std::string> run_command(const std::string& cmd) {
    std::array<char, 4096> buf{};
    std::string output;
    FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
    if (!pipe) return {-1, ""};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe))
        output += buf.data();
    const int status = pclose(pipe);
    return {status, output};
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class GitStore final : public VersionStore {
  public:
    explicit GitStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

    void init(const std::vector<std::string>& tracked) override {
        tracked_ = tracked;
        git("init -q");
        git("config user.name kernelloop");
        git("config user.email kernelloop@localhost");
        // everything except tracked files stays out of the reset scope
        std::ofstream ignore(dir_ / ".gitignore");
        ignore << "*\n";
        for (const auto& f : tracked_) ignore << "!" << f << "\n";
        ignore << "!.gitignore\n";
    }

    void commit(const std::string& message) override {
        std::string add = "add .gitignore";
        for (const auto& f : tracked_) add += " " + shell_quote(f);
        git(add);
        git("commit -q --allow-empty -m " + shell_quote(message));
    }

    void rollback_last() override {
        if (git("reset -q --hard HEAD~1").first != 0)
            throw IoError("version-store failure: git reset failed in " +
                          dir_.string());
    }

    void discard_changes() override {
        git("checkout -q -- .");
    }

    int commit_count() const override {
        auto [code, out] = git("rev-list --count HEAD");
        if (code != 0) return 0;
        return std::atoi(out.c_str());
    }

    std::vector<std::string> dirty_files() const override {
        auto [code, out] = git("status --porcelain");
        std::vector<std::string> files;
        if (code != 0) return files;
        std::stringstream ss(out);
        std::string line;
        while (std::getline(ss, line)) {
            if (line.size() > 3) files.push_back(line.substr(3));
        }
        return files;
    }

  private:
    std::pair<int, std::string> git(const std::string& args) const {
        return run_command("git -C " + shell_quote(dir_.string()) + " " + args);
    }

    std::filesystem::path dir_;
    std::vector<std::string> tracked_;
};

// In-process fallback: a stack of file-content snapshots.
class SnapshotStore final : public VersionStore {
  public:
    explicit SnapshotStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

    void init(const std::vector<std::string>& tracked) override {
        tracked_ = tracked;
        commits_.clear();
    }

    void commit(const std::string& message) override {
        Snapshot snap;
        snap.message = message;
        for (const auto& f : tracked_) snap.files[f] = read_file(dir_ / f);
        commits_.push_back(std::move(snap));
    }

    void rollback_last() override {
        if (commits_.size() < 2)
            throw IoError("version-store failure: nothing to roll back");
        commits_.pop_back();
        restore(commits_.back());
    }

    void discard_changes() override {
        if (!commits_.empty()) restore(commits_.back());
    }

    int commit_count() const override {
        return static_cast<int>(commits_.size());
    }

    std::vector<std::string> dirty_files() const override {
        std::vector<std::string> files;
        if (commits_.empty()) return files;
        for (const auto& [f, content] : commits_.back().files)
            if (read_file(dir_ / f) != content) files.push_back(f);
        return files;
    }

  private:
    struct Snapshot {
        std::string message;
        std::map<std::string, std::string> files;
    };

    void restore(const Snapshot& snap) {
        for (const auto& [f, content] : snap.files) {
            std::ofstream out(dir_ / f, std::ios::binary);
            out << content;
        }
    }

    std::filesystem::path dir_;
    std::vector<std::string> tracked_;
    std::vector<Snapshot> commits_;
};

}  // namespace

bool git_available() {
    static const bool ok = run_command("git --version").first == 0;
    return ok;
}

std::unique_ptr<VersionStore> make_version_store(
    StoreKind kind, const std::filesystem::path& dir) {
    if (kind == StoreKind::git) {
        if (!git_available())
            return std::make_unique<SnapshotStore>(dir);
        return std::make_unique<GitStore>(dir);
    }
    return std::make_unique<SnapshotStore>(dir);
}

}  // namespace kernelloop::loop
