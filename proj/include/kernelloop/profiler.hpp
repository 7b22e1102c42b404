#pragma once

// Phase A: run a declaratively-described model on the reference zoo,
// capture per-op wall time with a monotonic clock, classify ops by name,
// and attach a hardware spec (static database or on-machine calibration).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kernelloop/core.hpp"

namespace kernelloop::profiler {

struct ModelOp {
    std::string op_name;
    std::optional<KernelType> kernel_type_hint;  // overrides name matching
    WorkloadShape shape;
    DType dtype = DType::fp32;
    int repeat = 1;  // executions per forward pass
};

struct ModelDesc {
    std::string name;
    std::vector<ModelOp> ops;
};

struct ProfileEntry {
    std::string op_name;
    std::optional<KernelType> kernel_type;  // nullopt = unknown
    WorkloadShape shape;
    DType dtype = DType::fp32;
    double total_seconds = 0.0;
    double fraction = 0.0;
};

struct Profile {
    std::string model_name;
    HardwareSpec hardware;
    std::vector<ProfileEntry> entries;
    int warmup_iters = 5;
    int profile_iters = 10;
};

// Ordered first-match rule table, seeded from real vendor kernel-name
// patterns and extensible through a rule file.
struct NameRule {
    std::string pattern;  // case-insensitive substring
    KernelType type;
};
const std::vector<NameRule>& default_name_rules();
std::vector<NameRule> load_name_rules(const std::filesystem::path& path);
std::optional<KernelType> classify_kernel_name(
    const std::string& name,
    const std::vector<NameRule>& rules = default_name_rules());

// Classification (and execution) type of one model op: the hint wins,
// otherwise the op name is matched against the rule table.
std::optional<KernelType> op_type(const ModelOp& op);

// Runs every op warmup times untimed, then `iters` timed forwards.
// Requires every op to resolve to an executable classification.
Profile profile(const ModelDesc& model, const HardwareSpec& hw,
                int warmup = 5, int iters = 10);

// Hardware detection.
std::filesystem::path default_hardware_db();
HardwareSpec detect_hardware_static(
    const std::string& name,
    const std::filesystem::path& db = default_hardware_db());
// Measures streaming bandwidth (best of 5) and the best tiled-matmul
// throughput over a small configuration sweep.
HardwareSpec calibrate_hardware();

// Model and profile file formats ("# kernelloop-model v1",
// "# kernelloop-profile v1").
ModelDesc load_model(const std::filesystem::path& path);
void save_model(const ModelDesc& model, const std::filesystem::path& path);
std::string export_profile_text(const Profile& p);
Profile import_profile_text(const std::string& text);
void export_profile(const Profile& p, const std::filesystem::path& path);
Profile import_profile(const std::filesystem::path& path);

}  // namespace kernelloop::profiler
