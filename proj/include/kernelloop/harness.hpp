#pragma once

// The fixed evaluation function of the optimization loop: a five-stage
// correctness pipeline (smoke test, shape sweep, numerical stability,
// determinism, edge cases) gating a trimmed-mean throughput measurement.
// Candidates never touch this code.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kernelloop/core.hpp"
#include "kernelloop/zoo.hpp"

namespace kernelloop::harness {

enum class Stage { smoke, shape_sweep, stability, determinism, edge_cases };
std::string to_string(Stage s);

struct StageResult {
    Stage stage = Stage::smoke;
    bool passed = false;
    std::string detail;
    int cases_run = 0;
    // (case name, max |error| or failure kind); present iff !passed
    std::optional<std::pair<std::string, std::string>> first_failure;
};

struct VerificationReport {
    std::vector<StageResult> stages;
    bool all_passed = false;
    std::optional<double> throughput;  // FLOP/s or byte/s per kernel metric
    std::optional<double> elapsed_trimmed_mean;  // seconds
    std::optional<RooflineStatus> roofline;

    std::optional<Stage> failed_stage() const;
    // One tab-separated line per stage plus a summary line.
    std::string to_text() const;
};

struct MeasureSettings {
    int warmup_iters = 25;
    int timed_iters = 200;
    double trim_fraction = 0.10;
    // bench-twice reproducibility bound used by tests
    double noise_bound = 0.20;
};

struct VerifySettings {
    // Execution-scale cap: any sweep, stability, or determinism workload
    // whose FLOP count exceeds the cap runs at a proportionally scaled
    // shape (dims rounded to multiples of 16, so remainder-free for the
    // masking fixtures). Edge-case stage substitutes exact dims and scales
    // only the remaining axes. 0 disables scaling.
    std::int64_t flop_cap = 50'000'000;
    std::uint64_t input_seed = 1;
};

// Mean after dropping the floor(trim*n) smallest and largest samples.
double trimmed_mean(std::vector<double> samples, double trim_fraction);

// Proportional execution-scale reduction of a workload (see VerifySettings).
WorkloadShape scale_shape_to_cap(KernelType k, const WorkloadShape& shape,
                                 std::int64_t flop_cap,
                                 const std::vector<std::string>& keep_dims = {});

struct Measurement {
    double elapsed_trimmed_mean = 0.0;
    double throughput = 0.0;
    RooflineStatus roofline;
};

class Harness {
  public:
    explicit Harness(HardwareSpec hw, VerifySettings vs = {},
                     MeasureSettings ms = {});

    // Runs the five stages in order, short-circuiting on first failure.
    VerificationReport verify(const zoo::CandidateConfig& config,
                              const KernelSpec& spec) const;

    // Wall-clock samples at the primary shape; requires a passing verify.
    Measurement measure(const zoo::CandidateConfig& config,
                        const KernelSpec& spec) const;

    // verify, then measure iff everything passed.
    VerificationReport bench(const zoo::CandidateConfig& config,
                             const KernelSpec& spec) const;

    const HardwareSpec& hardware() const { return hw_; }
    const MeasureSettings& measure_settings() const { return measure_; }
    MeasureSettings& measure_settings() { return measure_; }
    const VerifySettings& verify_settings() const { return verify_; }

    // Compact shape used by the stability stage for one kernel type.
    static WorkloadShape stability_shape(KernelType k);

  private:
    struct RefKey {
        KernelType type;
        std::string shape;
        DType dtype;
        std::string tag;
        bool operator<(const RefKey& o) const {
            return std::tie(type, shape, dtype, tag) <
                   std::tie(o.type, o.shape, o.dtype, o.tag);
        }
    };

    const TensorBuffer& cached_reference(
        const RefKey& key, const WorkloadShape& shape,
        const std::vector<TensorBuffer>& inputs, DType dtype) const;

    HardwareSpec hw_;
    VerifySettings verify_;
    MeasureSettings measure_;

    mutable std::map<RefKey, TensorBuffer> ref_cache_;
    mutable std::size_t ref_cache_bytes_ = 0;
    mutable std::mutex measure_lock_;  // exclusive-measurement contract
};

}  // namespace kernelloop::harness
