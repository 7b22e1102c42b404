#include "kernelloop/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace kernelloop::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

struct CompareResult {
    bool ok = true;
    bool finite = true;
    double max_abs_err = 0.0;
    std::size_t worst_index = 0;
};

CompareResult compare_buffers(const TensorBuffer& out, const TensorBuffer& ref,
                              const Tolerance& tol) {
    CompareResult r;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double a = out.get(i), b = ref.get(i);
        if (!std::isfinite(a)) {
            r.finite = false;
            r.ok = false;
            r.worst_index = i;
            return r;
        }
        const double err = std::abs(a - b);
        if (err > r.max_abs_err) {
            r.max_abs_err = err;
            r.worst_index = i;
        }
        if (!within_tolerance(a, b, tol)) r.ok = false;
    }
    return r;
}

std::int64_t round16(double v) {
    const auto r = static_cast<std::int64_t>(std::llround(v / 16.0)) * 16;
    return std::max<std::int64_t>(16, r);
}

}  // namespace

std::string to_string(Stage s) {
    switch (s) {
        case Stage::smoke: return "smoke";
        case Stage::shape_sweep: return "shape_sweep";
        case Stage::stability: return "stability";
        case Stage::determinism: return "determinism";
        case Stage::edge_cases: return "edge_cases";
    }
    return "?";
}

std::optional<Stage> VerificationReport::failed_stage() const {
    for (const auto& s : stages)
        if (!s.passed) return s.stage;
    return std::nullopt;
}

std::string VerificationReport::to_text() const {
    std::string out;
    for (const auto& s : stages) {
        out += "stage\t" + to_string(s.stage) + "\t" +
               (s.passed ? "pass" : "fail") + "\t" +
               std::to_string(s.cases_run) + "\t" + s.detail;
        if (s.first_failure)
            out += "\t" + s.first_failure->first + "\t" + s.first_failure->second;
        out += "\n";
    }
    out += "summary\t";
    out += all_passed ? "pass" : "fail";
    if (throughput) out += "\tthroughput=" + format_double(*throughput);
    if (elapsed_trimmed_mean)
        out += "\telapsed=" + format_double(*elapsed_trimmed_mean);
    if (roofline) {
        out += "\tbound=";
        out += roofline->bound == Regime::compute ? "compute" : "memory";
        out += "\tpct_of_peak=" + format_double(roofline->pct_of_peak);
    }
    out += "\n";
    return out;
}

double trimmed_mean(std::vector<double> samples, double trim_fraction) {
    if (samples.empty()) throw MeasurementError("no timing samples");
    if (trim_fraction < 0 || trim_fraction >= 0.5)
        throw MeasurementError("trim fraction must be in [0, 0.5)");
    std::sort(samples.begin(), samples.end());
    const auto n = samples.size();
    const auto drop = static_cast<std::size_t>(
        std::floor(trim_fraction * static_cast<double>(n)));
    if (2 * drop >= n) throw MeasurementError("trim removes every sample");
    double sum = 0.0;
    for (std::size_t i = drop; i < n - drop; ++i) sum += samples[i];
    return sum / static_cast<double>(n - 2 * drop);
}

WorkloadShape scale_shape_to_cap(KernelType k, const WorkloadShape& shape,
                                 std::int64_t flop_cap,
                                 const std::vector<std::string>& keep_dims) {
    if (flop_cap <= 0) return shape;
    const auto flops = flops_of(k, shape);
    if (flops <= flop_cap) return shape;

    int scalable = 0;
    for (const auto& [name, v] : shape.dims)
        if (std::find(keep_dims.begin(), keep_dims.end(), name) ==
            keep_dims.end())
            ++scalable;
    if (scalable == 0) return shape;

    const double s = std::pow(static_cast<double>(flop_cap) /
                                  static_cast<double>(flops),
                              1.0 / static_cast<double>(scalable));
    WorkloadShape out = shape;
    for (auto& [name, v] : out.dims) {
        if (std::find(keep_dims.begin(), keep_dims.end(), name) !=
            keep_dims.end())
            continue;
        const double scaled = static_cast<double>(v) * s;
        if (v >= 16) {
            v = std::min(v, round16(scaled));
        } else {
            v = std::max<std::int64_t>(
                1, static_cast<std::int64_t>(std::floor(scaled)));
        }
    }
    // rotary head dims must stay even
    if ((k == KernelType::rotary_emb || k == KernelType::flash_attn) &&
        out.at("D") % 2 != 0)
        out.set("D", out.at("D") + 1);
    return out;
}

Harness::Harness(HardwareSpec hw, VerifySettings vs, MeasureSettings ms)
    : hw_(std::move(hw)), verify_(vs), measure_(ms) {}

WorkloadShape Harness::stability_shape(KernelType k) {
    switch (k) {
        case KernelType::matmul: return make_matmul_shape(32, 32, 64);
        case KernelType::cross_entropy: return make_ce_shape(64, 512);
        case KernelType::rotary_emb: return make_bhsd_shape(1, 2, 64, 64);
        default: return make_rows_shape(64, 256);
    }
}

const TensorBuffer& Harness::cached_reference(
    const RefKey& key, const WorkloadShape& shape,
    const std::vector<TensorBuffer>& inputs, DType dtype) const {
    auto it = ref_cache_.find(key);
    if (it != ref_cache_.end()) return it->second;
    TensorBuffer ref = zoo::reference_execute(key.type, shape, inputs, dtype);
    // keep the cache bounded; large single entries are still worth keeping
    // within one verify call, so evict wholesale only when badly oversized
    ref_cache_bytes_ += ref.raw_size();
    if (ref_cache_bytes_ > (1u << 30)) {
        ref_cache_.clear();
        ref_cache_bytes_ = ref.raw_size();
    }
    return ref_cache_.emplace(key, std::move(ref)).first->second;
}

VerificationReport Harness::verify(const zoo::CandidateConfig& config,
                                   const KernelSpec& spec) const {
    if (config.kernel_type != spec.kernel_type)
        throw ConfigError("config kernel type does not match spec");
    VerificationReport report;
    const KernelType k = spec.kernel_type;

    auto run_case =
        [&](StageResult& sr, const std::string& case_name,
            const WorkloadShape& shp, const std::vector<TensorBuffer>& inputs,
            DType dtype, const Tolerance& tol, bool check_finite) -> bool {
        ++sr.cases_run;
        TensorBuffer out;
        try {
            out = zoo::candidate_execute(config, shp, inputs, dtype);
        } catch (const std::exception& e) {
            sr.passed = false;
            sr.first_failure = {case_name, std::string("exception: ") + e.what()};
            return false;
        }
        const TensorBuffer& ref = cached_reference(
            RefKey{k, shp.to_text(), dtype, case_name}, shp, inputs, dtype);
        const CompareResult cr = compare_buffers(out, ref, tol);
        if (!cr.finite && check_finite) {
            sr.passed = false;
            sr.first_failure = {case_name, "non_finite"};
            return false;
        }
        if (!cr.ok) {
            sr.passed = false;
            sr.first_failure = {case_name,
                                cr.finite ? "max_abs_err=" +
                                                format_double(cr.max_abs_err)
                                          : "non_finite"};
            return false;
        }
        return true;
    };

    // Stage 1: smoke -- one small shape at the spec dtype.
    {
        StageResult sr;
        sr.stage = Stage::smoke;
        sr.passed = true;
        const WorkloadShape shp = zoo::smoke_shape(k);
        const auto inputs =
            zoo::make_inputs(k, shp, spec.dtype, verify_.input_seed);
        run_case(sr, "smoke", shp, inputs, spec.dtype, spec.tolerance, true);
        sr.detail = "shape " + shp.to_text();
        report.stages.push_back(sr);
        if (!sr.passed) return report;
    }

    // Stage 2: the full sweep table across fp16/bf16/fp32.
    {
        StageResult sr;
        sr.stage = Stage::shape_sweep;
        sr.passed = true;
        const DType sweep_dtypes[] = {DType::fp16, DType::bf16, DType::fp32};
        for (const auto& entry : zoo::shape_sweep(k)) {
            const WorkloadShape shp =
                scale_shape_to_cap(k, entry.shape, verify_.flop_cap);
            bool broke = false;
            for (DType dt : sweep_dtypes) {
                const auto inputs =
                    zoo::make_inputs(k, shp, dt, verify_.input_seed);
                if (!run_case(sr, entry.name + "/" + to_string(dt), shp,
                              inputs, dt, tolerance_for(dt), true)) {
                    broke = true;
                    break;
                }
            }
            if (broke) break;
        }
        sr.detail = std::to_string(sr.cases_run) + " shape/dtype cases";
        report.stages.push_back(sr);
        if (!sr.passed) return report;
    }

    // Stage 3: adversarial inputs at the spec dtype.
    {
        StageResult sr;
        sr.stage = Stage::stability;
        sr.passed = true;
        const WorkloadShape shp = stability_shape(k);
        for (const auto& adv :
             zoo::adversarial_inputs(k, shp, spec.dtype)) {
            if (!run_case(sr, adv.name, shp, adv.inputs, spec.dtype,
                          spec.tolerance, true))
                break;
        }
        sr.detail = "adversarial sets at " + shp.to_text();
        report.stages.push_back(sr);
        if (!sr.passed) return report;
    }

    // Stage 4: three runs, bitwise identical storage.
    {
        StageResult sr;
        sr.stage = Stage::determinism;
        sr.passed = true;
        const WorkloadShape shp =
            scale_shape_to_cap(k, spec.primary_shape, verify_.flop_cap);
        const auto inputs =
            zoo::make_inputs(k, shp, spec.dtype, verify_.input_seed);
        std::lock_guard<std::mutex> lock(measure_lock_);
        try {
            TensorBuffer first =
                zoo::candidate_execute(config, shp, inputs, spec.dtype);
            for (int run = 1; run < 3 && sr.passed; ++run) {
                TensorBuffer again =
                    zoo::candidate_execute(config, shp, inputs, spec.dtype);
                ++sr.cases_run;
                if (!again.bitwise_equal(first)) {
                    sr.passed = false;
                    sr.first_failure = {"run" + std::to_string(run),
                                        "bitwise_mismatch"};
                }
            }
        } catch (const std::exception& e) {
            sr.passed = false;
            sr.first_failure = {"determinism",
                                std::string("exception: ") + e.what()};
        }
        sr.detail = "3 runs at " + shp.to_text();
        report.stages.push_back(sr);
        if (!sr.passed) return report;
    }

    // Stage 5: non-power-of-two dims substituted into each masked axis.
    {
        StageResult sr;
        sr.stage = Stage::edge_cases;
        sr.passed = true;
        const std::int64_t edge_dims[] = {1023, 4097, 1537};
        bool broke = false;
        for (const auto& dimname : zoo::masked_dims(k)) {
            for (std::int64_t dim : edge_dims) {
                WorkloadShape shp = spec.primary_shape;
                shp.set(dimname, dim);
                shp = scale_shape_to_cap(k, shp, verify_.flop_cap, {dimname});
                const auto inputs =
                    zoo::make_inputs(k, shp, spec.dtype, verify_.input_seed);
                if (!run_case(sr, dimname + "=" + std::to_string(dim), shp,
                              inputs, spec.dtype, spec.tolerance, true)) {
                    broke = true;
                    break;
                }
            }
            if (broke) break;
        }
        sr.detail = std::to_string(sr.cases_run) + " edge-dim cases";
        report.stages.push_back(sr);
        if (!sr.passed) return report;
    }

    report.all_passed = true;
    return report;
}

Measurement Harness::measure(const zoo::CandidateConfig& config,
                             const KernelSpec& spec) const {
    std::lock_guard<std::mutex> lock(measure_lock_);
    const auto inputs = zoo::make_inputs(spec.kernel_type, spec.primary_shape,
                                         spec.dtype, verify_.input_seed);
    for (int i = 0; i < measure_.warmup_iters; ++i)
        zoo::candidate_execute(config, spec.primary_shape, inputs, spec.dtype);

    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(measure_.timed_iters));
    for (int i = 0; i < measure_.timed_iters; ++i) {
        const auto t0 = Clock::now();
        zoo::candidate_execute(config, spec.primary_shape, inputs, spec.dtype);
        samples.push_back(seconds_since(t0));
    }
    const double elapsed = trimmed_mean(samples, measure_.trim_fraction);
    if (!std::isfinite(elapsed) || elapsed <= 0.0)
        throw MeasurementError("non-finite timing");

    const auto flops = flops_of(spec.kernel_type, spec.primary_shape);
    const auto bytes = bytes_of(spec.kernel_type, spec.primary_shape, spec.dtype);
    Measurement m;
    m.elapsed_trimmed_mean = elapsed;
    m.throughput = metric_of(spec.kernel_type) == Metric::tflops
                       ? static_cast<double>(flops) / elapsed
                       : static_cast<double>(bytes) / elapsed;
    m.roofline = roofline(static_cast<double>(flops),
                          static_cast<double>(bytes), elapsed, hw_);
    return m;
}

VerificationReport Harness::bench(const zoo::CandidateConfig& config,
                                  const KernelSpec& spec) const {
    VerificationReport report = verify(config, spec);
    if (!report.all_passed) return report;
    const Measurement m = measure(config, spec);
    report.elapsed_trimmed_mean = m.elapsed_trimmed_mean;
    report.throughput = m.throughput;
    report.roofline = m.roofline;
    return report;
}

}  // namespace kernelloop::harness
