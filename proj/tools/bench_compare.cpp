// Benchmark comparing the serial fp64 reference implementation against the
// parameterized candidate kernels across variants, vector widths, and
// worker counts.
//
//   bench_compare [--type matmul] [--size small|medium|large] [--iters N]

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "kernelloop/harness.hpp"
#include "kernelloop/zoo.hpp"

namespace kl = kernelloop;
using Clock = std::chrono::steady_clock;

namespace {

struct Row {
    std::string label;
    double seconds;
};

double time_call(const std::function<void()>& fn, int iters) {
    fn();  // warm
    std::vector<double> samples;
    for (int i = 0; i < iters; ++i) {
        const auto t0 = Clock::now();
        fn();
        samples.push_back(
            std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return kl::harness::trimmed_mean(samples, iters >= 10 ? 0.1 : 0.0);
}

kl::WorkloadShape bench_shape(kl::KernelType k, const std::string& size) {
    const std::int64_t s = size == "large" ? 1024 : size == "medium" ? 512 : 256;
    switch (k) {
        case kl::KernelType::matmul: return kl::make_matmul_shape(s, s, s);
        case kl::KernelType::cross_entropy:
            return kl::make_ce_shape(s, 8 * s);
        case kl::KernelType::rotary_emb:
            return kl::make_bhsd_shape(2, 8, s, 64);
        default: return kl::make_rows_shape(4 * s, 4 * s);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compare the serial reference against parallel candidates"};
    std::string type_filter, size = "medium";
    int iters = 10;
    app.add_option("--type", type_filter, "limit to one kernel type");
    app.add_option("--size", size, "small, medium, or large");
    app.add_option("--iters", iters);
    CLI11_PARSE(app, argc, argv);

    for (kl::KernelType k : kl::zoo::executable_types()) {
        if (!type_filter.empty() && kl::to_string(k) != type_filter) continue;
        const auto shape = bench_shape(k, size);
        const auto inputs = kl::zoo::make_inputs(k, shape, kl::DType::fp32, 11);
        const double flops =
            static_cast<double>(kl::flops_of(k, shape));
        const double bytes =
            static_cast<double>(kl::bytes_of(k, shape, kl::DType::fp32));
        const bool compute = kl::metric_of(k) == kl::Metric::tflops;

        std::printf("== %s %s ==\n", kl::to_string(k).c_str(),
                    shape.to_text().c_str());
        std::printf("%-36s %12s %12s %10s\n", "implementation", "time(ms)",
                    compute ? "GFLOP/s" : "GB/s", "vs ref");

        std::vector<Row> rows;
        rows.push_back({"reference (serial fp64)", time_call([&] {
                            kl::zoo::reference_execute(k, shape, inputs,
                                                       kl::DType::fp32);
                        }, iters)});

        auto add_candidate = [&](kl::zoo::CandidateConfig cfg,
                                 const std::string& label) {
            rows.push_back({label, time_call([&] {
                                kl::zoo::candidate_execute(cfg, shape, inputs,
                                                           kl::DType::fp32);
                            }, iters)});
        };

        for (const auto& variant : kl::zoo::variants_of(k)) {
            auto cfg = kl::zoo::variant_config(k, variant);
            add_candidate(cfg, variant + " (defaults)");
            if (cfg.params.count("vector_width")) {
                cfg.params["vector_width"] = "8";
                add_candidate(cfg, variant + " vw=8");
            }
            if (cfg.params.count("worker_count")) {
                cfg.params["worker_count"] = "4";
                add_candidate(cfg, variant + " vw=8 workers=4");
            }
        }

        const double ref = rows.front().seconds;
        for (const auto& r : rows) {
            const double rate = (compute ? flops : bytes) / r.seconds / 1e9;
            std::printf("%-36s %12.3f %12.2f %9.2fx\n", r.label.c_str(),
                        r.seconds * 1e3, rate, ref / r.seconds);
        }
        std::printf("\n");
    }
    return 0;
}
