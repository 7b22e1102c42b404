#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kernelloop/harness.hpp"
#include "oracles.hpp"

using namespace kernelloop;
using namespace kernelloop::harness;

namespace {

Harness test_harness(std::int64_t flop_cap = 2'000'000) {
    HardwareSpec hw{"toy", 20e9, 8e9, HwSource::static_db};
    VerifySettings vs;
    vs.flop_cap = flop_cap;
    MeasureSettings ms;
    ms.warmup_iters = 2;
    ms.timed_iters = 10;
    return Harness(hw, vs, ms);
}

KernelSpec small_spec(KernelType k) {
    switch (k) {
        case KernelType::matmul:
            return KernelSpec::make(k, make_matmul_shape(128, 128, 128),
                                    DType::fp32);
        case KernelType::cross_entropy:
            return KernelSpec::make(k, make_ce_shape(128, 512), DType::fp32);
        case KernelType::rotary_emb:
            return KernelSpec::make(k, make_bhsd_shape(1, 2, 256, 64),
                                    DType::fp32);
        default:
            return KernelSpec::make(k, make_rows_shape(256, 512), DType::fp32);
    }
}

}  // namespace

TEST_CASE("trimmed mean") {
    SUBCASE("constant samples give the constant") {
        std::vector<double> s(200, 5.0);
        CHECK(trimmed_mean(s, 0.10) == 5.0);
    }
    SUBCASE("hand-computed drop of extremes") {
        std::vector<double> s;
        for (int i = 10; i >= 1; --i) s.push_back(i);  // 1..10, shuffled-ish
        // trim 0.1 of 10 drops one sample each side -> mean(2..9) = 5.5
        CHECK(trimmed_mean(s, 0.10) == doctest::Approx(5.5));
    }
    SUBCASE("zero trim is the arithmetic mean") {
        std::vector<double> s = {1.0, 2.0, 4.0};
        CHECK(trimmed_mean(s, 0.0) == doctest::Approx(7.0 / 3.0));
    }
    SUBCASE("result stays within sample range") {
        oracles::Rng rng(13);
        for (int t = 0; t < 200; ++t) {
            std::vector<double> s;
            const int n = 3 + static_cast<int>(rng.next() % 40);
            for (int i = 0; i < n; ++i) s.push_back(rng.uniform(0.1, 9.9));
            const double tm = trimmed_mean(s, 0.10);
            double lo = s[0], hi = s[0];
            for (double v : s) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            CHECK(tm >= lo);
            CHECK(tm <= hi);
        }
    }
    SUBCASE("bad arguments") {
        std::vector<double> s = {1.0};
        CHECK_THROWS_AS(trimmed_mean({}, 0.1), MeasurementError);
        CHECK_THROWS_AS(trimmed_mean(s, 0.5), MeasurementError);
    }
}

TEST_CASE("execution-scale cap") {
    SUBCASE("small shapes pass through untouched") {
        const auto s = make_matmul_shape(64, 64, 64);
        CHECK(scale_shape_to_cap(KernelType::matmul, s, 50'000'000) == s);
    }
    SUBCASE("big shapes scale proportionally to multiples of 16") {
        const auto s = make_matmul_shape(8192, 1024, 1024);
        const auto scaled =
            scale_shape_to_cap(KernelType::matmul, s, 50'000'000);
        CHECK(flops_of(KernelType::matmul, scaled) <= 2 * 50'000'000);
        CHECK(scaled.at("M") % 16 == 0);
        CHECK(scaled.at("N") % 16 == 0);
        // aspect ratio survives roughly
        const double ratio = static_cast<double>(scaled.at("M")) /
                             static_cast<double>(scaled.at("N"));
        CHECK(ratio == doctest::Approx(8.0).epsilon(0.3));
    }
    SUBCASE("kept dimensions are never scaled") {
        auto s = make_matmul_shape(512, 512, 512);
        s.set("K", 4097);
        const auto scaled =
            scale_shape_to_cap(KernelType::matmul, s, 1'000'000, {"K"});
        CHECK(scaled.at("K") == 4097);
        CHECK(scaled.at("M") < 512);
    }
    SUBCASE("zero cap disables scaling") {
        const auto s = make_matmul_shape(8192, 8192, 8192);
        CHECK(scale_shape_to_cap(KernelType::matmul, s, 0) == s);
    }
}

TEST_CASE("correct starters pass all five stages in order") {
    const auto h = test_harness();
    for (KernelType k : zoo::executable_types()) {
        CAPTURE(to_string(k));
        const auto spec = small_spec(k);
        const auto report = h.verify(zoo::default_config(k), spec);
        CHECK(report.all_passed);
        REQUIRE(report.stages.size() == 5);
        CHECK(report.stages[0].stage == Stage::smoke);
        CHECK(report.stages[1].stage == Stage::shape_sweep);
        CHECK(report.stages[2].stage == Stage::stability);
        CHECK(report.stages[3].stage == Stage::determinism);
        CHECK(report.stages[4].stage == Stage::edge_cases);
        for (const auto& s : report.stages) {
            CHECK(s.passed);
            CHECK_FALSE(s.first_failure.has_value());
        }
        CHECK_FALSE(report.throughput.has_value());  // verify only
    }
}

TEST_CASE("each seeded-bug fixture fails at exactly its labeled stage") {
    const auto h = test_harness();
    const struct {
        const char* variant;
        Stage stage;
    } expectations[] = {
        {"broken", Stage::smoke},
        {"shape_bug", Stage::shape_sweep},
        {"overflow_naive", Stage::stability},
        {"racy", Stage::determinism},
        {"masking_bug", Stage::edge_cases},
    };
    const auto spec = small_spec(KernelType::softmax);
    for (const auto& e : expectations) {
        CAPTURE(e.variant);
        const auto cfg = zoo::variant_config(KernelType::softmax, e.variant);
        const auto report = h.verify(cfg, spec);
        CHECK_FALSE(report.all_passed);
        REQUIRE(report.failed_stage().has_value());
        CHECK(*report.failed_stage() == e.stage);
        // short-circuit: nothing recorded past the failing stage
        CHECK(report.stages.back().stage == e.stage);
        REQUIRE(report.stages.back().first_failure.has_value());
        for (std::size_t i = 0; i + 1 < report.stages.size(); ++i)
            CHECK(report.stages[i].passed);
    }
}

TEST_CASE("masking_bug is first caught at dimension 1023") {
    const auto h = test_harness();
    const auto spec = small_spec(KernelType::softmax);
    const auto cfg = zoo::variant_config(KernelType::softmax, "masking_bug");
    const auto report = h.verify(cfg, spec);
    REQUIRE(report.failed_stage() == Stage::edge_cases);
    CHECK(report.stages.back().first_failure->first == "N=1023");
}

TEST_CASE("bench measures only after every stage passes") {
    const auto h = test_harness();
    const auto spec = small_spec(KernelType::reduce);

    SUBCASE("failing config: no throughput") {
        const auto report =
            h.bench(zoo::variant_config(KernelType::reduce, "broken"), spec);
        CHECK_FALSE(report.all_passed);
        CHECK_FALSE(report.throughput.has_value());
        CHECK_FALSE(report.roofline.has_value());
    }
    SUBCASE("passing config: positive throughput and roofline") {
        const auto report = h.bench(zoo::default_config(KernelType::reduce), spec);
        CHECK(report.all_passed);
        REQUIRE(report.throughput.has_value());
        CHECK(*report.throughput > 0.0);
        REQUIRE(report.elapsed_trimmed_mean.has_value());
        REQUIRE(report.roofline.has_value());
        // memory metric: bytes / elapsed
        const double bytes = static_cast<double>(
            bytes_of(KernelType::reduce, spec.primary_shape, spec.dtype));
        CHECK(*report.throughput ==
              doctest::Approx(bytes / *report.elapsed_trimmed_mean));
        CHECK(report.roofline->bound == Regime::memory);
    }
}

TEST_CASE("repeat benchmarks agree within the noise bound") {
    auto h = test_harness();
    h.measure_settings().timed_iters = 30;
    h.measure_settings().warmup_iters = 3;
    const auto spec = small_spec(KernelType::matmul);
    const auto cfg = zoo::default_config(KernelType::matmul);
    const auto a = h.measure(cfg, spec);
    const auto b = h.measure(cfg, spec);
    const double ratio = a.throughput / b.throughput;
    CHECK(std::abs(ratio - 1.0) < h.measure_settings().noise_bound);
}

TEST_CASE("measure computes compute-metric throughput from the flop count") {
    auto h = test_harness();
    const auto spec = small_spec(KernelType::matmul);
    const auto m = h.measure(zoo::default_config(KernelType::matmul), spec);
    const double flops = static_cast<double>(
        flops_of(KernelType::matmul, spec.primary_shape));
    CHECK(m.throughput == doctest::Approx(flops / m.elapsed_trimmed_mean));
    CHECK(m.roofline.pct_of_peak > 0.0);
}

TEST_CASE("report text serialization carries stages and a summary") {
    const auto h = test_harness();
    const auto spec = small_spec(KernelType::reduce);
    const auto report = h.bench(zoo::default_config(KernelType::reduce), spec);
    const auto text = report.to_text();
    CHECK(text.find("stage\tsmoke\tpass") != std::string::npos);
    CHECK(text.find("stage\tedge_cases\tpass") != std::string::npos);
    CHECK(text.find("summary\tpass\tthroughput=") != std::string::npos);
}

TEST_CASE("mismatched config and spec types are rejected") {
    const auto h = test_harness();
    CHECK_THROWS_AS(h.verify(zoo::default_config(KernelType::softmax),
                             small_spec(KernelType::reduce)),
                    ConfigError);
}
