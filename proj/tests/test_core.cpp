#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kernelloop/core.hpp"
#include "kernelloop/tensor.hpp"
#include "oracles.hpp"

using namespace kernelloop;

namespace {

const HardwareSpec kH100{"H100", 989.5e12, 3.352e12, HwSource::static_db};

// Published throughput rows: (type, shape, elapsed in us, reported rate,
// rate unit is TF/s for compute kernels and GB/s for memory kernels).
struct ThroughputRow {
    KernelType type;
    WorkloadShape shape;
    double elapsed_us;
    double reported;
};

const ThroughputRow kThroughputRows[] = {
    {KernelType::matmul, make_matmul_shape(2048, 2048, 2048), 65.3, 263},
    {KernelType::matmul, make_matmul_shape(4096, 4096, 4096), 494.2, 278},
    {KernelType::matmul, make_matmul_shape(8192, 8192, 8192), 5773.1, 190},
    {KernelType::softmax, make_rows_shape(4096, 4096), 40.1, 1675},
    {KernelType::softmax, make_rows_shape(8192, 8192), 95.9, 2800},
    {KernelType::layernorm, make_rows_shape(4096, 5120), 42.5, 1974},
    {KernelType::layernorm, make_rows_shape(8192, 4096), 51.9, 2586},
    {KernelType::rmsnorm, make_rows_shape(4096, 4096), 39.1, 1716},
    {KernelType::rmsnorm, make_rows_shape(8192, 4096), 51.2, 2619},
    {KernelType::rmsnorm, make_rows_shape(8192, 8192), 96.3, 2788},
    {KernelType::cross_entropy, make_ce_shape(4096, 32000), 134.9, 1943},
    {KernelType::cross_entropy, make_ce_shape(8192, 32000), 253.3, 2070},
    {KernelType::reduce, make_rows_shape(8192, 8192), 62.2, 2156},
    {KernelType::reduce, make_rows_shape(16384, 4096), 52.8, 2542},
    {KernelType::rotary_emb, make_bhsd_shape(2, 32, 2048, 128), 117.4, 576},
    {KernelType::rotary_emb, make_bhsd_shape(2, 32, 4096, 128), 223.0, 607},
};

}  // namespace

TEST_CASE("throughput arithmetic reproduces the published table within 1%") {
    for (const auto& row : kThroughputRows) {
        CAPTURE(to_string(row.type));
        CAPTURE(row.shape.to_text());
        const double elapsed = row.elapsed_us * 1e-6;
        double rate;
        if (metric_of(row.type) == Metric::tflops) {
            rate = static_cast<double>(flops_of(row.type, row.shape)) /
                   elapsed / 1e12;
        } else {
            rate = static_cast<double>(
                       bytes_of(row.type, row.shape, DType::fp16)) /
                   elapsed / 1e9;
        }
        CHECK(std::abs(rate - row.reported) / row.reported < 0.01);
    }
}

TEST_CASE("flops_of canonical values") {
    CHECK(flops_of(KernelType::matmul, make_matmul_shape(4096, 4096, 4096)) ==
          137'438'953'472ll);
    CHECK(flops_of(KernelType::matmul, make_matmul_shape(1, 1, 1)) == 2);
    CHECK(flops_of(KernelType::reduce, make_rows_shape(1, 8)) == 8);
    CHECK(flops_of(KernelType::softmax, make_rows_shape(3, 7)) == 5 * 21);
    CHECK(flops_of(KernelType::layernorm, make_rows_shape(3, 7)) == 8 * 21);
    CHECK(flops_of(KernelType::rmsnorm, make_rows_shape(3, 7)) == 4 * 21);
    CHECK(flops_of(KernelType::cross_entropy, make_ce_shape(3, 7)) == 5 * 21);
    CHECK(flops_of(KernelType::rotary_emb, make_bhsd_shape(2, 3, 5, 8)) ==
          6 * 240);
}

TEST_CASE("bytes_of canonical values") {
    CHECK(bytes_of(KernelType::rmsnorm, make_rows_shape(8192, 8192),
                   DType::fp16) == 268'435'456ll);
    CHECK(bytes_of(KernelType::softmax, make_rows_shape(8192, 8192),
                   DType::fp16) == 268'435'456ll);
    CHECK(bytes_of(KernelType::cross_entropy, make_ce_shape(8192, 32000),
                   DType::fp16) == 524'288'000ll);
    CHECK(bytes_of(KernelType::matmul, make_matmul_shape(2, 3, 4),
                   DType::fp32) == (2 * 4 + 4 * 3 + 2 * 3) * 4);
    CHECK(bytes_of(KernelType::reduce, make_rows_shape(4, 8), DType::fp64) ==
          (4 * 8 + 4) * 8);
}

TEST_CASE("flops_of and bytes_of reject mismatched dimension names") {
    WorkloadShape bad{{"M", 4}, {"N", 4}};
    CHECK_THROWS_AS(flops_of(KernelType::matmul, bad), ShapeError);
    WorkloadShape wrong_names{{"A", 4}, {"B", 4}, {"C", 4}};
    CHECK_THROWS_AS(flops_of(KernelType::matmul, wrong_names), ShapeError);
    WorkloadShape nonpositive{{"M", 0}, {"N", 4}};
    CHECK_THROWS_AS(bytes_of(KernelType::reduce, nonpositive, DType::fp32),
                    ShapeError);
}

TEST_CASE("workload arithmetic is strictly monotone in every dimension") {
    oracles::Rng rng(42);
    for (KernelType k : kAllKernelTypes) {
        const auto& names = dim_names(k);
        for (int trial = 0; trial < 20; ++trial) {
            WorkloadShape shape;
            for (const auto& n : names)
                shape.dims.emplace_back(n, 1 + static_cast<std::int64_t>(
                                                   rng.next() % 64));
            if (k == KernelType::rotary_emb || k == KernelType::flash_attn)
                shape.set("D", shape.at("D") * 2);  // even head dim
            const auto f0 = flops_of(k, shape);
            const auto b0 = bytes_of(k, shape, DType::fp32);
            for (const auto& n : names) {
                WorkloadShape bigger = shape;
                bigger.set(n, shape.at(n) + (n == "D" ? 2 : 1));
                CHECK(flops_of(k, bigger) > f0);
                CHECK(bytes_of(k, bigger, DType::fp32) > b0);
            }
        }
    }
}

TEST_CASE("tolerance_for is total, positive, and matches the dtype table") {
    CHECK(tolerance_for(DType::fp16).atol == doctest::Approx(1e-2));
    CHECK(tolerance_for(DType::fp16).rtol == doctest::Approx(1e-3));
    CHECK(tolerance_for(DType::bf16).atol == doctest::Approx(2e-2));
    CHECK(tolerance_for(DType::bf16).rtol == doctest::Approx(1e-3));
    CHECK(tolerance_for(DType::fp32).atol == doctest::Approx(1e-4));
    CHECK(tolerance_for(DType::fp32).rtol == doctest::Approx(1e-5));
    CHECK(tolerance_for(DType::fp64).atol == doctest::Approx(1e-8));
    CHECK(tolerance_for(DType::fp64).rtol == doctest::Approx(1e-9));
    for (DType d : {DType::fp16, DType::bf16, DType::fp32, DType::fp64}) {
        CHECK(tolerance_for(d).atol > 0);
        CHECK(tolerance_for(d).rtol > 0);
    }
}

TEST_CASE("roofline classification and percent of peak") {
    SUBCASE("big matmul is compute-bound on H100") {
        const auto shape = make_matmul_shape(4096, 4096, 4096);
        const double flops = static_cast<double>(flops_of(KernelType::matmul, shape));
        const double bytes = static_cast<double>(
            bytes_of(KernelType::matmul, shape, DType::fp16));
        const auto st = roofline(flops, bytes, 494.2e-6, kH100);
        CHECK(st.arithmetic_intensity ==
              doctest::Approx(2.0 * 4096 / 6.0));  // ~1365
        CHECK(st.bound == Regime::compute);
    }
    SUBCASE("rmsnorm is memory-bound at 83% of peak bandwidth") {
        const auto shape = make_rows_shape(8192, 8192);
        const double flops = static_cast<double>(flops_of(KernelType::rmsnorm, shape));
        const double bytes = static_cast<double>(
            bytes_of(KernelType::rmsnorm, shape, DType::fp16));
        const auto st = roofline(flops, bytes, 96.3e-6, kH100);
        CHECK(st.bound == Regime::memory);
        CHECK(st.pct_of_peak == doctest::Approx(0.83).epsilon(0.01));
    }
    SUBCASE("exact ridge point classifies compute-bound") {
        HardwareSpec hw{"toy", 100.0, 10.0, HwSource::static_db};
        // AI exactly 10 = ridge
        const auto st = roofline(100.0, 10.0, 1.0, hw);
        CHECK(st.bound == Regime::compute);
    }
    SUBCASE("bound classification is invariant under elapsed-time scaling") {
        oracles::Rng rng(7);
        for (int i = 0; i < 200; ++i) {
            const double flops = 1.0 + static_cast<double>(rng.next() % 1000000);
            const double bytes = 1.0 + static_cast<double>(rng.next() % 1000000);
            const auto a = roofline(flops, bytes, 1e-3, kH100);
            const auto b = roofline(flops, bytes, 17.0, kH100);
            CHECK(a.bound == b.bound);
            CHECK(a.arithmetic_intensity == b.arithmetic_intensity);
        }
    }
    SUBCASE("zero elapsed is a measurement error") {
        CHECK_THROWS_AS(roofline(1.0, 1.0, 0.0, kH100), MeasurementError);
    }
}

TEST_CASE("half and double shapes scale the leading dimension") {
    const auto spec = KernelSpec::make(
        KernelType::matmul, make_matmul_shape(4096, 4096, 4096), DType::fp16);
    CHECK(spec.half_shape == make_matmul_shape(2048, 4096, 4096));
    CHECK(spec.double_shape == make_matmul_shape(8192, 4096, 4096));
    CHECK(spec.tolerance.atol == doctest::Approx(1e-2));

    const auto tiny =
        KernelSpec::make(KernelType::reduce, make_rows_shape(1, 8), DType::fp32);
    CHECK(tiny.half_shape.at("M") == 1);  // rounded up to >= 1
    CHECK(tiny.double_shape.at("M") == 2);

    const auto rot = KernelSpec::make(
        KernelType::rotary_emb, make_bhsd_shape(2, 32, 2048, 128), DType::fp16);
    CHECK(rot.half_shape.at("S") == 1024);
    CHECK(rot.double_shape.at("S") == 4096);
    CHECK(rot.half_shape.at("B") == 2);
}

TEST_CASE("shape text round-trips") {
    const auto s = make_matmul_shape(4096, 11008, 4096);
    CHECK(s.to_text() == "M=4096,N=11008,K=4096");
    CHECK(WorkloadShape::from_text(s.to_text()) == s);
    CHECK_THROWS_AS(WorkloadShape::from_text("M=x"), ParseError);
}

TEST_CASE("half-precision storage conversions") {
    SUBCASE("known fp16 bit patterns") {
        CHECK(float_to_half_bits(1.0f) == 0x3C00);
        CHECK(float_to_half_bits(-2.0f) == 0xC000);
        CHECK(float_to_half_bits(65504.0f) == 0x7BFF);
        CHECK(float_to_half_bits(65536.0f) == 0x7C00);  // inf
        CHECK(float_to_half_bits(0.0f) == 0x0000);
        CHECK(half_bits_to_float(0x3C00) == 1.0f);
        CHECK(half_bits_to_float(0x7C00) ==
              std::numeric_limits<float>::infinity());
        CHECK(std::isnan(half_bits_to_float(0x7E00)));
    }
    SUBCASE("known bf16 bit patterns") {
        CHECK(float_to_bf16_bits(1.0f) == 0x3F80);
        CHECK(float_to_bf16_bits(-1.0f) == 0xBF80);
        CHECK(bf16_bits_to_float(0x3F80) == 1.0f);
        CHECK(std::isnan(bf16_bits_to_float(float_to_bf16_bits(NAN))));
    }
    SUBCASE("fp16 round-trip is exact for representable values") {
        oracles::Rng rng(3);
        for (int i = 0; i < 2000; ++i) {
            const std::uint16_t bits =
                static_cast<std::uint16_t>(rng.next() & 0xFFFF);
            const float f = half_bits_to_float(bits);
            if (std::isnan(f)) continue;
            const float again = half_bits_to_float(float_to_half_bits(f));
            CHECK(again == f);
        }
    }
    SUBCASE("round-to-nearest-even at the half ULP midpoint") {
        // 2049 lies exactly between fp16-representable 2048 and 2050
        CHECK(half_bits_to_float(float_to_half_bits(2049.0f)) == 2048.0f);
        CHECK(half_bits_to_float(float_to_half_bits(2051.0f)) == 2052.0f);
    }
    SUBCASE("tensor buffer stores rounded payloads") {
        TensorBuffer b({4}, DType::fp16);
        b.set(0, 0.1);
        CHECK(b.get(0) == doctest::Approx(0.1).epsilon(1e-3));
        CHECK(b.get(0) != 0.1);  // rounded
        b.set(1, 1e9);
        CHECK(std::isinf(b.get(1)));
        CHECK_FALSE(b.all_finite());
    }
}

TEST_CASE("within_tolerance semantics") {
    Tolerance tol{1e-2, 1e-3};
    CHECK(within_tolerance(1.0, 1.0, tol));
    CHECK(within_tolerance(1.009, 1.0, tol));
    CHECK_FALSE(within_tolerance(1.02, 1.0, tol));
    CHECK(within_tolerance(100.0, 100.09, tol));  // rtol term dominates
    CHECK_FALSE(within_tolerance(NAN, 1.0, tol));
    CHECK_FALSE(within_tolerance(INFINITY, 1.0, tol));
}
