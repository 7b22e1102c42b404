#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "kernelloop/profiler.hpp"
#include "kernelloop/zoo.hpp"

using namespace kernelloop;
using namespace kernelloop::profiler;

namespace {

const std::filesystem::path kFixtures = KERNELLOOP_FIXTURES_DIR;
const std::filesystem::path kData =
    std::filesystem::path(KERNELLOOP_SOURCE_DIR) / "data";

ModelDesc tiny_model() {
    ModelDesc m;
    m.name = "tiny";
    m.ops.push_back({"only_gemm", KernelType::matmul,
                     make_matmul_shape(64, 64, 64), DType::fp32, 1});
    return m;
}

HardwareSpec toy_hw() { return {"toy", 1e12, 1e11, HwSource::static_db}; }

double fraction_sum(const Profile& p) {
    double s = 0.0;
    for (const auto& e : p.entries) s += e.fraction;
    return s;
}

}  // namespace

TEST_CASE("classify_kernel_name rule table") {
    CHECK(classify_kernel_name("ampere_fp16_s16816gemm") == KernelType::matmul);
    CHECK(classify_kernel_name("triton_red_fused__softmax") ==
          KernelType::softmax);
    CHECK(classify_kernel_name("vectorized_layer_norm_kernel") ==
          KernelType::layernorm);
    CHECK(classify_kernel_name("_rms_norm_fwd") == KernelType::rmsnorm);
    CHECK(classify_kernel_name("").has_value() == false);
    CHECK(classify_kernel_name("mystery_operation_42").has_value() == false);
    // case-insensitive
    CHECK(classify_kernel_name("CUTLASS_80_TENSOROP") == KernelType::matmul);
}

TEST_CASE("rule table classifies at least 95% of the real-name corpus") {
    std::ifstream in(kFixtures / "kernel_names.tsv");
    REQUIRE(in);
    std::string line;
    int total = 0, hit = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.rfind('\t');
        REQUIRE(tab != std::string::npos);
        const std::string name = line.substr(0, tab);
        const KernelType expected =
            kernel_type_from_string(line.substr(tab + 1));
        ++total;
        const auto got = classify_kernel_name(name);
        if (got && *got == expected) {
            ++hit;
        } else {
            CAPTURE(name);
            CHECK_MESSAGE(false, "misclassified corpus entry");
        }
    }
    CHECK(total >= 40);
    CHECK(static_cast<double>(hit) >= 0.95 * static_cast<double>(total));
}

TEST_CASE("rule file loads and matches the built-in table") {
    const auto rules = load_name_rules(kData / "kernel_name_rules.tsv");
    REQUIRE(rules.size() == default_name_rules().size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        CHECK(rules[i].pattern == default_name_rules()[i].pattern);
        CHECK(rules[i].type == default_name_rules()[i].type);
    }
}

TEST_CASE("profile of a single-op model has fraction one") {
    const auto p = profile(tiny_model(), toy_hw(), 1, 2);
    REQUIRE(p.entries.size() == 1);
    CHECK(p.entries[0].fraction == doctest::Approx(1.0));
    CHECK(p.entries[0].kernel_type == KernelType::matmul);
    CHECK(p.entries[0].total_seconds > 0.0);
}

TEST_CASE("two ops of identical cost split time roughly evenly") {
    ModelDesc m;
    m.name = "pair";
    m.ops.push_back({"gemm_a", KernelType::matmul,
                     make_matmul_shape(96, 96, 96), DType::fp32, 1});
    m.ops.push_back({"gemm_b", KernelType::matmul,
                     make_matmul_shape(96, 96, 96), DType::fp32, 1});
    const auto p = profile(m, toy_hw(), 2, 8);
    REQUIRE(p.entries.size() == 2);
    CHECK(p.entries[0].fraction == doctest::Approx(0.5).epsilon(0.2));
    CHECK(p.entries[1].fraction == doctest::Approx(0.5).epsilon(0.2));
    CHECK(fraction_sum(p) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("profile fractions are stable under doubled iteration counts") {
    ModelDesc m;
    m.name = "trio";
    m.ops.push_back({"gemm", KernelType::matmul,
                     make_matmul_shape(96, 96, 96), DType::fp32, 2});
    m.ops.push_back({"norm", KernelType::rmsnorm, make_rows_shape(256, 256),
                     DType::fp32, 2});
    m.ops.push_back({"sum", KernelType::reduce, make_rows_shape(256, 256),
                     DType::fp32, 1});
    const auto a = profile(m, toy_hw(), 2, 4);
    const auto b = profile(m, toy_hw(), 2, 8);
    for (std::size_t i = 0; i < a.entries.size(); ++i)
        CHECK(std::abs(a.entries[i].fraction - b.entries[i].fraction) < 0.15);
}

TEST_CASE("the gpt2like fixture is matmul-dominated") {
    const auto model = load_model(kData / "models" / "gpt2like.model");
    const auto p = profile(model, toy_hw(), 1, 2);
    CHECK(fraction_sum(p) == doctest::Approx(1.0).epsilon(1e-9));
    double matmul_fraction = 0.0;
    for (const auto& e : p.entries)
        if (e.kernel_type == KernelType::matmul) matmul_fraction += e.fraction;
    CHECK(matmul_fraction > 0.5);
}

TEST_CASE("every shipped fixture model loads and classifies fully") {
    for (const char* name : {"gpt2like.model", "llama_small.model",
                             "bertlike.model", "custom_template.model"}) {
        CAPTURE(name);
        const auto model = load_model(kData / "models" / name);
        CHECK(!model.ops.empty());
        for (const auto& op : model.ops) {
            CAPTURE(op.op_name);
            CHECK(op_type(op).has_value());
        }
    }
}

TEST_CASE("unclassifiable ops are a profiling error naming the op") {
    ModelDesc m;
    m.name = "bad";
    m.ops.push_back({"mystery_operation", std::nullopt, make_rows_shape(8, 8),
                     DType::fp32, 1});
    try {
        profile(m, toy_hw(), 0, 1);
        CHECK(false);
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("mystery_operation") !=
              std::string::npos);
    }
}

TEST_CASE("profile export/import round-trips") {
    ModelDesc m;
    m.name = "roundtrip";
    m.ops.push_back({"gemm", KernelType::matmul,
                     make_matmul_shape(64, 64, 64), DType::fp16, 2});
    m.ops.push_back({"softmax_op", std::nullopt, make_rows_shape(64, 64),
                     DType::fp32, 1});
    const auto p = profile(m, toy_hw(), 1, 2);
    const std::string text = export_profile_text(p);
    const auto q = import_profile_text(text);
    CHECK(q.model_name == p.model_name);
    CHECK(q.hardware.name == p.hardware.name);
    CHECK(q.hardware.peak_flops == doctest::Approx(p.hardware.peak_flops));
    REQUIRE(q.entries.size() == p.entries.size());
    for (std::size_t i = 0; i < p.entries.size(); ++i) {
        CHECK(q.entries[i].op_name == p.entries[i].op_name);
        CHECK(q.entries[i].kernel_type == p.entries[i].kernel_type);
        CHECK(q.entries[i].shape == p.entries[i].shape);
        CHECK(q.entries[i].dtype == p.entries[i].dtype);
        CHECK(q.entries[i].fraction ==
              doctest::Approx(p.entries[i].fraction).epsilon(1e-9));
    }
}

TEST_CASE("import renormalizes fractions that do not sum to one") {
    const std::string text =
        "# kernelloop-profile v1\n"
        "gemm\tmatmul\tM=64,N=64,K=64\tfp32\t0.4\t0.6\n"
        "norm\trmsnorm\tM=64,N=64\tfp32\t0.1\t0.2\n";  // sums to 0.8
    const auto p = import_profile_text(text);
    CHECK(p.entries[0].fraction == doctest::Approx(0.75));
    CHECK(p.entries[1].fraction == doctest::Approx(0.25));
}

TEST_CASE("import rejects malformed files with line numbers") {
    CHECK_THROWS_AS(import_profile_text("nonsense"), ParseError);
    CHECK_THROWS_AS(import_profile_text("# kernelloop-profile v1\n"),
                    ParseError);  // empty entries
    try {
        import_profile_text(
            "# kernelloop-profile v1\n"
            "gemm\tmatmul\tM=64,N=64,K=64\tfp32\n");  // short line
        CHECK(false);
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    // unknown entries import fine and stay unextracted
    const auto p = import_profile_text(
        "# kernelloop-profile v1\n"
        "weird\tunknown\tM=2,N=2\tfp32\t0.5\t0.5\n"
        "gemm\tmatmul\tM=8,N=8,K=8\tfp32\t0.5\t0.5\n");
    CHECK_FALSE(p.entries[0].kernel_type.has_value());
}

TEST_CASE("static hardware database") {
    const auto hw = detect_hardware_static("H100", kData / "hardware.tsv");
    CHECK(hw.peak_bandwidth == doctest::Approx(3.352e12));
    CHECK(hw.peak_flops == doctest::Approx(989.5e12));
    CHECK(hw.source == HwSource::static_db);
    CHECK_THROWS_AS(detect_hardware_static("GTX285", kData / "hardware.tsv"),
                    DomainError);
}

TEST_CASE("calibration yields positive peaks that bound a starter benchmark") {
    const auto hw = calibrate_hardware();
    CHECK(hw.source == HwSource::calibrated);
    CHECK(hw.peak_flops > 0.0);
    CHECK(hw.peak_bandwidth > 0.0);

    // the starter matmul config should not exceed the calibrated ceiling by
    // more than scheduling noise
    const auto shape = make_matmul_shape(256, 256, 256);
    const auto inputs =
        zoo::make_inputs(KernelType::matmul, shape, DType::fp32, 7);
    const auto cfg = zoo::default_config(KernelType::matmul);
    zoo::candidate_execute(cfg, shape, inputs, DType::fp32);
    const auto t0 = std::chrono::steady_clock::now();
    zoo::candidate_execute(cfg, shape, inputs, DType::fp32);
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const double starter_flops =
        static_cast<double>(flops_of(KernelType::matmul, shape)) / dt;
    CHECK(starter_flops <= hw.peak_flops * 1.25);
}

TEST_CASE("model save/load round-trips") {
    const auto m = load_model(kData / "models" / "gpt2like.model");
    const auto tmp = std::filesystem::temp_directory_path() /
                     "kernelloop_model_roundtrip.model";
    save_model(m, tmp);
    const auto again = load_model(tmp);
    CHECK(again.name == m.name);
    REQUIRE(again.ops.size() == m.ops.size());
    for (std::size_t i = 0; i < m.ops.size(); ++i) {
        CHECK(again.ops[i].op_name == m.ops[i].op_name);
        CHECK(again.ops[i].shape == m.ops[i].shape);
        CHECK(again.ops[i].repeat == m.ops[i].repeat);
    }
    std::filesystem::remove(tmp);
}
