#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "kernelloop/zoo.hpp"
#include "oracles.hpp"

using namespace kernelloop;
using namespace kernelloop::zoo;

namespace {

bool buffers_within(const TensorBuffer& a, const TensorBuffer& b,
                    const Tolerance& tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!within_tolerance(a.get(i), b.get(i), tol)) return false;
    return true;
}

CandidateConfig random_config(KernelType k, oracles::Rng& rng) {
    const auto& variants = variants_of(k);
    const auto& variant = variants[rng.next() % variants.size()];
    CandidateConfig c = variant_config(k, variant);
    for (const auto& p : enumerate_params(k, variant)) {
        if (p.name == "variant") continue;
        c.params[p.name] = p.domain[rng.next() % p.domain.size()];
    }
    return c;
}

}  // namespace

TEST_CASE("config serialization is canonical and digests are stable") {
    CandidateConfig c = default_config(KernelType::matmul);
    CHECK(c.serialize() ==
          "accum_precision=same\n"
          "kernel=matmul\n"
          "schema_version=1\n"
          "tile_k=32\n"
          "tile_m=32\n"
          "tile_n=32\n"
          "unroll=1\n"
          "variant=tiled\n"
          "worker_count=1\n");
    CHECK(c.digest() == CandidateConfig::parse(c.serialize()).digest());
    CHECK(CandidateConfig::parse(c.serialize()) == c);

    CandidateConfig other = c;
    other.params["tile_m"] = "64";
    CHECK(other.digest() != c.digest());
}

TEST_CASE("config validation rejects illegal configurations") {
    CandidateConfig c = default_config(KernelType::matmul);
    CHECK_NOTHROW(validate_config(c));

    SUBCASE("unknown variant") {
        c.variant = "blazing";
        CHECK_THROWS_AS(validate_config(c), ConfigError);
    }
    SUBCASE("illegal parameter for the variant") {
        c = variant_config(KernelType::matmul, "naive");
        c.params["tile_m"] = "32";  // naive has no tiles
        CHECK_THROWS_AS(validate_config(c), ConfigError);
    }
    SUBCASE("value outside the domain") {
        c.params["tile_m"] = "48";
        CHECK_THROWS_AS(validate_config(c), ConfigError);
    }
    SUBCASE("missing parameter") {
        c.params.erase("tile_k");
        CHECK_THROWS_AS(validate_config(c), ConfigError);
    }
    SUBCASE("parse failure on malformed text") {
        CHECK_THROWS_AS(CandidateConfig::parse("tile_m 32\n"), ConfigError);
        CHECK_THROWS_AS(CandidateConfig::parse("variant=tiled\n"), ConfigError);
    }
}

TEST_CASE("parameter space tier tags") {
    const auto matmul_tiled = enumerate_params(KernelType::matmul, "tiled");
    bool saw_tile_m = false;
    for (const auto& p : matmul_tiled) {
        if (p.name == "tile_m") {
            saw_tile_m = true;
            CHECK(p.tier == 1);
            CHECK(p.domain ==
                  std::vector<std::string>{"8", "16", "32", "64", "128", "256"});
        }
        if (p.name == "variant") CHECK(p.tier == 1);  // tiling structure
    }
    CHECK(saw_tile_m);

    const auto softmax_online = enumerate_params(KernelType::softmax, "online");
    bool saw_vw = false;
    for (const auto& p : softmax_online) {
        if (p.name == "vector_width") {
            saw_vw = true;
            CHECK(p.tier == 2);
        }
        if (p.name == "variant") CHECK(p.tier == 6);  // algorithm swap
    }
    CHECK(saw_vw);

    const auto reduce_basic = enumerate_params(KernelType::reduce, "basic");
    bool saw_ro = false;
    for (const auto& p : reduce_basic)
        if (p.name == "reduction_order") {
            saw_ro = true;
            CHECK(p.tier == 4);
        }
    CHECK(saw_ro);

    CHECK_THROWS_AS(enumerate_params(KernelType::matmul, "warp9"), ConfigError);
    CHECK_THROWS_AS(enumerate_params(KernelType::flash_attn, "basic"),
                    ConfigError);
}

TEST_CASE("reference oracle closed-form cases") {
    SUBCASE("softmax of identical values is uniform for any length") {
        for (std::int64_t n : {3, 64, 1024}) {
            TensorBuffer x({1, n}, DType::fp32);
            for (std::size_t i = 0; i < x.size(); ++i) x.set(i, 2.5);
            std::vector<TensorBuffer> in;
            in.push_back(std::move(x));
            const auto out = reference_execute(
                KernelType::softmax, make_rows_shape(1, n), in, DType::fp32);
            for (std::size_t i = 0; i < out.size(); ++i)
                CHECK(out.get(i) ==
                      doctest::Approx(1.0 / static_cast<double>(n)));
        }
    }
    SUBCASE("reduce of [1,2,3,4] is 10") {
        TensorBuffer x({1, 4}, DType::fp32);
        for (int i = 0; i < 4; ++i) x.set(static_cast<std::size_t>(i), i + 1);
        std::vector<TensorBuffer> in;
        in.push_back(std::move(x));
        const auto out = reference_execute(KernelType::reduce,
                                           make_rows_shape(1, 4), in,
                                           DType::fp32);
        CHECK(out.get(0) == 10.0);
    }
    SUBCASE("matmul by the identity returns the other operand") {
        TensorBuffer eye({2, 2}, DType::fp32), a({2, 2}, DType::fp32);
        eye.set(0, 1);
        eye.set(3, 1);
        a.set(0, 3.25);
        a.set(1, -1.5);
        a.set(2, 0.75);
        a.set(3, 42.0);
        std::vector<TensorBuffer> in;
        in.push_back(std::move(eye));
        in.push_back(std::move(a));
        const auto out = reference_execute(KernelType::matmul,
                                           make_matmul_shape(2, 2, 2), in,
                                           DType::fp32);
        CHECK(out.get(0) == 3.25);
        CHECK(out.get(1) == -1.5);
        CHECK(out.get(2) == 0.75);
        CHECK(out.get(3) == 42.0);
    }
    SUBCASE("layernorm of a constant row is all zeros") {
        TensorBuffer x({2, 16}, DType::fp32);
        for (std::size_t i = 0; i < x.size(); ++i) x.set(i, 7.0);
        std::vector<TensorBuffer> in;
        in.push_back(std::move(x));
        const auto out = reference_execute(KernelType::layernorm,
                                           make_rows_shape(2, 16), in,
                                           DType::fp32);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.get(i) == 0.0);
    }
    SUBCASE("rotary by a quarter turn maps (x0,x1) to (-x1,x0)") {
        const auto shape = make_bhsd_shape(1, 1, 1, 2);
        TensorBuffer x({1, 1, 1, 2}, DType::fp32), c({1, 1}, DType::fp32),
            s({1, 1}, DType::fp32);
        x.set(0, 0.3);
        x.set(1, 0.8);
        c.set(0, 0.0);
        s.set(0, 1.0);
        std::vector<TensorBuffer> in;
        in.push_back(std::move(x));
        in.push_back(std::move(c));
        in.push_back(std::move(s));
        const auto out =
            reference_execute(KernelType::rotary_emb, shape, in, DType::fp32);
        CHECK(out.get(0) == doctest::Approx(-0.8));
        CHECK(out.get(1) == doctest::Approx(0.3));
    }
    SUBCASE("single-position attention returns the value row") {
        const auto shape = make_bhsd_shape(1, 1, 1, 4);
        auto in = make_inputs(KernelType::flash_attn, shape, DType::fp32, 5);
        const auto out =
            reference_execute(KernelType::flash_attn, shape, in, DType::fp32);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out.get(i) == doctest::Approx(in[2].get(i)));
    }
    SUBCASE("cross entropy against a hand-computed log-sum-exp") {
        TensorBuffer logits({1, 3}, DType::fp64);
        logits.set(0, 1.0);
        logits.set(1, 2.0);
        logits.set(2, 3.0);
        TensorBuffer targets({1}, DType::fp32);
        targets.set(0, 1.0);  // class index 1
        std::vector<TensorBuffer> in;
        in.push_back(std::move(logits));
        in.push_back(std::move(targets));
        const auto out = reference_execute(KernelType::cross_entropy,
                                           make_ce_shape(1, 3), in,
                                           DType::fp64);
        const double lse =
            std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
        CHECK(out.get(0) == doctest::Approx(lse - 2.0).epsilon(1e-12));
    }
    SUBCASE("fused mlp against a direct fp64 evaluation") {
        const auto shape = WorkloadShape{{"M", 2}, {"N", 3}, {"K", 4}};
        const auto in = make_inputs(KernelType::fused_mlp, shape, DType::fp64, 8);
        const auto out =
            reference_execute(KernelType::fused_mlp, shape, in, DType::fp64);
        for (std::int64_t i = 0; i < 2; ++i)
            for (std::int64_t j = 0; j < 3; ++j) {
                double g = 0, u = 0;
                for (std::int64_t x = 0; x < 4; ++x) {
                    g += in[0].get(static_cast<std::size_t>(i * 4 + x)) *
                         in[1].get(static_cast<std::size_t>(x * 3 + j));
                    u += in[0].get(static_cast<std::size_t>(i * 4 + x)) *
                         in[2].get(static_cast<std::size_t>(x * 3 + j));
                }
                const double expect = g / (1.0 + std::exp(-g)) * u;
                CHECK(out.get(static_cast<std::size_t>(i * 3 + j)) ==
                      doctest::Approx(expect).epsilon(1e-12));
            }
    }
}

TEST_CASE("reference softmax rows sum to one within 8 machine epsilons") {
    const double eps_of[] = {0x1.0p-10, 0x1.0p-7, 0x1.0p-23, 0x1.0p-52};
    const DType dtypes[] = {DType::fp16, DType::bf16, DType::fp32, DType::fp64};
    for (int d = 0; d < 4; ++d) {
        const auto shape = make_rows_shape(32, 512);
        const auto in = make_inputs(KernelType::softmax, shape, dtypes[d], 9);
        const auto out =
            reference_execute(KernelType::softmax, shape, in, dtypes[d]);
        for (std::int64_t r = 0; r < 32; ++r) {
            long double sum = 0.0L;
            for (std::int64_t i = 0; i < 512; ++i)
                sum += out.get(static_cast<std::size_t>(r * 512 + i));
            CHECK(std::abs(static_cast<double>(sum) - 1.0) <= 8 * eps_of[d]);
        }
    }
}

TEST_CASE("candidates match the reference within dtype tolerance") {
    // property: 100 random configs per type, spread over the tiny/small
    // sweep shapes and the three sweep dtypes
    oracles::Rng rng(2024);
    const DType dtypes[] = {DType::fp16, DType::bf16, DType::fp32};
    for (KernelType k : executable_types()) {
        const auto sweep = shape_sweep(k);
        std::map<std::string, std::pair<std::vector<TensorBuffer>, TensorBuffer>>
            ref_cache;
        for (int trial = 0; trial < 100; ++trial) {
            CandidateConfig cfg = random_config(k, rng);
            const auto& entry = sweep[rng.next() % 2];  // tiny or small
            const DType dt = dtypes[rng.next() % 3];
            CAPTURE(to_string(k));
            CAPTURE(cfg.serialize());
            CAPTURE(entry.name);
            CAPTURE(to_string(dt));
            const std::string key = entry.name + "/" + to_string(dt);
            auto it = ref_cache.find(key);
            if (it == ref_cache.end()) {
                auto inputs = make_inputs(k, entry.shape, dt, 5);
                auto ref = reference_execute(k, entry.shape, inputs, dt);
                it = ref_cache
                         .emplace(key, std::make_pair(std::move(inputs),
                                                      std::move(ref)))
                         .first;
            }
            const auto out =
                candidate_execute(cfg, entry.shape, it->second.first, dt);
            CHECK(buffers_within(out, it->second.second, tolerance_for(dt)));
        }
    }
}

TEST_CASE("candidate execution is bitwise deterministic") {
    oracles::Rng rng(77);
    for (KernelType k : executable_types()) {
        const CandidateConfig cfg = random_config(k, rng);
        const auto shape = shape_sweep(k)[1].shape;
        const auto inputs = make_inputs(k, shape, DType::fp16, 3);
        const auto a = candidate_execute(cfg, shape, inputs, DType::fp16);
        const auto b = candidate_execute(cfg, shape, inputs, DType::fp16);
        CHECK(a.bitwise_equal(b));
    }
}

TEST_CASE("matmul candidates agree with a brute-force fp64 oracle at tiny sizes") {
    oracles::Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const std::int64_t m = 1 + static_cast<std::int64_t>(rng.next() % 8);
        const std::int64_t n = 1 + static_cast<std::int64_t>(rng.next() % 8);
        const std::int64_t k = 1 + static_cast<std::int64_t>(rng.next() % 8);
        const auto shape = make_matmul_shape(m, n, k);
        const auto inputs = make_inputs(KernelType::matmul, shape, DType::fp32,
                                        static_cast<std::uint64_t>(trial));
        const auto oracle =
            oracles::brute_force_matmul(inputs[0], inputs[1], m, n, k);
        const CandidateConfig cfg = random_config(KernelType::matmul, rng);
        const auto out = candidate_execute(cfg, shape, inputs, DType::fp32);
        const auto tol = tolerance_for(DType::fp32);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(within_tolerance(out.get(i), oracle[i], tol));
    }
}

TEST_CASE("naive softmax overflows where the stable variants survive") {
    // a row of 30000-valued fp32 inputs sends exp through the roof
    const auto shape = make_rows_shape(4, 64);
    TensorBuffer x({4, 64}, DType::fp32);
    for (std::size_t i = 0; i < x.size(); ++i) x.set(i, 30000.0);
    std::vector<TensorBuffer> in;
    in.push_back(std::move(x));

    auto naive = variant_config(KernelType::softmax, "overflow_naive");
    const auto bad = candidate_execute(naive, shape, in, DType::fp32);
    CHECK_FALSE(bad.all_finite());

    auto stable = variant_config(KernelType::softmax, "twopass");
    const auto good = candidate_execute(stable, shape, in, DType::fp32);
    CHECK(good.all_finite());
    for (std::size_t i = 0; i < good.size(); ++i)
        CHECK(good.get(i) == doctest::Approx(1.0 / 64.0));
}

TEST_CASE("reduction order changes bit patterns under absorption") {
    // oracle: evaluate both orders directly
    const std::vector<float> v = {1e8f, 1.0f, -1e8f, 1.0f};
    const float seq = oracles::sequential_sum_f32(v);
    const float pair = oracles::pairwise_sum_f32(v);
    CHECK(seq != pair);  // 1.0 vs 0.0

    const auto shape = make_rows_shape(1, 4);
    TensorBuffer x({1, 4}, DType::fp32);
    for (int i = 0; i < 4; ++i)
        x.set(static_cast<std::size_t>(i), v[static_cast<std::size_t>(i)]);
    std::vector<TensorBuffer> in;
    in.push_back(std::move(x));

    auto cfg = variant_config(KernelType::reduce, "basic");
    cfg.params["reduction_order"] = "sequential";
    const auto a = candidate_execute(cfg, shape, in, DType::fp32);
    cfg.params["reduction_order"] = "pairwise_tree";
    const auto b = candidate_execute(cfg, shape, in, DType::fp32);
    CHECK(a.get(0) == seq);
    CHECK(b.get(0) == pair);
    CHECK_FALSE(a.bitwise_equal(b));
}

TEST_CASE("masking_bug is correct on multiples of eight and wrong at 1023") {
    for (KernelType k : {KernelType::softmax, KernelType::layernorm,
                         KernelType::reduce}) {
        CAPTURE(to_string(k));
        const auto cfg = variant_config(k, "masking_bug");
        const auto tol = tolerance_for(DType::fp32);

        const auto ok_shape = make_rows_shape(32, 1024);
        const auto ok_in = make_inputs(k, ok_shape, DType::fp32, 1);
        CHECK(buffers_within(
            candidate_execute(cfg, ok_shape, ok_in, DType::fp32),
            reference_execute(k, ok_shape, ok_in, DType::fp32), tol));

        const auto bad_shape = make_rows_shape(32, 1023);
        const auto bad_in = make_inputs(k, bad_shape, DType::fp32, 1);
        CHECK_FALSE(buffers_within(
            candidate_execute(cfg, bad_shape, bad_in, DType::fp32),
            reference_execute(k, bad_shape, bad_in, DType::fp32), tol));
    }
}

TEST_CASE("racy fixture flips behavior on its per-call counter") {
    const auto shape = make_rows_shape(1, 4);
    TensorBuffer x({1, 4}, DType::fp32);
    x.set(0, 1e8);
    x.set(1, 1.0);
    x.set(2, -1e8);
    x.set(3, 1.0);
    std::vector<TensorBuffer> in;
    in.push_back(std::move(x));
    const auto cfg = variant_config(KernelType::reduce, "racy");
    const auto a = candidate_execute(cfg, shape, in, DType::fp32);
    const auto b = candidate_execute(cfg, shape, in, DType::fp32);
    CHECK_FALSE(a.bitwise_equal(b));
}

TEST_CASE("adversarial input sets behave as documented") {
    SUBCASE("softmax reference on a constant row stays finite and uniform") {
        // fp16, row constant 10.0, N=1024
        const auto shape = make_rows_shape(2, 1024);
        TensorBuffer x({2, 1024}, DType::fp16);
        for (std::size_t i = 0; i < x.size(); ++i) x.set(i, 10.0);
        std::vector<TensorBuffer> in;
        in.push_back(std::move(x));
        const auto out =
            reference_execute(KernelType::softmax, shape, in, DType::fp16);
        CHECK(out.all_finite());
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(within_tolerance(out.get(i), 1.0 / 1024.0,
                                   tolerance_for(DType::fp16)));
    }
    SUBCASE("generated softmax sets exist and the reference stays finite") {
        for (DType dt : {DType::fp16, DType::bf16, DType::fp32}) {
            const auto shape = make_rows_shape(8, 64);
            const auto cases =
                adversarial_inputs(KernelType::softmax, shape, dt);
            CHECK(cases.size() == 2);
            for (const auto& c : cases) {
                const auto ref =
                    reference_execute(KernelType::softmax, shape, c.inputs, dt);
                CHECK(ref.all_finite());
            }
        }
    }
    SUBCASE("layernorm constant rows give a zero reference before any bias") {
        const auto shape = make_rows_shape(8, 64);
        const auto cases =
            adversarial_inputs(KernelType::layernorm, shape, DType::fp32);
        const auto ref = reference_execute(KernelType::layernorm, shape,
                                           cases[0].inputs, DType::fp32);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(ref.get(i) == 0.0);
    }
    SUBCASE("matmul mixed-magnitude reference is finite in fp64") {
        const auto shape = make_matmul_shape(16, 16, 32);
        for (const auto& c :
             adversarial_inputs(KernelType::matmul, shape, DType::fp64)) {
            const auto ref = reference_execute(KernelType::matmul, shape,
                                               c.inputs, DType::fp64);
            CHECK(ref.all_finite());
        }
    }
}

TEST_CASE("shape sweep tables") {
    SUBCASE("matmul sweep is the published eight-row table") {
        const auto sweep = shape_sweep(KernelType::matmul);
        REQUIRE(sweep.size() == 8);
        CHECK(sweep[0].name == "tiny");
        CHECK(sweep[0].shape == make_matmul_shape(128, 128, 128));
        CHECK(sweep[1].name == "small");
        CHECK(sweep[1].shape == make_matmul_shape(512, 512, 512));
        CHECK(sweep[2].name == "large");
        CHECK(sweep[2].shape == make_matmul_shape(2048, 2048, 2048));
        CHECK(sweep[3].name == "xlarge");
        CHECK(sweep[3].shape == make_matmul_shape(4096, 4096, 4096));
        CHECK(sweep[4].name == "tall");
        CHECK(sweep[4].shape == make_matmul_shape(8192, 1024, 1024));
        CHECK(sweep[5].name == "deep_k");
        CHECK(sweep[5].shape == make_matmul_shape(1024, 1024, 8192));
        CHECK(sweep[6].name == "llm_qkv");
        CHECK(sweep[6].shape == make_matmul_shape(4096, 4096, 512));
        CHECK(sweep[7].name == "llm_mlp");
        CHECK(sweep[7].shape == make_matmul_shape(4096, 11008, 4096));
    }
    SUBCASE("softmax sweep includes the published 8192x8192 row") {
        bool found = false;
        for (const auto& e : shape_sweep(KernelType::softmax))
            if (e.shape == make_rows_shape(8192, 8192)) found = true;
        CHECK(found);
    }
    SUBCASE("every sweep has 8-10 uniquely named entries") {
        for (KernelType k : executable_types()) {
            const auto sweep = shape_sweep(k);
            CHECK(sweep.size() >= 8);
            CHECK(sweep.size() <= 10);
            std::set<std::string> names;
            bool nonsquare = false;
            for (const auto& e : sweep) {
                names.insert(e.name);
                // masked dimensions stay multiples of 8 so only the
                // edge-case stage hits remainder handling
                for (const auto& dim : masked_dims(k)) {
                    CAPTURE(to_string(k));
                    CAPTURE(e.name);
                    CHECK(e.shape.at(dim) % 8 == 0);
                }
                const auto& d = e.shape.dims;
                if (d.size() == 2 && d[0].second != d[1].second)
                    nonsquare = true;
                if (d.size() >= 3) nonsquare = true;
            }
            CHECK(names.size() == sweep.size());
            CHECK(nonsquare);
        }
    }
}

TEST_CASE("starter configurations") {
    const auto m = default_config(KernelType::matmul);
    CHECK(m.variant == "tiled");
    CHECK(m.params.at("tile_m") == "32");
    CHECK(m.params.at("tile_n") == "32");
    CHECK(m.params.at("tile_k") == "32");
    CHECK(default_config(KernelType::softmax).variant == "twopass");
    CHECK(default_config(KernelType::rmsnorm).variant == "basic");
    for (KernelType k : executable_types())
        CHECK_NOTHROW(validate_config(default_config(k)));
}

TEST_CASE("input generation is seed-deterministic") {
    const auto shape = make_rows_shape(16, 64);
    const auto a = make_inputs(KernelType::softmax, shape, DType::fp16, 42);
    const auto b = make_inputs(KernelType::softmax, shape, DType::fp16, 42);
    const auto c = make_inputs(KernelType::softmax, shape, DType::fp16, 43);
    CHECK(a[0].bitwise_equal(b[0]));
    CHECK_FALSE(a[0].bitwise_equal(c[0]));
}

TEST_CASE("candidate execution validates inputs") {
    const auto shape = make_matmul_shape(4, 4, 4);
    auto inputs = make_inputs(KernelType::matmul, shape, DType::fp32, 1);
    const auto cfg = default_config(KernelType::matmul);
    std::vector<TensorBuffer> wrong;
    wrong.push_back(inputs[0]);
    CHECK_THROWS_AS(candidate_execute(cfg, shape, wrong, DType::fp32),
                    ShapeError);
    CHECK_THROWS_AS(candidate_execute(cfg, shape, inputs, DType::fp16),
                    ShapeError);
}
