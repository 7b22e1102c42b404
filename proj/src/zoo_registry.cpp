#include <algorithm>
#include <cmath>
#include <sstream>

#include "kernelloop/zoo.hpp"

namespace kernelloop::zoo {

// ---------------------------------------------------------------------------
// CandidateConfig
// ---------------------------------------------------------------------------

std::string CandidateConfig::serialize() const {
    std::map<std::string, std::string> all = params;
    all["kernel"] = to_string(kernel_type);
    all["variant"] = variant;
    all["schema_version"] = std::to_string(schema_version);
    std::string out;
    for (const auto& [k, v] : all) out += k + "=" + v + "\n";
    return out;
}

CandidateConfig CandidateConfig::parse(const std::string& text) {
    CandidateConfig c;
    c.schema_version = 0;
    bool have_kernel = false, have_variant = false;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key=value, got '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        if (key == "kernel") {
            c.kernel_type = kernel_type_from_string(val);
            have_kernel = true;
        } else if (key == "variant") {
            c.variant = val;
            have_variant = true;
        } else if (key == "schema_version") {
            c.schema_version = std::stoi(val);
        } else {
            c.params[key] = val;
        }
    }
    if (!have_kernel) throw ConfigError("config missing 'kernel' key");
    if (!have_variant) throw ConfigError("config missing 'variant' key");
    if (c.schema_version != 1)
        throw ConfigError("unsupported config schema_version");
    return c;
}

std::string CandidateConfig::digest() const {
    const std::string text = serialize();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

std::int64_t CandidateConfig::param_int(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end())
        throw ConfigError("config missing parameter '" + key + "'");
    return std::stoll(it->second);
}

std::string CandidateConfig::param_str(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end())
        throw ConfigError("config missing parameter '" + key + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// Parameter space
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kTileDomain = {"8", "16", "32", "64", "128", "256"};
const std::vector<std::string> kVectorDomain = {"1", "2", "4", "8"};
const std::vector<std::string> kUnrollDomain = {"1", "2", "4"};
const std::vector<std::string> kAccumDomain = {"same", "widened"};
const std::vector<std::string> kWorkerDomain = {"1", "2", "4", "8"};
const std::vector<std::string> kReductionDomain = {"sequential", "pairwise_tree"};

// Canonical declaration order; the playbook sweeps parameters tier by tier
// in this order.
struct ParamDef {
    const char* name;
    const std::vector<std::string>* domain;
    int tier;
};
const ParamDef kParamDefs[] = {
    {"tile_m", &kTileDomain, 1},      {"tile_n", &kTileDomain, 1},
    {"tile_k", &kTileDomain, 1},      {"worker_count", &kWorkerDomain, 1},
    {"vector_width", &kVectorDomain, 2},
    {"unroll", &kUnrollDomain, 3},    {"accum_precision", &kAccumDomain, 3},
    {"reduction_order", &kReductionDomain, 4},
};

const ParamDef* param_def(const std::string& name) {
    for (const auto& d : kParamDefs)
        if (name == d.name) return &d;
    return nullptr;
}

// Legal parameter names per (type, variant). Fixture variants accept only
// worker_count.
std::vector<std::string> legal_params(KernelType k, const std::string& v) {
    if (is_fixture_variant(v)) return {"worker_count"};
    switch (k) {
        case KernelType::matmul:
            if (v == "naive") return {"worker_count", "accum_precision"};
            if (v == "tiled")
                return {"tile_m", "tile_n", "tile_k", "worker_count", "unroll",
                        "accum_precision"};
            if (v == "tiled_vectorized")
                return {"tile_m", "tile_n", "tile_k", "worker_count",
                        "vector_width", "unroll", "accum_precision"};
            break;
        case KernelType::softmax:
        case KernelType::cross_entropy:
            if (v == "twopass")
                return {"worker_count", "vector_width", "accum_precision",
                        "reduction_order"};
            if (v == "online")
                return {"worker_count", "vector_width", "accum_precision"};
            break;
        case KernelType::layernorm:
            if (v == "twopass")
                return {"worker_count", "vector_width", "accum_precision",
                        "reduction_order"};
            if (v == "welford") return {"worker_count", "accum_precision"};
            break;
        case KernelType::rmsnorm:
        case KernelType::reduce:
            if (v == "basic")
                return {"worker_count", "vector_width", "unroll",
                        "accum_precision", "reduction_order"};
            break;
        case KernelType::rotary_emb:
            if (v == "basic")
                return {"worker_count", "vector_width", "unroll"};
            break;
        default: break;
    }
    throw ConfigError("unknown variant '" + v + "' for " + to_string(k));
}

std::string default_value(const std::string& param) {
    if (param == "tile_m" || param == "tile_n" || param == "tile_k")
        return "32";
    if (param == "vector_width" || param == "worker_count" ||
        param == "unroll")
        return "1";
    if (param == "accum_precision") return "same";
    if (param == "reduction_order") return "sequential";
    return "";
}

}  // namespace

const std::vector<KernelType>& executable_types() {
    static const std::vector<KernelType> t = {
        KernelType::matmul,       KernelType::softmax,
        KernelType::layernorm,    KernelType::rmsnorm,
        KernelType::cross_entropy, KernelType::rotary_emb,
        KernelType::reduce,
    };
    return t;
}

bool is_executable(KernelType k) {
    const auto& t = executable_types();
    return std::find(t.begin(), t.end(), k) != t.end();
}

const std::vector<std::string>& variants_of(KernelType k) {
    static const std::vector<std::string> matmul = {"naive", "tiled",
                                                    "tiled_vectorized"};
    static const std::vector<std::string> softmax_family = {"twopass",
                                                            "online"};
    static const std::vector<std::string> layernorm = {"twopass", "welford"};
    static const std::vector<std::string> basic = {"basic"};
    static const std::vector<std::string> none;
    switch (k) {
        case KernelType::matmul: return matmul;
        case KernelType::softmax:
        case KernelType::cross_entropy: return softmax_family;
        case KernelType::layernorm: return layernorm;
        case KernelType::rmsnorm:
        case KernelType::rotary_emb:
        case KernelType::reduce: return basic;
        default: return none;
    }
}

const std::vector<std::string>& fixture_variants() {
    static const std::vector<std::string> f = {
        "broken", "shape_bug", "overflow_naive", "racy", "masking_bug"};
    return f;
}

bool is_fixture_variant(const std::string& variant) {
    const auto& f = fixture_variants();
    return std::find(f.begin(), f.end(), variant) != f.end();
}

std::vector<ParamSpec> enumerate_params(KernelType k,
                                        const std::string& variant) {
    if (!is_executable(k))
        throw ConfigError(to_string(k) + " has no tunable candidates");
    std::vector<ParamSpec> out;
    const auto legal = legal_params(k, variant);
    for (const auto& def : kParamDefs) {
        if (std::find(legal.begin(), legal.end(), def.name) == legal.end())
            continue;
        out.push_back(ParamSpec{def.name, *def.domain, def.tier});
    }
    // Variant switching is itself a searchable axis: tier 1 for matmul
    // (tiling structure), tier 6 elsewhere (algorithm swaps).
    if (!is_fixture_variant(variant)) {
        ParamSpec vs;
        vs.name = "variant";
        vs.domain = variants_of(k);
        vs.tier = (k == KernelType::matmul) ? 1 : 6;
        // keep variant after the same-tier scalar parameters
        out.push_back(std::move(vs));
        std::stable_sort(out.begin(), out.end(),
                         [](const ParamSpec& a, const ParamSpec& b) {
                             return a.tier < b.tier;
                         });
    }
    return out;
}

void validate_config(const CandidateConfig& config) {
    if (!is_executable(config.kernel_type))
        throw ConfigError("no candidate variants for " +
                          to_string(config.kernel_type));
    if (config.schema_version != 1)
        throw ConfigError("unsupported schema_version");
    const auto& correct = variants_of(config.kernel_type);
    const bool known =
        std::find(correct.begin(), correct.end(), config.variant) !=
            correct.end() ||
        is_fixture_variant(config.variant);
    if (!known)
        throw ConfigError("unknown variant '" + config.variant + "' for " +
                          to_string(config.kernel_type));
    const auto legal = legal_params(config.kernel_type, config.variant);
    for (const auto& [key, val] : config.params) {
        if (std::find(legal.begin(), legal.end(), key) == legal.end())
            throw ConfigError("parameter '" + key + "' is not legal for " +
                              to_string(config.kernel_type) + "/" +
                              config.variant);
        const ParamDef* def = param_def(key);
        if (!def || std::find(def->domain->begin(), def->domain->end(), val) ==
                        def->domain->end())
            throw ConfigError("value '" + val + "' outside the domain of '" +
                              key + "'");
    }
    for (const auto& key : legal)
        if (!config.params.count(key))
            throw ConfigError("config missing parameter '" + key + "' for " +
                              config.variant);
}

CandidateConfig variant_config(KernelType k, const std::string& variant) {
    CandidateConfig c;
    c.kernel_type = k;
    c.variant = variant;
    for (const auto& p : legal_params(k, variant))
        c.params[p] = default_value(p);
    return c;
}

CandidateConfig default_config(KernelType k) {
    switch (k) {
        case KernelType::matmul: return variant_config(k, "tiled");
        case KernelType::softmax:
        case KernelType::cross_entropy:
        case KernelType::layernorm: return variant_config(k, "twopass");
        default: return variant_config(k, "basic");
    }
}

// ---------------------------------------------------------------------------
// Shape sweep tables
// ---------------------------------------------------------------------------

std::vector<SweepEntry> shape_sweep(KernelType k) {
    switch (k) {
        case KernelType::matmul:
            return {
                {"tiny", make_matmul_shape(128, 128, 128), "Minimum viable"},
                {"small", make_matmul_shape(512, 512, 512), "Small workload"},
                {"large", make_matmul_shape(2048, 2048, 2048), "Production-like"},
                {"xlarge", make_matmul_shape(4096, 4096, 4096), "Stress test"},
                {"tall", make_matmul_shape(8192, 1024, 1024), "Non-square"},
                {"deep_k", make_matmul_shape(1024, 1024, 8192),
                 "Large reduction dim"},
                {"llm_qkv", make_matmul_shape(4096, 4096, 512),
                 "Attention pattern"},
                {"llm_mlp", make_matmul_shape(4096, 11008, 4096),
                 "Feed-forward pattern"},
            };
        case KernelType::softmax:
            return {
                {"tiny", make_rows_shape(128, 128), "Minimum viable"},
                {"small", make_rows_shape(512, 512), "Small workload"},
                {"medium", make_rows_shape(2048, 2048), "Mid-size rows"},
                {"large", make_rows_shape(4096, 4096), "Production-like"},
                {"xlarge", make_rows_shape(8192, 8192), "Stress test"},
                {"tall", make_rows_shape(16384, 512), "Many short rows"},
                {"wide", make_rows_shape(512, 16384), "Few long rows"},
                {"attn_scores", make_rows_shape(4096, 1024),
                 "Attention score rows"},
            };
        case KernelType::layernorm:
            return {
                {"tiny", make_rows_shape(128, 128), "Minimum viable"},
                {"small", make_rows_shape(512, 512), "Small workload"},
                {"medium", make_rows_shape(2048, 2048), "Mid-size rows"},
                {"gpt_hidden", make_rows_shape(4096, 5120), "Hidden-state rows"},
                {"large", make_rows_shape(8192, 4096), "Production-like"},
                {"tall", make_rows_shape(16384, 768), "Many short rows"},
                {"wide", make_rows_shape(256, 10240), "Few long rows"},
                {"square", make_rows_shape(1024, 1024), "Balanced"},
            };
        case KernelType::rmsnorm:
            return {
                {"tiny", make_rows_shape(128, 128), "Minimum viable"},
                {"small", make_rows_shape(512, 512), "Small workload"},
                {"medium", make_rows_shape(4096, 4096), "Production-like"},
                {"large", make_rows_shape(8192, 4096), "LLM hidden rows"},
                {"xlarge", make_rows_shape(8192, 8192), "Stress test"},
                {"tall", make_rows_shape(16384, 512), "Many short rows"},
                {"mlp_rows", make_rows_shape(384, 11008), "Feed-forward rows"},
                {"square", make_rows_shape(1024, 4096), "Non-square"},
            };
        case KernelType::cross_entropy:
            return {
                {"tiny", make_ce_shape(128, 128), "Minimum viable"},
                {"small", make_ce_shape(512, 1024), "Small vocab"},
                {"medium", make_ce_shape(2048, 8192), "Mid vocab"},
                {"llama_vocab", make_ce_shape(2048, 32000), "32k vocabulary"},
                {"gpt2_vocab", make_ce_shape(1024, 50264), "GPT-2 vocabulary"},
                {"many_rows", make_ce_shape(8192, 1024), "Batch-heavy"},
                {"ultra_vocab", make_ce_shape(256, 128000), "128k vocabulary"},
                {"tiny_vocab", make_ce_shape(64, 1024), "Degenerate vocab"},
            };
        case KernelType::rotary_emb:
            return {
                {"tiny", make_bhsd_shape(1, 2, 128, 64), "Minimum viable"},
                {"small", make_bhsd_shape(1, 8, 512, 64), "Small workload"},
                {"medium", make_bhsd_shape(2, 16, 1024, 128), "Mid-size"},
                {"ctx2k", make_bhsd_shape(2, 32, 2048, 128), "2k context"},
                {"ctx4k", make_bhsd_shape(2, 32, 4096, 128), "4k context"},
                {"long_ctx", make_bhsd_shape(4, 8, 8192, 64), "Long context"},
                {"many_heads", make_bhsd_shape(8, 64, 256, 128), "Head-heavy"},
                {"wide_head", make_bhsd_shape(1, 4, 1024, 256), "Wide head dim"},
            };
        case KernelType::reduce:
            return {
                {"tiny", make_rows_shape(128, 128), "Minimum viable"},
                {"small", make_rows_shape(1024, 1024), "Small workload"},
                {"medium", make_rows_shape(4096, 4096), "Mid-size"},
                {"xlarge", make_rows_shape(8192, 8192), "Stress test"},
                {"batch_rows", make_rows_shape(16384, 4096), "Batch-heavy"},
                {"tall", make_rows_shape(65536, 256), "Many short rows"},
                {"wide", make_rows_shape(256, 65536), "Few long rows"},
                {"vectorsum", make_rows_shape(8, 1048576),
                 "Long single-row reduction"},
            };
        default:
            throw ConfigError("no sweep table for " + to_string(k));
    }
}

WorkloadShape smoke_shape(KernelType k) {
    switch (k) {
        case KernelType::matmul: return make_matmul_shape(128, 128, 128);
        case KernelType::cross_entropy: return make_ce_shape(128, 128);
        case KernelType::rotary_emb: return make_bhsd_shape(1, 2, 128, 64);
        default: return make_rows_shape(128, 128);
    }
}

std::vector<std::string> masked_dims(KernelType k) {
    switch (k) {
        case KernelType::matmul: return {"M", "N", "K"};
        case KernelType::cross_entropy: return {"V"};
        case KernelType::rotary_emb: return {"S"};
        default: return {"N"};
    }
}

// ---------------------------------------------------------------------------
// Input generation
// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Uniform in [0, 1), derived from raw bits so it is toolchain-independent.
double unit(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

double uniform(std::uint64_t& state, double lo, double hi) {
    return lo + (hi - lo) * unit(state);
}

std::uint64_t mix_seed(KernelType k, const WorkloadShape& shape, DType dtype,
                       std::uint64_t seed) {
    std::uint64_t s = seed ^ 0x6b79726e6c6f6f70ull;
    splitmix64(s);
    s ^= static_cast<std::uint64_t>(k) * 0x9e3779b97f4a7c15ull;
    splitmix64(s);
    s ^= static_cast<std::uint64_t>(dtype) + 0x1000u;
    for (const auto& [n, v] : shape.dims) {
        s ^= static_cast<std::uint64_t>(v) * 0x2545f4914f6cdd1dull;
        splitmix64(s);
    }
    return s;
}

void fill_uniform(TensorBuffer& buf, std::uint64_t& rng, double lo, double hi) {
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf.set(i, uniform(rng, lo, hi));
}

// Per-row boosted position: last row pins the dominant entry to the last
// column so remainder-dropping bugs are always observable at edge dims.
std::int64_t dominant_pos(std::int64_t row, std::int64_t rows,
                          std::int64_t cols, std::uint64_t salt) {
    if (row == rows - 1) return cols - 1;
    std::uint64_t s = salt ^ (static_cast<std::uint64_t>(row) * 0x9e3779b97f4a7c15ull);
    return static_cast<std::int64_t>(splitmix64(s) %
                                     static_cast<std::uint64_t>(cols));
}

}  // namespace

std::vector<TensorBuffer> make_inputs(KernelType k, const WorkloadShape& shape,
                                      DType dtype, std::uint64_t seed) {
    validate_shape(k, shape);
    std::uint64_t rng = mix_seed(k, shape, dtype, seed);
    switch (k) {
        case KernelType::matmul:
        case KernelType::fused_mlp: {
            const auto m = shape.at("M"), n = shape.at("N"), kk = shape.at("K");
            // keep outputs O(1): entries scale like K^(-1/4)
            const double h = std::pow(static_cast<double>(kk), -0.25);
            TensorBuffer a({m, kk}, dtype);
            fill_uniform(a, rng, -h, h);
            if (k == KernelType::matmul) {
                TensorBuffer b({kk, n}, dtype);
                fill_uniform(b, rng, -h, h);
                return {std::move(a), std::move(b)};
            }
            TensorBuffer wg({kk, n}, dtype), wu({kk, n}, dtype);
            fill_uniform(wg, rng, -h, h);
            fill_uniform(wu, rng, -h, h);
            std::vector<TensorBuffer> out;
            out.push_back(std::move(a));
            out.push_back(std::move(wg));
            out.push_back(std::move(wu));
            return out;
        }
        case KernelType::softmax: {
            const auto m = shape.at("M"), n = shape.at("N");
            TensorBuffer x({m, n}, dtype);
            fill_uniform(x, rng, -1.0, 1.0);
            const std::uint64_t salt = splitmix64(rng);
            for (std::int64_t r = 0; r < m; ++r) {
                const auto p = dominant_pos(r, m, n, salt);
                const std::size_t idx = static_cast<std::size_t>(r * n + p);
                x.set(idx, x.get(idx) + 10.0);
            }
            return {std::move(x)};
        }
        case KernelType::layernorm:
        case KernelType::rmsnorm: {
            TensorBuffer x({shape.at("M"), shape.at("N")}, dtype);
            fill_uniform(x, rng, -1.0, 1.0);
            return {std::move(x)};
        }
        case KernelType::reduce: {
            const auto m = shape.at("M"), n = shape.at("N");
            const double h = 1.0 / std::sqrt(static_cast<double>(n));
            TensorBuffer x({m, n}, dtype);
            fill_uniform(x, rng, -h, h);
            return {std::move(x)};
        }
        case KernelType::cross_entropy: {
            const auto m = shape.at("M"), v = shape.at("V");
            TensorBuffer logits({m, v}, dtype);
            fill_uniform(logits, rng, -1.0, 1.0);
            TensorBuffer targets({m}, DType::fp32);
            const std::uint64_t salt = splitmix64(rng);
            for (std::int64_t r = 0; r < m; ++r) {
                const auto t = dominant_pos(r, m, v, salt);
                const std::size_t idx = static_cast<std::size_t>(r * v + t);
                logits.set(idx, logits.get(idx) + 10.0);
                targets.set(static_cast<std::size_t>(r),
                            static_cast<double>(t));
            }
            std::vector<TensorBuffer> out;
            out.push_back(std::move(logits));
            out.push_back(std::move(targets));
            return out;
        }
        case KernelType::rotary_emb:
        case KernelType::flash_attn: {
            const auto b = shape.at("B"), h = shape.at("H"), s = shape.at("S"),
                       d = shape.at("D");
            if (k == KernelType::rotary_emb) {
                if (d % 2 != 0)
                    throw ShapeError("rotary head dim must be even");
                TensorBuffer x({b, h, s, d}, dtype);
                fill_uniform(x, rng, -1.0, 1.0);
                TensorBuffer cosb({s, d / 2}, dtype), sinb({s, d / 2}, dtype);
                for (std::int64_t pos = 0; pos < s; ++pos) {
                    for (std::int64_t d2 = 0; d2 < d / 2; ++d2) {
                        const double theta =
                            static_cast<double>(pos) *
                            std::pow(10000.0, -2.0 * static_cast<double>(d2) /
                                                  static_cast<double>(d));
                        const std::size_t idx =
                            static_cast<std::size_t>(pos * (d / 2) + d2);
                        cosb.set(idx, std::cos(theta));
                        sinb.set(idx, std::sin(theta));
                    }
                }
                std::vector<TensorBuffer> out;
                out.push_back(std::move(x));
                out.push_back(std::move(cosb));
                out.push_back(std::move(sinb));
                return out;
            }
            TensorBuffer q({b, h, s, d}, dtype), kx({b, h, s, d}, dtype),
                vx({b, h, s, d}, dtype);
            fill_uniform(q, rng, -1.0, 1.0);
            fill_uniform(kx, rng, -1.0, 1.0);
            fill_uniform(vx, rng, -1.0, 1.0);
            std::vector<TensorBuffer> out;
            out.push_back(std::move(q));
            out.push_back(std::move(kx));
            out.push_back(std::move(vx));
            return out;
        }
    }
    throw ConfigError("make_inputs: unsupported kernel type");
}

// ---------------------------------------------------------------------------
// Adversarial inputs
// ---------------------------------------------------------------------------

namespace {

// Largest constant whose exp stays representable in the dtype (softmax) or
// whose exp overflows the compute format without max subtraction.
double softmax_spike(DType d) {
    switch (d) {
        case DType::fp16: return 12.0;    // exp(12) > fp16 max
        case DType::bf16: return 89.0;    // exp(89) > fp32 max
        case DType::fp32: return 30000.0; // far beyond exp overflow
        case DType::fp64: return 1000.0;  // exp(1000) > fp64 max
    }
    return 89.0;
}

double ce_spike(DType d) { return d == DType::fp64 ? 710.0 : 90.0; }

// Large enough that squared magnitudes overflow the half-format range,
// small enough that fp32 product rounding stays inside the fp32 tolerance.
double rotary_scale(DType d) {
    return (d == DType::fp16 || d == DType::bf16) ? 40000.0 : 400.0;
}

}  // namespace

std::vector<AdversarialCase> adversarial_inputs(KernelType k,
                                                const WorkloadShape& shape,
                                                DType dtype) {
    validate_shape(k, shape);
    std::uint64_t rng = mix_seed(k, shape, dtype, 0xadu);
    std::vector<AdversarialCase> cases;
    switch (k) {
        case KernelType::softmax: {
            const auto m = shape.at("M"), n = shape.at("N");
            const double c = softmax_spike(dtype);
            TensorBuffer big({m, n}, dtype);
            for (std::size_t i = 0; i < big.size(); ++i) big.set(i, c);
            cases.push_back({"large_constant", {}});
            cases.back().inputs.push_back(std::move(big));

            TensorBuffer mixed({m, n}, dtype);
            for (std::size_t i = 0; i < mixed.size(); ++i)
                mixed.set(i, (i % 2 == 0) ? c : -c);
            cases.push_back({"mixed_large", {}});
            cases.back().inputs.push_back(std::move(mixed));
            return cases;
        }
        case KernelType::matmul: {
            const auto m = shape.at("M"), n = shape.at("N"), kk = shape.at("K");
            // Leading K entries hold exactly-cancelling +/-hi pairs whose
            // products dwarf the half-format range; the tail carries an O(1)
            // signal. Correct fp32 accumulation cancels the big terms
            // exactly; a half-precision accumulator saturates to inf.
            const double hi = 10000.0;
            const std::int64_t kbig = std::min<std::int64_t>(kk / 2, 32) & ~3ll;
            TensorBuffer a({m, kk}, dtype), b({kk, n}, dtype);
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t x = 0; x < kk; ++x)
                    a.set(static_cast<std::size_t>(i * kk + x),
                          x < kbig ? (x % 2 == 0 ? hi : -hi)
                                   : uniform(rng, -0.5, 0.5));
            for (std::int64_t x = 0; x < kk; ++x)
                for (std::int64_t j = 0; j < n; ++j)
                    b.set(static_cast<std::size_t>(x * n + j),
                          x < kbig ? hi : uniform(rng, -0.5, 0.5));
            cases.push_back({"cancelling_large", {}});
            cases.back().inputs.push_back(std::move(a));
            cases.back().inputs.push_back(std::move(b));

            // Mixed magnitudes whose products are all near 1.
            TensorBuffer a2({m, kk}, dtype), b2({kk, n}, dtype);
            for (std::size_t i = 0; i < a2.size(); ++i)
                a2.set(i, (i % 2 == 0) ? 1e4 : 1e-4);
            for (std::int64_t x = 0; x < kk; ++x)
                for (std::int64_t j = 0; j < n; ++j)
                    b2.set(static_cast<std::size_t>(x * n + j),
                           (x % 2 == 0) ? 1e-4 : 1e4);
            cases.push_back({"mixed_magnitude", {}});
            cases.back().inputs.push_back(std::move(a2));
            cases.back().inputs.push_back(std::move(b2));
            return cases;
        }
        case KernelType::layernorm:
        case KernelType::rmsnorm: {
            const auto m = shape.at("M"), n = shape.at("N");
            TensorBuffer cst({m, n}, dtype);
            for (std::size_t i = 0; i < cst.size(); ++i) cst.set(i, 6000.0);
            cases.push_back({"constant_rows", {}});
            cases.back().inputs.push_back(std::move(cst));

            TensorBuffer nz({m, n}, dtype);
            for (std::size_t i = 0; i < nz.size(); ++i) {
                const double delta =
                    (static_cast<double>(splitmix64(rng) % 5) - 2.0) * 8.0;
                nz.set(i, 6000.0 + delta);
            }
            cases.push_back({"near_zero_variance", {}});
            cases.back().inputs.push_back(std::move(nz));
            return cases;
        }
        case KernelType::cross_entropy: {
            const auto m = shape.at("M"), v = shape.at("V");
            const double spike = ce_spike(dtype);
            TensorBuffer logits({m, v}, dtype);
            fill_uniform(logits, rng, -1.0, 1.0);
            TensorBuffer targets({m}, DType::fp32);
            const std::uint64_t salt = splitmix64(rng);
            for (std::int64_t r = 0; r < m; ++r) {
                const auto t = dominant_pos(r, m, v, salt);
                logits.set(static_cast<std::size_t>(r * v + t), spike);
                targets.set(static_cast<std::size_t>(r),
                            static_cast<double>(t));
            }
            cases.push_back({"dominant_logit", {}});
            cases.back().inputs.push_back(std::move(logits));
            cases.back().inputs.push_back(std::move(targets));
            return cases;
        }
        case KernelType::reduce: {
            const auto m = shape.at("M"), n = shape.at("N");
            // ++-- blocks cancel exactly but transiently exceed the half
            // range, so a half-precision accumulator saturates.
            TensorBuffer x({m, n}, dtype);
            const double big = 40000.0;
            for (std::int64_t r = 0; r < m; ++r)
                for (std::int64_t i = 0; i < n; ++i) {
                    const double v = (i % 4 < 2) ? big : -big;
                    x.set(static_cast<std::size_t>(r * n + i),
                          (i < (n & ~3ll)) ? v : 0.0);
                }
            cases.push_back({"alternating_large", {}});
            cases.back().inputs.push_back(std::move(x));
            return cases;
        }
        case KernelType::rotary_emb: {
            const auto b = shape.at("B"), h = shape.at("H"), s = shape.at("S"),
                       d = shape.at("D");
            if (d % 2 != 0) throw ShapeError("rotary head dim must be even");
            const double base = rotary_scale(dtype);
            TensorBuffer x({b, h, s, d}, dtype);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const std::size_t pair = i / 2;
                const double mag =
                    base + static_cast<double>(pair % 5) * base * 0.0064;
                const double sign = (pair % 2 == 0)
                                        ? 1.0
                                        : ((i % 2 == 0) ? 1.0 : -1.0);
                x.set(i, sign * mag * (1.0 + 0.003 * static_cast<double>(i % 3)));
            }
            // 45-degree rotation maximizes cancellation between the two
            // products of each pair.
            TensorBuffer cosb({s, d / 2}, dtype), sinb({s, d / 2}, dtype);
            const double c45 = std::cos(0.25 * 3.14159265358979323846);
            for (std::size_t i = 0; i < cosb.size(); ++i) {
                cosb.set(i, c45);
                sinb.set(i, c45);
            }
            cases.push_back({"alternating_large", {}});
            cases.back().inputs.push_back(std::move(x));
            cases.back().inputs.push_back(std::move(cosb));
            cases.back().inputs.push_back(std::move(sinb));
            return cases;
        }
        default:
            throw ConfigError("no adversarial sets for " + to_string(k));
    }
}

}  // namespace kernelloop::zoo
