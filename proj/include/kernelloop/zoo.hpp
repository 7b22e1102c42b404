#pragma once

// The kernel zoo: serial fp64 reference oracles for all nine kernel types,
// parameterized OpenMP candidate implementations for the seven executable
// ones, shape-sweep tables, adversarial input generators, and the
// CandidateConfig parameter space the optimization loop searches.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kernelloop/core.hpp"
#include "kernelloop/tensor.hpp"

namespace kernelloop::zoo {

// ---------------------------------------------------------------------------
// CandidateConfig
// ---------------------------------------------------------------------------

// A point in the search space. Serializes canonically (sorted keys, one
// key=value per line, trailing newline) so digests are stable.
struct CandidateConfig {
    KernelType kernel_type = KernelType::matmul;
    std::string variant;
    std::map<std::string, std::string> params;  // sorted by key
    int schema_version = 1;

    std::string serialize() const;
    static CandidateConfig parse(const std::string& text);

    // FNV-1a over the canonical serialization, as 16 hex chars.
    std::string digest() const;

    std::int64_t param_int(const std::string& key) const;
    std::string param_str(const std::string& key) const;

    bool operator==(const CandidateConfig& o) const {
        return kernel_type == o.kernel_type && variant == o.variant &&
               params == o.params && schema_version == o.schema_version;
    }
};

// Throws ConfigError unless the variant exists for the type, every param
// key is legal for that variant, and every value lies in its domain.
void validate_config(const CandidateConfig& config);

// The documented per-type starter configuration (matmul -> tiled with
// 32/32/32 tiles, row ops -> their plain stable variants).
CandidateConfig default_config(KernelType k);

// A fully-defaulted config for an arbitrary variant of a type.
CandidateConfig variant_config(KernelType k, const std::string& variant);

// ---------------------------------------------------------------------------
// Parameter space
// ---------------------------------------------------------------------------

struct ParamSpec {
    std::string name;
    std::vector<std::string> domain;  // legal values, search order
    int tier = 1;                     // playbook tier tag 1..6
};

// Executable (tunable) kernel types: everything except flash_attn and
// fused_mlp, which ship reference oracles and classifier entries only.
const std::vector<KernelType>& executable_types();
bool is_executable(KernelType k);

// Correct variants for a type, starter first. Fixture variants are listed
// separately: they are deliberately buggy and excluded from search.
const std::vector<std::string>& variants_of(KernelType k);
const std::vector<std::string>& fixture_variants();
bool is_fixture_variant(const std::string& variant);

// Legal parameters (with domains and tier tags) for one variant.
// Includes the pseudo-parameter "variant" whose domain is variants_of(k);
// its tier is 1 for matmul (tiling structure) and 6 elsewhere (algorithm
// swaps such as online softmax or Welford normalization).
std::vector<ParamSpec> enumerate_params(KernelType k,
                                        const std::string& variant);

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

// Input/output arity per type:
//   matmul:        A(M,K), B(K,N)            -> C(M,N)
//   softmax:       X(M,N)                    -> Y(M,N) row softmax
//   layernorm:     X(M,N)                    -> Y(M,N)
//   rmsnorm:       X(M,N)                    -> Y(M,N)
//   cross_entropy: logits(M,V), targets(M)   -> nll(M)   targets fp32 indices
//   rotary_emb:    X(B,H,S,D), cos(S,D/2), sin(S,D/2) -> Y(B,H,S,D)
//   reduce:        X(M,N)                    -> Y(M) row sums
//   flash_attn:    Q,K,V(B,H,S,D)            -> O(B,H,S,D)
//   fused_mlp:     X(M,K), Wg(K,N), Wu(K,N)  -> Y(M,N) = silu(XWg)*(XWu)
//
// Throws ShapeError on arity, extent, or dtype mismatches.
void validate_inputs(KernelType k, const WorkloadShape& shape,
                     const std::vector<TensorBuffer>& inputs, DType dtype);

// The reference computes in fp64 on a single thread and rounds to the
// request dtype at the end; it is the correctness oracle for everything.
TensorBuffer reference_execute(KernelType k, const WorkloadShape& shape,
                               const std::vector<TensorBuffer>& inputs,
                               DType out_dtype);

// Candidate kernels compute in fp32 (fp64 when the dtype is fp64 or
// accum_precision=widened) and round on store. Output is a pure function
// of (config, inputs, dtype): repeated calls yield identical bits.
TensorBuffer candidate_execute(const CandidateConfig& config,
                               const WorkloadShape& shape,
                               const std::vector<TensorBuffer>& inputs,
                               DType out_dtype);

// ---------------------------------------------------------------------------
// Input generation
// ---------------------------------------------------------------------------

// Deterministic pseudo-random inputs for a workload. Magnitudes are scaled
// per type so outputs stay O(1) and half-format rounding stays inside the
// dtype tolerances (matmul entries ~K^-1/4, reduce entries ~N^-1/2,
// softmax/cross_entropy rows carry one boosted dominant entry).
std::vector<TensorBuffer> make_inputs(KernelType k, const WorkloadShape& shape,
                                      DType dtype, std::uint64_t seed);

struct AdversarialCase {
    std::string name;
    std::vector<TensorBuffer> inputs;
};

// Stress inputs per type: softmax rows of large near-max-safe-exp constants
// and mixed +/- large rows; matmul extreme dynamic range with exactly
// cancelling +/- pairs; layernorm/rmsnorm constant and near-zero-variance
// rows; cross_entropy one dominant logit per row; reduce/rotary
// alternating-sign large values.
std::vector<AdversarialCase> adversarial_inputs(KernelType k,
                                                const WorkloadShape& shape,
                                                DType dtype);

// ---------------------------------------------------------------------------
// Shape sweep
// ---------------------------------------------------------------------------

struct SweepEntry {
    std::string name;
    WorkloadShape shape;
    std::string purpose;
};

// Fixed per-type sweep tables (8-10 entries each) covering tiny, standard,
// large, non-square, and workload-specific dimensions. Every dimension is a
// multiple of 8 so remainder-dropping bugs survive until the edge-case
// stage probes non-multiples.
std::vector<SweepEntry> shape_sweep(KernelType k);

// Smoke-test shape per type (matmul 128^3, row ops 128x128, ...).
WorkloadShape smoke_shape(KernelType k);

// Dimensions the edge-case stage substitutes (matmul M,N,K; row ops N;
// cross_entropy V; rotary S).
std::vector<std::string> masked_dims(KernelType k);

}  // namespace kernelloop::zoo
