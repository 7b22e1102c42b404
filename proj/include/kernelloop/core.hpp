#pragma once

// Core domain types and workload arithmetic shared by every module:
// dtypes and tolerances, kernel classification, FLOP/byte formulas, and
// roofline math.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kernelloop {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct ShapeError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct MeasurementError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// DType
// ---------------------------------------------------------------------------

enum class DType { fp16, bf16, fp32, fp64 };

constexpr int size_bytes(DType d) {
    switch (d) {
        case DType::fp16: return 2;
        case DType::bf16: return 2;
        case DType::fp32: return 4;
        case DType::fp64: return 8;
    }
    return 0;
}

std::string to_string(DType d);
DType dtype_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Tolerance
// ---------------------------------------------------------------------------

struct Tolerance {
    double atol = 0.0;
    double rtol = 0.0;
};

// Comparison rule used everywhere: |a - b| <= atol + rtol * |b|,
// with b the reference value.
bool within_tolerance(double a, double b, const Tolerance& tol);

// fp16 -> (1e-2, 1e-3); bf16 -> (2e-2, 1e-3); fp32 -> (1e-4, 1e-5);
// fp64 -> (1e-8, 1e-9).
Tolerance tolerance_for(DType d);

// ---------------------------------------------------------------------------
// KernelType
// ---------------------------------------------------------------------------

enum class KernelType {
    matmul,
    flash_attn,
    fused_mlp,
    softmax,
    layernorm,
    rmsnorm,
    cross_entropy,
    rotary_emb,
    reduce,
};

enum class Regime { compute, memory };
enum class Metric { tflops, gbps };

// matmul / flash_attn / fused_mlp are compute-bound and scored in FLOP/s;
// everything else is memory-bound and scored in byte/s.
Regime regime_of(KernelType k);
Metric metric_of(KernelType k);

std::string to_string(KernelType k);
KernelType kernel_type_from_string(const std::string& s);

constexpr KernelType kAllKernelTypes[] = {
    KernelType::matmul,       KernelType::flash_attn, KernelType::fused_mlp,
    KernelType::softmax,      KernelType::layernorm,  KernelType::rmsnorm,
    KernelType::cross_entropy, KernelType::rotary_emb, KernelType::reduce,
};

// ---------------------------------------------------------------------------
// WorkloadShape
// ---------------------------------------------------------------------------

// Named integer dimensions in a canonical per-type order:
//   matmul/fused_mlp: M,N,K   row ops/reduce: M,N   cross_entropy: M,V
//   rotary_emb/flash_attn: B,H,S,D
struct WorkloadShape {
    std::vector<std::pair<std::string, std::int64_t>> dims;

    WorkloadShape() = default;
    WorkloadShape(std::initializer_list<std::pair<std::string, std::int64_t>> d)
        : dims(d) {}

    std::int64_t at(const std::string& name) const;
    bool has(const std::string& name) const;
    void set(const std::string& name, std::int64_t v);

    // "M=128,N=256" form used by every file format.
    std::string to_text() const;
    static WorkloadShape from_text(const std::string& text);

    bool operator==(const WorkloadShape& o) const { return dims == o.dims; }
};

// The dimension names expected for each kernel type, in canonical order.
const std::vector<std::string>& dim_names(KernelType k);

// Throws ShapeError if the shape's dimension names do not match the type's
// or any dimension is < 1.
void validate_shape(KernelType k, const WorkloadShape& shape);

WorkloadShape make_matmul_shape(std::int64_t m, std::int64_t n, std::int64_t k);
WorkloadShape make_rows_shape(std::int64_t m, std::int64_t n);  // row ops, reduce
WorkloadShape make_ce_shape(std::int64_t m, std::int64_t v);
WorkloadShape make_bhsd_shape(std::int64_t b, std::int64_t h, std::int64_t s,
                              std::int64_t d);  // rotary, flash_attn

// Leading (batch-like) dimension scaled for half/double variants:
// matmul/fused_mlp M, row ops M, cross_entropy M, rotary/flash_attn S.
std::string leading_dim(KernelType k);
WorkloadShape scale_leading_dim(KernelType k, const WorkloadShape& shape,
                                double factor);

// ---------------------------------------------------------------------------
// KernelSpec
// ---------------------------------------------------------------------------

struct KernelSpec {
    KernelType kernel_type = KernelType::matmul;
    WorkloadShape primary_shape;
    WorkloadShape half_shape;    // leading dim * 0.5, rounded up to >= 1
    WorkloadShape double_shape;  // leading dim * 2
    DType dtype = DType::fp32;
    Tolerance tolerance;
    std::string name;

    static KernelSpec make(KernelType k, const WorkloadShape& primary,
                           DType dtype, std::string name = "");
};

// ---------------------------------------------------------------------------
// Workload arithmetic
// ---------------------------------------------------------------------------

// Canonical FLOP counts. matmul = 2*M*N*K. Row-wise ops use fixed per-type
// constants: softmax 5*M*N, layernorm 8*M*N, rmsnorm 4*M*N, reduce 1*M*N,
// cross_entropy 5*M*V, rotary 6*B*H*S*D. flash_attn = B*H*S*S*(4*D + 5) and
// fused_mlp = 4*M*N*K + 6*M*N are project conventions (two GEMMs plus the
// softmax / activation epilogue).
std::int64_t flops_of(KernelType k, const WorkloadShape& shape);

// Main-memory traffic model. matmul = (M*K + K*N + M*N)*size; row-wise ops
// 2*M*N*size (read + write, parameter vectors negligible); cross_entropy =
// M*V*size (logits read dominates); reduce = (M*N + M)*size; rotary =
// 2*B*H*S*D*size; flash_attn = 4*B*H*S*D*size; fused_mlp =
// (M*K + 2*K*N + M*N)*size.
std::int64_t bytes_of(KernelType k, const WorkloadShape& shape, DType dtype);

// ---------------------------------------------------------------------------
// Hardware + roofline
// ---------------------------------------------------------------------------

enum class HwSource { static_db, calibrated };

struct HardwareSpec {
    std::string name;
    double peak_flops = 0.0;      // FLOP/s at the benchmark dtype
    double peak_bandwidth = 0.0;  // bytes/s
    HwSource source = HwSource::static_db;

    double ridge_point() const { return peak_flops / peak_bandwidth; }
};

struct RooflineStatus {
    double arithmetic_intensity = 0.0;  // FLOP/byte
    Regime bound = Regime::memory;
    double pct_of_peak = 0.0;
};

// bound = compute iff AI >= ridge point (ties classify compute-bound);
// pct_of_peak measured against the bound-appropriate peak.
RooflineStatus roofline(double flops, double bytes, double elapsed_seconds,
                        const HardwareSpec& hw);

}  // namespace kernelloop
