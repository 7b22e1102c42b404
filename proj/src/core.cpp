#include "kernelloop/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace kernelloop {

std::string to_string(DType d) {
    switch (d) {
        case DType::fp16: return "fp16";
        case DType::bf16: return "bf16";
        case DType::fp32: return "fp32";
        case DType::fp64: return "fp64";
    }
    return "?";
}

DType dtype_from_string(const std::string& s) {
    if (s == "fp16") return DType::fp16;
    if (s == "bf16") return DType::bf16;
    if (s == "fp32") return DType::fp32;
    if (s == "fp64") return DType::fp64;
    throw ParseError("unknown dtype: '" + s + "'");
}

bool within_tolerance(double a, double b, const Tolerance& tol) {
    if (std::isnan(a) || std::isnan(b)) return false;
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::abs(a - b) <= tol.atol + tol.rtol * std::abs(b);
}

Tolerance tolerance_for(DType d) {
    switch (d) {
        case DType::fp16: return {1e-2, 1e-3};
        case DType::bf16: return {2e-2, 1e-3};
        case DType::fp32: return {1e-4, 1e-5};
        case DType::fp64: return {1e-8, 1e-9};
    }
    return {1e-4, 1e-5};
}

Regime regime_of(KernelType k) {
    switch (k) {
        case KernelType::matmul:
        case KernelType::flash_attn:
        case KernelType::fused_mlp: return Regime::compute;
        default: return Regime::memory;
    }
}

Metric metric_of(KernelType k) {
    return regime_of(k) == Regime::compute ? Metric::tflops : Metric::gbps;
}

std::string to_string(KernelType k) {
    switch (k) {
        case KernelType::matmul: return "matmul";
        case KernelType::flash_attn: return "flash_attn";
        case KernelType::fused_mlp: return "fused_mlp";
        case KernelType::softmax: return "softmax";
        case KernelType::layernorm: return "layernorm";
        case KernelType::rmsnorm: return "rmsnorm";
        case KernelType::cross_entropy: return "cross_entropy";
        case KernelType::rotary_emb: return "rotary_emb";
        case KernelType::reduce: return "reduce";
    }
    return "?";
}

KernelType kernel_type_from_string(const std::string& s) {
    for (KernelType k : kAllKernelTypes)
        if (to_string(k) == s) return k;
    throw ParseError("unknown kernel type: '" + s + "'");
}

// ---------------------------------------------------------------------------
// WorkloadShape
// ---------------------------------------------------------------------------

std::int64_t WorkloadShape::at(const std::string& name) const {
    for (const auto& [n, v] : dims)
        if (n == name) return v;
    throw ShapeError("shape has no dimension named '" + name + "'");
}

bool WorkloadShape::has(const std::string& name) const {
    for (const auto& [n, v] : dims)
        if (n == name) return true;
    return false;
}

void WorkloadShape::set(const std::string& name, std::int64_t v) {
    for (auto& [n, old] : dims) {
        if (n == name) {
            old = v;
            return;
        }
    }
    dims.emplace_back(name, v);
}

std::string WorkloadShape::to_text() const {
    std::string out;
    for (const auto& [n, v] : dims) {
        if (!out.empty()) out += ',';
        out += n + "=" + std::to_string(v);
    }
    return out;
}

WorkloadShape WorkloadShape::from_text(const std::string& text) {
    WorkloadShape s;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        auto eq = part.find('=');
        if (eq == std::string::npos)
            throw ParseError("bad shape component '" + part + "'");
        std::string name = part.substr(0, eq);
        std::int64_t v = 0;
        try {
            v = std::stoll(part.substr(eq + 1));
        } catch (const std::exception&) {
            throw ParseError("bad shape value in '" + part + "'");
        }
        s.dims.emplace_back(name, v);
    }
    return s;
}

const std::vector<std::string>& dim_names(KernelType k) {
    static const std::vector<std::string> mnk = {"M", "N", "K"};
    static const std::vector<std::string> mn = {"M", "N"};
    static const std::vector<std::string> mv = {"M", "V"};
    static const std::vector<std::string> bhsd = {"B", "H", "S", "D"};
    switch (k) {
        case KernelType::matmul:
        case KernelType::fused_mlp: return mnk;
        case KernelType::cross_entropy: return mv;
        case KernelType::rotary_emb:
        case KernelType::flash_attn: return bhsd;
        default: return mn;
    }
}

void validate_shape(KernelType k, const WorkloadShape& shape) {
    const auto& names = dim_names(k);
    if (shape.dims.size() != names.size())
        throw ShapeError("shape for " + to_string(k) + " needs " +
                         std::to_string(names.size()) + " dims, got " +
                         std::to_string(shape.dims.size()));
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (shape.dims[i].first != names[i])
            throw ShapeError("shape for " + to_string(k) + " expects dim '" +
                             names[i] + "' at position " + std::to_string(i) +
                             ", got '" + shape.dims[i].first + "'");
        if (shape.dims[i].second < 1)
            throw ShapeError("dimension " + names[i] + " must be >= 1");
    }
}

WorkloadShape make_matmul_shape(std::int64_t m, std::int64_t n, std::int64_t k) {
    return WorkloadShape{{"M", m}, {"N", n}, {"K", k}};
}
WorkloadShape make_rows_shape(std::int64_t m, std::int64_t n) {
    return WorkloadShape{{"M", m}, {"N", n}};
}
WorkloadShape make_ce_shape(std::int64_t m, std::int64_t v) {
    return WorkloadShape{{"M", m}, {"V", v}};
}
WorkloadShape make_bhsd_shape(std::int64_t b, std::int64_t h, std::int64_t s,
                              std::int64_t d) {
    return WorkloadShape{{"B", b}, {"H", h}, {"S", s}, {"D", d}};
}

std::string leading_dim(KernelType k) {
    switch (k) {
        case KernelType::rotary_emb:
        case KernelType::flash_attn: return "S";
        default: return "M";
    }
}

WorkloadShape scale_leading_dim(KernelType k, const WorkloadShape& shape,
                                double factor) {
    WorkloadShape out = shape;
    const std::string lead = leading_dim(k);
    auto v = static_cast<std::int64_t>(
        std::ceil(static_cast<double>(shape.at(lead)) * factor));
    out.set(lead, std::max<std::int64_t>(1, v));
    return out;
}

KernelSpec KernelSpec::make(KernelType k, const WorkloadShape& primary,
                            DType dtype, std::string name) {
    validate_shape(k, primary);
    KernelSpec s;
    s.kernel_type = k;
    s.primary_shape = primary;
    s.half_shape = scale_leading_dim(k, primary, 0.5);
    s.double_shape = scale_leading_dim(k, primary, 2.0);
    s.dtype = dtype;
    s.tolerance = tolerance_for(dtype);
    s.name = name.empty() ? to_string(k) + "_" + primary.to_text() + "_" +
                                to_string(dtype)
                          : std::move(name);
    return s;
}

// ---------------------------------------------------------------------------
// Workload arithmetic
// ---------------------------------------------------------------------------

std::int64_t flops_of(KernelType k, const WorkloadShape& shape) {
    validate_shape(k, shape);
    switch (k) {
        case KernelType::matmul:
            return 2 * shape.at("M") * shape.at("N") * shape.at("K");
        case KernelType::fused_mlp:
            return 4 * shape.at("M") * shape.at("N") * shape.at("K") +
                   6 * shape.at("M") * shape.at("N");
        case KernelType::softmax: return 5 * shape.at("M") * shape.at("N");
        case KernelType::layernorm: return 8 * shape.at("M") * shape.at("N");
        case KernelType::rmsnorm: return 4 * shape.at("M") * shape.at("N");
        case KernelType::reduce: return shape.at("M") * shape.at("N");
        case KernelType::cross_entropy:
            return 5 * shape.at("M") * shape.at("V");
        case KernelType::rotary_emb:
            return 6 * shape.at("B") * shape.at("H") * shape.at("S") *
                   shape.at("D");
        case KernelType::flash_attn:
            return shape.at("B") * shape.at("H") * shape.at("S") *
                   shape.at("S") * (4 * shape.at("D") + 5);
    }
    return 0;
}

std::int64_t bytes_of(KernelType k, const WorkloadShape& shape, DType dtype) {
    validate_shape(k, shape);
    const std::int64_t sz = size_bytes(dtype);
    switch (k) {
        case KernelType::matmul: {
            auto m = shape.at("M"), n = shape.at("N"), kk = shape.at("K");
            return (m * kk + kk * n + m * n) * sz;
        }
        case KernelType::fused_mlp: {
            auto m = shape.at("M"), n = shape.at("N"), kk = shape.at("K");
            return (m * kk + 2 * kk * n + m * n) * sz;
        }
        case KernelType::softmax:
        case KernelType::layernorm:
        case KernelType::rmsnorm:
            return 2 * shape.at("M") * shape.at("N") * sz;
        case KernelType::reduce:
            return (shape.at("M") * shape.at("N") + shape.at("M")) * sz;
        case KernelType::cross_entropy:
            return shape.at("M") * shape.at("V") * sz;
        case KernelType::rotary_emb:
            return 2 * shape.at("B") * shape.at("H") * shape.at("S") *
                   shape.at("D") * sz;
        case KernelType::flash_attn:
            return 4 * shape.at("B") * shape.at("H") * shape.at("S") *
                   shape.at("D") * sz;
    }
    return 0;
}

RooflineStatus roofline(double flops, double bytes, double elapsed_seconds,
                        const HardwareSpec& hw) {
    if (flops <= 0 || bytes <= 0)
        throw DomainError("roofline requires positive flops and bytes");
    if (!(elapsed_seconds > 0))
        throw MeasurementError("roofline requires positive elapsed time");
    if (hw.peak_flops <= 0 || hw.peak_bandwidth <= 0)
        throw DomainError("hardware peaks must be positive");

    RooflineStatus st;
    st.arithmetic_intensity = flops / bytes;
    st.bound = st.arithmetic_intensity >= hw.ridge_point() ? Regime::compute
                                                           : Regime::memory;
    st.pct_of_peak = st.bound == Regime::compute
                         ? (flops / elapsed_seconds) / hw.peak_flops
                         : (bytes / elapsed_seconds) / hw.peak_bandwidth;
    return st;
}

}  // namespace kernelloop
