#include "kernelloop/tensor.hpp"

#include <bit>
#include <cmath>

namespace kernelloop {

std::uint16_t float_to_half_bits(float f) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    const std::uint32_t sign = (bits >> 16) & 0x8000u;
    const std::uint32_t abs = bits & 0x7FFFFFFFu;

    if (abs >= 0x7F800000u) {  // inf or nan
        if (abs > 0x7F800000u) return static_cast<std::uint16_t>(sign | 0x7E00u);
        return static_cast<std::uint16_t>(sign | 0x7C00u);
    }
    if (abs >= 0x47800000u)  // >= 65536: overflows half range
        return static_cast<std::uint16_t>(sign | 0x7C00u);
    if (abs >= 0x38800000u) {  // normal half
        std::uint32_t mant = abs + 0xC8000000u;  // rebias exponent 127 -> 15
        // round to nearest even on the 13 dropped bits
        std::uint32_t rounded = (mant + 0xFFFu + ((mant >> 13) & 1u)) >> 13;
        return static_cast<std::uint16_t>(sign | rounded);
    }
    if (abs >= 0x33000000u) {  // subnormal half
        // drop = -E - 1 bits of the 24-bit significand, rounding to even
        const std::uint32_t drop = 126u - (abs >> 23);
        const std::uint32_t mant = (abs & 0x7FFFFFu) | 0x800000u;
        std::uint32_t result = mant >> drop;
        const std::uint32_t rem = mant & ((1u << drop) - 1u);
        const std::uint32_t half = 1u << (drop - 1);
        if (rem > half || (rem == half && (result & 1u))) ++result;
        return static_cast<std::uint16_t>(sign | result);
    }
    return static_cast<std::uint16_t>(sign);  // underflow to zero
}

float half_bits_to_float(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
    const std::uint32_t exp = (h >> 10) & 0x1Fu;
    const std::uint32_t mant = h & 0x3FFu;

    if (exp == 0x1Fu) {
        std::uint32_t bits = sign | 0x7F800000u | (mant << 13);
        return std::bit_cast<float>(bits);
    }
    if (exp == 0) {
        if (mant == 0) return std::bit_cast<float>(sign);
        // normalize subnormal
        int e = -1;
        std::uint32_t m = mant;
        do {
            m <<= 1;
            ++e;
        } while ((m & 0x400u) == 0);
        std::uint32_t bits =
            sign | ((112u - static_cast<std::uint32_t>(e)) << 23) |
            ((m & 0x3FFu) << 13);
        return std::bit_cast<float>(bits);
    }
    std::uint32_t bits = sign | ((exp + 112u) << 23) | (mant << 13);
    return std::bit_cast<float>(bits);
}

std::uint16_t float_to_bf16_bits(float f) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    if ((bits & 0x7FFFFFFFu) > 0x7F800000u) return 0x7FC0u;  // quiet nan
    const std::uint32_t lsb = (bits >> 16) & 1u;
    bits += 0x7FFFu + lsb;
    return static_cast<std::uint16_t>(bits >> 16);
}

float bf16_bits_to_float(std::uint16_t b) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(b) << 16);
}

TensorBuffer::TensorBuffer(std::vector<std::int64_t> extents, DType dtype)
    : extents_(std::move(extents)), dtype_(dtype) {
    std::size_t n = 1;
    for (auto e : extents_) {
        if (e < 1) throw ShapeError("tensor extent must be >= 1");
        n *= static_cast<std::size_t>(e);
    }
    count_ = n;
    data_.assign(n * static_cast<std::size_t>(size_bytes(dtype)),
                 std::byte{0});
}

double TensorBuffer::get(std::size_t i) const {
    switch (dtype_) {
        case DType::fp16: {
            std::uint16_t h;
            std::memcpy(&h, data_.data() + i * 2, 2);
            return half_bits_to_float(h);
        }
        case DType::bf16: {
            std::uint16_t b;
            std::memcpy(&b, data_.data() + i * 2, 2);
            return bf16_bits_to_float(b);
        }
        case DType::fp32: {
            float f;
            std::memcpy(&f, data_.data() + i * 4, 4);
            return f;
        }
        case DType::fp64: {
            double d;
            std::memcpy(&d, data_.data() + i * 8, 8);
            return d;
        }
    }
    return 0.0;
}

void TensorBuffer::set(std::size_t i, double v) {
    switch (dtype_) {
        case DType::fp16: {
            std::uint16_t h = float_to_half_bits(static_cast<float>(v));
            std::memcpy(data_.data() + i * 2, &h, 2);
            return;
        }
        case DType::bf16: {
            std::uint16_t b = float_to_bf16_bits(static_cast<float>(v));
            std::memcpy(data_.data() + i * 2, &b, 2);
            return;
        }
        case DType::fp32: {
            float f = static_cast<float>(v);
            std::memcpy(data_.data() + i * 4, &f, 4);
            return;
        }
        case DType::fp64: {
            std::memcpy(data_.data() + i * 8, &v, 8);
            return;
        }
    }
}

void TensorBuffer::to_float(float* dst) const {
    switch (dtype_) {
        case DType::fp16: {
            const std::uint16_t* src =
                reinterpret_cast<const std::uint16_t*>(data_.data());
            for (std::size_t i = 0; i < count_; ++i)
                dst[i] = half_bits_to_float(src[i]);
            return;
        }
        case DType::bf16: {
            const std::uint16_t* src =
                reinterpret_cast<const std::uint16_t*>(data_.data());
            for (std::size_t i = 0; i < count_; ++i)
                dst[i] = bf16_bits_to_float(src[i]);
            return;
        }
        case DType::fp32:
            std::memcpy(dst, data_.data(), count_ * sizeof(float));
            return;
        case DType::fp64: {
            const double* src = reinterpret_cast<const double*>(data_.data());
            for (std::size_t i = 0; i < count_; ++i)
                dst[i] = static_cast<float>(src[i]);
            return;
        }
    }
}

void TensorBuffer::to_double(double* dst) const {
    if (dtype_ == DType::fp64) {
        std::memcpy(dst, data_.data(), count_ * sizeof(double));
        return;
    }
    for (std::size_t i = 0; i < count_; ++i) dst[i] = get(i);
}

void TensorBuffer::from_float(const float* src) {
    switch (dtype_) {
        case DType::fp16: {
            std::uint16_t* dst = reinterpret_cast<std::uint16_t*>(data_.data());
            for (std::size_t i = 0; i < count_; ++i)
                dst[i] = float_to_half_bits(src[i]);
            return;
        }
        case DType::bf16: {
            std::uint16_t* dst = reinterpret_cast<std::uint16_t*>(data_.data());
            for (std::size_t i = 0; i < count_; ++i)
                dst[i] = float_to_bf16_bits(src[i]);
            return;
        }
        case DType::fp32:
            std::memcpy(data_.data(), src, count_ * sizeof(float));
            return;
        case DType::fp64: {
            double* dst = reinterpret_cast<double*>(data_.data());
            for (std::size_t i = 0; i < count_; ++i) dst[i] = src[i];
            return;
        }
    }
}

void TensorBuffer::from_double(const double* src) {
    if (dtype_ == DType::fp64) {
        std::memcpy(data_.data(), src, count_ * sizeof(double));
        return;
    }
    for (std::size_t i = 0; i < count_; ++i) set(i, src[i]);
}

bool TensorBuffer::all_finite() const {
    for (std::size_t i = 0; i < count_; ++i)
        if (!std::isfinite(get(i))) return false;
    return true;
}

}  // namespace kernelloop
