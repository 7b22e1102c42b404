#pragma once

// Flat row-major tensor storage with bit-exact emulation of fp16/bf16.
// Half-format values are computed in float and rounded to the 16-bit
// pattern on every store, so dtype-specific tolerances are exercised
// without hardware half support.

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <vector>

#include "kernelloop/core.hpp"

namespace kernelloop {

// Round-to-nearest-even conversions. Rounding double -> half format is
// defined as the double->float->16bit composition; every producer uses the
// same path so stored payloads are reproducible.
std::uint16_t float_to_half_bits(float f);
float half_bits_to_float(std::uint16_t h);
std::uint16_t float_to_bf16_bits(float f);
float bf16_bits_to_float(std::uint16_t b);

class TensorBuffer {
  public:
    TensorBuffer() = default;
    TensorBuffer(std::vector<std::int64_t> extents, DType dtype);

    static TensorBuffer zeros(std::vector<std::int64_t> extents, DType dtype) {
        return TensorBuffer(std::move(extents), dtype);
    }

    DType dtype() const { return dtype_; }
    const std::vector<std::int64_t>& extents() const { return extents_; }
    std::size_t size() const { return count_; }

    double get(std::size_t i) const;
    void set(std::size_t i, double v);

    // Raw storage, used for bitwise determinism checks.
    const std::byte* raw() const { return data_.data(); }
    std::size_t raw_size() const { return data_.size(); }
    bool bitwise_equal(const TensorBuffer& other) const {
        return dtype_ == other.dtype_ && extents_ == other.extents_ &&
               data_ == other.data_;
    }

    // Bulk conversion helpers for kernel working arrays.
    void to_float(float* dst) const;
    void to_double(double* dst) const;
    void from_float(const float* src);
    void from_double(const double* src);

    bool all_finite() const;

  private:
    std::vector<std::int64_t> extents_;
    DType dtype_ = DType::fp32;
    std::size_t count_ = 0;
    std::vector<std::byte> data_;
};

}  // namespace kernelloop
