// Parameterized candidate kernels for the seven executable types, plus the
// deliberately buggy fixture variants the harness acceptance tests rely on.
// Candidates compute in fp32 (fp64 for fp64 workloads or widened
// accumulation), parallelize across rows with OpenMP, and round to the
// request dtype on every buffer store.

#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kernelloop/zoo.hpp"

namespace kernelloop::zoo {

void validate_inputs(KernelType k, const WorkloadShape& shape,
                     const std::vector<TensorBuffer>& inputs, DType dtype);

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kHalfRangeMax = 65504.0;  // largest finite fp16 value

std::atomic<std::uint64_t> g_racy_counter{0};

// ---------------------------------------------------------------------------
// Decoded tuning parameters
// ---------------------------------------------------------------------------

struct RunParams {
    std::int64_t tile_m = 32, tile_n = 32, tile_k = 32;
    int vw = 1;
    int unroll = 1;
    int workers = 1;
    bool widened = false;
    bool pairwise = false;
};

RunParams decode(const CandidateConfig& c) {
    RunParams p;
    auto geti = [&](const char* key, std::int64_t dflt) {
        auto it = c.params.find(key);
        return it == c.params.end() ? dflt : std::stoll(it->second);
    };
    p.tile_m = geti("tile_m", 32);
    p.tile_n = geti("tile_n", 32);
    p.tile_k = geti("tile_k", 32);
    p.vw = static_cast<int>(geti("vector_width", 1));
    p.unroll = static_cast<int>(geti("unroll", 1));
    p.workers = static_cast<int>(geti("worker_count", 1));
    auto it = c.params.find("accum_precision");
    p.widened = it != c.params.end() && it->second == "widened";
    it = c.params.find("reduction_order");
    p.pairwise = it != c.params.end() && it->second == "pairwise_tree";
    return p;
}

// ---------------------------------------------------------------------------
// Span conversion between buffer storage and working arrays
// ---------------------------------------------------------------------------

template <typename T>
void load_span(const TensorBuffer& b, std::size_t off, std::size_t cnt,
               T* dst) {
    switch (b.dtype()) {
        case DType::fp16: {
            const std::uint16_t* src =
                reinterpret_cast<const std::uint16_t*>(b.raw()) + off;
            for (std::size_t i = 0; i < cnt; ++i)
                dst[i] = static_cast<T>(half_bits_to_float(src[i]));
            return;
        }
        case DType::bf16: {
            const std::uint16_t* src =
                reinterpret_cast<const std::uint16_t*>(b.raw()) + off;
            for (std::size_t i = 0; i < cnt; ++i)
                dst[i] = static_cast<T>(bf16_bits_to_float(src[i]));
            return;
        }
        case DType::fp32: {
            const float* src = reinterpret_cast<const float*>(b.raw()) + off;
            for (std::size_t i = 0; i < cnt; ++i)
                dst[i] = static_cast<T>(src[i]);
            return;
        }
        case DType::fp64: {
            const double* src = reinterpret_cast<const double*>(b.raw()) + off;
            for (std::size_t i = 0; i < cnt; ++i)
                dst[i] = static_cast<T>(src[i]);
            return;
        }
    }
}

template <typename T>
void store_span(TensorBuffer& b, std::size_t off, std::size_t cnt,
                const T* src) {
    // const_cast-free path: TensorBuffer exposes set(), but conversion loops
    // per dtype are much faster for large rows.
    switch (b.dtype()) {
        case DType::fp16: {
            std::uint16_t* dst =
                reinterpret_cast<std::uint16_t*>(const_cast<std::byte*>(b.raw())) +
                off;
            for (std::size_t i = 0; i < cnt; ++i)
                dst[i] = float_to_half_bits(static_cast<float>(src[i]));
            return;
        }
        case DType::bf16: {
            std::uint16_t* dst =
                reinterpret_cast<std::uint16_t*>(const_cast<std::byte*>(b.raw())) +
                off;
            for (std::size_t i = 0; i < cnt; ++i)
                dst[i] = float_to_bf16_bits(static_cast<float>(src[i]));
            return;
        }
        case DType::fp32: {
            float* dst =
                reinterpret_cast<float*>(const_cast<std::byte*>(b.raw())) + off;
            for (std::size_t i = 0; i < cnt; ++i)
                dst[i] = static_cast<float>(src[i]);
            return;
        }
        case DType::fp64: {
            double* dst =
                reinterpret_cast<double*>(const_cast<std::byte*>(b.raw())) + off;
            for (std::size_t i = 0; i < cnt; ++i)
                dst[i] = static_cast<double>(src[i]);
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// Row-range parallelism. Rows are independent and each row's arithmetic is
// identical regardless of which thread runs it, so results are bitwise
// stable for any team size.
// ---------------------------------------------------------------------------

template <typename Fn>
void parallel_range(std::int64_t n, int workers, Fn&& fn) {
#ifdef _OPENMP
    if (workers > 1 && n > 1) {
#pragma omp parallel num_threads(workers)
        {
            const int nt = omp_get_num_threads();
            const int tid = omp_get_thread_num();
            const std::int64_t chunk = (n + nt - 1) / nt;
            const std::int64_t lo = std::min<std::int64_t>(n, tid * chunk);
            const std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
            if (lo < hi) fn(lo, hi);
        }
        return;
    }
#endif
    (void)workers;
    fn(0, n);
}

// ---------------------------------------------------------------------------
// Row reductions: interleaved lanes (the SIMD analog) or a pairwise tree.
// ---------------------------------------------------------------------------

template <int L, typename AccT, typename Fn>
AccT lane_reduce(std::int64_t n, Fn&& term) {
    if constexpr (L == 1) {
        AccT acc(0);
        for (std::int64_t i = 0; i < n; ++i) acc += term(i);
        return acc;
    } else {
        AccT acc[L] = {};
        const std::int64_t groups = n / L;
        for (std::int64_t g = 0; g < groups; ++g) {
            const std::int64_t base = g * L;
            for (int l = 0; l < L; ++l) acc[l] += term(base + l);
        }
        for (std::int64_t i = groups * L; i < n; ++i) acc[0] += term(i);
        AccT total = acc[0];
        for (int l = 1; l < L; ++l) total += acc[l];
        return total;
    }
}

template <typename AccT, typename Fn>
AccT row_reduce(std::int64_t n, int lanes, bool pairwise,
                std::vector<AccT>& scratch, Fn&& term) {
    if (pairwise) {
        scratch.resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i)
            scratch[static_cast<std::size_t>(i)] = term(i);
        std::int64_t len = n;
        while (len > 1) {
            const std::int64_t half = len / 2;
            for (std::int64_t i = 0; i < half; ++i)
                scratch[static_cast<std::size_t>(i)] =
                    scratch[static_cast<std::size_t>(2 * i)] +
                    scratch[static_cast<std::size_t>(2 * i + 1)];
            std::int64_t next = half;
            if (len % 2) scratch[static_cast<std::size_t>(next++)] =
                scratch[static_cast<std::size_t>(len - 1)];
            len = next;
        }
        return len == 1 ? scratch[0] : AccT(0);
    }
    switch (lanes) {
        case 2: return lane_reduce<2, AccT>(n, term);
        case 4: return lane_reduce<4, AccT>(n, term);
        case 8: return lane_reduce<8, AccT>(n, term);
        default: return lane_reduce<1, AccT>(n, term);
    }
}

// Emulates an accumulator with fp16 dynamic range but full mantissa:
// saturates to infinity past the half-format maximum. Used by the
// overflow_naive fixtures.
template <typename T>
T half_range(T v) {
    if (std::abs(v) > T(kHalfRangeMax))
        return std::copysign(std::numeric_limits<T>::infinity(), v);
    return v;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

template <typename InT, typename AccT>
void matmul_naive(const InT* a, const InT* b, AccT* c, std::int64_t m,
                  std::int64_t n, std::int64_t k, int workers) {
    parallel_range(m, workers, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
            for (std::int64_t j = 0; j < n; ++j) {
                AccT acc(0);
                for (std::int64_t x = 0; x < k; ++x)
                    acc += static_cast<AccT>(a[i * k + x]) *
                           static_cast<AccT>(b[x * n + j]);
                c[i * n + j] = acc;
            }
    });
}

// Cache-blocked with an a-broadcast inner loop; unroll groups k-steps into
// a small summation tree before touching the C row.
template <typename InT, typename AccT, int U>
void matmul_tiled(const InT* a, const InT* b, AccT* c, std::int64_t m,
                  std::int64_t n, std::int64_t k, const RunParams& p) {
    parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i0 = lo; i0 < hi; i0 += p.tile_m) {
            const std::int64_t iend = std::min(hi, i0 + p.tile_m);
            for (std::int64_t x0 = 0; x0 < k; x0 += p.tile_k) {
                const std::int64_t xend = std::min(k, x0 + p.tile_k);
                for (std::int64_t j0 = 0; j0 < n; j0 += p.tile_n) {
                    const std::int64_t jend = std::min(n, j0 + p.tile_n);
                    for (std::int64_t i = i0; i < iend; ++i) {
                        AccT* crow = c + i * n;
                        std::int64_t x = x0;
                        for (; x + U <= xend; x += U) {
                            AccT av[U];
                            for (int u = 0; u < U; ++u)
                                av[u] = static_cast<AccT>(a[i * k + x + u]);
                            for (std::int64_t j = j0; j < jend; ++j) {
                                AccT t = av[0] * static_cast<AccT>(b[x * n + j]);
                                for (int u = 1; u < U; ++u)
                                    t += av[u] *
                                         static_cast<AccT>(b[(x + u) * n + j]);
                                crow[j] += t;
                            }
                        }
                        for (; x < xend; ++x) {
                            const AccT av = static_cast<AccT>(a[i * k + x]);
                            for (std::int64_t j = j0; j < jend; ++j)
                                crow[j] += av * static_cast<AccT>(b[x * n + j]);
                        }
                    }
                }
            }
        }
    });
}

// Register-blocked: a strip of VW output columns stays in local
// accumulators across the whole k-tile.
template <typename InT, typename AccT, int VW, int U>
void matmul_tiled_vec(const InT* a, const InT* b, AccT* c, std::int64_t m,
                      std::int64_t n, std::int64_t k, const RunParams& p) {
    parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i0 = lo; i0 < hi; i0 += p.tile_m) {
            const std::int64_t iend = std::min(hi, i0 + p.tile_m);
            for (std::int64_t x0 = 0; x0 < k; x0 += p.tile_k) {
                const std::int64_t xend = std::min(k, x0 + p.tile_k);
                for (std::int64_t j0 = 0; j0 < n; j0 += p.tile_n) {
                    const std::int64_t jend = std::min(n, j0 + p.tile_n);
                    for (std::int64_t i = i0; i < iend; ++i) {
                        AccT* crow = c + i * n;
                        const InT* arow = a + i * k;
                        std::int64_t j = j0;
                        for (; j + VW <= jend; j += VW) {
                            AccT acc[VW];
                            for (int l = 0; l < VW; ++l) acc[l] = crow[j + l];
                            std::int64_t x = x0;
                            for (; x + U <= xend; x += U) {
                                for (int l = 0; l < VW; ++l) {
                                    AccT t = static_cast<AccT>(arow[x]) *
                                             static_cast<AccT>(b[x * n + j + l]);
                                    for (int u = 1; u < U; ++u)
                                        t += static_cast<AccT>(arow[x + u]) *
                                             static_cast<AccT>(
                                                 b[(x + u) * n + j + l]);
                                    acc[l] += t;
                                }
                            }
                            for (; x < xend; ++x)
                                for (int l = 0; l < VW; ++l)
                                    acc[l] += static_cast<AccT>(arow[x]) *
                                              static_cast<AccT>(b[x * n + j + l]);
                            for (int l = 0; l < VW; ++l) crow[j + l] = acc[l];
                        }
                        for (; j < jend; ++j) {
                            AccT acc = crow[j];
                            for (std::int64_t x = x0; x < xend; ++x)
                                acc += static_cast<AccT>(arow[x]) *
                                       static_cast<AccT>(b[x * n + j]);
                            crow[j] = acc;
                        }
                    }
                }
            }
        }
    });
}

template <typename InT, typename AccT>
TensorBuffer run_matmul(const std::string& variant, const RunParams& p,
                        const WorkloadShape& shape,
                        const std::vector<TensorBuffer>& inputs, DType out) {
    const auto m = shape.at("M"), n = shape.at("N"), k = shape.at("K");
    std::vector<InT> a(inputs[0].size()), b(inputs[1].size());
    load_span(inputs[0], 0, a.size(), a.data());
    load_span(inputs[1], 0, b.size(), b.data());
    std::vector<AccT> c(static_cast<std::size_t>(m * n), AccT(0));

    if (variant == "naive") {
        matmul_naive(a.data(), b.data(), c.data(), m, n, k, p.workers);
    } else if (variant == "tiled") {
        switch (p.unroll) {
            case 2: matmul_tiled<InT, AccT, 2>(a.data(), b.data(), c.data(), m, n, k, p); break;
            case 4: matmul_tiled<InT, AccT, 4>(a.data(), b.data(), c.data(), m, n, k, p); break;
            default: matmul_tiled<InT, AccT, 1>(a.data(), b.data(), c.data(), m, n, k, p); break;
        }
    } else {  // tiled_vectorized
        auto dispatch_u = [&](auto vw_tag) {
            constexpr int VW = decltype(vw_tag)::value;
            switch (p.unroll) {
                case 2: matmul_tiled_vec<InT, AccT, VW, 2>(a.data(), b.data(), c.data(), m, n, k, p); break;
                case 4: matmul_tiled_vec<InT, AccT, VW, 4>(a.data(), b.data(), c.data(), m, n, k, p); break;
                default: matmul_tiled_vec<InT, AccT, VW, 1>(a.data(), b.data(), c.data(), m, n, k, p); break;
            }
        };
        switch (p.vw) {
            case 2: dispatch_u(std::integral_constant<int, 2>{}); break;
            case 4: dispatch_u(std::integral_constant<int, 4>{}); break;
            case 8: dispatch_u(std::integral_constant<int, 8>{}); break;
            default: dispatch_u(std::integral_constant<int, 1>{}); break;
        }
    }
    TensorBuffer outb({m, n}, out);
    store_span(outb, 0, c.size(), c.data());
    return outb;
}

// ---------------------------------------------------------------------------
// Row-wise kernels
// ---------------------------------------------------------------------------

template <typename InT, typename AccT>
TensorBuffer run_softmax(const std::string& variant, const RunParams& p,
                         const WorkloadShape& shape,
                         const std::vector<TensorBuffer>& inputs, DType out) {
    const auto m = shape.at("M"), n = shape.at("N");
    TensorBuffer outb({m, n}, out);
    parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<InT> row(static_cast<std::size_t>(n));
        std::vector<AccT> e(static_cast<std::size_t>(n));
        std::vector<AccT> scratch;
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::size_t off = static_cast<std::size_t>(r * n);
            load_span(inputs[0], off, row.size(), row.data());
            AccT denom(0);
            AccT mx;
            if (variant == "online") {
                // single pass keeping a running max and rescaled sum per lane
                AccT lmx[8], lsum[8];
                const int L = p.vw;
                for (int l = 0; l < L; ++l) {
                    lmx[l] = -std::numeric_limits<AccT>::infinity();
                    lsum[l] = AccT(0);
                }
                const std::int64_t groups = n / L;
                for (std::int64_t g = 0; g < groups; ++g)
                    for (int l = 0; l < L; ++l) {
                        const AccT x = static_cast<AccT>(row[g * L + l]);
                        if (x > lmx[l]) {
                            lsum[l] = lsum[l] * std::exp(lmx[l] - x) + AccT(1);
                            lmx[l] = x;
                        } else {
                            lsum[l] += std::exp(x - lmx[l]);
                        }
                    }
                for (std::int64_t i = groups * L; i < n; ++i) {
                    const AccT x = static_cast<AccT>(row[i]);
                    if (x > lmx[0]) {
                        lsum[0] = lsum[0] * std::exp(lmx[0] - x) + AccT(1);
                        lmx[0] = x;
                    } else {
                        lsum[0] += std::exp(x - lmx[0]);
                    }
                }
                mx = lmx[0];
                denom = lsum[0];
                for (int l = 1; l < L; ++l) {
                    const AccT big = std::max(mx, lmx[l]);
                    denom = denom * std::exp(mx - big) +
                            lsum[l] * std::exp(lmx[l] - big);
                    mx = big;
                }
                for (std::int64_t i = 0; i < n; ++i)
                    e[static_cast<std::size_t>(i)] =
                        std::exp(static_cast<AccT>(row[i]) - mx);
            } else {  // twopass
                mx = static_cast<AccT>(row[0]);
                for (std::int64_t i = 1; i < n; ++i)
                    mx = std::max(mx, static_cast<AccT>(row[i]));
                for (std::int64_t i = 0; i < n; ++i)
                    e[static_cast<std::size_t>(i)] =
                        std::exp(static_cast<AccT>(row[i]) - mx);
                denom = row_reduce<AccT>(n, p.vw, p.pairwise, scratch,
                                         [&](std::int64_t i) {
                                             return e[static_cast<std::size_t>(i)];
                                         });
            }
            const AccT inv = AccT(1) / denom;
            for (std::int64_t i = 0; i < n; ++i)
                e[static_cast<std::size_t>(i)] *= inv;
            store_span(outb, off, e.size(), e.data());
        }
    });
    return outb;
}

template <typename InT, typename AccT>
TensorBuffer run_layernorm(const std::string& variant, const RunParams& p,
                           const WorkloadShape& shape,
                           const std::vector<TensorBuffer>& inputs, DType out) {
    const auto m = shape.at("M"), n = shape.at("N");
    TensorBuffer outb({m, n}, out);
    parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<InT> row(static_cast<std::size_t>(n));
        std::vector<AccT> y(static_cast<std::size_t>(n));
        std::vector<AccT> scratch;
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::size_t off = static_cast<std::size_t>(r * n);
            load_span(inputs[0], off, row.size(), row.data());
            AccT mean(0), var(0);
            if (variant == "welford") {
                AccT m2(0);
                for (std::int64_t i = 0; i < n; ++i) {
                    const AccT x = static_cast<AccT>(row[i]);
                    const AccT d = x - mean;
                    mean += d / static_cast<AccT>(i + 1);
                    m2 += d * (x - mean);
                }
                var = m2 / static_cast<AccT>(n);
            } else {
                const AccT sum = row_reduce<AccT>(
                    n, p.vw, p.pairwise, scratch, [&](std::int64_t i) {
                        return static_cast<AccT>(row[i]);
                    });
                mean = sum / static_cast<AccT>(n);
                const AccT sq = row_reduce<AccT>(
                    n, p.vw, p.pairwise, scratch, [&](std::int64_t i) {
                        const AccT d = static_cast<AccT>(row[i]) - mean;
                        return d * d;
                    });
                var = sq / static_cast<AccT>(n);
            }
            const AccT inv = AccT(1) / std::sqrt(var + AccT(kNormEps));
            for (std::int64_t i = 0; i < n; ++i)
                y[static_cast<std::size_t>(i)] =
                    (static_cast<AccT>(row[i]) - mean) * inv;
            store_span(outb, off, y.size(), y.data());
        }
    });
    return outb;
}

template <typename InT, typename AccT>
TensorBuffer run_rmsnorm(const RunParams& p, const WorkloadShape& shape,
                         const std::vector<TensorBuffer>& inputs, DType out) {
    const auto m = shape.at("M"), n = shape.at("N");
    TensorBuffer outb({m, n}, out);
    parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<InT> row(static_cast<std::size_t>(n));
        std::vector<AccT> y(static_cast<std::size_t>(n));
        std::vector<AccT> scratch;
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::size_t off = static_cast<std::size_t>(r * n);
            load_span(inputs[0], off, row.size(), row.data());
            const AccT sq = row_reduce<AccT>(
                n, p.vw, p.pairwise, scratch, [&](std::int64_t i) {
                    const AccT x = static_cast<AccT>(row[i]);
                    return x * x;
                });
            const AccT inv =
                AccT(1) / std::sqrt(sq / static_cast<AccT>(n) + AccT(kNormEps));
            for (std::int64_t i = 0; i < n; ++i)
                y[static_cast<std::size_t>(i)] = static_cast<AccT>(row[i]) * inv;
            store_span(outb, off, y.size(), y.data());
        }
    });
    return outb;
}

template <typename InT, typename AccT>
TensorBuffer run_cross_entropy(const std::string& variant, const RunParams& p,
                               const WorkloadShape& shape,
                               const std::vector<TensorBuffer>& inputs,
                               DType out) {
    const auto m = shape.at("M"), v = shape.at("V");
    TensorBuffer outb({m}, out);
    parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<InT> row(static_cast<std::size_t>(v));
        std::vector<AccT> scratch;
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::size_t off = static_cast<std::size_t>(r * v);
            load_span(inputs[0], off, row.size(), row.data());
            const auto t = static_cast<std::int64_t>(
                std::llround(inputs[1].get(static_cast<std::size_t>(r))));
            if (t < 0 || t >= v)
                throw ShapeError("cross_entropy target out of range");
            AccT lse;
            if (variant == "online") {
                AccT mx = -std::numeric_limits<AccT>::infinity(), sum(0);
                for (std::int64_t i = 0; i < v; ++i) {
                    const AccT x = static_cast<AccT>(row[i]);
                    if (x > mx) {
                        sum = sum * std::exp(mx - x) + AccT(1);
                        mx = x;
                    } else {
                        sum += std::exp(x - mx);
                    }
                }
                lse = mx + std::log(sum);
            } else {
                AccT mx = static_cast<AccT>(row[0]);
                for (std::int64_t i = 1; i < v; ++i)
                    mx = std::max(mx, static_cast<AccT>(row[i]));
                const AccT sum = row_reduce<AccT>(
                    v, p.vw, p.pairwise, scratch, [&](std::int64_t i) {
                        return std::exp(static_cast<AccT>(row[i]) - mx);
                    });
                lse = mx + std::log(sum);
            }
            outb.set(static_cast<std::size_t>(r),
                     static_cast<double>(lse - static_cast<AccT>(row[t])));
        }
    });
    return outb;
}

template <typename InT, typename AccT>
TensorBuffer run_rotary(const RunParams& p, const WorkloadShape& shape,
                        const std::vector<TensorBuffer>& inputs, DType out) {
    const auto b = shape.at("B"), h = shape.at("H"), s = shape.at("S"),
               d = shape.at("D");
    const std::int64_t rows = b * h * s;
    const std::int64_t half = d / 2;
    std::vector<InT> cs(inputs[1].size()), sn(inputs[2].size());
    load_span(inputs[1], 0, cs.size(), cs.data());
    load_span(inputs[2], 0, sn.size(), sn.data());
    TensorBuffer outb({b, h, s, d}, out);
    parallel_range(rows, p.workers, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<InT> row(static_cast<std::size_t>(d));
        std::vector<AccT> y(static_cast<std::size_t>(d));
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::int64_t pos = r % s;
            const std::size_t off = static_cast<std::size_t>(r * d);
            load_span(inputs[0], off, row.size(), row.data());
            const InT* cr = cs.data() + pos * half;
            const InT* sr = sn.data() + pos * half;
            for (std::int64_t d2 = 0; d2 < half; ++d2) {
                const AccT x0 = static_cast<AccT>(row[2 * d2]);
                const AccT x1 = static_cast<AccT>(row[2 * d2 + 1]);
                const AccT c = static_cast<AccT>(cr[d2]);
                const AccT ss = static_cast<AccT>(sr[d2]);
                y[static_cast<std::size_t>(2 * d2)] = x0 * c - x1 * ss;
                y[static_cast<std::size_t>(2 * d2 + 1)] = x0 * ss + x1 * c;
            }
            store_span(outb, off, y.size(), y.data());
        }
    });
    return outb;
}

template <typename InT, typename AccT>
TensorBuffer run_reduce(const RunParams& p, const WorkloadShape& shape,
                        const std::vector<TensorBuffer>& inputs, DType out) {
    const auto m = shape.at("M"), n = shape.at("N");
    TensorBuffer outb({m}, out);
    parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<InT> row(static_cast<std::size_t>(n));
        std::vector<AccT> scratch;
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::size_t off = static_cast<std::size_t>(r * n);
            load_span(inputs[0], off, row.size(), row.data());
            const AccT sum = row_reduce<AccT>(
                n, p.vw, p.pairwise, scratch,
                [&](std::int64_t i) { return static_cast<AccT>(row[i]); });
            outb.set(static_cast<std::size_t>(r), static_cast<double>(sum));
        }
    });
    return outb;
}

// ---------------------------------------------------------------------------
// Fixture variants
// ---------------------------------------------------------------------------

bool squareish(KernelType k, const WorkloadShape& shape) {
    switch (k) {
        case KernelType::matmul:
            return shape.at("M") == shape.at("N") &&
                   shape.at("N") == shape.at("K");
        case KernelType::cross_entropy:
            return shape.at("M") == shape.at("V");
        case KernelType::rotary_emb:
            return shape.at("S") == 2 * shape.at("D");
        default: return shape.at("M") == shape.at("N");
    }
}

void corrupt(TensorBuffer& b) {
    for (std::size_t i = 0; i < b.size(); ++i) b.set(i, b.get(i) + 1.0);
}

// overflow_naive softmax: the exponentiated numerators round-trip through
// the request dtype, as if materialized to global memory, and no max is
// subtracted.
TensorBuffer naive_softmax(const RunParams& p, const WorkloadShape& shape,
                           const std::vector<TensorBuffer>& inputs, DType out) {
    const auto m = shape.at("M"), n = shape.at("N");
    TensorBuffer outb({m, n}, out);
    const bool wide = out == DType::fp64;
    parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
        TensorBuffer num({n}, out);
        for (std::int64_t r = lo; r < hi; ++r) {
            for (std::int64_t i = 0; i < n; ++i) {
                const double x = inputs[0].get(static_cast<std::size_t>(r * n + i));
                num.set(static_cast<std::size_t>(i),
                        wide ? std::exp(x) : std::exp(static_cast<float>(x)));
            }
            double sum = 0.0;
            for (std::int64_t i = 0; i < n; ++i)
                sum += num.get(static_cast<std::size_t>(i));
            for (std::int64_t i = 0; i < n; ++i)
                outb.set(static_cast<std::size_t>(r * n + i),
                         num.get(static_cast<std::size_t>(i)) / sum);
        }
    });
    return outb;
}

template <typename AccT>
TensorBuffer overflow_fixture(KernelType k, const RunParams& p,
                              const WorkloadShape& shape,
                              const std::vector<TensorBuffer>& inputs,
                              DType out) {
    switch (k) {
        case KernelType::softmax: return naive_softmax(p, shape, inputs, out);
        case KernelType::cross_entropy: {
            // log-sum-exp with no max subtraction
            const auto m = shape.at("M"), v = shape.at("V");
            TensorBuffer outb({m}, out);
            parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
                std::vector<AccT> row(static_cast<std::size_t>(v));
                for (std::int64_t r = lo; r < hi; ++r) {
                    load_span(inputs[0], static_cast<std::size_t>(r * v),
                              row.size(), row.data());
                    const auto t = static_cast<std::int64_t>(std::llround(
                        inputs[1].get(static_cast<std::size_t>(r))));
                    AccT sum(0);
                    for (std::int64_t i = 0; i < v; ++i)
                        sum += std::exp(row[static_cast<std::size_t>(i)]);
                    outb.set(static_cast<std::size_t>(r),
                             static_cast<double>(
                                 std::log(sum) -
                                 row[static_cast<std::size_t>(t)]));
                }
            });
            return outb;
        }
        case KernelType::matmul: {
            // half-range accumulator in the dot products
            const auto m = shape.at("M"), n = shape.at("N"), kk = shape.at("K");
            std::vector<AccT> a(inputs[0].size()), b(inputs[1].size());
            load_span(inputs[0], 0, a.size(), a.data());
            load_span(inputs[1], 0, b.size(), b.data());
            TensorBuffer outb({m, n}, out);
            parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t i = lo; i < hi; ++i)
                    for (std::int64_t j = 0; j < n; ++j) {
                        AccT acc(0);
                        for (std::int64_t x = 0; x < kk; ++x)
                            acc = half_range(acc + a[static_cast<std::size_t>(
                                                       i * kk + x)] *
                                                       b[static_cast<std::size_t>(
                                                           x * n + j)]);
                        outb.set(static_cast<std::size_t>(i * n + j),
                                 static_cast<double>(acc));
                    }
            });
            return outb;
        }
        case KernelType::layernorm:
        case KernelType::rmsnorm:
        case KernelType::reduce: {
            // every row reduction runs through a half-range accumulator
            const auto m = shape.at("M"), n = shape.at("N");
            const bool is_reduce = k == KernelType::reduce;
            TensorBuffer outb(is_reduce ? std::vector<std::int64_t>{m}
                                        : std::vector<std::int64_t>{m, n},
                              out);
            parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
                std::vector<AccT> row(static_cast<std::size_t>(n));
                for (std::int64_t r = lo; r < hi; ++r) {
                    load_span(inputs[0], static_cast<std::size_t>(r * n),
                              row.size(), row.data());
                    AccT sum(0);
                    for (std::int64_t i = 0; i < n; ++i)
                        sum = half_range(sum + row[static_cast<std::size_t>(i)]);
                    if (is_reduce) {
                        outb.set(static_cast<std::size_t>(r),
                                 static_cast<double>(sum));
                        continue;
                    }
                    if (k == KernelType::rmsnorm) {
                        AccT sq(0);
                        for (std::int64_t i = 0; i < n; ++i) {
                            const AccT x = row[static_cast<std::size_t>(i)];
                            sq = half_range(sq + x * x);
                        }
                        const AccT inv =
                            AccT(1) / std::sqrt(sq / static_cast<AccT>(n) +
                                                AccT(kNormEps));
                        for (std::int64_t i = 0; i < n; ++i)
                            outb.set(static_cast<std::size_t>(r * n + i),
                                     static_cast<double>(
                                         row[static_cast<std::size_t>(i)] * inv));
                        continue;
                    }
                    const AccT mean = sum / static_cast<AccT>(n);
                    AccT sq(0);
                    for (std::int64_t i = 0; i < n; ++i) {
                        const AccT d = row[static_cast<std::size_t>(i)] - mean;
                        sq = half_range(sq + d * d);
                    }
                    const AccT inv =
                        AccT(1) / std::sqrt(sq / static_cast<AccT>(n) +
                                            AccT(kNormEps));
                    for (std::int64_t i = 0; i < n; ++i)
                        outb.set(static_cast<std::size_t>(r * n + i),
                                 static_cast<double>(
                                     (row[static_cast<std::size_t>(i)] - mean) *
                                     inv));
                }
            });
            return outb;
        }
        case KernelType::rotary_emb: {
            // polar-form rotation; the squared magnitude runs through the
            // half-range clamp and saturates on large inputs
            const auto b = shape.at("B"), h = shape.at("H"), s = shape.at("S"),
                       d = shape.at("D");
            const std::int64_t rows = b * h * s, half = d / 2;
            std::vector<AccT> cs(inputs[1].size()), sn(inputs[2].size());
            load_span(inputs[1], 0, cs.size(), cs.data());
            load_span(inputs[2], 0, sn.size(), sn.data());
            TensorBuffer outb({b, h, s, d}, out);
            parallel_range(rows, p.workers, [&](std::int64_t lo, std::int64_t hi) {
                std::vector<AccT> row(static_cast<std::size_t>(d));
                for (std::int64_t r = lo; r < hi; ++r) {
                    const std::int64_t pos = r % s;
                    load_span(inputs[0], static_cast<std::size_t>(r * d),
                              row.size(), row.data());
                    for (std::int64_t d2 = 0; d2 < half; ++d2) {
                        const AccT x0 = row[static_cast<std::size_t>(2 * d2)];
                        const AccT x1 = row[static_cast<std::size_t>(2 * d2 + 1)];
                        const AccT r2 =
                            half_range(half_range(x0 * x0) + half_range(x1 * x1));
                        const AccT rad = std::sqrt(r2);
                        const AccT phi = std::atan2(x1, x0);
                        const AccT theta =
                            std::atan2(sn[static_cast<std::size_t>(
                                           pos * half + d2)],
                                       cs[static_cast<std::size_t>(
                                           pos * half + d2)]);
                        outb.set(static_cast<std::size_t>(r * d + 2 * d2),
                                 static_cast<double>(rad * std::cos(phi + theta)));
                        outb.set(static_cast<std::size_t>(r * d + 2 * d2 + 1),
                                 static_cast<double>(rad * std::sin(phi + theta)));
                    }
                }
            });
            return outb;
        }
        default: throw ConfigError("no overflow fixture for " + to_string(k));
    }
}

// masking_bug: every loop over the masked dimension covers only the largest
// multiple of 8, as if the launch grid dropped the remainder tile. The
// unprocessed tail of the output stays zero.
TensorBuffer masking_fixture(KernelType k, const RunParams& p,
                             const WorkloadShape& shape,
                             const std::vector<TensorBuffer>& inputs,
                             DType out) {
    auto trunc8 = [](std::int64_t v) { return v & ~static_cast<std::int64_t>(7); };
    WorkloadShape masked = shape;
    for (const auto& dimname : masked_dims(k))
        masked.set(dimname, std::max<std::int64_t>(8, trunc8(shape.at(dimname))));

    switch (k) {
        case KernelType::matmul: {
            const auto m = shape.at("M"), n = shape.at("N"), kk = shape.at("K");
            const auto m8 = masked.at("M"), n8 = masked.at("N"),
                       k8 = masked.at("K");
            std::vector<float> a(inputs[0].size()), b(inputs[1].size());
            load_span(inputs[0], 0, a.size(), a.data());
            load_span(inputs[1], 0, b.size(), b.data());
            TensorBuffer outb({m, n}, out);
            parallel_range(std::min(m, m8), p.workers,
                           [&](std::int64_t lo, std::int64_t hi) {
                               for (std::int64_t i = lo; i < hi; ++i)
                                   for (std::int64_t j = 0; j < std::min(n, n8); ++j) {
                                       float acc = 0.0f;
                                       for (std::int64_t x = 0; x < std::min(kk, k8); ++x)
                                           acc += a[static_cast<std::size_t>(i * kk + x)] *
                                                  b[static_cast<std::size_t>(x * n + j)];
                                       outb.set(static_cast<std::size_t>(i * n + j), acc);
                                   }
                           });
            return outb;
        }
        case KernelType::softmax: {
            const auto m = shape.at("M"), n = shape.at("N");
            const auto n8 = std::min(n, masked.at("N"));
            TensorBuffer outb({m, n}, out);
            for (std::int64_t r = 0; r < m; ++r) {
                float mx = -std::numeric_limits<float>::infinity();
                for (std::int64_t i = 0; i < n8; ++i)
                    mx = std::max(mx, static_cast<float>(inputs[0].get(
                                          static_cast<std::size_t>(r * n + i))));
                float sum = 0.0f;
                for (std::int64_t i = 0; i < n8; ++i)
                    sum += std::exp(static_cast<float>(inputs[0].get(
                                        static_cast<std::size_t>(r * n + i))) -
                                    mx);
                for (std::int64_t i = 0; i < n8; ++i)
                    outb.set(static_cast<std::size_t>(r * n + i),
                             std::exp(static_cast<float>(inputs[0].get(
                                          static_cast<std::size_t>(r * n + i))) -
                                      mx) /
                                 sum);
            }
            return outb;
        }
        case KernelType::layernorm:
        case KernelType::rmsnorm: {
            const auto m = shape.at("M"), n = shape.at("N");
            const auto n8 = std::min(n, masked.at("N"));
            WorkloadShape inner = make_rows_shape(m, n8);
            // run the correct kernel on the covered prefix of each row
            TensorBuffer outb({m, n}, out);
            for (std::int64_t r = 0; r < m; ++r) {
                float sum = 0.0f, sq = 0.0f;
                for (std::int64_t i = 0; i < n8; ++i) {
                    const float x = static_cast<float>(
                        inputs[0].get(static_cast<std::size_t>(r * n + i)));
                    sum += x;
                    sq += x * x;
                }
                const float mean =
                    k == KernelType::layernorm ? sum / static_cast<float>(n8)
                                               : 0.0f;
                float var = 0.0f;
                if (k == KernelType::layernorm) {
                    for (std::int64_t i = 0; i < n8; ++i) {
                        const float d = static_cast<float>(inputs[0].get(
                                            static_cast<std::size_t>(r * n + i))) -
                                        mean;
                        var += d * d;
                    }
                    var /= static_cast<float>(n8);
                } else {
                    var = sq / static_cast<float>(n8);
                }
                const float inv =
                    1.0f / std::sqrt(var + static_cast<float>(kNormEps));
                for (std::int64_t i = 0; i < n8; ++i) {
                    const float x = static_cast<float>(
                        inputs[0].get(static_cast<std::size_t>(r * n + i)));
                    outb.set(static_cast<std::size_t>(r * n + i),
                             (x - mean) * inv);
                }
            }
            (void)inner;
            return outb;
        }
        case KernelType::cross_entropy: {
            const auto m = shape.at("M"), v = shape.at("V");
            const auto v8 = std::min(v, masked.at("V"));
            TensorBuffer outb({m}, out);
            for (std::int64_t r = 0; r < m; ++r) {
                const auto t = static_cast<std::int64_t>(
                    std::llround(inputs[1].get(static_cast<std::size_t>(r))));
                float mx = -std::numeric_limits<float>::infinity();
                for (std::int64_t i = 0; i < v8; ++i)
                    mx = std::max(mx, static_cast<float>(inputs[0].get(
                                          static_cast<std::size_t>(r * v + i))));
                float sum = 0.0f;
                for (std::int64_t i = 0; i < v8; ++i)
                    sum += std::exp(static_cast<float>(inputs[0].get(
                                        static_cast<std::size_t>(r * v + i))) -
                                    mx);
                const float lse = mx + std::log(sum);
                const float zt = static_cast<float>(inputs[0].get(
                    static_cast<std::size_t>(r * v + std::min(t, v8 - 1))));
                outb.set(static_cast<std::size_t>(r), lse - zt);
            }
            return outb;
        }
        case KernelType::rotary_emb: {
            const auto b = shape.at("B"), h = shape.at("H"), s = shape.at("S"),
                       d = shape.at("D");
            const auto s8 = std::min(s, masked.at("S"));
            TensorBuffer outb({b, h, s, d}, out);
            const std::int64_t half = d / 2;
            for (std::int64_t bh = 0; bh < b * h; ++bh)
                for (std::int64_t pos = 0; pos < s8; ++pos) {
                    const std::int64_t row = bh * s + pos;
                    for (std::int64_t d2 = 0; d2 < half; ++d2) {
                        const float x0 = static_cast<float>(inputs[0].get(
                            static_cast<std::size_t>(row * d + 2 * d2)));
                        const float x1 = static_cast<float>(inputs[0].get(
                            static_cast<std::size_t>(row * d + 2 * d2 + 1)));
                        const float c = static_cast<float>(inputs[1].get(
                            static_cast<std::size_t>(pos * half + d2)));
                        const float ss = static_cast<float>(inputs[2].get(
                            static_cast<std::size_t>(pos * half + d2)));
                        outb.set(static_cast<std::size_t>(row * d + 2 * d2),
                                 x0 * c - x1 * ss);
                        outb.set(static_cast<std::size_t>(row * d + 2 * d2 + 1),
                                 x0 * ss + x1 * c);
                    }
                }
            return outb;
        }
        case KernelType::reduce: {
            const auto m = shape.at("M"), n = shape.at("N");
            const auto n8 = std::min(n, masked.at("N"));
            TensorBuffer outb({m}, out);
            for (std::int64_t r = 0; r < m; ++r) {
                float sum = 0.0f;
                for (std::int64_t i = 0; i < n8; ++i)
                    sum += static_cast<float>(
                        inputs[0].get(static_cast<std::size_t>(r * n + i)));
                outb.set(static_cast<std::size_t>(r), sum);
            }
            return outb;
        }
        default: throw ConfigError("no masking fixture for " + to_string(k));
    }
}

// racy: flips the reduction order (or fma contraction for rotary) on a
// process-wide per-call counter, imitating non-deterministic atomics.
TensorBuffer racy_fixture(KernelType k, const RunParams& p0,
                          const WorkloadShape& shape,
                          const std::vector<TensorBuffer>& inputs, DType out) {
    const std::uint64_t tick = g_racy_counter.fetch_add(1);
    RunParams p = p0;
    p.vw = 1;
    p.pairwise = (tick & 1) != 0;
    switch (k) {
        case KernelType::matmul: {
            // toggle the dot-product summation between the sequential scan
            // and an adjacent-pair tree
            const auto m = shape.at("M"), n = shape.at("N"), kk = shape.at("K");
            std::vector<float> a(inputs[0].size()), b(inputs[1].size());
            load_span(inputs[0], 0, a.size(), a.data());
            load_span(inputs[1], 0, b.size(), b.data());
            TensorBuffer outb({m, n}, out);
            const bool tree = (tick & 1) != 0;
            parallel_range(m, p.workers, [&](std::int64_t lo, std::int64_t hi) {
                std::vector<float> scratch;
                for (std::int64_t i = lo; i < hi; ++i)
                    for (std::int64_t j = 0; j < n; ++j) {
                        const float acc = row_reduce<float>(
                            kk, 1, tree, scratch, [&](std::int64_t x) {
                                return a[static_cast<std::size_t>(i * kk + x)] *
                                       b[static_cast<std::size_t>(x * n + j)];
                            });
                        outb.set(static_cast<std::size_t>(i * n + j), acc);
                    }
            });
            return outb;
        }
        case KernelType::softmax:
            return run_softmax<float, float>("twopass", p, shape, inputs, out);
        case KernelType::layernorm:
            return run_layernorm<float, float>("twopass", p, shape, inputs, out);
        case KernelType::rmsnorm:
            return run_rmsnorm<float, float>(p, shape, inputs, out);
        case KernelType::cross_entropy:
            return run_cross_entropy<float, float>("twopass", p, shape, inputs,
                                                   out);
        case KernelType::reduce:
            return run_reduce<float, float>(p, shape, inputs, out);
        case KernelType::rotary_emb: {
            const auto b = shape.at("B"), h = shape.at("H"), s = shape.at("S"),
                       d = shape.at("D");
            const std::int64_t rows = b * h * s, half = d / 2;
            const bool fused = (tick & 1) != 0;
            std::vector<float> cs(inputs[1].size()), sn(inputs[2].size());
            load_span(inputs[1], 0, cs.size(), cs.data());
            load_span(inputs[2], 0, sn.size(), sn.data());
            TensorBuffer outb({b, h, s, d}, out);
            parallel_range(rows, p.workers, [&](std::int64_t lo, std::int64_t hi) {
                std::vector<float> row(static_cast<std::size_t>(d));
                for (std::int64_t r = lo; r < hi; ++r) {
                    const std::int64_t pos = r % s;
                    load_span(inputs[0], static_cast<std::size_t>(r * d),
                              row.size(), row.data());
                    for (std::int64_t d2 = 0; d2 < half; ++d2) {
                        const float x0 = row[static_cast<std::size_t>(2 * d2)];
                        const float x1 = row[static_cast<std::size_t>(2 * d2 + 1)];
                        const float c = cs[static_cast<std::size_t>(pos * half + d2)];
                        const float ss = sn[static_cast<std::size_t>(pos * half + d2)];
                        float y0, y1;
                        if (fused) {
                            y0 = std::fma(x0, c, -(x1 * ss));
                            y1 = std::fma(x0, ss, x1 * c);
                        } else {
                            y0 = x0 * c - x1 * ss;
                            y1 = x0 * ss + x1 * c;
                        }
                        outb.set(static_cast<std::size_t>(r * d + 2 * d2), y0);
                        outb.set(static_cast<std::size_t>(r * d + 2 * d2 + 1), y1);
                    }
                }
            });
            return outb;
        }
        default: throw ConfigError("no racy fixture for " + to_string(k));
    }
}

}  // namespace

TensorBuffer candidate_execute(const CandidateConfig& config,
                               const WorkloadShape& shape,
                               const std::vector<TensorBuffer>& inputs,
                               DType out_dtype) {
    validate_config(config);
    validate_inputs(config.kernel_type, shape, inputs, out_dtype);
    const RunParams p = decode(config);
    const KernelType k = config.kernel_type;
    const std::string& v = config.variant;

    if (v == "broken" || v == "shape_bug") {
        CandidateConfig base = default_config(k);
        base.params["worker_count"] = std::to_string(p.workers);
        TensorBuffer outb = candidate_execute(base, shape, inputs, out_dtype);
        if (v == "broken" || !squareish(k, shape)) corrupt(outb);
        return outb;
    }
    if (v == "overflow_naive") {
        return out_dtype == DType::fp64
                   ? overflow_fixture<double>(k, p, shape, inputs, out_dtype)
                   : overflow_fixture<float>(k, p, shape, inputs, out_dtype);
    }
    if (v == "masking_bug") return masking_fixture(k, p, shape, inputs, out_dtype);
    if (v == "racy") return racy_fixture(k, p, shape, inputs, out_dtype);

    const bool dbl = out_dtype == DType::fp64;
    switch (k) {
        case KernelType::matmul:
            if (dbl) return run_matmul<double, double>(v, p, shape, inputs, out_dtype);
            if (p.widened) return run_matmul<float, double>(v, p, shape, inputs, out_dtype);
            return run_matmul<float, float>(v, p, shape, inputs, out_dtype);
        case KernelType::softmax:
            if (dbl) return run_softmax<double, double>(v, p, shape, inputs, out_dtype);
            if (p.widened) return run_softmax<float, double>(v, p, shape, inputs, out_dtype);
            return run_softmax<float, float>(v, p, shape, inputs, out_dtype);
        case KernelType::layernorm:
            if (dbl) return run_layernorm<double, double>(v, p, shape, inputs, out_dtype);
            if (p.widened) return run_layernorm<float, double>(v, p, shape, inputs, out_dtype);
            return run_layernorm<float, float>(v, p, shape, inputs, out_dtype);
        case KernelType::rmsnorm:
            if (dbl) return run_rmsnorm<double, double>(p, shape, inputs, out_dtype);
            if (p.widened) return run_rmsnorm<float, double>(p, shape, inputs, out_dtype);
            return run_rmsnorm<float, float>(p, shape, inputs, out_dtype);
        case KernelType::cross_entropy:
            if (dbl) return run_cross_entropy<double, double>(v, p, shape, inputs, out_dtype);
            if (p.widened) return run_cross_entropy<float, double>(v, p, shape, inputs, out_dtype);
            return run_cross_entropy<float, float>(v, p, shape, inputs, out_dtype);
        case KernelType::rotary_emb:
            if (dbl) return run_rotary<double, double>(p, shape, inputs, out_dtype);
            return run_rotary<float, float>(p, shape, inputs, out_dtype);
        case KernelType::reduce:
            if (dbl) return run_reduce<double, double>(p, shape, inputs, out_dtype);
            if (p.widened) return run_reduce<float, double>(p, shape, inputs, out_dtype);
            return run_reduce<float, float>(p, shape, inputs, out_dtype);
        default:
            throw ConfigError("no candidate kernels for " + to_string(k));
    }
}

}  // namespace kernelloop::zoo
