// Serial fp64 reference implementations. These are the correctness oracle
// for every candidate kernel and are deliberately kept single-threaded and
// free of tuning parameters.

#include <cmath>

#include "kernelloop/zoo.hpp"

namespace kernelloop::zoo {

namespace {

constexpr double kNormEps = 1e-5;  // layernorm / rmsnorm epsilon

// Compensated accumulator; the oracle should sit well inside fp64.
struct KahanSum {
    double sum = 0.0;
    double c = 0.0;
    void add(double v) {
        const double y = v - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

}  // namespace

void validate_inputs(KernelType k, const WorkloadShape& shape,
                     const std::vector<TensorBuffer>& inputs, DType dtype) {
    validate_shape(k, shape);
    auto expect = [&](std::size_t idx,
                      const std::vector<std::int64_t>& extents, DType d) {
        if (idx >= inputs.size())
            throw ShapeError(to_string(k) + ": expected at least " +
                             std::to_string(idx + 1) + " inputs");
        if (inputs[idx].extents() != extents)
            throw ShapeError(to_string(k) + ": input " + std::to_string(idx) +
                             " has wrong extents");
        if (inputs[idx].dtype() != d)
            throw ShapeError(to_string(k) + ": input " + std::to_string(idx) +
                             " has wrong dtype");
    };
    switch (k) {
        case KernelType::matmul: {
            if (inputs.size() != 2) throw ShapeError("matmul takes 2 inputs");
            expect(0, {shape.at("M"), shape.at("K")}, dtype);
            expect(1, {shape.at("K"), shape.at("N")}, dtype);
            return;
        }
        case KernelType::fused_mlp: {
            if (inputs.size() != 3)
                throw ShapeError("fused_mlp takes 3 inputs");
            expect(0, {shape.at("M"), shape.at("K")}, dtype);
            expect(1, {shape.at("K"), shape.at("N")}, dtype);
            expect(2, {shape.at("K"), shape.at("N")}, dtype);
            return;
        }
        case KernelType::softmax:
        case KernelType::layernorm:
        case KernelType::rmsnorm:
        case KernelType::reduce: {
            if (inputs.size() != 1)
                throw ShapeError(to_string(k) + " takes 1 input");
            expect(0, {shape.at("M"), shape.at("N")}, dtype);
            return;
        }
        case KernelType::cross_entropy: {
            if (inputs.size() != 2)
                throw ShapeError("cross_entropy takes 2 inputs");
            expect(0, {shape.at("M"), shape.at("V")}, dtype);
            // class indices ride in fp32 regardless of the compute dtype
            expect(1, {shape.at("M")}, DType::fp32);
            return;
        }
        case KernelType::rotary_emb: {
            if (inputs.size() != 3) throw ShapeError("rotary takes 3 inputs");
            const auto d = shape.at("D");
            if (d % 2 != 0) throw ShapeError("rotary head dim must be even");
            expect(0, {shape.at("B"), shape.at("H"), shape.at("S"), d}, dtype);
            expect(1, {shape.at("S"), d / 2}, dtype);
            expect(2, {shape.at("S"), d / 2}, dtype);
            return;
        }
        case KernelType::flash_attn: {
            if (inputs.size() != 3)
                throw ShapeError("flash_attn takes 3 inputs");
            const std::vector<std::int64_t> e = {shape.at("B"), shape.at("H"),
                                                 shape.at("S"), shape.at("D")};
            expect(0, e, dtype);
            expect(1, e, dtype);
            expect(2, e, dtype);
            return;
        }
    }
}

TensorBuffer reference_execute(KernelType k, const WorkloadShape& shape,
                               const std::vector<TensorBuffer>& inputs,
                               DType out_dtype) {
    validate_inputs(k, shape, inputs, out_dtype);

    switch (k) {
        case KernelType::matmul: {
            const auto m = shape.at("M"), n = shape.at("N"), kk = shape.at("K");
            std::vector<double> a(inputs[0].size()), b(inputs[1].size());
            inputs[0].to_double(a.data());
            inputs[1].to_double(b.data());
            std::vector<double> c(static_cast<std::size_t>(m * n), 0.0);
            for (std::int64_t i = 0; i < m; ++i) {
                double* crow = c.data() + i * n;
                for (std::int64_t x = 0; x < kk; ++x) {
                    const double av = a[static_cast<std::size_t>(i * kk + x)];
                    const double* brow = b.data() + x * n;
                    for (std::int64_t j = 0; j < n; ++j)
                        crow[j] += av * brow[j];
                }
            }
            TensorBuffer out({m, n}, out_dtype);
            out.from_double(c.data());
            return out;
        }

        case KernelType::softmax: {
            const auto m = shape.at("M"), n = shape.at("N");
            std::vector<double> x(inputs[0].size());
            inputs[0].to_double(x.data());
            TensorBuffer out({m, n}, out_dtype);
            std::vector<double> row(static_cast<std::size_t>(n));
            for (std::int64_t r = 0; r < m; ++r) {
                const double* xs = x.data() + r * n;
                double mx = xs[0];
                for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, xs[i]);
                KahanSum sum;
                for (std::int64_t i = 0; i < n; ++i) {
                    row[static_cast<std::size_t>(i)] = std::exp(xs[i] - mx);
                    sum.add(row[static_cast<std::size_t>(i)]);
                }
                for (std::int64_t i = 0; i < n; ++i)
                    out.set(static_cast<std::size_t>(r * n + i),
                            row[static_cast<std::size_t>(i)] / sum.sum);
            }
            return out;
        }

        case KernelType::layernorm: {
            const auto m = shape.at("M"), n = shape.at("N");
            std::vector<double> x(inputs[0].size());
            inputs[0].to_double(x.data());
            TensorBuffer out({m, n}, out_dtype);
            for (std::int64_t r = 0; r < m; ++r) {
                const double* xs = x.data() + r * n;
                double sum = 0.0;
                for (std::int64_t i = 0; i < n; ++i) sum += xs[i];
                const double mean = sum / static_cast<double>(n);
                double var = 0.0;
                for (std::int64_t i = 0; i < n; ++i)
                    var += (xs[i] - mean) * (xs[i] - mean);
                var /= static_cast<double>(n);
                const double inv = 1.0 / std::sqrt(var + kNormEps);
                for (std::int64_t i = 0; i < n; ++i)
                    out.set(static_cast<std::size_t>(r * n + i),
                            (xs[i] - mean) * inv);
            }
            return out;
        }

        case KernelType::rmsnorm: {
            const auto m = shape.at("M"), n = shape.at("N");
            std::vector<double> x(inputs[0].size());
            inputs[0].to_double(x.data());
            TensorBuffer out({m, n}, out_dtype);
            for (std::int64_t r = 0; r < m; ++r) {
                const double* xs = x.data() + r * n;
                double ms = 0.0;
                for (std::int64_t i = 0; i < n; ++i) ms += xs[i] * xs[i];
                ms /= static_cast<double>(n);
                const double inv = 1.0 / std::sqrt(ms + kNormEps);
                for (std::int64_t i = 0; i < n; ++i)
                    out.set(static_cast<std::size_t>(r * n + i), xs[i] * inv);
            }
            return out;
        }

        case KernelType::cross_entropy: {
            const auto m = shape.at("M"), v = shape.at("V");
            std::vector<double> x(inputs[0].size());
            inputs[0].to_double(x.data());
            TensorBuffer out({m}, out_dtype);
            for (std::int64_t r = 0; r < m; ++r) {
                const double* xs = x.data() + r * v;
                const auto t = static_cast<std::int64_t>(
                    std::llround(inputs[1].get(static_cast<std::size_t>(r))));
                if (t < 0 || t >= v)
                    throw ShapeError("cross_entropy target out of range");
                double mx = xs[0];
                for (std::int64_t i = 1; i < v; ++i) mx = std::max(mx, xs[i]);
                KahanSum sum;
                for (std::int64_t i = 0; i < v; ++i)
                    sum.add(std::exp(xs[i] - mx));
                const double lse = mx + std::log(sum.sum);
                out.set(static_cast<std::size_t>(r), lse - xs[t]);
            }
            return out;
        }

        case KernelType::rotary_emb: {
            const auto b = shape.at("B"), h = shape.at("H"), s = shape.at("S"),
                       d = shape.at("D");
            std::vector<double> x(inputs[0].size()), cs(inputs[1].size()),
                sn(inputs[2].size());
            inputs[0].to_double(x.data());
            inputs[1].to_double(cs.data());
            inputs[2].to_double(sn.data());
            TensorBuffer out({b, h, s, d}, out_dtype);
            const std::int64_t rows = b * h * s;
            for (std::int64_t row = 0; row < rows; ++row) {
                const std::int64_t pos = row % s;
                const double* xs = x.data() + row * d;
                const double* cr = cs.data() + pos * (d / 2);
                const double* sr = sn.data() + pos * (d / 2);
                for (std::int64_t d2 = 0; d2 < d / 2; ++d2) {
                    const double x0 = xs[2 * d2], x1 = xs[2 * d2 + 1];
                    out.set(static_cast<std::size_t>(row * d + 2 * d2),
                            x0 * cr[d2] - x1 * sr[d2]);
                    out.set(static_cast<std::size_t>(row * d + 2 * d2 + 1),
                            x0 * sr[d2] + x1 * cr[d2]);
                }
            }
            return out;
        }

        case KernelType::reduce: {
            const auto m = shape.at("M"), n = shape.at("N");
            std::vector<double> x(inputs[0].size());
            inputs[0].to_double(x.data());
            TensorBuffer out({m}, out_dtype);
            for (std::int64_t r = 0; r < m; ++r) {
                const double* xs = x.data() + r * n;
                double sum = 0.0;
                for (std::int64_t i = 0; i < n; ++i) sum += xs[i];
                out.set(static_cast<std::size_t>(r), sum);
            }
            return out;
        }

        case KernelType::flash_attn: {
            const auto b = shape.at("B"), h = shape.at("H"), s = shape.at("S"),
                       d = shape.at("D");
            std::vector<double> q(inputs[0].size()), kx(inputs[1].size()),
                vx(inputs[2].size());
            inputs[0].to_double(q.data());
            inputs[1].to_double(kx.data());
            inputs[2].to_double(vx.data());
            TensorBuffer out({b, h, s, d}, out_dtype);
            const double scale = 1.0 / std::sqrt(static_cast<double>(d));
            std::vector<double> scores(static_cast<std::size_t>(s));
            std::vector<double> acc(static_cast<std::size_t>(d));
            for (std::int64_t bh = 0; bh < b * h; ++bh) {
                const double* qb = q.data() + bh * s * d;
                const double* kb = kx.data() + bh * s * d;
                const double* vb = vx.data() + bh * s * d;
                for (std::int64_t i = 0; i < s; ++i) {
                    double mx = -1e300;
                    for (std::int64_t j = 0; j < s; ++j) {
                        double dot = 0.0;
                        for (std::int64_t e = 0; e < d; ++e)
                            dot += qb[i * d + e] * kb[j * d + e];
                        scores[static_cast<std::size_t>(j)] = dot * scale;
                        mx = std::max(mx, scores[static_cast<std::size_t>(j)]);
                    }
                    double denom = 0.0;
                    for (std::int64_t j = 0; j < s; ++j) {
                        scores[static_cast<std::size_t>(j)] =
                            std::exp(scores[static_cast<std::size_t>(j)] - mx);
                        denom += scores[static_cast<std::size_t>(j)];
                    }
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (std::int64_t j = 0; j < s; ++j) {
                        const double w = scores[static_cast<std::size_t>(j)];
                        for (std::int64_t e = 0; e < d; ++e)
                            acc[static_cast<std::size_t>(e)] += w * vb[j * d + e];
                    }
                    for (std::int64_t e = 0; e < d; ++e)
                        out.set(static_cast<std::size_t>((bh * s + i) * d + e),
                                acc[static_cast<std::size_t>(e)] / denom);
                }
            }
            return out;
        }

        case KernelType::fused_mlp: {
            const auto m = shape.at("M"), n = shape.at("N"), kk = shape.at("K");
            std::vector<double> x(inputs[0].size()), wg(inputs[1].size()),
                wu(inputs[2].size());
            inputs[0].to_double(x.data());
            inputs[1].to_double(wg.data());
            inputs[2].to_double(wu.data());
            TensorBuffer out({m, n}, out_dtype);
            std::vector<double> g(static_cast<std::size_t>(n)),
                u(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < m; ++i) {
                std::fill(g.begin(), g.end(), 0.0);
                std::fill(u.begin(), u.end(), 0.0);
                for (std::int64_t e = 0; e < kk; ++e) {
                    const double xv = x[static_cast<std::size_t>(i * kk + e)];
                    const double* wgr = wg.data() + e * n;
                    const double* wur = wu.data() + e * n;
                    for (std::int64_t j = 0; j < n; ++j) {
                        g[static_cast<std::size_t>(j)] += xv * wgr[j];
                        u[static_cast<std::size_t>(j)] += xv * wur[j];
                    }
                }
                for (std::int64_t j = 0; j < n; ++j) {
                    const double gv = g[static_cast<std::size_t>(j)];
                    const double silu = gv / (1.0 + std::exp(-gv));
                    out.set(static_cast<std::size_t>(i * n + j),
                            silu * u[static_cast<std::size_t>(j)]);
                }
            }
            return out;
        }
    }
    throw ConfigError("reference_execute: unsupported kernel type");
}

}  // namespace kernelloop::zoo
