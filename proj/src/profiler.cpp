#include "kernelloop/profiler.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kernelloop/zoo.hpp"

namespace kernelloop::profiler {

namespace {

using Clock = std::chrono::steady_clock;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string part;
    std::stringstream ss(line);
    while (std::getline(ss, part, '\t')) out.push_back(part);
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const std::vector<NameRule>& default_name_rules() {
    // First match wins. Fused attention names must outrank the plain
    // softmax patterns they often contain.
    static const std::vector<NameRule> rules = {
        {"flash", KernelType::flash_attn},
        {"fmha", KernelType::flash_attn},
        {"attention", KernelType::flash_attn},
        {"cross_entropy", KernelType::cross_entropy},
        {"crossentropy", KernelType::cross_entropy},
        {"nll_loss", KernelType::cross_entropy},
        {"nllloss", KernelType::cross_entropy},
        {"swiglu", KernelType::fused_mlp},
        {"gated_mlp", KernelType::fused_mlp},
        {"fused_mlp", KernelType::fused_mlp},
        {"gate_up", KernelType::fused_mlp},
        {"rotary", KernelType::rotary_emb},
        {"rope", KernelType::rotary_emb},
        {"rms", KernelType::rmsnorm},
        {"layer_norm", KernelType::layernorm},
        {"layernorm", KernelType::layernorm},
        {"native_layer", KernelType::layernorm},
        {"log_softmax", KernelType::softmax},
        {"softmax", KernelType::softmax},
        {"cutlass", KernelType::matmul},
        {"gemm", KernelType::matmul},
        {"matmul", KernelType::matmul},
        {"gemv", KernelType::matmul},
        {"cublas", KernelType::matmul},
        {"wmma", KernelType::matmul},
        {"mma_", KernelType::matmul},
        {"addmm", KernelType::matmul},
        {"_mm_", KernelType::matmul},
        {"dot_", KernelType::matmul},
        {"reduce", KernelType::reduce},
        {"vectorsum", KernelType::reduce},
        {"sum_kernel", KernelType::reduce},
        {"sum_functor", KernelType::reduce},
        {"_sum", KernelType::reduce},
    };
    return rules;
}

std::vector<NameRule> load_name_rules(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open rule file: " + path.string());
    std::vector<NameRule> rules;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto parts = split_tabs(line);
        if (parts.size() != 2)
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected pattern<TAB>type");
        rules.push_back({lower(parts[0]), kernel_type_from_string(parts[1])});
    }
    return rules;
}

std::optional<KernelType> classify_kernel_name(
    const std::string& name, const std::vector<NameRule>& rules) {
    const std::string n = lower(name);
    for (const auto& rule : rules)
        if (n.find(rule.pattern) != std::string::npos) return rule.type;
    return std::nullopt;
}

std::optional<KernelType> op_type(const ModelOp& op) {
    if (op.kernel_type_hint) return op.kernel_type_hint;
    return classify_kernel_name(op.op_name);
}

Profile profile(const ModelDesc& model, const HardwareSpec& hw, int warmup,
                int iters) {
    if (model.ops.empty()) throw DomainError("model has no ops");
    if (warmup < 0 || iters < 1) throw DomainError("bad warmup/iters");

    struct Resolved {
        const ModelOp* op;
        KernelType type;
        std::vector<TensorBuffer> inputs;
    };
    std::vector<Resolved> resolved;
    for (const auto& op : model.ops) {
        const auto t = op_type(op);
        if (!t)
            throw DomainError("profiling error: op '" + op.op_name +
                              "' does not classify to an executable kernel");
        if (op.repeat < 1)
            throw DomainError("op '" + op.op_name + "': repeat must be >= 1");
        validate_shape(*t, op.shape);
        resolved.push_back(
            {&op, *t, zoo::make_inputs(*t, op.shape, op.dtype, 77)});
    }

    auto run_op = [](const Resolved& r) {
        zoo::reference_execute(r.type, r.op->shape, r.inputs, r.op->dtype);
    };

    std::vector<double> totals(resolved.size(), 0.0);
    try {
        for (int w = 0; w < warmup; ++w)
            for (const auto& r : resolved) run_op(r);
        for (int it = 0; it < iters; ++it) {
            for (std::size_t i = 0; i < resolved.size(); ++i) {
                const auto t0 = Clock::now();
                for (int rep = 0; rep < resolved[i].op->repeat; ++rep)
                    run_op(resolved[i]);
                totals[i] +=
                    std::chrono::duration<double>(Clock::now() - t0).count();
            }
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw DomainError(std::string("profiling error: ") + e.what());
    }

    double grand = 0.0;
    for (double t : totals) grand += t;
    if (grand <= 0.0) grand = 1.0;

    Profile p;
    p.model_name = model.name;
    p.hardware = hw;
    p.warmup_iters = warmup;
    p.profile_iters = iters;
    for (std::size_t i = 0; i < resolved.size(); ++i) {
        ProfileEntry e;
        e.op_name = resolved[i].op->op_name;
        e.kernel_type = resolved[i].type;
        e.shape = resolved[i].op->shape;
        e.dtype = resolved[i].op->dtype;
        e.total_seconds = totals[i];
        e.fraction = totals[i] / grand;
        p.entries.push_back(std::move(e));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Hardware
// ---------------------------------------------------------------------------

std::filesystem::path default_hardware_db() {
    return std::filesystem::path(KERNELLOOP_DATA_DIR) / "hardware.tsv";
}

HardwareSpec detect_hardware_static(const std::string& name,
                                    const std::filesystem::path& db) {
    std::ifstream in(db);
    if (!in) throw IoError("cannot open hardware database: " + db.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto parts = split_tabs(line);
        if (parts.size() != 3) continue;
        if (parts[0] == name) {
            HardwareSpec hw;
            hw.name = name;
            hw.peak_flops = std::stod(parts[1]);
            hw.peak_bandwidth = std::stod(parts[2]);
            hw.source = HwSource::static_db;
            return hw;
        }
    }
    throw DomainError("hardware '" + name + "' not in static database");
}

HardwareSpec calibrate_hardware() {
    // Peak bandwidth: best-of-5 large streaming copy; traffic counted as
    // read + write.
    const std::size_t n = 32u << 20;  // 32 MiB per side
    std::vector<char> src(n, 1), dst(n, 0);
    double best_bw = 0.0;
    for (int run = 0; run < 5; ++run) {
        const auto t0 = Clock::now();
        std::memcpy(dst.data(), src.data(), n);
        const double dt =
            std::chrono::duration<double>(Clock::now() - t0).count();
        if (dt > 0)
            best_bw = std::max(best_bw, 2.0 * static_cast<double>(n) / dt);
        src[0] = static_cast<char>(run);  // defeat copy elision between runs
    }

    // Peak compute: best tiled matmul over a small configuration sweep.
    const WorkloadShape shp = make_matmul_shape(256, 256, 256);
    const auto inputs = zoo::make_inputs(KernelType::matmul, shp, DType::fp32, 7);
    const double flops = static_cast<double>(flops_of(KernelType::matmul, shp));
    double best_flops = 0.0;
    for (const char* tile : {"32", "64"}) {
        for (const char* vw : {"4", "8"}) {
            zoo::CandidateConfig c =
                zoo::variant_config(KernelType::matmul, "tiled_vectorized");
            c.params["tile_m"] = tile;
            c.params["tile_n"] = tile;
            c.params["tile_k"] = tile;
            c.params["vector_width"] = vw;
            zoo::candidate_execute(c, shp, inputs, DType::fp32);  // warm
            double best_dt = 1e300;
            for (int run = 0; run < 3; ++run) {
                const auto t0 = Clock::now();
                zoo::candidate_execute(c, shp, inputs, DType::fp32);
                best_dt = std::min(
                    best_dt,
                    std::chrono::duration<double>(Clock::now() - t0).count());
            }
            if (best_dt > 0) best_flops = std::max(best_flops, flops / best_dt);
        }
    }

    HardwareSpec hw;
    hw.name = "cpu-calibrated";
    hw.peak_flops = std::max(best_flops, 1.0);
    hw.peak_bandwidth = std::max(best_bw, 1.0);
    hw.source = HwSource::calibrated;
    return hw;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

ModelDesc load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path.string());
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line) || line != "# kernelloop-model v1")
        throw ParseError(path.string() + ":1: bad model header");
    ModelDesc m;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto parts = split_tabs(line);
        if (parts[0] == "model" && parts.size() == 2) {
            m.name = parts[1];
            continue;
        }
        if (parts[0] != "op" || parts.size() != 6)
            throw ParseError(path.string() + ":" + std::to_string(lineno + 1) +
                             ": expected op\\tname\\ttype\\tshape\\tdtype\\trepeat");
        ModelOp op;
        op.op_name = parts[1];
        if (parts[2] != "-")
            op.kernel_type_hint = kernel_type_from_string(parts[2]);
        op.shape = WorkloadShape::from_text(parts[3]);
        op.dtype = dtype_from_string(parts[4]);
        op.repeat = std::stoi(parts[5]);
        m.ops.push_back(std::move(op));
    }
    if (m.ops.empty())
        throw ParseError(path.string() + ": model has no ops");
    return m;
}

void save_model(const ModelDesc& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path.string());
    out << "# kernelloop-model v1\n";
    out << "model\t" << model.name << "\n";
    for (const auto& op : model.ops) {
        out << "op\t" << op.op_name << "\t"
            << (op.kernel_type_hint ? to_string(*op.kernel_type_hint) : "-")
            << "\t" << op.shape.to_text() << "\t" << to_string(op.dtype)
            << "\t" << op.repeat << "\n";
    }
}

std::string export_profile_text(const Profile& p) {
    std::string out = "# kernelloop-profile v1\n";
    out += "# model=" + p.model_name + " hardware=" + p.hardware.name +
           " peak_flops=" + format_double(p.hardware.peak_flops) +
           " peak_bandwidth=" + format_double(p.hardware.peak_bandwidth) +
           " source=" +
           (p.hardware.source == HwSource::calibrated ? "calibrated"
                                                      : "static_db") +
           " warmup=" + std::to_string(p.warmup_iters) +
           " iters=" + std::to_string(p.profile_iters) + "\n";
    for (const auto& e : p.entries) {
        out += e.op_name;
        out += '\t';
        out += e.kernel_type ? to_string(*e.kernel_type) : "unknown";
        out += '\t';
        out += e.shape.to_text();
        out += '\t';
        out += to_string(e.dtype);
        out += '\t';
        out += format_double(e.total_seconds);
        out += '\t';
        out += format_double(e.fraction);
        out += '\n';
    }
    return out;
}

Profile import_profile_text(const std::string& text) {
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line) || line != "# kernelloop-profile v1")
        throw ParseError("line 1: bad profile header");
    ++lineno;
    Profile p;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            // optional metadata comment
            std::stringstream meta(line.substr(1));
            std::string kv;
            while (meta >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = kv.substr(0, eq),
                                  val = kv.substr(eq + 1);
                if (key == "model") p.model_name = val;
                else if (key == "hardware") p.hardware.name = val;
                else if (key == "peak_flops") p.hardware.peak_flops = std::stod(val);
                else if (key == "peak_bandwidth") p.hardware.peak_bandwidth = std::stod(val);
                else if (key == "source")
                    p.hardware.source = val == "calibrated"
                                            ? HwSource::calibrated
                                            : HwSource::static_db;
                else if (key == "warmup") p.warmup_iters = std::stoi(val);
                else if (key == "iters") p.profile_iters = std::stoi(val);
            }
            continue;
        }
        const auto parts = split_tabs(line);
        if (parts.size() != 6)
            throw ParseError("line " + std::to_string(lineno) +
                             ": expected 6 tab-separated fields");
        ProfileEntry e;
        e.op_name = parts[0];
        try {
            if (parts[1] != "unknown")
                e.kernel_type = kernel_type_from_string(parts[1]);
            e.shape = WorkloadShape::from_text(parts[2]);
            e.dtype = dtype_from_string(parts[3]);
            e.total_seconds = std::stod(parts[4]);
            e.fraction = std::stod(parts[5]);
        } catch (const std::exception& ex) {
            throw ParseError("line " + std::to_string(lineno) + ": " +
                             ex.what());
        }
        if (e.kernel_type) validate_shape(*e.kernel_type, e.shape);
        p.entries.push_back(std::move(e));
    }
    if (p.entries.empty()) throw ParseError("profile has no entries");
    double total = 0.0;
    for (const auto& e : p.entries) total += e.fraction;
    if (total <= 0.0) throw ParseError("profile fractions sum to zero");
    for (auto& e : p.entries) e.fraction /= total;  // renormalize
    return p;
}

void export_profile(const Profile& p, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write profile: " + path.string());
    out << export_profile_text(p);
}

Profile import_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return import_profile_text(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace kernelloop::profiler
