#include "kernelloop/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kernelloop::planner {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string workspace_name(const KernelSpec& spec) {
    std::string dims;
    for (const auto& [n, v] : spec.primary_shape.dims) {
        if (!dims.empty()) dims += 'x';
        dims += std::to_string(v);
    }
    return to_string(spec.kernel_type) + "_" + dims + "_" +
           to_string(spec.dtype);
}

}  // namespace

double amdahl(double f, double s) {
    if (!(f >= 0.0 && f <= 1.0)) throw DomainError("amdahl: f outside [0,1]");
    if (!(s > 0.0)) throw DomainError("amdahl: s must be positive");
    return 1.0 / ((1.0 - f) + f / s);
}

OptimizationPlan build_plan(const profiler::Profile& profile,
                            const PlanOptions& opts) {
    struct Key {
        KernelType type;
        std::string shape;
        DType dtype;
        bool operator<(const Key& o) const {
            return std::tie(type, shape, dtype) <
                   std::tie(o.type, o.shape, o.dtype);
        }
    };
    std::map<Key, std::pair<WorkloadShape, double>> merged;
    for (const auto& e : profile.entries) {
        if (!e.kernel_type || !zoo::is_executable(*e.kernel_type)) continue;
        Key key{*e.kernel_type, e.shape.to_text(), e.dtype};
        auto [it, fresh] = merged.try_emplace(key, e.shape, 0.0);
        it->second.second += e.fraction;
        (void)fresh;
    }

    OptimizationPlan plan;
    plan.hardware = profile.hardware;
    for (const auto& [key, shape_f] : merged) {
        if (shape_f.second < opts.min_fraction) continue;
        PlanEntry entry;
        entry.kernel_spec =
            KernelSpec::make(key.type, shape_f.first, key.dtype);
        entry.kernel_spec.name = workspace_name(entry.kernel_spec);
        entry.f = shape_f.second;
        for (double s : kWhatIfSpeedups)
            entry.what_if[s] = amdahl(entry.f, s);
        plan.entries.push_back(std::move(entry));
    }
    if (plan.entries.empty())
        throw DomainError(
            "empty plan: profile has no supported optimizable entries");

    std::sort(plan.entries.begin(), plan.entries.end(),
              [](const PlanEntry& a, const PlanEntry& b) {
                  if (a.f != b.f) return a.f > b.f;
                  return a.kernel_spec.name < b.kernel_spec.name;
              });
    return plan;
}

std::string plan_to_text(const OptimizationPlan& plan) {
    std::string out = "# kernelloop-plan v1\n";
    out += "# hardware=" + plan.hardware.name +
           " peak_flops=" + format_double(plan.hardware.peak_flops) +
           " peak_bandwidth=" + format_double(plan.hardware.peak_bandwidth) +
           " source=" +
           (plan.hardware.source == HwSource::calibrated ? "calibrated"
                                                         : "static_db") +
           "\n";
    for (const auto& e : plan.entries) {
        out += e.kernel_spec.name;
        out += '\t';
        out += to_string(e.kernel_spec.kernel_type);
        out += '\t';
        out += e.kernel_spec.primary_shape.to_text();
        out += '\t';
        out += to_string(e.kernel_spec.dtype);
        out += '\t';
        out += format_double(e.f);
        for (double s : kWhatIfSpeedups) {
            out += '\t';
            out += format_double(e.what_if.at(s));
        }
        out += '\n';
    }
    return out;
}

OptimizationPlan plan_from_text(const std::string& text) {
    std::stringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "# kernelloop-plan v1")
        throw ParseError("bad plan header");
    OptimizationPlan plan;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::stringstream meta(line.substr(1));
            std::string kv;
            while (meta >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = kv.substr(0, eq),
                                  val = kv.substr(eq + 1);
                if (key == "hardware") plan.hardware.name = val;
                else if (key == "peak_flops") plan.hardware.peak_flops = std::stod(val);
                else if (key == "peak_bandwidth") plan.hardware.peak_bandwidth = std::stod(val);
                else if (key == "source")
                    plan.hardware.source = val == "calibrated"
                                               ? HwSource::calibrated
                                               : HwSource::static_db;
            }
            continue;
        }
        std::vector<std::string> parts;
        {
            std::stringstream ss(line);
            std::string part;
            while (std::getline(ss, part, '\t')) parts.push_back(part);
        }
        if (parts.size() != 5 + std::size(kWhatIfSpeedups))
            throw ParseError("plan line " + std::to_string(lineno) +
                             ": wrong field count");
        PlanEntry e;
        const KernelType type = kernel_type_from_string(parts[1]);
        e.kernel_spec = KernelSpec::make(
            type, WorkloadShape::from_text(parts[2]),
            dtype_from_string(parts[3]), parts[0]);
        e.f = std::stod(parts[4]);
        for (std::size_t i = 0; i < std::size(kWhatIfSpeedups); ++i)
            e.what_if[kWhatIfSpeedups[i]] = std::stod(parts[5 + i]);
        plan.entries.push_back(std::move(e));
    }
    if (plan.entries.empty()) throw ParseError("plan has no entries");
    return plan;
}

void save_plan(const OptimizationPlan& plan, const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write plan: " + p.string());
    out << plan_to_text(plan);
}

OptimizationPlan load_plan(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open plan: " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return plan_from_text(ss.str());
}

// ---------------------------------------------------------------------------
// Spec files and workspaces
// ---------------------------------------------------------------------------

void save_spec_file(const KernelSpec& spec, double f,
                    const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write spec file: " + path.string());
    out << "# kernelloop-spec v1\n";
    out << "name=" << spec.name << "\n";
    out << "type=" << to_string(spec.kernel_type) << "\n";
    for (const auto& [n, v] : spec.primary_shape.dims)
        out << "shape." << n << "=" << v << "\n";
    for (const auto& [n, v] : spec.half_shape.dims)
        out << "shape_half." << n << "=" << v << "\n";
    for (const auto& [n, v] : spec.double_shape.dims)
        out << "shape_double." << n << "=" << v << "\n";
    out << "dtype=" << to_string(spec.dtype) << "\n";
    out << "atol=" << format_double(spec.tolerance.atol) << "\n";
    out << "rtol=" << format_double(spec.tolerance.rtol) << "\n";
    out << "flops_primary=" << flops_of(spec.kernel_type, spec.primary_shape)
        << "\n";
    out << "bytes_primary="
        << bytes_of(spec.kernel_type, spec.primary_shape, spec.dtype) << "\n";
    out << "fraction=" << format_double(f) << "\n";
}

std::pair<KernelSpec, double> load_spec_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open spec file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "# kernelloop-spec v1")
        throw ParseError(path.string() + ": bad spec header");
    std::map<std::string, std::string> kv;
    WorkloadShape primary;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path.string() + ": expected key=value: " + line);
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key.rfind("shape.", 0) == 0) {
            primary.dims.emplace_back(key.substr(6), std::stoll(val));
        } else {
            kv[key] = val;
        }
    }
    KernelSpec spec = KernelSpec::make(kernel_type_from_string(kv.at("type")),
                                       primary,
                                       dtype_from_string(kv.at("dtype")),
                                       kv.at("name"));
    const double f = kv.count("fraction") ? std::stod(kv.at("fraction")) : 0.0;
    return {spec, f};
}

zoo::CandidateConfig Workspace::read_config() const {
    std::ifstream in(config_path());
    if (!in) throw IoError("cannot open config: " + config_path().string());
    std::stringstream ss;
    ss << in.rdbuf();
    zoo::CandidateConfig c = zoo::CandidateConfig::parse(ss.str());
    zoo::validate_config(c);
    return c;
}

void Workspace::write_config(const zoo::CandidateConfig& c) const {
    std::ofstream out(config_path());
    if (!out) throw IoError("cannot write config: " + config_path().string());
    out << c.serialize();
}

std::vector<Workspace> extract_workspaces(const OptimizationPlan& plan,
                                          const std::filesystem::path& out_dir,
                                          bool force) {
    std::filesystem::create_directories(out_dir);
    std::vector<Workspace> workspaces;
    int index = 0;
    for (const auto& entry : plan.entries) {
        char prefix[8];
        std::snprintf(prefix, sizeof prefix, "%02d_", index++);
        Workspace ws;
        ws.dir = out_dir / (prefix + entry.kernel_spec.name);
        ws.spec = entry.kernel_spec;
        ws.f = entry.f;
        if (std::filesystem::exists(ws.dir)) {
            if (!force)
                throw IoError("workspace already exists (use force): " +
                              ws.dir.string());
            std::filesystem::remove_all(ws.dir);
        }
        std::error_code ec;
        if (!std::filesystem::create_directories(ws.dir, ec) || ec)
            throw IoError("extraction error: cannot create " +
                          ws.dir.string());
        save_spec_file(ws.spec, ws.f, ws.spec_path());
        ws.write_config(zoo::default_config(ws.spec.kernel_type));
        std::ofstream ledger(ws.ledger_path());
        if (!ledger)
            throw IoError("extraction error: cannot create ledger in " +
                          ws.dir.string());
        ledger << kLedgerHeader << "\n";
        workspaces.push_back(std::move(ws));
    }
    return workspaces;
}

Workspace load_workspace(const std::filesystem::path& dir) {
    Workspace ws;
    ws.dir = dir;
    auto [spec, f] = load_spec_file(ws.spec_path());
    ws.spec = std::move(spec);
    ws.f = f;
    ws.read_config();  // validates
    return ws;
}

}  // namespace kernelloop::planner
