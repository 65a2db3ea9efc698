#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <regex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cubicspin.hpp"

namespace cubicspin::cli {

using Json = nlohmann::json;

enum ExitCode : int {
    exit_ok = 0,
    exit_validation = 2,
    exit_numeric = 3,
    exit_unknown_command = 64,
    exit_malformed_config = 65,
    exit_io = 74,
};

// The config could not be read as the command's parameter set.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class Kind { integer, real, text, real_list };

struct ParamSpec {
    std::string key;
    Kind kind;
    Json fallback;
    std::string help;
};

struct CommandSpec {
    std::string name;
    std::string summary;
    std::vector<ParamSpec> params;
};

inline const std::vector<CommandSpec>& commands()
{
    static const std::vector<CommandSpec> table = [] {
        const ParamSpec seed{"seed", Kind::integer, 1, "RNG seed (sampling commands)"};
        std::vector<CommandSpec> t{
            {"sweep",
             "QFI of the cubic or OAT evolution of |pi/2,0> on a uniform time grid",
             {{"n", Kind::integer, 200, "number of spins"},
              {"scheme", Kind::text, "cubic", "cubic | oat"},
              {"t_max", Kind::real, 0.26, "last time of the grid"},
              {"points", Kind::integer, 2000, "grid points including t = 0"}}},
            {"peaks",
             "QFI at the peak schedule t_k with the GHZ-projection estimate",
             {{"n", Kind::integer, 1500, "number of spins"}, {"k_max", Kind::integer, 5, "number of peaks"}}},
            {"cat",
             "Fourier decomposition of the state at t = pi/cat_n, reconstruction overlap, Husimi grid",
             {{"n", Kind::integer, 200, "number of spins"},
              {"cat_n", Kind::integer, 12, "evolution time pi/cat_n"},
              {"husimi_theta", Kind::integer, 64, "Husimi polar points (>= 32)"},
              {"husimi_phi", Kind::integer, 128, "Husimi azimuthal points (>= 64)"}}},
            {"parity",
             "Sx-basis parity probe of the cubic evolution",
             {{"n", Kind::integer, 201, "number of spins"},
              {"t", Kind::real, pi / 3.0, "evolution time"},
              {"samples", Kind::integer, 10000, "sampled measurements"},
              {"frame", Kind::text, "rotating", "rotating (undo chi t Sz before readout) | lab"}}},
            {"hybrid",
             "(epsilon, t) search for the fastest GHZ preparation under chi (eps Sz^3 + Sy^2)",
             {{"n", Kind::integer, 20, "number of spins"},
              {"eps_min", Kind::real, 0.01, "smallest epsilon"},
              {"eps_max", Kind::real, 1.0, "largest epsilon"},
              {"t_min", Kind::real, 0.0, "start of the time window"},
              {"t_max", Kind::real, 0.5 * pi, "end of the time window"},
              {"d_eps", Kind::real, 0.01, "epsilon grid step"},
              {"d_t", Kind::real, 0.01, "time grid step"},
              {"t_caps", Kind::real_list, Json::array(), "extra constrained searches, one per time cap"}}},
            {"damped",
             "QFI under single-spin decay and collective dephasing",
             {{"n", Kind::integer, 20, "number of spins (<= 60)"},
              {"scheme", Kind::text, "cubic", "cubic | oat"},
              {"gamma", Kind::real, 0.1, "single-spin decay rate"},
              {"gamma_dephasing", Kind::real, 0.0, "collective dephasing rate"},
              {"t_max", Kind::real, 0.5 * pi, "last time of the grid"},
              {"points", Kind::integer, 101, "grid points including t = 0"}}},
            {"gates",
             "Synthesis error of exp(-i 8 delta^4 Sz^3) and its convergence order",
             {{"n", Kind::integer, 4, "number of spins (<= 12)"},
              {"deltas", Kind::real_list, Json::array({0.1, 0.05, 0.025}), "step sizes"}}},
            {"cavity",
             "Cavity-QED parameters mapped to the effective cubic coupling",
             {{"n", Kind::integer, 1000, "number of spins"},
              {"g", Kind::real, 1.0, "atom-cavity coupling"},
              {"kappa", Kind::real, 10.0, "cavity linewidth (ignored when eta > 0)"},
              {"eta", Kind::real, 0.0, "cooperativity; sets kappa when > 0"},
              {"gamma_atom", Kind::real, 10.0, "atomic linewidth"},
              {"delta", Kind::real, 150.0, "detuning"},
              {"n_photons", Kind::real, 1e6, "photons in the pulse"}}},
        };
        for (auto& c : t) c.params.push_back(seed);
        return t;
    }();
    return table;
}

inline const CommandSpec* find_command(std::string_view name)
{
    for (const auto& c : commands())
        if (c.name == name) return &c;
    return nullptr;
}

inline const ParamSpec* find_param(const CommandSpec& cmd, std::string_view key)
{
    for (const auto& p : cmd.params)
        if (p.key == key) return &p;
    return nullptr;
}

// Accepts plain numbers and pi, pi/b, a*pi, a*pi/b.
inline std::optional<double> parse_real(std::string_view text)
{
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec == std::errc() && ptr == end) return v;
    static const std::regex pi_form(R"(^\s*(?:([-+]?[0-9.eE+-]+)\s*\*\s*)?(-?)pi(?:\s*/\s*([0-9.eE+-]+))?\s*$)");
    std::cmatch m;
    if (!std::regex_match(text.data(), end, m, pi_form)) return std::nullopt;
    auto num = [](const std::string& s) -> std::optional<double> {
        double x = 0.0;
        auto [p, e] = std::from_chars(s.data(), s.data() + s.size(), x);
        if (e != std::errc() || p != s.data() + s.size()) return std::nullopt;
        return x;
    };
    double a = 1.0, b = 1.0;
    if (m[1].matched) {
        auto x = num(m[1].str());
        if (!x) return std::nullopt;
        a = *x;
    }
    if (m[3].matched) {
        auto x = num(m[3].str());
        if (!x || *x == 0.0) return std::nullopt;
        b = *x;
    }
    return (m[2].length() ? -1.0 : 1.0) * a * pi / b;
}

// Converts a command-line string to the parameter's JSON type.
inline Json parse_flag_value(const ParamSpec& spec, std::string_view text)
{
    auto bad = [&] { return ConfigError("--" + spec.key + ": cannot parse '" + std::string(text) + "'"); };
    switch (spec.kind) {
    case Kind::integer: {
        std::int64_t v = 0;
        const char* end = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(text.data(), end, v);
        if (ec != std::errc() || ptr != end) throw bad();
        return v;
    }
    case Kind::real: {
        const auto v = parse_real(text);
        if (!v) throw bad();
        return *v;
    }
    case Kind::text:
        return std::string(text);
    case Kind::real_list: {
        Json arr = Json::array();
        size_t start = 0;
        while (start <= text.size()) {
            const size_t comma = std::min(text.find(',', start), text.size());
            const auto v = parse_real(text.substr(start, comma - start));
            if (!v) throw bad();
            arr.push_back(*v);
            start = comma + 1;
        }
        return arr;
    }
    }
    throw bad();
}

// A JSON number or a string in the forms parse_real accepts.
template <class MakeError>
double real_value(const Json& v, MakeError&& error)
{
    if (v.is_number()) return v.get<double>();
    if (v.is_string())
        if (const auto x = parse_real(v.get<std::string>())) return *x;
    throw error();
}

// Defaults overlaid with the given values, type-checked. Throws ConfigError.
inline Json resolve_config(const CommandSpec& cmd, const Json& overrides)
{
    if (!overrides.is_null() && !overrides.is_object()) throw ConfigError("config must be a JSON object");
    Json cfg = Json::object();
    for (const auto& p : cmd.params) cfg[p.key] = p.fallback;
    if (overrides.is_null()) return cfg;
    for (const auto& [key, value] : overrides.items()) {
        const ParamSpec* p = find_param(cmd, key);
        if (!p) throw ConfigError("unknown parameter '" + key + "' for command " + cmd.name);
        if (value.is_null()) continue;
        auto type_error = [&](const char* want) {
            return ConfigError("parameter '" + key + "' must be " + want);
        };
        switch (p->kind) {
        case Kind::integer:
            if (value.is_number_integer()) cfg[key] = value.get<std::int64_t>();
            else if (value.is_number_float() && std::isfinite(value.get<double>()) &&
                     std::floor(value.get<double>()) == value.get<double>() &&
                     std::abs(value.get<double>()) < 9e15)
                cfg[key] = static_cast<std::int64_t>(value.get<double>());
            else throw type_error("an integer");
            break;
        case Kind::real:
            cfg[key] = real_value(value, [&] { return type_error("a number"); });
            break;
        case Kind::text:
            if (!value.is_string()) throw type_error("a string");
            cfg[key] = value;
            break;
        case Kind::real_list: {
            Json arr = Json::array();
            if (value.is_number()) arr.push_back(value.get<double>());
            else if (value.is_array()) {
                for (const auto& v : value) arr.push_back(real_value(v, [&] { return type_error("a list of numbers"); }));
            } else throw type_error("a list of numbers");
            cfg[key] = arr;
            break;
        }
        }
    }
    return cfg;
}

// A run manifest carries its parameters under "parameters"; anything else is a plain config.
inline Json config_from_file_content(const std::string& command, const Json& doc)
{
    if (doc.is_object() && doc.contains("parameters") && doc.contains("command")) {
        if (!doc["command"].is_string() || doc["command"].get<std::string>() != command)
            throw ConfigError("manifest was written by a different command");
        return doc["parameters"];
    }
    return doc;
}

inline Json load_config_file(const std::string& command, const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_file_content(command, doc);
}

struct Diagnostic {
    enum class Level { warning, error };
    Level level;
    std::string message;
};

inline Json to_json(const Diagnostic& d)
{
    return {{"level", d.level == Diagnostic::Level::error ? "error" : "warning"}, {"message", d.message}};
}

inline bool has_errors(const std::vector<Diagnostic>& d)
{
    return std::any_of(d.begin(), d.end(), [](const Diagnostic& x) { return x.level == Diagnostic::Level::error; });
}

// Worker count from CUBICSPIN_THREADS; falls back to the hardware count.
inline unsigned resolve_threads(const char* env, std::vector<Diagnostic>* diags = nullptr)
{
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (!env || !*env) return hw;
    unsigned v = 0;
    const std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v == 0 || v > 1024) {
        if (diags)
            diags->push_back({Diagnostic::Level::warning,
                              "CUBICSPIN_THREADS='" + std::string(s) + "' ignored, using " + std::to_string(hw)});
        return hw;
    }
    return v;
}

namespace detail {

inline double real_of(const Json& cfg, const char* key) { return cfg.at(key).get<double>(); }
inline long long int_of(const Json& cfg, const char* key) { return cfg.at(key).get<long long>(); }
inline std::string text_of(const Json& cfg, const char* key) { return cfg.at(key).get<std::string>(); }
inline std::vector<double> list_of(const Json& cfg, const char* key) { return cfg.at(key).get<std::vector<double>>(); }

inline Scheme scheme_of(const Json& cfg) { return text_of(cfg, "scheme") == "oat" ? Scheme::oat : Scheme::cubic; }

inline CavityParams cavity_params(const Json& c)
{
    const int n = static_cast<int>(int_of(c, "n"));
    if (real_of(c, "eta") > 0.0)
        return CavityParams::from_cooperativity(real_of(c, "g"), real_of(c, "eta"), real_of(c, "gamma_atom"),
                                                real_of(c, "delta"), real_of(c, "n_photons"), n);
    return CavityParams(real_of(c, "g"), real_of(c, "kappa"), real_of(c, "gamma_atom"), real_of(c, "delta"),
                        real_of(c, "n_photons"), n);
}

} // namespace detail

// Domain checks only; never throws and never touches the file system.
inline std::vector<Diagnostic> validate(const std::string& command, const Json& overrides)
{
    using L = Diagnostic::Level;
    std::vector<Diagnostic> d;
    const CommandSpec* cmd = find_command(command);
    if (!cmd) {
        d.push_back({L::error, "unknown command '" + command + "'"});
        return d;
    }
    Json c;
    try {
        c = resolve_config(*cmd, overrides);
    } catch (const ConfigError& e) {
        d.push_back({L::error, e.what()});
        return d;
    }
    using namespace detail;
    auto err = [&](std::string m) { d.push_back({L::error, std::move(m)}); };
    auto warn = [&](std::string m) { d.push_back({L::warning, std::move(m)}); };
    auto finite = [&](const char* key) {
        if (!std::isfinite(real_of(c, key))) {
            err(std::string(key) + " must be finite");
            return false;
        }
        return true;
    };
    for (const auto& p : cmd->params)
        if (p.kind == Kind::real) finite(p.key.c_str());

    const long long n = int_of(c, "n");
    if (n < 1) err("n must be >= 1");
    if (int_of(c, "seed") < 0) err("seed must be >= 0");
    if (c.contains("scheme")) {
        const std::string s = text_of(c, "scheme");
        if (s != "cubic" && s != "oat") err("scheme must be 'cubic' or 'oat', got '" + s + "'");
    }
    if (c.contains("points") && int_of(c, "points") < 2) err("points must be >= 2");

    if (command == "sweep" || command == "damped") {
        if (!(real_of(c, "t_max") > 0.0)) err("t_max must be > 0");
    }
    if (command == "peaks") {
        if (int_of(c, "k_max") < 1) err("k_max must be >= 1");
    }
    if (command == "cat") {
        if (int_of(c, "cat_n") < 1) err("cat_n must be >= 1");
        if (int_of(c, "husimi_theta") < 32 || int_of(c, "husimi_phi") < 64)
            err("Husimi grid must be at least 32 x 64");
    }
    if (command == "parity") {
        if (int_of(c, "samples") < 1) err("samples must be >= 1");
        const std::string f = text_of(c, "frame");
        if (f != "rotating" && f != "lab") err("frame must be 'rotating' or 'lab', got '" + f + "'");
        if (!(real_of(c, "t") >= 0.0)) err("t must be >= 0");
        else if (std::abs(real_of(c, "t") - pi / 3.0) > 1e-12) warn("parity probe defined at t=pi/(3 chi)");
    }
    if (command == "hybrid") {
        const double e0 = real_of(c, "eps_min"), e1 = real_of(c, "eps_max");
        const double t0 = real_of(c, "t_min"), t1 = real_of(c, "t_max");
        if (e0 < 0.0) err("eps_min must be >= 0");
        if (e1 < e0) err("epsilon range is empty");
        if (t0 < 0.0) err("t_min must be >= 0");
        if (!(t1 > t0)) err("time range is empty");
        if (!(real_of(c, "d_eps") > 0.0) || !(real_of(c, "d_t") > 0.0)) err("grid steps must be > 0");
        for (double cap : list_of(c, "t_caps"))
            if (!(cap > t0) || !std::isfinite(cap)) err("t_caps entries must lie above t_min");
        if (n > 400) warn("hybrid search at N > 400 is slow (one dense eigensolve per epsilon)");
    }
    if (command == "damped") {
        if (real_of(c, "gamma") < 0.0) err("rate must be >= 0 (gamma)");
        if (real_of(c, "gamma_dephasing") < 0.0) err("rate must be >= 0 (gamma_dephasing)");
        if (n > 60) err("damped supports N <= 60");
    }
    if (command == "gates") {
        const auto ds = list_of(c, "deltas");
        if (ds.size() < 2) err("deltas needs at least two values");
        for (double x : ds) {
            if (!(x > 0.0) || !std::isfinite(x)) err("deltas must be > 0");
            else if (x > 0.3) warn("delta " + std::to_string(x) + " > 0.3: small-angle expansion invalid");
        }
        if (n > 12) err("gates supports N <= 12");
    }
    if (command == "cavity") {
        for (const char* k : {"g", "gamma_atom", "delta"})
            if (!(real_of(c, k) > 0.0)) err(std::string("rate must be > 0 (") + k + ")");
        if (!(real_of(c, "eta") > 0.0) && !(real_of(c, "kappa") > 0.0)) err("rate must be > 0 (kappa)");
        if (real_of(c, "eta") < 0.0) err("cooperativity must be >= 0");
        const double np = real_of(c, "n_photons");
        if (np < 0.0 || std::floor(np) != np) err("n_photons must be a non-negative integer");
        if (!has_errors(d) && n >= 1) {
            const CavityParams p = cavity_params(c);
            const double k0n = p.kappa0() * static_cast<double>(n);
            if (!(k0n < 0.1))
                warn("cavity regime: kappa0*N = " + std::to_string(k0n) + " >= 0.1, third-order expansion not controlled");
            if (!p.detuning_ok()) warn("detuning does not dominate g, kappa and gamma_atom by 10x");
        }
    }
    return d;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

// Hash of everything that determines the data: command, parameters, version.
inline std::string manifest_hash(const std::string& command, const Json& parameters)
{
    const Json canonical{{"command", command}, {"parameters", parameters}, {"version", version}};
    return hex64(fnv1a64(canonical.dump()));
}

inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& hash, const std::vector<std::string>& columns)
        : out_(path, std::ios::binary), path_(path)
    {
        if (!out_) throw std::ios_base::failure("cannot write " + path.string());
        out_ << "# manifest-hash " << hash << '\n';
        write_fields(columns);
    }

    CsvWriter& row(const std::vector<std::string>& fields)
    {
        write_fields(fields);
        return *this;
    }

    void close()
    {
        out_.flush();
        if (!out_) throw std::ios_base::failure("write failed for " + path_.string());
        out_.close();
    }

private:
    void write_fields(const std::vector<std::string>& f)
    {
        for (size_t i = 0; i < f.size(); ++i) out_ << (i ? "," : "") << f[i];
        out_ << '\n';
    }

    std::ofstream out_;
    std::filesystem::path path_;
};

// Index-striped worker pool; f(i) must only write slot i.
template <class F>
void parallel_for(size_t count, unsigned threads, F&& f)
{
    const unsigned workers = static_cast<unsigned>(std::min<size_t>(std::max(1u, threads), std::max<size_t>(1, count)));
    if (workers <= 1) {
        for (size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (size_t i = w; i < count; i += workers) f(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::vector<double> uniform_grid(double t_max, long long points)
{
    std::vector<double> t(static_cast<size_t>(points));
    for (long long i = 0; i < points; ++i) t[i] = t_max * static_cast<double>(i) / static_cast<double>(points - 1);
    return t;
}

struct RunResult {
    int exit_code = exit_ok;
    Json result;
    std::vector<std::string> outputs;
    std::vector<Diagnostic> diagnostics;
    std::string manifest_hash;
};

struct RunContext {
    std::filesystem::path out_dir;
    std::string command;
    std::string hash;
    unsigned threads = 1;
    std::vector<std::string> outputs;

    CsvWriter csv(const std::string& suffix, const std::vector<std::string>& columns)
    {
        const auto path = out_dir / (command + suffix + ".csv");
        outputs.push_back(path.string());
        return CsvWriter(path, hash, columns);
    }
};

namespace detail {

inline Json run_sweep(const Json& c, RunContext& ctx)
{
    const int n = static_cast<int>(int_of(c, "n"));
    const Scheme scheme = scheme_of(c);
    const auto t = uniform_grid(real_of(c, "t_max"), int_of(c, "points"));
    const SpinEnsemble ens(n);
    const DickeVector psi0 = css_state(ens, CssParams(0.5 * pi, 0.0));
    const ZDiagonalHamiltonian h = scheme_hamiltonian(scheme);
    std::vector<double> q(t.size()), qa(t.size());
    parallel_for(t.size(), ctx.threads, [&](size_t i) {
        q[i] = qfi_pure(evolve_zdiag(psi0, h, t[i])).qfi;
        qa[i] = scheme == Scheme::cubic ? analytic_weak_qfi(n, t[i]) : weak_limit_qfi(n, n * t[i], Scheme::oat);
    });
    auto w = ctx.csv("", {"t", "alpha", "qfi", "qfi_analytic"});
    size_t best = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        w.row({fmt17(t[i]), fmt17(n * t[i]), fmt17(q[i]), fmt17(qa[i])});
        if (q[i] > q[best]) best = i;
    }
    w.close();
    return {{"n", n}, {"scheme", to_string(scheme)}, {"points", t.size()}, {"qfi_max", q[best]},
            {"t_at_max", t[best]}, {"qfi_max_over_n2", q[best] / (double(n) * n)}};
}

inline Json run_peaks(const Json& c, RunContext& ctx)
{
    const int n = static_cast<int>(int_of(c, "n"));
    const int k_max = static_cast<int>(int_of(c, "k_max"));
    const SpinEnsemble ens(n);
    const Parity parity = ens.parity();
    const auto t = peak_schedule(parity, k_max);
    const DickeVector psi0 = css_state(ens, CssParams(0.5 * pi, 0.0));
    const double n2 = double(n) * n;
    std::vector<double> q(t.size()), est(t.size());
    parallel_for(t.size(), ctx.threads, [&](size_t i) {
        q[i] = qfi_pure(evolve_zdiag(psi0, ZDiagonalHamiltonian::cubic(), t[i])).qfi;
        const int k = static_cast<int>(i) + 1;
        const int cat_n = parity == Parity::even ? 12 * k : 3 * (2 * k - 1);
        est[i] = ghz_projection_qfi(decompose_cat(cat_n, parity).ghz, n).qfi;
    });
    auto w = ctx.csv("", {"k", "t", "qfi", "qfi_over_n2", "ghz_estimate_over_n2", "ghz_gap"});
    Json rows = Json::array();
    for (size_t i = 0; i < t.size(); ++i) {
        const double gap = std::abs(est[i] - q[i]) / q[i];
        w.row({std::to_string(i + 1), fmt17(t[i]), fmt17(q[i]), fmt17(q[i] / n2), fmt17(est[i] / n2), fmt17(gap)});
        rows.push_back({{"k", i + 1}, {"t", t[i]}, {"qfi_over_n2", q[i] / n2}, {"ghz_estimate_over_n2", est[i] / n2}});
    }
    w.close();
    return {{"n", n}, {"parity", to_string(parity)}, {"peaks", rows}};
}

inline Json run_cat(const Json& c, RunContext& ctx)
{
    const int n = static_cast<int>(int_of(c, "n"));
    const int cat_n = static_cast<int>(int_of(c, "cat_n"));
    const SpinEnsemble ens(n);
    const DickeVector evolved =
        evolve_zdiag(css_state(ens, CssParams(0.5 * pi, 0.0)), ZDiagonalHamiltonian::cubic(), pi / cat_n);
    const CatState cs = cat_state(ens, cat_n);
    const double overlap = std::abs(cs.state.overlap(evolved));
    auto w = ctx.csv("", {"q", "phi", "re", "im", "abs"});
    for (const auto& comp : cs.decomposition.components)
        w.row({std::to_string(comp.q), fmt17(comp.phi), fmt17(comp.amplitude.real()), fmt17(comp.amplitude.imag()),
               fmt17(std::abs(comp.amplitude))});
    w.close();
    const HusimiGrid g = husimi(evolved, static_cast<int>(int_of(c, "husimi_theta")),
                                static_cast<int>(int_of(c, "husimi_phi")));
    auto hw = ctx.csv("_husimi", {"theta", "phi", "q"});
    for (size_t i = 0; i < g.thetas.size(); ++i)
        for (size_t j = 0; j < g.phis.size(); ++j) hw.row({fmt17(g.thetas[i]), fmt17(g.phis[j]), fmt17(g.at(i, j))});
    hw.close();
    return {{"n", n},
            {"cat_n", cat_n},
            {"parity", to_string(ens.parity())},
            {"reconstruction_overlap", overlap},
            {"components", cs.decomposition.components.size()},
            {"ghz_components", cs.decomposition.ghz.size()},
            {"qfi", qfi_pure(evolved).qfi},
            {"husimi_max", g.max()},
            {"husimi_normalization", g.normalization(n)}};
}

inline Json run_parity(const Json& c, RunContext& ctx)
{
    const int n = static_cast<int>(int_of(c, "n"));
    const SpinEnsemble ens(n);
    const DickeVector psi =
        evolve_zdiag(css_state(ens, CssParams(0.5 * pi, 0.0)), ZDiagonalHamiltonian::cubic(), real_of(c, "t"));
    const double frame = text_of(c, "frame") == "lab" ? 0.0 : real_of(c, "t");
    const ParityProbe p = sx_parity_probe(psi, static_cast<std::uint64_t>(int_of(c, "samples")),
                                          static_cast<std::uint64_t>(int_of(c, "seed")), frame);
    auto w = ctx.csv("", {"m_x", "probability", "count"});
    for (size_t k = 0; k < p.m_x.size(); ++k)
        w.row({fmt17(p.m_x[k]), fmt17(p.probability[k]), std::to_string(p.counts[k])});
    w.close();
    const double qfi = qfi_pure(psi).qfi;
    return {{"n", n},
            {"t", real_of(c, "t")},
            {"frame", text_of(c, "frame")},
            {"verdict", to_string(p.verdict)},
            {"p_top", p.p_top},
            {"qfi", qfi},
            {"qfi_over_n", qfi / n},
            {"qfi_over_n2", qfi / (double(n) * n)}};
}

inline Json search_json(const GhzSearchResult& r)
{
    const double n2 = double(r.n) * r.n;
    return {{"N", r.n},
            {"epsilon_opt", r.epsilon_opt},
            {"t_f", r.t_f},
            {"qfi_max", r.qfi_max},
            {"qfi_over_N2", r.qfi_max / n2},
            {"fidelity", r.fidelity},
            {"phase_free_fidelity", r.phase_free_fidelity},
            {"ghz_phi", r.ghz_phi},
            {"ghz_sign", to_string(r.ghz_sign)},
            {"speedup", r.speedup},
            {"evaluations", r.evaluations}};
}

inline Json run_hybrid(const Json& c, RunContext& ctx)
{
    const int n = static_cast<int>(int_of(c, "n"));
    GhzSearchOptions opt;
    opt.d_eps = real_of(c, "d_eps");
    opt.d_t = real_of(c, "d_t");
    opt.threads = ctx.threads;
    const Range eps{real_of(c, "eps_min"), real_of(c, "eps_max")};
    const Range tr{real_of(c, "t_min"), real_of(c, "t_max")};
    const GhzLandscape land(n, eps, tr, opt);
    const GhzSearchResult global = land.best();
    const auto caps = list_of(c, "t_caps");
    const auto constrained = land.constrained_sweep(caps);

    const double n2 = double(n) * n;
    auto w = ctx.csv("", {"N", "epsilon_opt", "t_f", "qfi_over_N2", "fidelity", "speedup", "t_cap",
                          "phase_free_fidelity"});
    auto put = [&](const GhzSearchResult& r, double cap) {
        w.row({std::to_string(r.n), fmt17(r.epsilon_opt), fmt17(r.t_f), fmt17(r.qfi_max / n2), fmt17(r.fidelity),
               fmt17(r.speedup), fmt17(cap), fmt17(r.phase_free_fidelity)});
    };
    put(global, tr.hi);
    for (size_t i = 0; i < caps.size(); ++i) put(constrained[i], caps[i]);
    w.close();

    auto gw = ctx.csv("_grid", {"epsilon", "t", "qfi_over_N2"});
    for (size_t i = 0; i < land.eps_grid().size(); ++i)
        for (size_t j = 0; j < land.t_grid().size(); ++j)
            gw.row({fmt17(land.eps_grid()[i]), fmt17(land.t_grid()[j]), fmt17(land.qfi_at_cell(i, j) / n2)});
    gw.close();

    Json out = search_json(global);
    Json cons = Json::array();
    for (size_t i = 0; i < caps.size(); ++i) {
        Json r = search_json(constrained[i]);
        r["t_cap"] = caps[i];
        cons.push_back(r);
    }
    out["constrained"] = cons;
    return out;
}

inline Json run_damped(const Json& c, RunContext& ctx)
{
    const int n = static_cast<int>(int_of(c, "n"));
    const Scheme scheme = scheme_of(c);
    const LindbladParams lp(real_of(c, "gamma"), real_of(c, "gamma_dephasing"));
    const auto t = uniform_grid(real_of(c, "t_max"), int_of(c, "points"));
    const auto rows = damped_qfi_sweep(scheme, n, lp, t);
    auto w = ctx.csv("", {"t", "trace", "qfi", "n_x", "n_y", "n_z", "mean_sz", "min_eigenvalue"});
    size_t best = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto& d = r.qfi.direction;
        w.row({fmt17(r.t), fmt17(r.trace), fmt17(r.qfi.qfi), fmt17(d[0]), fmt17(d[1]), fmt17(d[2]), fmt17(r.mean_sz),
               fmt17(r.min_eigenvalue)});
        if (r.qfi.qfi > rows[best].qfi.qfi) best = i;
    }
    w.close();
    return {{"n", n},
            {"scheme", to_string(scheme)},
            {"gamma", lp.gamma},
            {"gamma_dephasing", lp.gamma_dephasing},
            {"qfi_max", rows[best].qfi.qfi},
            {"t_at_max", rows[best].t},
            {"final_trace", rows.back().trace}};
}

inline Json run_gates(const Json& c, RunContext& ctx)
{
    const int n = static_cast<int>(int_of(c, "n"));
    const SpinEnsemble ens(n);
    const auto deltas = list_of(c, "deltas");
    std::vector<CubicSynthesis> syn;
    for (double d : deltas) syn.push_back(synthesize_cubic(ens, d));
    auto w = ctx.csv("", {"delta", "error", "order"});
    Json errors = Json::array(), orders = Json::array(), warnings = Json::array();
    for (size_t i = 0; i < deltas.size(); ++i) {
        double order = std::numeric_limits<double>::quiet_NaN();
        if (i > 0) {
            order = std::log(syn[i - 1].error_to_target / syn[i].error_to_target) / std::log(deltas[i - 1] / deltas[i]);
            orders.push_back(order);
        }
        w.row({fmt17(deltas[i]), fmt17(syn[i].error_to_target), fmt17(order)});
        errors.push_back(syn[i].error_to_target);
        if (!syn[i].warning.empty()) warnings.push_back(syn[i].warning);
    }
    w.close();
    return {{"n", n},
            {"deltas", deltas},
            {"errors", errors},
            {"orders", orders},
            {"pulses_per_gate", syn.front().sequence.size()},
            {"linear_coefficient_fit", syn.front().linear_coefficient_fit},
            {"linear_coefficient_printed", syn.front().linear_coefficient_printed},
            {"cubic_coefficient_fit", syn.front().cubic_coefficient_fit},
            {"warnings", warnings}};
}

inline Json run_cavity(const Json& c, RunContext& ctx)
{
    const CavityParams p = cavity_params(c);
    const EffectiveCoupling e = effective_coupling(p);
    const auto ms = dicke_m_values(p.n_spins);
    const PhaseExpansionError pe = phase_expansion_error(p, ms);
    auto w = ctx.csv("", {"m", "exact_phase", "cubic_phase", "abs_error"});
    for (double m : ms) {
        const double a = exact_phase(e.kappa0, m), b = cubic_phase(e.kappa0, m);
        w.row({fmt17(m), fmt17(a), fmt17(b), fmt17(std::abs(a - b))});
    }
    w.close();
    return {{"n", p.n_spins},
            {"kappa", p.kappa},
            {"eta", p.eta()},
            {"kappa0", e.kappa0},
            {"mu_n", e.mu_n},
            {"mu_n_cooperativity", e.mu_n_cooperativity},
            {"alpha_eff", e.alpha_eff},
            {"regime_ok", e.regime_ok},
            {"detuning_ok", e.detuning_ok},
            {"t0", e.t0},
            {"interaction_time", e.interaction_time},
            {"max_phase_error", pe.max_error},
            {"cubic_span", pe.cubic_span},
            {"pole_proximity", pe.pole_proximity}};
}

inline Json dispatch(const std::string& command, const Json& c, RunContext& ctx)
{
    if (command == "sweep") return run_sweep(c, ctx);
    if (command == "peaks") return run_peaks(c, ctx);
    if (command == "cat") return run_cat(c, ctx);
    if (command == "parity") return run_parity(c, ctx);
    if (command == "hybrid") return run_hybrid(c, ctx);
    if (command == "damped") return run_damped(c, ctx);
    if (command == "gates") return run_gates(c, ctx);
    return run_cavity(c, ctx);
}

inline void write_json(const std::filesystem::path& path, const Json& doc)
{
    std::ofstream out(path, std::ios::binary);
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw std::ios_base::failure("write failed for " + path.string());
}

} // namespace detail

// Runs one command: data CSV(s), <command>.json with the scalar results and a
// <command>.manifest.json sidecar, all under out_dir.
inline RunResult run(const std::string& command, const Json& overrides, const std::filesystem::path& out_dir,
                     std::ostream& out, std::ostream& err, std::optional<unsigned> threads = std::nullopt)
{
    RunResult res;
    const CommandSpec* cmd = find_command(command);
    if (!cmd) {
        err << "error: unknown command '" << command << "'\n";
        res.exit_code = exit_unknown_command;
        return res;
    }
    Json cfg;
    try {
        cfg = resolve_config(*cmd, overrides);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        res.exit_code = exit_malformed_config;
        return res;
    }
    res.diagnostics = validate(command, cfg);
    const unsigned workers = threads ? std::max(1u, *threads) : resolve_threads(std::getenv("CUBICSPIN_THREADS"), &res.diagnostics);
    for (const auto& d : res.diagnostics)
        err << (d.level == Diagnostic::Level::error ? "error: " : "warning: ") << d.message << '\n';
    if (has_errors(res.diagnostics)) {
        res.exit_code = exit_validation;
        return res;
    }

    RunContext ctx{out_dir, command, manifest_hash(command, cfg), workers, {}};
    res.manifest_hash = ctx.hash;
    const auto start = std::chrono::steady_clock::now();
    try {
        std::filesystem::create_directories(out_dir);
        res.result = detail::dispatch(command, cfg, ctx);
        const auto result_path = out_dir / (command + ".json");
        detail::write_json(result_path, res.result);
        ctx.outputs.push_back(result_path.string());
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        Json diags = Json::array();
        for (const auto& d : res.diagnostics) diags.push_back(to_json(d));
        const Json manifest{{"command", command},
                            {"version", version},
                            {"parameters", cfg},
                            {"seed", cfg.at("seed")},
                            {"threads", workers},
                            {"outputs", ctx.outputs},
                            {"wall_time_s", wall},
                            {"manifest_hash", ctx.hash},
                            {"diagnostics", diags}};
        const auto manifest_path = out_dir / (command + ".manifest.json");
        detail::write_json(manifest_path, manifest);
        ctx.outputs.push_back(manifest_path.string());
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        res.exit_code = exit_validation;
        return res;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        res.exit_code = exit_numeric;
        return res;
    } catch (const std::ios_base::failure& e) {
        err << "i/o failure: " << e.what() << '\n';
        res.exit_code = exit_io;
        return res;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "i/o failure: " << e.what() << '\n';
        res.exit_code = exit_io;
        return res;
    }
    res.outputs = ctx.outputs;
    out << res.result.dump(2) << '\n';
    return res;
}

} // namespace cubicspin::cli
