#pragma once

// Run configuration, flat key-value config files, CSV/manifest output and the
// task dispatcher behind the `dqpt` command-line tool.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dqpt/criticality.hpp"
#include "dqpt/mode_dynamics.hpp"
#include "dqpt/model.hpp"
#include "dqpt/observables.hpp"
#include "dqpt/version.hpp"

namespace dqpt::cli {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numerical = 3 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Formatting and parsing of scalars
// ---------------------------------------------------------------------------

/// 17 significant digits; round-trips every finite double.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto pos = s.find(sep, start);
        const auto piece = trim(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start));
        if (!piece.empty()) out.push_back(piece);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

namespace detail {

inline std::optional<double> parse_plain(std::string_view s) {
    const std::string str(s);
    if (str.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(str.c_str(), &end);
    if (end != str.c_str() + str.size()) return std::nullopt;
    return v;
}

}  // namespace detail

/// Parses a real number. Also accepts `inf`/`infinite` and multiples of pi
/// written as `pi`, `-pi/2`, `0.25*pi`, `3*pi/4`.
inline double parse_real(std::string_view raw, std::string_view key) {
    const std::string s = trim(raw);
    if (s == "inf" || s == "infinite" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (auto v = detail::parse_plain(s)) return *v;

    const auto p = s.find("pi");
    if (p != std::string::npos) {
        std::string head = s.substr(0, p), tail = s.substr(p + 2);
        double factor = 1.0, divisor = 1.0;
        if (!head.empty()) {
            if (head == "-") {
                factor = -1.0;
            } else if (head == "+") {
                factor = 1.0;
            } else if (head.back() == '*') {
                auto f = detail::parse_plain(trim(head.substr(0, head.size() - 1)));
                if (!f) throw ConfigError("invalid number for '" + std::string(key) + "': " + s);
                factor = *f;
            } else {
                throw ConfigError("invalid number for '" + std::string(key) + "': " + s);
            }
        }
        if (!tail.empty()) {
            if (tail.front() != '/') throw ConfigError("invalid number for '" + std::string(key) + "': " + s);
            auto d = detail::parse_plain(trim(tail.substr(1)));
            if (!d || *d == 0.0) throw ConfigError("invalid number for '" + std::string(key) + "': " + s);
            divisor = *d;
        }
        return factor * pi / divisor;
    }
    throw ConfigError("invalid number for '" + std::string(key) + "': " + s);
}

inline long parse_integer(std::string_view raw, std::string_view key) {
    const std::string s = trim(raw);
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size())
        throw ConfigError("invalid integer for '" + std::string(key) + "': " + s);
    return v;
}

// ---------------------------------------------------------------------------
// Flat key = value files
// ---------------------------------------------------------------------------

/// Ordered key-value pairs; a later duplicate key overrides an earlier one.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void set_value(KeyValues& kv, const std::string& key, const std::string& value) {
    for (auto& [k, v] : kv)
        if (k == key) {
            v = value;
            return;
        }
    kv.emplace_back(key, value);
}

inline const std::string* find_value(const KeyValues& kv, std::string_view key) {
    for (const auto& [k, v] : kv)
        if (k == key) return &v;
    return nullptr;
}

inline std::string escape_value(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else if (c == '#') out += "\\#";
        else out += c;
    }
    return out;
}

inline std::string unescape_value(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            const char n = s[++i];
            out += n == 'n' ? '\n' : n;
        } else {
            out += s[i];
        }
    }
    return out;
}

/// Reads `key = value` lines. Blank lines and text after an unescaped `#`
/// are ignored. Keys may not be empty.
inline KeyValues parse_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string body;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '\\' && i + 1 < line.size()) {
                body += line[i];
                body += line[++i];
            } else if (line[i] == '#') {
                break;
            } else {
                body += line[i];
            }
        }
        if (trim(body).empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        set_value(kv, key, unescape_value(trim(body.substr(eq + 1))));
    }
    return kv;
}

inline KeyValues parse_key_values(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_key_values(in);
}

inline KeyValues load_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_key_values(in);
}

inline void write_key_values(std::ostream& out, const KeyValues& kv) {
    for (const auto& [k, v] : kv) out << k << " = " << escape_value(v) << '\n';
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class Task { rate, rate_finite, zeros, critical_modes, winding, echo_decomposition, variant_report, sweep };

inline constexpr std::pair<Task, std::string_view> task_names[] = {
    {Task::rate, "rate"},
    {Task::rate_finite, "rate-finite"},
    {Task::zeros, "zeros"},
    {Task::critical_modes, "critical-modes"},
    {Task::winding, "winding"},
    {Task::echo_decomposition, "echo-decomposition"},
    {Task::variant_report, "variant-report"},
    {Task::sweep, "sweep"},
};

inline std::string_view to_string(Task t) {
    for (const auto& [task, name] : task_names)
        if (task == t) return name;
    return "?";
}

inline Task parse_task(std::string_view s) {
    for (const auto& [task, name] : task_names)
        if (name == s) return task;
    throw ConfigError("unknown task '" + std::string(s) + "'");
}

struct Quench {
    double lambda_pre;
    double lambda_post;
};

struct RunConfig {
    Task task = Task::rate;
    QuenchProtocol protocol{0.5, 2.0, 10.0, 0.0, 1.0};
    double t_min = 0.0;
    double t_max = 4.0;
    long steps = 4000;
    int k_resolution = 1024;
    std::vector<int> branches{0};
    CriticalVariant variant = CriticalVariant::consistent_sinh;
    std::string output_path = "dqpt_out";
    double tolerance = 1e-8;
    int n_sites = 1000;
    double momentum = pi / 2;  ///< echo-decomposition only
    int n_max = 3;
    int jobs = 1;
    double cusp_ratio = 50.0;
    int cusp_window = 5;
    // sweep axes; an empty axis falls back to the protocol value
    std::vector<double> betas;
    std::vector<double> phis;
    std::vector<double> lambda_posts;
    std::vector<Quench> quenches;
    long max_cells = 10000;
    /// Extra per-cell outputs of a sweep besides critical modes and rate.
    std::vector<Task> cell_tasks;
};

/// Keys accepted in config files and as `--key` flags.
inline constexpr std::string_view config_keys[] = {
    "task",   "lambda-pre", "lambda-post", "beta",       "phi",        "coupling",  "t-min",
    "t-max",  "steps",      "k-resolution", "branch",    "variant",    "tol",       "out",
    "n-sites", "k",         "n-max",       "jobs",       "cusp-ratio", "cusp-window", "quenches",
    "max-cells", "cell-tasks",
};

namespace detail {

inline std::vector<double> parse_reals(const std::string& s, std::string_view key) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(parse_real(item, key));
    if (out.empty()) throw ConfigError("empty list for '" + std::string(key) + "'");
    return out;
}

inline std::string join_numbers(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_number(xs[i]);
    return s;
}

}  // namespace detail

/// Default for --jobs: $DQPT_JOBS if set to a positive integer, else 1.
inline int default_jobs() {
    if (const char* env = std::getenv("DQPT_JOBS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
    }
    return 1;
}

/// Builds a RunConfig from key-value pairs (file values with flags already
/// merged on top). Throws ConfigError on unknown keys, malformed values or
/// violated invariants.
inline RunConfig config_from(const KeyValues& kv) {
    RunConfig c;
    c.jobs = default_jobs();
    bool list_axes = false;
    for (const auto& [key, value] : kv) {
        const bool known = std::find(std::begin(config_keys), std::end(config_keys), key) != std::end(config_keys);
        if (!known) throw ConfigError("unknown key '" + key + "'");
        if (key == "task") c.task = parse_task(trim(value));
        else if (key == "lambda-pre") {
            const auto xs = detail::parse_reals(value, key);
            c.protocol.lambda_pre = xs.front();
            if (xs.size() > 1) throw ConfigError("lambda-pre takes one value; use 'quenches' to sweep pairs");
        } else if (key == "lambda-post") {
            c.lambda_posts = detail::parse_reals(value, key);
            c.protocol.lambda_post = c.lambda_posts.front();
            list_axes |= c.lambda_posts.size() > 1;
        } else if (key == "beta") {
            c.betas = detail::parse_reals(value, key);
            c.protocol.beta = c.betas.front();
            list_axes |= c.betas.size() > 1;
        } else if (key == "phi") {
            c.phis = detail::parse_reals(value, key);
            c.protocol.phi = c.phis.front();
            list_axes |= c.phis.size() > 1;
        } else if (key == "coupling") c.protocol.coupling = parse_real(value, key);
        else if (key == "t-min") c.t_min = parse_real(value, key);
        else if (key == "t-max") c.t_max = parse_real(value, key);
        else if (key == "steps") c.steps = parse_integer(value, key);
        else if (key == "k-resolution") c.k_resolution = static_cast<int>(parse_integer(value, key));
        else if (key == "branch") {
            c.branches.clear();
            for (const auto& item : split_list(value)) c.branches.push_back(static_cast<int>(parse_integer(item, key)));
            if (c.branches.empty()) throw ConfigError("empty list for 'branch'");
        } else if (key == "variant") {
            try {
                c.variant = parse_variant(trim(value));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        } else if (key == "tol") c.tolerance = parse_real(value, key);
        else if (key == "out") c.output_path = trim(value);
        else if (key == "n-sites") c.n_sites = static_cast<int>(parse_integer(value, key));
        else if (key == "k") c.momentum = parse_real(value, key);
        else if (key == "n-max") c.n_max = static_cast<int>(parse_integer(value, key));
        else if (key == "jobs") c.jobs = static_cast<int>(parse_integer(value, key));
        else if (key == "cusp-ratio") c.cusp_ratio = parse_real(value, key);
        else if (key == "cusp-window") c.cusp_window = static_cast<int>(parse_integer(value, key));
        else if (key == "max-cells") c.max_cells = parse_integer(value, key);
        else if (key == "cell-tasks") {
            c.cell_tasks.clear();
            for (const auto& item : split_list(value)) {
                const Task t = parse_task(item);
                if (t == Task::sweep || t == Task::rate || t == Task::critical_modes) continue;
                if (std::find(c.cell_tasks.begin(), c.cell_tasks.end(), t) == c.cell_tasks.end())
                    c.cell_tasks.push_back(t);
            }
        }
        else if (key == "quenches") {
            c.quenches.clear();
            for (const auto& item : split_list(value)) {
                const auto parts = split_list(item, ':');
                if (parts.size() != 2) throw ConfigError("quenches entries must be 'pre:post', got '" + item + "'");
                c.quenches.push_back({parse_real(parts[0], key), parse_real(parts[1], key)});
            }
            if (c.quenches.empty()) throw ConfigError("empty list for 'quenches'");
            c.protocol.lambda_pre = c.quenches.front().lambda_pre;
            c.protocol.lambda_post = c.quenches.front().lambda_post;
            list_axes |= c.quenches.size() > 1;
        }
    }

    if (list_axes && c.task != Task::sweep) throw ConfigError("value lists are only accepted by the sweep task");
    if (!(c.t_min < c.t_max)) throw ConfigError("t-min must be smaller than t-max");
    if (c.t_min < 0.0) throw ConfigError("t-min must be >= 0");
    if (c.steps < 2) throw ConfigError("steps must be >= 2");
    if (!(c.tolerance > 0.0)) throw ConfigError("tol must be > 0");
    if (c.k_resolution < 64) throw ConfigError("k-resolution must be >= 64");
    if (c.n_max < 0) throw ConfigError("n-max must be >= 0");
    if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
    if (c.cusp_window < 1 || !(c.cusp_ratio > 0.0)) throw ConfigError("cusp-ratio and cusp-window must be positive");
    if (c.max_cells < 1) throw ConfigError("max-cells must be >= 1");
    if (c.output_path.empty()) throw ConfigError("out must not be empty");
    if (c.n_sites < 2 || c.n_sites % 2 != 0) throw ConfigError("n-sites must be an even integer >= 2");
    if (!(c.momentum > 0.0 && c.momentum < pi)) throw ConfigError("k must lie in (0, pi)");
    try {
        c.protocol = c.protocol.validated();
        for (double b : c.betas) QuenchProtocol{0.0, 0.0, b, 0.0, 1.0}.validated();
        for (double l : c.lambda_posts) QuenchProtocol{0.0, l, 1.0, 0.0, 1.0}.validated();
        for (const auto& q : c.quenches) QuenchProtocol{q.lambda_pre, q.lambda_post, 1.0, 0.0, 1.0}.validated();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

/// Canonical key-value form of a config (one entry per key).
inline KeyValues to_key_values(const RunConfig& c) {
    KeyValues kv;
    kv.emplace_back("task", std::string(to_string(c.task)));
    if (!c.quenches.empty()) {
        std::string q;
        for (std::size_t i = 0; i < c.quenches.size(); ++i)
            q += (i ? "," : "") + format_number(c.quenches[i].lambda_pre) + ":" +
                 format_number(c.quenches[i].lambda_post);
        kv.emplace_back("quenches", q);
    } else {
        kv.emplace_back("lambda-pre", format_number(c.protocol.lambda_pre));
        kv.emplace_back("lambda-post", c.lambda_posts.empty() ? format_number(c.protocol.lambda_post)
                                                              : detail::join_numbers(c.lambda_posts));
    }
    kv.emplace_back("beta", c.betas.empty() ? format_number(c.protocol.beta) : detail::join_numbers(c.betas));
    kv.emplace_back("phi", c.phis.empty() ? format_number(c.protocol.phi) : detail::join_numbers(c.phis));
    kv.emplace_back("coupling", format_number(c.protocol.coupling));
    kv.emplace_back("t-min", format_number(c.t_min));
    kv.emplace_back("t-max", format_number(c.t_max));
    kv.emplace_back("steps", std::to_string(c.steps));
    kv.emplace_back("k-resolution", std::to_string(c.k_resolution));
    std::string br;
    for (std::size_t i = 0; i < c.branches.size(); ++i) br += (i ? "," : "") + std::to_string(c.branches[i]);
    kv.emplace_back("branch", br);
    kv.emplace_back("variant", c.variant == CriticalVariant::consistent_sinh ? "sinh" : "tanh");
    kv.emplace_back("tol", format_number(c.tolerance));
    kv.emplace_back("out", c.output_path);
    kv.emplace_back("n-sites", std::to_string(c.n_sites));
    kv.emplace_back("k", format_number(c.momentum));
    kv.emplace_back("n-max", std::to_string(c.n_max));
    kv.emplace_back("jobs", std::to_string(c.jobs));
    kv.emplace_back("cusp-ratio", format_number(c.cusp_ratio));
    kv.emplace_back("cusp-window", std::to_string(c.cusp_window));
    kv.emplace_back("max-cells", std::to_string(c.max_cells));
    if (!c.cell_tasks.empty()) {
        std::string t;
        for (std::size_t i = 0; i < c.cell_tasks.size(); ++i) t += (i ? "," : "") + std::string(to_string(c.cell_tasks[i]));
        kv.emplace_back("cell-tasks", t);
    }
    return kv;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// Run record written next to every data file: the config echo, the version,
/// the wall-clock duration, task diagnostics and every warning raised.
struct RunManifest {
    KeyValues config;
    std::string version = std::string(version_string);
    double duration_seconds = 0.0;
    KeyValues diagnostics;
    std::vector<std::string> warnings;
    int exit_status = 0;

    void diagnostic(const std::string& key, const std::string& value) { set_value(diagnostics, key, value); }
    void warn(std::string w) {
        std::replace(w.begin(), w.end(), '\n', ' ');
        warnings.push_back(std::move(w));
    }

    KeyValues to_key_values() const {
        KeyValues kv;
        kv.emplace_back("version", version);
        for (const auto& [k, v] : config) kv.emplace_back("config." + k, v);
        kv.emplace_back("duration_seconds", format_number(duration_seconds));
        kv.emplace_back("exit_status", std::to_string(exit_status));
        for (const auto& [k, v] : diagnostics) kv.emplace_back("diagnostic." + k, v);
        kv.emplace_back("warnings", std::to_string(warnings.size()));
        for (std::size_t i = 0; i < warnings.size(); ++i) kv.emplace_back("warning." + std::to_string(i), warnings[i]);
        return kv;
    }

    std::string serialize() const {
        std::ostringstream out;
        out << "# dqpt run manifest\n";
        write_key_values(out, to_key_values());
        return out.str();
    }

    static RunManifest parse(std::string_view text) {
        RunManifest m;
        m.version.clear();
        const KeyValues kv = parse_key_values(text);
        std::size_t n_warnings = 0;
        for (const auto& [k, v] : kv) {
            if (k == "version") m.version = v;
            else if (k.rfind("config.", 0) == 0) m.config.emplace_back(k.substr(7), v);
            else if (k == "duration_seconds") m.duration_seconds = parse_real(v, k);
            else if (k == "exit_status") m.exit_status = static_cast<int>(parse_integer(v, k));
            else if (k.rfind("diagnostic.", 0) == 0) m.diagnostics.emplace_back(k.substr(11), v);
            else if (k == "warnings") n_warnings = static_cast<std::size_t>(parse_integer(v, k));
            else if (k.rfind("warning.", 0) == 0) m.warnings.push_back(v);
            else throw ConfigError("unknown manifest key '" + k + "'");
        }
        if (m.warnings.size() != n_warnings) throw ConfigError("manifest warning count mismatch");
        return m;
    }

    bool operator==(const RunManifest&) const = default;
};

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

struct TaskOutput {
    std::string csv;
    RunManifest manifest;
    bool degraded = false;
};

namespace detail {

class Csv {
public:
    explicit Csv(std::initializer_list<std::string_view> header) {
        bool first = true;
        for (auto h : header) {
            text_ += first ? "" : ",";
            text_ += h;
            first = false;
        }
        text_ += '\n';
    }
    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((text_ += (first ? "" : ","), text_ += cell(cells), first = false), ...);
        text_ += '\n';
    }
    std::string str() const { return text_; }

private:
    static std::string cell(double x) { return format_number(x); }
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(long x) { return std::to_string(x); }
    static std::string cell(bool x) { return x ? "1" : "0"; }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    std::string text_;
};

inline std::string join_times(const std::vector<double>& ts) {
    std::string s;
    for (std::size_t i = 0; i < ts.size(); ++i) s += (i ? "," : "") + format_number(ts[i]);
    return s;
}

inline std::vector<double> config_times(const RunConfig& c) {
    return uniform_times(c.t_min, c.t_max, static_cast<int>(c.steps));
}

inline CuspOptions cusp_options(const RunConfig& c) { return {c.cusp_ratio, c.cusp_window}; }

}  // namespace detail

inline TaskOutput task_rate(const RunConfig& c) {
    TaskOutput out;
    const auto times = detail::config_times(c);
    const RateSeries s = rate_series(c.protocol, times, c.tolerance, c.jobs);
    detail::Csv csv{"t", "r", "err_bound", "singular_flag"};
    for (std::size_t i = 0; i < times.size(); ++i)
        csv.row(s.times[i], s.values[i], s.estimated_error[i], static_cast<bool>(s.singular[i]));
    out.csv = csv.str();
    const auto cusps = detect_cusps(s, detail::cusp_options(c));
    out.manifest.diagnostic("quadrature_subdivisions", std::to_string(s.total_subdivisions));
    out.manifest.diagnostic("unconverged_samples", std::to_string(s.unconverged_samples));
    out.manifest.diagnostic("cusp_count", std::to_string(cusps.size()));
    out.manifest.diagnostic("cusp_times", detail::join_times(cusps));
    if (s.unconverged_samples > 0) {
        out.degraded = true;
        out.manifest.warn(std::to_string(s.unconverged_samples) +
                          " samples did not reach the quadrature tolerance; see err_bound");
    }
    return out;
}

inline TaskOutput task_rate_finite(const RunConfig& c) {
    TaskOutput out;
    const auto times = detail::config_times(c);
    const RateSeries s = rate_series_finite(c.protocol, c.n_sites, times, c.jobs);
    detail::Csv csv{"t", "r", "singular_flag"};
    int singular = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        csv.row(s.times[i], s.values[i], static_cast<bool>(s.singular[i]));
        singular += s.singular[i] ? 1 : 0;
    }
    out.csv = csv.str();
    out.manifest.diagnostic("singular_samples", std::to_string(singular));
    if (singular > 0) out.manifest.warn(std::to_string(singular) + " samples hit an exact zero of a grid mode");
    return out;
}

inline TaskOutput task_zeros(const RunConfig& c) {
    TaskOutput out;
    const auto ks = open_zone_grid(c.k_resolution);
    detail::Csv csv{"n", "k", "re_z", "im_z", "residual"};
    double worst = 0.0;
    std::size_t skipped = 0;
    for (int n : c.branches) {
        const FisherLine line = fisher_zero_line(c.protocol, n, ks);
        for (const auto& p : line.samples) {
            csv.row(n, p.k, p.z.real(), p.z.imag(), p.residual);
            worst = std::max(worst, p.residual);
        }
        skipped += line.skipped.size();
    }
    out.csv = csv.str();
    out.manifest.diagnostic("max_residual", format_number(worst));
    out.manifest.diagnostic("skipped_samples", std::to_string(skipped));
    if (skipped > 0) out.manifest.warn(std::to_string(skipped) + " momenta skipped: vanishing eigenstate weight");
    if (!(worst <= 1e-9)) {
        out.degraded = true;
        out.manifest.warn("boundary partition residual " + format_number(worst) + " exceeds 1e-9");
    }
    return out;
}

inline TaskOutput task_critical_modes(const RunConfig& c) {
    TaskOutput out;
    CriticalOptions opt;
    opt.n_max = c.n_max;
    opt.k_resolution = c.k_resolution;
    const CriticalSet set = critical_modes(c.protocol, c.variant, opt);
    detail::Csv csv{"variant", "k_star", "residual", "t_star_0", "jump_sign"};
    double worst = 0.0;
    for (const auto& m : set.modes) {
        csv.row(to_string(set.condition_variant), m.k_star, m.residual, m.times.front(), m.jump_sign);
        worst = std::max(worst, std::abs(m.residual));
    }
    out.csv = csv.str();
    out.manifest.diagnostic("modes", std::to_string(set.modes.size()));
    out.manifest.diagnostic("max_root_residual", format_number(worst));
    for (std::size_t i = 0; i < set.modes.size(); ++i) {
        out.manifest.diagnostic("t_star_ladder." + std::to_string(i), detail::join_times(set.modes[i].times));
        out.manifest.diagnostic("winding_jump." + std::to_string(i), format_number(set.modes[i].jump));
    }
    for (const auto& w : set.warnings) out.manifest.warn(w);
    if (!set.warnings.empty()) out.degraded = true;
    return out;
}

inline TaskOutput task_winding(const RunConfig& c) {
    TaskOutput out;
    const auto times = detail::config_times(c);
    struct Sample {
        double nu;
        int refinements;
        std::string error;
    };
    std::vector<Sample> samples(times.size());
    dqpt::detail::parallel_for(times.size(), c.jobs, [&](std::size_t i) {
        try {
            const auto w = winding_number(c.protocol, times[i], c.k_resolution);
            samples[i] = {w.nu, w.unwrap_refinements, {}};
        } catch (const UnwrapError& e) {
            samples[i] = {std::numeric_limits<double>::quiet_NaN(), -1, e.what()};
        }
    });
    detail::Csv csv{"t", "nu", "unwrap_refinements"};
    long refinements = 0;
    int failures = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        csv.row(times[i], samples[i].nu, samples[i].refinements);
        if (samples[i].error.empty()) {
            refinements += samples[i].refinements;
        } else {
            ++failures;
            out.manifest.warn("t=" + format_number(times[i]) + ": " + samples[i].error);
        }
    }
    out.csv = csv.str();
    out.manifest.diagnostic("unwrap_refinements", std::to_string(refinements));
    out.manifest.diagnostic("unwrap_failures", std::to_string(failures));
    out.degraded = failures > 0;
    return out;
}

inline TaskOutput task_echo_decomposition(const RunConfig& c) {
    TaskOutput out;
    const auto times = detail::config_times(c);
    detail::Csv csv{"t", "k", "echo", "null_work_prob", "interference"};
    double worst = 0.0;
    for (double t : times) {
        const auto d = null_work_decomposition(c.protocol, c.momentum, t);
        csv.row(t, c.momentum, d.echo, d.null_work_prob, d.interference);
        const double closed = mode_echo(mode_coefficients(c.protocol, c.momentum), t);
        worst = std::max(worst, std::abs(closed - d.echo));
    }
    out.csv = csv.str();
    out.manifest.diagnostic("max_echo_oracle_deviation", format_number(worst));
    return out;
}

inline TaskOutput task_variant_report(const RunConfig& c) {
    TaskOutput out;
    const VariantReport rep = variant_report(c.protocol);
    detail::Csv csv{"variant", "k_star", "residual", "other_residual", "fisher_confirmed"};
    for (const auto& r : rep.roots) csv.row(to_string(r.variant), r.k_star, r.residual, r.other_residual, r.fisher_confirmed);
    out.csv = csv.str();
    out.manifest.diagnostic("roots", std::to_string(rep.roots.size()));
    return out;
}

// ---------------------------------------------------------------------------
// Output and dispatch
// ---------------------------------------------------------------------------

inline std::filesystem::path manifest_path(const std::filesystem::path& data) {
    return std::filesystem::path(data.string() + ".manifest");
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline TaskOutput dispatch(const RunConfig& c) {
    switch (c.task) {
        case Task::rate: return task_rate(c);
        case Task::rate_finite: return task_rate_finite(c);
        case Task::zeros: return task_zeros(c);
        case Task::critical_modes: return task_critical_modes(c);
        case Task::winding: return task_winding(c);
        case Task::echo_decomposition: return task_echo_decomposition(c);
        case Task::variant_report: return task_variant_report(c);
        case Task::sweep: break;
    }
    throw ConfigError("sweep is not a single-cell task");
}

inline std::string cell_name(const Quench& q, double beta, double phi) {
    char buf[160];
    auto fixed = [](double x) {
        if (std::isinf(x)) return std::string("inf");
        char b[48];
        std::snprintf(b, sizeof b, "%.6f", x);
        return std::string(b);
    };
    std::snprintf(buf, sizeof buf, "lambda-pre_%s__lambda-post_%s__beta_%s__phi_%s", fixed(q.lambda_pre).c_str(),
                  fixed(q.lambda_post).c_str(), fixed(beta).c_str(), fixed(phi).c_str());
    return buf;
}

}  // namespace detail

/// Runs one task and writes `<out>` (CSV) and `<out>.manifest`.
/// Returns the exit status; diagnostics go to `err`.
inline int run(const RunConfig& c, std::ostream& err);

/// Cartesian product of quenches x beta x phi, one subdirectory per cell
/// under `<out>/` with the cell's critical modes and rate series, plus
/// `<out>/index.csv` and `<out>/index.csv.manifest`. `cell-tasks` adds
/// further per-cell outputs named after the task.
inline int sweep(const RunConfig& c, std::ostream& err) {
    std::vector<Quench> quenches = c.quenches;
    if (quenches.empty()) {
        const std::vector<double> posts = c.lambda_posts.empty() ? std::vector<double>{c.protocol.lambda_post}
                                                                 : c.lambda_posts;
        for (double lp : posts) quenches.push_back({c.protocol.lambda_pre, lp});
    }
    const std::vector<double> betas = c.betas.empty() ? std::vector<double>{c.protocol.beta} : c.betas;
    const std::vector<double> phis = c.phis.empty() ? std::vector<double>{c.protocol.phi} : c.phis;
    const long cells = static_cast<long>(quenches.size() * betas.size() * phis.size());
    if (cells > c.max_cells) {
        err << "dqpt: sweep has " << cells << " cells, above max-cells=" << c.max_cells << '\n';
        return exit_config;
    }

    struct Cell {
        RunConfig config;
        std::string name;
        std::size_t modes = 0;
        double first_time = std::numeric_limits<double>::quiet_NaN();
        std::size_t cusps = 0;
        int status = exit_ok;
        std::string error;
    };
    std::vector<Cell> grid;
    for (const auto& q : quenches)
        for (double b : betas)
            for (double ph : phis) {
                Cell cell;
                cell.config = c;
                cell.config.task = Task::critical_modes;
                cell.config.quenches.clear();
                cell.config.betas.clear();
                cell.config.phis.clear();
                cell.config.lambda_posts.clear();
                cell.config.protocol = QuenchProtocol{q.lambda_pre, q.lambda_post, b, ph, c.protocol.coupling}.validated();
                cell.config.jobs = 1;
                cell.name = detail::cell_name(q, b, ph);
                grid.push_back(std::move(cell));
            }

    const std::filesystem::path root(c.output_path);
    const auto start = std::chrono::steady_clock::now();
    dqpt::detail::parallel_for(grid.size(), c.jobs, [&](std::size_t i) {
        Cell& cell = grid[i];
        std::ostringstream cell_err;
        RunConfig cm = cell.config;
        cm.output_path = (root / cell.name / "critical_modes.csv").string();
        RunConfig rate = cell.config;
        rate.task = Task::rate;
        rate.output_path = (root / cell.name / "rate.csv").string();
        try {
            const TaskOutput modes = task_critical_modes(cm);
            const TaskOutput series = task_rate(rate);
            cell.modes = static_cast<std::size_t>(parse_integer(*find_value(modes.manifest.diagnostics, "modes"), "modes"));
            for (std::size_t m = 0; m < cell.modes; ++m) {
                const auto ladder = split_list(*find_value(modes.manifest.diagnostics, "t_star_ladder." + std::to_string(m)));
                const double t0 = parse_real(ladder.front(), "t_star_ladder");
                if (std::isnan(cell.first_time) || t0 < cell.first_time) cell.first_time = t0;
            }
            cell.cusps = static_cast<std::size_t>(
                parse_integer(*find_value(series.manifest.diagnostics, "cusp_count"), "cusp_count"));
            std::vector<std::pair<const TaskOutput*, const RunConfig*>> outputs{{&modes, &cm}, {&series, &rate}};
            std::vector<TaskOutput> extra_out;
            std::vector<RunConfig> extra_cfg;
            extra_out.reserve(c.cell_tasks.size());
            extra_cfg.reserve(c.cell_tasks.size());
            for (Task t : c.cell_tasks) {
                RunConfig e = cell.config;
                e.task = t;
                std::string file(to_string(t));
                std::replace(file.begin(), file.end(), '-', '_');
                e.output_path = (root / cell.name / (file + ".csv")).string();
                extra_out.push_back(detail::dispatch(e));
                extra_cfg.push_back(std::move(e));
            }
            for (std::size_t j = 0; j < extra_out.size(); ++j) outputs.emplace_back(&extra_out[j], &extra_cfg[j]);
            for (const auto& [out, cfg] : outputs) {
                RunManifest m = out->manifest;
                m.config = to_key_values(*cfg);
                m.exit_status = out->degraded ? exit_numerical : exit_ok;
                detail::write_file(cfg->output_path, out->csv);
                detail::write_file(manifest_path(cfg->output_path), m.serialize());
                if (out->degraded) cell.status = exit_numerical;
            }
        } catch (const std::exception& e) {
            cell.status = exit_numerical;
            cell.error = e.what();
        }
    });
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    detail::Csv index{"cell", "lambda_pre", "lambda_post", "beta", "phi", "n_modes", "first_critical_time", "cusp_count", "status"};
    RunManifest manifest;
    manifest.config = to_key_values(c);
    manifest.duration_seconds = seconds;
    int status = exit_ok;
    for (const auto& cell : grid) {
        const auto& p = cell.config.protocol;
        index.row(cell.name, p.lambda_pre, p.lambda_post, p.beta, p.phi, static_cast<long>(cell.modes),
                  cell.first_time, static_cast<long>(cell.cusps), cell.status);
        if (cell.status != exit_ok) {
            status = exit_numerical;
            manifest.warn(cell.name + ": " + (cell.error.empty() ? "numerical degradation" : cell.error));
        }
    }
    manifest.diagnostic("cells", std::to_string(grid.size()));
    manifest.exit_status = status;
    const auto index_path = root / "index.csv";
    detail::write_file(index_path, index.str());
    detail::write_file(manifest_path(index_path), manifest.serialize());
    for (const auto& w : manifest.warnings) err << "dqpt: warning: " << w << '\n';
    return status;
}

inline int run(const RunConfig& c, std::ostream& err) {
    if (c.task == Task::sweep) return sweep(c, err);
    const auto start = std::chrono::steady_clock::now();
    TaskOutput out;
    try {
        out = detail::dispatch(c);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        err << "dqpt: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        err << "dqpt: numerical failure: " << e.what() << '\n';
        RunManifest m;
        m.config = to_key_values(c);
        m.warn(e.what());
        m.exit_status = exit_numerical;
        detail::write_file(manifest_path(c.output_path), m.serialize());
        return exit_numerical;
    }
    out.manifest.config = to_key_values(c);
    out.manifest.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.manifest.exit_status = out.degraded ? exit_numerical : exit_ok;
    detail::write_file(c.output_path, out.csv);
    detail::write_file(manifest_path(c.output_path), out.manifest.serialize());
    for (const auto& w : out.manifest.warnings) err << "dqpt: warning: " << w << '\n';
    return out.manifest.exit_status;
}

}  // namespace dqpt::cli
