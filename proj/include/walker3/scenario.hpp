#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "walker3/errors.hpp"
#include "walker3/expr.hpp"
#include "walker3/grid.hpp"
#include "walker3/report.hpp"

// Plain-text scenario format: [section] headers and key = value lines, with
// '#' comments. Expressions are double-quoted strings handed to the
// expression parser. Sections: [metric] (required), [surface] (optional,
// explicit or ode), [analysis], [output].
namespace walker3 {

enum class SurfaceKind { None, Explicit, Ode };

struct MetricSection {
    int epsilon = 1;
    std::string f_source = "0";
    Box3 box;
    int nt = 3, nx = 11, ny = 11;
};

struct SurfaceSection {
    SurfaceKind kind = SurfaceKind::None;
    // explicit embedding
    std::string t_source, x_source, y_source;
    double u0 = 0, u1 = 1, v0 = 0, v1 = 1;
    int nu = 9, nv = 33;
    // ode profile
    int eta = 1;
    double C = 0;
    double x0 = 1, xp0 = 1;
    double step = 0.002;
    double perturb = 0;
};

struct AnalysisSection {
    int delta = 1;
    std::uint64_t seed = 42;
    int trials = 1000;
    std::map<std::string, double> tolerances;
};

struct OutputSection {
    std::string path = "out";
    std::string format = "text";  // or "structured"
};

inline std::map<std::string, double> default_tolerances() {
    return {
        {"exact", 1e-12},     // algebraic identities, round-trips
        {"symbolic", 1e-9},   // symbolic-derivative comparisons
        {"fd", 1e-6},         // first-order finite-difference oracles
        {"fd2", 1e-5},        // second-order finite-difference pipelines
        {"flat", 1e-9},       // |f_xx| threshold for flatness
        {"lcf", 1e-9},        // |f_xxx| threshold for conformal flatness
        {"cotton", 1e-5},     // Cotton oracle max-norm threshold
        {"umbilic", 1e-5},    // umbilic residual rho
        {"parallel", 1e-5},   // family checks: rho, lambda spread, v2-v3, normal
        {"case", 1e-6},       // case classifier conditions and sub-checks
        {"audit", 1e-4},      // stencil-limited bracket audit agreement
        {"bracket", 1e-10},   // bracket-difference identity
        {"lemma", 1e-9},      // curvature-gradient identity residual
    };
}

struct Scenario {
    MetricSection metric;
    SurfaceSection surface;
    AnalysisSection analysis;
    OutputSection output;
    std::string config_path;

    double tol(const std::string& key) const {
        auto it = analysis.tolerances.find(key);
        if (it == analysis.tolerances.end()) throw ConfigError("unknown tolerance key", "", 0, key);
        return it->second;
    }

    GridSpec3 metric_grid() const { return GridSpec3(metric.box, metric.nt, metric.nx, metric.ny); }

    void echo(Report& r) const {
        r.set("config", config_path.empty() ? "<inline>" : config_path);
        auto& me = r.child("metric");
        me.set("epsilon", metric.epsilon);
        me.set("f", metric.f_source);
        me.set("box", format_double(metric.box.t0) + " " + format_double(metric.box.t1) + " " +
                          format_double(metric.box.x0) + " " + format_double(metric.box.x1) + " " +
                          format_double(metric.box.y0) + " " + format_double(metric.box.y1));
        me.set("grid", std::to_string(metric.nt) + " " + std::to_string(metric.nx) + " " + std::to_string(metric.ny));
        auto& su = r.child("surface");
        switch (surface.kind) {
            case SurfaceKind::None:
                su.set("kind", "none");
                break;
            case SurfaceKind::Explicit:
                su.set("kind", "explicit");
                su.set("t", surface.t_source);
                su.set("x", surface.x_source);
                su.set("y", surface.y_source);
                su.set("u_range", format_double(surface.u0) + " " + format_double(surface.u1));
                su.set("v_range", format_double(surface.v0) + " " + format_double(surface.v1));
                su.set("grid", std::to_string(surface.nu) + " " + std::to_string(surface.nv));
                break;
            case SurfaceKind::Ode:
                su.set("kind", "ode");
                su.set("eta", surface.eta);
                su.set("c", surface.C);
                su.set("x0", surface.x0);
                su.set("xp0", surface.xp0);
                su.set("v_range", format_double(surface.v0) + " " + format_double(surface.v1));
                su.set("step", surface.step);
                su.set("u_range", format_double(surface.u0) + " " + format_double(surface.u1));
                su.set("grid", std::to_string(surface.nu) + " " + std::to_string(surface.nv));
                if (surface.perturb != 0) su.set("perturb", surface.perturb);
                break;
        }
        auto& an = r.child("analysis");
        an.set("delta", analysis.delta);
        an.set("seed", analysis.seed);
        an.set("trials", analysis.trials);
        auto& tols = an.child("tolerances");
        for (const auto& [k, v] : analysis.tolerances) tols.set(k, v);
    }
};

namespace detail {

struct ConfigLine {
    int number = 0;
    std::string section;
    std::string key;
    std::string value;
};

inline std::string strip(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

// Remove a trailing comment, respecting double quotes.
inline std::string strip_comment(std::string_view s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return std::string(s.substr(0, i));
    }
    return std::string(s);
}

class ScenarioValues {
public:
    ScenarioValues(std::string file, std::vector<ConfigLine> lines)
        : file_(std::move(file)), lines_(std::move(lines)) {}

    const ConfigLine* find(const std::string& section, const std::string& key) const {
        for (const auto& l : lines_)
            if (l.section == section && l.key == key) return &l;
        return nullptr;
    }

    bool has_section(const std::string& section) const {
        for (const auto& l : lines_)
            if (l.section == section) return true;
        return false;
    }

    std::string str(const ConfigLine& l) const {
        std::string v = l.value;
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
        return v;
    }

    double number(const ConfigLine& l) const {
        try {
            std::size_t consumed = 0;
            const double v = std::stod(l.value, &consumed);
            if (consumed != l.value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("expected a number, got '" + l.value + "'", file_, l.number, l.key);
        }
    }

    long integer(const ConfigLine& l) const {
        const double v = number(l);
        const long r = static_cast<long>(v);
        if (static_cast<double>(r) != v)
            throw ConfigError("expected an integer, got '" + l.value + "'", file_, l.number, l.key);
        return r;
    }

    std::vector<double> numbers(const ConfigLine& l, std::size_t expected) const {
        std::istringstream iss(l.value);
        std::vector<double> out;
        std::string tok;
        while (iss >> tok) {
            try {
                std::size_t consumed = 0;
                out.push_back(std::stod(tok, &consumed));
                if (consumed != tok.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ConfigError("expected " + std::to_string(expected) + " numbers, got '" + l.value + "'",
                                  file_, l.number, l.key);
            }
        }
        if (out.size() != expected)
            throw ConfigError("expected " + std::to_string(expected) + " numbers, got " +
                                  std::to_string(out.size()),
                              file_, l.number, l.key);
        return out;
    }

    const std::string& file() const { return file_; }
    const std::vector<ConfigLine>& lines() const { return lines_; }

private:
    std::string file_;
    std::vector<ConfigLine> lines_;
};

inline ScenarioValues tokenize_config(std::istream& in, const std::string& file) {
    std::vector<ConfigLine> lines;
    std::string raw, section;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        const std::string text = strip(strip_comment(raw));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']')
                throw ConfigError("malformed section header", file, number);
            section = strip(std::string_view(text).substr(1, text.size() - 2));
            if (section.empty()) throw ConfigError("empty section name", file, number);
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value", file, number);
        ConfigLine l;
        l.number = number;
        l.section = section;
        l.key = strip(std::string_view(text).substr(0, eq));
        l.value = strip(std::string_view(text).substr(eq + 1));
        if (l.section.empty()) throw ConfigError("key outside any section", file, number, l.key);
        if (l.key.empty()) throw ConfigError("empty key", file, number);
        if (l.value.empty()) throw ConfigError("empty value", file, number, l.key);
        for (const auto& seen : lines)
            if (seen.section == l.section && seen.key == l.key)
                throw ConfigError("duplicate key (first set on line " + std::to_string(seen.number) + ")",
                                  file, number, l.key);
        lines.push_back(std::move(l));
    }
    return ScenarioValues(file, std::move(lines));
}

}  // namespace detail

inline Scenario parse_scenario_stream(std::istream& in, const std::string& file) {
    const auto values = detail::tokenize_config(in, file);

    static const std::map<std::string, std::vector<std::string>> known = {
        {"metric", {"epsilon", "f", "box", "grid"}},
        {"surface",
         {"kind", "t", "x", "y", "u_range", "v_range", "grid", "eta", "c", "x0", "xp0", "step", "perturb"}},
        {"analysis", {"delta", "seed", "trials"}},  // plus tol_* keys
        {"output", {"path", "format"}},
    };
    for (const auto& l : values.lines()) {
        auto sec = known.find(l.section);
        if (sec == known.end()) throw ConfigError("unknown section [" + l.section + "]", file, l.number);
        const auto& keys = sec->second;
        const bool ok = std::find(keys.begin(), keys.end(), l.key) != keys.end() ||
                        (l.section == "analysis" && l.key.rfind("tol_", 0) == 0);
        if (!ok) throw ConfigError("unknown key", file, l.number, l.key);
    }

    Scenario sc;
    sc.config_path = file;
    sc.analysis.tolerances = default_tolerances();

    if (!values.has_section("metric")) throw ConfigError("missing [metric] section", file);
    if (const auto* l = values.find("metric", "epsilon")) {
        const long e = values.integer(*l);
        if (e != 1 && e != -1) throw ConfigError("epsilon must be 1 or -1", file, l->number, l->key);
        sc.metric.epsilon = static_cast<int>(e);
    }
    if (const auto* l = values.find("metric", "f")) {
        sc.metric.f_source = values.str(*l);
        try {
            ScalarExpr::parse(sc.metric.f_source, {"x", "y"});
        } catch (const ParseError& e) {
            throw ConfigError(std::string("bad metric expression: ") + e.what(), file, l->number, l->key);
        }
    } else {
        throw ConfigError("missing metric key 'f'", file);
    }
    if (const auto* l = values.find("metric", "box")) {
        const auto v = values.numbers(*l, 6);
        sc.metric.box = Box3{v[0], v[1], v[2], v[3], v[4], v[5]};
    }
    if (const auto* l = values.find("metric", "grid")) {
        const auto v = values.numbers(*l, 3);
        sc.metric.nt = static_cast<int>(v[0]);
        sc.metric.nx = static_cast<int>(v[1]);
        sc.metric.ny = static_cast<int>(v[2]);
    }
    try {
        sc.metric_grid();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("bad metric grid: ") + e.what(), file);
    }

    if (values.has_section("surface")) {
        const auto* kind = values.find("surface", "kind");
        if (!kind) throw ConfigError("surface section needs key 'kind' (explicit or ode)", file);
        const std::string k = values.str(*kind);
        const auto need = [&](const char* key) -> const detail::ConfigLine& {
            const auto* l = values.find("surface", key);
            if (!l) throw ConfigError(std::string("missing surface key '") + key + "'", file);
            return *l;
        };
        if (const auto* l = values.find("surface", "u_range")) {
            const auto v = values.numbers(*l, 2);
            sc.surface.u0 = v[0];
            sc.surface.u1 = v[1];
        }
        if (const auto* l = values.find("surface", "v_range")) {
            const auto v = values.numbers(*l, 2);
            sc.surface.v0 = v[0];
            sc.surface.v1 = v[1];
        }
        if (const auto* l = values.find("surface", "grid")) {
            const auto v = values.numbers(*l, 2);
            sc.surface.nu = static_cast<int>(v[0]);
            sc.surface.nv = static_cast<int>(v[1]);
        }
        if (k == "explicit") {
            sc.surface.kind = SurfaceKind::Explicit;
            for (const char* key : {"t", "x", "y"}) {
                const auto& l = need(key);
                const std::string src = values.str(l);
                try {
                    ScalarExpr::parse(src, {"u", "v"});
                } catch (const ParseError& e) {
                    throw ConfigError(std::string("bad surface expression: ") + e.what(), file, l.number, l.key);
                }
                (key[0] == 't' ? sc.surface.t_source : key[0] == 'x' ? sc.surface.x_source : sc.surface.y_source) = src;
            }
            for (const char* key : {"eta", "c", "x0", "xp0", "step", "perturb"})
                if (values.find("surface", key))
                    throw ConfigError(std::string("key '") + key + "' belongs to an ode surface, not an explicit one", file);
        } else if (k == "ode") {
            sc.surface.kind = SurfaceKind::Ode;
            if (const auto* l = values.find("surface", "eta")) {
                const long e = values.integer(*l);
                if (e != 1 && e != -1) throw ConfigError("eta must be 1 or -1", file, l->number, l->key);
                sc.surface.eta = static_cast<int>(e);
            }
            if (const auto* l = values.find("surface", "c")) sc.surface.C = values.number(*l);
            if (const auto* l = values.find("surface", "x0")) sc.surface.x0 = values.number(*l);
            if (const auto* l = values.find("surface", "xp0")) sc.surface.xp0 = values.number(*l);
            if (const auto* l = values.find("surface", "step")) {
                sc.surface.step = values.number(*l);
                if (!(sc.surface.step > 0)) throw ConfigError("step must be positive", file, l->number, l->key);
            }
            if (const auto* l = values.find("surface", "perturb")) sc.surface.perturb = values.number(*l);
            for (const char* key : {"t", "x", "y"})
                if (values.find("surface", key))
                    throw ConfigError(std::string("key '") + key + "' belongs to an explicit surface, not an ode one", file);
        } else {
            throw ConfigError("surface kind must be 'explicit' or 'ode', got '" + k + "'", file, kind->number, kind->key);
        }
        if (!(sc.surface.u1 > sc.surface.u0) || !(sc.surface.v1 > sc.surface.v0))
            throw ConfigError("degenerate surface parameter rectangle", file);
        if (sc.surface.nu < 2 || sc.surface.nv < 2)
            throw ConfigError("surface grid resolution must be >= 2 per axis", file);
    }

    if (const auto* l = values.find("analysis", "delta")) {
        const long d = values.integer(*l);
        if (d != 1 && d != -1) throw ConfigError("delta must be 1 or -1", file, l->number, l->key);
        sc.analysis.delta = static_cast<int>(d);
    }
    if (const auto* l = values.find("analysis", "seed")) {
        const double v = values.number(*l);
        if (v < 0) throw ConfigError("seed must be non-negative", file, l->number, l->key);
        sc.analysis.seed = static_cast<std::uint64_t>(v);
    }
    if (const auto* l = values.find("analysis", "trials")) {
        const long t = values.integer(*l);
        if (t < 1) throw ConfigError("trials must be positive", file, l->number, l->key);
        sc.analysis.trials = static_cast<int>(t);
    }
    for (const auto& l : values.lines()) {
        if (l.section == "analysis" && l.key.rfind("tol_", 0) == 0) {
            const std::string name = l.key.substr(4);
            if (sc.analysis.tolerances.find(name) == sc.analysis.tolerances.end())
                throw ConfigError("unknown tolerance '" + name + "'", file, l.number, l.key);
            const double v = values.number(l);
            if (!(v > 0)) throw ConfigError("tolerances must be positive", file, l.number, l.key);
            sc.analysis.tolerances[name] = v;
        }
    }

    if (const auto* l = values.find("output", "path")) sc.output.path = values.str(*l);
    if (const auto* l = values.find("output", "format")) {
        sc.output.format = values.str(*l);
        if (sc.output.format != "text" && sc.output.format != "structured")
            throw ConfigError("format must be 'text' or 'structured'", file, l->number, l->key);
    }
    return sc;
}

inline Scenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file", path);
    return parse_scenario_stream(in, path);
}

inline Scenario parse_scenario_string(const std::string& text, const std::string& label = "<string>") {
    std::istringstream in(text);
    return parse_scenario_stream(in, label);
}

// --tol-override name=value
inline void apply_tolerance_override(Scenario& sc, const std::string& entry) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw ConfigError("tolerance override must look like name=value", "", 0, entry);
    const std::string name = detail::strip(std::string_view(entry).substr(0, eq));
    const std::string value = detail::strip(std::string_view(entry).substr(eq + 1));
    if (sc.analysis.tolerances.find(name) == sc.analysis.tolerances.end())
        throw ConfigError("unknown tolerance", "", 0, name);
    try {
        std::size_t consumed = 0;
        const double v = std::stod(value, &consumed);
        if (consumed != value.size() || !(v > 0)) throw std::invalid_argument("bad");
        sc.analysis.tolerances[name] = v;
    } catch (const std::exception&) {
        throw ConfigError("tolerance override needs a positive number", "", 0, entry);
    }
}

}  // namespace walker3
