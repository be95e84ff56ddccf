#include "chns/config.hpp"

#include "chns/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace chns {

Grid RunConfig::grid() const {
    return make_grid(std::span<const int>(dims), std::span<const double>(lengths));
}

StepperConfig RunConfig::stepper_for(const ScalarField& phi0) const {
    StepperConfig cfg = stepper;
    cfg.params = params;
    cfg.potential = potential;
    cfg.gamma = params.gamma;
    cfg.S = S ? *S : default_stabilization(potential, params, phi0);
    return cfg;
}

namespace {

// Raised by value parsers; the caller attaches key and line.
struct BadValue {
    std::string message;
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw BadValue{"expected a number, got '" + std::string(s) + "'"};
    }
    if (!std::isfinite(v)) throw BadValue{"value must be finite"};
    return v;
}

template <class Int>
Int to_integer(std::string_view s) {
    Int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw BadValue{"expected an integer, got '" + std::string(s) + "'"};
    }
    return v;
}

bool to_bool(std::string_view s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw BadValue{"expected true or false, got '" + std::string(s) + "'"};
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ',' || s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ',' && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string unquote(std::string_view s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return std::string(s);
}

std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <class T>
std::string fmt_list(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        if constexpr (std::is_floating_point_v<T>) out += fmt(v[i]);
        else out += std::to_string(v[i]);
    }
    return out;
}

template <class E>
struct EnumNames {
    std::vector<std::pair<E, std::string_view>> names;

    E parse(std::string_view s) const {
        for (const auto& [e, n] : names) {
            if (n == s) return e;
        }
        std::string allowed;
        for (const auto& [e, n] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(n);
        throw BadValue{"unknown value '" + std::string(s) + "' (expected one of " + allowed + ")"};
    }
    std::string name(E e) const {
        for (const auto& [v, n] : names) {
            if (v == e) return std::string(n);
        }
        return "?";
    }
};

const EnumNames<PotentialKind> kPotentials{{{PotentialKind::Quartic, "quartic"},
                                            {PotentialKind::FloryHuggins, "flory_huggins"}}};
const EnumNames<InitialKind> kInitial{{{InitialKind::Uniform, "uniform"},
                                       {InitialKind::Random, "random"},
                                       {InitialKind::File, "file"},
                                       {InitialKind::PerturbedEquilibrium, "perturbed_equilibrium"}}};
const EnumNames<EquilibrateMethod> kMethods{{{EquilibrateMethod::Multistart, "multistart"},
                                             {EquilibrateMethod::ChoFlow, "cho_flow"},
                                             {EquilibrateMethod::Reduced, "reduced"}}};
const EnumNames<SolverMethod> kSolvers{{{SolverMethod::ConjugateGradient, "cg"},
                                        {SolverMethod::DirectDense, "dense"}}};
const EnumNames<Preconditioner> kPreconditioners{{{Preconditioner::Spectral, "spectral"},
                                                  {Preconditioner::Jacobi, "jacobi"}}};

struct Context {
    std::filesystem::path base_dir;
};

struct Key {
    std::string name;
    std::function<void(RunConfig&, std::string_view, const Context&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class Get>
Key number(std::string name, Get field) {
    return {name,
            [field](RunConfig& c, std::string_view v, const Context&) { field(c) = to_double(v); },
            [field](const RunConfig& c) { return fmt(field(c)); }};
}

template <class Get>
Key positive(std::string name, Get field) {
    return {name,
            [field](RunConfig& c, std::string_view v, const Context&) {
                const double x = to_double(v);
                if (!(x > 0.0)) throw BadValue{"must be positive"};
                field(c) = x;
            },
            [field](const RunConfig& c) { return fmt(field(c)); }};
}

template <class Int, class Get>
Key integer(std::string name, Get field, Int min_value) {
    return {name,
            [field, min_value](RunConfig& c, std::string_view v, const Context&) {
                const Int x = to_integer<Int>(v);
                if (x < min_value) throw BadValue{"must be at least " + std::to_string(min_value)};
                field(c) = x;
            },
            [field](const RunConfig& c) { return std::to_string(field(c)); }};
}

template <class E, class Get>
Key choice(std::string name, const EnumNames<E>& names, Get field) {
    return {name,
            [&names, field](RunConfig& c, std::string_view v, const Context&) { field(c) = names.parse(v); },
            [&names, field](const RunConfig& c) { return names.name(field(c)); }};
}

const std::vector<Key>& keys() {
    static const std::vector<Key> table = [] {
        std::vector<Key> k;
        k.push_back({"grid.n",
                     [](RunConfig& c, std::string_view v, const Context&) {
                         c.dims.clear();
                         for (auto item : split_list(v)) c.dims.push_back(to_integer<int>(item));
                         if (c.dims.size() != 2 && c.dims.size() != 3) {
                             throw BadValue{"expected 2 or 3 cell counts"};
                         }
                         for (int n : c.dims) {
                             if (n < 4) throw BadValue{"cell counts must be at least 4"};
                         }
                     },
                     [](const RunConfig& c) { return fmt_list(c.dims); }});
        k.push_back({"grid.length",
                     [](RunConfig& c, std::string_view v, const Context&) {
                         c.lengths.clear();
                         for (auto item : split_list(v)) {
                             const double x = to_double(item);
                             if (!(x > 0.0)) throw BadValue{"lengths must be positive"};
                             c.lengths.push_back(x);
                         }
                     },
                     [](const RunConfig& c) { return fmt_list(c.lengths); }});

        k.push_back(choice("potential.kind", kPotentials, [](auto& c) -> auto& { return c.potential.kind; }));
        k.push_back(positive("potential.clip_delta", [](auto& c) -> auto& { return c.potential.clip_delta; }));

        k.push_back(number("params.theta", [](auto& c) -> auto& { return c.potential.theta; }));
        k.push_back(number("params.theta0", [](auto& c) -> auto& { return c.potential.theta0; }));
        k.push_back(positive("params.nu1", [](auto& c) -> auto& { return c.params.nu1; }));
        k.push_back(positive("params.nu2", [](auto& c) -> auto& { return c.params.nu2; }));
        k.push_back(number("params.chi", [](auto& c) -> auto& { return c.params.chi; }));
        k.push_back(number("params.alpha", [](auto& c) -> auto& { return c.params.alpha; }));
        k.push_back(number("params.beta", [](auto& c) -> auto& { return c.params.beta; }));
        k.push_back(number("params.c0", [](auto& c) -> auto& { return c.params.c0; }));
        k.push_back(number("params.gamma", [](auto& c) -> auto& { return c.params.gamma; }));

        k.push_back(positive("stepper.dt", [](auto& c) -> auto& { return c.stepper.dt; }));
        k.push_back({"stepper.S",
                     [](RunConfig& c, std::string_view v, const Context&) {
                         if (v == "auto") {
                             c.S.reset();
                             return;
                         }
                         const double x = to_double(v);
                         if (x < 0.0) throw BadValue{"must be nonnegative or auto"};
                         c.S = x;
                     },
                     [](const RunConfig& c) { return c.S ? fmt(*c.S) : std::string("auto"); }});
        k.push_back(positive("stepper.clip_floor", [](auto& c) -> auto& { return c.stepper.clip_floor; }));
        k.push_back({"stepper.fluid",
                     [](RunConfig& c, std::string_view v, const Context&) { c.stepper.fluid = to_bool(v); },
                     [](const RunConfig& c) { return std::string(c.stepper.fluid ? "true" : "false"); }});

        k.push_back(choice("linear.method", kSolvers, [](auto& c) -> auto& { return c.stepper.linear.method; }));
        k.push_back(positive("linear.tol", [](auto& c) -> auto& { return c.stepper.linear.tol; }));
        k.push_back(integer("linear.max_iter", [](auto& c) -> auto& { return c.stepper.linear.max_iter; }, 0));
        k.push_back(choice("linear.preconditioner", kPreconditioners,
                           [](auto& c) -> auto& { return c.stepper.linear.preconditioner; }));

        k.push_back(choice("initial.kind", kInitial, [](auto& c) -> auto& { return c.initial.kind; }));
        k.push_back(number("initial.phi_mean", [](auto& c) -> auto& { return c.initial.phi_mean; }));
        k.push_back(number("initial.sigma_mean", [](auto& c) -> auto& { return c.initial.sigma_mean; }));
        k.push_back({"initial.amplitude",
                     [](RunConfig& c, std::string_view v, const Context&) {
                         const double x = to_double(v);
                         if (x < 0.0) throw BadValue{"must be nonnegative"};
                         c.initial.amplitude = x;
                     },
                     [](const RunConfig& c) { return fmt(c.initial.amplitude); }});
        k.push_back(integer("initial.smoothing", [](auto& c) -> auto& { return c.initial.smoothing; }, 0));
        k.push_back(integer("initial.seed", [](auto& c) -> auto& { return c.initial.seed; }, std::uint64_t(0)));
        k.push_back({"initial.file",
                     [](RunConfig& c, std::string_view v, const Context& ctx) {
                         std::filesystem::path p(unquote(v));
                         if (p.empty()) throw BadValue{"empty path"};
                         if (p.is_relative() && !ctx.base_dir.empty()) p = ctx.base_dir / p;
                         p = p.lexically_normal();
                         if (!std::filesystem::exists(p)) throw BadValue{"file not found: " + p.string()};
                         c.initial.file = p.string();
                     },
                     [](const RunConfig& c) { return c.initial.file; }});
        k.push_back({"initial.velocity",
                     [](RunConfig& c, std::string_view v, const Context&) {
                         const double x = to_double(v);
                         if (x < 0.0) throw BadValue{"must be nonnegative"};
                         c.initial.velocity = x;
                     },
                     [](const RunConfig& c) { return fmt(c.initial.velocity); }});

        k.push_back(positive("run.t_end", [](auto& c) -> auto& { return c.t_end; }));
        k.push_back(positive("run.a1", [](auto& c) -> auto& { return c.a1; }));

        k.push_back({"output.dir",
                     [](RunConfig& c, std::string_view v, const Context&) {
                         c.output.dir = unquote(v);
                         if (c.output.dir.empty()) throw BadValue{"empty path"};
                     },
                     [](const RunConfig& c) { return c.output.dir; }});
        k.push_back(integer("output.csv_every", [](auto& c) -> auto& { return c.output.csv_every; },
                            std::uint64_t(1)));
        k.push_back(integer("output.snapshot_every", [](auto& c) -> auto& { return c.output.snapshot_every; },
                            std::uint64_t(1)));
        k.push_back(integer("output.checkpoint_every",
                            [](auto& c) -> auto& { return c.output.checkpoint_every; }, std::uint64_t(0)));

        k.push_back(choice("equilibrate.method", kMethods, [](auto& c) -> auto& { return c.equilibrate.method; }));
        k.push_back(positive("equilibrate.tol", [](auto& c) -> auto& { return c.equilibrate.tol; }));
        k.push_back(positive("equilibrate.dt", [](auto& c) -> auto& { return c.equilibrate.dt; }));
        k.push_back(number("equilibrate.gamma", [](auto& c) -> auto& { return c.equilibrate.gamma; }));
        k.push_back(integer("equilibrate.max_steps", [](auto& c) -> auto& { return c.equilibrate.max_steps; }, 1));
        k.push_back(integer("equilibrate.n_starts", [](auto& c) -> auto& { return c.equilibrate.n_starts; }, 1));
        k.push_back(integer("equilibrate.seed", [](auto& c) -> auto& { return c.equilibrate.seed; },
                            std::uint64_t(0)));
        k.push_back(number("equilibrate.amplitude", [](auto& c) -> auto& { return c.equilibrate.amplitude; }));
        k.push_back(integer("equilibrate.smoothing", [](auto& c) -> auto& { return c.equilibrate.smoothing; }, 0));
        return k;
    }();
    return table;
}

const Key* find_key(std::string_view name) {
    for (const auto& k : keys()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

} // namespace

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    RunConfig config;
    const Context ctx{base_dir};
    std::map<std::string, int> seen;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(line_no, "expected 'key = value'");
        const std::string name(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (name.empty()) throw ConfigError(line_no, "missing key before '='");

        const Key* key = find_key(name);
        if (!key) throw ConfigError(line_no, "unknown key '" + name + "'");
        if (seen.count(name)) {
            throw ConfigError(line_no, "duplicate key '" + name + "' (first set on line " +
                                           std::to_string(seen[name]) + ")");
        }
        if (value.empty()) throw ConfigError(line_no, name + ": missing value");
        try {
            key->set(config, value, ctx);
        } catch (const BadValue& e) {
            throw ConfigError(line_no, name + ": " + e.message);
        }
        seen[name] = line_no;
    }

    const auto line_of = [&](std::initializer_list<const char*> names) {
        int l = 0;
        for (const char* n : names) {
            if (auto it = seen.find(n); it != seen.end()) l = std::max(l, it->second);
        }
        return l;
    };

    for (const char* required : {"grid.n", "potential.kind"}) {
        if (!seen.count(required)) throw ConfigError(0, std::string("missing required key '") + required + "'");
    }
    if (config.lengths.empty()) {
        config.lengths.assign(config.dims.begin(), config.dims.end());
    } else if (config.lengths.size() != config.dims.size()) {
        throw ConfigError(line_of({"grid.n", "grid.length"}), "grid.length must have one entry per grid.n entry");
    }

    if (config.potential.kind == PotentialKind::FloryHuggins) {
        const int l = line_of({"params.theta", "params.theta0", "potential.kind"});
        if (!(config.potential.theta > 0.0)) throw ConfigError(l, "Flory-Huggins requires theta > 0");
        if (!(config.potential.theta < config.potential.theta0)) throw ConfigError(l, "requires theta < theta0");
        if (!(std::abs(config.initial.phi_mean) < 1.0)) {
            throw ConfigError(line_of({"initial.phi_mean"}), "initial.phi_mean must lie in (-1,1)");
        }
    }
    if (!(config.params.c0 > -1.0 && config.params.c0 < 1.0)) {
        throw ConfigError(line_of({"params.c0"}), "c0 must lie in (-1,1)");
    }
    if (config.params.alpha < 0.0) throw ConfigError(line_of({"params.alpha"}), "alpha must be nonnegative");
    if (config.params.gamma < 0.0) throw ConfigError(line_of({"params.gamma"}), "gamma must be nonnegative");
    if (config.equilibrate.gamma < 0.0) {
        throw ConfigError(line_of({"equilibrate.gamma"}), "equilibrate.gamma must be nonnegative");
    }
    if (!(config.potential.clip_delta < 0.5)) {
        throw ConfigError(line_of({"potential.clip_delta"}), "potential.clip_delta must be below 0.5");
    }
    if (!(config.stepper.clip_floor < 0.5)) {
        throw ConfigError(line_of({"stepper.clip_floor"}), "stepper.clip_floor must be below 0.5");
    }
    const bool needs_file = config.initial.kind == InitialKind::File ||
                            config.initial.kind == InitialKind::PerturbedEquilibrium;
    if (needs_file && config.initial.file.empty()) {
        throw ConfigError(line_of({"initial.kind"}), "initial.kind " + kInitial.name(config.initial.kind) +
                                                         " requires initial.file");
    }

    config.stepper.params = config.params;
    config.stepper.potential = config.potential;
    config.stepper.gamma = config.params.gamma;
    try {
        (void)config.grid();
        config.stepper.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(0, e.what());
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

std::string dump_config(const RunConfig& config) {
    std::string out;
    std::string section;
    for (const auto& k : keys()) {
        if (k.name == "initial.file" && config.initial.file.empty()) continue;
        const auto s = k.name.substr(0, k.name.find('.'));
        if (s != section) {
            if (!section.empty()) out += '\n';
            section = s;
        }
        out += k.name + " = " + k.get(config) + '\n';
    }
    return out;
}

} // namespace chns
