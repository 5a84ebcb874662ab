#include "fluxlim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fluxlim {

const ConfigEntry* ConfigSection::find(const std::string& key) const
{
    for (const ConfigEntry& e : entries) {
        if (e.key == key)
            return &e;
    }
    return nullptr;
}

const ConfigSection* RawConfig::find(const std::string& name) const
{
    for (const ConfigSection& s : sections) {
        if (s.name == name)
            return &s;
    }
    return nullptr;
}

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::size_t skip_space(const std::string& s, std::size_t i)
{
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
        ++i;
    return i;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

} // namespace

RawConfig parse_config_text(const std::string& text, const std::string& origin)
{
    RawConfig raw;
    raw.origin = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    ConfigSection* current = nullptr;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();

        // strip comments outside quotes
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"')
                quoted = !quoted;
            else if (!quoted && (line[i] == '#' || line[i] == ';')) {
                line.resize(i);
                break;
            }
        }
        if (quoted)
            throw ConfigError("unterminated string", lineno, static_cast<int>(line.find('"')) + 1);

        std::size_t i = skip_space(line, 0);
        if (i == line.size())
            continue;

        if (line[i] == '[') {
            const std::size_t close = line.find(']', i);
            if (close == std::string::npos)
                throw ConfigError("expected `]` after section name", lineno, static_cast<int>(line.size()) + 1);
            const std::string name = trim(line.substr(i + 1, close - i - 1));
            if (name.empty() || !is_ident_start(name[0]) || !std::all_of(name.begin(), name.end(), is_ident))
                throw ConfigError("invalid section name", lineno, static_cast<int>(i) + 2);
            const std::size_t rest = skip_space(line, close + 1);
            if (rest != line.size())
                throw ConfigError("unexpected text after section header", lineno, static_cast<int>(rest) + 1);
            if (raw.find(name))
                throw ConfigError("duplicate section [" + name + "]", lineno, static_cast<int>(i) + 1);
            raw.sections.push_back({name, lineno, {}});
            current = &raw.sections.back();
            continue;
        }

        if (!is_ident_start(line[i]))
            throw ConfigError("expected a key or a section header", lineno, static_cast<int>(i) + 1);
        const std::size_t key_start = i;
        while (i < line.size() && is_ident(line[i]))
            ++i;
        const std::string key = line.substr(key_start, i - key_start);
        i = skip_space(line, i);
        if (i == line.size() || line[i] != '=')
            throw ConfigError("expected `=` after key `" + key + "`", lineno, static_cast<int>(i) + 1);
        i = skip_space(line, i + 1);
        if (i == line.size())
            throw ConfigError("missing value for key `" + key + "`", lineno, static_cast<int>(i) + 1);
        if (!current)
            throw ConfigError("key `" + key + "` outside of any section", lineno, static_cast<int>(key_start) + 1);

        std::string value = trim(line.substr(i));
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"')
                throw ConfigError("unexpected text after string", lineno, static_cast<int>(i) + 1);
            value = value.substr(1, value.size() - 2);
        }
        if (current->find(key))
            throw ConfigError("duplicate key `" + key + "` in [" + current->name + "]", lineno,
                              static_cast<int>(key_start) + 1);
        current->entries.push_back({key, value, lineno, static_cast<int>(key_start) + 1, static_cast<int>(i) + 1});
    }
    return raw;
}

RawConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file " + path, 0, 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

void override_value(RawConfig& raw, const std::string& dotted_key, const std::string& value)
{
    const auto dot = dotted_key.find('.');
    if (dot == std::string::npos)
        throw ConfigError("parameter `" + dotted_key + "` must be written section.key", 0, 0);
    const std::string section = dotted_key.substr(0, dot);
    const std::string key = dotted_key.substr(dot + 1);
    for (ConfigSection& s : raw.sections) {
        if (s.name != section)
            continue;
        for (ConfigEntry& e : s.entries) {
            if (e.key == key) {
                e.value = value;
                return;
            }
        }
    }
    throw ConfigError("unknown key `" + dotted_key + "` (not present in the config)", 0, 0);
}

std::string render(const RawConfig& raw)
{
    std::string out;
    for (const ConfigSection& s : raw.sections) {
        out += "[" + s.name + "]\n";
        for (const ConfigEntry& e : s.entries)
            out += e.key + " = " + e.value + "\n";
    }
    return out;
}

namespace {

const std::map<std::string, std::set<std::string>>& schema()
{
    static const std::map<std::string, std::set<std::string>> s = {
        {"grid", {"x_min", "x_max", "n_cells"}},
        {"cost", {"kind", "c", "profile", "dual_nodes"}},
        {"potential", {"spec"}},
        {"initial", {"spec"}},
        {"run",
         {"integrator", "t_end", "snapshots", "snapshot_every", "cfl", "floor", "flux_mode", "interface", "boundary",
          "boundary_left", "boundary_right"}},
        {"jko", {"h", "n_steps", "n_quantiles", "newton_tol", "max_newton_iters"}},
        {"checks", {}}, // keys are check names
        {"check_options",
         {"comparison_offset", "propagation_threshold", "propagation_slack_cells", "cost_samples",
          "crossval_flux_mode"}},
        {"output", {"dir"}},
    };
    return s;
}

// Typed access to one section with positioned errors.
class Reader {
public:
    Reader(const RawConfig& raw, const std::string& section) : raw_(raw), name_(section), sec_(raw.find(section)) {}

    bool has(const std::string& key) const { return sec_ && sec_->find(key); }

    const ConfigEntry& entry(const std::string& key) const
    {
        if (!has(key)) {
            const int line = sec_ ? sec_->line : 0;
            throw ConfigError("missing required key `" + name_ + "." + key + "`", line, 1);
        }
        return *sec_->find(key);
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        const ConfigEntry& e = entry(key);
        throw ConfigError("`" + name_ + "." + key + "`: " + what, e.line, e.value_column);
    }

    std::string text(const std::string& key) const { return entry(key).value; }
    std::string text(const std::string& key, const std::string& fallback) const
    {
        return has(key) ? text(key) : fallback;
    }

    double number(const std::string& key) const
    {
        double v;
        if (!parse_number(text(key), v))
            fail(key, "expected a number, got `" + text(key) + "`");
        return v;
    }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    int integer(const std::string& key) const
    {
        const std::string& s = text(key);
        char* end = nullptr;
        errno = 0;
        const long v = std::strtol(s.c_str(), &end, 10);
        if (s.empty() || *end != '\0' || errno == ERANGE || v < -1000000000L || v > 1000000000L)
            fail(key, "expected an integer, got `" + s + "`");
        return static_cast<int>(v);
    }
    int integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

    std::vector<double> numbers(const std::string& key) const
    {
        std::string s = text(key);
        if (!s.empty() && s.front() == '[') {
            if (s.back() != ']')
                fail(key, "unterminated list");
            s = s.substr(1, s.size() - 2);
        }
        std::vector<double> out;
        if (trim(s).empty())
            return out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            double v;
            if (!parse_number(trim(item), v))
                fail(key, "expected a list of numbers, got `" + trim(item) + "`");
            out.push_back(v);
        }
        return out;
    }

    std::string choice(const std::string& key, const std::vector<std::string>& options,
                       const std::string& fallback) const
    {
        if (!has(key))
            return fallback;
        const std::string v = text(key);
        if (std::find(options.begin(), options.end(), v) == options.end()) {
            std::string list;
            for (const auto& o : options)
                list += (list.empty() ? "" : ", ") + o;
            fail(key, "unknown value `" + v + "` (expected one of: " + list + ")");
        }
        return v;
    }

    static bool parse_number(const std::string& s, double& v)
    {
        if (s.empty())
            return false;
        char* end = nullptr;
        v = std::strtod(s.c_str(), &end);
        return *end == '\0' && std::isfinite(v);
    }

private:
    const RawConfig& raw_;
    std::string name_;
    const ConfigSection* sec_;
};

void check_schema(const RawConfig& raw)
{
    for (const ConfigSection& s : raw.sections) {
        const auto it = schema().find(s.name);
        if (it == schema().end())
            throw ConfigError("unknown section [" + s.name + "]", s.line, 2);
        for (const ConfigEntry& e : s.entries) {
            bool ok = it->second.count(e.key) > 0;
            if (s.name == "checks") {
                const auto& names = known_checks();
                ok = std::find(names.begin(), names.end(), e.key) != names.end();
                if (!ok)
                    throw ConfigError("unknown check `" + e.key + "`", e.line, e.key_column);
            }
            if (!ok)
                throw ConfigError("unknown key `" + s.name + "." + e.key + "`", e.line, e.key_column);
        }
    }
}

std::string resolve(const std::string& base_dir, const std::string& path)
{
    std::filesystem::path p(path);
    if (p.is_relative())
        p = std::filesystem::path(base_dir) / p;
    return p.lexically_normal().string();
}

// name(a, b, ...) -> args; bare name -> no args
bool parse_call(const std::string& s, std::string& name, std::vector<double>& args)
{
    const auto open = s.find('(');
    if (open == std::string::npos) {
        name = trim(s);
        args.clear();
        return true;
    }
    if (s.back() != ')')
        return false;
    name = trim(s.substr(0, open));
    std::stringstream ss(s.substr(open + 1, s.size() - open - 2));
    std::string item;
    args.clear();
    while (std::getline(ss, item, ',')) {
        double v;
        if (!Reader::parse_number(trim(item), v))
            return false;
        args.push_back(v);
    }
    return true;
}

} // namespace

const std::vector<std::string>& known_checks()
{
    static const std::vector<std::string> names = {
        "stationary",   "gibbs_convergence", "comparison", "weak_max",        "weak_min",     "propagation",
        "classical_limit", "lq_identity",    "conservation", "lyapunov",      "cost_properties", "jko_crossval",
    };
    return names;
}

double default_tolerance(const std::string& check, Integrator integrator)
{
    if (check == "comparison" || check == "weak_max" || check == "weak_min")
        return 1e-8;
    if (check == "stationary" || check == "classical_limit" || check == "lq_identity")
        return 1e-3;
    if (check == "gibbs_convergence")
        return 1e-2;
    if (check == "propagation")
        return 0.0;
    if (check == "conservation")
        return 1e-12;
    if (check == "lyapunov")
        return integrator == Integrator::Jko ? 1e-12 : 1e-8;
    if (check == "cost_properties")
        return 1e-6;
    if (check == "jko_crossval")
        return 5e-2;
    throw std::invalid_argument("unknown check " + check);
}

ExperimentConfig build_config(const RawConfig& raw, const std::string& base_dir)
{
    check_schema(raw);
    ExperimentConfig cfg;
    cfg.raw = raw;

    const Reader grid(raw, "grid");
    const double x_min = grid.number("x_min");
    const double x_max = grid.number("x_max");
    if (!(x_max > x_min))
        grid.fail("x_max", "must exceed x_min");
    const int n = grid.integer("n_cells");
    if (n < 2 || n > 1000000)
        grid.fail("n_cells", "must lie in [2, 1000000]");
    const Grid1D g(x_min, x_max, n);

    const Reader cost(raw, "cost");
    const std::string kind = cost.choice("kind", {"relativistic", "classical", "tabulated"}, "");
    if (kind.empty())
        cost.entry("kind");
    CostFunction cf = CostFunction::classical();
    if (kind == "relativistic") {
        const double c = cost.number("c");
        if (!(c > 0.0))
            cost.fail("c", "must be positive");
        cf = CostFunction::relativistic(c);
    } else if (kind == "tabulated") {
        const std::string path = resolve(base_dir, cost.text("profile"));
        if (!std::filesystem::exists(path))
            cost.fail("profile", "file not found: " + path);
        const int nodes = cost.integer("dual_nodes", 256);
        try {
            cf = CostFunction::tabulated(load_profile_csv(path), nodes);
        } catch (const std::exception& e) {
            cost.fail("profile", e.what());
        }
    }
    cfg.cost_text = cf.describe();

    const Reader pot(raw, "potential");
    Potential v = Potential::zero();
    try {
        v = Potential::parse(pot.text("spec"));
    } catch (const std::invalid_argument& e) {
        pot.fail("spec", e.what());
    }

    const Reader run(raw, "run");
    cfg.integrator = run.choice("integrator", {"fv", "jko"}, "fv") == "jko" ? Integrator::Jko : Integrator::Fv;

    OperatorContext ctx{cf, v, g};
    ctx.flux_mode = run.choice("flux_mode", {"separate", "combined"}, "separate") == "combined"
                        ? FluxMode::CombinedArgument
                        : FluxMode::SeparateArgument;
    const std::string iface = run.choice("interface", {"upwind", "centered", "limited"}, "upwind");
    ctx.interface_density = iface == "centered"  ? InterfaceDensity::Centered
                            : iface == "limited" ? InterfaceDensity::Limited
                                                 : InterfaceDensity::Upwind;
    if (run.choice("boundary", {"noflux", "dirichlet"}, "noflux") == "dirichlet") {
        const double left = run.number("boundary_left");
        const double right = run.number("boundary_right");
        if (!(left > 0.0))
            run.fail("boundary_left", "Dirichlet data must be positive");
        if (!(right > 0.0))
            run.fail("boundary_right", "Dirichlet data must be positive");
        ctx.boundary = Boundary::dirichlet(left, right);
    } else if (run.has("boundary_left") || run.has("boundary_right")) {
        run.fail(run.has("boundary_left") ? "boundary_left" : "boundary_right",
                 "boundary values need boundary = dirichlet");
    }

    cfg.run.ctx = ctx;
    cfg.run.cfl_factor = run.number("cfl", 0.4);
    if (!(cfg.run.cfl_factor > 0.0 && cfg.run.cfl_factor <= 1.0))
        run.fail("cfl", "must lie in (0, 1]");
    cfg.run.positivity_floor = run.number("floor", 1e-12);
    if (!(cfg.run.positivity_floor > 0.0 && cfg.run.positivity_floor <= 1e-3))
        run.fail("floor", "must lie in (0, 1e-3]");

    const Reader jko(raw, "jko");
    cfg.jko = JkoConfig{cf, v};
    cfg.jko.h = jko.number("h", 0.01);
    if (!(cfg.jko.h > 0.0))
        jko.fail("h", "must be positive");
    cfg.jko_steps = jko.integer("n_steps", 10);
    if (cfg.jko_steps < 1 || cfg.jko_steps > 1000000)
        jko.fail("n_steps", "must lie in [1, 1000000]");
    cfg.jko.n_quantiles = jko.integer("n_quantiles", 200);
    if (cfg.jko.n_quantiles < 8)
        jko.fail("n_quantiles", "M too small (need at least 8 quantiles)");
    cfg.jko.newton_tol = jko.number("newton_tol", 1e-10);
    if (!(cfg.jko.newton_tol > 0.0))
        jko.fail("newton_tol", "must be positive");
    cfg.jko.max_newton_iters = jko.integer("max_newton_iters", 100);
    if (cfg.jko.max_newton_iters < 1)
        jko.fail("max_newton_iters", "must be at least 1");

    if (cfg.integrator == Integrator::Fv) {
        cfg.run.t_end = run.number("t_end");
        if (!(cfg.run.t_end > 0.0))
            run.fail("t_end", "must be positive");
    } else {
        cfg.run.t_end = run.has("t_end") ? run.number("t_end") : cfg.jko.h * cfg.jko_steps;
    }
    if (run.has("snapshots")) {
        cfg.run.snapshot_times = run.numbers("snapshots");
        for (double t : cfg.run.snapshot_times) {
            if (!(t >= 0.0 && t <= cfg.run.t_end))
                run.fail("snapshots", "snapshot times must lie in [0, t_end]");
        }
    }
    if (run.has("snapshot_every")) {
        const double every = run.number("snapshot_every");
        if (!(every > 0.0) || cfg.run.t_end / every > 100000.0)
            run.fail("snapshot_every", "must be positive and give at most 100000 snapshots");
        const auto count = static_cast<long>(std::floor(cfg.run.t_end / every * (1.0 + 1e-12)));
        for (long k = 1; k <= count; ++k)
            cfg.run.snapshot_times.push_back(std::min(cfg.run.t_end, static_cast<double>(k) * every));
    }

    const Reader init(raw, "initial");
    const std::string spec = init.text("spec");
    cfg.initial.text = spec;
    if (spec.rfind("csv:", 0) == 0) {
        cfg.initial.kind = InitialSpec::Kind::Csv;
        cfg.initial.path = resolve(base_dir, spec.substr(4));
        if (!std::filesystem::exists(cfg.initial.path))
            init.fail("spec", "file not found: " + cfg.initial.path);
    } else {
        std::string name;
        if (!parse_call(spec, name, cfg.initial.args))
            init.fail("spec", "malformed initial condition `" + spec + "`");
        const auto need = [&](std::size_t k) {
            if (cfg.initial.args.size() != k)
                init.fail("spec", name + " takes " + std::to_string(k) + " arguments");
        };
        if (name == "gaussian") {
            cfg.initial.kind = InitialSpec::Kind::Gaussian;
            need(2);
            if (!(cfg.initial.args[1] > 0.0))
                init.fail("spec", "gaussian width must be positive");
        } else if (name == "indicator") {
            cfg.initial.kind = InitialSpec::Kind::Indicator;
            need(2);
            if (!(cfg.initial.args[1] > cfg.initial.args[0]))
                init.fail("spec", "indicator needs a < b");
        } else if (name == "gibbs") {
            cfg.initial.kind = InitialSpec::Kind::Gibbs;
            need(0);
        } else if (name == "bump") {
            cfg.initial.kind = InitialSpec::Kind::Bump;
            need(4);
            if (!(cfg.initial.args[0] > 0.0) || !(cfg.initial.args[3] > 0.0))
                init.fail("spec", "bump needs a positive base and width");
        } else {
            init.fail("spec", "unknown initial condition `" + name + "`");
        }
    }

    const Reader opts(raw, "check_options");
    cfg.options.comparison_offset = opts.number("comparison_offset", 0.1);
    if (!(cfg.options.comparison_offset >= 0.0))
        opts.fail("comparison_offset", "must be nonnegative");
    cfg.options.propagation_threshold = opts.number("propagation_threshold", 1e-10);
    if (!(cfg.options.propagation_threshold > 0.0))
        opts.fail("propagation_threshold", "must be positive");
    cfg.options.propagation_slack_cells = opts.number("propagation_slack_cells", 5.0);
    if (!(cfg.options.propagation_slack_cells >= 0.0))
        opts.fail("propagation_slack_cells", "must be nonnegative");
    cfg.options.cost_samples = opts.integer("cost_samples", 1000);
    if (cfg.options.cost_samples < 1 || cfg.options.cost_samples > 10000000)
        opts.fail("cost_samples", "must lie in [1, 10000000]");
    cfg.options.crossval_flux_mode =
        opts.choice("crossval_flux_mode", {"separate", "combined"}, "combined") == "separate"
            ? FluxMode::SeparateArgument
            : FluxMode::CombinedArgument;

    if (const ConfigSection* checks = raw.find("checks")) {
        const Reader r(raw, "checks");
        for (const ConfigEntry& e : checks->entries) {
            double tol = default_tolerance(e.key, cfg.integrator);
            if (e.value != "default") {
                tol = r.number(e.key);
                if (!(tol >= 0.0))
                    r.fail(e.key, "tolerance must be nonnegative");
            }
            if (e.key == "lq_identity" &&
                (cfg.initial.kind == InitialSpec::Kind::Indicator || cfg.initial.kind == InitialSpec::Kind::Csv))
                throw ConfigError("lq_identity needs a smooth analytic initial condition (gaussian, bump or gibbs)",
                                  e.line, e.key_column);
            cfg.checks.push_back({e.key, tol});
        }
    }

    const Reader out(raw, "output");
    cfg.output_dir = out.text("dir", "out");
    return cfg;
}

ExperimentConfig load_experiment(const std::string& path)
{
    const std::filesystem::path p(path);
    return build_config(load_config(path), p.has_parent_path() ? p.parent_path().string() : ".");
}

DensityField make_initial(const ExperimentConfig& cfg)
{
    const Grid1D& g = cfg.run.ctx.grid;
    const auto& a = cfg.initial.args;
    switch (cfg.initial.kind) {
    case InitialSpec::Kind::Csv:
        return read_csv(cfg.initial.path, g);
    case InitialSpec::Kind::Gibbs:
        return gibbs_density(cfg.run.ctx.potential, g);
    case InitialSpec::Kind::Indicator: {
        // linear ramp across the two cells straddling each end
        const double dx = g.dx();
        DensityField u(g);
        for (int i = 0; i < g.n_cells(); ++i) {
            const double x = g.center(i);
            const double up = std::clamp((x - (a[0] - dx)) / (2.0 * dx), 0.0, 1.0);
            const double down = std::clamp(((a[1] + dx) - x) / (2.0 * dx), 0.0, 1.0);
            u[i] = std::min(up, down);
        }
        return u;
    }
    case InitialSpec::Kind::Gaussian: {
        DensityField u(g);
        for (int i = 0; i < g.n_cells(); ++i) {
            const double z = (g.center(i) - a[0]) / a[1];
            u[i] = std::exp(-0.5 * z * z);
        }
        const double m = mass(u);
        if (!(m > 0.0))
            throw std::invalid_argument("gaussian initial condition has no mass on the grid");
        for (double& v : u.values)
            v /= m;
        return u;
    }
    case InitialSpec::Kind::Bump: {
        DensityField u(g);
        const auto f = initial_profile(cfg);
        for (int i = 0; i < g.n_cells(); ++i)
            u[i] = f(g.center(i));
        return u;
    }
    }
    throw std::logic_error("unhandled initial condition");
}

std::function<double(double)> initial_profile(const ExperimentConfig& cfg)
{
    const std::vector<double> a = cfg.initial.args;
    switch (cfg.initial.kind) {
    case InitialSpec::Kind::Bump:
        return [a](double x) {
            const double z = (x - a[2]) / a[3];
            return a[0] + a[1] * std::exp(-z * z);
        };
    case InitialSpec::Kind::Gaussian:
        return [a](double x) {
            const double z = (x - a[0]) / a[1];
            return std::exp(-0.5 * z * z);
        };
    case InitialSpec::Kind::Gibbs: {
        const Potential v = cfg.run.ctx.potential;
        return [v](double x) { return std::exp(-v.value(x)); };
    }
    default:
        throw std::invalid_argument("initial condition `" + cfg.initial.text + "` has no smooth pointwise form");
    }
}

} // namespace fluxlim
