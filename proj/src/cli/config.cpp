#include "cmjx/cli.hpp"

#define TOML_ENABLE_FORMATTERS 0
#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace cmjx::cli {

using nlohmann::json;

namespace {

const json& block_defaults(const std::string& name)
{
    static const std::map<std::string, json> defaults = [] {
        std::map<std::string, json> d;
        const json model = {
            {"family", "linear"}, {"c", 1.0},     {"beta", 1.0},           {"delta", 1.0},
            {"eps", 0.0},         {"scale", 1.0}, {"atom", 1.0},           {"table", json::array()},
        };
        d["model"] = model;
        d["model_prime"] = model;
        const json offspring = {
            {"kind", "poisson"}, {"lambda", 1.0}, {"p", 0.5}, {"k", 1u}, {"alpha", 0.5}, {"x_min", 1.0},
        };
        d["law"] = {
            {"kind", "poisson"},
            {"offspring", offspring},
            {"displacement", {{"kind", "uniform"}, {"b", 1.0}, {"rate", 1.0}, {"w", 1.0}}},
        };
        d["genealogy"] = {{"horizon", 1.0}, {"max_gen", 1000u}, {"pop_cap", 100000u}, {"replicas", 10000u}};
        d["grid"] = {{"kind", "geometric"}, {"lo", 1e-4}, {"hi", 2.0}, {"points", 512u}, {"h", 0.01}};
        d["iterate"] = {
            {"max_iter", 10000u}, {"tol", 1e-6},        {"triv_tol", 1e-3},
            {"scheme", "reduced"}, {"start_shift", 0.0}, {"mc_samples", 0u},
        };
        d["criteria"] = {
            {"tests", json::array({"integral"})},
            {"eps", 0.5},
            {"quad_tol", 1e-10},
            {"diverge_ratio", 0.99},
            {"diverge_run", 6u},
            {"max_doublings", 400u},
            {"sandwich", false},
            {"delta_probe", 0.5},
            {"liminf_floor", 1e-3},
            {"second_moment", true},
            {"sequence", "log_power"},
            {"r", 0.5},
            {"level_c", 2.0},
            {"variant", "exact"},
            {"delta_var", 0.5},
            {"n_terms", 1000000u},
            {"psi_delta", 0.5},
            {"psi_n", 64u},
            {"delta_tail", 0.25},
            {"quantile_delta", 1.0},
            {"quantile_t0", 1.0},
            {"quantile_c", 0.0},
        };
        d["gwve"] = {
            {"env", "constant"},  {"offspring", offspring}, {"poisson_means", json::array()},
            {"extend", "constant"}, {"power", 2.0},          {"max_gen", 1000u},
            {"pop_cap", 1e12},    {"runs", 10000u},        {"kersting_terms", 1000u},
        };
        d["dwass"] = {{"offspring", offspring}, {"n_max", 10u}, {"samples", 1000000u}, {"cap", 1000000u}};
        d["output"] = {{"dir", "."}};
        return d;
    }();
    return defaults.at(name);
}

const std::map<std::string, std::vector<std::string>>& blocks_by_kind()
{
    static const std::map<std::string, std::vector<std::string>> m = {
        {"simulate", {"model", "law", "genealogy"}},
        {"iterate", {"model", "law", "grid", "iterate"}},
        {"criteria", {"model", "law", "criteria", "gwve"}},
        {"compare", {"model", "model_prime", "genealogy"}},
        {"gwve", {"gwve"}},
        {"dwass", {"dwass"}},
    };
    return m;
}

json toml_to_json(const toml::node& n)
{
    if (const auto* t = n.as_table())
    {
        json out = json::object();
        for (const auto& [k, v] : *t)
            out[std::string(k.str())] = toml_to_json(v);
        return out;
    }
    if (const auto* a = n.as_array())
    {
        json out = json::array();
        for (const auto& v : *a)
            out.push_back(toml_to_json(v));
        return out;
    }
    if (const auto* v = n.as_integer())
        return v->get();
    if (const auto* v = n.as_floating_point())
        return v->get();
    if (const auto* v = n.as_boolean())
        return v->get();
    if (const auto* v = n.as_string())
        return v->get();
    throw ValidationError("unsupported value type (dates and times are not accepted)");
}

json coerce(const json& def, const json& v, const std::string& key)
{
    if (def.is_number_float())
    {
        if (!v.is_number())
            throw ValidationError(key + ": expected a number");
        return v.get<double>();
    }
    if (def.is_number_unsigned())
    {
        if (v.is_number_unsigned())
            return v;
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        if (v.is_number_float())
        {
            const double x = v.get<double>();
            if (x >= 0.0 && x == std::floor(x) && x < 1.8e19)
                return static_cast<std::uint64_t>(x);
        }
        throw ValidationError(key + ": expected a non-negative integer");
    }
    if (def.is_boolean())
    {
        if (!v.is_boolean())
            throw ValidationError(key + ": expected true or false");
        return v;
    }
    if (def.is_string())
    {
        if (!v.is_string())
            throw ValidationError(key + ": expected a string");
        return v;
    }
    if (def.is_array())
    {
        if (!v.is_array())
            throw ValidationError(key + ": expected an array");
        return v;
    }
    return v;
}

json merge(const json& def, const json& user, const std::string& path)
{
    if (!user.is_object())
        throw ValidationError(path + ": expected a table");
    json out = def;
    for (const auto& [k, v] : user.items())
    {
        const std::string key = path + "." + k;
        if (!def.contains(k))
            throw ValidationError("unknown key '" + key + "'");
        const json& d = def.at(k);
        out[k] = d.is_object() ? merge(d, v, key) : coerce(d, v, key);
    }
    return out;
}

template <class F>
auto guarded(const std::string& where, F&& f)
{
    try
    {
        return f();
    }
    catch (const DomainError& e)
    {
        throw ValidationError(where + ": " + e.what());
    }
}

std::string one_of(const json& j, const char* key, const std::string& path, std::initializer_list<const char*> options)
{
    const std::string v = j.at(key).get<std::string>();
    for (const char* o : options)
        if (v == o)
            return v;
    std::string msg = path + "." + key + ": unknown value '" + v + "' (expected one of";
    for (const char* o : options)
        msg += std::string(" ") + o;
    throw ValidationError(msg + ")");
}

IntensityModel build_model(const json& j, const std::string& path)
{
    const std::string fam = one_of(j, "family", path,
                                   {"linear", "power", "log_linear", "delayed", "double_exp", "table"});
    return guarded(path, [&] {
        const double atom = j.at("atom").get<double>();
        IntensityModel m;
        if (fam == "linear")
            m = IntensityModel::linear(j.at("c").get<double>(), atom);
        else if (fam == "power")
            m = IntensityModel::power(j.at("c").get<double>(), j.at("beta").get<double>(), atom);
        else if (fam == "log_linear")
            m = IntensityModel::log_linear(j.at("c").get<double>(), j.at("delta").get<double>(), atom);
        else if (fam == "delayed")
            m = IntensityModel::delayed(j.at("eps").get<double>(), atom);
        else if (fam == "double_exp")
            m = IntensityModel::double_exp(atom);
        else
        {
            std::vector<std::pair<double, double>> pts;
            for (const auto& p : j.at("table"))
            {
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                    throw ValidationError(path + ".table: entries must be [t, mu] pairs");
                pts.emplace_back(p[0].get<double>(), p[1].get<double>());
            }
            m = IntensityModel::tabulated(std::move(pts), atom);
        }
        const double scale = j.at("scale").get<double>();
        if (scale != 1.0)
            m = m.scaled(scale);
        m.validate();
        return m;
    });
}

OffspringLaw build_offspring(const json& j, const std::string& path)
{
    const std::string kind = one_of(j, "kind", path, {"poisson", "geometric", "deterministic", "pareto"});
    return guarded(path, [&] {
        if (kind == "poisson")
            return OffspringLaw::poisson(j.at("lambda").get<double>());
        if (kind == "geometric")
            return OffspringLaw::geometric(j.at("p").get<double>());
        if (kind == "deterministic")
            return OffspringLaw::deterministic(j.at("k").get<std::uint64_t>());
        return OffspringLaw::pareto(j.at("alpha").get<double>(), j.at("x_min").get<double>());
    });
}

DisplacementLaw build_displacement(const json& j, const std::string& path)
{
    const std::string kind = one_of(j, "kind", path, {"uniform", "exponential", "deterministic"});
    return guarded(path, [&] {
        if (kind == "uniform")
            return DisplacementLaw::uniform(j.at("b").get<double>());
        if (kind == "exponential")
            return DisplacementLaw::exponential(j.at("rate").get<double>());
        return DisplacementLaw::deterministic(j.at("w").get<double>());
    });
}

ReproductionLaw build_law(const json& j, const IntensityModel& m)
{
    const std::string kind = one_of(j, "kind", "law", {"poisson", "bellman_harris", "instant_plus_delay", "iid"});
    if (kind == "poisson")
        return guarded("law", [&] { return ReproductionLaw::poisson(m); });
    const OffspringLaw z = build_offspring(j.at("offspring"), "law.offspring");
    const DisplacementLaw w = build_displacement(j.at("displacement"), "law.displacement");
    return guarded("law", [&] {
        if (kind == "bellman_harris")
            return ReproductionLaw::bellman_harris(z, w);
        if (kind == "instant_plus_delay")
            return ReproductionLaw::instant_plus_delay(z, w);
        return ReproductionLaw::iid(z, w);
    });
}

Profile build_grid(const json& j)
{
    const std::string kind = one_of(j, "kind", "grid", {"geometric", "uniform"});
    const auto points = j.at("points").get<std::uint64_t>();
    if (kind == "geometric")
    {
        const double lo = j.at("lo").get<double>();
        const double hi = j.at("hi").get<double>();
        if (!(lo > 0.0 && hi > lo) || points < 2)
            throw ValidationError("grid: geometric grid needs 0 < lo < hi and points >= 2");
        return guarded("grid", [&] { return Profile::geometric(lo, hi, points, 1.0); });
    }
    const double h = j.at("h").get<double>();
    if (!(h > 0.0) || points < 1)
        throw ValidationError("grid: uniform grid needs h > 0 and points >= 1");
    return guarded("grid", [&] { return Profile::uniform(h, points, 1.0); });
}

void require_range(bool ok, const std::string& msg)
{
    if (!ok)
        throw ValidationError(msg);
}

CriteriaConfig build_criteria(const json& j, const IntensityModel& m)
{
    CriteriaConfig c;
    static const std::vector<std::string> known = {"integral", "liminf", "gwve_sum", "kersting",
                                                   "amini", "quantile_bound", "psi_bound"};
    for (const auto& t : j.at("tests"))
    {
        if (!t.is_string() || std::find(known.begin(), known.end(), t.get<std::string>()) == known.end())
            throw ValidationError("criteria.tests: unknown test " + t.dump());
        c.tests.push_back(t.get<std::string>());
    }
    c.eps = j.at("eps").get<double>();
    require_range(c.eps > 0.0 && c.eps < 1.0, "criteria.eps must lie in (0, 1)");
    c.integral.tail.quad_tol = j.at("quad_tol").get<double>();
    c.integral.tail.diverge_ratio = j.at("diverge_ratio").get<double>();
    c.integral.tail.diverge_run = static_cast<int>(j.at("diverge_run").get<std::uint64_t>());
    c.integral.tail.max_doublings = static_cast<int>(j.at("max_doublings").get<std::uint64_t>());
    require_range(c.integral.tail.quad_tol > 0.0, "criteria.quad_tol must be > 0");
    require_range(c.integral.tail.diverge_run >= 1, "criteria.diverge_run must be >= 1");
    c.integral.sandwich = j.at("sandwich").get<bool>();
    c.delta_probe = j.at("delta_probe").get<double>();
    c.liminf.floor = j.at("liminf_floor").get<double>();
    c.liminf.second_moment = j.at("second_moment").get<bool>();

    const std::string seq = one_of(j, "sequence", "criteria", {"log_power", "level"});
    c.sequence = seq == "level" ? ASequence::level(j.at("level_c").get<double>())
                                : ASequence::log_power(j.at("r").get<double>());
    const std::string var = one_of(j, "variant", "criteria", {"exact", "i", "ii", "iii"});
    c.variant = var == "exact" ? GwveVariant::Exact
              : var == "i"     ? GwveVariant::I
              : var == "ii"    ? GwveVariant::II
                               : GwveVariant::III;
    c.delta_var = j.at("delta_var").get<double>();
    if (c.variant == GwveVariant::III)
        require_range(c.delta_var > 0.0 && c.delta_var < 1.0, "criteria.delta_var must lie in (0, 1)");
    c.n_terms = j.at("n_terms").get<std::uint64_t>();
    require_range(c.n_terms >= 64, "criteria.n_terms must be >= 64");
    c.psi_delta = j.at("psi_delta").get<double>();
    require_range(c.psi_delta > 0.0 && c.psi_delta < 1.0, "criteria.psi_delta must lie in (0, 1)");
    c.psi_n = j.at("psi_n").get<std::uint64_t>();
    require_range(c.psi_n >= 1, "criteria.psi_n must be >= 1");
    c.delta_tail = j.at("delta_tail").get<double>();
    c.quantile_delta = j.at("quantile_delta").get<double>();
    require_range(c.quantile_delta > 0.0, "criteria.quantile_delta must be > 0");
    c.quantile_t0 = j.at("quantile_t0").get<double>();
    require_range(c.quantile_t0 > 0.0, "criteria.quantile_t0 must be > 0");
    const double qc = j.at("quantile_c").get<double>();
    require_range(qc >= 0.0, "criteria.quantile_c must be >= 0 (0 means derive from the moment)");
    if (qc > 0.0)
        c.quantile_c = qc;

    const bool needs_a2 = std::any_of(c.tests.begin(), c.tests.end(),
                                      [](const std::string& t) { return t == "liminf" || t == "gwve_sum"; });
    if (needs_a2 && !check_assumptions(m).a2)
        throw ValidationError("criteria: A2 (mu_plus > 0 near 0) fails for the model, required by liminf/gwve_sum");
    return c;
}

GwveConfig build_gwve(const json& j)
{
    GwveConfig g;
    g.max_gen = j.at("max_gen").get<std::uint64_t>();
    g.runs = j.at("runs").get<std::uint64_t>();
    g.kersting_terms = j.at("kersting_terms").get<std::uint64_t>();
    require_range(g.kersting_terms >= 2, "gwve.kersting_terms must be >= 2");
    const double cap = j.at("pop_cap").get<double>();
    require_range(cap >= 1.0 && std::isfinite(cap), "gwve.pop_cap must be a finite number >= 1");
    g.pop_cap = BigCount(cap);

    const std::string env = one_of(j, "env", "gwve", {"constant", "poisson_list", "poisson_ratio_power"});
    if (env == "constant")
        g.env = EnvSpec::constant(build_offspring(j.at("offspring"), "gwve.offspring"));
    else if (env == "poisson_list")
    {
        for (const auto& v : j.at("poisson_means"))
        {
            if (!v.is_number())
                throw ValidationError("gwve.poisson_means: entries must be numbers");
            g.env.laws.push_back(guarded("gwve.poisson_means", [&] { return OffspringLaw::poisson(v.get<double>()); }));
        }
        if (g.env.laws.empty())
            throw ValidationError("gwve.poisson_means must not be empty");
        const std::string ext = one_of(j, "extend", "gwve", {"none", "constant", "cyclic"});
        g.env.extend = ext == "none" ? EnvSpec::Extend::None
                     : ext == "cyclic" ? EnvSpec::Extend::Cyclic
                                       : EnvSpec::Extend::Constant;
    }
    else
    {
        // Y_n ~ Poisson(((n+1)/n)^power), n = 1, 2, ...
        const double p = j.at("power").get<double>();
        const std::uint64_t len = std::max(g.max_gen, g.kersting_terms);
        for (std::uint64_t n = 1; n <= len; ++n)
        {
            const double x = static_cast<double>(n);
            g.env.laws.push_back(guarded("gwve", [&] { return OffspringLaw::poisson(std::pow((x + 1.0) / x, p)); }));
        }
        g.env.extend = EnvSpec::Extend::Constant;
    }
    for (const auto& law : g.env.laws)
        if (law.mean() == 0.0)
            throw ValidationError("gwve: degenerate environment (E[Y_n] = 0)");
    guarded("gwve", [&] {
        g.env.validate();
        return 0;
    });
    return g;
}

DwassConfig build_dwass(const json& j)
{
    DwassConfig d;
    d.offspring = build_offspring(j.at("offspring"), "dwass.offspring");
    d.n_max = j.at("n_max").get<std::uint64_t>();
    d.samples = j.at("samples").get<std::uint64_t>();
    d.cap = j.at("cap").get<std::uint64_t>();
    require_range(d.n_max >= 1, "dwass.n_max must be >= 1");
    require_range(d.cap > d.n_max, "dwass.cap must exceed n_max");
    return d;
}

std::uint64_t parse_seed(const json& v)
{
    if (v.is_number_unsigned())
        return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_string())
    {
        const std::string s = v.get<std::string>();
        std::size_t pos = 0;
        try
        {
            const unsigned long long x = std::stoull(s, &pos, 10);
            if (pos == s.size() && s.find('-') == std::string::npos)
                return x;
        }
        catch (const std::exception&)
        {
        }
    }
    throw ValidationError("seed: expected an unsigned 64-bit integer");
}

}  // namespace

const std::vector<std::string>& experiment_kinds()
{
    static const std::vector<std::string> kinds = {"simulate", "iterate", "criteria", "compare", "gwve", "dwass"};
    return kinds;
}

ExperimentConfig parse_config(const std::string& text, const std::string& kind_arg,
                              std::optional<std::uint64_t> seed_override)
{
    json user;
    try
    {
        user = toml_to_json(toml::parse(text));
    }
    catch (const toml::parse_error& e)
    {
        std::ostringstream os;
        os << "config parse error at line " << e.source().begin.line << ": " << e.description();
        throw ValidationError(os.str());
    }

    static const std::vector<std::string> top = {"kind",    "seed", "model", "model_prime", "law",  "genealogy",
                                                 "grid",    "iterate", "criteria", "gwve",   "dwass", "output"};
    for (const auto& [k, v] : user.items())
        if (std::find(top.begin(), top.end(), k) == top.end())
            throw ValidationError("unknown key '" + k + "'");

    ExperimentConfig cfg;
    std::string file_kind;
    if (user.contains("kind"))
    {
        if (!user["kind"].is_string())
            throw ValidationError("kind: expected a string");
        file_kind = user["kind"].get<std::string>();
    }
    if (!file_kind.empty() && !kind_arg.empty() && file_kind != kind_arg)
        throw ValidationError("kind: config declares '" + file_kind + "' but '" + kind_arg + "' was requested");
    cfg.kind = kind_arg.empty() ? file_kind : kind_arg;
    const auto& kinds = experiment_kinds();
    if (!cfg.kind.empty() && std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
        throw ValidationError("kind: unknown experiment '" + cfg.kind + "'");

    if (seed_override)
        cfg.seed = *seed_override;
    else if (user.contains("seed"))
        cfg.seed = parse_seed(user["seed"]);
    else
        throw ValidationError("missing seed");

    // Blocks read by the experiment, plus any the file supplies.
    std::vector<std::string> blocks;
    if (!cfg.kind.empty())
        blocks = blocks_by_kind().at(cfg.kind);
    for (const auto& [k, v] : user.items())
        if (k != "kind" && k != "seed" && k != "output" && std::find(blocks.begin(), blocks.end(), k) == blocks.end())
            blocks.push_back(k);
    if (cfg.kind == "compare" && !user.contains("model_prime"))
        throw ValidationError("compare requires a [model_prime] block");

    json eff = json::object();
    if (!cfg.kind.empty())
        eff["kind"] = cfg.kind;
    eff["seed"] = cfg.seed;
    auto block = [&](const std::string& name) {
        return merge(block_defaults(name), user.contains(name) ? user[name] : json::object(), name);
    };
    for (const auto& b : blocks)
        eff[b] = block(b);
    const json out = block("output");
    cfg.out_dir = out.at("dir").get<std::string>();

    auto has = [&](const char* b) { return eff.contains(b); };
    if (has("model"))
        cfg.model = build_model(eff["model"], "model");
    if (has("model_prime"))
        cfg.model_prime = build_model(eff["model_prime"], "model_prime");
    if (has("law"))
    {
        cfg.law = build_law(eff["law"], cfg.model);
        cfg.law_offspring = build_offspring(eff["law"]["offspring"], "law.offspring");
        cfg.law_displacement = build_displacement(eff["law"]["displacement"], "law.displacement");
    }
    if (has("genealogy"))
    {
        const json& g = eff["genealogy"];
        cfg.genealogy.horizon = g.at("horizon").get<double>();
        cfg.genealogy.max_gen = g.at("max_gen").get<std::uint64_t>();
        cfg.genealogy.pop_cap = g.at("pop_cap").get<std::uint64_t>();
        cfg.replicas = g.at("replicas").get<std::uint64_t>();
        guarded("genealogy", [&] {
            cfg.genealogy.validate();
            return 0;
        });
        require_range(cfg.replicas >= 1, "genealogy.replicas must be >= 1");
    }
    if (has("grid"))
        cfg.grid = build_grid(eff["grid"]);
    if (has("iterate"))
    {
        const json& it = eff["iterate"];
        cfg.iterate.max_iter = it.at("max_iter").get<std::uint64_t>();
        cfg.iterate.tol = it.at("tol").get<double>();
        cfg.iterate.triv_tol = it.at("triv_tol").get<double>();
        cfg.iterate.scheme = one_of(it, "scheme", "iterate", {"reduced", "direct"}) == "direct" ? Scheme::Direct
                                                                                              : Scheme::Reduced;
        cfg.start_shift = it.at("start_shift").get<double>();
        cfg.mc_samples = it.at("mc_samples").get<std::uint64_t>();
        require_range(cfg.iterate.max_iter >= 1, "iterate.max_iter must be >= 1");
        require_range(cfg.iterate.tol > 0.0, "iterate.tol must be > 0");
        require_range(cfg.start_shift >= 0.0, "iterate.start_shift must be >= 0");
        if (cfg.start_shift > 0.0)
        {
            if (!has("grid") || cfg.grid.kind != GridKind::Uniform)
                throw ValidationError("iterate.start_shift needs a uniform grid");
            const double q = cfg.start_shift / cfg.grid.step;
            if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, q))
                throw ValidationError("iterate.start_shift not grid-aligned");
        }
        if (has("law") && cfg.law.kind != LawKind::PoissonPP && cfg.mc_samples == 0)
            throw ValidationError("iterate.mc_samples must be > 0 for non-Poisson laws");
    }
    if (has("criteria"))
        cfg.criteria = build_criteria(eff["criteria"], cfg.model);
    if (has("gwve"))
        cfg.gwve = build_gwve(eff["gwve"]);
    if (has("dwass"))
        cfg.dwass = build_dwass(eff["dwass"]);
    if (cfg.kind == "compare")
        guarded("compare", [&] {
            check_dominance(cfg.model, *cfg.model_prime, cfg.genealogy.horizon);
            return 0;
        });
    cfg.effective = std::move(eff);
    return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::string& kind,
                             std::optional<std::uint64_t> seed_override)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot read config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), kind, seed_override);
}

}  // namespace cmjx::cli
