#include "cmjx/cli.hpp"
#include "cmjx/stats.hpp"

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace cmjx::cli {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

std::string fmt_double(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Writes `content` to dir/name through a temporary file and a rename.
std::string write_atomic(const std::string& dir, const std::string& name, const std::string& content)
{
    fs::create_directories(dir);
    const fs::path final_path = fs::path(dir) / name;
    const fs::path tmp = fs::path(dir) / ("." + name + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out)
            throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, final_path);
    return final_path.string();
}

std::string csv_header(const ExperimentConfig& cfg)
{
    std::ostringstream os;
    os << "# cmjx " << kVersion << "\n";
    os << "# seed " << cfg.seed << "\n";
    os << "# config " << cfg.effective.dump() << "\n";
    return os.str();
}

std::string json_doc(const ExperimentConfig& cfg, json result)
{
    json doc = {
        {"tool", "cmjx"},
        {"version", kVersion},
        {"seed", cfg.seed},
        {"config", cfg.effective},
        {"result", std::move(result)},
    };
    return doc.dump(2) + "\n";
}

json finite_or_string(double x)
{
    if (std::isfinite(x))
        return x;
    return fmt_double(x);
}

json estimate_json(const BinomialEstimate& b)
{
    return {{"successes", b.successes}, {"trials", b.trials}, {"p_hat", b.p_hat},
            {"se", b.se},               {"ci_lo", b.ci_lo},   {"ci_hi", b.ci_hi}};
}

json proxy_json(const ProxyEstimate& p)
{
    return {{"estimate", estimate_json(p.p)}, {"cap_hits", p.cap_hits}, {"reached_max_gen", p.reached_max_gen}};
}

std::vector<std::string> run_simulate(const ExperimentConfig& cfg, unsigned threads)
{
    const ProxyEstimate est =
        estimate_explosion_proxy(cfg.law, cfg.genealogy, cfg.replicas, cfg.seed, threads, true);
    std::size_t n = 0;
    for (const auto& r : est.runs)
        n = std::max(n, r.minima.size() > 0 ? r.minima.size() - 1 : 0);

    std::ostringstream os;
    os << csv_header(cfg);
    os << "replica,generations_run,cap_hit";
    for (std::size_t g = 1; g <= n; ++g)
        os << ",M_" << g;
    os << ",total_born\n";
    for (std::size_t i = 0; i < est.runs.size(); ++i)
    {
        const auto& r = est.runs[i];
        os << i << "," << r.generations_run << "," << (r.cap_hit ? 1 : 0);
        for (std::size_t g = 1; g <= n; ++g)
        {
            os << ",";
            if (g < r.minima.size())
                os << fmt_double(r.minima[g]);
        }
        os << "," << r.total_born << "\n";
    }
    std::vector<std::string> out;
    out.push_back(write_atomic(cfg.out_dir, "simulate.csv", os.str()));
    out.push_back(write_atomic(cfg.out_dir, "simulate.json", json_doc(cfg, proxy_json(est))));
    return out;
}

std::vector<std::string> run_iterate(const ExperimentConfig& cfg, unsigned threads)
{
    const Profile phi0 = cfg.grid.indicator(cfg.start_shift);
    IterationResult res;
    if (cfg.law.kind == LawKind::PoissonPP && cfg.mc_samples == 0)
        res = iterate(cfg.model, phi0, cfg.iterate);
    else
        res = iterate_mc(cfg.law, phi0, cfg.mc_samples, cfg.seed, cfg.iterate, threads);

    std::ostringstream os;
    os << csv_header(cfg);
    os << "k,t,phi\n";
    for (std::size_t k = 0; k < res.final.size(); ++k)
        os << k << "," << fmt_double(res.final.grid[k]) << "," << fmt_double(res.final.values[k]) << "\n";

    json r = {
        {"verdict", verdict_name(res.verdict)},
        {"converged", res.converged},
        {"iterations", res.iterations},
        {"scheme", scheme_name(res.scheme)},
        {"final_residual", res.residuals.empty() ? 0.0 : res.residuals.back()},
        {"transform_residual", finite_or_string(res.transform_residual)},
        {"min_value", res.final.min_value()},
        {"residuals", res.residuals},
    };
    std::vector<std::string> out;
    out.push_back(write_atomic(cfg.out_dir, "profile.csv", os.str()));
    out.push_back(write_atomic(cfg.out_dir, "iterate.json", json_doc(cfg, r)));
    return out;
}

json psi_to_json(const PsiBound& pb)
{
    return {{"id", "psi_bound"}, {"delta", pb.delta}, {"t0", pb.t0}, {"convex", pb.convex},
            {"a", pb.a},         {"terms_used", pb.terms.size()}};
}

std::vector<std::string> run_criteria(const ExperimentConfig& cfg, bool& failed)
{
    const CriteriaConfig& c = cfg.criteria;
    json reports = json::array();
    for (const auto& t : c.tests)
    {
        try
        {
            if (t == "integral")
                reports.push_back(to_json(integral_test(cfg.model, c.eps, c.integral)));
            else if (t == "liminf")
                reports.push_back(to_json(liminf_test(cfg.model, c.delta_probe, c.liminf)));
            else if (t == "gwve_sum")
                reports.push_back(to_json(gwve_sum_test(cfg.model, c.sequence, c.variant, c.delta_var, c.n_terms)));
            else if (t == "kersting")
                reports.push_back(to_json(kersting_test(cfg.gwve.env, cfg.gwve.kersting_terms)));
            else if (t == "amini")
                reports.push_back(to_json(amini_test(cfg.law_offspring, cfg.law_displacement, c.delta_tail, c.eps,
                                                     AminiOptions{c.integral.tail})));
            else if (t == "quantile_bound")
            {
                QuantileBoundOptions q;
                q.c = c.quantile_c;
                reports.push_back(to_json(quantile_bound_test(cfg.model, c.quantile_delta, c.quantile_t0, c.eps, q,
                                                              c.integral.tail)));
            }
            else if (t == "psi_bound")
                reports.push_back(psi_to_json(psi_bound(cfg.model, c.psi_delta, c.psi_n)));
        }
        catch (const DomainError& e)
        {
            failed = true;
            reports.push_back({{"id", t}, {"error", e.what()}});
        }
    }
    return {write_atomic(cfg.out_dir, "criteria.json", json_doc(cfg, {{"reports", reports}}))};
}

std::vector<std::string> run_compare(const ExperimentConfig& cfg, unsigned threads)
{
    const CoupledEstimate ce =
        coupled_explosion_order(cfg.model, *cfg.model_prime, cfg.genealogy, cfg.replicas, cfg.seed, threads);
    std::ostringstream os;
    os << csv_header(cfg);
    os << "replica,total_born,total_born_prime\n";
    for (std::size_t i = 0; i < ce.total_born.size(); ++i)
        os << i << "," << ce.total_born[i] << "," << ce.total_born_prime[i] << "\n";
    json r = {
        {"first", proxy_json(ce.first)},
        {"second", proxy_json(ce.second)},
        {"dominance_violations", ce.dominance_violations},
        {"ordered", ce.first.p.p_hat <= ce.second.p.p_hat},
    };
    return {write_atomic(cfg.out_dir, "compare.csv", os.str()), write_atomic(cfg.out_dir, "compare.json", json_doc(cfg, r))};
}

std::vector<std::string> run_gwve(const ExperimentConfig& cfg, unsigned threads)
{
    const GwveConfig& g = cfg.gwve;
    std::vector<GwveTrajectory> runs(g.runs);
    parallel_for(g.runs, threads, [&](std::size_t i) {
        Stream rng(derive_key(cfg.seed, i));
        GwveTrajectory t = simulate_gwve(g.env, g.max_gen, g.pop_cap, rng);
        // Keep the final size only; full trajectories are not written.
        if (t.z.size() > 1)
            t.z.erase(t.z.begin() + 1, t.z.end() - 1);
        runs[i] = std::move(t);
    });
    std::ostringstream os;
    os << csv_header(cfg);
    os << "run,survived,cap_hit,final_size\n";
    std::uint64_t survived = 0;
    for (std::size_t i = 0; i < runs.size(); ++i)
    {
        const auto& t = runs[i];
        survived += t.survived() ? 1 : 0;
        os << i << "," << (t.survived() ? 1 : 0) << "," << (t.cap_hit ? 1 : 0) << ","
           << (t.z.empty() ? BigCount(0) : t.z.back()).str() << "\n";
    }
    json r = {
        {"survival", estimate_json(binomial_estimate(survived, g.runs))},
        {"kersting", to_json(kersting_test(g.env, g.kersting_terms))},
    };
    return {write_atomic(cfg.out_dir, "gwve.csv", os.str()), write_atomic(cfg.out_dir, "gwve.json", json_doc(cfg, r))};
}

std::vector<std::string> run_dwass(const ExperimentConfig& cfg, unsigned threads)
{
    const DwassConfig& d = cfg.dwass;
    std::vector<std::uint64_t> sizes(d.samples);
    parallel_for(d.samples, threads, [&](std::size_t i) {
        Stream rng(derive_key(cfg.seed, i));
        sizes[i] = total_progeny(d.offspring, d.cap, rng);
    });
    std::vector<std::uint64_t> counts(d.n_max + 1, 0);
    for (auto s : sizes)
        if (s <= d.n_max)
            ++counts[s];

    std::ostringstream os;
    os << csv_header(cfg);
    os << "n,pmf,mc_freq,mc_se\n";
    json rows = json::array();
    for (std::uint64_t n = 1; n <= d.n_max; ++n)
    {
        const double pmf = dwass_pmf(d.offspring, n);
        const BinomialEstimate b = binomial_estimate(counts[n], d.samples);
        os << n << "," << fmt_double(pmf) << "," << fmt_double(b.p_hat) << "," << fmt_double(b.se) << "\n";
        rows.push_back({{"n", n}, {"pmf", pmf}, {"mc_freq", b.p_hat}, {"mc_se", b.se}});
    }
    return {write_atomic(cfg.out_dir, "dwass.csv", os.str()),
            write_atomic(cfg.out_dir, "dwass.json", json_doc(cfg, {{"rows", rows}}))};
}

}  // namespace

json to_json(const CriterionReport& r)
{
    json ev = json::object();
    for (const auto& [k, v] : r.evidence)
        ev[k] = finite_or_string(v);
    json par = json::object();
    for (const auto& [k, v] : r.parameters)
        par[k] = finite_or_string(v);
    json trace = json::array();
    for (double v : r.trace)
        trace.push_back(finite_or_string(v));
    return {
        {"id", r.id},
        {"verdict", criterion_verdict_name(r.verdict)},
        {"summary", r.summary},
        {"evidence", ev},
        {"parameters", par},
        {"hypotheses", r.hypotheses},
        {"failed_hypothesis", r.failed_hypothesis},
        {"trace", trace},
    };
}

std::vector<std::string> run_experiment(const ExperimentConfig& cfg, unsigned threads)
{
    threads = resolve_threads(threads);
    if (cfg.kind == "simulate")
        return run_simulate(cfg, threads);
    if (cfg.kind == "iterate")
        return run_iterate(cfg, threads);
    if (cfg.kind == "criteria")
    {
        bool failed = false;
        auto files = run_criteria(cfg, failed);
        if (failed)
            throw DomainError("one or more criteria failed; see criteria.json");
        return files;
    }
    if (cfg.kind == "compare")
        return run_compare(cfg, threads);
    if (cfg.kind == "gwve")
        return run_gwve(cfg, threads);
    if (cfg.kind == "dwass")
        return run_dwass(cfg, threads);
    throw ValidationError("no experiment kind given");
}

int main(int argc, char** argv)
{
    CLI::App app{"Crump-Mode-Jagers explosion experiments"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    unsigned threads = 0;

    std::vector<std::string> subs = experiment_kinds();
    subs.push_back("validate");
    for (const auto& name : subs)
    {
        auto* sc = app.add_subcommand(name, name == "validate" ? "check a config without running it"
                                                               : "run the " + name + " experiment");
        sc->add_option("--config", config_path, "experiment config (TOML)")->required();
        sc->add_option("--out", out_dir, "output directory (overrides [output].dir)");
        sc->add_option("--seed", seed, "seed (overrides the config)");
        sc->add_option("--threads", threads, "worker threads (fallback: CMJX_THREADS, then 1)");
    }
    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }

    const CLI::App* sc = app.get_subcommands().front();
    const std::string name = sc->get_name();
    std::optional<std::uint64_t> seed_override;
    if (sc->count("--seed") > 0)
        seed_override = seed;

    ExperimentConfig cfg;
    try
    {
        cfg = load_config(config_path, name == "validate" ? "" : name, seed_override);
        if (sc->count("--out") > 0)
            cfg.out_dir = out_dir;
    }
    catch (const ValidationError& e)
    {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    }
    catch (const std::exception& e)
    {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    }

    if (name == "validate")
    {
        std::cout << cfg.effective.dump(2) << "\n";
        return kOk;
    }
    try
    {
        for (const auto& f : run_experiment(cfg, threads))
            std::cout << f << "\n";
    }
    catch (const ValidationError& e)
    {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    }
    catch (const std::exception& e)
    {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}

}  // namespace cmjx::cli
