#include "sfclab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sfclab/binomial_engine.hpp"
#include "sfclab/bs_analytics.hpp"
#include "sfclab/decomposition_lab.hpp"
#include "sfclab/hedge_lab.hpp"
#include "sfclab/market_model.hpp"
#include "sfclab/parallel.hpp"
#include "sfclab/rng.hpp"
#include "sfclab/stats.hpp"

namespace sfclab {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// ---------------------------------------------------------------- config

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> defaults = {
        {"x0", "100"},       {"mu", "0.10"},      {"sigma", "0.2"},   {"r", "0.05"},
        {"k", "100"},        {"T", "1"},          {"t0", "0"},        {"x", "100"},
        {"t", "0"},          {"n_steps", "256"},  {"n_paths", "1000"},{"t1", "0.5"},
        {"dt", "1e-4"},      {"n_inner", "100000"},{"rule", "delta"}, {"mode", "formula"},
        {"timing", "current"},{"tau_floor", "1e-8"},{"eps_frac", "0.005"},
        {"dump_ledger", "0"},{"n_list", "16,32,64,128,256,512,1024,2048,4096"},
        {"s", "100"},        {"u", "1.1"},        {"d", "0.9"},       {"rstar", "1.05"},
        {"perturb", "0.01"}, {"seed", "42"},      {"out", "out"},     {"format", "csv"},
        {"threads", "0"},
    };
    return defaults;
}

const std::set<std::string> kGlobalKeys = {"seed", "out", "format", "threads"};

// keys each experiment consumes beyond the global ones
const std::map<std::string, std::set<std::string>>& experiment_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"price", {"x", "t", "k", "T", "r", "sigma"}},
        {"greeks", {"x", "t", "k", "T", "r", "sigma"}},
        {"hedge",
         {"x0", "mu", "sigma", "r", "k", "T", "t0", "n_steps", "n_paths", "mode", "timing",
          "tau_floor", "dump_ledger"}},
        {"sfc-scan",
         {"x0", "mu", "sigma", "r", "k", "T", "t0", "n_list", "n_paths", "timing", "tau_floor"}},
        {"theta-check",
         {"x0", "mu", "sigma", "r", "k", "T", "t0", "n_steps", "n_paths", "eps_frac", "tau_floor"}},
        {"increments", {"x0", "mu", "sigma", "r", "k", "T", "t0", "n_steps", "rule"}},
        {"ex-ante", {"x", "t", "k", "T", "r", "sigma", "mu", "dt", "n_inner", "rule"}},
        {"decompose", {"x0", "mu", "sigma", "r", "k", "T", "t0", "n_steps", "n_paths", "t1"}},
        {"a1-stats", {"x0", "mu", "sigma", "r", "k", "T", "t0", "n_steps", "n_paths", "t1"}},
        {"a1-conditional", {"x", "mu", "sigma", "r", "k", "T", "t1", "n_steps", "n_paths"}},
        {"crr-converge", {"x0", "k", "T", "r", "sigma", "n_list"}},
        {"beta-check", {"s", "k", "u", "d", "rstar", "perturb"}},
        {"physical-price", {"x", "t", "k", "T", "r", "sigma", "mu"}},
    };
    return keys;
}

// typed access to the resolved config
struct Resolved {
    std::map<std::string, std::string> map;

    const std::string& str(const std::string& key) const { return map.at(key); }

    double num(const std::string& key) const {
        const std::string& v = map.at(key);
        try {
            size_t pos = 0;
            const double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing characters");
            return x;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': not a number: '" + v + "'");
        }
    }

    long long integer(const std::string& key) const {
        const std::string& v = map.at(key);
        try {
            size_t pos = 0;
            const long long x = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing characters");
            return x;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
        }
    }

    std::size_t count(const std::string& key) const {
        const long long x = integer(key);
        if (x < 0) throw ConfigError("key '" + key + "': must be non-negative");
        return static_cast<std::size_t>(x);
    }

    std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("seed")); }

    bool flag(const std::string& key) const {
        const std::string& v = map.at(key);
        if (v == "0" || v == "false") return false;
        if (v == "1" || v == "true") return true;
        throw ConfigError("key '" + key + "': expected 0/1, got '" + v + "'");
    }

    std::vector<int> int_list(const std::string& key) const {
        std::vector<int> out;
        std::stringstream ss(map.at(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                size_t pos = 0;
                out.push_back(std::stoi(item, &pos));
                if (pos != item.size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ConfigError("key '" + key + "': bad list entry '" + item + "'");
            }
        }
        if (out.empty()) throw ConfigError("key '" + key + "': empty list");
        return out;
    }

    GbmParams market() const { return {num("x0"), num("mu"), num("sigma"), num("r")}; }
    OptionSpec option() const { return {num("k"), num("T"), num("r"), num("sigma")}; }

    HedgeMode mode() const {
        const std::string& v = map.at("mode");
        if (v == "budget") return HedgeMode::BUDGET_SOLVED;
        if (v == "formula") return HedgeMode::FORMULA_PRESCRIBED;
        throw ConfigError("key 'mode': expected budget|formula, got '" + v + "'");
    }

    HedgeTiming timing() const {
        const std::string& v = map.at("timing");
        if (v == "current") return HedgeTiming::CURRENT;
        if (v == "lagged") return HedgeTiming::LAGGED;
        throw ConfigError("key 'timing': expected current|lagged, got '" + v + "'");
    }

    AlphaRule rule() const {
        const std::string& v = map.at("rule");
        if (v == "delta") return AlphaRule::delta();
        if (v == "linear") return AlphaRule::deterministic([](double t) { return t; });
        if (v == "constant") return AlphaRule::deterministic([](double) { return 1.0; });
        throw ConfigError("key 'rule': expected delta|linear|constant, got '" + v + "'");
    }
};

std::string format_cell(const nlohmann::json& v) {
    char buf[64];
    if (v.is_null()) return {};
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v.get<std::int64_t>()));
        return buf;
    }
    if (v.is_number_unsigned()) {
        std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(v.get<std::uint64_t>()));
        return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string fingerprint_of(const std::string& experiment,
                           const std::map<std::string, std::string>& config) {
    // FNV-1a over experiment plus the result-affecting keys
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0xFF;
        h *= 1099511628211ull;
    };
    mix(experiment);
    for (const auto& [key, value] : config) {
        if (key == "out" || key == "format" || key == "threads") continue;
        mix(key);
        mix(value);
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------- bodies

Report run_price(const Resolved& cfg) {
    Report rep;
    const OptionSpec spec = cfg.option();
    const double x = cfg.num("x"), t = cfg.num("t");
    const double price = bs_price(x, t, spec);
    const double tau = spec.T - t;
    const double bond = std::exp(-spec.r * tau) * spec.k;

    Table tab{"value", {"quantity", "value"}, {}};
    tab.rows.push_back({"price", price});
    tab.rows.push_back({"bond", bond});
    tab.rows.push_back({"intrinsic", call_payoff(x, spec.k)});
    rep.summary["price"] = price;
    rep.summary["bond"] = bond;
    if (tau > 0.0) {
        const auto [d1, d2] = d_values(x, t, spec);
        tab.rows.push_back({"d1", d1});
        tab.rows.push_back({"d2", d2});
        rep.summary["d1"] = d1;
        rep.summary["d2"] = d2;
    }
    rep.tables.push_back(std::move(tab));
    return rep;
}

Report run_greeks(const Resolved& cfg) {
    Report rep;
    const OptionSpec spec = cfg.option();
    const double x = cfg.num("x"), t = cfg.num("t");
    const Greeks g = greeks(x, t, spec);
    const auto [value_gap, drift_gap] = decomposition_identity(x, t, spec);

    Table tab{"greeks", {"quantity", "value"}, {}};
    tab.rows.push_back({"w", g.w});
    tab.rows.push_back({"w1", g.w1});
    tab.rows.push_back({"w11", g.w11});
    tab.rows.push_back({"w111", g.w111});
    tab.rows.push_back({"w2", g.w2});
    tab.rows.push_back({"w12", g.w12});
    tab.rows.push_back({"beta", g.beta});
    tab.rows.push_back({"b", g.b});
    tab.rows.push_back({"d1", g.d1});
    tab.rows.push_back({"d2", g.d2});
    rep.tables.push_back(std::move(tab));

    rep.summary["w"] = g.w;
    rep.summary["w1"] = g.w1;
    rep.summary["w11"] = g.w11;
    rep.summary["value_identity_gap"] = value_gap;
    rep.summary["drift_identity_gap"] = drift_gap;
    rep.summary["pde_residual"] = pde_residual(x, t, spec);
    return rep;
}

Report run_hedge_experiment(const Resolved& cfg) {
    Report rep;
    const GbmParams params = cfg.market();
    const OptionSpec spec = cfg.option();
    const TimeGrid grid = build_time_grid(cfg.num("t0"), spec.T, cfg.count("n_steps"));
    const std::size_t np = cfg.count("n_paths");
    const auto mode = cfg.mode();
    const auto timing = cfg.timing();
    const double tau_floor = cfg.num("tau_floor");

    const auto recs =
        hedge_terminal_stats(params, grid, np, cfg.seed(), spec, mode, timing, tau_floor);

    Table tab{"paths",
              {"path", "x_T", "payoff", "v_T", "wealth_T", "tracking_error", "residual_sum",
               "max_abs_residual"},
              {}};
    std::vector<double> tracking(np);
    double abs_sum = 0.0, max_abs = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
        const auto& rec = recs[p];
        tracking[p] = rec.wealth_T - rec.payoff;
        abs_sum += rec.residual_abs_sum;
        max_abs = std::max(max_abs, rec.max_abs_residual);
        tab.rows.push_back({static_cast<std::uint64_t>(p), rec.x_T, rec.payoff, rec.v_T,
                            rec.wealth_T, tracking[p], rec.residual_sum, rec.max_abs_residual});
    }
    rep.tables.push_back(std::move(tab));

    rep.summary["v0"] = bs_price(params.x0, grid.t0, spec);
    rep.summary["rms_tracking_error"] = root_mean_square(tracking);
    rep.summary["rms_tracking_error_se"] = bootstrap_se_stat(
        tracking, [](std::span<const double> xs) { return root_mean_square(xs); },
        derive_seed(cfg.seed(), 0x7EAC));
    rep.summary["mean_tracking_error"] = sample_mean(tracking);
    rep.summary["mean_abs_residual_per_step"] =
        abs_sum / (static_cast<double>(np) * static_cast<double>(grid.n_steps));
    rep.summary["max_abs_residual"] = max_abs;

    if (cfg.flag("dump_ledger")) {
        if (np * (grid.n_steps + 1) > (1u << 22))
            throw ConfigError("dump_ledger: ledger too large to materialize; lower n_paths or n_steps");
        const PathSet paths = simulate_paths(params, grid, np, cfg.seed());
        const HedgeLedger led = run_hedge(paths, spec, mode, timing, tau_floor);
        Table ledger{"ledger",
                     {"path", "step", "time", "x", "b", "alpha", "beta", "v", "residual", "theta"},
                     {}};
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t i = 0; i <= grid.n_steps; ++i)
                ledger.rows.push_back(
                    {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(i), grid.times[i],
                     led.x(p, i), led.b(i), led.get_alpha(p, i), led.get_beta(p, i), led.v(p, i),
                     i < grid.n_steps ? nlohmann::json(led.get_residual(p, i)) : nlohmann::json(),
                     led.theta(p, i)});
        rep.tables.push_back(std::move(ledger));
    }
    return rep;
}

Report run_sfc_scan(const Resolved& cfg) {
    Report rep;
    const GbmParams params = cfg.market();
    const OptionSpec spec = cfg.option();
    const double t0 = cfg.num("t0");
    const std::size_t np = cfg.count("n_paths");
    const auto timing = cfg.timing();
    const double tau_floor = cfg.num("tau_floor");
    const auto ns = cfg.int_list("n_list");

    Table tab{"scan",
              {"n", "dt", "mean_abs_residual", "mean_residual_sum", "rms_tracking_error"},
              {}};
    std::vector<double> log_dt, log_res, log_track;
    for (int n : ns) {
        if (n < 1) throw ConfigError("key 'n_list': entries must be >= 1");
        const TimeGrid grid = build_time_grid(t0, spec.T, static_cast<std::size_t>(n));
        const auto recs = hedge_terminal_stats(params, grid, np, cfg.seed(), spec,
                                               HedgeMode::FORMULA_PRESCRIBED, timing, tau_floor);
        double abs_sum = 0.0, sum_sum = 0.0, track_sq = 0.0;
        for (const auto& rec : recs) {
            abs_sum += rec.residual_abs_sum;
            sum_sum += rec.residual_sum;
            const double te = rec.wealth_T - rec.payoff;
            track_sq += te * te;
        }
        const double mean_abs = abs_sum / (static_cast<double>(np) * n);
        const double rms_track = std::sqrt(track_sq / static_cast<double>(np));
        tab.rows.push_back({n, grid.dt(), mean_abs, sum_sum / static_cast<double>(np), rms_track});
        log_dt.push_back(grid.dt());
        log_res.push_back(mean_abs);
        log_track.push_back(rms_track);
    }
    rep.tables.push_back(std::move(tab));

    if (ns.size() >= 3) {
        const SlopeFit fr = fit_loglog(log_dt, log_res);
        rep.summary["residual_slope_vs_dt"] = fr.slope;
        rep.summary["residual_slope_ci_lo"] = fr.ci_lo;
        rep.summary["residual_slope_ci_hi"] = fr.ci_hi;
        const SlopeFit ft = fit_loglog(log_dt, log_track);
        rep.summary["tracking_slope_vs_dt"] = ft.slope;
        rep.summary["tracking_slope_ci_lo"] = ft.ci_lo;
        rep.summary["tracking_slope_ci_hi"] = ft.ci_hi;
    }
    return rep;
}

Report run_theta_check(const Resolved& cfg) {
    Report rep;
    const GbmParams params = cfg.market();
    const OptionSpec spec = cfg.option();
    const TimeGrid grid = build_time_grid(cfg.num("t0"), spec.T, cfg.count("n_steps"));
    const std::size_t np = cfg.count("n_paths");
    const double eps = cfg.num("eps_frac") * spec.k;
    const double tau_floor = cfg.num("tau_floor");

    const auto recs = hedge_terminal_stats(params, grid, np, cfg.seed(), spec,
                                           HedgeMode::FORMULA_PRESCRIBED, HedgeTiming::CURRENT,
                                           tau_floor);
    Table tab{"paths", {"path", "x_T", "theta_T", "excluded"}, {}};
    double max_abs = 0.0;
    std::size_t n_excluded = 0;
    for (std::size_t p = 0; p < np; ++p) {
        const bool excluded = std::abs(recs[p].x_T - spec.k) <= eps;
        if (excluded)
            ++n_excluded;
        else
            max_abs = std::max(max_abs, std::abs(recs[p].theta_T));
        tab.rows.push_back({static_cast<std::uint64_t>(p), recs[p].x_T, recs[p].theta_T, excluded});
    }
    rep.tables.push_back(std::move(tab));
    rep.summary["max_abs_theta_terminal"] = max_abs;
    rep.summary["n_excluded"] = n_excluded;
    rep.summary["eps"] = eps;
    rep.summary["theta_t0"] = theta_value(params.x0, grid.t0, spec);
    return rep;
}

Report run_increments(const Resolved& cfg) {
    Report rep;
    const GbmParams params = cfg.market();
    const OptionSpec spec = cfg.option();
    const TimeGrid grid = build_time_grid(cfg.num("t0"), spec.T, cfg.count("n_steps"));
    const PathSet paths = simulate_paths(params, grid, 1, cfg.seed());
    const AlphaRule rule = cfg.rule();
    const auto cmp = merton_increment_comparison(paths, 0, spec, rule);

    Table tab{"steps", {"step", "time", "post", "pre", "diff"}, {}};
    for (std::size_t i = 0; i < cmp.diff.size(); ++i)
        tab.rows.push_back({static_cast<std::uint64_t>(i + 1), grid.times[i + 1], cmp.post[i],
                            cmp.pre[i], cmp.diff[i]});
    rep.tables.push_back(std::move(tab));

    rep.summary["cumulative_diff"] = cmp.cumulative;
    if (rule.kind == AlphaRule::Kind::DELTA) {
        rep.summary["gamma_compensator"] = cmp.compensator;
        rep.summary["ratio"] = cmp.cumulative / cmp.compensator;
    } else if (cfg.str("rule") == "linear") {
        // alpha = t telescopes: sum of dalpha dx = dt (x_T - x_0)
        const double ref = grid.dt() * (paths.price(0, grid.n_steps) - paths.price(0, 0));
        rep.summary["reference_cumulative"] = ref;
        rep.summary["gap"] = cmp.cumulative - ref;
    }
    return rep;
}

Report run_ex_ante(const Resolved& cfg) {
    Report rep;
    const OptionSpec spec = cfg.option();
    const double x = cfg.num("x"), t = cfg.num("t"), mu = cfg.num("mu");
    const double dt = cfg.num("dt");
    const std::size_t n_inner = cfg.count("n_inner");
    const AlphaRule rule = cfg.rule();
    const auto res = ex_ante_residual(x, t, spec, mu, dt, n_inner, cfg.seed(), rule);

    Table tab{"estimates", {"quantity", "estimate", "std_error", "n"}, {}};
    tab.rows.push_back({"full_residual", res.full.mean, res.full.se,
                        static_cast<std::uint64_t>(res.full.n)});
    tab.rows.push_back({"cross_over_dt", res.cross_over_dt.mean, res.cross_over_dt.se,
                        static_cast<std::uint64_t>(res.cross_over_dt.n)});
    rep.tables.push_back(std::move(tab));

    rep.summary["full_mean"] = res.full.mean;
    rep.summary["full_se"] = res.full.se;
    rep.summary["cross_over_dt_mean"] = res.cross_over_dt.mean;
    rep.summary["cross_over_dt_se"] = res.cross_over_dt.se;
    if (rule.kind == AlphaRule::Kind::DELTA) {
        const Greeks g = greeks(x, t, spec);
        const double ref = g.w11 * spec.sigma * spec.sigma * x * x;
        rep.summary["gamma_compensator"] = ref;
        rep.summary["z_cross_vs_compensator"] = (res.cross_over_dt.mean - ref) / res.cross_over_dt.se;
    }
    return rep;
}

Report run_decompose(const Resolved& cfg) {
    Report rep;
    const GbmParams params = cfg.market();
    const OptionSpec spec = cfg.option();
    const TimeGrid grid = build_time_grid(cfg.num("t0"), spec.T, cfg.count("n_steps"));
    const std::size_t np = cfg.count("n_paths");
    const auto recs =
        integrate_decomposition_streaming(params, grid, np, cfg.seed(), spec, cfg.num("t1"));

    Table tab{"paths", {"path", "i_kappa", "i_lambda", "theta0", "thetaT", "defect"}, {}};
    double sq = 0.0, mean = 0.0, max_abs = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
        const auto& rec = recs[p];
        const double ik = rec.i_kappa_head + rec.i_kappa_tail;
        const double il = rec.i_lambda_head + rec.i_lambda_tail;
        tab.rows.push_back(
            {static_cast<std::uint64_t>(p), ik, il, rec.theta0, rec.thetaT, rec.defect});
        sq += rec.defect * rec.defect;
        mean += rec.defect;
        max_abs = std::max(max_abs, std::abs(rec.defect));
    }
    rep.tables.push_back(std::move(tab));
    rep.summary["rms_defect"] = std::sqrt(sq / static_cast<double>(np));
    rep.summary["mean_defect"] = mean / static_cast<double>(np);
    rep.summary["max_abs_defect"] = max_abs;
    rep.summary["theta_t0"] = recs.empty() ? 0.0 : recs[0].theta0;
    return rep;
}

Report run_a1_stats(const Resolved& cfg) {
    Report rep;
    const GbmParams params = cfg.market();
    const OptionSpec spec = cfg.option();
    const TimeGrid grid = build_time_grid(cfg.num("t0"), spec.T, cfg.count("n_steps"));
    const std::size_t np = cfg.count("n_paths");
    const auto recs =
        integrate_decomposition_streaming(params, grid, np, cfg.seed(), spec, cfg.num("t1"));
    const auto rows = ensemble_statistics(recs, cfg.seed());

    Table tab{"statistics", {"quantity", "estimate", "std_error", "n_paths", "conditioning"}, {}};
    for (const auto& row : rows) {
        tab.rows.push_back({row.quantity, row.estimate, row.std_error,
                            static_cast<std::uint64_t>(row.n_paths), row.conditioning});
        if (row.quantity.rfind("cor(", 0) == 0) {
            rep.summary["cor_tail_estimate"] = row.estimate;
            rep.summary["cor_tail_se"] = row.std_error;
        }
    }
    rep.tables.push_back(std::move(tab));
    rep.summary["n_paths"] = np;
    return rep;
}

Report run_a1_conditional(const Resolved& cfg) {
    Report rep;
    const OptionSpec spec = cfg.option();
    const auto cc = conditional_correlation(cfg.num("x"), cfg.num("t1"), spec, cfg.num("mu"),
                                            cfg.count("n_paths"), cfg.count("n_steps"), cfg.seed());

    Table tab{"statistics", {"quantity", "estimate", "std_error", "n_paths", "conditioning"}, {}};
    tab.rows.push_back({"cor(int_kappa_tail, int_lambda_tail)", cc.correlation, cc.std_error,
                        static_cast<std::uint64_t>(cc.n_paths),
                        cc.degenerate ? "F_t1 (degenerate)" : "F_t1"});
    rep.tables.push_back(std::move(tab));

    rep.summary["correlation"] = cc.correlation;
    rep.summary["std_error"] = cc.std_error;
    rep.summary["degenerate"] = cc.degenerate;
    rep.summary["closure_rms"] = cc.closure_rms;
    rep.summary["theta_t1"] = cc.theta_t1;
    rep.summary["mean_i_kappa"] = cc.i_kappa.mean;
    rep.summary["mean_i_lambda"] = cc.i_lambda.mean;
    return rep;
}

Report run_crr_converge(const Resolved& cfg) {
    Report rep;
    const OptionSpec spec = cfg.option();
    const auto study = convergence_study(spec, cfg.num("x0"), cfg.int_list("n_list"));

    Table tab{"convergence", {"n", "crr_price", "bs_price", "abs_error"}, {}};
    for (const auto& row : study.rows)
        tab.rows.push_back({row.n, row.crr, row.bs, row.abs_error});
    rep.tables.push_back(std::move(tab));

    rep.summary["slope"] = study.slope.slope;
    rep.summary["slope_ci_lo"] = study.slope.ci_lo;
    rep.summary["slope_ci_hi"] = study.slope.ci_hi;
    rep.summary["bs_price"] = study.rows.empty() ? 0.0 : study.rows.front().bs;
    return rep;
}

Report run_beta_check(const Resolved& cfg) {
    Report rep;
    TreeParams tree;
    tree.s = cfg.num("s");
    tree.u = cfg.num("u");
    tree.d = cfg.num("d");
    tree.r_star = cfg.num("rstar");
    tree.n = 1;
    const double k = cfg.num("k");
    const double cu = call_payoff(tree.u * tree.s, k);
    const double cd = call_payoff(tree.d * tree.s, k);
    const double c = crr_step(cu, cd, tree);
    const MarketTree market{tree.s, tree.u * tree.s, tree.d * tree.s};

    const BetaRelation at_price = beta_relation_check(tree, market, cu, cd, c);
    const double bumped = c + cfg.num("perturb");
    const BetaRelation at_bump = beta_relation_check(tree, market, cu, cd, bumped);

    Table tab{"relations", {"case", "price", "rho_up", "rho_down", "gap", "implied_value"}, {}};
    tab.rows.push_back({"difference_equation", c, at_price.rho_up, at_price.rho_down, at_price.gap,
                        at_price.implied_value});
    tab.rows.push_back(
        {"perturbed", bumped, at_bump.rho_up, at_bump.rho_down, at_bump.gap, at_bump.implied_value});
    rep.tables.push_back(std::move(tab));

    rep.summary["price"] = c;
    rep.summary["gap_at_price"] = at_price.gap;
    rep.summary["gap_perturbed"] = at_bump.gap;
    rep.summary["implied_value"] = at_price.implied_value;
    return rep;
}

Report run_physical_price(const Resolved& cfg) {
    Report rep;
    const OptionSpec spec = cfg.option();
    const double x = cfg.num("x"), t = cfg.num("t"), mu = cfg.num("mu");
    const double price = bs_price(x, t, spec);
    const double ep = expected_payoff_physical(x, t, spec, mu);
    const double mu_w = implied_option_drift(x, t, spec, mu);
    const double inst = instantaneous_option_drift(x, t, spec, mu);
    const double tau = spec.T - t;
    const double rn_gap = expected_payoff_physical(x, t, spec, spec.r) - std::exp(spec.r * tau) * price;

    Table tab{"value", {"quantity", "value"}, {}};
    tab.rows.push_back({"price", price});
    tab.rows.push_back({"expected_payoff", ep});
    tab.rows.push_back({"implied_drift", mu_w});
    tab.rows.push_back({"instantaneous_drift", inst});
    tab.rows.push_back({"risk_neutral_gap", rn_gap});
    rep.tables.push_back(std::move(tab));

    rep.summary["price"] = price;
    rep.summary["expected_payoff"] = ep;
    rep.summary["implied_drift"] = mu_w;
    rep.summary["instantaneous_drift"] = inst;
    rep.summary["risk_neutral_gap"] = rn_gap;
    return rep;
}

using Body = Report (*)(const Resolved&);

const std::map<std::string, Body>& experiment_bodies() {
    static const std::map<std::string, Body> bodies = {
        {"price", run_price},
        {"greeks", run_greeks},
        {"hedge", run_hedge_experiment},
        {"sfc-scan", run_sfc_scan},
        {"theta-check", run_theta_check},
        {"increments", run_increments},
        {"ex-ante", run_ex_ante},
        {"decompose", run_decompose},
        {"a1-stats", run_a1_stats},
        {"a1-conditional", run_a1_conditional},
        {"crr-converge", run_crr_converge},
        {"beta-check", run_beta_check},
        {"physical-price", run_physical_price},
    };
    return bodies;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (out.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        out[key] = value;
    }
    return out;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply_env_overrides(std::map<std::string, std::string>& config) {
    if (const char* seed = std::getenv("SFCLAB_SEED")) config["seed"] = seed;
    if (const char* out = std::getenv("SFCLAB_OUT")) config["out"] = out;
}

const std::vector<ExperimentInfo>& experiment_registry() {
    static const std::vector<ExperimentInfo> registry = {
        {"price", "closed-form call value with d1/d2 and the bond leg at a chosen state"},
        {"greeks", "all closed-form partials (delta, gamma, speed, theta, charm) plus the value and drift identities"},
        {"hedge", "discretely rebalanced replication along simulated paths: tracking error and per-step residuals"},
        {"sfc-scan", "per-step self-financing residual and tracking error versus step size, with log-log slopes"},
        {"theta-check", "terminal behavior of theta = -(alpha + beta), which collapses to 0 away from the strike"},
        {"increments", "backward- vs forward-priced trade increments along one path and their gamma compensator"},
        {"ex-ante", "conditional expectation of the one-step rebalancing residual from a fixed state"},
        {"decompose", "drift and diffusion integrals of theta and the terminal closure defect per path"},
        {"a1-stats", "ensemble covariances, variances and tail correlation of the segment integrals"},
        {"a1-conditional", "tail-integral correlation conditional on the split-time state, with closure RMS"},
        {"crr-converge", "binomial lattice value against the closed form as the period count grows"},
        {"beta-check", "one-period hedge-ratio consistency and the implied difference-equation price"},
        {"physical-price", "expected payoff under the physical drift and the implied option discount rate"},
    };
    return registry;
}

Report run_experiment(const std::string& experiment, std::map<std::string, std::string> config) {
    const auto& bodies = experiment_bodies();
    const auto body = bodies.find(experiment);
    if (body == bodies.end()) {
        std::string names;
        for (const auto& info : experiment_registry()) names += info.name + " ";
        throw ConfigError("unknown experiment '" + experiment + "'; valid: " + names);
    }

    const auto& allowed = experiment_keys().at(experiment);
    for (const auto& [key, value] : config) {
        (void)value;
        if (!allowed.count(key) && !kGlobalKeys.count(key))
            throw ConfigError("key '" + key + "' is not used by experiment '" + experiment + "'");
    }

    Resolved cfg;
    const auto& defaults = default_values();
    for (const auto& key : allowed) cfg.map[key] = defaults.at(key);
    for (const auto& key : kGlobalKeys) cfg.map[key] = defaults.at(key);
    for (const auto& [key, value] : config) cfg.map[key] = value;

    const std::string format = cfg.str("format");
    if (format != "csv" && format != "json")
        throw ConfigError("key 'format': expected csv|json, got '" + format + "'");
    set_default_workers(static_cast<unsigned>(cfg.count("threads")));

    const auto start = std::chrono::steady_clock::now();
    Report rep;
    try {
        rep = body->second(cfg);
    } catch (const std::invalid_argument& e) {
        // module-level precondition violations trace back to the config
        throw ConfigError(e.what());
    }
    const auto stop = std::chrono::steady_clock::now();

    rep.experiment = experiment;
    rep.config = cfg.map;
    rep.fingerprint = fingerprint_of(experiment, cfg.map);
    rep.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    return rep;
}

std::vector<std::string> emit_report(const Report& report, const std::string& out_dir,
                                     const std::string& format) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " + ec.message());

    std::vector<std::string> written;
    auto open = [&](const std::string& name) {
        const std::string path = (fs::path(out_dir) / name).string();
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + path);
        written.push_back(path);
        return os;
    };

    if (format == "csv") {
        for (const auto& tab : report.tables) {
            auto os = open(report.experiment + "_" + tab.name + ".csv");
            for (std::size_t c = 0; c < tab.columns.size(); ++c)
                os << (c ? "," : "") << csv_escape(tab.columns[c]);
            os << "\n";
            for (const auto& row : tab.rows) {
                for (std::size_t c = 0; c < row.size(); ++c)
                    os << (c ? "," : "") << csv_escape(format_cell(row[c]));
                os << "\n";
            }
        }
        auto os = open(report.experiment + "_summary.csv");
        os << "quantity,value\n";
        for (const auto& [key, value] : report.summary.items())
            os << csv_escape(key) << "," << csv_escape(format_cell(value)) << "\n";
    } else if (format == "json") {
        nlohmann::json doc;
        doc["schema"] = "sfc-lab/1";
        doc["experiment"] = report.experiment;
        doc["fingerprint"] = report.fingerprint;
        doc["config"] = report.config;
        doc["summary"] = report.summary;
        doc["wall_ms"] = report.wall_ms;
        nlohmann::json tables = nlohmann::json::array();
        for (const auto& tab : report.tables) {
            nlohmann::json jt;
            jt["name"] = tab.name;
            jt["columns"] = tab.columns;
            jt["rows"] = tab.rows;
            tables.push_back(std::move(jt));
        }
        doc["tables"] = std::move(tables);
        auto os = open(report.experiment + ".json");
        os << doc.dump(2) << "\n";
    } else {
        throw ConfigError("key 'format': expected csv|json, got '" + format + "'");
    }
    return written;
}

}  // namespace sfclab
