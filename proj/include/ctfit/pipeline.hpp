#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distributions.hpp"
#include "error.hpp"
#include "factorize.hpp"
#include "gof.hpp"
#include "independence.hpp"
#include "mixture.hpp"
#include "table.hpp"

namespace ctfit {

inline constexpr const char* report_schema_version = "1.0";

struct PipelineConfig {
    double alpha = 0.05;            ///< screening threshold on row-contribution p
    bool screening = true;          ///< false: use the table as given
    int r_max = 64;                 ///< natural-r search bound for NegBin
    double tol = 1e-12;             ///< ALS tolerance on S^2
    int max_iter = 10000;
    GofOptions gof{};
    std::vector<int> gamma_all_shapes{10, 11, 12, 13, 14, 15};
    std::vector<int> gamma_plant_shapes{9, 10, 11, 12, 13, 14};
    std::vector<int> gamma_bacteria_shapes{27, 28, 29, 30, 31, 32, 10, 11, 12, 13, 14};
    std::vector<int> negbin_shapes{9, 10, 11, 12, 13, 14, 27, 28, 29, 30, 31, 32};
    double grid_step = 0.01;
    double span_sigmas = 6.0;
    bool curves = true;
};

struct FitWithGof {
    FitResult fit;
    GofReport gof;
};

struct NamedFit {
    std::string label;
    std::vector<double> data;
    FitWithGof result;
};

struct GammaProfile {
    std::string population;  // all / plants / bacteria
    FitWithGof full_mle;
    std::vector<FitWithGof> natural;
};

struct FactorPopulation {
    std::string population;
    FitWithGof fit;
    double entropy = 0.0;
};

struct PipelineReport {
    explicit PipelineReport(ScreeningResult s) : screening(std::move(s)) {}

    ScreeningResult screening;
    std::vector<RowContribution> initial_contributions;
    FactorPair factors;
    std::vector<std::string> factor_rows;
    std::vector<std::string> factor_cols;
    std::vector<std::pair<std::string, FitWithGof>> pooled_fits;
    FitWithGof negbin_full_mle;
    std::vector<FitVerdict> unfittable;
    std::vector<NamedFit> series_fits;
    double lambda_mean_bacteria = 0.0;
    double lambda_mean_plants = 0.0;
    double series_sum_log_inv_pcs = 0.0;
    double series_fisher_p = 0.0;
    std::vector<GammaProfile> gamma_of_lambdas;
    std::vector<FitWithGof> negbin_profile;
    JointFit joint;
    CoupledGammaFit coupled;
    double complementarity = 0.0;
    std::vector<FactorPopulation> factor_populations;
    double entropy_ratio = 0.0;  ///< plants over bacteria
    DensityCurve fb, fp, aa;
    PipelineConfig config;
};

namespace detail {

// Re-throws with the stage name prefixed, keeping the error category.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const numeric_error& e) {
        throw numeric_error(std::string(name) + ": " + e.what());
    } catch (const domain_error& e) {
        throw domain_error(std::string(name) + ": " + e.what());
    } catch (const validation_error& e) {
        throw validation_error(std::string(name) + ": " + e.what());
    } catch (const parse_error& e) {
        throw parse_error(std::string(name) + ": " + e.what());
    }
}

inline FitWithGof with_gof(std::span<const double> data, FitResult f, const GofOptions& opt) {
    auto g = gof_battery(data, f, opt);
    return {std::move(f), std::move(g)};
}

} // namespace detail

inline PipelineReport run_pipeline(const ContingencyTable& input, const PipelineConfig& cfg = {}) {
    PipelineReport rep(detail::stage("screening", [&] {
        if (cfg.screening) return screen_rows(input, cfg.alpha);
        const auto chi = chi_square_independence(input);
        return ScreeningResult{input, {}, {}, chi, chi};
    }));
    rep.initial_contributions = row_contributions(input);
    rep.config = cfg;
    const auto& go = cfg.gof;
    const ContingencyTable& t = rep.screening.retained;

    detail::stage("factorize", [&] {
        AlsOptions opt;
        opt.tol = cfg.tol;
        opt.max_iter = cfg.max_iter;
        rep.factors = als_fit(t, opt);
        if (!rep.factors.converged) throw numeric_error("ALS did not converge within max_iter");
        rep.factor_rows = t.row_labels();
        rep.factor_cols = t.col_labels();
    });

    const auto pooled = to_reals(t.pooled());
    detail::stage("pooled_fits", [&] {
        rep.pooled_fits.emplace_back("uniform", detail::with_gof(pooled, fit_uniform_moments(pooled), go));
        rep.pooled_fits.emplace_back("geometric", detail::with_gof(pooled, fit_geometric(pooled), go));
        rep.pooled_fits.emplace_back("logarithmic", detail::with_gof(pooled, fit_logarithmic(pooled), go));
        rep.pooled_fits.emplace_back("negbin", detail::with_gof(pooled, fit_negbin_natural_r(pooled, cfg.r_max), go));
        rep.pooled_fits.emplace_back("poisson", detail::with_gof(pooled, fit_poisson(pooled), go));
        rep.negbin_full_mle = detail::with_gof(pooled, fit_negbin(pooled), go);
        for (auto fam : {UnfittableFamily::bernoulli, UnfittableFamily::binomial, UnfittableFamily::hypergeometric})
            rep.unfittable.push_back(reject_unfittable(pooled, fam));
    });

    std::vector<double> lam_b, lam_p;
    detail::stage("series_fits", [&] {
        std::vector<double> p_cs;
        auto add = [&](const SeriesSample& s, std::vector<double>& lam) {
            auto x = s.as_real();
            auto r = detail::with_gof(x, fit_poisson(x), go);
            lam.push_back(std::get<PoissonParams>(r.fit.params).lambda);
            p_cs.push_back(r.gof.p_cs);
            rep.series_fits.push_back({s.label, std::move(x), std::move(r)});
        };
        for (std::size_t i = 0; i < t.rows(); ++i) add(t.row_series(i), lam_b);
        for (std::size_t j = 0; j < t.cols(); ++j) add(t.col_series(j), lam_p);
        rep.lambda_mean_bacteria = detail::sample_mean(lam_b);
        rep.lambda_mean_plants = detail::sample_mean(lam_p);
        rep.series_sum_log_inv_pcs = 0.0;
        for (double p : p_cs) rep.series_sum_log_inv_pcs -= std::log(p);
        rep.series_fisher_p = fisher_combine(p_cs).p_value;
    });

    std::vector<double> lam_all = lam_b;
    lam_all.insert(lam_all.end(), lam_p.begin(), lam_p.end());
    detail::stage("gamma_of_lambdas", [&] {
        auto profile = [&](const char* name, const std::vector<double>& x, const std::vector<int>& shapes) {
            GammaProfile g{name, detail::with_gof(x, fit_gamma(x), go), {}};
            for (auto& f : profile_gamma(x, shapes)) g.natural.push_back(detail::with_gof(x, std::move(f), go));
            rep.gamma_of_lambdas.push_back(std::move(g));
        };
        profile("all", lam_all, cfg.gamma_all_shapes);
        profile("plants", lam_p, cfg.gamma_plant_shapes);
        profile("bacteria", lam_b, cfg.gamma_bacteria_shapes);
    });

    detail::stage("negbin_profile", [&] {
        for (auto& f : profile_negbin(pooled, cfg.negbin_shapes))
            rep.negbin_profile.push_back(detail::with_gof(pooled, std::move(f), go));
    });

    detail::stage("associations", [&] {
        rep.joint = joint_negbin_gamma_mle(pooled, lam_all);
        rep.coupled = coupled_gamma_mle(lam_b, lam_p);
        auto best_natural = [](const std::vector<FitWithGof>& v) {
            return std::get<GammaParams>(std::max_element(v.begin(), v.end(), [](const auto& x, const auto& y) {
                                             return x.fit.log_likelihood < y.fit.log_likelihood;
                                         })->fit.params);
        };
        rep.complementarity = complementarity_check(best_natural(rep.gamma_of_lambdas[2].natural),
                                                    best_natural(rep.gamma_of_lambdas[1].natural));
    });

    detail::stage("factor_populations", [&] {
        for (auto [name, v] : {std::pair{"bacteria", &rep.factors.a}, std::pair{"plants", &rep.factors.b}}) {
            auto f = detail::with_gof(*v, fit_gamma(*v), go);
            const double h = gamma_entropy(std::get<GammaParams>(f.fit.params));
            rep.factor_populations.push_back({name, std::move(f), h});
        }
        rep.entropy_ratio = rep.factor_populations[1].entropy / rep.factor_populations[0].entropy;
    });

    if (cfg.curves) {
        detail::stage("curves", [&] {
            const auto gb = std::get<GammaParams>(rep.factor_populations[0].fit.fit.params);
            const auto gp = std::get<GammaParams>(rep.factor_populations[1].fit.fit.params);
            rep.fb = gamma_density_curve(gb, cfg.grid_step, cfg.span_sigmas);
            rep.fp = gamma_density_curve(gp, cfg.grid_step, cfg.span_sigmas);
            rep.aa = gamma_convolution_density(gb, gp, cfg.grid_step, cfg.span_sigmas);
        });
    }
    return rep;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

using json = nlohmann::json;

inline json to_json_value(const DistributionParams& d) {
    return std::visit(
        [](const auto& p) -> json {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, DiscreteUniformParams>) return {{"a", p.a}, {"b", p.b}};
            else if constexpr (std::is_same_v<P, GeometricParams>) return {{"p", p.p}};
            else if constexpr (std::is_same_v<P, LogarithmicParams>) return {{"theta", p.theta}};
            else if constexpr (std::is_same_v<P, PoissonParams>) return {{"lambda", p.lambda}};
            else if constexpr (std::is_same_v<P, NegBinParams>) return {{"r", p.r}, {"p", p.p}, {"odds", p.p / (1.0 - p.p)}};
            else return {{"shape", p.shape}, {"scale", p.scale}, {"p", p.proportion()}};
        },
        d);
}

inline json to_json_value(const ChiSquareResult& c) {
    return {{"statistic", c.statistic}, {"df", c.df}, {"p_value", c.p_value}};
}

inline json to_json_value(const FitResult& f) {
    return {{"family", family_name(f.params)},
            {"params", to_json_value(f.params)},
            {"log_likelihood", f.log_likelihood},
            {"method", to_string(f.method)},
            {"n", f.n}};
}

inline json to_json_value(const GofReport& g) {
    json j{{"ks_d", g.ks_d}, {"p_ks", g.p_ks}, {"ad_a2", g.ad_a2}, {"p_ad", g.p_ad},
           {"ad_clamped", g.ad_clamped}, {"cs", g.cs}, {"p_cs", g.p_cs}, {"chisq", nullptr}};
    if (g.chisq)
        j["chisq"] = {{"statistic", g.chisq->statistic}, {"df", g.chisq->df}, {"p", g.chisq->p}, {"bins", g.chisq->bins}};
    return j;
}

inline json to_json_value(const FitWithGof& f) {
    return {{"fit", to_json_value(f.fit)}, {"gof", to_json_value(f.gof)}};
}

inline json to_json_value(const DensityCurve& c) {
    return {{"grid", c.grid}, {"values", c.values}, {"mass", c.mass}};
}

inline json provenance(const char* op, json params = json::object()) {
    return {{"operation", op}, {"parameters", std::move(params)}};
}

inline json to_json(const PipelineReport& r) {
    const auto& c = r.config;
    json gofp{{"ks_p_value", c.gof.ks == KsPValue::exact ? "exact" : "stephens"},
              {"ad_p_value", ad_p_value_method},
              {"chisq_min_expected", c.gof.min_expected}};
    json j;
    j["schema_version"] = report_schema_version;

    json scr;
    scr["provenance"] = provenance("screen_rows", {{"alpha", c.alpha}, {"enabled", c.screening}});
    scr["initial"] = to_json_value(r.screening.initial);
    scr["final"] = to_json_value(r.screening.final_);
    scr["removed"] = r.screening.removed;
    scr["retained_rows"] = r.screening.retained.row_labels();
    for (const auto& rc : r.initial_contributions)
        scr["initial_row_contributions"].push_back({{"label", rc.label}, {"chi", to_json_value(rc.chi)}});
    for (const auto& s : r.screening.steps)
        scr["steps"].push_back({{"removed", s.removed},
                                {"contribution", to_json_value(s.contribution)},
                                {"global_before", to_json_value(s.global_before)}});
    if (r.screening.steps.empty()) scr["steps"] = json::array();
    j["screening"] = std::move(scr);

    j["factors"] = {{"provenance", provenance("als_fit", {{"tol", c.tol}, {"max_iter", c.max_iter}, {"gauge", "equal_norm"}})},
                    {"row_labels", r.factor_rows},
                    {"col_labels", r.factor_cols},
                    {"a", r.factors.a},
                    {"b", r.factors.b},
                    {"s_squared", r.factors.s_squared},
                    {"iterations", r.factors.iterations},
                    {"converged", r.factors.converged}};

    json pooled;
    pooled["provenance"] = provenance("pooled_fits", {{"r_max", c.r_max}, {"gof", gofp}});
    for (const auto& [fam, f] : r.pooled_fits) {
        auto e = to_json_value(f);
        e["family"] = fam;
        pooled["fits"].push_back(std::move(e));
    }
    pooled["negbin_full_mle"] = to_json_value(r.negbin_full_mle);
    for (const auto& v : r.unfittable) {
        json e{{"family", to_string(v.family)}, {"rejected", v.rejected}, {"reason", v.reason}, {"p", nullptr}};
        if (v.p) e["p"] = *v.p;
        pooled["unfittable"].push_back(std::move(e));
    }
    j["pooled_fits"] = std::move(pooled);

    json series;
    series["provenance"] = provenance("fit_poisson per row and column", {{"gof", gofp}});
    for (const auto& s : r.series_fits) {
        auto e = to_json_value(s.result);
        e["label"] = s.label;
        e["data"] = s.data;
        series["fits"].push_back(std::move(e));
    }
    series["lambda_mean_bacteria"] = r.lambda_mean_bacteria;
    series["lambda_mean_plants"] = r.lambda_mean_plants;
    series["sum_log_inv_p_cs"] = r.series_sum_log_inv_pcs;
    series["fisher_p"] = r.series_fisher_p;
    j["series_fits"] = std::move(series);

    json gl;
    gl["provenance"] = provenance("fit_gamma + profile_gamma",
                                  {{"all", c.gamma_all_shapes}, {"plants", c.gamma_plant_shapes},
                                   {"bacteria", c.gamma_bacteria_shapes}, {"gof", gofp}});
    for (const auto& g : r.gamma_of_lambdas) {
        json e{{"population", g.population}, {"full_mle", to_json_value(g.full_mle)}, {"natural", json::array()}};
        for (const auto& f : g.natural) e["natural"].push_back(to_json_value(f));
        gl["profiles"].push_back(std::move(e));
    }
    j["gamma_of_lambdas"] = std::move(gl);

    json nb;
    nb["provenance"] = provenance("profile_negbin", {{"r", c.negbin_shapes}, {"gof", gofp}});
    nb["rows"] = json::array();
    for (const auto& f : r.negbin_profile) nb["rows"].push_back(to_json_value(f));
    j["negbin_profile"] = std::move(nb);

    json jf{{"r_a", r.joint.r_a}, {"p_a", r.joint.p_a}, {"scale", r.joint.scale()},
            {"log_likelihood", r.joint.log_likelihood}, {"natural_alternatives", json::array()}};
    for (const auto& a : r.joint.natural_alternatives)
        jf["natural_alternatives"].push_back({{"r", a.r}, {"p", a.p}, {"log_likelihood", a.log_likelihood}});
    json cf{{"r_b", r.coupled.r_b}, {"r_p", r.coupled.r_p}, {"p_bp", r.coupled.p_bp}, {"q", r.coupled.q},
            {"log_likelihood", r.coupled.log_likelihood}, {"natural_alternatives", json::array()}};
    for (const auto& a : r.coupled.natural_alternatives)
        cf["natural_alternatives"].push_back(
            {{"r_b", a.r_b}, {"r_p", a.r_p}, {"p_bp", a.p_bp}, {"log_likelihood", a.log_likelihood}});
    j["associations"] = {{"provenance", provenance("joint_negbin_gamma_mle + coupled_gamma_mle")},
                         {"joint", std::move(jf)},
                         {"coupled", std::move(cf)},
                         {"complementarity", r.complementarity}};

    json fp;
    fp["provenance"] = provenance("fit_gamma on factors + gamma_entropy", {{"gof", gofp}});
    for (const auto& p : r.factor_populations) {
        auto e = to_json_value(p.fit);
        e["population"] = p.population;
        e["entropy"] = p.entropy;
        fp["fits"].push_back(std::move(e));
    }
    j["factor_populations"] = std::move(fp);
    j["entropy_ratio"] = r.entropy_ratio;

    if (c.curves)
        j["curves"] = {{"provenance", provenance("gamma_density_curve + gamma_convolution_density",
                                                 {{"grid_step", c.grid_step}, {"span_sigmas", c.span_sigmas}})},
                       {"FB", to_json_value(r.fb)},
                       {"FP", to_json_value(r.fp)},
                       {"AA", to_json_value(r.aa)}};
    else
        j["curves"] = nullptr;
    return j;
}

} // namespace ctfit
