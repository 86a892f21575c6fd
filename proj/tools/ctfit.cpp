// ctfit: command-line front end for the contingency-table fitting library.

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/format.h>

#include <ctfit/ctfit.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using ctfit::json;

enum class Format { text, json, csv };

struct Common {
    std::string input;
    Format format = Format::text;
    double alpha = 0.05;
    int r_max = 64;
    double tol = 1e-12;
    unsigned seed = 0;  // reserved: no stage of the default pipeline is stochastic
    bool no_screen = false;
};

class usage_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x != 0.0 && std::abs(x) < 1e-3) return fmt::format("{:.4e}", x);
    return fmt::format("{:.4f}", x);
}

std::string csv_num(double x) { return fmt::format("{:.17g}", x); }

ctfit::ContingencyTable load(const Common& c) {
    if (c.input.empty()) return ctfit::fixtures::essential_oils();
    std::ifstream in(c.input);
    if (!in) throw usage_error("cannot open input file '" + c.input + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ctfit::parse_table(ss.str());
}

ctfit::ContingencyTable screened(const Common& c) {
    auto t = load(c);
    if (c.no_screen) return t;
    return ctfit::screen_rows(t, c.alpha).retained;
}

ctfit::PipelineConfig config_of(const Common& c) {
    ctfit::PipelineConfig cfg;
    cfg.alpha = c.alpha;
    cfg.screening = !c.no_screen;
    cfg.r_max = c.r_max;
    cfg.tol = c.tol;
    return cfg;
}

std::string params_text(const ctfit::DistributionParams& d) {
    return std::visit(
        [](const auto& p) -> std::string {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ctfit::DiscreteUniformParams>) return fmt::format("a={} b={}", p.a, p.b);
            else if constexpr (std::is_same_v<P, ctfit::GeometricParams>) return "p=" + num(p.p);
            else if constexpr (std::is_same_v<P, ctfit::LogarithmicParams>) return "theta=" + num(p.theta);
            else if constexpr (std::is_same_v<P, ctfit::PoissonParams>) return "lambda=" + num(p.lambda);
            else if constexpr (std::is_same_v<P, ctfit::NegBinParams>) return "r=" + num(p.r) + " p=" + num(p.p);
            else return "shape=" + num(p.shape) + " scale=" + num(p.scale) + " p=" + num(p.proportion());
        },
        d);
}

void emit(const Common& c, const json& j, const std::string& text, const std::string& csv) {
    switch (c.format) {
    case Format::json: std::cout << j.dump(2) << '\n'; break;
    case Format::csv: std::cout << csv; break;
    case Format::text: std::cout << text; break;
    }
}

// ---------------------------------------------------------------------------

void cmd_independence(const Common& c) {
    const auto t = load(c);
    const auto contrib = ctfit::row_contributions(t);
    const auto s = ctfit::screen_rows(t, c.alpha);
    json j{{"initial", ctfit::to_json_value(s.initial)}, {"final", ctfit::to_json_value(s.final_)},
           {"removed", s.removed}, {"alpha", c.alpha}, {"row_contributions", json::array()}};
    std::string text = fmt::format("Chi-square independence ({}x{})\n  X2 = {}  df = {}  p = {}\n", t.rows(), t.cols(),
                                   num(s.initial.statistic), s.initial.df, num(s.initial.p_value));
    std::string csv = "label,chi,df,p\n";
    text += fmt::format("\n{:<20}{:>10}{:>6}{:>12}\n", "row", "X2", "df", "p");
    for (const auto& r : contrib) {
        j["row_contributions"].push_back({{"label", r.label}, {"chi", ctfit::to_json_value(r.chi)}});
        text += fmt::format("{:<20}{:>10}{:>6}{:>12}\n", r.label, num(r.chi.statistic), r.chi.df, num(r.chi.p_value));
        csv += fmt::format("{},{},{},{}\n", r.label, csv_num(r.chi.statistic), r.chi.df, csv_num(r.chi.p_value));
    }
    text += fmt::format("\nremoved at alpha={}:", c.alpha);
    for (const auto& r : s.removed) text += " " + r;
    if (s.removed.empty()) text += " none";
    text += fmt::format("\nreduced table: X2 = {}  df = {}  p = {}\n", num(s.final_.statistic), s.final_.df,
                        num(s.final_.p_value));
    emit(c, j, text, csv);
}

void cmd_factorize(const Common& c) {
    const auto t = screened(c);
    ctfit::AlsOptions opt;
    opt.tol = c.tol;
    const auto f = ctfit::als_fit(t, opt);
    if (!f.converged) throw ctfit::numeric_error("factorize: ALS did not converge");
    json j{{"row_labels", t.row_labels()}, {"col_labels", t.col_labels()}, {"a", f.a}, {"b", f.b},
           {"s_squared", f.s_squared}, {"iterations", f.iterations}, {"converged", f.converged}};
    std::string text = "Row factors\n";
    std::string csv = "kind,label,value\n";
    for (std::size_t i = 0; i < f.a.size(); ++i) {
        text += fmt::format("  {:<20}{:>10}\n", t.row_labels()[i], num(f.a[i]));
        csv += fmt::format("a,{},{}\n", t.row_labels()[i], csv_num(f.a[i]));
    }
    text += "Column factors\n";
    for (std::size_t j2 = 0; j2 < f.b.size(); ++j2) {
        text += fmt::format("  {:<20}{:>10}\n", t.col_labels()[j2], num(f.b[j2]));
        csv += fmt::format("b,{},{}\n", t.col_labels()[j2], csv_num(f.b[j2]));
    }
    text += fmt::format("S2 = {}  iterations = {}\n", num(f.s_squared), f.iterations);
    emit(c, j, text, csv);
}

std::vector<double> sample_for(const Common& c, const std::string& series) {
    const auto t = screened(c);
    if (series.empty()) return ctfit::to_reals(t.pooled());
    for (std::size_t i = 0; i < t.rows(); ++i)
        if (t.row_labels()[i] == series) return t.row_series(i).as_real();
    for (std::size_t k = 0; k < t.cols(); ++k)
        if (t.col_labels()[k] == series) return t.col_series(k).as_real();
    throw ctfit::validation_error("no row or column labeled '" + series + "'");
}

void cmd_fit(const Common& c, const std::string& family, const std::string& series) {
    const auto x = sample_for(c, series);
    if (family == "bernoulli" || family == "binomial" || family == "hypergeometric") {
        const auto fam = family == "bernoulli" ? ctfit::UnfittableFamily::bernoulli
                         : family == "binomial" ? ctfit::UnfittableFamily::binomial
                                                : ctfit::UnfittableFamily::hypergeometric;
        const auto v = ctfit::reject_unfittable(x, fam);
        json j{{"family", family}, {"rejected", v.rejected}, {"reason", v.reason}, {"p", nullptr}};
        if (v.p) j["p"] = *v.p;
        std::string text = fmt::format("{}: {}\n", family, v.rejected ? "no MLE fit (" + v.reason + ")" : "p=" + num(*v.p));
        std::string csv = fmt::format("family,rejected,reason\n{},{},\"{}\"\n", family, v.rejected, v.reason);
        emit(c, j, text, csv);
        return;
    }
    std::vector<ctfit::FitResult> fits;
    if (family == "uniform") fits.push_back(ctfit::fit_uniform_moments(x));
    else if (family == "geometric") fits.push_back(ctfit::fit_geometric(x));
    else if (family == "logarithmic") fits.push_back(ctfit::fit_logarithmic(x));
    else if (family == "poisson") fits.push_back(ctfit::fit_poisson(x));
    else if (family == "negbin") {
        fits.push_back(ctfit::fit_negbin_natural_r(x, c.r_max));
        fits.push_back(ctfit::fit_negbin(x));
    } else if (family == "gamma") fits.push_back(ctfit::fit_gamma(x));
    else throw usage_error("unknown family '" + family + "'");

    json j = json::array();
    std::string text = fmt::format("{:<14}{:<18}{:<42}{:>12}\n", "family", "method", "parameters", "logL");
    std::string csv = "family,method,parameter,value,log_likelihood\n";
    for (const auto& f : fits) {
        j.push_back(ctfit::to_json_value(f));
        std::string method = ctfit::to_string(f.method);
        if (family == "negbin" && f.method == ctfit::FitMethod::mle_fixed_shape) method = "mle_natural_r";
        j.back()["method"] = method;
        text += fmt::format("{:<14}{:<18}{:<42}{:>12}\n", family, method, params_text(f.params), num(f.log_likelihood));
        const json pj = ctfit::to_json_value(f.params);
        for (const auto& [k, v] : pj.items())
            csv += fmt::format("{},{},{},{},{}\n", family, method, k, csv_num(v.get<double>()), csv_num(f.log_likelihood));
    }
    emit(c, j, text, csv);
}

void cmd_gof(const Common& c, const std::string& series) {
    const auto x = sample_for(c, series);
    std::vector<std::pair<std::string, ctfit::FitResult>> fits;
    auto attempt = [&](const char* name, auto&& fn) {
        try {
            fits.emplace_back(name, fn());
        } catch (const ctfit::error&) {
            // Families that cannot be fitted to this sample are skipped.
        }
    };
    attempt("uniform", [&] { return ctfit::fit_uniform_moments(x); });
    attempt("geometric", [&] { return ctfit::fit_geometric(x); });
    attempt("logarithmic", [&] { return ctfit::fit_logarithmic(x); });
    attempt("negbin", [&] { return ctfit::fit_negbin_natural_r(x, c.r_max); });
    attempt("poisson", [&] { return ctfit::fit_poisson(x); });

    json j = json::array();
    std::string text = fmt::format("{:<13}{:<26}{:>10}{:>12}{:>10}{:>12}{:>10}{:>12}\n", "family", "parameters", "K-S",
                                   "p_KS", "A-D", "p_AD", "C-S", "p_CS");
    std::string csv = "family,ks_d,p_ks,ad_a2,p_ad,cs,p_cs\n";
    for (const auto& [name, f] : fits) {
        const auto g = ctfit::gof_battery(x, f);
        j.push_back({{"family", name}, {"fit", ctfit::to_json_value(f)}, {"gof", ctfit::to_json_value(g)}});
        text += fmt::format("{:<13}{:<26}{:>10}{:>12}{:>10}{:>12}{:>10}{:>12}\n", name, params_text(f.params), num(g.ks_d),
                            num(g.p_ks), num(g.ad_a2), num(g.p_ad), num(g.cs), num(g.p_cs));
        csv += fmt::format("{},{},{},{},{},{},{}\n", name, csv_num(g.ks_d), csv_num(g.p_ks), csv_num(g.ad_a2),
                           csv_num(g.p_ad), csv_num(g.cs), csv_num(g.p_cs));
    }
    emit(c, j, text, csv);
}

void cmd_associate(const Common& c) {
    auto cfg = config_of(c);
    cfg.curves = false;
    const auto rep = ctfit::run_pipeline(load(c), cfg);
    const auto j = ctfit::to_json(rep)["associations"];
    const auto& jf = rep.joint;
    const auto& cf = rep.coupled;
    std::string text = "Joint: lambda_A ~ Gamma(r, p/(1-p)), Obs ~ NegBin(r, p)\n";
    text += fmt::format("  r={}  p={}  p/(1-p)={}  logL={}\n", num(jf.r_a), num(jf.p_a), num(jf.scale()),
                        num(jf.log_likelihood));
    for (const auto& a : jf.natural_alternatives)
        text += fmt::format("  natural r={:<4} p={}  logL={}\n", a.r, num(a.p), num(a.log_likelihood));
    text += "Coupled: lambda_B ~ Gamma(r_B, q), lambda_P ~ Gamma(r_P, 1/q)\n";
    text += fmt::format("  r_B={}  r_P={}  p_BP={}  q={}  logL={}\n", num(cf.r_b), num(cf.r_p), num(cf.p_bp),
                        num(cf.q), num(cf.log_likelihood));
    for (const auto& a : cf.natural_alternatives)
        text += fmt::format("  natural r_B={:<4} r_P={:<4} p={}  logL={}\n", a.r_b, a.r_p, num(a.p_bp),
                            num(a.log_likelihood));
    text += fmt::format("p_B + p_P = {}\n", num(rep.complementarity));
    std::string csv = "model,r1,r2,p,log_likelihood\n";
    csv += fmt::format("joint,{},,{},{}\n", csv_num(jf.r_a), csv_num(jf.p_a), csv_num(jf.log_likelihood));
    for (const auto& a : jf.natural_alternatives)
        csv += fmt::format("joint_natural,{},,{},{}\n", a.r, csv_num(a.p), csv_num(a.log_likelihood));
    csv += fmt::format("coupled,{},{},{},{}\n", csv_num(cf.r_b), csv_num(cf.r_p), csv_num(cf.p_bp),
                       csv_num(cf.log_likelihood));
    for (const auto& a : cf.natural_alternatives)
        csv += fmt::format("coupled_natural,{},{},{},{}\n", a.r_b, a.r_p, csv_num(a.p_bp), csv_num(a.log_likelihood));
    emit(c, j, text, csv);
}

void cmd_entropy(const Common& c) {
    const auto t = screened(c);
    ctfit::AlsOptions opt;
    opt.tol = c.tol;
    const auto f = ctfit::als_fit(t, opt);
    json j{{"populations", json::array()}};
    std::string text = fmt::format("{:<10}{:>10}{:>10}{:>10}{:>12}{:>10}\n", "factor", "shape", "scale", "q", "logL", "h");
    std::string csv = "population,shape,scale,q,log_likelihood,entropy\n";
    double h[2] = {0, 0};
    int k = 0;
    for (auto [name, v] : {std::pair{"bacteria", &f.a}, std::pair{"plants", &f.b}}) {
        const auto fit = ctfit::fit_gamma(*v);
        const auto g = std::get<ctfit::GammaParams>(fit.params);
        h[k++] = ctfit::gamma_entropy(g);
        j["populations"].push_back({{"population", name}, {"fit", ctfit::to_json_value(fit)}, {"entropy", h[k - 1]}});
        text += fmt::format("{:<10}{:>10}{:>10}{:>10}{:>12}{:>10}\n", name, num(g.shape), num(g.scale),
                            num(g.proportion()), num(fit.log_likelihood), num(h[k - 1]));
        csv += fmt::format("{},{},{},{},{},{}\n", name, csv_num(g.shape), csv_num(g.scale), csv_num(g.proportion()),
                           csv_num(fit.log_likelihood), csv_num(h[k - 1]));
    }
    j["entropy_ratio"] = h[1] / h[0];
    text += fmt::format("entropy ratio (plants / bacteria) = {}\n", num(h[1] / h[0]));
    emit(c, j, text, csv);
}

std::string pipeline_text(const ctfit::PipelineReport& r) {
    std::string s;
    s += fmt::format("Screening: X2 = {} (df {}), removed:", num(r.screening.initial.statistic), r.screening.initial.df);
    for (const auto& x : r.screening.removed) s += " " + x;
    s += fmt::format("; reduced X2 = {} (df {}, p = {})\n", num(r.screening.final_.statistic), r.screening.final_.df,
                     num(r.screening.final_.p_value));
    s += "\nFactors a:";
    for (double v : r.factors.a) s += " " + num(v);
    s += "\nFactors b:";
    for (double v : r.factors.b) s += " " + num(v);
    s += fmt::format("\nS2 = {}\n", num(r.factors.s_squared));

    s += fmt::format("\n{:<13}{:<26}{:>10}{:>12}{:>10}{:>12}{:>10}{:>12}\n", "family", "parameters", "K-S", "p_KS",
                     "A-D", "p_AD", "C-S", "p_CS");
    for (const auto& [name, f] : r.pooled_fits)
        s += fmt::format("{:<13}{:<26}{:>10}{:>12}{:>10}{:>12}{:>10}{:>12}\n", name, params_text(f.fit.params),
                         num(f.gof.ks_d), num(f.gof.p_ks), num(f.gof.ad_a2), num(f.gof.p_ad), num(f.gof.cs),
                         num(f.gof.p_cs));
    for (const auto& v : r.unfittable)
        if (v.rejected) s += fmt::format("{}: no MLE fit\n", ctfit::to_string(v.family));

    s += fmt::format("\n{:<18}{:>10}{:>10}{:>10}{:>10}{:>10}\n", "series", "logL", "lambda", "p_KS", "p_AD", "p_CS");
    for (const auto& f : r.series_fits)
        s += fmt::format("{:<18}{:>10}{:>10}{:>10}{:>10}{:>10}\n", f.label, num(f.result.fit.log_likelihood),
                         num(std::get<ctfit::PoissonParams>(f.result.fit.params).lambda), num(f.result.gof.p_ks),
                         num(f.result.gof.p_ad), num(f.result.gof.p_cs));
    s += fmt::format("mean lambda: bacteria {} plants {}; sum ln(1/p_CS) = {}\n", num(r.lambda_mean_bacteria),
                     num(r.lambda_mean_plants), num(r.series_sum_log_inv_pcs));

    for (const auto& g : r.gamma_of_lambdas) {
        s += fmt::format("\nGamma of lambda ({}): full MLE {}  logL {}\n", g.population, params_text(g.full_mle.fit.params),
                         num(g.full_mle.fit.log_likelihood));
        for (const auto& f : g.natural) {
            const auto p = std::get<ctfit::GammaParams>(f.fit.params);
            s += fmt::format("  r={:<4} p={} scale={} logL={} p_KS={} p_AD={}\n", p.shape, num(p.proportion()),
                             num(p.scale), num(f.fit.log_likelihood), num(f.gof.p_ks), num(f.gof.p_ad));
        }
    }
    s += "\nNegBin profile\n";
    for (const auto& f : r.negbin_profile) {
        const auto p = std::get<ctfit::NegBinParams>(f.fit.params);
        s += fmt::format("  r={:<4} p={} p/(1-p)={} logL={} p_KS={} p_AD={}\n", p.r, num(p.p), num(p.p / (1 - p.p)),
                         num(f.fit.log_likelihood), num(f.gof.p_ks), num(f.gof.p_ad));
    }
    s += fmt::format("\nJoint: r={} p={} logL={}\n", num(r.joint.r_a), num(r.joint.p_a), num(r.joint.log_likelihood));
    s += fmt::format("Coupled: r_B={} r_P={} p_BP={} logL={}\n", num(r.coupled.r_b), num(r.coupled.r_p),
                     num(r.coupled.p_bp), num(r.coupled.log_likelihood));
    s += fmt::format("p_B + p_P = {}\n", num(r.complementarity));
    s += "\nFactor populations\n";
    for (const auto& p : r.factor_populations)
        s += fmt::format("  {:<9} {} logL={} h={}\n", p.population, params_text(p.fit.fit.params),
                         num(p.fit.fit.log_likelihood), num(p.entropy));
    s += fmt::format("entropy ratio = {}\n", num(r.entropy_ratio));
    return s;
}

void cmd_pipeline(const Common& c) {
    if (c.format == Format::csv) throw usage_error("pipeline has no CSV form; use --format json or text");
    const auto rep = ctfit::run_pipeline(load(c), config_of(c));
    emit(c, ctfit::to_json(rep), pipeline_text(rep), {});
}

void cmd_curves(const Common& c, const std::string& out_dir, double step, double span) {
    auto cfg = config_of(c);
    cfg.grid_step = step;
    cfg.span_sigmas = span;
    const auto rep = ctfit::run_pipeline(load(c), cfg);
    std::filesystem::create_directories(out_dir);
    json j = json::object();
    std::string text;
    for (auto [name, curve] : {std::pair{"FB", &rep.fb}, std::pair{"FP", &rep.fp}, std::pair{"AA", &rep.aa}}) {
        const auto path = std::filesystem::path(out_dir) / (std::string(name) + ".csv");
        std::ofstream out(path);
        if (!out) throw usage_error("cannot write '" + path.string() + "'");
        out << ctfit::to_csv(*curve);
        j[name] = {{"path", path.string()}, {"points", curve->grid.size()}, {"mass", curve->mass}};
        text += fmt::format("{}  {} points  mass {}\n", path.string(), curve->grid.size(), num(curve->mass));
    }
    emit(c, j, text, text);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contingency-table factor analysis and distribution fitting"};
    app.require_subcommand(1);
    app.fallthrough();
    Common c;
    app.add_option("--input", c.input, "CSV table (default: embedded essential-oil fixture)")->check(CLI::ExistingFile);
    app.add_option("--format", c.format, "Output format")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, Format>{{"text", Format::text}, {"json", Format::json}, {"csv", Format::csv}}));
    app.add_option("--alpha", c.alpha, "Screening significance level")->check(CLI::Range(1e-12, 1.0 - 1e-12));
    app.add_option("--r-max", c.r_max, "Largest natural r searched for NegBin")->check(CLI::Range(1, 100000));
    app.add_option("--tol", c.tol, "ALS tolerance on S^2")->check(CLI::PositiveNumber);
    app.add_option("--seed", c.seed, "Reserved; no stochastic stage");
    app.add_flag("--no-screen", c.no_screen, "Use the table as given, without row screening");

    auto* indep = app.add_subcommand("independence", "Chi-square independence and row screening");
    auto* fact = app.add_subcommand("factorize", "Rank-1 factors by alternating least squares");
    std::string family, series, gof_series;
    auto* fit = app.add_subcommand("fit", "Fit one family to the pooled sample (or one series)");
    fit->add_option("family", family, "uniform|geometric|logarithmic|poisson|negbin|gamma|bernoulli|binomial|hypergeometric")
        ->required();
    fit->add_option("--series", series, "Row or column label to fit instead of the pooled sample");
    auto* gof = app.add_subcommand("gof", "Goodness-of-fit battery for the discrete families");
    gof->add_option("--series", gof_series, "Row or column label instead of the pooled sample");
    auto* assoc = app.add_subcommand("associate", "Joint NegBin+Gamma and coupled Gamma fits");
    auto* ent = app.add_subcommand("entropy", "Gamma fits of the factor populations and their entropies");
    auto* pipe = app.add_subcommand("pipeline", "Run the full analysis");
    std::string out_dir = ".";
    double step = 0.01;
    double span = 6.0;
    auto* curves = app.add_subcommand("curves", "Write FB.csv, FP.csv and AA.csv density curves");
    curves->add_option("--out-dir", out_dir, "Directory for the CSV files");
    curves->add_option("--step", step, "Grid step")->check(CLI::PositiveNumber);
    curves->add_option("--span", span, "Grid span in standard deviations")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "ctfit: usage: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*indep) cmd_independence(c);
        else if (*fact) cmd_factorize(c);
        else if (*fit) cmd_fit(c, family, series);
        else if (*gof) cmd_gof(c, gof_series);
        else if (*assoc) cmd_associate(c);
        else if (*ent) cmd_entropy(c);
        else if (*pipe) cmd_pipeline(c);
        else if (*curves) cmd_curves(c, out_dir, step, span);
    } catch (const usage_error& e) {
        std::cerr << "ctfit: usage: " << e.what() << '\n';
        return 2;
    } catch (const ctfit::numeric_error& e) {
        std::cerr << "ctfit: numeric: " << e.what() << '\n';
        return 4;
    } catch (const ctfit::error& e) {
        std::cerr << "ctfit: invalid input: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "ctfit: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
