#include <gtest/gtest.h>

#include <ctfit/mixture.hpp>

#include <random>

using namespace ctfit;

namespace {

ContingencyTable reduced() { return drop_rows(fixtures::essential_oils(), {"P. mirabilis", "P. aeruginosa"}); }

std::vector<double> bacteria_lambdas() {
    auto t = reduced();
    std::vector<double> v;
    for (std::size_t i = 0; i < t.rows(); ++i) v.push_back(t.row_series(i).mean());
    return v;
}

std::vector<double> plant_lambdas() {
    auto t = reduced();
    std::vector<double> v;
    for (std::size_t j = 0; j < t.cols(); ++j) v.push_back(t.col_series(j).mean());
    return v;
}

std::vector<double> all_lambdas() {
    auto v = bacteria_lambdas();
    auto p = plant_lambdas();
    v.insert(v.end(), p.begin(), p.end());
    return v;
}

std::vector<double> pooled() { return to_reals(reduced().pooled()); }

} // namespace

TEST(Mixture, MatchesClosedForm) {
    EXPECT_NEAR(negbin_via_mixture(11, 0.609, 17), mass(NegBinParams{11, 0.609}, 17), 1e-8);
    EXPECT_NEAR(negbin_via_mixture(1, 0.5, 0), 0.5, 1e-10);
    for (int x = 0; x <= 60; ++x)
        EXPECT_NEAR(negbin_via_mixture(12, 0.588, x), mass(NegBinParams{12, 0.588}, x), 1e-10) << x;
    for (double r : {0.7, 3.0, 29.103})
        for (int x : {0, 5, 40})
            EXPECT_NEAR(negbin_via_mixture(r, 0.37, x), mass(NegBinParams{r, 0.37}, x), 1e-10);
    EXPECT_EQ(negbin_via_mixture(2, 0.5, -1), 0.0);
    EXPECT_THROW(negbin_via_mixture(2, 1.5, 1), domain_error);
}

TEST(Joint, FitValues) {
    auto f = joint_negbin_gamma_mle(pooled(), all_lambdas());
    EXPECT_NEAR(f.r_a, 12.349, 1e-3);
    EXPECT_NEAR(f.p_a, 0.581, 1e-3);
    EXPECT_NEAR(f.scale(), 1.385, 1e-3);
    EXPECT_NEAR(f.log_likelihood, -348.399, 1e-3);
    ASSERT_EQ(f.natural_alternatives.size(), 2u);
    EXPECT_EQ(f.natural_alternatives[0].r, 12);
    EXPECT_NEAR(f.natural_alternatives[0].p, 0.588, 1e-3);
    EXPECT_NEAR(f.natural_alternatives[0].log_likelihood, -348.409, 1e-3);
    EXPECT_EQ(f.natural_alternatives[1].r, 13);
    EXPECT_NEAR(f.natural_alternatives[1].p, 0.568, 1e-3);
    EXPECT_NEAR(f.natural_alternatives[1].log_likelihood, -348.430, 1e-3);
}

TEST(Joint, GradientVanishes) {
    auto obs = pooled();
    auto lam = all_lambdas();
    auto f = joint_negbin_gamma_mle(obs, lam);
    auto ll = [&](double r, double p) { return joint_log_likelihood(obs, lam, r, p); };
    const double h = 1e-6;
    EXPECT_LT(std::abs((ll(f.r_a + h, f.p_a) - ll(f.r_a - h, f.p_a)) / (2 * h)), 1e-4);
    EXPECT_LT(std::abs((ll(f.r_a, f.p_a + h) - ll(f.r_a, f.p_a - h)) / (2 * h)), 1e-4);
    // Separable sum of the two log-likelihoods.
    double direct = log_likelihood(NegBinParams{f.r_a, f.p_a}, obs) +
                    log_likelihood(GammaParams{f.r_a, f.scale()}, lam);
    EXPECT_NEAR(direct, f.log_likelihood, 1e-9);
}

TEST(Joint, WithoutLambdasReducesToNegBin) {
    auto obs = pooled();
    std::vector<double> none;
    auto j = joint_negbin_gamma_mle(obs, none);
    auto nb = std::get<NegBinParams>(fit_negbin(obs).params);
    EXPECT_NEAR(j.r_a, nb.r, 1e-5);
    EXPECT_NEAR(j.p_a, nb.p, 1e-7);
}

TEST(Joint, Errors) {
    std::vector<double> empty, lam{1.0};
    EXPECT_THROW(joint_negbin_gamma_mle(empty, lam), validation_error);
    std::vector<double> zeros{0, 0, 0};
    EXPECT_THROW(joint_negbin_gamma_mle(zeros, lam), validation_error);
}

TEST(Coupled, FitValues) {
    auto f = coupled_gamma_mle(bacteria_lambdas(), plant_lambdas());
    EXPECT_NEAR(f.r_b, 29.103, 1e-3);
    EXPECT_NEAR(f.r_p, 10.030, 1e-3);
    EXPECT_NEAR(f.p_bp, 0.370, 1e-3);
    EXPECT_NEAR(f.log_likelihood, -54.000, 1e-3);
    ASSERT_EQ(f.natural_alternatives.size(), 4u);
    EXPECT_EQ(f.natural_alternatives[0].r_b, 29);
    EXPECT_EQ(f.natural_alternatives[0].r_p, 10);
    EXPECT_NEAR(f.natural_alternatives[0].p_bp, 0.370, 1e-3);
    EXPECT_NEAR(f.natural_alternatives[0].log_likelihood, -54.001, 1e-3);
    EXPECT_NEAR(f.natural_alternatives[1].log_likelihood, -54.029, 1e-3);
    EXPECT_NEAR(f.natural_alternatives[2].log_likelihood, -54.322, 1e-3);
    EXPECT_NEAR(f.natural_alternatives[3].log_likelihood, -54.599, 1e-3);
}

TEST(Coupled, GradientVanishes) {
    auto b = bacteria_lambdas();
    auto p = plant_lambdas();
    auto f = coupled_gamma_mle(b, p);
    auto ll = [&](double rb, double rp, double q) { return coupled_log_likelihood(b, p, rb, rp, q); };
    const double h = 1e-6;
    EXPECT_LT(std::abs((ll(f.r_b + h, f.r_p, f.q) - ll(f.r_b - h, f.r_p, f.q)) / (2 * h)), 1e-4);
    EXPECT_LT(std::abs((ll(f.r_b, f.r_p + h, f.q) - ll(f.r_b, f.r_p - h, f.q)) / (2 * h)), 1e-4);
    EXPECT_LT(std::abs((ll(f.r_b, f.r_p, f.q + h) - ll(f.r_b, f.r_p, f.q - h)) / (2 * h)), 1e-4);
    double direct = log_likelihood(GammaParams{f.r_b, f.q}, b) + log_likelihood(GammaParams{f.r_p, 1.0 / f.q}, p);
    EXPECT_NEAR(direct, f.log_likelihood, 1e-9);
}

TEST(Coupled, SymmetricSamplesGiveUnitScale) {
    std::vector<double> v{2.0, 3.5, 1.2, 4.4, 2.8};
    auto f = coupled_gamma_mle(v, v);
    EXPECT_NEAR(f.q, 1.0, 1e-8);
    EXPECT_NEAR(f.p_bp, 0.5, 1e-8);
    EXPECT_NEAR(f.r_b, f.r_p, 1e-6);
}

TEST(Coupled, GaugeCovariance) {
    auto b = bacteria_lambdas();
    auto p = plant_lambdas();
    auto f = coupled_gamma_mle(b, p);
    const double c = 1.7;
    for (double& x : b) x *= c;
    for (double& x : p) x /= c;
    auto g = coupled_gamma_mle(b, p);
    EXPECT_NEAR(g.q, c * f.q, 1e-7);
    EXPECT_NEAR(g.r_b, f.r_b, 1e-5);
    EXPECT_NEAR(g.r_p, f.r_p, 1e-5);
}

TEST(Coupled, InverseDigamma) {
    for (double x : {0.01, 0.5, 1.0, 3.0, 29.1, 1e4}) EXPECT_NEAR(inverse_digamma(special::digamma(x)), x, 1e-9 * x);
}

TEST(Complementarity, Values) {
    // Best natural-shape fits: r = 28 for bacteria, r = 10 for plants.
    auto b = std::get<GammaParams>(fit_gamma_fixed_shape(bacteria_lambdas(), 28).params);
    auto p = std::get<GammaParams>(fit_gamma_fixed_shape(plant_lambdas(), 10).params);
    EXPECT_NEAR(complementarity_check(b, p), 1.010, 1e-3);
    auto fb = std::get<GammaParams>(fit_gamma(bacteria_lambdas()).params);
    auto fp = std::get<GammaParams>(fit_gamma(plant_lambdas()).params);
    EXPECT_NEAR(complementarity_check(fb, fp), 1.0125, 1e-4);
    GammaParams g{5, 0.8};
    EXPECT_NEAR(complementarity_check(g, g), 2 * 0.8 / 1.8, 1e-15);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    auto lb = bacteria_lambdas();
    auto lp = plant_lambdas();
    for (int rep = 0; rep < 20; ++rep) {
        auto xb = lb, xp = lp;
        for (double& v : xb) v *= 1 + u(rng);
        for (double& v : xp) v *= 1 + u(rng);
        auto gb = std::get<GammaParams>(fit_gamma_fixed_shape(xb, 28).params);
        auto gp = std::get<GammaParams>(fit_gamma_fixed_shape(xp, 10).params);
        EXPECT_NEAR(complementarity_check(gb, gp), 1.010, 0.05);
    }
}

TEST(Convolution, ExponentialPair) {
    auto c = gamma_convolution_density({1, 1}, {1, 1}, 0.01, 6);
    for (std::size_t i = 0; i < c.grid.size(); i += 37)
        EXPECT_NEAR(c.values[i], density(GammaParams{2, 1}, c.grid[i]), 1e-6) << c.grid[i];
    EXPECT_NEAR(c.mass, 1.0, 1e-3);
}

TEST(Convolution, MonteCarloHistogram) {
    GammaParams g1{2, 0.5}, g2{3, 2};
    auto c = gamma_convolution_density(g1, g2, 0.01, 6);
    std::mt19937_64 rng(31337);
    std::gamma_distribution<double> d1(2, 0.5), d2(3, 2);
    const int n = 1'000'000;
    const double width = 1.0;
    std::vector<int> hist(40, 0);
    for (int i = 0; i < n; ++i) {
        double s = d1(rng) + d2(rng);
        auto k = static_cast<std::size_t>(s / width);
        if (k < hist.size()) ++hist[k];
    }
    auto interp = [&](double x) {
        auto k = static_cast<std::size_t>(x / 0.01);
        if (k + 1 >= c.grid.size()) return 0.0;
        double t = (x - c.grid[k]) / 0.01;
        return (1 - t) * c.values[k] + t * c.values[k + 1];
    };
    for (std::size_t k = 0; k < 20; ++k) {
        // Bin probability by Simpson's rule on the computed density.
        double a = k * width, b = a + width;
        double pr = (interp(a) + 4 * interp(0.5 * (a + b)) + interp(b)) * width / 6;
        double emp = static_cast<double>(hist[k]) / n;
        double se = std::sqrt(pr * (1 - pr) / n);
        EXPECT_NEAR(emp, pr, 5 * se + 2e-5) << k;
    }
}

TEST(Convolution, MomentsAdd) {
    GammaParams b{31.663, 0.137}, p{10.082, 0.392};
    auto c = gamma_convolution_density(b, p, 0.01, 6);
    std::vector<double> xf, x2f;
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
        xf.push_back(c.grid[i] * c.values[i]);
        x2f.push_back(c.grid[i] * c.grid[i] * c.values[i]);
    }
    double m1 = detail::trapezoid(c.grid, xf);
    double m2 = detail::trapezoid(c.grid, x2f);
    EXPECT_NEAR(m1, mean(b) + mean(p), 1e-3);
    EXPECT_NEAR(m2 - m1 * m1, variance(b) + variance(p), 1e-3);
    EXPECT_NEAR(m1, 8.29, 0.01);
}

TEST(Curves, GammaDensityAndCsv) {
    auto c = gamma_density_curve({31.663, 0.137}, 0.01, 6);
    EXPECT_NEAR(c.mass, 1.0, 1e-4);
    EXPECT_EQ(c.grid.front(), 0.0);
    EXPECT_GE(c.grid.back(), 31.663 * 0.137 + 6 * std::sqrt(31.663) * 0.137);
    auto csv = to_csv(c);
    EXPECT_EQ(csv.rfind("x,density\n", 0), 0u);
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), c.grid.size() + 1);
    EXPECT_THROW(gamma_density_curve({2, 1}, 0.0, 6), validation_error);
    EXPECT_THROW(gamma_density_curve({2, 1}, 0.01, -1), validation_error);
}
