#include <gtest/gtest.h>

#include <ctfit/pipeline.hpp>

using namespace ctfit;

namespace {

ContingencyTable rank_one() {
    const Count a[] = {1, 2, 3, 5};
    const Count b[] = {2, 5, 9, 13, 4};
    Matrix<Count> m(4, 5);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j) m(i, j) = a[i] * b[j];
    return ContingencyTable::make({"r1", "r2", "r3", "r4"}, {"c1", "c2", "c3", "c4", "c5"}, std::move(m));
}

PipelineConfig no_curves() {
    PipelineConfig c;
    c.curves = false;
    return c;
}

} // namespace

TEST(Pipeline, RankOneSynthetic) {
    auto rep = run_pipeline(rank_one(), no_curves());
    EXPECT_TRUE(rep.screening.removed.empty());
    EXPECT_NEAR(rep.screening.final_.statistic, 0.0, 1e-12);
    EXPECT_LT(rep.factors.s_squared, 1e-18);
    EXPECT_NEAR(rep.factors.a[3] / rep.factors.a[0], 5.0, 1e-10);
    EXPECT_EQ(rep.series_fits.size(), 9u);
    EXPECT_EQ(rep.factor_populations.size(), 2u);
    EXPECT_TRUE(rep.aa.grid.empty());
}

TEST(Pipeline, FixtureStages) {
    auto rep = run_pipeline(fixtures::essential_oils());
    EXPECT_EQ(rep.screening.removed, (std::vector<std::string>{"P. mirabilis", "P. aeruginosa"}));
    EXPECT_EQ(rep.factor_rows.size(), 9u);
    EXPECT_EQ(rep.pooled_fits.size(), 5u);
    EXPECT_EQ(rep.pooled_fits[3].first, "negbin");
    EXPECT_EQ(std::get<NegBinParams>(rep.pooled_fits[3].second.fit.params).r, 11.0);
    EXPECT_EQ(rep.series_fits.size(), 19u);
    EXPECT_EQ(rep.gamma_of_lambdas[0].population, "all");
    EXPECT_EQ(rep.negbin_profile.size(), 12u);
    EXPECT_NEAR(rep.joint.r_a, 12.349, 1e-3);
    EXPECT_NEAR(rep.coupled.r_b, 29.103, 1e-3);
    EXPECT_NEAR(rep.complementarity, 1.010, 1e-3);
    EXPECT_NEAR(rep.entropy_ratio, 1.404, 1e-3);
    EXPECT_NEAR(rep.aa.mass, 1.0, 1e-3);
    for (const auto& u : rep.unfittable) EXPECT_TRUE(u.rejected);
}

TEST(Pipeline, ScreeningDisabledOnReducedTableMatches) {
    auto screened = run_pipeline(fixtures::essential_oils(), no_curves());
    auto cfg = no_curves();
    cfg.screening = false;
    auto direct = run_pipeline(drop_rows(fixtures::essential_oils(), {"P. mirabilis", "P. aeruginosa"}), cfg);
    EXPECT_EQ(screened.factors.a, direct.factors.a);
    EXPECT_EQ(screened.factors.b, direct.factors.b);
    EXPECT_EQ(screened.joint.log_likelihood, direct.joint.log_likelihood);
    EXPECT_EQ(screened.coupled.q, direct.coupled.q);
    EXPECT_EQ(screened.series_sum_log_inv_pcs, direct.series_sum_log_inv_pcs);
    EXPECT_TRUE(direct.screening.removed.empty());
}

TEST(Pipeline, ErrorsCarryStageName) {
    Matrix<Count> m(3, 3, 5);
    auto flat = ContingencyTable::make({"a", "b", "c"}, {"x", "y", "z"}, std::move(m));
    auto cfg = no_curves();
    cfg.screening = false;
    try {
        run_pipeline(flat, cfg);
        FAIL() << "expected a numeric error";
    } catch (const numeric_error& e) {
        EXPECT_EQ(std::string(e.what()).rfind("pooled_fits: ", 0), 0u) << e.what();
    }
    Matrix<Count> z(2, 2, 0);
    z(0, 0) = 3;
    z(0, 1) = 4;
    auto zero_row = ContingencyTable::make({"a", "b"}, {"x", "y"}, std::move(z));
    EXPECT_THROW(run_pipeline(zero_row, cfg), validation_error);
}

TEST(Pipeline, JsonIsDeterministic) {
    auto cfg = no_curves();
    auto a = to_json(run_pipeline(fixtures::essential_oils(), cfg)).dump();
    auto b = to_json(run_pipeline(fixtures::essential_oils(), cfg)).dump();
    EXPECT_EQ(a, b);
    auto j = json::parse(a);
    EXPECT_EQ(j["schema_version"], report_schema_version);
    for (const char* k : {"screening", "factors", "pooled_fits", "series_fits", "gamma_of_lambdas", "negbin_profile",
                          "associations", "factor_populations", "entropy_ratio"})
        EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_TRUE(j["curves"].is_null());
}
