#include <gtest/gtest.h>

#include <ctfit/independence.hpp>

using namespace ctfit;

namespace {

ContingencyTable rank_one() {
    Matrix<Count> m(3, 4);
    const Count u[3] = {1, 2, 3}, v[4] = {2, 4, 6, 8};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) m(i, j) = u[i] * v[j];
    return ContingencyTable::make({"a", "b", "c"}, {"w", "x", "y", "z"}, m);
}

ContingencyTable table2x2(Count a, Count b, Count c, Count d) {
    Matrix<Count> m(2, 2);
    m(0, 0) = a;
    m(0, 1) = b;
    m(1, 0) = c;
    m(1, 1) = d;
    return ContingencyTable::make({"r1", "r2"}, {"c1", "c2"}, m);
}

} // namespace

TEST(Independence, ExpectedRankOneIsExact) {
    auto t = rank_one();
    auto e = expected_counts(t);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(e(i, j), static_cast<double>(t(i, j)));
    auto chi = chi_square_independence(t);
    EXPECT_NEAR(chi.statistic, 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(chi.p_value, 1.0);
    for (const auto& r : row_contributions(t)) EXPECT_NEAR(r.chi.statistic, 0.0, 1e-12);
}

TEST(Independence, Expected2x2ByHand) {
    auto e = expected_counts(table2x2(1, 3, 2, 4));
    EXPECT_NEAR(e(0, 0), 1.2, 1e-12);
    EXPECT_NEAR(e(0, 1), 2.8, 1e-12);
    EXPECT_NEAR(e(1, 0), 1.8, 1e-12);
    EXPECT_NEAR(e(1, 1), 4.2, 1e-12);
}

TEST(Independence, ExpectedPreservesMargins) {
    auto t = fixtures::essential_oils();
    auto e = expected_counts(t);
    for (std::size_t i = 0; i < t.rows(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < t.cols(); ++j) s += e(i, j);
        EXPECT_NEAR(s / static_cast<double>(t.row_total(i)), 1.0, 1e-9);
    }
    for (std::size_t j = 0; j < t.cols(); ++j) {
        double s = 0;
        for (std::size_t i = 0; i < t.rows(); ++i) s += e(i, j);
        EXPECT_NEAR(s / static_cast<double>(t.col_total(j)), 1.0, 1e-9);
    }
}

TEST(Independence, FullTable) {
    auto chi = chi_square_independence(fixtures::essential_oils());
    EXPECT_NEAR(chi.statistic, 69.3, 0.05);
    EXPECT_EQ(chi.df, 90);
}

TEST(Independence, ReducedTable) {
    auto chi = chi_square_independence(drop_rows(fixtures::essential_oils(), {"P. mirabilis", "P. aeruginosa"}));
    EXPECT_NEAR(chi.statistic, 8.5, 0.05);
    EXPECT_EQ(chi.df, 72);
    EXPECT_GT(chi.p_value, 0.9999);
}

TEST(Independence, RowContributionsOfOutliers) {
    auto t = fixtures::essential_oils();
    auto rc = row_contributions(t);
    ASSERT_EQ(rc.size(), 11u);
    EXPECT_EQ(rc[9].label, "P. mirabilis");
    EXPECT_NEAR(rc[9].chi.statistic, 29.1, 0.05);
    EXPECT_EQ(rc[9].chi.df, 9);
    EXPECT_LT(rc[9].chi.p_value, 0.01);
    EXPECT_NEAR(rc[10].chi.statistic, 26.2, 0.05);
    EXPECT_LT(rc[10].chi.p_value, 0.02);
    double sum = 0;
    for (const auto& r : rc) sum += r.chi.statistic;
    EXPECT_NEAR(sum / chi_square_independence(t).statistic, 1.0, 1e-9);
}

TEST(Independence, DegenerateMargins) {
    EXPECT_THROW(chi_square_independence(table2x2(0, 0, 1, 1)), validation_error);
    EXPECT_THROW(expected_counts(table2x2(0, 0, 0, 0)), validation_error);
}

TEST(Independence, PValueDecreasesInStatistic) {
    double prev = 1.0;
    for (double s = 0.5; s < 200; s += 0.5) {
        double p = make_chi_square(s, 9).p_value;
        EXPECT_LE(p, prev);
        prev = p;
    }
}

TEST(Independence, ScreeningRemovesBothOutliers) {
    auto s = screen_rows(fixtures::essential_oils(), 0.05);
    EXPECT_EQ(s.removed, (std::vector<std::string>{"P. mirabilis", "P. aeruginosa"}));
    EXPECT_EQ(s.retained.rows(), 9u);
    EXPECT_EQ(s.steps.size(), 2u);
    EXPECT_NEAR(s.final_.statistic, 8.5, 0.05);
    // Same set as removing both in a single step.
    EXPECT_EQ(s.retained, drop_rows(fixtures::essential_oils(), {"P. mirabilis", "P. aeruginosa"}));
}

TEST(Independence, ScreeningKeepsRankOne) {
    auto s = screen_rows(rank_one(), 0.05);
    EXPECT_TRUE(s.removed.empty());
    EXPECT_EQ(s.retained, rank_one());
}

TEST(Independence, ScreeningTinyAlphaRemovesNothing) {
    EXPECT_TRUE(screen_rows(fixtures::essential_oils(), 1e-6).removed.empty());
}

TEST(Independence, ScreeningRejectsBadAlpha) {
    EXPECT_THROW(screen_rows(rank_one(), 0.0), validation_error);
    EXPECT_THROW(screen_rows(rank_one(), 1.0), validation_error);
}

TEST(Independence, ScreeningRefusesBelowTwoRows) {
    auto t = table2x2(100, 0, 0, 100);
    EXPECT_THROW(screen_rows(t, 0.5), validation_error);
}
