#include <gtest/gtest.h>

#include <ctfit/factorize.hpp>

#include <Eigen/Dense>

using namespace ctfit;

namespace {

ContingencyTable reduced() { return drop_rows(fixtures::essential_oils(), {"P. mirabilis", "P. aeruginosa"}); }

Eigen::MatrixXd to_eigen(const RealMatrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

} // namespace

TEST(Als, MatchesSvdOracle) {
    auto o = to_real(reduced());
    auto f = als_fit(o);
    ASSERT_TRUE(f.converged);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(o), Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXd best = svd.singularValues()(0) * svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
    Eigen::MatrixXd fit = to_eigen(fitted_matrix(f));
    EXPECT_LT((fit - best).norm() / best.norm(), 1e-8);
    // Equal-norm gauge: a = sqrt(sigma) |u|, b = sqrt(sigma) |v|.
    const double s = std::sqrt(svd.singularValues()(0));
    for (std::size_t i = 0; i < f.a.size(); ++i) EXPECT_NEAR(f.a[i], s * std::abs(svd.matrixU()(i, 0)), 1e-8);
    for (std::size_t j = 0; j < f.b.size(); ++j) EXPECT_NEAR(f.b[j], s * std::abs(svd.matrixV()(j, 0)), 1e-8);
    const double s2 = svd.singularValues().tail(svd.singularValues().size() - 1).squaredNorm();
    EXPECT_NEAR(f.s_squared, s2, 1e-8 * s2);
}

TEST(Als, ReducedTableFactors) {
    auto f = als_fit(reduced());
    const double a[] = {5.62287, 5.29094, 4.61792, 4.81988, 4.24158, 3.78259, 3.76740, 3.48455, 3.27188};
    const double b[] = {4.49712, 4.30220, 3.15035, 2.87205, 2.30585, 3.77545, 3.93660, 2.61591, 6.60157, 5.57754};
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(f.a[i], a[i], 1e-5);
    for (int j = 0; j < 10; ++j) EXPECT_NEAR(f.b[j], b[j], 1e-5);
}

TEST(Als, RankOneIsExact) {
    RealMatrix o(3, 4);
    const double a[] = {1, 2, 3}, b[] = {4, 1, 2, 5};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) o(i, j) = a[i] * b[j];
    auto f = als_fit(o);
    EXPECT_LT(f.s_squared, 1e-20);
    EXPECT_LE(f.iterations, 3);
    EXPECT_NEAR(f.a[1] / f.a[0], 2.0, 1e-12);
    EXPECT_NEAR(f.b[3] / f.b[1], 5.0, 1e-12);
}

TEST(Als, NormalEquations) {
    auto o = to_real(reduced());
    auto f = als_fit(o);
    for (std::size_t j = 0; j < f.b.size(); ++j) {
        double g = 0;
        for (std::size_t i = 0; i < f.a.size(); ++i) g += f.a[i] * (o(i, j) - f.a[i] * f.b[j]);
        EXPECT_NEAR(g, 0.0, 1e-7);
    }
    for (std::size_t i = 0; i < f.a.size(); ++i) {
        double g = 0;
        for (std::size_t j = 0; j < f.b.size(); ++j) g += f.b[j] * (o(i, j) - f.a[i] * f.b[j]);
        EXPECT_NEAR(g, 0.0, 1e-7);
    }
}

TEST(Als, BeatsConstantModel) {
    auto o = to_real(reduced());
    auto f = als_fit(o);
    double mean = 0;
    for (double v : o.values()) mean += v;
    mean /= static_cast<double>(o.values().size());
    double ss = 0;
    for (double v : o.values()) ss += (v - mean) * (v - mean);
    EXPECT_LT(f.s_squared, ss);
}

TEST(Als, MonotoneDescent) {
    std::vector<double> trace;
    AlsOptions opt;
    opt.trace = &trace;
    opt.initial_a = {1, 9, 2, 8, 3, 7, 4, 6, 5};
    als_fit(reduced(), opt);
    ASSERT_GE(trace.size(), 2u);
    for (std::size_t k = 1; k < trace.size(); ++k) EXPECT_LE(trace[k], trace[k - 1] * (1 + 1e-14));
}

TEST(Als, StartInvariance) {
    auto base = als_fit(reduced());
    AlsOptions opt;
    opt.initial_a = {0.1, 50, 3, 3, 3, 3, 3, 3, 7};
    auto other = als_fit(reduced(), opt);
    for (std::size_t i = 0; i < base.a.size(); ++i) EXPECT_NEAR(base.a[i], other.a[i], 1e-8);
    for (std::size_t j = 0; j < base.b.size(); ++j) EXPECT_NEAR(base.b[j], other.b[j], 1e-8);
}

TEST(Gauge, Normalize) {
    FactorPair f{{2.0}, {8.0}};
    auto g = gauge_normalize(f);
    EXPECT_DOUBLE_EQ(g.a[0], 4.0);
    EXPECT_DOUBLE_EQ(g.b[0], 4.0);
    auto h = gauge_normalize(g);
    EXPECT_DOUBLE_EQ(h.a[0], g.a[0]);
    FactorPair z{{0.0}, {1.0}};
    EXPECT_THROW(gauge_normalize(z), validation_error);
}

TEST(Gauge, PrintedFactorsNormalizeToFit) {
    // The printed factors live in another gauge; after normalization they agree with the fit.
    FactorPair printed{{5.637, 5.3042, 4.6295, 4.832, 4.2522, 3.7921, 3.7769, 3.4933, 3.2801},
                       {4.4859, 4.2914, 3.1425, 2.8649, 2.3001, 3.766, 3.9267, 2.6094, 6.585, 5.5636}};
    auto p = gauge_normalize(printed);
    auto f = als_fit(reduced());
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(p.a[i], f.a[i], 1e-3);
    for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(p.b[j], f.b[j], 1e-3);
}

TEST(Als, Errors) {
    RealMatrix z(2, 2, 0.0);
    z(0, 0) = 1;
    z(0, 1) = 1;
    EXPECT_THROW(als_fit(z), validation_error);
    RealMatrix neg(2, 2, 1.0);
    neg(1, 1) = -1;
    EXPECT_THROW(als_fit(neg), validation_error);
    AlsOptions opt;
    opt.initial_a = {1, 2, 3};
    EXPECT_THROW(als_fit(RealMatrix(2, 2, 1.0), opt), validation_error);
    AlsOptions bad;
    bad.tol = 0;
    EXPECT_THROW(als_fit(RealMatrix(2, 2, 1.0), bad), validation_error);
    FactorPair f{{1, 2}, {1}};
    EXPECT_THROW(residual(f, RealMatrix(2, 2, 1.0)), validation_error);
}
