#include <gtest/gtest.h>

#include "property_checks.hpp"

using namespace ctfit::props;

TEST(Properties, CdfMonotone) { EXPECT_EQ(cdf_monotone(), std::nullopt); }
TEST(Properties, MassNormalized) { EXPECT_EQ(mass_normalized(), std::nullopt); }
TEST(Properties, MleStationary) { EXPECT_EQ(mle_stationary(), std::nullopt); }
TEST(Properties, CombinePairIdentity) { EXPECT_EQ(combine_pair_identity(), std::nullopt); }
TEST(Properties, AlsDescent) { EXPECT_EQ(als_descent(), std::nullopt); }
TEST(Properties, ConvolutionMoments) { EXPECT_EQ(convolution_moments(), std::nullopt); }

TEST(Properties, OtherSeeds) {
    for (std::uint64_t s : {101u, 202u}) {
        EXPECT_EQ(mass_normalized(s), std::nullopt);
        EXPECT_EQ(combine_pair_identity(s), std::nullopt);
        EXPECT_EQ(als_descent(s), std::nullopt);
    }
}
