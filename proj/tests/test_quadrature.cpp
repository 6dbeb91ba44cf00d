#include <ptreg/quadrature.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace ptreg;

namespace {

double factorial(int n)
{
    return std::tgamma(static_cast<double>(n) + 1.0);
}

// Mean of x^a y^b over the reference triangle (0,0), (1,0), (0,1).
double reference_mean(int a, int b)
{
    return 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2);
}

double rule_mean(const QuadratureRule& rule, int a, int b)
{
    double sum = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double x = rule.points[q][1];
        const double y = rule.points[q][2];
        sum += rule.weights[q] * std::pow(x, a) * std::pow(y, b);
    }
    return sum;
}

} // namespace

class RuleByDegree : public ::testing::TestWithParam<int> {};

TEST_P(RuleByDegree, WeightsSumToOneAndPointsAreInterior)
{
    const QuadratureRule rule = quadrature_rule(GetParam());
    ASSERT_EQ(rule.points.size(), rule.weights.size());
    EXPECT_NEAR(std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0), 1.0, 1e-14);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        EXPECT_GT(rule.weights[q], 0.0);
        EXPECT_NEAR(rule.points[q][0] + rule.points[q][1] + rule.points[q][2], 1.0, 1e-15);
        for (double l : rule.points[q]) {
            EXPECT_GT(l, 0.0);
            EXPECT_LT(l, 1.0);
        }
    }
}

TEST_P(RuleByDegree, ExactForMonomialsUpToDegree)
{
    const QuadratureRule rule = quadrature_rule(GetParam());
    EXPECT_GE(rule.degree, GetParam());
    for (int total = 0; total <= rule.degree; ++total)
        for (int a = 0; a <= total; ++a)
            EXPECT_NEAR(rule_mean(rule, a, total - a), reference_mean(a, total - a), 1e-14)
                << "x^" << a << " y^" << total - a;
}

TEST_P(RuleByDegree, NotExactOneDegreeHigher)
{
    const QuadratureRule rule = quadrature_rule(GetParam());
    const int d = rule.degree + 1;
    double worst = 0.0;
    for (int a = 0; a <= d; ++a)
        worst = std::max(worst, std::abs(rule_mean(rule, a, d - a) - reference_mean(a, d - a)));
    EXPECT_GT(worst, 1e-8);
}

INSTANTIATE_TEST_SUITE_P(Degrees, RuleByDegree, ::testing::Values(1, 2, 3, 4, 5, 6));

TEST(Quadrature, UnsupportedDegreeThrows)
{
    EXPECT_THROW(quadrature_rule(0), Error);
    EXPECT_THROW(quadrature_rule(7), Error);
}

TEST(EdgeQuadrature, GaussTwoPointIsCubicExact)
{
    const EdgeRule rule;
    for (int k = 0; k <= 3; ++k) {
        const double v = rule.weights[0] * std::pow(rule.points[0], k) + rule.weights[1] * std::pow(rule.points[1], k);
        EXPECT_NEAR(v, 1.0 / (k + 1), 1e-15);
    }
}
