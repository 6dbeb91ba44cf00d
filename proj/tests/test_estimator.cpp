#include <ptreg/estimator.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace ptreg;

namespace {

// Square [1/4, 3/4]^2 split along the diagonal (1/4,1/4)-(3/4,3/4); every vertex is a dof.
Mesh interior_square()
{
    return make_mesh({{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}}, {{0, 1, 2}, {0, 2, 3}});
}

Mesh uniform_refined(int times)
{
    Mesh m = uniform_initial_mesh();
    for (int k = 0; k < times; ++k) {
        std::vector<Index> all(static_cast<std::size_t>(m.triangle_count()));
        std::iota(all.begin(), all.end(), 0);
        m = refine(m, all);
    }
    return m;
}

ProblemSpec harmonic_problem()
{
    ProblemSpec p = linear_problem();
    p.source = [](double, double) { return 0.0; };
    return p;
}

} // namespace

TEST(Indicators, ZeroFieldAndSource)
{
    const Mesh m = uniform_initial_mesh();
    const FeSpace s(m);
    const auto field = element_indicators(s, Vector::Zero(s.dof_count()), harmonic_problem(), quadrature_rule(4));
    ASSERT_EQ(field.eta_sq.size(), 144u);
    for (std::size_t t = 0; t < field.eta_sq.size(); ++t) {
        EXPECT_EQ(field.eta_sq[t], 0.0);
        EXPECT_EQ(field.zeta_sq[t], 0.0);
    }
    EXPECT_EQ(global_estimator(field), 0.0);
}

TEST(Indicators, LinearFieldIsDiscreteHarmonic)
{
    const Mesh m = refine(interior_square(), std::vector<Index>{0});
    const FeSpace s(m);
    ASSERT_EQ(s.dof_count(), m.vertex_count());
    const Vector u = s.interpolate([](double x, double y) { return 3.0 * x - 2.0 * y + 1.0; });
    const auto field = element_indicators(s, u, harmonic_problem(), quadrature_rule(4));
    for (double e : field.eta_sq)
        EXPECT_NEAR(e, 0.0, 1e-24);
}

TEST(Indicators, HandComputedFluxJump)
{
    const Mesh m = interior_square();
    const FeSpace s(m);
    Vector u = Vector::Zero(s.dof_count());
    u[s.dof_of_vertex(1)] = 1.0; // hat at (3/4, 1/4): gradient (2, -2) on the first triangle only
    const auto field = element_indicators(s, u, harmonic_problem(), quadrature_rule(4));
    // jump 2 sqrt(2) on the diagonal of length sqrt(2)/2: h |E| [flux]^2 = 4, half to each side
    EXPECT_NEAR(field.zeta_sq[0], 2.0, 1e-14);
    EXPECT_NEAR(field.zeta_sq[1], 2.0, 1e-14);
    EXPECT_NEAR(field.eta_sq[0], 2.0, 1e-14);
    EXPECT_NEAR(global_estimator(field), 2.0, 1e-14);
}

TEST(Indicators, InteriorTermOfConstantSource)
{
    const Mesh m = uniform_initial_mesh();
    const FeSpace s(m);
    ProblemSpec p = linear_problem();
    p.source = [](double, double) { return 1.0; };
    const auto field = element_indicators(s, Vector::Zero(s.dof_count()), p, quadrature_rule(2));
    for (Index t = 0; t < m.triangle_count(); ++t) {
        const auto g = element_geometry(m, t);
        EXPECT_NEAR(field.eta_sq[static_cast<std::size_t>(t)], g.diameter * g.diameter * g.area, 1e-16);
    }
}

TEST(Indicators, NonlinearLawEntersThroughDerivativeAndFlux)
{
    const Mesh m = uniform_refined(1);
    const FeSpace s(m);
    const ProblemSpec ex2 = example2();
    const Vector u = s.interpolate(ex2.exact->value);
    const auto field = element_indicators(s, u, ex2, quadrature_rule(4));
    const ProblemSpec lin = linear_problem();
    const auto reference = element_indicators(s, u, lin, quadrature_rule(4));
    EXPECT_GT(global_estimator(field), 10.0 * global_estimator(reference));
    for (std::size_t t = 0; t < field.eta_sq.size(); ++t)
        EXPECT_GE(field.eta_sq[t], field.zeta_sq[t]);
}

TEST(GlobalEstimator, Pythagorean)
{
    IndicatorField f;
    f.eta_sq = {9.0, 16.0};
    EXPECT_DOUBLE_EQ(global_estimator(f), 5.0);
    f.eta_sq = {2.0};
    EXPECT_DOUBLE_EQ(global_estimator(f), std::sqrt(2.0));
    f.eta_sq = {0.0, 0.0, 0.0};
    EXPECT_EQ(global_estimator(f), 0.0);
}

TEST(ErrorNorms, ZeroApproximationOfSineProduct)
{
    const Mesh m = uniform_refined(3);
    const FeSpace s(m);
    const ProblemSpec p = example2();
    const ErrorNorms e = error_norms(s, Vector::Zero(s.dof_count()), p.exact);
    EXPECT_NEAR(e.l2, 0.5, 1e-6);
    EXPECT_NEAR(e.h1, M_PI / std::sqrt(2.0), 1e-5);
}

TEST(ErrorNorms, LinearExactIsReproduced)
{
    const Mesh m = interior_square();
    const FeSpace s(m);
    const ExactSolution exact{[](double x, double y) { return 2.0 * x + y; },
                              [](double, double) { return Point{2.0, 1.0}; }};
    // Vertices are all dofs here, so the interpolant is the linear function itself.
    const ErrorNorms e = error_norms(s, s.interpolate(exact.value), exact);
    EXPECT_NEAR(e.l2, 0.0, 1e-14);
    EXPECT_NEAR(e.h1, 0.0, 1e-14);
}

TEST(ErrorNorms, InterpolationRatesUnderHalving)
{
    const ProblemSpec p = example2();
    const Mesh coarse = uniform_refined(2);
    const Mesh fine = uniform_refined(4);
    const FeSpace sc(coarse);
    const FeSpace sf(fine);
    const ErrorNorms ec = error_norms(sc, sc.interpolate(p.exact->value), p.exact);
    const ErrorNorms ef = error_norms(sf, sf.interpolate(p.exact->value), p.exact);
    // Two bisection rounds halve h.
    EXPECT_NEAR(ec.l2 / ef.l2, 4.0, 0.4);
    EXPECT_NEAR(ec.h1 / ef.h1, 2.0, 0.2);
}

TEST(ErrorNorms, RequireExactSolutionAndAccurateRule)
{
    const Mesh m = uniform_initial_mesh();
    const FeSpace s(m);
    EXPECT_THROW(error_norms(s, Vector::Zero(s.dof_count()), std::nullopt), Error);
    EXPECT_THROW(error_norms(s, Vector::Zero(s.dof_count()), example2().exact, quadrature_rule(2)), Error);
}
