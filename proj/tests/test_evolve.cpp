#include "support.hpp"

#include "qfb/evolve.hpp"
#include "qfb/quadrature.hpp"

#include <gtest/gtest.h>

using namespace qfb;
using namespace qfb::testing;

TEST(TimeGridTest, NodesAndModes) {
    const auto u = TimeGrid::uniform(2.0, 5);
    EXPECT_EQ(u.size(), 5);
    EXPECT_DOUBLE_EQ(u.nodes().front(), 0.0);
    EXPECT_DOUBLE_EQ(u.nodes().back(), 2.0);
    EXPECT_DOUBLE_EQ(u.step(), 0.5);
    const auto g = TimeGrid::graded(4.0, 5);
    EXPECT_DOUBLE_EQ(g.nodes()[1], 0.25);
    for (std::size_t k = 1; k < g.nodes().size(); ++k) EXPECT_GT(g.nodes()[k], g.nodes()[k - 1]);
    EXPECT_EQ(TimeGrid::uniform(0.0, 10).size(), 1);
    EXPECT_THROW(TimeGrid::uniform(1.0, 1), InputError);
    EXPECT_THROW(TimeGrid::uniform(-1.0, 3), InputError);
}

TEST(Propagate, ZeroTimeReturnsInitialState) {
    const auto rho0 = DensityMatrix::pure(excited());
    const auto p = propagate(lindblad(two_level_atom({})), rho0, TimeGrid::uniform(0.0, 3));
    ASSERT_EQ(p.states.size(), 1u);
    EXPECT_EQ(p.states[0].op(), rho0.op());
}

TEST(Propagate, PureDecay) {
    const OpenSystem sys = two_level_atom({0.0, 0.0, 1.0});
    const auto p = propagate(lindblad(sys), DensityMatrix::pure(excited()), TimeGrid::uniform(1.0, 11));
    const auto pop = expectation_series(p, excited() * excited().adjoint());
    EXPECT_NEAR(pop.back(), std::exp(-1.0), 1e-9);
    for (std::size_t k = 0; k < pop.size(); ++k) EXPECT_NEAR(pop[k], std::exp(-0.1 * static_cast<double>(k)), 1e-9);
}

TEST(Propagate, JumpFeedbackStatesStayPhysical) {
    const OpenSystem sys = two_level_atom({});
    const auto p = propagate(jump_fb(sys, JumpFB{{1.0}, {pauli_x()}}), DensityMatrix::pure(ground()),
                             TimeGrid::uniform(5.0, 101));
    for (const auto& s : p.states) {
        EXPECT_NEAR(s.op().trace().real(), 1.0, 1e-10);
        Eigen::SelfAdjointEigenSolver<Operator> es(s.op(), Eigen::EigenvaluesOnly);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    }
}

TEST(Propagate, UniformAndGradedAgree) {
    const OpenSystem sys = two_level_atom({});
    const SuperOperator g = homodyne_fb(sys, HomodyneFB{{0.5}, pauli_x()});
    const auto rho0 = DensityMatrix::pure(ground());
    const auto a = propagate(g, rho0, TimeGrid::uniform(2.0, 21));
    const auto b = propagate(g, rho0, TimeGrid::graded(2.0, 21));
    EXPECT_LT(trace_distance(a.states.back().op(), b.states.back().op()), 1e-12);
    ASSERT_TRUE(a.step_propagator.has_value());
    EXPECT_FALSE(b.step_propagator.has_value());
}

TEST(Propagate, SemigroupProperty) {
    Rng rng(31);
    const Case c = random_case(rng, 2);
    const SuperOperator g = generator(c.sys, c.scheme);
    const auto first = propagate(g, c.rho0, TimeGrid::uniform(0.7, 8)).states.back();
    const auto second = propagate(g, first, TimeGrid::uniform(0.4, 5)).states.back();
    const auto direct = propagate(g, c.rho0, TimeGrid::uniform(1.1, 12)).states.back();
    EXPECT_LT(trace_distance(second.op(), direct.op()), 1e-10);
}

TEST(Propagate, RejectsDimensionMismatch) {
    EXPECT_THROW(propagate(lindblad(two_level_atom({})), DensityMatrix::maximally_mixed(3), TimeGrid::uniform(1, 3)),
                 DimensionError);
}

TEST(SteadyState, PureDecayGoesToGround) {
    const auto ss = steady_state(lindblad(two_level_atom({0.0, 0.0, 1.0})));
    EXPECT_LT(max_abs(ss.op() - ground() * ground().adjoint()), 1e-10);
}

TEST(SteadyState, UnitaryGeneratorIsDegenerate) {
    EXPECT_THROW(steady_state(lindblad(make_system(pauli_z()))), NumericalError);
}

TEST(SteadyState, MatchesLongTimePropagation) {
    const SuperOperator g = lindblad(two_level_atom({}));
    const auto late = propagate(g, DensityMatrix::pure(excited()), TimeGrid::uniform(200.0, 2)).states.back();
    EXPECT_LT(trace_distance(late.op(), steady_state(g).op()), 1e-8);
}

TEST(SteadyState, FixedPointOfEvolution) {
    Rng rng(32);
    for (int k = 0; k < 4; ++k) {
        const Case c = random_case(rng, k);
        const SuperOperator g = generator(c.sys, c.scheme);
        const auto ss = steady_state(g);
        const auto later = propagate(g, ss, TimeGrid::uniform(3.0, 2)).states.back();
        EXPECT_LT(trace_distance(later.op(), ss.op()), 1e-9) << c.name;
    }
}

TEST(Expectation, IdentityGivesOnes) {
    const auto p = propagate(lindblad(two_level_atom({})), DensityMatrix::pure(ground()), TimeGrid::uniform(1, 5));
    for (const double e : expectation_series(p, identity(2))) EXPECT_NEAR(e, 1.0, 1e-12);
    EXPECT_THROW(expectation_series(p, cplx(0, 1) * pauli_x()), InputError);
}

TEST(Expectation, QuadratureOfEnergyIsConsistent) {
    // Integral of <H> on a fine Simpson lattice against a coarser one refined twice.
    const OpenSystem sys = two_level_atom({});
    const SuperOperator g = lindblad(sys);
    const auto rho0 = DensityMatrix::pure(ground());
    const auto fine = expectation_series(propagate(g, rho0, TimeGrid::uniform(1.0, 801)), sys.H);
    const auto coarse = expectation_series(propagate(g, rho0, TimeGrid::uniform(1.0, 401)), sys.H);
    const double a = integrate(fine, 1.0 / 800, Rule::Simpson);
    const double b = integrate(coarse, 1.0 / 400, Rule::Simpson);
    EXPECT_NEAR(a, b, 1e-8);
    const auto cum = cumulative_integral(fine, 1.0 / 800, Rule::Simpson);
    EXPECT_NEAR(cum.back(), a, 1e-12);
    // Derivative of the running integral recovers the integrand.
    const double deriv = (cum[402] - cum[398]) / (4.0 / 800);
    EXPECT_NEAR(deriv, fine[400], 1e-6);
}

TEST(Quadrature, RulesAreExactOnLowOrderPolynomials) {
    std::vector<double> f;
    const int n = 10;  // even node count exercises the closing 3/8 panel
    const double h = 0.1;
    for (int k = 0; k < n; ++k) f.push_back(std::pow(h * k, 3));
    const double exact = std::pow(h * (n - 1), 4) / 4.0;
    EXPECT_NEAR(integrate(f, h, Rule::Simpson), exact, 1e-14);
    const auto cum = cumulative_integral(f, h, Rule::Simpson);
    for (int k = 2; k < n; ++k) EXPECT_NEAR(cum[static_cast<std::size_t>(k)], std::pow(h * k, 4) / 4.0, 1e-14);
    std::vector<double> lin{0.0, 1.0, 2.0, 3.0};
    EXPECT_NEAR(integrate(lin, 1.0, Rule::Trapezoid), 4.5, 1e-15);
}

TEST(Quadrature, SpecValidation) {
    QuadratureSpec q;
    q.n = 400;
    EXPECT_THROW(q.validate(), InputError);
    q.n = 2;
    q.rule = Rule::Trapezoid;
    EXPECT_THROW(q.validate(), InputError);
    EXPECT_EQ(QuadratureSpec{}.refined().n, 801);
}
