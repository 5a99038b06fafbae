#include "support.hpp"

#include "qfb/activity.hpp"
#include "qfb/trajectories.hpp"

#include <gtest/gtest.h>

using namespace qfb;
using namespace qfb::testing;

namespace {

TrajectoryConfig config(std::int64_t n, double t_end, double dt = 1e-3, std::uint64_t seed = 7) {
    TrajectoryConfig c;
    c.n_traj = n;
    c.t_end = t_end;
    c.dt = dt;
    c.seed = seed;
    c.threads = 1;
    return c;
}

double stderr_of_mean(const TrajectoryStats& s) { return std::sqrt(s.variance / static_cast<double>(s.n)); }

}  // namespace

TEST(JumpEnsemble, SingleEmissionFromExcitedState) {
    const OpenSystem sys = two_level_atom({0.0, 0.0, 1.0});
    const auto st = run_jump_ensemble(sys, DensityMatrix::pure(excited()), config(200, 25.0, 1e-2));
    EXPECT_DOUBLE_EQ(st.mean, 1.0);
    EXPECT_DOUBLE_EQ(st.variance, 0.0);
    EXPECT_DOUBLE_EQ(st.per_channel_counts.at(0), 1.0);  // mean count per channel
}

TEST(JumpEnsemble, NoChannelsNoCounts) {
    const OpenSystem sys = make_system(pauli_x());
    const auto st = run_jump_ensemble(sys, DensityMatrix::pure(ket(2, 0)), config(10, 1.0));
    EXPECT_EQ(st.mean, 0.0);
    EXPECT_EQ(st.variance, 0.0);
}

TEST(JumpEnsemble, SteadyMeanMatchesRate) {
    const OpenSystem sys = two_level_atom({});
    const JumpFB fb{{1.0}, {pauli_x()}};
    const auto ss = steady_state(jump_fb(sys, fb));
    const auto st = run_jump_ensemble(sys, fb, ss, config(20000, 1.0));
    const double expected = 1.0 * dN_dtau(sys, fb, ss);
    EXPECT_NEAR(st.mean, expected, 3.0 * stderr_of_mean(st));
}

TEST(JumpEnsemble, MeanCountMatchesClassicalActivity) {
    const OpenSystem sys = two_level_atom({});
    const JumpFB fb{{1.0}, {pauli_x()}};
    const auto rho0 = DensityMatrix::pure(ground());
    const auto st = run_jump_ensemble(sys, fb, rho0, config(20000, 1.0, 1e-3, 3));
    EXPECT_NEAR(st.mean, classical_activity(sys, fb, rho0, 1.0), 3.0 * stderr_of_mean(st));
}

TEST(JumpEnsemble, AverageStateTracksMasterEquation) {
    const OpenSystem sys = two_level_atom({});
    const JumpFB fb{{1.0}, {pauli_x()}};
    const auto rho0 = DensityMatrix::pure(ground());
    auto cfg = config(20000, 1.0);
    cfg.sample_times = {0.5};
    const auto st = run_jump_ensemble(sys, fb, rho0, cfg);
    ASSERT_EQ(st.mean_states.size(), 2u);
    const SuperOperator g = jump_fb(sys, fb);
    for (std::size_t k = 0; k < 2; ++k) {
        const Operator exact = devectorize(expm(g.matrix(), st.sample_times[k]) * vectorize(rho0.op()), 2);
        EXPECT_LT(trace_distance(st.mean_states[k], exact), 1.5e-2);
    }
}

TEST(JumpEnsemble, DeterministicAcrossThreadCounts) {
    const OpenSystem sys = two_level_atom({});
    const JumpFB fb{{0.4}, {pauli_x()}};
    const auto rho0 = DensityMatrix::maximally_mixed(2);
    auto a = config(1000, 0.5, 1e-3, 11);
    auto b = a;
    b.threads = 3;
    const auto sa = run_jump_ensemble(sys, fb, rho0, a);
    const auto sb = run_jump_ensemble(sys, fb, rho0, b);
    const auto sc = run_jump_ensemble(sys, fb, rho0, a);
    EXPECT_EQ(sa.values, sb.values);
    EXPECT_EQ(sa.values, sc.values);
    EXPECT_EQ(sa.mean, sb.mean);
    EXPECT_EQ(sa.variance, sb.variance);
    auto other = a;
    other.seed = 12;
    EXPECT_NE(run_jump_ensemble(sys, fb, rho0, other).values, sa.values);
}

TEST(JumpEnsemble, RecordsAreOrderedPerTrajectory) {
    const OpenSystem sys = two_level_atom({1.0, 2.0, 2.0});
    auto cfg = config(20, 2.0);
    cfg.record_jumps = true;
    const auto st = run_jump_ensemble(sys, DensityMatrix::pure(ground()), cfg);
    ASSERT_FALSE(st.records.empty());
    double total = 0.0;
    for (std::size_t k = 0; k < st.records.size(); ++k) {
        if (k && st.records[k].trajectory == st.records[k - 1].trajectory) {
            EXPECT_GE(st.records[k].t, st.records[k - 1].t);
            EXPECT_GT(st.records[k].n_running, st.records[k - 1].n_running);
        }
        EXPECT_EQ(st.records[k].channel, 0);
    }
    for (const double v : st.values) total += v;
    EXPECT_EQ(static_cast<double>(st.records.size()), total);
}

TEST(JumpEnsemble, PNormsAreMonotone) {
    const OpenSystem sys = two_level_atom({});
    auto cfg = config(2000, 1.0);
    cfg.p_values = {1.0, 1.5, 2.0, 3.0};
    const auto st = run_jump_ensemble(sys, DensityMatrix::pure(ground()), cfg);
    double prev = 0.0;
    for (const auto& [p, v] : st.p_norms) {
        EXPECT_GE(v, prev) << p;
        prev = v;
    }
    EXPECT_NEAR(st.p_norms.at(2.0), p_norm(st.values, 2.0), 1e-15);
}

TEST(JumpEnsemble, ValidatesConfiguration) {
    const OpenSystem sys = two_level_atom({});
    const auto rho0 = DensityMatrix::pure(ground());
    EXPECT_THROW(run_jump_ensemble(sys, rho0, config(1, 1.0)), InputError);
    EXPECT_THROW(run_jump_ensemble(sys, rho0, config(10, 1.0, 1.0)), InputError);
    EXPECT_THROW(run_jump_ensemble(sys, DensityMatrix::maximally_mixed(3), config(10, 1.0)), DimensionError);
}

TEST(HomodyneEnsemble, NoiseOnlyCurrent) {
    const OpenSystem sys = make_system(pauli_z(), {Operator::Zero(2, 2)});
    const auto st = run_homodyne_ensemble(sys, HomodyneFB{{0.0}, Operator::Zero(2, 2)},
                                          DensityMatrix::pure(ket(2, 0)), config(20000, 2.0, 1e-2));
    EXPECT_NEAR(st.mean, 0.0, 3.0 * stderr_of_mean(st));
    // Var of the sample variance for Gaussian data is 2 sigma^4 / (n - 1).
    EXPECT_NEAR(st.variance, 2.0, 3.0 * 2.0 * std::sqrt(2.0 / 19999.0));
}

TEST(HomodyneEnsemble, AverageStateTracksMasterEquation) {
    const OpenSystem sys = two_level_atom({});
    const HomodyneFB fb{{0.5 * std::numbers::pi}, pauli_x()};
    const auto rho0 = DensityMatrix::pure(ground());
    const auto st = run_homodyne_ensemble(sys, fb, rho0, config(20000, 1.0));
    const Operator exact = devectorize(expm(homodyne_fb(sys, fb).matrix(), 1.0) * vectorize(rho0.op()), 2);
    EXPECT_LT(trace_distance(st.mean_states.back(), exact), 1.5e-2);
}

TEST(GaussianEnsemble, DelegatesToHomodyneUnderMapping) {
    const double lambda = 0.8;
    const Operator H = two_level_atom({}).H;
    const GaussianFB gfb{pauli_z(), lambda, Operator::Zero(2, 2)};
    const auto rho0 = DensityMatrix::pure(ground());
    const auto cfg = config(500, 0.5, 1e-3, 5);
    const auto g = run_gaussian_ensemble(make_system(H), gfb, rho0, cfg);
    const auto h = run_homodyne_ensemble(make_system(H, {std::sqrt(lambda) * pauli_z()}),
                                         HomodyneFB{{0.0}, Operator::Zero(2, 2)}, rho0, cfg);
    ASSERT_EQ(g.values.size(), h.values.size());
    for (std::size_t k = 0; k < g.values.size(); ++k)
        EXPECT_NEAR(g.values[k], h.values[k] / (2.0 * std::sqrt(lambda)), 1e-12);
}

TEST(GaussianEnsemble, SymmetricCollapseHasZeroMeanCurrent) {
    const GaussianFB gfb{pauli_z(), 5.0, Operator::Zero(2, 2)};
    const CVector plus = (ket(2, 0) + ket(2, 1)).normalized();
    const auto st = run_gaussian_ensemble(make_system(Operator::Zero(2, 2)), gfb, DensityMatrix::pure(plus),
                                          config(4000, 1.0, 1e-3));
    EXPECT_NEAR(st.mean, 0.0, 3.0 * stderr_of_mean(st));
    // Each record collapses to one branch, so |Z| concentrates near tau.
    EXPECT_NEAR(st.p_norms.at(1.0), 1.0, 0.1);
}

TEST(GaussianEnsemble, AverageStateTracksMasterEquation) {
    const OpenSystem sys = make_system(two_level_atom({}).H);
    const GaussianFB gfb{pauli_z(), 0.5, pauli_x()};
    const auto rho0 = DensityMatrix::pure(ground());
    const auto st = run_gaussian_ensemble(sys, gfb, rho0, config(20000, 1.0));
    const Operator exact = devectorize(expm(generator(sys, gfb).matrix(), 1.0) * vectorize(rho0.op()), 2);
    EXPECT_LT(trace_distance(st.mean_states.back(), exact), 1.5e-2);
}

TEST(CountRate, Basics) {
    const OpenSystem closed = make_system(pauli_x());
    EXPECT_EQ(dN_dtau(closed, std::vector<double>{}, DensityMatrix::pure(ket(2, 0))), 0.0);
    const OpenSystem sys = two_level_atom({});
    const auto ss = steady_state(lindblad(sys));
    const double rate = dN_dtau(sys, std::vector<double>{1.0}, ss);
    EXPECT_NEAR(rate, 0.5 * ss.op()(0, 0).real(), 1e-14);
    EXPECT_NEAR(classical_activity(sys, NoFeedback{}, ss, 2.0) / 2.0, rate, 1e-10);
}

TEST(CountRate, QecMatchesTrajectoryFiniteDifference) {
    const QecModel m = qec_two_qubit({0.9, 1.4});
    const auto rho0 = DensityMatrix::pure(m.logical0);
    auto cfg = config(20000, 0.6);
    cfg.sample_times = {0.4};
    const auto st = run_jump_ensemble(m.system, m.feedback, rho0, cfg);
    const double fd = (st.sample_means[1] - st.sample_means[0]) / 0.2;
    const double se = std::hypot(st.sample_stderr[0], st.sample_stderr[1]) / 0.2;
    const SuperOperator g = jump_fb(m.system, m.feedback);
    const auto mid = state_from_vector(expm(g.matrix(), 0.5) * vectorize(rho0.op()), 4);
    EXPECT_NEAR(fd, dN_dtau(m.system, m.feedback, mid), 3.0 * se);
}

TEST(Statistics, PairwiseSumAndVariance) {
    std::vector<double> x(1001);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = 0.1 * static_cast<double>(k);
    EXPECT_NEAR(pairwise_sum(x), 0.1 * 1000.0 * 1001.0 / 2.0, 1e-9);
    EXPECT_NEAR(sample_mean(x), 50.0, 1e-12);
    const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
    EXPECT_NEAR(sample_variance(y), 5.0 / 3.0, 1e-15);
    EXPECT_NEAR(p_norm(y, 2.0), std::sqrt(30.0 / 4.0), 1e-15);
}
