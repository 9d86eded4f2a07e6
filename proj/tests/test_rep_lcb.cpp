#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace lowrank;

namespace {

// Random tabular MDP in its exact one-hot embedding (d = |S||A|).
LowRankMDP tabular(int S, int A, Rng& rng) { return random_tabular_mdp(S, A, 0.9, rng, 0.5); }

}  // namespace

TEST(Omega, Examples) {
    EXPECT_DOUBLE_EQ(omega(Policy::uniform(3, 4)).value(), 4.0);
    EXPECT_TRUE(omega(Policy::deterministic({0, 1, 1}, 2)).is_infinite());
    Policy mix{Matrix(2, 2)};
    mix.probs << 0.25, 0.75, 0.75, 0.25;
    EXPECT_DOUBLE_EQ(omega(mix).value(), 4.0);
}

TEST(Rcn, DiagonalPencil) {
    Matrix a = Matrix::Zero(2, 2), b = Matrix::Zero(2, 2);
    a(0, 0) = 1.0;
    b(0, 0) = 0.5;
    b(1, 1) = 1.0;
    EXPECT_NEAR(generalized_max_ratio(a, b).value(), 2.0, 1e-12);
}

TEST(Rcn, NullSpaceLeakIsInfinite) {
    Matrix a = Matrix::Identity(2, 2), b = Matrix::Zero(2, 2);
    b(0, 0) = 1.0;
    EXPECT_TRUE(generalized_max_ratio(a, b).is_infinite());
    a(1, 1) = 0.0;
    EXPECT_NEAR(generalized_max_ratio(a, b).value(), 1.0, 1e-12);
}

TEST(Rcn, SelfCoverageIsOne) {
    Rng rng(1);
    for (const auto kind : {EnvKind::LatentVariable, EnvKind::RandomLowRank}) {
        EnvSpec spec;
        spec.kind = kind;
        const GeneratedEnv g = make_env(spec);
        const TransitionTensor p = induced_transition(g.env.factorization);
        for (int k = 0; k < 20; ++k) {
            const Policy pi = random_policy(12, 3, rng);
            const OccupancyMeasure d = occupancy(p, pi, g.env.init_dist, 0.9);
            EXPECT_NEAR(relative_condition_number(g.env, pi, d).value(), 1.0, 1e-9);
        }
    }
}

TEST(Rcn, TabularEqualsDensityRatio) {
    Rng rng(2);
    for (int k = 0; k < 100; ++k) {
        const LowRankMDP m = tabular(2 + k % 4, 2 + k % 2, rng);
        ASSERT_TRUE(is_one_hot(m.factorization.phi));
        const Policy pi = random_policy(m.num_states(), m.num_actions(), rng);
        const Policy pb = random_policy(m.num_states(), m.num_actions(), rng);
        const CoverageReport rep = coverage_report(m, pi, pb);
        ASSERT_TRUE(rep.tabular_density_ratio.has_value());
        const TransitionTensor p = induced_transition(m.factorization);
        const double ref = oracle::density_ratio(occupancy(p, pi, m.init_dist, 0.9).dist,
                                                 occupancy(p, pb, m.init_dist, 0.9).dist);
        EXPECT_NEAR(rep.relative_condition_number.value(), ref, 1e-9 * std::max(1.0, ref));
        EXPECT_NEAR(rep.tabular_density_ratio->value(), ref, 1e-12 * std::max(1.0, ref));
    }
}

TEST(Rcn, TabularEscapingSupportIsInfinite) {
    Rng rng(3);
    const LowRankMDP m = tabular(3, 2, rng);
    const Policy pb = Policy::deterministic({0, 0, 0}, 2);
    const Policy pi = Policy::deterministic({1, 1, 1}, 2);
    const CoverageReport rep = coverage_report(m, pi, pb);
    EXPECT_TRUE(rep.relative_condition_number.is_infinite());
    EXPECT_TRUE(rep.tabular_density_ratio->is_infinite());
    EXPECT_TRUE(rep.omega.is_infinite());
}

TEST(Rcn, DistributionShiftPsd) {
    Rng rng(4);
    const GeneratedEnv g = make_env(EnvSpec{});
    const TransitionTensor p = induced_transition(g.env.factorization);
    const Matrix& phi = g.env.factorization.phi;
    for (int k = 0; k < 20; ++k) {
        const OccupancyMeasure dpi = occupancy(p, random_policy(12, 3, rng, 0.3), g.env.init_dist, 0.9);
        const OccupancyMeasure rho = occupancy(p, random_policy(12, 3, rng), g.env.init_dist, 0.9);
        const double c = relative_condition_number(dpi, rho, phi).value();
        const Matrix gap = c * feature_second_moment(phi, rho) - feature_second_moment(phi, dpi);
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gap).eigenvalues().minCoeff(), -1e-9);
    }
}

TEST(Rcn, MixingTowardComparatorNeverIncreases) {
    Rng rng(5);
    const GeneratedEnv g = make_env(EnvSpec{});
    const TransitionTensor p = induced_transition(g.env.factorization);
    const Matrix& phi = g.env.factorization.phi;
    for (int k = 0; k < 10; ++k) {
        const OccupancyMeasure dpi = occupancy(p, random_policy(12, 3, rng, 0.3), g.env.init_dist, 0.9);
        const OccupancyMeasure rho = occupancy(p, random_policy(12, 3, rng, 0.3), g.env.init_dist, 0.9);
        double prev = std::numeric_limits<double>::infinity();
        for (double beta = 0.0; beta <= 1.0 + 1e-12; beta += 0.1) {
            const OccupancyMeasure mixed{12, 3, beta * dpi.dist + (1.0 - beta) * rho.dist};
            const double c = relative_condition_number(dpi, mixed, phi).to_double();
            EXPECT_LE(c, prev * (1.0 + 1e-9));
            prev = c;
        }
        EXPECT_NEAR(prev, 1.0, 1e-9);
    }
}

TEST(OfflineData, TrivialCases) {
    Rng rng(6);
    const GeneratedEnv g = make_env(EnvSpec{});
    EXPECT_TRUE(generate_offline_dataset(g.env, Policy::uniform(12, 3), 0, rng).triples.empty());
    const LowRankMDP one{Factorization{1, 2, 1, Matrix::Ones(1, 1), Matrix::Ones(2, 1)}, Matrix::Zero(1, 2), 0.9,
                         Vector::Ones(1)};
    const TransitionDataset d = generate_offline_dataset(one, Policy::uniform(1, 2), 100, rng);
    EXPECT_EQ(d.provenance, Provenance::Offline);
    for (const auto& t : d.triples) EXPECT_EQ(t.s, 0);
}

TEST(OfflineData, PairLawMatchesBehaviorOccupancy) {
    Rng rng(7);
    const GeneratedEnv g = make_env(EnvSpec{});
    const Policy pb = random_policy(12, 3, rng);
    const TransitionDataset d = generate_offline_dataset(g.env, pb, 100000, rng);
    const OccupancyMeasure ref = occupancy(induced_transition(g.env.factorization), pb, g.env.init_dist, 0.9);
    EXPECT_LE(oracle::total_variation(empirical_distribution(d, 12, 3).dist, ref.dist), 0.02);
}

TEST(RepLcb, SingletonZeroPenaltyIsOptimal) {
    const GeneratedEnv g = make_env(EnvSpec{});
    const ModelClass single{{g.env.factorization}, 0};
    Rng rng(8);
    OfflineSpec spec;
    spec.behavior = Policy::uniform(12, 3);
    spec.c_alpha = 0.0;
    const TransitionDataset d = generate_offline_dataset(g.env, spec.behavior, 50, rng);
    const LcbResult r = run_rep_lcb(d, single, g.env.reward, 0.9, spec);
    EXPECT_EQ(r.policy.probs, solve_optimal(g.env).policy.probs);
}

TEST(RepLcb, HugePenaltyMatchesRewardOnlyPlan) {
    const GeneratedEnv g = make_env(EnvSpec{});
    Rng rng(9);
    OfflineSpec spec;
    spec.behavior = Policy::uniform(12, 3);
    spec.c_alpha = 1e9;
    const TransitionDataset d = generate_offline_dataset(g.env, spec.behavior, 100, rng);
    const LcbResult r = run_rep_lcb(d, g.model_class, g.env.reward, 0.9, spec);
    EXPECT_EQ(r.penalty.matrix(), Matrix::Constant(12, 3, 2.0));
    EXPECT_EQ(r.policy.probs, plan(g.model_class.candidates[r.model_index], g.env.reward, 0.9).probs);
}

TEST(RepLcb, Schedules) {
    const GeneratedEnv g = make_env(EnvSpec{});
    Rng rng(10);
    OfflineSpec spec;
    spec.behavior = Policy::uniform(12, 3);
    spec.c_alpha = 0.5;
    spec.c_lambda = 2.0;
    const TransitionDataset d = generate_offline_dataset(g.env, spec.behavior, 100, rng);
    const LcbResult r = run_rep_lcb(d, g.model_class, g.env.reward, 0.9, spec);
    const double l = std::log(16 / 0.1);
    EXPECT_NEAR(r.lambda, 2.0 * 4 * l, 1e-12);
    EXPECT_NEAR(r.alpha, 0.5 * std::sqrt((3.0 + 16.0) * 0.9 * l), 1e-12);
    const Matrix pen = r.penalty.matrix();
    EXPECT_GE(pen.minCoeff(), 0.0);
    EXPECT_LE(pen.maxCoeff(), 2.0);
}

TEST(RepLcb, InfiniteOmegaIsConfigError) {
    const GeneratedEnv g = make_env(EnvSpec{});
    OfflineSpec spec;
    spec.behavior = solve_optimal(g.env).policy;
    EXPECT_THROW(run_rep_lcb(TransitionDataset{}, g.model_class, g.env.reward, 0.9, spec), ConfigError);
}

TEST(Pessimism, ExactModelExamples) {
    Rng rng(11);
    const LowRankMDP m = random_tabular_mdp(4, 2, 0.9, rng);
    const TransitionTensor p = induced_transition(m.factorization);
    for (int k = 0; k < 10; ++k) {
        const Policy pi = random_policy(4, 2, rng);
        EXPECT_NEAR(pessimism_margin(pi, p, Matrix::Zero(4, 2), m, p), 0.0, 1e-12);
        const Matrix pen = (Matrix::Random(4, 2).array() + 1.0).matrix();
        EXPECT_LE(pessimism_margin(pi, p, pen, m, p), 1e-12);
    }
}

TEST(Pessimism, MarginRarelyExceedsSlack) {
    // 50 fits x 20 probe policies on the latent env, behavior 0.9 pi* + 0.1 U.
    const GeneratedEnv g = make_env(EnvSpec{});
    const TransitionTensor truth = induced_transition(g.env.factorization);
    OfflineSpec spec;
    spec.behavior = solve_optimal(g.env).policy.mixed_with_uniform(0.1);
    spec.n = 2000;
    Rng probe_rng(12);
    std::vector<Policy> probes;
    for (int k = 0; k < 20; ++k) probes.push_back(random_policy(12, 3, probe_rng, 0.5));
    const double slack = pessimism_slack(omega(spec.behavior).value(), 16, spec.delta, 0.9, spec.n, 1.0);
    int exceed = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const TransitionDataset d = generate_offline_dataset(g.env, spec.behavior, spec.n, rng);
        const LcbResult r = run_rep_lcb(d, g.model_class, g.env.reward, 0.9, spec);
        const TransitionTensor fitted = induced_transition(g.model_class.candidates[r.model_index]);
        const Matrix pen = r.penalty.matrix();
        for (const auto& pi : probes) {
            exceed += pessimism_margin(pi, fitted, pen, g.env, truth) > slack;
            ++total;
        }
    }
    EXPECT_LE(static_cast<double>(exceed) / total, spec.delta + 0.05);
}
