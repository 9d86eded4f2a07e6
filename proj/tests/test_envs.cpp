#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace lowrank;

namespace {

void expect_valid(const GeneratedEnv& g) {
    const ValidationReport r = validate_mdp(g.env);
    EXPECT_TRUE(r.ok());
    EXPECT_TRUE(r.warnings.empty());
    ASSERT_TRUE(g.model_class.true_index.has_value());
    EXPECT_EQ(induced_transition(g.model_class.candidates[*g.model_class.true_index]).probs,
              induced_transition(g.env.factorization).probs);
    for (const auto& c : g.model_class.candidates) {
        EXPECT_TRUE(validate_factorization(c).ok());
        EXPECT_EQ(c.num_states, g.env.num_states());
        EXPECT_EQ(c.num_actions, g.env.num_actions());
    }
}

}  // namespace

TEST(Generators, ValidAcrossHundredSeeds) {
    for (const auto kind : {EnvKind::LatentVariable, EnvKind::Block, EnvKind::RandomLowRank, EnvKind::Comblock}) {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            EnvSpec spec;
            spec.kind = kind;
            spec.seed = seed;
            spec.decoys = seed % 2 ? DecoyStyle::Mixed : DecoyStyle::Ladder;
            SCOPED_TRACE(std::string(to_string(kind)) + " seed " + std::to_string(seed));
            expect_valid(make_env(spec));
        }
    }
}

TEST(Generators, RankOneLatent) {
    EnvSpec spec;
    spec.dim = 1;
    const GeneratedEnv g = make_env(spec);
    EXPECT_EQ(g.env.factorization.phi, Matrix::Ones(36, 1));
    expect_valid(g);
}

TEST(Generators, BlockFeaturesAreOneHot) {
    EnvSpec spec;
    spec.kind = EnvKind::Block;
    const GeneratedEnv g = make_env(spec);
    EXPECT_TRUE(is_one_hot(g.env.factorization.phi));
    // Disjoint emission supports: each state is emitted by exactly one latent.
    for (int s = 0; s < spec.num_states; ++s) {
        int owners = 0;
        for (int z = 0; z < spec.dim; ++z) owners += g.env.factorization.mu(s, z) > 0.0;
        EXPECT_LE(owners, 1);
    }
}

TEST(Generators, LatentFeaturesAreDistributions) {
    const GeneratedEnv g = make_env(EnvSpec{});
    const Matrix& phi = g.env.factorization.phi;
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
        EXPECT_NEAR(phi.row(i).sum(), 1.0, 1e-12);
        EXPECT_GE(phi.row(i).minCoeff(), 0.0);
    }
    EXPECT_EQ(g.model_class.size(), 16u);
    EXPECT_EQ(*g.model_class.true_index, 15u);
}

TEST(Generators, DecoysDifferFromTruth) {
    for (const auto style : {DecoyStyle::Ladder, DecoyStyle::Mixed}) {
        EnvSpec spec;
        spec.decoys = style;
        const GeneratedEnv g = make_env(spec);
        const TransitionTensor truth = induced_transition(g.env.factorization);
        const OccupancyMeasure u{12, 3, Vector::Constant(36, 1.0 / 36)};
        for (std::size_t i = 0; i + 1 < g.model_class.size(); ++i)
            EXPECT_GT(expected_sq_tv(induced_transition(g.model_class.candidates[i]), truth, u), 0.0);
    }
}

TEST(Generators, PresetClassSizes) {
    for (const int m : {4, 16, 64}) {
        EnvSpec spec;
        spec.num_decoys = m - 1;
        spec.decoys = DecoyStyle::Mixed;
        EXPECT_EQ(make_env(spec).model_class.size(), static_cast<std::size_t>(m));
    }
}

TEST(Generators, Infeasible) {
    EnvSpec spec;
    spec.dim = 20;
    EXPECT_THROW(make_env(spec), ValidationError);
    EXPECT_THROW(make_comblock_env(1, 3, 0.9, 0), ValidationError);
    EXPECT_THROW(make_comblock_env(4, 1, 0.9, 0), ValidationError);
    EXPECT_THROW(env_kind_from_string("maze"), ValidationError);
}

TEST(Generators, DeterministicGivenSeed) {
    for (const auto kind : {EnvKind::LatentVariable, EnvKind::RandomLowRank, EnvKind::Comblock}) {
        EnvSpec spec;
        spec.kind = kind;
        spec.seed = 17;
        const GeneratedEnv a = make_env(spec), b = make_env(spec);
        EXPECT_EQ(a.env.factorization.phi, b.env.factorization.phi);
        EXPECT_EQ(a.env.factorization.mu, b.env.factorization.mu);
        EXPECT_EQ(a.env.reward, b.env.reward);
        ASSERT_EQ(a.model_class.size(), b.model_class.size());
        for (std::size_t i = 0; i < a.model_class.size(); ++i)
            EXPECT_EQ(a.model_class.candidates[i].mu, b.model_class.candidates[i].mu);
    }
}

TEST(Generators, KindNamesRoundTrip) {
    for (const auto kind : {EnvKind::LatentVariable, EnvKind::Block, EnvKind::Comblock, EnvKind::RandomLowRank})
        EXPECT_EQ(env_kind_from_string(to_string(kind)), kind);
}

TEST(Comblock, AnalyticOptimalValue) {
    for (const int H : {2, 4, 6, 9})
        for (const double p_stay : {1.0, 0.7}) {
            const GeneratedEnv g = make_comblock_env(H, 3, 0.95, 5, p_stay);
            const TransitionTensor p = induced_transition(g.env.factorization);
            const std::vector<int> acts = [&] {
                std::vector<int> a(g.correct_actions);
                a.push_back(0);
                a.push_back(0);
                return a;
            }();
            const double v = oracle::iterative_value(p, g.env.reward, Policy::deterministic(acts, 3), 0.95)(0);
            EXPECT_NEAR(v, *g.analytic_optimal_value, 1e-10);
            EXPECT_NEAR(solve_optimal(g.env).value, *g.analytic_optimal_value, 1e-10);
        }
}

TEST(Comblock, UniformPolicyReachesGoalWithProductProbability) {
    const int H = 6, A = 3;
    const GeneratedEnv g = make_comblock_env(H, A, 0.95, 8);
    const Matrix p_pi = policy_transition(induced_transition(g.env.factorization), Policy::uniform(H + 1, A));
    Vector state = g.env.init_dist;
    for (int t = 0; t < H - 1; ++t) state = p_pi.transpose() * state;
    EXPECT_NEAR(state(H - 1), std::pow(static_cast<double>(A), -(H - 1)), 1e-15);
}

TEST(Comblock, ClassLayout) {
    const GeneratedEnv g = make_comblock_env(6, 3, 0.95, 2);
    EXPECT_EQ(g.model_class.size(), 16u);
    EXPECT_EQ(*g.model_class.true_index, 15u);
    EXPECT_EQ(g.correct_actions.size(), 5u);
    EXPECT_EQ(make_comblock_env(6, 3, 0.95, 2, 1.0, 3).model_class.size(), 4u);
    // Reward 1 - gamma only at the goal.
    for (int a = 0; a < 3; ++a) EXPECT_DOUBLE_EQ(g.env.reward(5, a), 1.0 - 0.95);
    EXPECT_EQ(g.env.reward.topRows(5), Matrix::Zero(5, 3));
}

TEST(RandomLowRank, SameKernelAsLatent) {
    EnvSpec spec;
    spec.seed = 4;
    const GeneratedEnv latent = make_env(spec);
    spec.kind = EnvKind::RandomLowRank;
    const GeneratedEnv rot = make_env(spec);
    EXPECT_LT((induced_transition(latent.env.factorization).probs - induced_transition(rot.env.factorization).probs)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
    EXPECT_LT(rot.env.factorization.phi.minCoeff(), 0.0);
}

TEST(Tabular, EmbeddingReproducesKernel) {
    Rng rng(3);
    const LowRankMDP m = random_tabular_mdp(4, 2, 0.9, rng);
    EXPECT_EQ(m.factorization.dim, 8);
    expect_valid(GeneratedEnv{m, ModelClass{{m.factorization}, 0}, std::nullopt, {}});
}
