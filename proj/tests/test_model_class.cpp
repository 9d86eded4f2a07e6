#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace lowrank;

namespace {

// Deterministic successor s+1 mod S for every action.
Factorization deterministic_ring(int S, int A) {
    Factorization f{S, A, S, Matrix::Identity(S, S), Matrix::Zero(S * A, S)};
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) f.phi(f.pair_index(s, a), (s + 1) % S) = 1.0;
    return f;
}

Factorization uniform_successor(int S, int A) {
    return Factorization{S, A, 1, Matrix::Constant(S, 1, 1.0 / S), Matrix::Ones(S * A, 1)};
}

TransitionDataset ring_data(int S, int A, int n) {
    TransitionDataset data;
    for (int i = 0; i < n; ++i) data.triples.push_back({i % S, i % A, (i % S + 1) % S});
    return data;
}

}  // namespace

TEST(LogLikelihood, EmptyDatasetIsZero) {
    EXPECT_EQ(log_likelihood(deterministic_ring(3, 2), TransitionDataset{}), 0.0);
}

TEST(LogLikelihood, DeterministicModelOnSupportIsZero) {
    EXPECT_EQ(log_likelihood(deterministic_ring(3, 2), ring_data(3, 2, 50)), 0.0);
}

TEST(LogLikelihood, ZeroProbabilityTermIsFloored) {
    TransitionDataset data;
    data.triples.push_back({0, 0, 2});  // ring predicts 1
    EXPECT_NEAR(log_likelihood(deterministic_ring(3, 2), data), -27.631021115928547, 1e-12);
    EXPECT_DOUBLE_EQ(log_likelihood(deterministic_ring(3, 2), data), std::log(1e-12));
}

TEST(Mle, SingletonClass) {
    ModelClass cls{{uniform_successor(3, 2)}, 0};
    EXPECT_EQ(mle_fit(cls, ring_data(3, 2, 10)).index, 0u);
    EXPECT_THROW(mle_fit(ModelClass{}, ring_data(3, 2, 10)), ValidationError);
}

TEST(Mle, DeterministicBeatsSpreadForAnyNonEmptyData) {
    ModelClass cls{{uniform_successor(2, 2), deterministic_ring(2, 2)}, 1};
    for (int n = 1; n < 20; ++n) EXPECT_EQ(mle_fit(cls, ring_data(2, 2, n)).index, 1u);
}

TEST(Mle, TiesGoToLowestIndex) {
    ModelClass cls{{deterministic_ring(3, 2), deterministic_ring(3, 2), uniform_successor(3, 2)}, 0};
    EXPECT_EQ(mle_fit(cls, ring_data(3, 2, 5)).index, 0u);
    EXPECT_EQ(mle_fit(cls, TransitionDataset{}).index, 0u);
}

TEST(Mle, TruthSelectedWithTenDecoys) {
    // Five latent relabelings and five emission perturbations at moderate
    // weights, truth last.
    EnvSpec spec;
    spec.seed = 21;
    const GeneratedEnv g = make_env(spec);
    const Factorization& f = g.env.factorization;
    Rng gen(99);
    std::vector<Factorization> decoys;
    for (int k = 0; k < 5; ++k) {
        std::vector<int> perm{0, 1, 2, 3};
        std::rotate(perm.begin(), perm.begin() + 1 + k % 3, perm.end());
        if (k >= 3) std::swap(perm[0], perm[1]);
        decoys.push_back(permute_latent_labels(f, perm));
        decoys.push_back(perturb_emissions(f, 0.1 + 0.1 * k, random_emissions(12, 4, 1.0, gen)));
    }
    const ModelClass cls = assemble_class(decoys, f);
    ASSERT_EQ(cls.size(), 11u);
    const TransitionTensor truth = induced_transition(f);
    const Policy sampler = Policy::uniform(spec.num_states, spec.num_actions);
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        TransitionDataset data;
        for (int i = 0; i < 5000; ++i)
            data.triples.push_back(sample_triple(truth, sampler, g.env.init_dist, g.env.gamma, rng).transition);
        if (mle_fit(cls, data).index == *cls.true_index) ++hits;
    }
    EXPECT_GE(hits, 95);
}

TEST(Mle, IncrementalMatchesBatchBitForBit) {
    const GeneratedEnv g = make_env(EnvSpec{});
    const TransitionTensor truth = induced_transition(g.env.factorization);
    Rng rng(4);
    IncrementalMle inc(g.model_class);
    TransitionDataset data;
    for (int i = 0; i < 300; ++i) {
        const Transition t = sample_triple(truth, Policy::uniform(12, 3), g.env.init_dist, 0.9, rng).transition;
        inc.add(t);
        data.triples.push_back(t);
        if (i % 37 == 0) {
            const MleFit batch = mle_fit(g.model_class, data);
            EXPECT_EQ(inc.best().index, batch.index);
            EXPECT_EQ(inc.best().log_likelihood, batch.log_likelihood);
        }
    }
}

TEST(Mle, LeadBeyondTwiceFloorIsStable) {
    // Comblock decoys are deterministic, so a rival can only lose ground on true data.
    const GeneratedEnv g = make_comblock_env(4, 3, 0.9, 2);
    const TransitionTensor truth = induced_transition(g.env.factorization);
    const std::size_t ti = *g.model_class.true_index;
    Rng rng(5);
    IncrementalMle inc(g.model_class);
    bool locked = false;
    for (int i = 0; i < 3000; ++i) {
        inc.add(sample_triple(truth, Policy::uniform(5, 3), g.env.init_dist, 0.9, rng).transition);
        const auto& sc = inc.scores();
        if (!locked) {
            bool lead = true;
            for (std::size_t j = 0; j < sc.size(); ++j)
                if (j != ti && sc[ti] - sc[j] <= 2.0 * std::abs(std::log(kLikelihoodFloor))) lead = false;
            locked = lead;
        } else {
            EXPECT_EQ(inc.best().index, ti);
        }
    }
    EXPECT_TRUE(locked);
}

TEST(SqTv, Basics) {
    Rng rng(7);
    const LowRankMDP m1 = random_tabular_mdp(4, 3, 0.9, rng);
    const LowRankMDP m2 = random_tabular_mdp(4, 3, 0.9, rng);
    const TransitionTensor p1 = induced_transition(m1.factorization), p2 = induced_transition(m2.factorization);
    const OccupancyMeasure d = occupancy(p1, random_policy(4, 3, rng), m1.init_dist, 0.9);
    EXPECT_EQ(expected_sq_tv(p1, p1, d), 0.0);
    const double v = expected_sq_tv(p1, p2, d);
    EXPECT_NEAR(v, oracle::sq_tv(p1, p2, d.dist), 1e-14);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 4.0);
}

TEST(SqTv, DisjointSupportsGiveFour) {
    const Factorization a = deterministic_ring(3, 2);
    Factorization b = a;
    b.phi.setZero();
    for (int s = 0; s < 3; ++s)
        for (int x = 0; x < 2; ++x) b.phi(b.pair_index(s, x), s) = 1.0;  // self loop
    const OccupancyMeasure d{3, 2, Vector::Constant(6, 1.0 / 6)};
    EXPECT_NEAR(expected_sq_tv(a, b, d), 4.0, 1e-14);
}

TEST(SqTv, RealizabilityAcrossGenerators) {
    for (const auto kind : {EnvKind::LatentVariable, EnvKind::Block, EnvKind::Comblock, EnvKind::RandomLowRank}) {
        EnvSpec spec;
        spec.kind = kind;
        const GeneratedEnv g = make_env(spec);
        Rng rng(1);
        const OccupancyMeasure d{g.env.num_states(), g.env.num_actions(),
                                 sample_dirichlet(g.env.num_states() * g.env.num_actions(), 1.0, rng)};
        EXPECT_NEAR(expected_sq_tv(g.model_class.candidates[*g.model_class.true_index], g.env.factorization, d), 0.0,
                    1e-24);
    }
}

TEST(DecayCurve, SingletonClassIsZero) {
    const GeneratedEnv g = make_env(EnvSpec{});
    const ModelClass single{{g.env.factorization}, 0};
    const DecayCurve c = mle_decay_curve(g.env, single, {Policy::uniform(12, 3)}, {10, 100, 1000}, {1, 2});
    for (const double m : c.mean) EXPECT_EQ(m, 0.0);
}

TEST(DecayCurve, ZeroOnceTruthSelected) {
    const GeneratedEnv g = make_comblock_env(3, 2, 0.9, 1);
    const std::vector<std::size_t> grid{1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};
    const DecayCurve c = mle_decay_curve(g.env, g.model_class, {Policy::uniform(4, 2)}, grid, {3});
    const auto& row = c.per_seed[0];
    const auto first_zero = std::find(row.begin(), row.end(), 0.0);
    ASSERT_NE(first_zero, row.end());
    for (auto it = first_zero; it != row.end(); ++it) EXPECT_EQ(*it, 0.0);
}

TEST(DecayCurve, SlopeShape) {
    EnvSpec spec;
    spec.seed = 7;
    const GeneratedEnv g = make_env(spec);
    const std::vector<std::size_t> grid{100, 200, 500, 1000, 2000, 5000, 10000};
    std::vector<std::uint64_t> seeds(20);
    std::iota(seeds.begin(), seeds.end(), 0);
    const DecayCurve c = mle_decay_curve(g.env, g.model_class, {Policy::uniform(12, 3)}, grid, seeds);
    std::vector<double> med;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::vector<double> col;
        for (const auto& r : c.per_seed) col.push_back(r[k]);
        med.push_back(median(col));
    }
    const auto slope = loglog_slope(grid, med);
    ASSERT_TRUE(slope.has_value());
    EXPECT_GE(*slope, -1.4);
    EXPECT_LE(*slope, -0.6);
}

TEST(LogLogSlope, ExactPowerLaw) {
    const std::vector<std::size_t> n{10, 100, 1000};
    EXPECT_NEAR(*loglog_slope(n, {0.1, 0.01, 0.001}), -1.0, 1e-12);
    EXPECT_FALSE(loglog_slope(n, {0.1, 0.0, 0.001}).has_value());
}
