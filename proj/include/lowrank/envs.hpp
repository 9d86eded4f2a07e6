#pragma once

// Environment generators and decoy model classes for experiments.

#include "lowrank/mdp.hpp"
#include "lowrank/model_class.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace lowrank {

enum class EnvKind { LatentVariable, Block, Comblock, RandomLowRank };

inline const char* to_string(EnvKind k) {
    switch (k) {
        case EnvKind::LatentVariable: return "latent_variable";
        case EnvKind::Block: return "block";
        case EnvKind::Comblock: return "comblock";
        case EnvKind::RandomLowRank: return "random_lowrank";
    }
    return "unknown";
}

inline EnvKind env_kind_from_string(const std::string& s) {
    if (s == "latent_variable") return EnvKind::LatentVariable;
    if (s == "block") return EnvKind::Block;
    if (s == "comblock") return EnvKind::Comblock;
    if (s == "random_lowrank") return EnvKind::RandomLowRank;
    throw ValidationError("unknown environment kind '" + s + "'");
}

enum class DecoyStyle {
    /// Emission perturbations toward fresh Dirichlet draws with geometrically
    /// halving weight 2^{-k}, so the class holds near-misses at many scales.
    Ladder,
    /// Cycle through ladder perturbations, latent-label permutations and
    /// zero-padded (d+1)-dimensional perturbations.
    Mixed,
};

struct EnvSpec {
    EnvKind kind = EnvKind::LatentVariable;
    int num_states = 12;
    int num_actions = 3;
    int dim = 4;
    double gamma = 0.9;
    /// Comblock: number of good states in the chain.
    int lock_length = 6;
    /// Comblock: probability the goal state keeps the agent.
    double p_stay = 1.0;
    /// Dirichlet concentration of phi*(s,a) over latent states.
    double concentration = 0.5;
    /// Dirichlet concentration of the emission distributions mu*_z.
    double emission_concentration = 1.0;
    /// Decoys added to the truth; -1 picks the generator default.
    int num_decoys = 15;
    DecoyStyle decoys = DecoyStyle::Ladder;
    std::uint64_t seed = 0;
};

struct GeneratedEnv {
    LowRankMDP env;
    ModelClass model_class;
    /// Closed-form optimal value when the generator knows it.
    std::optional<double> analytic_optimal_value;
    /// Comblock: the correct action in each chain state.
    std::vector<int> correct_actions;
};

inline Vector sample_dirichlet(int k, double concentration, Rng& rng) {
    std::gamma_distribution<double> gamma(concentration, 1.0);
    Vector x(k);
    double sum = 0.0;
    do {
        for (int i = 0; i < k; ++i) x(i) = gamma(rng);
        sum = x.sum();
    } while (!(sum > 0.0));
    return x / sum;
}

// ---- decoy constructions -------------------------------------------------

/// mu' = (1 - t) mu + t alt, with alt's columns distributions over states.
/// Keeps phi, so the result stays a valid latent-variable factorization.
inline Factorization perturb_emissions(const Factorization& f, double t, const Matrix& alt_mu) {
    Factorization out = f;
    out.mu = (1.0 - t) * f.mu + t * alt_mu;
    return out;
}

/// phi'(s,a)_z = phi(s,a)_{perm[z]}
inline Factorization permute_latent_labels(const Factorization& f, const std::vector<int>& perm) {
    Factorization out = f;
    for (int z = 0; z < f.dim; ++z) out.phi.col(z) = f.phi.col(perm[static_cast<std::size_t>(z)]);
    return out;
}

/// Appends `extra` zero columns to mu and phi; the induced kernel is unchanged.
inline Factorization pad_dimension(const Factorization& f, int extra) {
    Factorization out = f;
    out.dim = f.dim + extra;
    out.mu = Matrix::Zero(f.num_states, out.dim);
    out.mu.leftCols(f.dim) = f.mu;
    out.phi = Matrix::Zero(f.phi.rows(), out.dim);
    out.phi.leftCols(f.dim) = f.phi;
    return out;
}

inline Matrix random_emissions(int num_states, int dim, double concentration, Rng& rng) {
    Matrix mu(num_states, dim);
    for (int z = 0; z < dim; ++z) mu.col(z) = sample_dirichlet(num_states, concentration, rng);
    return mu;
}

inline std::vector<Factorization> make_decoys(const Factorization& truth, int count, DecoyStyle style,
                                              double emission_concentration, Rng& rng) {
    std::vector<Factorization> out;
    int ladder_step = 0;
    for (int k = 0; k < count; ++k) {
        const int kind = style == DecoyStyle::Mixed ? k % 3 : 0;
        if (kind == 1 && truth.dim > 1) {
            std::vector<int> perm(static_cast<std::size_t>(truth.dim));
            std::iota(perm.begin(), perm.end(), 0);
            do {
                std::shuffle(perm.begin(), perm.end(), rng);
            } while (std::is_sorted(perm.begin(), perm.end()));
            out.push_back(permute_latent_labels(truth, perm));
            continue;
        }
        const double t = std::ldexp(1.0, -ladder_step++);
        const Matrix alt = random_emissions(truth.num_states, truth.dim, emission_concentration, rng);
        Factorization f = perturb_emissions(truth, t, alt);
        out.push_back(kind == 2 ? pad_dimension(f, 1) : std::move(f));
    }
    return out;
}

/// Decoys first, truth last: the lowest-index tie-break never favors the truth.
inline ModelClass assemble_class(std::vector<Factorization> decoys, const Factorization& truth) {
    ModelClass cls;
    cls.candidates = std::move(decoys);
    cls.true_index = cls.candidates.size();
    cls.candidates.push_back(truth);
    return cls;
}

// ---- generators ----------------------------------------------------------

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

inline Matrix random_reward(int num_states, int num_actions, double gamma, Rng& rng) {
    Matrix r(num_states, num_actions);
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) {
            const double u = uniform01(rng);
            r(s, a) = (1.0 - gamma) * u * u;
        }
    return r;
}

inline Vector point_mass(int n, int at) {
    Vector v = Vector::Zero(n);
    v(at) = 1.0;
    return v;
}

/// phi*(s,a) is a distribution over d latent states and mu*_z an emission
/// distribution; `one_hot` gives the block-MDP sub-case (deterministic latent
/// transitions, disjoint emission supports).
inline GeneratedEnv make_latent_variable_env(const EnvSpec& spec, bool one_hot = false) {
    const int S = spec.num_states, A = spec.num_actions, d = spec.dim;
    require(S > 0 && A > 0 && d > 0, "latent env: sizes must be positive");
    require(d <= S, "latent env: dim must not exceed num_states");
    require(spec.gamma >= 0.0 && spec.gamma < 1.0, "latent env: gamma must lie in [0,1)");
    Rng rng(spec.seed);

    Factorization f{S, A, d, Matrix::Zero(S, d), Matrix::Zero(static_cast<Eigen::Index>(S) * A, d)};
    if (one_hot) {
        // Latent z owns states {s : s mod d == z}.
        for (int z = 0; z < d; ++z) {
            std::vector<int> members;
            for (int s = z; s < S; s += d) members.push_back(s);
            const Vector w = sample_dirichlet(static_cast<int>(members.size()), spec.emission_concentration, rng);
            for (std::size_t i = 0; i < members.size(); ++i) f.mu(members[i], z) = w(idx(i));
        }
        for (Eigen::Index i = 0; i < f.phi.rows(); ++i) f.phi(i, idx(uniform_index(static_cast<std::size_t>(d), rng))) = 1.0;
    } else {
        f.mu = random_emissions(S, d, spec.emission_concentration, rng);
        for (Eigen::Index i = 0; i < f.phi.rows(); ++i) f.phi.row(i) = sample_dirichlet(d, spec.concentration, rng).transpose();
    }

    GeneratedEnv g;
    g.env = LowRankMDP{f, random_reward(S, A, spec.gamma, rng), spec.gamma, point_mass(S, 0)};
    const int n_decoys = spec.num_decoys < 0 ? 15 : spec.num_decoys;
    g.model_class = assemble_class(make_decoys(f, n_decoys, spec.decoys, spec.emission_concentration, rng), f);
    return g;
}

inline Matrix random_orthogonal(int d, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = normal(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    return q;
}

/// Latent-variable model seen through a random rotation of the latent space:
/// same kernel, signed and non-distributional embeddings.
inline GeneratedEnv make_random_lowrank_env(const EnvSpec& spec) {
    GeneratedEnv g = make_latent_variable_env(spec);
    Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto rotate = [&](Factorization& f, const Matrix& q) {
        f.mu = f.mu * q;
        f.phi = f.phi * q;
    };
    const Matrix q = random_orthogonal(spec.dim, rng);
    rotate(g.env.factorization, q);
    for (auto& c : g.model_class.candidates) {
        if (c.dim == spec.dim)
            rotate(c, q);
        else
            rotate(c, random_orthogonal(c.dim, rng));
    }
    return g;
}

/// Combination lock: good states 0..H-1, absorbing dead state H. In each chain
/// state one seed-chosen action advances, all others fall into the dead state.
/// The goal state H-1 keeps the agent with probability p_stay (otherwise dead)
/// and pays 1-gamma per step. Features are one-hot on the successor.
///
/// Decoys, in class order: truncations (link j sends its correct action to the
/// dead state), then relabelings (link j advances under a different action);
/// the truth comes last.
inline GeneratedEnv make_comblock_env(int lock_length, int num_actions, double gamma, std::uint64_t seed,
                                      double p_stay = 1.0, int num_decoys = -1) {
    const int H = lock_length;
    require(H >= 2, "comblock: lock length must be at least 2");
    require(num_actions >= 2, "comblock: need at least two actions");
    require(gamma >= 0.0 && gamma < 1.0, "comblock: gamma must lie in [0,1)");
    require(p_stay >= 0.0 && p_stay <= 1.0, "comblock: p_stay must lie in [0,1]");
    const int S = H + 1, A = num_actions, dead = H, goal = H - 1;
    Rng rng(seed);
    std::vector<int> correct(static_cast<std::size_t>(H - 1));
    for (auto& c : correct) c = static_cast<int>(uniform_index(static_cast<std::size_t>(A), rng));

    const auto build = [&](const std::vector<int>& advance_action, int truncated_link) {
        Factorization f{S, A, S, Matrix::Identity(S, S), Matrix::Zero(static_cast<Eigen::Index>(S) * A, S)};
        for (int s = 0; s < goal; ++s)
            for (int a = 0; a < A; ++a) {
                const bool advances = a == advance_action[static_cast<std::size_t>(s)] && s + 1 != truncated_link;
                f.phi(f.pair_index(s, a), advances ? s + 1 : dead) = 1.0;
            }
        for (int a = 0; a < A; ++a) {
            f.phi(f.pair_index(goal, a), goal) += p_stay;
            f.phi(f.pair_index(goal, a), dead) += 1.0 - p_stay;
            f.phi(f.pair_index(dead, a), dead) = 1.0;
        }
        return f;
    };

    const Factorization truth = build(correct, -1);
    std::vector<Factorization> decoys;
    for (int link = 1; link < H; ++link) decoys.push_back(build(correct, link));
    for (int link = 1; link < H; ++link)
        for (int alt = 0; alt < A; ++alt) {
            if (alt == correct[static_cast<std::size_t>(link - 1)]) continue;
            std::vector<int> relabeled = correct;
            relabeled[static_cast<std::size_t>(link - 1)] = alt;
            decoys.push_back(build(relabeled, -1));
        }
    if (num_decoys >= 0 && static_cast<std::size_t>(num_decoys) < decoys.size())
        decoys.resize(static_cast<std::size_t>(num_decoys));

    Matrix reward = Matrix::Zero(S, A);
    reward.row(goal).setConstant(1.0 - gamma);

    GeneratedEnv g;
    g.env = LowRankMDP{truth, reward, gamma, point_mass(S, 0)};
    g.model_class = assemble_class(std::move(decoys), truth);
    g.analytic_optimal_value = std::pow(gamma, H - 1) * (1.0 - gamma) / (1.0 - gamma * p_stay);
    g.correct_actions = correct;
    return g;
}

/// Exact tabular embedding: d = |S||A|, phi(s,a) = e_{(s,a)}, mu(s')_{(s,a)} = P(s'|s,a).
inline Factorization tabular_embedding(const TransitionTensor& p) {
    const int n = p.num_states * p.num_actions;
    return Factorization{p.num_states, p.num_actions, n, p.probs.transpose(), Matrix::Identity(n, n)};
}

inline GeneratedEnv make_env(const EnvSpec& spec) {
    switch (spec.kind) {
        case EnvKind::LatentVariable: return make_latent_variable_env(spec, false);
        case EnvKind::Block: return make_latent_variable_env(spec, true);
        case EnvKind::RandomLowRank: return make_random_lowrank_env(spec);
        case EnvKind::Comblock:
            return make_comblock_env(spec.lock_length, spec.num_actions, spec.gamma, spec.seed, spec.p_stay,
                                     spec.num_decoys);
    }
    throw ValidationError("make_env: unknown kind");
}

/// Random tabular MDP for property tests (dense random kernel).
inline LowRankMDP random_tabular_mdp(int num_states, int num_actions, double gamma, Rng& rng,
                                     double concentration = 1.0) {
    TransitionTensor p{num_states, num_actions, Matrix(static_cast<Eigen::Index>(num_states) * num_actions, num_states)};
    for (Eigen::Index i = 0; i < p.probs.rows(); ++i)
        p.probs.row(i) = sample_dirichlet(num_states, concentration, rng).transpose();
    Vector d0 = sample_dirichlet(num_states, 1.0, rng);
    return LowRankMDP{tabular_embedding(p), random_reward(num_states, num_actions, gamma, rng), gamma, std::move(d0)};
}

inline Policy random_policy(int num_states, int num_actions, Rng& rng, double concentration = 1.0) {
    Matrix p(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) p.row(s) = sample_dirichlet(num_actions, concentration, rng).transpose();
    return Policy{std::move(p)};
}

}  // namespace lowrank
