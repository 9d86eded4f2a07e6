#pragma once

// Finite low-rank MDPs: factorizations, exact evaluation, occupancy measures,
// roll-in sampling and the simulation-lemma decomposition.

#include "lowrank/common.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace lowrank {

/// Candidate low-rank transition model P(s'|s,a) = mu(s')^T phi(s,a).
/// Row s' of `mu` holds mu(s'); row s*|A|+a of `phi` holds phi(s,a).
struct Factorization {
    int num_states = 0;
    int num_actions = 0;
    int dim = 0;
    Matrix mu;   // |S| x d
    Matrix phi;  // (|S|*|A|) x d

    [[nodiscard]] int pair_index(int s, int a) const { return s * num_actions + a; }
    [[nodiscard]] int num_pairs() const { return num_states * num_actions; }
    [[nodiscard]] auto feature(int s, int a) const { return phi.row(pair_index(s, a)); }
};

/// Row-stochastic transition kernel stored as (|S|*|A|) x |S|.
struct TransitionTensor {
    int num_states = 0;
    int num_actions = 0;
    Matrix probs;

    [[nodiscard]] auto row(int s, int a) const { return probs.row(s * num_actions + a); }
    [[nodiscard]] double operator()(int s, int a, int s_next) const {
        return probs(s * num_actions + a, s_next);
    }
};

struct Policy {
    Matrix probs;  // |S| x |A|, row-stochastic

    [[nodiscard]] int num_states() const { return static_cast<int>(probs.rows()); }
    [[nodiscard]] int num_actions() const { return static_cast<int>(probs.cols()); }

    static Policy uniform(int num_states, int num_actions) {
        return Policy{Matrix::Constant(num_states, num_actions, 1.0 / num_actions)};
    }

    static Policy deterministic(const std::vector<int>& actions, int num_actions) {
        Matrix p = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
        for (std::size_t s = 0; s < actions.size(); ++s) p(idx(s), actions[s]) = 1.0;
        return Policy{std::move(p)};
    }

    /// (1 - eps) * this + eps * uniform
    [[nodiscard]] Policy mixed_with_uniform(double eps) const {
        return Policy{(1.0 - eps) * probs +
                      Matrix::Constant(probs.rows(), probs.cols(), eps / static_cast<double>(probs.cols()))};
    }
};

struct LowRankMDP {
    Factorization factorization;
    Matrix reward;  // |S| x |A|
    double gamma = 0.0;
    Vector init_dist;

    [[nodiscard]] int num_states() const { return factorization.num_states; }
    [[nodiscard]] int num_actions() const { return factorization.num_actions; }
};

/// Discounted state-action occupancy, indexed s*|A|+a.
struct OccupancyMeasure {
    int num_states = 0;
    int num_actions = 0;
    Vector dist;

    [[nodiscard]] double operator()(int s, int a) const { return dist(s * num_actions + a); }

    [[nodiscard]] Vector state_marginal() const {
        Vector m = Vector::Zero(num_states);
        for (int s = 0; s < num_states; ++s)
            for (int a = 0; a < num_actions; ++a) m(s) += dist(s * num_actions + a);
        return m;
    }
};

struct Transition {
    int s = 0;
    int a = 0;
    int s_next = 0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct Violation {
    enum class Kind { Stochasticity, NegativeProbability, FeatureNorm, EmbeddingNorm, InitDist, Policy, RewardScale };
    Kind kind;
    std::string where;
    double magnitude = 0.0;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<Violation> warnings;

    [[nodiscard]] bool ok() const { return violations.empty(); }

    [[nodiscard]] bool has(Violation::Kind k) const {
        return std::any_of(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; });
    }

    [[nodiscard]] double magnitude(Violation::Kind k) const {
        double m = 0.0;
        for (const auto& v : violations)
            if (v.kind == k) m = std::max(m, v.magnitude);
        return m;
    }
};

inline const char* to_string(Violation::Kind k) {
    switch (k) {
        case Violation::Kind::Stochasticity: return "stochasticity";
        case Violation::Kind::NegativeProbability: return "negative-probability";
        case Violation::Kind::FeatureNorm: return "feature-norm";
        case Violation::Kind::EmbeddingNorm: return "embedding-norm";
        case Violation::Kind::InitDist: return "init-dist";
        case Violation::Kind::Policy: return "policy";
        case Violation::Kind::RewardScale: return "reward-scale";
    }
    return "unknown";
}

namespace tolerance {
inline constexpr double kStochastic = 1e-9;
inline constexpr double kNegativeDust = 1e-12;
inline constexpr double kNorm = 1e-9;
inline constexpr double kInitDist = 1e-12;
inline constexpr double kPolicyRow = 1e-12;
}  // namespace tolerance

inline void check_shapes(const Factorization& f) {
    if (f.num_states <= 0 || f.num_actions <= 0 || f.dim <= 0)
        throw ValidationError("factorization: sizes must be positive");
    if (f.mu.rows() != f.num_states || f.mu.cols() != f.dim)
        throw ValidationError("factorization: mu must be |S| x d");
    if (f.phi.rows() != static_cast<Eigen::Index>(f.num_states) * f.num_actions || f.phi.cols() != f.dim)
        throw ValidationError("factorization: phi must be (|S|*|A|) x d");
}

/// Largest ||sum_s mu(s) g(s)||_2 over binary g. Exhaustive (Gray-code order)
/// for |S| <= 20, otherwise 1000 pseudo-random binary vectors.
inline double max_embedding_norm(const Matrix& mu) {
    const auto n = static_cast<int>(mu.rows());
    Vector acc = Vector::Zero(mu.cols());
    double best = 0.0;
    if (n <= 20) {
        const std::uint64_t total = std::uint64_t{1} << n;
        std::uint64_t prev_gray = 0;
        for (std::uint64_t i = 1; i < total; ++i) {
            const std::uint64_t gray = i ^ (i >> 1);
            const std::uint64_t flipped = gray ^ prev_gray;
            const int bit = std::countr_zero(flipped);
            if (gray & flipped)
                acc += mu.row(bit).transpose();
            else
                acc -= mu.row(bit).transpose();
            prev_gray = gray;
            best = std::max(best, acc.norm());
        }
        return best;
    }
    Rng rng(0x5eed5eedULL);
    for (int trial = 0; trial < 1000; ++trial) {
        acc.setZero();
        for (int s = 0; s < n; ++s)
            if (rng() & 1ULL) acc += mu.row(s).transpose();
        best = std::max(best, acc.norm());
    }
    return best;
}

inline ValidationReport validate_factorization(const Factorization& f) {
    check_shapes(f);
    ValidationReport report;
    const Matrix p = f.phi * f.mu.transpose();
    for (int s = 0; s < f.num_states; ++s) {
        for (int a = 0; a < f.num_actions; ++a) {
            const int row = f.pair_index(s, a);
            const std::string where = "(s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")";
            const double dev = std::abs(p.row(row).sum() - 1.0);
            if (dev > tolerance::kStochastic)
                report.violations.push_back({Violation::Kind::Stochasticity, where, dev});
            const double min_p = p.row(row).minCoeff();
            if (min_p < -tolerance::kNegativeDust)
                report.violations.push_back({Violation::Kind::NegativeProbability, where, -min_p});
            const double norm = f.phi.row(row).norm();
            if (norm > 1.0 + tolerance::kNorm)
                report.violations.push_back({Violation::Kind::FeatureNorm, where, norm - 1.0});
        }
    }
    const double bound = std::sqrt(static_cast<double>(f.dim));
    const double emb = max_embedding_norm(f.mu);
    if (emb > bound + tolerance::kNorm)
        report.violations.push_back({Violation::Kind::EmbeddingNorm, "mu", emb - bound});
    return report;
}

inline ValidationReport validate_policy(const Policy& pi, int num_states, int num_actions) {
    if (pi.num_states() != num_states || pi.num_actions() != num_actions)
        throw ValidationError("policy: shape mismatch");
    ValidationReport report;
    for (int s = 0; s < num_states; ++s) {
        const double dev = std::abs(pi.probs.row(s).sum() - 1.0);
        const double min_p = pi.probs.row(s).minCoeff();
        if (dev > tolerance::kPolicyRow || min_p < 0.0)
            report.violations.push_back(
                {Violation::Kind::Policy, "s=" + std::to_string(s), std::max(dev, -min_p)});
    }
    return report;
}

/// Validates the full environment. Per-step rewards above 1-gamma are reported
/// as warnings, not violations.
inline ValidationReport validate_mdp(const LowRankMDP& m) {
    ValidationReport report = validate_factorization(m.factorization);
    if (m.reward.rows() != m.num_states() || m.reward.cols() != m.num_actions())
        throw ValidationError("mdp: reward must be |S| x |A|");
    if (m.init_dist.size() != m.num_states()) throw ValidationError("mdp: init_dist must have |S| entries");
    if (!(m.gamma >= 0.0 && m.gamma < 1.0)) throw ValidationError("mdp: gamma must lie in [0,1)");
    const double dev = std::abs(m.init_dist.sum() - 1.0);
    if (dev > tolerance::kInitDist || m.init_dist.minCoeff() < 0.0)
        report.violations.push_back({Violation::Kind::InitDist, "init_dist", std::max(dev, -m.init_dist.minCoeff())});
    const double excess = m.reward.maxCoeff() - (1.0 - m.gamma);
    if (excess > 0.0) report.warnings.push_back({Violation::Kind::RewardScale, "reward", excess});
    return report;
}

/// P(s'|s,a) = mu(s')^T phi(s,a). Dust in [-1e-12, 0) is clamped and rows are
/// renormalized when within 1e-9 of stochastic; anything worse throws.
inline TransitionTensor induced_transition(const Factorization& f) {
    check_shapes(f);
    TransitionTensor t{f.num_states, f.num_actions, f.phi * f.mu.transpose()};
    for (Eigen::Index row = 0; row < t.probs.rows(); ++row) {
        auto r = t.probs.row(row);
        for (Eigen::Index j = 0; j < r.size(); ++j) {
            if (r(j) < 0.0) {
                if (r(j) < -tolerance::kNegativeDust) {
                    std::ostringstream os;
                    os << "induced transition has negative probability " << r(j) << " at row " << row;
                    throw InvalidModelError(os.str());
                }
                r(j) = 0.0;
            }
        }
        const double sum = r.sum();
        if (std::abs(sum - 1.0) > tolerance::kStochastic) {
            std::ostringstream os;
            os << "induced transition row " << row << " sums to " << sum;
            throw InvalidModelError(os.str());
        }
        r /= sum;
    }
    return t;
}

/// P_pi(s, s') = sum_a pi(a|s) P(s'|s,a)
inline Matrix policy_transition(const TransitionTensor& p, const Policy& pi) {
    Matrix out = Matrix::Zero(p.num_states, p.num_states);
    for (int s = 0; s < p.num_states; ++s)
        for (int a = 0; a < p.num_actions; ++a) {
            const double w = pi.probs(s, a);
            if (w != 0.0) out.row(s) += w * p.row(s, a);
        }
    return out;
}

inline Vector policy_reward(const Matrix& reward, const Policy& pi) {
    return pi.probs.cwiseProduct(reward).rowwise().sum();
}

/// Q(s,a) = r(s,a) + gamma * sum_s' P(s'|s,a) V(s')
inline Matrix q_from_values(const TransitionTensor& p, const Matrix& reward, const Vector& v, double gamma) {
    const Vector next = p.probs * v;
    Matrix q = reward;
    for (int s = 0; s < p.num_states; ++s)
        for (int a = 0; a < p.num_actions; ++a) q(s, a) += gamma * next(s * p.num_actions + a);
    return q;
}

struct PolicyValue {
    Vector v;  // |S|
    Matrix q;  // |S| x |A|
};

/// Exact evaluation by a direct LU solve of (I - gamma P_pi) V = r_pi.
inline PolicyValue value_of_policy(const TransitionTensor& p, const Matrix& reward, const Policy& pi, double gamma) {
    const Matrix p_pi = policy_transition(p, pi);
    const Vector r_pi = policy_reward(reward, pi);
    const Matrix lhs = Matrix::Identity(p.num_states, p.num_states) - gamma * p_pi;
    Vector v = lhs.partialPivLu().solve(r_pi);
    Matrix q = q_from_values(p, reward, v, gamma);
    return {std::move(v), std::move(q)};
}

/// E_{s0 ~ d0}[V^pi(s0)]
inline double expected_value(const TransitionTensor& p, const Matrix& reward, const Policy& pi, double gamma,
                             const Vector& init_dist) {
    return init_dist.dot(value_of_policy(p, reward, pi, gamma).v);
}

inline OccupancyMeasure occupancy(const TransitionTensor& p, const Policy& pi, const Vector& init_dist, double gamma) {
    const Matrix p_pi = policy_transition(p, pi);
    const Matrix lhs = Matrix::Identity(p.num_states, p.num_states) - gamma * p_pi.transpose();
    const Vector state = lhs.partialPivLu().solve((1.0 - gamma) * init_dist);
    OccupancyMeasure d{p.num_states, p.num_actions, Vector::Zero(static_cast<Eigen::Index>(p.num_states) * p.num_actions)};
    for (int s = 0; s < p.num_states; ++s)
        for (int a = 0; a < p.num_actions; ++a) d.dist(s * p.num_actions + a) = state(s) * pi.probs(s, a);
    return d;
}

/// d^pi(s) U(a): the roll-in state marginal paired with uniform actions.
inline OccupancyMeasure with_uniform_actions(const OccupancyMeasure& d) {
    OccupancyMeasure out = d;
    const Vector m = d.state_marginal();
    for (int s = 0; s < d.num_states; ++s)
        for (int a = 0; a < d.num_actions; ++a) out.dist(s * d.num_actions + a) = m(s) / d.num_actions;
    return out;
}

/// ||d(s) - (1-gamma) d0(s) - gamma sum P(s|s~,a~) d(s~,a~)||_inf
inline double flow_residual(const TransitionTensor& p, const OccupancyMeasure& d, const Vector& init_dist,
                            double gamma) {
    const Vector inflow = p.probs.transpose() * d.dist;
    const Vector resid = d.state_marginal() - (1.0 - gamma) * init_dist - gamma * inflow;
    return resid.cwiseAbs().maxCoeff();
}

struct RollinResult {
    int state = 0;
    int steps = 0;
    bool capped = false;
};

/// ceil(100 / (1 - gamma)), guarded against round-off in 1 - gamma.
inline int default_rollin_cap(double gamma) {
    return static_cast<int>(std::ceil(100.0 / (1.0 - gamma) - 1e-9));
}

/// Draws s ~ d^pi: start at s0 ~ d0 and at every step stop with probability
/// 1-gamma, otherwise act with pi and transition with P.
inline RollinResult sample_rollin(const TransitionTensor& p, const Policy& pi, const Vector& init_dist, double gamma,
                                  Rng& rng, int cap = -1) {
    if (cap < 0) cap = default_rollin_cap(gamma);
    RollinResult out;
    out.state = static_cast<int>(sample_categorical(init_dist, rng));
    while (true) {
        if (uniform01(rng) >= gamma) return out;
        if (out.steps >= cap) {
            out.capped = true;
            return out;
        }
        const int a = static_cast<int>(sample_categorical(pi.probs.row(out.state), rng));
        out.state = static_cast<int>(sample_categorical(p.row(out.state, a), rng));
        ++out.steps;
    }
}

struct SampledTransition {
    Transition transition;
    bool capped = false;
};

/// s ~ d^pi, a ~ U(A), s' ~ P(.|s,a)
inline SampledTransition sample_triple(const TransitionTensor& p, const Policy& pi, const Vector& init_dist,
                                       double gamma, Rng& rng) {
    const RollinResult r = sample_rollin(p, pi, init_dist, gamma, rng);
    const int a = static_cast<int>(uniform_index(static_cast<std::size_t>(p.num_actions), rng));
    const int s_next = static_cast<int>(sample_categorical(p.row(r.state, a), rng));
    return {{r.state, a, s_next}, r.capped};
}

enum class SimulationForm { First, Second };

/// Both simulation-lemma decompositions of V^pi_{P_model, r+b} - V^pi_{P_ref, r}.
/// First: expectation over d^pi_{P_model} with values of (P_ref, r).
/// Second: expectation over d^pi_{P_ref} with values of (P_model, r+b).
inline double simulation_gap(const TransitionTensor& p_model, const TransitionTensor& p_ref, const Matrix& reward,
                             const Matrix& bonus, const Policy& pi, double gamma, const Vector& init_dist,
                             SimulationForm form) {
    const bool first = form == SimulationForm::First;
    const TransitionTensor& roll = first ? p_model : p_ref;
    const Vector v = first ? value_of_policy(p_ref, reward, pi, gamma).v
                           : value_of_policy(p_model, reward + bonus, pi, gamma).v;
    const OccupancyMeasure d = occupancy(roll, pi, init_dist, gamma);
    const Vector model_next = p_model.probs * v;
    const Vector ref_next = p_ref.probs * v;
    double total = 0.0;
    for (int s = 0; s < p_model.num_states; ++s)
        for (int a = 0; a < p_model.num_actions; ++a) {
            const int i = s * p_model.num_actions + a;
            total += d.dist(i) * (bonus(s, a) + gamma * model_next(i) - gamma * ref_next(i));
        }
    return total / (1.0 - gamma);
}

}  // namespace lowrank
