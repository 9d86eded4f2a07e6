#pragma once

// Online representation learning with elliptical exploration bonuses, plus the
// optimism, model-error and elliptical-potential diagnostics of a run.

#include "lowrank/model_class.hpp"
#include "lowrank/planner.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace lowrank {

enum class RefitSchedule {
    EveryEpisode,
    /// Refit only when the dataset size is a power of two. Faster, not the
    /// canonical algorithm.
    Doubling,
};

struct UcbConfig {
    std::size_t episodes = 1000;
    double delta = 0.1;
    double c_alpha = 1.0;
    double c_lambda = 1.0;
    double bonus_clamp = 2.0;
    double planner_tolerance = kDefaultPlannerTolerance;
    std::uint64_t seed = 0;
    RefitSchedule refit = RefitSchedule::EveryEpisode;
    /// Constant c1 in the optimism threshold -c1 sqrt(|A| zeta_n (1-gamma)).
    double c1 = 1.0;
    /// Compute the ground-truth diagnostics (needs the environment's phi*).
    bool diagnostics = true;
    /// Control-condition switches used by the epsilon-greedy baseline.
    bool bonus_enabled = true;
    double uniform_mix = 0.0;

    void validate() const {
        if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("ucb config: delta must lie in (0,1)");
        if (!(c_alpha >= 0.0) || !(c_lambda > 0.0)) throw ConfigError("ucb config: constants must be positive");
        if (!(bonus_clamp >= 0.0)) throw ConfigError("ucb config: bonus clamp must be nonnegative");
        if (!(planner_tolerance > 0.0)) throw ConfigError("ucb config: planner tolerance must be positive");
        if (!(uniform_mix >= 0.0 && uniform_mix <= 1.0)) throw ConfigError("ucb config: epsilon must lie in [0,1]");
    }
};

struct Schedules {
    double alpha = 0.0;
    double lambda = 0.0;
};

/// alpha_n = c_alpha sqrt((|A| + d^2) gamma ln(|M| n / delta)),
/// lambda_n = c_lambda d ln(|M| n / delta).
inline Schedules schedules(std::size_t n, int dim, int num_actions, std::size_t class_size, double delta,
                           double gamma, double c_alpha, double c_lambda) {
    if (n < 1) throw ValidationError("schedules: n must be at least 1");
    const double log_term =
        std::log(static_cast<double>(class_size) * static_cast<double>(n) / delta);
    const double d = dim;
    return {c_alpha * std::sqrt((num_actions + d * d) * gamma * log_term), c_lambda * d * log_term};
}

/// sum_{(s,a) in data} phi(s,a) phi(s,a)^T + lambda I
inline Matrix empirical_covariance(const Matrix& phi_hat, int num_actions, const TransitionDataset& data,
                                   double lambda) {
    if (!(lambda > 0.0)) throw ValidationError("empirical_covariance: lambda must be positive");
    const auto d = phi_hat.cols();
    Matrix sigma = Matrix::Zero(d, d);
    for (const auto& t : data.triples) {
        const Vector f = phi_hat.row(t.s * num_actions + t.a).transpose();
        sigma.noalias() += f * f.transpose();
    }
    sigma += lambda * Matrix::Identity(d, d);
    return sigma;
}

/// b(s,a) = min(alpha sqrt(phi^T Sigma^{-1} phi), clamp), evaluated through a
/// Cholesky solve.
class BonusModel {
public:
    BonusModel(Matrix phi_hat, int num_actions, Matrix sigma_hat, double alpha, double clamp)
        : phi_hat_(std::move(phi_hat)),
          sigma_hat_(std::move(sigma_hat)),
          num_actions_(num_actions),
          alpha_(alpha),
          clamp_(clamp),
          chol_(sigma_hat_) {
        if (chol_.info() != Eigen::Success) throw ValidationError("BonusModel: covariance is not positive definite");
    }

    [[nodiscard]] double operator()(int s, int a) const {
        if (alpha_ == 0.0) return 0.0;
        const Vector f = phi_hat_.row(s * num_actions_ + a).transpose();
        const double quad = std::max(0.0, f.dot(chol_.solve(f)));
        return std::min(alpha_ * std::sqrt(quad), clamp_);
    }

    /// Bonus for every pair as an |S| x |A| matrix.
    [[nodiscard]] Matrix matrix() const {
        const int num_states = static_cast<int>(phi_hat_.rows()) / num_actions_;
        Matrix b(num_states, num_actions_);
        for (int s = 0; s < num_states; ++s)
            for (int a = 0; a < num_actions_; ++a) b(s, a) = (*this)(s, a);
        return b;
    }

    [[nodiscard]] const Matrix& phi_hat() const { return phi_hat_; }
    [[nodiscard]] const Matrix& sigma_hat() const { return sigma_hat_; }
    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] double clamp() const { return clamp_; }

private:
    Matrix phi_hat_;
    Matrix sigma_hat_;
    int num_actions_;
    double alpha_;
    double clamp_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
};

inline double bonus_eval(const BonusModel& b, int s, int a) { return b(s, a); }

/// V^pi_{P_hat, r + b} - V^pi_{P*, r} at the initial distribution.
inline double optimism_margin(const Policy& pi, const TransitionTensor& fitted, const Matrix& bonus,
                              const LowRankMDP& env, const TransitionTensor& truth) {
    const double optimistic = expected_value(fitted, env.reward + bonus, pi, env.gamma, env.init_dist);
    const double actual = expected_value(truth, env.reward, pi, env.gamma, env.init_dist);
    return optimistic - actual;
}

inline double optimism_margin(const Policy& pi, const Factorization& fitted, const BonusModel& bonus,
                              const LowRankMDP& env) {
    return optimism_margin(pi, induced_transition(fitted), bonus.matrix(), env, induced_transition(env.factorization));
}

/// -c1 sqrt(|A| zeta_n (1-gamma)) with zeta_n = ln(|M| n / delta) / n.
inline double optimism_threshold(std::size_t n, int num_actions, std::size_t class_size, double delta, double gamma,
                                 double c1) {
    const double zeta = std::log(static_cast<double>(class_size) * static_cast<double>(n) / delta) / n;
    return -c1 * std::sqrt(num_actions * zeta * (1.0 - gamma));
}

struct EllipticalTrace {
    /// E_{d^{pibar_n}}[||phi*||^2_{Sigma^{-1}_{rho_n}}] for n = 1..N, with
    /// Sigma_{rho_n} = n E_{rho_n}[phi* phi*^T] + lambda_n I.
    std::vector<double> per_episode;
    double cumulative = 0.0;
    /// d ln(1 + N / (d lambda_1))
    double bound = 0.0;
    /// Fixed-regularizer process M_n = M_{n-1} + G_n, M_0 = lambda_1 I, with
    /// G_n = E_{d^{pibar_{n-1}}}[phi* phi*^T].
    double trace_sum = 0.0;  // sum_n Tr(G_n M_{n-1}^{-1})
    double logdet_gap = 0.0;  // 2 ln det M_N - 2 ln det(lambda_1 I)

    [[nodiscard]] bool lemma_holds(double slack = 1e-6) const {
        return trace_sum <= logdet_gap + slack && logdet_gap <= bound + slack && cumulative <= bound + slack;
    }
};

/// E_{(s,a)~dist}[phi phi^T]
inline Matrix feature_second_moment(const Matrix& phi, const OccupancyMeasure& dist) {
    const auto d = phi.cols();
    Matrix m = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
        const double w = dist.dist(i);
        if (w == 0.0) continue;
        const Vector f = phi.row(i).transpose();
        m.noalias() += w * (f * f.transpose());
    }
    return m;
}

inline double log_det_spd(const Matrix& m) {
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw ValidationError("log_det_spd: matrix is not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

/// Elliptical potential under the true feature for the roll-in policies
/// pi_0..pi_N (N+1 entries). `lambda_of_n` supplies lambda_n for n >= 1.
inline EllipticalTrace elliptical_trace(const LowRankMDP& env, const std::vector<Policy>& policies,
                                        const Matrix& phi_star, const std::function<double(std::size_t)>& lambda_of_n) {
    EllipticalTrace out;
    if (policies.size() < 2) return out;
    const std::size_t n_episodes = policies.size() - 1;
    const TransitionTensor truth = induced_transition(env.factorization);
    const auto d = phi_star.cols();
    std::vector<Matrix> g;  // g[j] = E_{d^{pibar_j}}[phi phi^T]
    g.reserve(policies.size());
    for (const auto& pi : policies)
        g.push_back(feature_second_moment(
            phi_star, with_uniform_actions(occupancy(truth, pi, env.init_dist, env.gamma))));

    const double lambda1 = lambda_of_n(1);
    const Matrix eye = Matrix::Identity(d, d);
    Matrix sum_g = Matrix::Zero(d, d);  // sum_{j<n} g[j] = n E_{rho_n}[phi phi^T]
    for (std::size_t n = 1; n <= n_episodes; ++n) {
        // Lemma process: M_{n-1} = lambda_1 I + sum_{j<n-1} g[j], G_n = g[n-1].
        const Matrix m_prev = lambda1 * eye + sum_g;
        out.trace_sum += (m_prev.llt().solve(g[n - 1])).trace();
        sum_g += g[n - 1];
        const Matrix sigma = sum_g + lambda_of_n(n) * eye;
        const double inc = (sigma.llt().solve(g[n])).trace();
        out.per_episode.push_back(inc);
        out.cumulative += inc;
    }
    out.logdet_gap = log_det_spd(lambda1 * eye + sum_g) - d * std::log(lambda1);
    out.logdet_gap *= 2.0;
    out.bound = static_cast<double>(d) * std::log(1.0 + static_cast<double>(n_episodes) / (d * lambda1));
    return out;
}

/// Sample size from the conversion lemma: eps' = eps / (a1 sqrt(ln(e+a2)) sqrt(ln(e+a3))),
/// N = ceil(ln^2(1 + 1/eps'^2) / eps'^2).
inline std::uint64_t iterations_for_epsilon(double eps, double a1, double a2, double a3) {
    if (!(eps > 0.0) || !(a1 > 0.0)) throw ValidationError("iterations_for_epsilon: eps and a1 must be positive");
    const double e = std::exp(1.0);
    const double eps_p = eps / (a1 * std::sqrt(std::log(e + a2)) * std::sqrt(std::log(e + a3)));
    const double inv = 1.0 / (eps_p * eps_p);
    const double l = std::log1p(inv);
    return static_cast<std::uint64_t>(std::ceil(inv * l * l));
}

struct EpisodeRecord {
    std::size_t episode = 0;
    std::size_t n = 0;
    std::size_t model_index = 0;
    double sq_tv = 0.0;
    double optimism_margin_pistar = 0.0;
    double optimism_threshold = 0.0;
    double value_pin = 0.0;
    double bonus_mean = 0.0;
    double potential_increment = 0.0;
    bool rollin_capped = false;
};

struct RunDiagnostics {
    std::vector<EpisodeRecord> episodes;
    EllipticalTrace potential;
    double optimal_value = 0.0;
    std::size_t rollin_cap_firings = 0;

    /// (1/N) sum_n V^{pi_n}
    [[nodiscard]] double mixture_value() const {
        if (episodes.empty()) return 0.0;
        double s = 0.0;
        for (const auto& e : episodes) s += e.value_pin;
        return s / static_cast<double>(episodes.size());
    }

    [[nodiscard]] double optimism_violation_rate() const {
        if (episodes.empty()) return 0.0;
        std::size_t bad = 0;
        for (const auto& e : episodes)
            if (e.optimism_margin_pistar < e.optimism_threshold) ++bad;
        return static_cast<double>(bad) / static_cast<double>(episodes.size());
    }
};

struct UcbRun {
    std::vector<Policy> policies;  // pi_1..pi_N
    TransitionDataset dataset;
    RunDiagnostics diagnostics;
};

namespace detail {

/// Per-candidate running sums of phi phi^T, accumulated in dataset order.
class CovarianceAccumulator {
public:
    explicit CovarianceAccumulator(const ModelClass& cls) {
        for (const auto& c : cls.candidates) {
            phis_.push_back(&c.phi);
            sums_.push_back(Matrix::Zero(c.dim, c.dim));
            num_actions_ = c.num_actions;
        }
    }

    void add(const Transition& t) {
        for (std::size_t i = 0; i < sums_.size(); ++i) {
            const Vector f = phis_[i]->row(t.s * num_actions_ + t.a).transpose();
            sums_[i].noalias() += f * f.transpose();
        }
    }

    [[nodiscard]] Matrix covariance(std::size_t i, double lambda) const {
        const auto d = sums_[i].rows();
        return sums_[i] + lambda * Matrix::Identity(d, d);
    }

private:
    std::vector<const Matrix*> phis_;
    std::vector<Matrix> sums_;
    int num_actions_ = 0;
};

inline void check_class_shape(const LowRankMDP& env, const ModelClass& cls) {
    if (cls.candidates.empty()) throw ValidationError("model class is empty");
    for (const auto& c : cls.candidates)
        if (c.num_states != env.num_states() || c.num_actions != env.num_actions())
            throw ValidationError("model class candidate does not match the environment shape");
}

}  // namespace detail

/// One online run: roll in with pi_{n-1}, take a uniform action, append the
/// triple, refit by MLE, rebuild the bonus and plan on (P_hat_n, r + b_n).
inline UcbRun run_rep_ucb(const LowRankMDP& env, const ModelClass& cls, const UcbConfig& cfg, Rng& rng) {
    cfg.validate();
    detail::check_class_shape(env, cls);
    const int S = env.num_states();
    const int A = env.num_actions();
    const TransitionTensor truth = induced_transition(env.factorization);

    UcbRun run;
    run.dataset.provenance = Provenance::Online;
    run.policies.reserve(cfg.episodes);

    IncrementalMle mle(cls);
    detail::CovarianceAccumulator cov(cls);

    OptimalSolution opt;
    Vector rho_sum;
    if (cfg.diagnostics) {
        opt = solve_optimal(env, cfg.planner_tolerance);
        run.diagnostics.optimal_value = opt.value;
        rho_sum = Vector::Zero(static_cast<Eigen::Index>(S) * A);
    }

    Policy rollin = Policy::uniform(S, A);
    std::size_t current = 0;
    for (std::size_t n = 1; n <= cfg.episodes; ++n) {
        const SampledTransition sample = sample_triple(truth, rollin, env.init_dist, env.gamma, rng);
        run.dataset.triples.push_back(sample.transition);
        mle.add(sample.transition);
        cov.add(sample.transition);
        if (sample.capped) ++run.diagnostics.rollin_cap_firings;

        const bool refit = cfg.refit == RefitSchedule::EveryEpisode || n == 1 || (n & (n - 1)) == 0;
        if (refit) current = mle.best().index;
        const Factorization& fitted = cls.candidates[current];
        const TransitionTensor& fitted_p = mle.tensor(current);

        const Schedules sched =
            schedules(n, fitted.dim, A, cls.size(), cfg.delta, env.gamma, cfg.c_alpha, cfg.c_lambda);
        const double alpha = cfg.bonus_enabled ? sched.alpha : 0.0;
        const BonusModel bonus(fitted.phi, A, cov.covariance(current, sched.lambda), alpha, cfg.bonus_clamp);
        const Matrix b = bonus.matrix();

        Policy greedy = plan(fitted_p, env.reward + b, env.gamma, cfg.planner_tolerance);
        Policy next = cfg.uniform_mix > 0.0 ? greedy.mixed_with_uniform(cfg.uniform_mix) : std::move(greedy);

        if (cfg.diagnostics) {
            rho_sum += with_uniform_actions(occupancy(truth, rollin, env.init_dist, env.gamma)).dist;
            const OccupancyMeasure rho{S, A, rho_sum / static_cast<double>(n)};
            EpisodeRecord rec;
            rec.episode = n;
            rec.n = run.dataset.size();
            rec.model_index = current;
            rec.sq_tv = expected_sq_tv(fitted_p, truth, rho);
            rec.optimism_margin_pistar = optimism_margin(opt.policy, fitted_p, b, env, truth);
            rec.optimism_threshold = optimism_threshold(n, A, cls.size(), cfg.delta, env.gamma, cfg.c1);
            rec.value_pin = expected_value(truth, env.reward, next, env.gamma, env.init_dist);
            rec.bonus_mean = b.mean();
            rec.rollin_capped = sample.capped;
            run.diagnostics.episodes.push_back(rec);
        }
        rollin = next;
        run.policies.push_back(std::move(next));
    }

    if (cfg.diagnostics && cfg.episodes > 0) {
        std::vector<Policy> all;
        all.reserve(run.policies.size() + 1);
        all.push_back(Policy::uniform(S, A));
        all.insert(all.end(), run.policies.begin(), run.policies.end());
        const int d_star = env.factorization.dim;
        const auto lambda_of_n = [&](std::size_t n) {
            return schedules(n, d_star, A, cls.size(), cfg.delta, env.gamma, cfg.c_alpha, cfg.c_lambda).lambda;
        };
        run.diagnostics.potential = elliptical_trace(env, all, env.factorization.phi, lambda_of_n);
        for (std::size_t i = 0; i < run.diagnostics.episodes.size(); ++i)
            run.diagnostics.episodes[i].potential_increment = run.diagnostics.potential.per_episode[i];
    }
    return run;
}

}  // namespace lowrank
