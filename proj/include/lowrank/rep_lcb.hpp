#pragma once

// Offline representation learning with an elliptical reward penalty, and the
// coverage quantities (omega, relative condition number) that govern it.

#include "lowrank/rep_ucb.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>

namespace lowrank {

struct OfflineSpec {
    Policy behavior;
    std::size_t n = 0;
    double delta = 0.1;
    double c_alpha = 1.0;
    double c_lambda = 1.0;
    double clamp = 2.0;
    double planner_tolerance = kDefaultPlannerTolerance;
    std::uint64_t seed = 0;
};

struct CoverageReport {
    ExtendedReal relative_condition_number;
    ExtendedReal omega;
    /// max d^pi/rho over rho's support; set only for one-hot features.
    std::optional<ExtendedReal> tabular_density_ratio;
};

/// n i.i.d. triples with (s,a) ~ d^{pi_b} (actions from pi_b) and s' ~ P*.
inline TransitionDataset generate_offline_dataset(const LowRankMDP& env, const Policy& behavior, std::size_t n,
                                                  Rng& rng) {
    const TransitionTensor truth = induced_transition(env.factorization);
    TransitionDataset data;
    data.provenance = Provenance::Offline;
    data.triples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const RollinResult r = sample_rollin(truth, behavior, env.init_dist, env.gamma, rng);
        const int a = static_cast<int>(sample_categorical(behavior.probs.row(r.state), rng));
        const int s_next = static_cast<int>(sample_categorical(truth.row(r.state, a), rng));
        data.triples.push_back({r.state, a, s_next});
    }
    return data;
}

/// max_{s,a} 1/pi_b(a|s); infinite when some action has zero probability.
inline ExtendedReal omega(const Policy& behavior) {
    const double min_p = behavior.probs.minCoeff();
    if (!(min_p > 0.0)) return ExtendedReal::infinity();
    return ExtendedReal(1.0 / min_p);
}

inline constexpr double kNullSpaceThreshold = 1e-12;

/// sup_x (x^T A x)/(x^T B x) for PSD A, B. Computed on the range of B
/// (eigenvalues above 1e-12); infinite when A has mass on B's null space.
inline ExtendedReal generalized_max_ratio(const Matrix& a, const Matrix& b) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const Eigen::MatrixXd& u = eig.eigenvectors();
    std::vector<Eigen::Index> range, null;
    for (Eigen::Index i = 0; i < lam.size(); ++i) (lam(i) > kNullSpaceThreshold ? range : null).push_back(i);

    if (!null.empty()) {
        Eigen::MatrixXd un(u.rows(), static_cast<Eigen::Index>(null.size()));
        for (std::size_t k = 0; k < null.size(); ++k) un.col(idx(k)) = u.col(null[k]);
        const double leak = (un.transpose() * a * un).trace();
        if (leak > kNullSpaceThreshold) return ExtendedReal::infinity();
    }
    if (range.empty()) return ExtendedReal(0.0);

    Eigen::MatrixXd w(u.rows(), static_cast<Eigen::Index>(range.size()));
    for (std::size_t k = 0; k < range.size(); ++k) w.col(idx(k)) = u.col(range[k]) / std::sqrt(lam(range[k]));
    const Eigen::MatrixXd c = w.transpose() * a * w;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ceig(0.5 * (c + c.transpose()), Eigen::EigenvaluesOnly);
    return ExtendedReal(std::max(0.0, ceig.eigenvalues().maxCoeff()));
}

/// Largest generalized eigenvalue of (E_{d^pi}[phi phi^T], E_rho[phi phi^T]).
inline ExtendedReal relative_condition_number(const OccupancyMeasure& d_pi, const OccupancyMeasure& rho,
                                              const Matrix& phi_star) {
    return generalized_max_ratio(feature_second_moment(phi_star, d_pi), feature_second_moment(phi_star, rho));
}

inline ExtendedReal relative_condition_number(const LowRankMDP& env, const Policy& pi, const OccupancyMeasure& rho) {
    const TransitionTensor truth = induced_transition(env.factorization);
    return relative_condition_number(occupancy(truth, pi, env.init_dist, env.gamma), rho, env.factorization.phi);
}

inline bool is_one_hot(const Matrix& phi) {
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
        int ones = 0;
        for (Eigen::Index j = 0; j < phi.cols(); ++j) {
            const double x = phi(i, j);
            if (x == 1.0)
                ++ones;
            else if (x != 0.0)
                return false;
        }
        if (ones != 1) return false;
    }
    return true;
}

/// max over (s,a) of d^pi(s,a)/rho(s,a); infinite if d^pi leaves rho's support.
inline ExtendedReal density_ratio(const OccupancyMeasure& d_pi, const OccupancyMeasure& rho) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < d_pi.dist.size(); ++i) {
        if (rho.dist(i) > 0.0)
            best = std::max(best, d_pi.dist(i) / rho.dist(i));
        else if (d_pi.dist(i) > 0.0)
            return ExtendedReal::infinity();
    }
    return ExtendedReal(best);
}

inline CoverageReport coverage_report(const LowRankMDP& env, const Policy& pi, const Policy& behavior) {
    const TransitionTensor truth = induced_transition(env.factorization);
    const OccupancyMeasure d_pi = occupancy(truth, pi, env.init_dist, env.gamma);
    const OccupancyMeasure rho = occupancy(truth, behavior, env.init_dist, env.gamma);
    CoverageReport rep;
    rep.relative_condition_number = relative_condition_number(d_pi, rho, env.factorization.phi);
    rep.omega = omega(behavior);
    if (is_one_hot(env.factorization.phi)) rep.tabular_density_ratio = density_ratio(d_pi, rho);
    return rep;
}

/// Empirical (s,a) distribution of a dataset.
inline OccupancyMeasure empirical_distribution(const TransitionDataset& data, int num_states, int num_actions) {
    OccupancyMeasure m{num_states, num_actions, Vector::Zero(static_cast<Eigen::Index>(num_states) * num_actions)};
    if (data.triples.empty()) return m;
    for (const auto& t : data.triples) m.dist(t.s * num_actions + t.a) += 1.0;
    m.dist /= static_cast<double>(data.size());
    return m;
}

struct LcbResult {
    Policy policy;
    BonusModel penalty;
    std::size_t model_index = 0;
    double alpha = 0.0;
    double lambda = 0.0;
};

/// MLE fit, penalty b = min(alpha ||phi_hat||_{Sigma_hat^{-1}}, clamp) with
/// lambda = c_lambda d ln(|M|/delta) and alpha = c_alpha sqrt((omega + d^2) gamma ln(|M|/delta)),
/// then planning on (P_hat, r - b).
inline LcbResult run_rep_lcb(const TransitionDataset& data, const ModelClass& cls, const Matrix& reward, double gamma,
                             const OfflineSpec& spec) {
    if (cls.candidates.empty()) throw ValidationError("run_rep_lcb: empty model class");
    const ExtendedReal w = omega(spec.behavior);
    if (w.is_infinite()) throw ConfigError("run_rep_lcb: omega is infinite (behavior policy has zero-probability actions)");
    if (!(spec.delta > 0.0 && spec.delta < 1.0)) throw ConfigError("run_rep_lcb: delta must lie in (0,1)");
    const int A = cls.candidates.front().num_actions;
    check_dataset(data, cls.candidates.front().num_states, A);

    const MleFit fit = mle_fit(cls, data);
    const Factorization& model = cls.candidates[fit.index];
    const double log_term = std::log(static_cast<double>(cls.size()) / spec.delta);
    const double d = model.dim;
    const double lambda = spec.c_lambda * d * log_term;
    const double alpha = spec.c_alpha * std::sqrt((w.value() + d * d) * gamma * log_term);
    BonusModel penalty(model.phi, A, empirical_covariance(model.phi, A, data, lambda), alpha, spec.clamp);
    const TransitionTensor p_hat = induced_transition(model);
    Policy pi = plan(p_hat, reward - penalty.matrix(), gamma, spec.planner_tolerance);
    return {std::move(pi), std::move(penalty), fit.index, alpha, lambda};
}

/// V^pi_{P_hat, r - b} - V^pi_{P*, r} at the initial distribution.
inline double pessimism_margin(const Policy& pi, const TransitionTensor& fitted, const Matrix& penalty,
                               const LowRankMDP& env, const TransitionTensor& truth) {
    return expected_value(fitted, env.reward - penalty, pi, env.gamma, env.init_dist) -
           expected_value(truth, env.reward, pi, env.gamma, env.init_dist);
}

inline double pessimism_margin(const Policy& pi, const Factorization& fitted, const BonusModel& penalty,
                               const LowRankMDP& env) {
    return pessimism_margin(pi, induced_transition(fitted), penalty.matrix(), env,
                            induced_transition(env.factorization));
}

/// c1 sqrt(omega ln(|M|/delta) (1-gamma) / n)
inline double pessimism_slack(double omega_value, std::size_t class_size, double delta, double gamma, std::size_t n,
                              double c1) {
    return c1 * std::sqrt(omega_value * std::log(static_cast<double>(class_size) / delta) * (1.0 - gamma) /
                          static_cast<double>(n));
}

}  // namespace lowrank
