#pragma once

// Exact Bellman-optimality iteration on an induced tabular model.

#include "lowrank/mdp.hpp"

#include <cmath>
#include <string>

namespace lowrank {

inline constexpr double kDefaultPlannerTolerance = 1e-8;

struct PlanningProblem {
    const TransitionTensor& transition;
    Matrix reward_effective;
    double gamma = 0.0;
    double tolerance = kDefaultPlannerTolerance;
    /// Optional starting iterate (|S| entries); zero when null.
    const Vector* warm_start = nullptr;
};

struct PlanResult {
    Vector v;
    Matrix q;
    Policy policy;
    int iterations = 0;
};

/// Deterministic greedy policy; ties go to the lowest action index.
inline Policy greedy_policy(const Matrix& q) {
    Matrix p = Matrix::Zero(q.rows(), q.cols());
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        Eigen::Index best = 0;
        for (Eigen::Index a = 1; a < q.cols(); ++a)
            if (q(s, a) > q(s, best)) best = a;
        p(s, best) = 1.0;
    }
    return Policy{std::move(p)};
}

inline int value_iteration_cap(double gamma, double tolerance) {
    return static_cast<int>(std::ceil(10.0 * std::log(1.0 / tolerance) / (1.0 - gamma))) + 100;
}

/// Iterates V <- max_a (r + gamma P V) from V = 0 (or the warm start) until the sup-norm step is at
/// most tol(1-gamma)/(2 gamma), which makes the greedy policy tol-optimal.
/// Every step is checked against the gamma-contraction; a violation or an
/// exhausted iteration budget throws ConvergenceError.
inline PlanResult value_iteration(const PlanningProblem& prob) {
    if (!(prob.tolerance > 0.0)) throw ValidationError("value_iteration: tolerance must be positive");
    if (!(prob.gamma >= 0.0 && prob.gamma < 1.0)) throw ValidationError("value_iteration: gamma must lie in [0,1)");
    const TransitionTensor& p = prob.transition;
    if (prob.reward_effective.rows() != p.num_states || prob.reward_effective.cols() != p.num_actions)
        throw ValidationError("value_iteration: reward shape mismatch");

    PlanResult out;
    if (prob.gamma == 0.0) {
        out.q = prob.reward_effective;
        out.v = out.q.rowwise().maxCoeff();
        out.policy = greedy_policy(out.q);
        out.iterations = 1;
        return out;
    }

    const double stop = prob.tolerance * (1.0 - prob.gamma) / (2.0 * prob.gamma);
    const int cap = value_iteration_cap(prob.gamma, prob.tolerance);
    const double scale = std::max(1.0, prob.reward_effective.cwiseAbs().maxCoeff() / (1.0 - prob.gamma));
    Vector v = Vector::Zero(p.num_states);
    if (prob.warm_start != nullptr && prob.warm_start->size() == p.num_states) v = *prob.warm_start;
    double prev_step = -1.0;
    for (int k = 1; k <= cap; ++k) {
        Matrix q = q_from_values(p, prob.reward_effective, v, prob.gamma);
        Vector next = q.rowwise().maxCoeff();
        const double step = (next - v).cwiseAbs().maxCoeff();
        if (prev_step >= 0.0 && step > prob.gamma * prev_step + 1e-13 * scale)
            throw ConvergenceError("value_iteration: contraction violated at iteration " + std::to_string(k));
        v = std::move(next);
        prev_step = step;
        if (step <= stop) {
            out.q = q_from_values(p, prob.reward_effective, v, prob.gamma);
            out.v = std::move(v);
            out.policy = greedy_policy(out.q);
            out.iterations = k;
            return out;
        }
    }
    throw ConvergenceError("value_iteration: no convergence within " + std::to_string(cap) + " iterations");
}

inline Policy plan(const TransitionTensor& model, const Matrix& reward_effective, double gamma,
                   double tolerance = kDefaultPlannerTolerance) {
    return value_iteration({model, reward_effective, gamma, tolerance}).policy;
}

inline Policy plan(const Factorization& model, const Matrix& reward_effective, double gamma,
                   double tolerance = kDefaultPlannerTolerance) {
    const TransitionTensor t = induced_transition(model);
    return plan(t, reward_effective, gamma, tolerance);
}

/// Optimal policy and its exact value on the environment's true model.
struct OptimalSolution {
    Policy policy;
    double value = 0.0;
};

inline OptimalSolution solve_optimal(const LowRankMDP& env, double tolerance = kDefaultPlannerTolerance) {
    const TransitionTensor t = induced_transition(env.factorization);
    Policy pi = plan(t, env.reward, env.gamma, tolerance);
    const double v = expected_value(t, env.reward, pi, env.gamma, env.init_dist);
    return {std::move(pi), v};
}

}  // namespace lowrank
