#pragma once

// Finite model classes, the exact maximum-likelihood oracle and total-variation
// diagnostics.

#include "lowrank/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace lowrank {

inline constexpr double kLikelihoodFloor = 1e-12;

struct ModelClass {
    std::vector<Factorization> candidates;
    /// Index of the data-generating candidate; diagnostics only.
    std::optional<std::size_t> true_index;

    [[nodiscard]] std::size_t size() const { return candidates.size(); }
};

enum class Provenance { Online, Offline };

struct TransitionDataset {
    std::vector<Transition> triples;
    Provenance provenance = Provenance::Online;

    [[nodiscard]] std::size_t size() const { return triples.size(); }
};

inline void check_dataset(const TransitionDataset& data, int num_states, int num_actions) {
    for (const auto& t : data.triples)
        if (t.s < 0 || t.s >= num_states || t.a < 0 || t.a >= num_actions || t.s_next < 0 || t.s_next >= num_states)
            throw ValidationError("dataset: transition index out of range");
}

inline double floored_log(double p) { return std::log(std::max(p, kLikelihoodFloor)); }

inline double log_likelihood(const TransitionTensor& model, const TransitionDataset& data) {
    double total = 0.0;
    for (const auto& t : data.triples) total += floored_log(model(t.s, t.a, t.s_next));
    return total;
}

/// Sum of ln max(P(s'|s,a), 1e-12); zero for an empty dataset.
inline double log_likelihood(const Factorization& model, const TransitionDataset& data) {
    if (data.triples.empty()) return 0.0;
    return log_likelihood(induced_transition(model), data);
}

struct MleFit {
    std::size_t index = 0;
    double log_likelihood = 0.0;
};

inline MleFit argmax_lowest_index(const std::vector<double>& scores) {
    MleFit best{0, scores.at(0)};
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > best.log_likelihood) best = {i, scores[i]};
    return best;
}

/// Exact MLE over the class; ties go to the lowest index.
inline MleFit mle_fit(const ModelClass& cls, const TransitionDataset& data) {
    if (cls.candidates.empty()) throw ValidationError("mle_fit: empty model class");
    std::vector<double> scores;
    scores.reserve(cls.size());
    for (const auto& c : cls.candidates) scores.push_back(log_likelihood(c, data));
    return argmax_lowest_index(scores);
}

/// Running log-likelihoods for a growing dataset. Terms are accumulated in
/// dataset order, so `best()` agrees bit-for-bit with `mle_fit` on the same data.
class IncrementalMle {
public:
    explicit IncrementalMle(const ModelClass& cls) {
        if (cls.candidates.empty()) throw ValidationError("IncrementalMle: empty model class");
        tensors_.reserve(cls.size());
        for (const auto& c : cls.candidates) tensors_.push_back(induced_transition(c));
        scores_.assign(cls.size(), 0.0);
    }

    void add(const Transition& t) {
        for (std::size_t i = 0; i < tensors_.size(); ++i) scores_[i] += floored_log(tensors_[i](t.s, t.a, t.s_next));
    }

    [[nodiscard]] MleFit best() const { return argmax_lowest_index(scores_); }
    [[nodiscard]] const std::vector<double>& scores() const { return scores_; }
    [[nodiscard]] const TransitionTensor& tensor(std::size_t i) const { return tensors_.at(i); }
    [[nodiscard]] std::size_t size() const { return tensors_.size(); }

private:
    std::vector<TransitionTensor> tensors_;
    std::vector<double> scores_;
};

/// E_{(s,a)~dist} ||P_model(.|s,a) - P_truth(.|s,a)||_1^2, always in [0, 4].
inline double expected_sq_tv(const TransitionTensor& model, const TransitionTensor& truth,
                             const OccupancyMeasure& dist) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < model.probs.rows(); ++i) {
        const double w = dist.dist(i);
        if (w == 0.0) continue;
        const double l1 = (model.probs.row(i) - truth.probs.row(i)).cwiseAbs().sum();
        total += w * l1 * l1;
    }
    return total;
}

inline double expected_sq_tv(const Factorization& model, const Factorization& truth, const OccupancyMeasure& dist) {
    return expected_sq_tv(induced_transition(model), induced_transition(truth), dist);
}

struct DecayCurve {
    std::vector<std::size_t> n_grid;
    std::vector<std::vector<double>> per_seed;  // [seed][grid point]
    std::vector<double> mean;
};

/// Fits the MLE on growing prefixes of one online-style sample stream per seed
/// and records expected_sq_tv under rho_n = (1/n) sum_j d^{pi_j}(s) U(a), where
/// pi_j cycles through `samplers`.
inline DecayCurve mle_decay_curve(const LowRankMDP& env, const ModelClass& cls, const std::vector<Policy>& samplers,
                                  const std::vector<std::size_t>& n_grid, const std::vector<std::uint64_t>& seeds) {
    if (samplers.empty()) throw ValidationError("mle_decay_curve: need at least one sampler policy");
    if (!std::is_sorted(n_grid.begin(), n_grid.end())) throw ValidationError("mle_decay_curve: n_grid must be sorted");
    const TransitionTensor truth = induced_transition(env.factorization);
    std::vector<OccupancyMeasure> sampler_occ;
    for (const auto& pi : samplers)
        sampler_occ.push_back(with_uniform_actions(occupancy(truth, pi, env.init_dist, env.gamma)));

    DecayCurve curve;
    curve.n_grid = n_grid;
    curve.mean.assign(n_grid.size(), 0.0);
    const std::size_t n_max = n_grid.empty() ? 0 : n_grid.back();
    for (const auto seed : seeds) {
        Rng rng(seed);
        IncrementalMle mle(cls);
        Vector rho_sum = Vector::Zero(truth.probs.rows());
        std::vector<double> row;
        std::size_t g = 0;
        for (std::size_t n = 1; n <= n_max && g < n_grid.size(); ++n) {
            const std::size_t j = (n - 1) % samplers.size();
            mle.add(sample_triple(truth, samplers[j], env.init_dist, env.gamma, rng).transition);
            rho_sum += sampler_occ[j].dist;
            while (g < n_grid.size() && n_grid[g] == n) {
                const OccupancyMeasure rho{truth.num_states, truth.num_actions, rho_sum / static_cast<double>(n)};
                row.push_back(expected_sq_tv(mle.tensor(mle.best().index), truth, rho));
                ++g;
            }
        }
        while (row.size() < n_grid.size()) row.push_back(0.0);  // n = 0 grid points
        for (std::size_t k = 0; k < row.size(); ++k) curve.mean[k] += row[k] / static_cast<double>(seeds.size());
        curve.per_seed.push_back(std::move(row));
    }
    return curve;
}

/// Least-squares slope of ln(err) against ln(n) over the leading run of
/// strictly positive errors. Empty when fewer than two such points exist.
inline std::optional<double> loglog_slope(const std::vector<std::size_t>& n, const std::vector<double>& err) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n.size() && i < err.size(); ++i) {
        if (!(err[i] > 0.0) || n[i] == 0) break;
        xs.push_back(std::log(static_cast<double>(n[i])));
        ys.push_back(std::log(err[i]));
    }
    if (xs.size() < 2) return std::nullopt;
    const double k = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / k, my += ys[i] / k;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace lowrank
