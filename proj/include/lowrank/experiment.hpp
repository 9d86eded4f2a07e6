#pragma once

// Seeded experiment orchestration: baselines, per-seed runs on a bounded
// worker pool, CSV/JSON outputs and aggregation.

#include "lowrank/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>
#include <vector>

namespace lowrank {

/// Algorithm 1 with the bonus forced to zero and each greedy policy mixed with
/// the uniform policy at rate eps.
inline UcbRun baseline_eps_greedy(const LowRankMDP& env, const ModelClass& cls, std::size_t episodes, double eps,
                                  Rng& rng, UcbConfig cfg = {}) {
    cfg.episodes = episodes;
    cfg.bonus_enabled = false;
    cfg.uniform_mix = eps;
    return run_rep_ucb(env, cls, cfg, rng);
}

enum class Algorithm { RepUcb, RepLcb, BaselineEpsGreedy, BaselineUniform };

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::RepUcb: return "rep_ucb";
        case Algorithm::RepLcb: return "rep_lcb";
        case Algorithm::BaselineEpsGreedy: return "baseline_eps_greedy";
        case Algorithm::BaselineUniform: return "baseline_uniform";
    }
    return "unknown";
}

inline Algorithm algorithm_from_string(const std::string& s) {
    if (s == "rep_ucb") return Algorithm::RepUcb;
    if (s == "rep_lcb") return Algorithm::RepLcb;
    if (s == "baseline_eps_greedy") return Algorithm::BaselineEpsGreedy;
    if (s == "baseline_uniform") return Algorithm::BaselineUniform;
    throw ValidationError("unknown algorithm '" + s + "'");
}

struct AlgorithmConfig {
    std::size_t episodes = 1000;
    double delta = 0.1;
    double c_alpha = 1.0;
    double c_lambda = 1.0;
    double clamp = 2.0;
    double epsilon = 0.1;
    double planner_tolerance = kDefaultPlannerTolerance;
    /// Offline: dataset sizes to fit at.
    std::vector<std::size_t> n_grid{500, 2000, 8000};
    /// Offline: behavior = (1 - mix) pi* + mix * uniform.
    double behavior_uniform_mix = 0.1;
};

struct ExperimentSpec {
    EnvSpec env;
    Algorithm algorithm = Algorithm::RepUcb;
    AlgorithmConfig config;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir;
    /// 0 = hardware concurrency.
    unsigned workers = 0;

    void validate() const {
        if (seeds.empty()) throw ValidationError("experiment: seeds must be non-empty");
        if (output_dir.empty()) throw ValidationError("experiment: output directory required");
        if (algorithm == Algorithm::RepLcb && config.n_grid.empty())
            throw ValidationError("experiment: rep_lcb needs a non-empty n_grid");
    }
};

// ---- JSON config -------------------------------------------------------------

inline io::json to_json(const EnvSpec& e) {
    return {{"kind", to_string(e.kind)},
            {"num_states", e.num_states},
            {"num_actions", e.num_actions},
            {"dim", e.dim},
            {"gamma", e.gamma},
            {"lock_length", e.lock_length},
            {"p_stay", e.p_stay},
            {"concentration", e.concentration},
            {"emission_concentration", e.emission_concentration},
            {"num_decoys", e.num_decoys},
            {"decoys", e.decoys == DecoyStyle::Mixed ? "mixed" : "ladder"},
            {"seed", e.seed}};
}

/// Fields missing from `j` keep the values already in `e`.
inline void merge_env_spec(EnvSpec& e, const io::json& j) {
    if (j.contains("kind")) e.kind = env_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("num_states")) e.num_states = j.at("num_states").get<int>();
    if (j.contains("num_actions")) e.num_actions = j.at("num_actions").get<int>();
    if (j.contains("dim")) e.dim = j.at("dim").get<int>();
    if (j.contains("gamma")) e.gamma = j.at("gamma").get<double>();
    if (j.contains("lock_length")) e.lock_length = j.at("lock_length").get<int>();
    if (j.contains("p_stay")) e.p_stay = j.at("p_stay").get<double>();
    if (j.contains("concentration")) e.concentration = j.at("concentration").get<double>();
    if (j.contains("emission_concentration")) e.emission_concentration = j.at("emission_concentration").get<double>();
    if (j.contains("num_decoys")) e.num_decoys = j.at("num_decoys").get<int>();
    if (j.contains("decoys")) {
        const auto s = j.at("decoys").get<std::string>();
        if (s != "mixed" && s != "ladder") throw ValidationError("unknown decoy style '" + s + "'");
        e.decoys = s == "mixed" ? DecoyStyle::Mixed : DecoyStyle::Ladder;
    }
    if (j.contains("seed")) e.seed = j.at("seed").get<std::uint64_t>();
}

inline io::json to_json(const AlgorithmConfig& c) {
    return {{"episodes", c.episodes},         {"delta", c.delta},
            {"c_alpha", c.c_alpha},           {"c_lambda", c.c_lambda},
            {"clamp", c.clamp},               {"epsilon", c.epsilon},
            {"planner_tolerance", c.planner_tolerance}, {"n_grid", c.n_grid},
            {"behavior_uniform_mix", c.behavior_uniform_mix}};
}

inline void merge_algorithm_config(AlgorithmConfig& c, const io::json& j) {
    if (j.contains("episodes")) c.episodes = j.at("episodes").get<std::size_t>();
    if (j.contains("delta")) c.delta = j.at("delta").get<double>();
    if (j.contains("c_alpha")) c.c_alpha = j.at("c_alpha").get<double>();
    if (j.contains("c_lambda")) c.c_lambda = j.at("c_lambda").get<double>();
    if (j.contains("clamp")) c.clamp = j.at("clamp").get<double>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("planner_tolerance")) c.planner_tolerance = j.at("planner_tolerance").get<double>();
    if (j.contains("n_grid")) c.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
    if (j.contains("behavior_uniform_mix")) c.behavior_uniform_mix = j.at("behavior_uniform_mix").get<double>();
}

inline io::json to_json(const ExperimentSpec& s) {
    return {{"env", to_json(s.env)},
            {"algorithm", to_string(s.algorithm)},
            {"config", to_json(s.config)},
            {"seeds", s.seeds},
            {"output_dir", s.output_dir.string()}};
}

inline ExperimentSpec experiment_spec_from_json(const io::json& j) {
    ExperimentSpec s;
    try {
        if (j.contains("env")) merge_env_spec(s.env, j.at("env"));
        if (j.contains("algorithm")) s.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
        if (j.contains("config")) merge_algorithm_config(s.config, j.at("config"));
        if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("workers")) s.workers = j.at("workers").get<unsigned>();
    } catch (const io::json::exception& e) {
        throw ValidationError(std::string("experiment spec: ") + e.what());
    }
    return s;
}

// ---- per-seed runs -----------------------------------------------------------

struct SeedResult {
    std::uint64_t seed = 0;
    std::string csv;
    /// Suboptimality V* - V^{pi} per row (episode for online runs, grid point
    /// for offline runs).
    std::vector<double> suboptimality;
    double optimal_value = 0.0;
    double mixture_value = 0.0;
    double random_output_value = 0.0;
};

inline constexpr const char* kLcbCsvHeader =
    "n,model_index,value_pihat,suboptimality,pessimism_margin_pistar,penalty_mean,rcn_pistar";

inline UcbConfig ucb_config_from(const AlgorithmConfig& c, std::uint64_t seed) {
    UcbConfig cfg;
    cfg.episodes = c.episodes;
    cfg.delta = c.delta;
    cfg.c_alpha = c.c_alpha;
    cfg.c_lambda = c.c_lambda;
    cfg.bonus_clamp = c.clamp;
    cfg.planner_tolerance = c.planner_tolerance;
    cfg.seed = seed;
    return cfg;
}

inline SeedResult run_online_seed(const GeneratedEnv& g, Algorithm algo, const AlgorithmConfig& c,
                                  std::uint64_t seed) {
    Rng rng(seed);
    UcbConfig cfg = ucb_config_from(c, seed);
    if (algo == Algorithm::BaselineEpsGreedy) {
        cfg.bonus_enabled = false;
        cfg.uniform_mix = c.epsilon;
    } else if (algo == Algorithm::BaselineUniform) {
        cfg.bonus_enabled = false;
        cfg.uniform_mix = 1.0;
    }
    const UcbRun run = run_rep_ucb(g.env, g.model_class, cfg, rng);
    SeedResult r;
    r.seed = seed;
    r.csv = io::ucb_csv(run.diagnostics);
    r.optimal_value = run.diagnostics.optimal_value;
    r.mixture_value = run.diagnostics.mixture_value();
    for (const auto& e : run.diagnostics.episodes) r.suboptimality.push_back(r.optimal_value - e.value_pin);
    if (!run.diagnostics.episodes.empty()) {
        // The "random output" policy: one of pi_1..pi_N chosen uniformly.
        Rng pick(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
        r.random_output_value = run.diagnostics.episodes[uniform_index(run.diagnostics.episodes.size(), pick)].value_pin;
    }
    return r;
}

inline SeedResult run_offline_seed(const GeneratedEnv& g, const AlgorithmConfig& c, std::uint64_t seed) {
    const LowRankMDP& env = g.env;
    const OptimalSolution opt = solve_optimal(env, c.planner_tolerance);
    const TransitionTensor truth = induced_transition(env.factorization);
    OfflineSpec spec;
    spec.behavior = opt.policy.mixed_with_uniform(c.behavior_uniform_mix);
    spec.delta = c.delta;
    spec.c_alpha = c.c_alpha;
    spec.c_lambda = c.c_lambda;
    spec.clamp = c.clamp;
    spec.planner_tolerance = c.planner_tolerance;
    spec.seed = seed;
    const OccupancyMeasure rho = occupancy(truth, spec.behavior, env.init_dist, env.gamma);
    const ExtendedReal rcn = relative_condition_number(env, opt.policy, rho);

    SeedResult r;
    r.seed = seed;
    r.optimal_value = opt.value;
    r.csv = std::string(kLcbCsvHeader) + "\n";
    Rng rng(seed);
    const std::size_t n_max = *std::max_element(c.n_grid.begin(), c.n_grid.end());
    const TransitionDataset full = generate_offline_dataset(env, spec.behavior, n_max, rng);
    for (const std::size_t n : c.n_grid) {
        TransitionDataset data;
        data.provenance = Provenance::Offline;
        data.triples.assign(full.triples.begin(), full.triples.begin() + static_cast<std::ptrdiff_t>(n));
        spec.n = n;
        const LcbResult fit = run_rep_lcb(data, g.model_class, env.reward, env.gamma, spec);
        const double v = expected_value(truth, env.reward, fit.policy, env.gamma, env.init_dist);
        const Matrix pen = fit.penalty.matrix();
        const double margin =
            pessimism_margin(opt.policy, induced_transition(g.model_class.candidates[fit.model_index]), pen, env, truth);
        r.suboptimality.push_back(opt.value - v);
        r.csv += std::to_string(n) + "," + std::to_string(fit.model_index) + "," + io::format_double(v) + "," +
                 io::format_double(opt.value - v) + "," + io::format_double(margin) + "," +
                 io::format_double(pen.mean()) + "," +
                 (rcn.is_infinite() ? std::string("inf") : io::format_double(rcn.value())) + "\n";
    }
    return r;
}

inline SeedResult run_seed(const ExperimentSpec& spec, const GeneratedEnv& g, std::uint64_t seed) {
    if (spec.algorithm == Algorithm::RepLcb) return run_offline_seed(g, spec.config, seed);
    return run_online_seed(g, spec.algorithm, spec.config, seed);
}

// ---- aggregation -------------------------------------------------------------

/// Linear-interpolated quantile of an unsorted sample.
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

struct AggregateCurve {
    std::vector<double> median;
    std::vector<double> q25;
    std::vector<double> q75;
};

inline AggregateCurve aggregate_curves(const std::vector<std::vector<double>>& curves) {
    AggregateCurve out;
    if (curves.empty()) return out;
    const std::size_t len = curves.front().size();
    for (std::size_t i = 0; i < len; ++i) {
        std::vector<double> col;
        for (const auto& c : curves) col.push_back(c.at(i));
        out.median.push_back(median(col));
        out.q25.push_back(quantile(col, 0.25));
        out.q75.push_back(quantile(col, 0.75));
    }
    return out;
}

/// Reads the suboptimality curve back from a per-seed CSV: V* - value_pin for
/// online runs, the suboptimality column for offline runs.
inline std::vector<double> suboptimality_from_csv(const std::string& csv, double optimal_value) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    const bool offline = line == kLcbCsvHeader;
    std::vector<double> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        out.push_back(offline ? std::stod(cols.at(3)) : optimal_value - std::stod(cols.at(5)));
    }
    return out;
}

struct ExperimentResult {
    std::vector<SeedResult> seeds;
    AggregateCurve suboptimality;
    std::filesystem::path manifest;
};

inline std::string seed_csv_name(std::uint64_t seed) { return "seed_" + std::to_string(seed) + ".csv"; }

/// Runs every seed on a bounded pool, then writes seed_<k>.csv, seed_<k>.json
/// (run metadata), aggregate.json and manifest.json into the output directory.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const GeneratedEnv g = make_env(spec.env);
    const auto env_hash = io::content_hash(io::to_json(g.env));
    const auto config_hash = io::content_hash(to_json(spec));

    std::vector<SeedResult> results(spec.seeds.size());
    std::vector<double> wall(spec.seeds.size(), 0.0);
    std::vector<std::exception_ptr> errors(spec.seeds.size());
    std::atomic<std::size_t> next{0};
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(spec.workers == 0 ? hw : spec.workers, spec.seeds.size()));
    const auto worker = [&] {
        for (std::size_t i = next++; i < spec.seeds.size(); i = next++) {
            const auto t0 = std::chrono::steady_clock::now();
            try {
                results[i] = run_seed(spec, g, spec.seeds[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
            wall[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    ExperimentResult out;
    std::vector<std::vector<double>> curves;
    io::json files = io::json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        const auto csv_name = seed_csv_name(r.seed);
        io::write_text(spec.output_dir / csv_name, r.csv);
        io::write_json(spec.output_dir / ("seed_" + std::to_string(r.seed) + ".json"),
                       {{"config", to_json(spec)},
                        {"seed", r.seed},
                        {"environment_hash", env_hash},
                        {"wall_clock_seconds", wall[i]},
                        {"optimal_value", r.optimal_value},
                        {"mixture_value", r.mixture_value},
                        {"random_output_value", r.random_output_value}});
        files.push_back(csv_name);
        curves.push_back(r.suboptimality);
    }
    out.suboptimality = aggregate_curves(curves);
    io::write_json(spec.output_dir / "aggregate.json",
                   {{"algorithm", to_string(spec.algorithm)},
                    {"suboptimality_median", out.suboptimality.median},
                    {"suboptimality_q25", out.suboptimality.q25},
                    {"suboptimality_q75", out.suboptimality.q75}});
    out.manifest = spec.output_dir / "manifest.json";
    io::write_json(out.manifest, {{"config_hash", config_hash},
                                  {"environment_hash", env_hash},
                                  {"config", to_json(spec)},
                                  {"files", files}});
    out.seeds = std::move(results);
    return out;
}

}  // namespace lowrank
