#pragma once

// JSON/JSONL/CSV serialization of environments, model classes, policies,
// datasets and reports.

#include "lowrank/envs.hpp"
#include "lowrank/rep_lcb.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

namespace lowrank::io {

using json = nlohmann::json;

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline json matrix_to_json(const Matrix& m) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
    return arr;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* field) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols)
        throw ValidationError(std::string("json: field '") + field + "' must be a row-major array of " +
                              std::to_string(rows * cols) + " numbers");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = j.at(static_cast<std::size_t>(i * cols + j2)).get<double>();
    return m;
}

template <typename T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("json: missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("json: bad field '") + key + "': " + e.what());
    }
}

inline json to_json(const Factorization& f) {
    return {{"num_states", f.num_states}, {"num_actions", f.num_actions}, {"dim", f.dim},
            {"mu", matrix_to_json(f.mu)},   {"phi", matrix_to_json(f.phi)}};
}

inline Factorization factorization_from_json(const json& j) {
    Factorization f;
    f.num_states = required<int>(j, "num_states");
    f.num_actions = required<int>(j, "num_actions");
    f.dim = required<int>(j, "dim");
    if (f.num_states <= 0 || f.num_actions <= 0 || f.dim <= 0) throw ValidationError("json: sizes must be positive");
    f.mu = matrix_from_json(j.at("mu"), f.num_states, f.dim, "mu");
    f.phi = matrix_from_json(j.at("phi"), static_cast<Eigen::Index>(f.num_states) * f.num_actions, f.dim, "phi");
    return f;
}

inline json to_json(const LowRankMDP& m) {
    json j = to_json(m.factorization);
    j["reward"] = matrix_to_json(m.reward);
    j["gamma"] = m.gamma;
    j["init_dist"] = matrix_to_json(Matrix(m.init_dist.transpose()));
    return j;
}

inline LowRankMDP mdp_from_json(const json& j) {
    LowRankMDP m;
    m.factorization = factorization_from_json(j);
    m.reward = matrix_from_json(required<json>(j, "reward"), m.num_states(), m.num_actions(), "reward");
    m.gamma = required<double>(j, "gamma");
    m.init_dist = matrix_from_json(required<json>(j, "init_dist"), 1, m.num_states(), "init_dist").row(0).transpose();
    return m;
}

/// Array of factorizations, each optionally carrying "true_index".
inline json to_json(const ModelClass& cls) {
    json arr = json::array();
    for (const auto& c : cls.candidates) {
        json j = to_json(c);
        if (cls.true_index) j["true_index"] = *cls.true_index;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline ModelClass model_class_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ValidationError("json: model class must be a non-empty array");
    ModelClass cls;
    for (const auto& c : j) {
        cls.candidates.push_back(factorization_from_json(c));
        if (c.contains("true_index") && !c.at("true_index").is_null())
            cls.true_index = c.at("true_index").get<std::size_t>();
    }
    if (cls.true_index && *cls.true_index >= cls.size()) throw ValidationError("json: true_index out of range");
    return cls;
}

inline json to_json(const Policy& pi) {
    return {{"num_states", pi.num_states()}, {"num_actions", pi.num_actions()}, {"probs", matrix_to_json(pi.probs)}};
}

inline Policy policy_from_json(const json& j) {
    const int s = required<int>(j, "num_states");
    const int a = required<int>(j, "num_actions");
    return Policy{matrix_from_json(required<json>(j, "probs"), s, a, "probs")};
}

inline json to_json(const ExtendedReal& x) {
    if (x.is_infinite()) return "inf";
    return x.value();
}

inline json to_json(const CoverageReport& r) {
    json j{{"relative_condition_number", to_json(r.relative_condition_number)}, {"omega", to_json(r.omega)}};
    j["tabular_density_ratio"] = r.tabular_density_ratio ? to_json(*r.tabular_density_ratio) : json(nullptr);
    return j;
}

// ---- files -----------------------------------------------------------------

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline json read_json(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// One {"s","a","s_next"} object per line.
inline std::string dataset_to_jsonl(const TransitionDataset& data) {
    std::string out;
    for (const auto& t : data.triples) out += json{{"s", t.s}, {"a", t.a}, {"s_next", t.s_next}}.dump() + "\n";
    return out;
}

inline TransitionDataset dataset_from_jsonl(const std::string& text, Provenance provenance = Provenance::Offline) {
    TransitionDataset data;
    data.provenance = provenance;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            data.triples.push_back({j.at("s").get<int>(), j.at("a").get<int>(), j.at("s_next").get<int>()});
        } catch (const json::exception& e) {
            throw ValidationError("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return data;
}

/// FNV-1a 64 of a canonical JSON dump, as 16 hex digits.
inline std::string content_hash(const json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- CSV -------------------------------------------------------------------

inline constexpr const char* kUcbCsvHeader =
    "episode,n,model_index,sq_tv,optimism_margin_pistar,value_pin,bonus_mean,potential_increment,rollin_capped";

inline std::string ucb_csv(const RunDiagnostics& diag) {
    std::string out = std::string(kUcbCsvHeader) + "\n";
    for (const auto& e : diag.episodes) {
        out += std::to_string(e.episode) + "," + std::to_string(e.n) + "," + std::to_string(e.model_index) + "," +
               format_double(e.sq_tv) + "," + format_double(e.optimism_margin_pistar) + "," +
               format_double(e.value_pin) + "," + format_double(e.bonus_mean) + "," +
               format_double(e.potential_increment) + "," + (e.rollin_capped ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace lowrank::io
