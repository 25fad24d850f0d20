#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivqa/tensor.hpp"
#include "ivqa/text.hpp"

namespace ivqa {

// Grid of local features plus a global concept vector. Any G, D and
// global length is accepted, so precomputed real-image features can be
// ingested without code changes.
struct FeatureBundle {
    std::size_t g = 0;  // grid is g x g
    std::size_t d = 0;  // per-cell feature depth
    std::vector<double> grid;    // flat, row-major, length g*g*d
    std::vector<double> global;  // concept score vector

    std::vector<double> mean_pooled() const {
        std::vector<double> out(d, 0.0);
        std::size_t cells = g * g;
        for (std::size_t c = 0; c < cells; ++c)
            for (std::size_t j = 0; j < d; ++j) out[j] += grid[c * d + j];
        for (auto& v : out) v /= static_cast<double>(cells);
        return out;
    }
};

// One dataset record: image id, features, question/answer token
// sequences (no bos/eos stored) and the answer type.
struct QATriple {
    std::string image_id;
    FeatureBundle features;
    Tokens question;
    Tokens answer;
    AnswerType answer_type = AnswerType::other;
};

inline nlohmann::json triple_to_json(const QATriple& t) {
    nlohmann::json j;
    j["image_id"] = t.image_id;
    j["question"] = join_tokens(t.question);
    j["answer"] = join_tokens(t.answer);
    j["answer_type"] = answer_type_name(t.answer_type);
    j["features"]["grid_shape"] = {t.features.g, t.features.g, t.features.d};
    j["features"]["grid"] = t.features.grid;
    j["features"]["global"] = t.features.global;
    return j;
}

inline QATriple triple_from_json(const nlohmann::json& j) {
    QATriple t;
    for (const char* field : {"image_id", "question", "answer", "answer_type", "features"})
        if (!j.contains(field)) throw DataError(std::string("missing field \"") + field + "\"");
    t.image_id = j.at("image_id").get<std::string>();
    t.question = tokenize(j.at("question").get<std::string>());
    t.answer = tokenize(j.at("answer").get<std::string>());
    t.answer_type = answer_type_from_name(j.at("answer_type").get<std::string>());
    const auto& f = j.at("features");
    for (const char* field : {"grid_shape", "grid", "global"})
        if (!f.contains(field)) throw DataError(std::string("missing field \"features.") + field + "\"");
    auto gs = f.at("grid_shape").get<std::vector<std::size_t>>();
    if (gs.size() != 3 || gs[0] != gs[1]) throw DataError("grid_shape must be [G,G,D]");
    t.features.g = gs[0];
    t.features.d = gs[2];
    t.features.grid = f.at("grid").get<std::vector<double>>();
    t.features.global = f.at("global").get<std::vector<double>>();
    if (t.features.grid.size() != gs[0] * gs[1] * gs[2])
        throw DataError("feature grid length " + std::to_string(t.features.grid.size()) +
                        " does not match grid_shape product");
    if (t.question.empty()) throw DataError("empty question");
    if (t.answer.empty()) throw DataError("empty answer");
    return t;
}

// JSONL, one record per line. Malformed lines are reported with their
// line number.
inline std::vector<QATriple> load_dataset(const std::string& path, std::size_t max_len = 20) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open dataset: " + path);
    std::vector<QATriple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            QATriple t = triple_from_json(j);
            if (t.question.size() > max_len - 2)
                throw DataError("question longer than max_len-2");
            out.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline void save_dataset(const std::vector<QATriple>& triples, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open dataset for writing: " + path);
    for (const auto& t : triples) f << triple_to_json(t).dump() << "\n";
    if (!f) throw DataError("dataset write failed: " + path);
}

}  // namespace ivqa
