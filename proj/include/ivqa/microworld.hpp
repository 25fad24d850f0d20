#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivqa/dataset.hpp"
#include "ivqa/text.hpp"

namespace ivqa::microworld {

inline const std::vector<std::string>& shape_lexicon() {
    static const std::vector<std::string> v = {"ball", "cube", "cone", "star", "ring", "disk"};
    return v;
}
inline const std::vector<std::string>& color_lexicon() {
    static const std::vector<std::string> v = {"red", "blue", "green", "pink", "yellow", "black"};
    return v;
}
inline const std::vector<std::string>& size_lexicon() {
    static const std::vector<std::string> v = {"small", "large"};
    return v;
}

inline TypingProfile typing_profile() {
    return TypingProfile{color_lexicon(), shape_lexicon()};
}

struct Object {
    std::size_t shape = 0;  // index into shape_lexicon
    std::size_t color = 0;  // index into color_lexicon
    std::size_t size = 0;   // index into size_lexicon
};

// Grid of attributed objects with an exact answering oracle; the desk
// stand-in for a real image.
struct Scene {
    std::size_t g = 4;
    std::vector<std::optional<Object>> cells;  // g*g entries

    std::size_t object_count() const {
        std::size_t n = 0;
        for (const auto& c : cells) n += c.has_value() ? 1 : 0;
        return n;
    }
    std::size_t count_color(std::size_t color) const {
        std::size_t n = 0;
        for (const auto& c : cells) n += (c && c->color == color) ? 1 : 0;
        return n;
    }
    std::size_t count_shape(std::size_t shape) const {
        std::size_t n = 0;
        for (const auto& c : cells) n += (c && c->shape == shape) ? 1 : 0;
        return n;
    }
    std::size_t count_size(std::size_t size) const {
        std::size_t n = 0;
        for (const auto& c : cells) n += (c && c->size == size) ? 1 : 0;
        return n;
    }
    std::size_t count_size_shape(std::size_t size, std::size_t shape) const {
        std::size_t n = 0;
        for (const auto& c : cells) n += (c && c->size == size && c->shape == shape) ? 1 : 0;
        return n;
    }
    std::size_t count_size_color(std::size_t size, std::size_t color) const {
        std::size_t n = 0;
        for (const auto& c : cells) n += (c && c->size == size && c->color == color) ? 1 : 0;
        return n;
    }
    bool has_combo(std::size_t color, std::size_t shape) const {
        for (const auto& c : cells)
            if (c && c->color == color && c->shape == shape) return true;
        return false;
    }
};

inline Scene generate_scene(std::uint64_t seed, std::size_t g = 4) {
    std::mt19937_64 rng(seed);
    Scene s;
    s.g = g;
    s.cells.assign(g * g, std::nullopt);
    std::size_t max_objects = std::max<std::size_t>(1, g * g / 2);
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_objects)(rng);
    std::vector<std::size_t> idx(g * g);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t placed = 0; placed < n; ++placed) {
        std::size_t pick =
            std::uniform_int_distribution<std::size_t>(placed, idx.size() - 1)(rng);
        std::swap(idx[placed], idx[pick]);
        Object o;
        o.shape = std::uniform_int_distribution<std::size_t>(0, shape_lexicon().size() - 1)(rng);
        o.color = std::uniform_int_distribution<std::size_t>(0, color_lexicon().size() - 1)(rng);
        o.size = std::uniform_int_distribution<std::size_t>(0, size_lexicon().size() - 1)(rng);
        s.cells[idx[placed]] = o;
    }
    return s;
}

// Per-cell layout: [empty + 6 shapes | 6 colors | 2 sizes] = 15 slots.
inline constexpr std::size_t kFeatureDepth = 15;

inline FeatureBundle render_features(const Scene& s, double sigma, std::uint64_t seed) {
    if (sigma < 0) throw DataError("render_features: sigma must be >= 0");
    FeatureBundle fb;
    fb.g = s.g;
    fb.d = kFeatureDepth;
    fb.grid.assign(s.g * s.g * kFeatureDepth, 0.0);
    for (std::size_t c = 0; c < s.cells.size(); ++c) {
        double* cell = &fb.grid[c * kFeatureDepth];
        if (!s.cells[c]) {
            cell[0] = 1.0;
        } else {
            const Object& o = *s.cells[c];
            cell[1 + o.shape] = 1.0;
            cell[7 + o.color] = 1.0;
            cell[13 + o.size] = 1.0;
        }
    }
    if (sigma > 0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, sigma);
        for (auto& v : fb.grid) v += noise(rng);
    }
    // Global vector: normalized frequencies of attribute words over the
    // scene (6 colors + 6 shapes + 2 sizes = 14 concepts).
    fb.global.assign(14, 0.0);
    double total = 0;
    for (const auto& c : s.cells) {
        if (!c) continue;
        fb.global[c->color] += 1.0;
        fb.global[6 + c->shape] += 1.0;
        fb.global[12 + c->size] += 1.0;
        total += 3.0;
    }
    for (auto& v : fb.global) v /= total;
    return fb;
}

struct QAPair {
    Tokens question;
    Tokens answer;
    AnswerType type = AnswerType::other;
};

enum class OracleStatus { answered, ill_posed, unparseable };

struct OracleResult {
    OracleStatus status = OracleStatus::unparseable;
    Tokens answer;
};

inline std::optional<std::size_t> lexicon_index(const std::vector<std::string>& lex,
                                                const std::string& w) {
    auto it = std::find(lex.begin(), lex.end(), w);
    if (it == lex.end()) return std::nullopt;
    return static_cast<std::size_t>(it - lex.begin());
}

// Exact answer from the scene. Ill-posed (non-unique referent) and
// unparseable questions are distinguished. The grammar is regular:
//   what color is the [<size>] <shape> ?
//   what is the color of the <shape> ?
//   what shape is the [<size>] <color> object ?
//   what is the shape of the <color> object ?
//   how many [<attr>] objects are there ?      attr: color|shape|size word
//   is there a <color> <shape> ?
inline OracleResult oracle_answer(const Scene& s, const Tokens& q) {
    auto unparseable = [] { return OracleResult{OracleStatus::unparseable, {}}; };
    auto ill_posed = [] { return OracleResult{OracleStatus::ill_posed, {}}; };
    auto answer = [](std::string a) { return OracleResult{OracleStatus::answered, {std::move(a)}}; };

    // what color is the <shape> ?
    if (q.size() == 6 && q[0] == "what" && q[1] == "color" && q[2] == "is" && q[3] == "the" &&
        q[5] == "?") {
        auto sh = lexicon_index(shape_lexicon(), q[4]);
        if (!sh) return unparseable();
        if (s.count_shape(*sh) != 1) return ill_posed();
        for (const auto& c : s.cells)
            if (c && c->shape == *sh) return answer(color_lexicon()[c->color]);
    }
    // what color is the <size> <shape> ?
    if (q.size() == 7 && q[0] == "what" && q[1] == "color" && q[2] == "is" && q[3] == "the" &&
        q[6] == "?") {
        auto sz = lexicon_index(size_lexicon(), q[4]);
        auto sh = lexicon_index(shape_lexicon(), q[5]);
        if (!sz || !sh) return unparseable();
        if (s.count_size_shape(*sz, *sh) != 1) return ill_posed();
        for (const auto& c : s.cells)
            if (c && c->size == *sz && c->shape == *sh) return answer(color_lexicon()[c->color]);
    }
    // what is the color of the <shape> ?
    if (q.size() == 8 && q[0] == "what" && q[1] == "is" && q[2] == "the" && q[3] == "color" &&
        q[4] == "of" && q[5] == "the" && q[7] == "?") {
        auto sh = lexicon_index(shape_lexicon(), q[6]);
        if (!sh) return unparseable();
        if (s.count_shape(*sh) != 1) return ill_posed();
        for (const auto& c : s.cells)
            if (c && c->shape == *sh) return answer(color_lexicon()[c->color]);
    }
    // what shape is the <color> object ?
    if (q.size() == 7 && q[0] == "what" && q[1] == "shape" && q[2] == "is" && q[3] == "the" &&
        q[5] == "object" && q[6] == "?") {
        auto co = lexicon_index(color_lexicon(), q[4]);
        if (!co) return unparseable();
        if (s.count_color(*co) != 1) return ill_posed();
        for (const auto& c : s.cells)
            if (c && c->color == *co) return answer(shape_lexicon()[c->shape]);
    }
    // what shape is the <size> <color> object ?
    if (q.size() == 8 && q[0] == "what" && q[1] == "shape" && q[2] == "is" && q[3] == "the" &&
        q[6] == "object" && q[7] == "?") {
        auto sz = lexicon_index(size_lexicon(), q[4]);
        auto co = lexicon_index(color_lexicon(), q[5]);
        if (!sz || !co) return unparseable();
        if (s.count_size_color(*sz, *co) != 1) return ill_posed();
        for (const auto& c : s.cells)
            if (c && c->size == *sz && c->color == *co) return answer(shape_lexicon()[c->shape]);
    }
    // what is the shape of the <color> object ?
    if (q.size() == 9 && q[0] == "what" && q[1] == "is" && q[2] == "the" && q[3] == "shape" &&
        q[4] == "of" && q[5] == "the" && q[7] == "object" && q[8] == "?") {
        auto co = lexicon_index(color_lexicon(), q[6]);
        if (!co) return unparseable();
        if (s.count_color(*co) != 1) return ill_posed();
        for (const auto& c : s.cells)
            if (c && c->color == *co) return answer(shape_lexicon()[c->shape]);
    }
    // how many objects are there ?
    if (q.size() == 6 && q[0] == "how" && q[1] == "many" && q[2] == "objects" && q[3] == "are" &&
        q[4] == "there" && q[5] == "?")
        return answer(std::to_string(s.object_count()));
    // how many <attr> objects are there ?
    if (q.size() == 7 && q[0] == "how" && q[1] == "many" && q[3] == "objects" && q[4] == "are" &&
        q[5] == "there" && q[6] == "?") {
        if (auto co = lexicon_index(color_lexicon(), q[2]))
            return answer(std::to_string(s.count_color(*co)));
        if (auto sh = lexicon_index(shape_lexicon(), q[2]))
            return answer(std::to_string(s.count_shape(*sh)));
        if (auto sz = lexicon_index(size_lexicon(), q[2]))
            return answer(std::to_string(s.count_size(*sz)));
        return unparseable();
    }
    // is there a <color> <shape> ?
    if (q.size() == 6 && q[0] == "is" && q[1] == "there" && q[2] == "a" && q[5] == "?") {
        auto co = lexicon_index(color_lexicon(), q[3]);
        auto sh = lexicon_index(shape_lexicon(), q[4]);
        if (!co || !sh) return unparseable();
        return answer(s.has_combo(*co, *sh) ? "yes" : "no");
    }
    return unparseable();
}

// Instantiates question templates that are well-posed for the scene,
// including paraphrase pairs sharing one answer. Returns an empty list
// when fewer than three QA pairs are possible, as a resample signal.
inline std::vector<QAPair> generate_qa(const Scene& s, std::uint64_t seed) {
    std::vector<QAPair> out;
    auto push = [&](Tokens q, std::string a, AnswerType t) {
        out.push_back({std::move(q), {std::move(a)}, t});
    };
    // color questions about unique shapes (two phrasings, same answer)
    for (std::size_t sh = 0; sh < shape_lexicon().size(); ++sh) {
        if (s.count_shape(sh) != 1) continue;
        for (const auto& c : s.cells)
            if (c && c->shape == sh) {
                const std::string& color = color_lexicon()[c->color];
                push({"what", "color", "is", "the", shape_lexicon()[sh], "?"}, color,
                     AnswerType::color);
                push({"what", "is", "the", "color", "of", "the", shape_lexicon()[sh], "?"}, color,
                     AnswerType::color);
            }
    }
    // size-qualified color questions
    for (std::size_t sz = 0; sz < size_lexicon().size(); ++sz)
        for (std::size_t sh = 0; sh < shape_lexicon().size(); ++sh) {
            if (s.count_size_shape(sz, sh) != 1 || s.count_shape(sh) == 1) continue;
            for (const auto& c : s.cells)
                if (c && c->size == sz && c->shape == sh)
                    push({"what", "color", "is", "the", size_lexicon()[sz], shape_lexicon()[sh],
                          "?"},
                         color_lexicon()[c->color], AnswerType::color);
        }
    // shape questions about unique colors (two phrasings)
    for (std::size_t co = 0; co < color_lexicon().size(); ++co) {
        if (s.count_color(co) != 1) continue;
        for (const auto& c : s.cells)
            if (c && c->color == co) {
                const std::string& shape = shape_lexicon()[c->shape];
                push({"what", "shape", "is", "the", color_lexicon()[co], "object", "?"}, shape,
                     AnswerType::shape);
                push({"what", "is", "the", "shape", "of", "the", color_lexicon()[co], "object",
                      "?"},
                     shape, AnswerType::shape);
            }
    }
    // size-qualified shape questions
    for (std::size_t sz = 0; sz < size_lexicon().size(); ++sz)
        for (std::size_t co = 0; co < color_lexicon().size(); ++co) {
            if (s.count_size_color(sz, co) != 1 || s.count_color(co) == 1) continue;
            for (const auto& c : s.cells)
                if (c && c->size == sz && c->color == co)
                    push({"what", "shape", "is", "the", size_lexicon()[sz], color_lexicon()[co],
                          "object", "?"},
                         shape_lexicon()[c->shape], AnswerType::shape);
        }
    // counting
    push({"how", "many", "objects", "are", "there", "?"}, std::to_string(s.object_count()),
         AnswerType::number);
    for (std::size_t co = 0; co < color_lexicon().size(); ++co)
        if (std::size_t n = s.count_color(co); n >= 1)
            push({"how", "many", color_lexicon()[co], "objects", "are", "there", "?"},
                 std::to_string(n), AnswerType::number);
    for (std::size_t sh = 0; sh < shape_lexicon().size(); ++sh)
        if (std::size_t n = s.count_shape(sh); n >= 1)
            push({"how", "many", shape_lexicon()[sh], "objects", "are", "there", "?"},
                 std::to_string(n), AnswerType::number);
    for (std::size_t sz = 0; sz < size_lexicon().size(); ++sz)
        if (std::size_t n = s.count_size(sz); n >= 1)
            push({"how", "many", size_lexicon()[sz], "objects", "are", "there", "?"},
                 std::to_string(n), AnswerType::number);
    // existence: up to three present combinations, two sampled absences
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::size_t, std::size_t>> present, absent;
    for (std::size_t co = 0; co < color_lexicon().size(); ++co)
        for (std::size_t sh = 0; sh < shape_lexicon().size(); ++sh)
            (s.has_combo(co, sh) ? present : absent).emplace_back(co, sh);
    std::shuffle(present.begin(), present.end(), rng);
    std::shuffle(absent.begin(), absent.end(), rng);
    for (std::size_t i = 0; i < present.size() && i < 3; ++i)
        push({"is", "there", "a", color_lexicon()[present[i].first],
              shape_lexicon()[present[i].second], "?"},
             "yes", AnswerType::yes_no);
    for (std::size_t i = 0; i < absent.size() && i < 2; ++i)
        push({"is", "there", "a", color_lexicon()[absent[i].first],
              shape_lexicon()[absent[i].second], "?"},
             "no", AnswerType::yes_no);
    if (out.size() < 3) return {};
    return out;
}

inline std::string scene_ascii(const Scene& s) {
    std::string out;
    for (std::size_t r = 0; r < s.g; ++r) {
        for (std::size_t c = 0; c < s.g; ++c) {
            const auto& cell = s.cells[r * s.g + c];
            if (c) out += ' ';
            if (!cell) {
                out += "....";
            } else {
                // e.g. "Re-B" = red ball; capital size marker for large
                std::string color = color_lexicon()[cell->color].substr(0, 2);
                color[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(color[0])));
                char shape = static_cast<char>(
                    std::toupper(static_cast<unsigned char>(shape_lexicon()[cell->shape][0])));
                out += color + (cell->size == 1 ? "+" : "-") + shape;
            }
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::json scene_to_json(const Scene& s) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : s.cells) {
        if (!c)
            cells.push_back(nullptr);
        else
            cells.push_back({{"shape", shape_lexicon()[c->shape]},
                             {"color", color_lexicon()[c->color]},
                             {"size", size_lexicon()[c->size]}});
    }
    return {{"g", s.g}, {"cells", cells}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
    Scene s;
    s.g = j.at("g").get<std::size_t>();
    for (const auto& c : j.at("cells")) {
        if (c.is_null()) {
            s.cells.push_back(std::nullopt);
        } else {
            Object o;
            o.shape = *lexicon_index(shape_lexicon(), c.at("shape").get<std::string>());
            o.color = *lexicon_index(color_lexicon(), c.at("color").get<std::string>());
            o.size = *lexicon_index(size_lexicon(), c.at("size").get<std::string>());
            s.cells.push_back(o);
        }
    }
    if (s.cells.size() != s.g * s.g) throw DataError("scene cell count mismatch");
    return s;
}

struct GeneratedDataset {
    std::vector<QATriple> train, val, test;
    std::vector<std::pair<std::string, Scene>> scenes;  // image_id -> scene, all splits
};

// Scene-disjoint splits; deterministic given the seed.
inline GeneratedDataset generate_dataset(std::size_t n_scenes, double train_frac, double val_frac,
                                         double test_frac, std::uint64_t seed, double sigma = 0.1,
                                         std::size_t g = 4) {
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw DataError("split fractions must sum to 1");
    GeneratedDataset out;
    std::size_t n_train = static_cast<std::size_t>(train_frac * static_cast<double>(n_scenes));
    std::size_t n_val = static_cast<std::size_t>(val_frac * static_cast<double>(n_scenes));
    std::uint64_t scene_seed = seed;
    for (std::size_t i = 0; i < n_scenes; ++i) {
        Scene s;
        std::vector<QAPair> qa;
        do {  // resample scenes that admit too few questions
            s = generate_scene(scene_seed * 2654435761ull + 1, g);
            qa = generate_qa(s, scene_seed * 2654435761ull + 2);
            ++scene_seed;
        } while (qa.empty());
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "scene_%06zu", i);
        std::string image_id = idbuf;
        FeatureBundle fb = render_features(s, sigma, scene_seed * 2654435761ull + 3);
        auto& split = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
        for (const auto& p : qa) {
            QATriple t;
            t.image_id = image_id;
            t.features = fb;
            t.question = p.question;
            t.answer = p.answer;
            t.answer_type = p.type;
            split.push_back(std::move(t));
        }
        out.scenes.emplace_back(image_id, s);
    }
    return out;
}

inline void save_scenes(const std::vector<std::pair<std::string, Scene>>& scenes,
                        const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open scenes file for writing: " + path);
    for (const auto& [id, s] : scenes) {
        nlohmann::json j = scene_to_json(s);
        j["image_id"] = id;
        f << j.dump() << "\n";
    }
}

inline std::map<std::string, Scene> load_scenes(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open scenes file: " + path);
    std::map<std::string, Scene> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            out[j.at("image_id").get<std::string>()] = scene_from_json(j);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace ivqa::microworld
