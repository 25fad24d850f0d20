#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivqa/dataset.hpp"
#include "ivqa/model.hpp"
#include "ivqa/text.hpp"

namespace ivqa {

enum class PoolLabel { GT, CT, PS, PP, RN };

inline std::string pool_label_name(PoolLabel l) {
    switch (l) {
        case PoolLabel::GT: return "GT";
        case PoolLabel::CT: return "CT";
        case PoolLabel::PS: return "PS";
        case PoolLabel::PP: return "PP";
        case PoolLabel::RN: return "RN";
    }
    return "GT";
}

struct PoolCandidate {
    Tokens question;
    PoolLabel label = PoolLabel::GT;
};

// 24 labeled candidates for one image-answer pair.
struct QuestionPool {
    std::string image_id;
    Tokens answer;
    AnswerType answer_type = AnswerType::other;
    std::vector<PoolCandidate> candidates;

    std::size_t count(PoolLabel l) const {
        std::size_t n = 0;
        for (const auto& c : candidates) n += c.label == l ? 1 : 0;
        return n;
    }
};

// Composition invariants: 24 total, 1-3 GT, GT+CT = 6, 6 PS, 6 PP, 6 RN,
// no duplicates.
inline bool pool_composition_valid(const QuestionPool& p) {
    if (p.candidates.size() != 24) return false;
    std::size_t gt = p.count(PoolLabel::GT);
    if (gt < 1 || gt > 3) return false;
    if (gt + p.count(PoolLabel::CT) != 6) return false;
    if (p.count(PoolLabel::PS) != 6 || p.count(PoolLabel::PP) != 6 || p.count(PoolLabel::RN) != 6)
        return false;
    std::set<Tokens> seen;
    for (const auto& c : p.candidates)
        if (!seen.insert(c.question).second) return false;
    return true;
}

// One (image, answer) evaluation pair, shared by possibly several
// dataset triples.
struct EvalPair {
    std::string image_id;
    Tokens answer;
    AnswerType answer_type = AnswerType::other;
    const FeatureBundle* features = nullptr;
};

inline std::vector<EvalPair> unique_pairs(const std::vector<QATriple>& split) {
    std::vector<EvalPair> out;
    std::set<std::pair<std::string, Tokens>> seen;
    for (const auto& t : split)
        if (seen.insert({t.image_id, t.answer}).second)
            out.push_back({t.image_id, t.answer, t.answer_type, &t.features});
    return out;
}

struct PoolResources {
    const std::vector<QATriple>* eval_split = nullptr;   // GT source
    const std::vector<QATriple>* corpus = nullptr;       // CT/RN source (may include all splits)
    const std::vector<QATriple>* train_split = nullptr;  // PP popularity statistics
    // True iff `question` is actually correct for (image, answer).
    std::function<bool(const std::string& image_id, const Tokens& question, const Tokens& answer)>
        oracle_correct;
    TypingProfile profile;
    std::vector<std::string> content_words = {"small", "large"};  // beyond colors/shapes
    std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t pair_seed(std::uint64_t global, const std::string& image_id,
                               const Tokens& answer) {
    std::uint64_t h = global ^ 0x6a09e667f3bcc908ull;
    auto mix = [&](const std::string& s) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    };
    mix(image_id);
    for (const auto& t : answer) mix(t);
    return h;
}

// Candidate keyword replacements: same lexical category first, then the
// remaining attribute words, then the color/shape kind swap. Everything
// differs from the source in exactly one token.
inline std::vector<std::vector<Tokens>> plausible_edits(const Tokens& q,
                                                        const TypingProfile& profile,
                                                        const std::vector<std::string>& sizes) {
    std::vector<Tokens> same_cat, cross_cat, kind;
    auto in = [](const std::vector<std::string>& lex, const std::string& w) {
        return std::find(lex.begin(), lex.end(), w) != lex.end();
    };
    for (std::size_t i = 0; i < q.size(); ++i) {
        const std::string& w = q[i];
        const std::vector<std::string>* cat = nullptr;
        if (in(profile.colors, w))
            cat = &profile.colors;
        else if (in(profile.shapes, w))
            cat = &profile.shapes;
        else if (in(sizes, w))
            cat = &sizes;
        if (cat) {
            auto emit = [&](const std::vector<std::string>& lex, std::vector<Tokens>& dst) {
                for (const auto& alt : lex) {
                    if (alt == w) continue;
                    Tokens v = q;
                    v[i] = alt;
                    dst.push_back(std::move(v));
                }
            };
            emit(*cat, same_cat);
            for (const auto* other : {&profile.colors, &profile.shapes, &sizes})
                if (other != cat) emit(*other, cross_cat);
        } else if (w == "color" || w == "shape") {
            Tokens v = q;
            v[i] = (w == "color") ? "shape" : "color";
            kind.push_back(std::move(v));
        } else if (w == "many" && i + 1 < q.size()) {
            // qualify a counting question with one more attribute word; a
            // second qualifier leaves the question grammar, so such edits
            // go to the lowest tier
            bool bare = q[i + 1] == "objects";
            for (const auto* lex : {&profile.colors, &profile.shapes, &sizes})
                for (const auto& attr : *lex) {
                    if (attr == q[i + 1]) continue;
                    Tokens v = q;
                    v.insert(v.begin() + static_cast<std::ptrdiff_t>(i) + 1, attr);
                    (bare ? same_cat : cross_cat).push_back(std::move(v));
                }
        }
    }
    return {same_cat, kind, cross_cat};
}

}  // namespace detail

// Builds the 24-candidate pool for one pair, validating every distractor
// against the oracle. Returns nullopt when the pair has no ground-truth
// question. Categories that run dry fall back to RN-style fill (such a
// pool fails pool_composition_valid and is reported by callers).
inline std::optional<QuestionPool> build_question_pool(const EvalPair& target,
                                                       const PoolResources& res) {
    QuestionPool pool;
    pool.image_id = target.image_id;
    pool.answer = target.answer;
    pool.answer_type = target.answer_type;
    std::mt19937_64 rng(detail::pair_seed(res.seed, target.image_id, target.answer));
    std::set<Tokens> used;
    auto correct = [&](const Tokens& q) {
        return res.oracle_correct(target.image_id, q, target.answer);
    };
    auto take = [&](const Tokens& q, PoolLabel label) {
        if (used.count(q)) return false;
        used.insert(q);
        pool.candidates.push_back({q, label});
        return true;
    };

    // GT: every question with this answer on this image, capped at 3.
    for (const auto& t : *res.eval_split) {
        if (t.image_id != target.image_id || t.answer != target.answer) continue;
        if (pool.count(PoolLabel::GT) >= 3) break;
        take(t.question, PoolLabel::GT);
    }
    if (pool.count(PoolLabel::GT) == 0) return std::nullopt;

    // CT: questions of visually similar images with different answers.
    {
        std::map<std::string, std::vector<const QATriple*>> by_image;
        std::map<std::string, double> similarity;
        std::vector<double> tmean = target.features->mean_pooled();
        for (const auto& t : *res.corpus) {
            if (t.image_id == target.image_id) continue;
            auto& v = by_image[t.image_id];
            if (v.empty()) similarity[t.image_id] = 1.0 - cosine_distance(tmean, t.features.mean_pooled());
            v.push_back(&t);
        }
        std::vector<std::string> order;
        for (const auto& [id, s] : similarity) order.push_back(id);
        std::sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
            if (similarity[a] != similarity[b]) return similarity[a] > similarity[b];
            return a < b;
        });
        for (const auto& id : order) {
            if (pool.count(PoolLabel::GT) + pool.count(PoolLabel::CT) >= 6) break;
            for (const QATriple* t : by_image[id]) {
                if (pool.count(PoolLabel::GT) + pool.count(PoolLabel::CT) >= 6) break;
                if (t->answer == target.answer || correct(t->question)) continue;
                take(t->question, PoolLabel::CT);
            }
        }
    }

    // PS: one keyword of a GT question replaced by a same-category word.
    {
        std::vector<Tokens> gts;
        for (const auto& c : pool.candidates)
            if (c.label == PoolLabel::GT) gts.push_back(c.question);
        auto tiers_of = [&](const Tokens& q) {
            auto tiers = detail::plausible_edits(q, res.profile, res.content_words);
            for (auto& tier : tiers) std::shuffle(tier.begin(), tier.end(), rng);
            std::vector<Tokens> flat;
            for (auto& tier : tiers)
                for (auto& t : tier) flat.push_back(std::move(t));
            return flat;
        };
        std::vector<std::vector<Tokens>> streams;
        for (const auto& g : gts) streams.push_back(tiers_of(g));
        std::vector<std::size_t> pos(streams.size(), 0);
        bool progress = true;
        while (pool.count(PoolLabel::PS) < 6 && progress) {
            progress = false;
            for (std::size_t s = 0; s < streams.size() && pool.count(PoolLabel::PS) < 6; ++s) {
                while (pos[s] < streams[s].size()) {
                    const Tokens& cand = streams[s][pos[s]++];
                    progress = true;
                    if (!correct(cand) && take(cand, PoolLabel::PS)) break;
                }
            }
        }
    }

    // PP: globally most frequent train questions, same answer type first,
    // then any type if the typed supply runs out.
    {
        auto pp_fill = [&](bool same_type_only) {
            std::map<Tokens, std::size_t> freq;
            for (const auto& t : *res.train_split)
                if (!same_type_only || t.answer_type == target.answer_type) ++freq[t.question];
            std::vector<std::pair<Tokens, std::size_t>> items(freq.begin(), freq.end());
            std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            for (const auto& [q, n] : items) {
                if (pool.count(PoolLabel::PP) >= 6) break;
                if (correct(q)) continue;
                take(q, PoolLabel::PP);
            }
        };
        pp_fill(true);
        if (pool.count(PoolLabel::PP) < 6) pp_fill(false);
    }

    // RN: random questions having this answer, from other images.
    auto rn_fill = [&](bool require_same_answer) {
        std::vector<const QATriple*> cands;
        for (const auto& t : *res.corpus) {
            if (t.image_id == target.image_id) continue;
            if (require_same_answer != (t.answer == target.answer)) continue;
            cands.push_back(&t);
        }
        std::shuffle(cands.begin(), cands.end(), rng);
        for (const QATriple* t : cands) {
            if (pool.candidates.size() >= 24) break;
            if (correct(t->question)) continue;
            take(t->question, PoolLabel::RN);
        }
    };
    rn_fill(true);
    if (pool.candidates.size() < 24) rn_fill(false);  // exhaustion fallback
    return pool;
}

inline nlohmann::json pool_to_json(const QuestionPool& p) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : p.candidates)
        cands.push_back({{"question", join_tokens(c.question)}, {"label", pool_label_name(c.label)}});
    return {{"image_id", p.image_id},
            {"answer", join_tokens(p.answer)},
            {"answer_type", answer_type_name(p.answer_type)},
            {"candidates", cands}};
}

// Scores all candidates of one pool. Ties are broken pessimistically:
// at equal score a GT candidate ranks below a distractor.
struct PoolResult {
    bool correct_at_1 = false;
    bool correct_at_3 = false;
    PoolLabel rank1_label = PoolLabel::GT;
};

inline PoolResult rank_pool(const QuestionPool& pool,
                            const std::function<double(const Tokens&)>& scorer) {
    struct Scored {
        double score;
        const PoolCandidate* cand;
    };
    std::vector<Scored> scored;
    for (const auto& c : pool.candidates) {
        double s = scorer(c.question);
        if (std::isnan(s)) throw NumericError("rank_pool: NaN score");
        scored.push_back({s, &c});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        bool agt = a.cand->label == PoolLabel::GT, bgt = b.cand->label == PoolLabel::GT;
        if (agt != bgt) return !agt;  // GT loses ties
        return a.cand->question < b.cand->question;
    });
    PoolResult r;
    r.rank1_label = scored[0].cand->label;
    for (std::size_t i = 0; i < scored.size() && i < 3; ++i)
        if (scored[i].cand->label == PoolLabel::GT) {
            r.correct_at_3 = true;
            if (i == 0) r.correct_at_1 = true;
        }
    return r;
}

struct RankReport {
    double acc1 = 0;  // percent
    double acc3 = 0;
    std::map<std::string, double> breakdown;  // rank-1 label fractions
    std::size_t n_pairs = 0;

    nlohmann::json to_json() const {
        return {{"acc1", acc1}, {"acc3", acc3}, {"breakdown", breakdown}, {"n_pairs", n_pairs}};
    }
};

inline RankReport rank_report(const std::vector<PoolResult>& results) {
    RankReport rep;
    rep.n_pairs = results.size();
    if (results.empty()) return rep;
    std::map<std::string, std::size_t> counts;
    for (const char* l : {"GT", "CT", "PS", "PP", "RN"}) counts[l] = 0;
    std::size_t c1 = 0, c3 = 0;
    for (const auto& r : results) {
        c1 += r.correct_at_1 ? 1 : 0;
        c3 += r.correct_at_3 ? 1 : 0;
        ++counts[pool_label_name(r.rank1_label)];
    }
    rep.acc1 = 100.0 * static_cast<double>(c1) / static_cast<double>(results.size());
    rep.acc3 = 100.0 * static_cast<double>(c3) / static_cast<double>(results.size());
    for (const auto& [l, n] : counts)
        rep.breakdown[l] = static_cast<double>(n) / static_cast<double>(results.size());
    return rep;
}

}  // namespace ivqa
