#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "ivqa/tensor.hpp"
#include "ivqa/text.hpp"

namespace ivqa {

namespace detail {
inline std::map<Tokens, std::size_t> ngram_counts(const Tokens& s, std::size_t n) {
    std::map<Tokens, std::size_t> out;
    if (s.size() < n) return out;
    for (std::size_t i = 0; i + n <= s.size(); ++i)
        ++out[Tokens(s.begin() + i, s.begin() + i + n)];
    return out;
}
}  // namespace detail

// Corpus-level BLEU-n: clipped modified n-gram precisions geometrically
// averaged over orders 1..n, times the brevity penalty exp(min(0, 1-r/c)).
inline double bleu_n(const std::vector<Tokens>& candidates,
                     const std::vector<std::vector<Tokens>>& references, std::size_t n) {
    if (candidates.empty() || candidates.size() != references.size())
        throw DataError("bleu_n: empty corpus or candidate/reference length mismatch");
    if (n < 1 || n > 4) throw DataError("bleu_n: order must be in 1..4");
    double log_prec_sum = 0;
    for (std::size_t order = 1; order <= n; ++order) {
        std::size_t matched = 0, total = 0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            auto cand = detail::ngram_counts(candidates[i], order);
            std::map<Tokens, std::size_t> max_ref;
            for (const auto& ref : references[i])
                for (const auto& [g, c] : detail::ngram_counts(ref, order))
                    max_ref[g] = std::max(max_ref[g], c);
            for (const auto& [g, c] : cand) {
                total += c;
                auto it = max_ref.find(g);
                if (it != max_ref.end()) matched += std::min(c, it->second);
            }
        }
        if (matched == 0) return 0.0;
        log_prec_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
    }
    std::size_t c_len = 0, r_len = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        c_len += candidates[i].size();
        // closest reference length; ties toward the shorter
        std::size_t best = references[i].empty() ? 0 : references[i][0].size();
        for (const auto& ref : references[i]) {
            auto diff = [&](std::size_t l) {
                return l > candidates[i].size() ? l - candidates[i].size()
                                                : candidates[i].size() - l;
            };
            if (diff(ref.size()) < diff(best) || (diff(ref.size()) == diff(best) && ref.size() < best))
                best = ref.size();
        }
        r_len += best;
    }
    double bp = c_len >= r_len ? 1.0
                               : std::exp(1.0 - static_cast<double>(r_len) / static_cast<double>(c_len));
    return bp * std::exp(log_prec_sum / static_cast<double>(n));
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// LCS-based F-measure with beta = 1.2 (recall-weighted).
inline double rouge_l(const Tokens& candidate, const Tokens& reference, double beta = 1.2) {
    if (candidate.empty() || reference.empty()) throw DataError("rouge_l: empty sequence");
    double lcs = static_cast<double>(lcs_length(candidate, reference));
    if (lcs == 0) return 0.0;
    double p = lcs / static_cast<double>(candidate.size());
    double r = lcs / static_cast<double>(reference.size());
    return (1.0 + beta * beta) * p * r / (r + beta * beta * p);
}

// Corpus ROUGE-L: per pair, best F over the references; averaged.
inline double rouge_l_corpus(const std::vector<Tokens>& candidates,
                             const std::vector<std::vector<Tokens>>& references,
                             double beta = 1.2) {
    if (candidates.empty() || candidates.size() != references.size())
        throw DataError("rouge_l_corpus: empty corpus or length mismatch");
    double sum = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double best = 0;
        for (const auto& ref : references[i])
            if (!candidates[i].empty()) best = std::max(best, rouge_l(candidates[i], ref, beta));
        sum += best;
    }
    return sum / static_cast<double>(candidates.size());
}

// Original CIDEr (no length penalty), scaled by 10: per order n=1..4,
// tf-idf vectors with idf over the reference corpus grouped by image;
// score = 10 * mean_n of cosine similarity averaged over references.
inline double cider(const std::vector<Tokens>& candidates,
                    const std::vector<std::vector<Tokens>>& references) {
    if (candidates.empty() || candidates.size() != references.size())
        throw DataError("cider: empty corpus or length mismatch");
    if (candidates.size() < 2)
        throw DataError("cider: idf degenerates on a single-image corpus");
    double n_images = static_cast<double>(references.size());
    double total = 0;
    for (std::size_t order = 1; order <= 4; ++order) {
        // document frequency: number of images whose references contain the gram
        std::map<Tokens, double> df;
        for (const auto& refs : references) {
            std::set<Tokens> seen;
            for (const auto& ref : refs)
                for (const auto& [g, c] : detail::ngram_counts(ref, order)) seen.insert(g);
            for (const auto& g : seen) df[g] += 1.0;
        }
        auto tfidf = [&](const Tokens& s) {
            std::map<Tokens, double> v;
            auto counts = detail::ngram_counts(s, order);
            double total_grams = 0;
            for (const auto& [g, c] : counts) total_grams += static_cast<double>(c);
            for (const auto& [g, c] : counts) {
                auto it = df.find(g);
                double idf = std::log(n_images / (it == df.end() ? 1.0 : it->second));
                v[g] = static_cast<double>(c) / total_grams * idf;
            }
            return v;
        };
        auto cosine = [](const std::map<Tokens, double>& a, const std::map<Tokens, double>& b) {
            double dot = 0, na = 0, nb = 0;
            for (const auto& [g, v] : a) {
                na += v * v;
                auto it = b.find(g);
                if (it != b.end()) dot += v * it->second;
            }
            for (const auto& [g, v] : b) nb += v * v;
            if (na == 0 || nb == 0) return 0.0;
            return dot / (std::sqrt(na) * std::sqrt(nb));
        };
        double order_sum = 0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            auto gc = tfidf(candidates[i]);
            double ref_sum = 0;
            for (const auto& ref : references[i]) ref_sum += cosine(gc, tfidf(ref));
            order_sum += references[i].empty() ? 0 : ref_sum / static_cast<double>(references[i].size());
        }
        total += order_sum / static_cast<double>(candidates.size());
    }
    return 10.0 * total / 4.0;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw DataError("pearson: need equal lengths >= 2");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) throw DataError("pearson: undefined for a constant input");
    return sxy / std::sqrt(sxx * syy);
}

struct RatingRecord {
    std::string pair_id;
    std::string model_id;
    std::string rater;
    int rating = 0;
};

inline void append_rating(const std::string& path, const RatingRecord& r) {
    std::ofstream f(path, std::ios::app);
    if (!f) throw DataError("cannot open ratings file: " + path);
    nlohmann::json j = {{"pair_id", r.pair_id}, {"model_id", r.model_id}, {"rating", r.rating}};
    if (!r.rater.empty()) j["rater"] = r.rater;
    f << j.dump() << "\n";
}

// Mean human rating per model over a ratings JSONL file. Ratings are
// integers in 0..4; duplicate (pair, model, rater) entries are rejected.
inline std::map<std::string, double> aggregate_ratings(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open ratings file: " + path);
    std::map<std::string, std::pair<double, std::size_t>> acc;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            RatingRecord r;
            r.pair_id = j.at("pair_id").get<std::string>();
            r.model_id = j.at("model_id").get<std::string>();
            r.rating = j.at("rating").get<int>();
            r.rater = j.value("rater", "anon");
            if (r.rating < 0 || r.rating > 4)
                throw DataError("rating out of range 0..4: " + std::to_string(r.rating));
            if (!seen.insert({r.pair_id, r.model_id, r.rater}).second)
                throw DataError("duplicate rating for (" + r.pair_id + ", " + r.model_id + ", " +
                                r.rater + ")");
            acc[r.model_id].first += r.rating;
            acc[r.model_id].second += 1;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    std::map<std::string, double> out;
    for (const auto& [model, pr] : acc) out[model] = pr.first / static_cast<double>(pr.second);
    return out;
}

// Pearson correlation between per-model metric values and per-model
// human means, for each metric column.
inline std::map<std::string, double> metric_human_correlations(
    const std::map<std::string, std::map<std::string, double>>& metrics_by_model,
    const std::map<std::string, double>& human_means) {
    std::set<std::string> metric_names;
    for (const auto& [model, m] : metrics_by_model)
        for (const auto& [name, v] : m) metric_names.insert(name);
    std::map<std::string, double> out;
    for (const auto& name : metric_names) {
        std::vector<double> x, y;
        for (const auto& [model, m] : metrics_by_model) {
            auto hit = human_means.find(model);
            auto mit = m.find(name);
            if (hit == human_means.end() || mit == m.end()) continue;
            x.push_back(mit->second);
            y.push_back(hit->second);
        }
        if (x.size() >= 2) out[name] = pearson(x, y);
    }
    return out;
}

}  // namespace ivqa
