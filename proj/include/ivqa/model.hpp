#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivqa/dataset.hpp"
#include "ivqa/params.hpp"
#include "ivqa/tape.hpp"
#include "ivqa/tensor.hpp"
#include "ivqa/text.hpp"

namespace ivqa {

enum class Variant { full, no_attention, answer_only, image_only, image_plus_answer_type, sat_style };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_attention: return "noattn";
        case Variant::answer_only: return "a";
        case Variant::image_only: return "i";
        case Variant::image_plus_answer_type: return "iat";
        case Variant::sat_style: return "sat";
    }
    return "full";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "full") return Variant::full;
    if (s == "noattn") return Variant::no_attention;
    if (s == "a") return Variant::answer_only;
    if (s == "i") return Variant::image_only;
    if (s == "iat") return Variant::image_plus_answer_type;
    if (s == "sat") return Variant::sat_style;
    throw UsageError("unknown variant: " + s);
}

struct ModelConfig {
    std::size_t hidden = 32;
    std::size_t embed = 16;
    std::size_t mlb = 32;  // latent dim of the bilinear fusions
    std::size_t vocab = 0;
    std::size_t grid = 4;       // G; local features are G*G cells
    std::size_t depth = 15;     // D; per-cell feature length
    std::size_t global_dim = 14;
    std::size_t max_len = 20;
    std::size_t n_answer_types = 5;
    Variant variant = Variant::full;
    bool length_normalize = false;  // ranking score: raw log-prob by default

    // Which inputs and mechanisms the variant enables.
    bool uses_answer_lstm() const {
        return variant == Variant::full || variant == Variant::no_attention ||
               variant == Variant::answer_only || variant == Variant::sat_style;
    }
    bool uses_type_embed() const { return variant == Variant::image_plus_answer_type; }
    bool uses_image() const { return variant != Variant::answer_only; }
    bool uses_attention() const {
        return variant == Variant::full || variant == Variant::sat_style;
    }
    // Whether the answer code enters the per-step context z_t.
    bool answer_in_context() const {
        return uses_answer_lstm() ? variant != Variant::sat_style : uses_type_embed();
    }

    nlohmann::json to_json() const {
        return {{"hidden", hidden},   {"embed", embed},         {"mlb", mlb},
                {"vocab", vocab},     {"grid", grid},           {"depth", depth},
                {"global_dim", global_dim}, {"max_len", max_len},
                {"n_answer_types", n_answer_types}, {"variant", variant_name(variant)},
                {"length_normalize", length_normalize}};
    }
    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.hidden = j.at("hidden");
        c.embed = j.at("embed");
        c.mlb = j.at("mlb");
        c.vocab = j.at("vocab");
        c.grid = j.at("grid");
        c.depth = j.at("depth");
        c.global_dim = j.at("global_dim");
        c.max_len = j.at("max_len");
        c.n_answer_types = j.at("n_answer_types");
        c.variant = variant_from_name(j.at("variant"));
        c.length_normalize = j.at("length_normalize");
        return c;
    }
};

inline std::size_t type_index(AnswerType t) { return static_cast<std::size_t>(t); }

// Registers every weight the variant needs. Matrices are Glorot-uniform,
// biases zero except the LSTM forget gates which start at 1.
template <typename T>
ParamRegistry<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ParamRegistry<T> p;
    p.rng_seed = seed;
    std::uint64_t k = seed;
    auto mat = [&](const std::string& name, Shape shape) {
        p.add(name, glorot_init<T>(shape, k++ * 0x9e3779b97f4a7c15ull + 17));
    };
    auto lstm_bias = [&](const std::string& name, std::size_t h) {
        Tensor<T> b = Tensor<T>::zeros({4 * h});
        for (std::size_t i = h; i < 2 * h; ++i) b.data[i] = T(1);  // forget gate
        p.add(name, std::move(b));
    };
    std::size_t H = cfg.hidden;
    mat("embed", {cfg.vocab, cfg.embed});
    if (cfg.uses_answer_lstm()) {
        mat("ans_lstm.Wx", {4 * H, cfg.embed});
        mat("ans_lstm.Wh", {4 * H, H});
        lstm_bias("ans_lstm.b", H);
    }
    if (cfg.uses_type_embed()) mat("type_embed", {cfg.n_answer_types, 2 * H});
    mat("dec_lstm.Wx", {4 * H, cfg.embed});
    mat("dec_lstm.Wh", {4 * H, H});
    lstm_bias("dec_lstm.b", H);
    if (cfg.uses_image()) mat("glimpse.W_ih", {H, cfg.global_dim});
    if (cfg.uses_answer_lstm() || cfg.uses_type_embed()) mat("glimpse.W_ah", {H, 2 * H});
    p.add("glimpse.b", Tensor<T>::zeros({H}));
    mat("ctx.W_q", {H, H});
    if (cfg.answer_in_context()) mat("ctx.W_a", {H, 2 * H});
    p.add("ctx.b", Tensor<T>::zeros({H}));
    if (cfg.uses_attention()) {
        mat("attn.W_v", {cfg.mlb, cfg.depth});
        mat("attn.W_z", {cfg.mlb, H});
        mat("attn.U", {cfg.mlb, cfg.mlb});
        mat("attn.p", {cfg.mlb});
    }
    if (cfg.uses_image()) mat("coattn.W_c", {cfg.mlb, cfg.depth});
    mat("coattn.W_z", {cfg.mlb, H});
    mat("coattn.U", {cfg.mlb, cfg.mlb});
    mat("out.W_o", {cfg.vocab, cfg.mlb});
    p.add("out.b", Tensor<T>::zeros({cfg.vocab}));
    return p;
}

// Per-step attention maps, contexts and fused outputs.
template <typename T>
struct AttentionTrace {
    std::vector<Tensor<T>> alpha;    // each G*G, sums to 1
    std::vector<Tensor<T>> context;  // z_t
    std::vector<Tensor<T>> attended; // c_t
    std::vector<Tensor<T>> fused;    // g_t
};

template <typename T>
struct Hypothesis {
    TokenIds tokens;  // without bos/eos
    double log_prob = 0.0;
    bool finished = false;  // eos emitted (log_prob includes the eos term)
};

// Binds a parameter registry onto one computation record. Inference
// simply never calls backward.
template <typename T>
class ModelOnTape {
  public:
    using Ref = typename Tape<T>::Ref;

    ModelOnTape(Tape<T>& tape, const ModelConfig& cfg, const ParamRegistry<T>& params)
        : tape_(tape), cfg_(cfg) {
        for (const auto& e : params.entries()) refs_[e.name] = tape_.leaf(e.tensor);
        zero_h_ = tape_.leaf(Tensor<T>::zeros({cfg.hidden}));
    }

    Ref param(const std::string& name) const {
        auto it = refs_.find(name);
        if (it == refs_.end()) throw DataError("model param not bound: " + name);
        return it->second;
    }
    bool has_param(const std::string& name) const { return refs_.count(name) != 0; }
    const ModelConfig& config() const { return cfg_; }
    Tape<T>& tape() { return tape_; }

    struct Inputs {
        Ref grid_rows;  // [G*G, D]; zero for answer-only
        Ref grid_mean;  // [D]
        Ref global;     // [global_dim]
        Ref answer;     // [2H] answer code (or type embedding, or zero)
    };

    Inputs bind(const FeatureBundle& fb, const TokenIds& answer_ids, AnswerType type) {
        Inputs in;
        std::size_t cells = cfg_.grid * cfg_.grid;
        if (cfg_.uses_image()) {
            if (fb.g != cfg_.grid || fb.d != cfg_.depth || fb.global.size() != cfg_.global_dim)
                throw DataError("feature bundle does not match model config");
            Tensor<T> rows = Tensor<T>::zeros({cells, cfg_.depth});
            for (std::size_t i = 0; i < rows.size(); ++i) rows.data[i] = static_cast<T>(fb.grid[i]);
            in.grid_rows = tape_.leaf(std::move(rows));
            auto mp = fb.mean_pooled();
            Tensor<T> mean = Tensor<T>::zeros({cfg_.depth});
            for (std::size_t i = 0; i < mp.size(); ++i) mean.data[i] = static_cast<T>(mp[i]);
            in.grid_mean = tape_.leaf(std::move(mean));
            Tensor<T> glob = Tensor<T>::zeros({cfg_.global_dim});
            for (std::size_t i = 0; i < fb.global.size(); ++i)
                glob.data[i] = static_cast<T>(fb.global[i]);
            in.global = tape_.leaf(std::move(glob));
        } else {
            in.grid_rows = tape_.leaf(Tensor<T>::zeros({cells, cfg_.depth}));
            in.grid_mean = tape_.leaf(Tensor<T>::zeros({cfg_.depth}));
            in.global = tape_.leaf(Tensor<T>::zeros({cfg_.global_dim}));
        }
        if (cfg_.uses_answer_lstm())
            in.answer = encode_answer(answer_ids);
        else if (cfg_.uses_type_embed())
            in.answer = tape_.row(param("type_embed"), type_index(type));
        else
            in.answer = tape_.leaf(Tensor<T>::zeros({2 * cfg_.hidden}));
        return in;
    }

    // Runs the answer LSTM and returns [h_final ; m_final] (length 2H).
    Ref encode_answer(const TokenIds& answer_ids) {
        if (answer_ids.empty()) throw DataError("encode_answer: empty answer");
        Ref h = zero_h_, m = zero_h_;
        for (std::size_t id : answer_ids) {
            Ref x = tape_.row(param("embed"), id);
            std::tie(h, m) = lstm_step(param("ans_lstm.Wx"), param("ans_lstm.Wh"),
                                       param("ans_lstm.b"), x, h, m);
        }
        return tape_.concat(h, m);
    }

    // h0 = tanh(W_ih I_s + W_ah a + b). This seeds the decoder hidden
    // state; the cell state starts at zero.
    Ref initial_glimpse(const Inputs& in) {
        Ref acc = param("glimpse.b");
        if (has_param("glimpse.W_ih")) acc = tape_.add(acc, tape_.matvec(param("glimpse.W_ih"), in.global));
        if (has_param("glimpse.W_ah")) acc = tape_.add(acc, tape_.matvec(param("glimpse.W_ah"), in.answer));
        return tape_.tanh_(acc);
    }

    struct StepOut {
        Ref h, m;       // advanced decoder state
        Ref log_probs;  // log distribution over next word, [V]
        Ref alpha;      // attention map, [G*G]
        Ref context;    // z_t
        Ref attended;   // c_t
        Ref fused;      // g_t
    };

    // One decode step: consume token w_t, return the distribution for
    // w_{t+1} and the attention map.
    StepOut decoder_step(Ref h, Ref m, std::size_t token, const Inputs& in) {
        if (token >= cfg_.vocab) throw DataError("decoder_step: token id out of range");
        StepOut out;
        Ref x = tape_.row(param("embed"), token);
        std::tie(out.h, out.m) =
            lstm_step(param("dec_lstm.Wx"), param("dec_lstm.Wh"), param("dec_lstm.b"), x, h, m);
        // partial question-answer context z_t
        Ref zacc = tape_.add(tape_.matvec(param("ctx.W_q"), out.h), param("ctx.b"));
        if (has_param("ctx.W_a")) zacc = tape_.add(zacc, tape_.matvec(param("ctx.W_a"), in.answer));
        Ref z = tape_.relu_(zacc);
        out.context = z;
        std::size_t cells = cfg_.grid * cfg_.grid;
        if (cfg_.uses_attention()) {
            // f_ij = tanh(U (tanh(W_v v_ij) * tanh(W_z z)))
            Ref tv = tape_.tanh_(tape_.rows_linear(param("attn.W_v"), in.grid_rows));
            Ref tz = tape_.tanh_(tape_.matvec(param("attn.W_z"), z));
            Ref fused = tape_.tanh_(tape_.rows_linear(param("attn.U"), tape_.rows_mul_vec(tv, tz)));
            Ref scores = tape_.rows_dot(fused, param("attn.p"));
            out.alpha = tape_.softmax_(scores);
            out.attended = tape_.mix_rows(out.alpha, in.grid_rows);
        } else {
            out.alpha = tape_.leaf(Tensor<T>::full({cells}, T(1) / static_cast<T>(cells)));
            out.attended = in.grid_mean;
        }
        // co-attention g_t = tanh(U' (tanh(W_c c) * tanh(W'_z z))). Without
        // an image the attended vector is identically zero and the product
        // would sever the decoder from the output, so the image factor is
        // dropped.
        Ref tz2 = tape_.tanh_(tape_.matvec(param("coattn.W_z"), z));
        Ref gate = tz2;
        if (cfg_.uses_image()) {
            Ref tc = tape_.tanh_(tape_.matvec(param("coattn.W_c"), out.attended));
            gate = tape_.mul(tc, tz2);
        }
        out.fused = tape_.tanh_(tape_.matvec(param("coattn.U"), gate));
        Ref logits = tape_.add(tape_.matvec(param("out.W_o"), out.fused), param("out.b"));
        out.log_probs = tape_.log_softmax_(logits);
        return out;
    }

    // Teacher-forced log p(question | I, a): bos then each question
    // token, terminal eos included. No length normalization unless the
    // config enables it.
    Ref sequence_log_prob(const TokenIds& question, const Inputs& in,
                          AttentionTrace<T>* trace = nullptr) {
        if (question.empty()) throw DataError("sequence_log_prob: empty question");
        if (question.size() > cfg_.max_len)
            throw DataError("sequence_log_prob: question exceeds max length");
        Ref h = initial_glimpse(in);
        Ref m = zero_h_;
        std::vector<Ref> terms;
        std::size_t prev = Vocabulary::kBos;
        for (std::size_t t = 0; t <= question.size(); ++t) {
            StepOut s = decoder_step(h, m, prev, in);
            std::size_t target = t < question.size() ? question[t] : Vocabulary::kEos;
            terms.push_back(tape_.pick(s.log_probs, target));
            if (trace) {
                trace->alpha.push_back(tape_.value(s.alpha));
                trace->context.push_back(tape_.value(s.context));
                trace->attended.push_back(tape_.value(s.attended));
                trace->fused.push_back(tape_.value(s.fused));
            }
            h = s.h;
            m = s.m;
            prev = target;
        }
        Ref total = tape_.sum_scalars(terms);
        if (cfg_.length_normalize)
            total = tape_.scale(total, T(1) / static_cast<T>(question.size() + 1));
        return total;
    }

    std::map<std::string, Tensor<T>> collect_grads() const {
        std::map<std::string, Tensor<T>> out;
        for (const auto& [name, ref] : refs_) out[name] = tape_.grad(ref);
        return out;
    }

  private:
    std::pair<Ref, Ref> lstm_step(Ref wx, Ref wh, Ref b, Ref x, Ref h, Ref m) {
        std::size_t H = cfg_.hidden;
        Ref pre = tape_.add(tape_.add(tape_.matvec(wx, x), tape_.matvec(wh, h)), b);
        Ref gi = tape_.sigmoid_(tape_.slice(pre, 0, H));
        Ref gf = tape_.sigmoid_(tape_.slice(pre, H, H));
        Ref gg = tape_.tanh_(tape_.slice(pre, 2 * H, H));
        Ref go = tape_.sigmoid_(tape_.slice(pre, 3 * H, H));
        Ref m2 = tape_.add(tape_.mul(gf, m), tape_.mul(gi, gg));
        Ref h2 = tape_.mul(go, tape_.tanh_(m2));
        return {h2, m2};
    }

    Tape<T>& tape_;
    ModelConfig cfg_;
    std::map<std::string, Ref> refs_;
    Ref zero_h_;
};

// Standalone scoring: fresh record per call, backward never invoked.
template <typename T>
double score_question(const ModelConfig& cfg, const ParamRegistry<T>& params,
                      const TokenIds& question, const FeatureBundle& fb,
                      const TokenIds& answer_ids, AnswerType type,
                      AttentionTrace<T>* trace = nullptr) {
    Tape<T> tape;
    ModelOnTape<T> model(tape, cfg, params);
    auto in = model.bind(fb, answer_ids, type);
    auto r = model.sequence_log_prob(question, in, trace);
    return static_cast<double>(tape.value(r).data[0]);
}

namespace detail {
inline bool hyp_less(const TokenIds& a, const TokenIds& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}
template <typename T>
bool hyp_order(const Hypothesis<T>& a, const Hypothesis<T>& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return hyp_less(a.tokens, b.tokens);
}
}  // namespace detail

// Standard beam search; finished hypotheses are frozen into a completed
// set, ties broken lexicographically by token ids.
template <typename T>
std::vector<Hypothesis<T>> beam_search(const ModelConfig& cfg, const ParamRegistry<T>& params,
                                       const FeatureBundle& fb, const TokenIds& answer_ids,
                                       AnswerType type, std::size_t beam_width,
                                       std::size_t max_len = 20) {
    if (beam_width < 1) throw UsageError("beam_search: beam width must be >= 1");
    Tape<T> tape;
    ModelOnTape<T> model(tape, cfg, params);
    auto in = model.bind(fb, answer_ids, type);
    using Ref = typename Tape<T>::Ref;

    struct Alive {
        TokenIds tokens;
        double log_prob = 0.0;
        Ref h, m;
    };
    std::vector<Alive> alive{{TokenIds{}, 0.0, model.initial_glimpse(in),
                              tape.leaf(Tensor<T>::zeros({cfg.hidden}))}};
    std::vector<Hypothesis<T>> completed;
    for (std::size_t step = 0; step < max_len && !alive.empty(); ++step) {
        std::vector<Alive> next;
        for (const auto& hyp : alive) {
            std::size_t input = hyp.tokens.empty() ? Vocabulary::kBos : hyp.tokens.back();
            auto out = model.decoder_step(hyp.h, hyp.m, input, in);
            const auto& lp = tape.value(out.log_probs).data;
            for (std::size_t v = 0; v < cfg.vocab; ++v) {
                double score = hyp.log_prob + static_cast<double>(lp[v]);
                if (v == Vocabulary::kEos) {
                    completed.push_back({hyp.tokens, score, true});
                } else {
                    TokenIds toks = hyp.tokens;
                    toks.push_back(v);
                    next.push_back({std::move(toks), score, out.h, out.m});
                }
            }
        }
        std::sort(next.begin(), next.end(), [](const Alive& a, const Alive& b) {
            if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
            return detail::hyp_less(a.tokens, b.tokens);
        });
        if (next.size() > beam_width) next.resize(beam_width);
        alive = std::move(next);
    }
    for (const auto& hyp : alive) completed.push_back({hyp.tokens, hyp.log_prob, false});
    std::sort(completed.begin(), completed.end(), detail::hyp_order<T>);
    return completed;
}

// Ancestral sampling from the per-step distributions; deterministic
// given the seed. temperature scales log-probabilities before renormalizing.
template <typename T>
TokenIds sample_question(const ModelConfig& cfg, const ParamRegistry<T>& params,
                         const FeatureBundle& fb, const TokenIds& answer_ids, AnswerType type,
                         double temperature, std::uint64_t seed, std::size_t max_len = 20) {
    if (temperature <= 0) throw UsageError("sample_question: temperature must be > 0");
    Tape<T> tape;
    ModelOnTape<T> model(tape, cfg, params);
    auto in = model.bind(fb, answer_ids, type);
    auto h = model.initial_glimpse(in);
    auto m = tape.leaf(Tensor<T>::zeros({cfg.hidden}));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    TokenIds out;
    std::size_t prev = Vocabulary::kBos;
    for (std::size_t t = 0; t < max_len; ++t) {
        auto s = model.decoder_step(h, m, prev, in);
        const auto& lp = tape.value(s.log_probs).data;
        std::vector<double> w(cfg.vocab);
        double mx = -1e300;
        for (std::size_t v = 0; v < cfg.vocab; ++v)
            mx = std::max(mx, static_cast<double>(lp[v]) / temperature);
        double sum = 0;
        for (std::size_t v = 0; v < cfg.vocab; ++v) {
            w[v] = std::exp(static_cast<double>(lp[v]) / temperature - mx);
            sum += w[v];
        }
        double u = unif(rng) * sum;
        std::size_t pick = cfg.vocab - 1;
        double acc = 0;
        for (std::size_t v = 0; v < cfg.vocab; ++v) {
            acc += w[v];
            if (u < acc) {
                pick = v;
                break;
            }
        }
        if (pick == Vocabulary::kEos) break;
        out.push_back(pick);
        h = s.h;
        m = s.m;
        prev = pick;
    }
    return out;
}

// Nearest-neighbour baseline: averaged cosine distance over mean-pooled
// grid features and answer bag-of-words; ties go to the smallest image id.
inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

inline Tokens nn_predict(const FeatureBundle& query_features, const Tokens& query_answer,
                         const std::vector<QATriple>& training_set) {
    if (training_set.empty()) throw DataError("nn_predict: empty training set");
    auto bow = [](const Tokens& toks) {
        std::map<std::string, double> m;
        for (const auto& t : toks) m[t] += 1.0;
        return m;
    };
    auto bow_cos_dist = [&](const Tokens& a, const Tokens& b) {
        auto ma = bow(a), mb = bow(b);
        double dot = 0, na = 0, nb = 0;
        for (const auto& [k, v] : ma) {
            na += v * v;
            auto it = mb.find(k);
            if (it != mb.end()) dot += v * it->second;
        }
        for (const auto& [k, v] : mb) nb += v * v;
        if (na == 0 || nb == 0) return 1.0;
        return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    };
    std::vector<double> qmean = query_features.mean_pooled();
    const QATriple* best = nullptr;
    double best_dist = 0;
    for (const auto& t : training_set) {
        double d = 0.5 * cosine_distance(qmean, t.features.mean_pooled()) +
                   0.5 * bow_cos_dist(query_answer, t.answer);
        if (!best || d < best_dist - 1e-12 ||
            (std::abs(d - best_dist) <= 1e-12 && t.image_id < best->image_id)) {
            best = &t;
            best_dist = d;
        }
    }
    return best->question;
}

// Model card sidecar: config plus the vocabulary it was trained with.
inline void save_model_card(const std::string& path, const ModelConfig& cfg,
                            const Vocabulary& vocab) {
    nlohmann::json j;
    j["config"] = cfg.to_json();
    j["vocab"] = vocab.tokens();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(vocab.hash()));
    j["vocab_hash"] = buf;
    std::ofstream f(path);
    if (!f) throw DataError("cannot write model card: " + path);
    f << j.dump(2) << "\n";
}

inline std::pair<ModelConfig, Vocabulary> load_model_card(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open model card: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    return {ModelConfig::from_json(j.at("config")),
            Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>())};
}

}  // namespace ivqa
