#include <catch_amalgamated.hpp>

#include <cstdio>
#include <random>

#include "ivqa/model.hpp"

using namespace ivqa;

namespace {

ModelConfig tiny_config(Variant v = Variant::full) {
    ModelConfig c;
    c.hidden = 3;
    c.embed = 2;
    c.mlb = 4;
    c.vocab = 7;
    c.grid = 2;
    c.depth = 5;
    c.global_dim = 4;
    c.max_len = 8;
    c.variant = v;
    return c;
}

FeatureBundle random_bundle(const ModelConfig& c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    FeatureBundle fb;
    fb.g = c.grid;
    fb.d = c.depth;
    fb.grid.resize(c.grid * c.grid * c.depth);
    for (auto& v : fb.grid) v = unif(rng);
    fb.global.resize(c.global_dim);
    for (auto& v : fb.global) v = unif(rng);
    return fb;
}

// Independent straight-line reference of the forward pass, kept free of
// any Tape machinery.
using Vec = std::vector<double>;

Vec ref_matvec(const Tensor<double>& W, const Vec& x) {
    Vec out(W.shape[0], 0.0);
    for (std::size_t i = 0; i < W.shape[0]; ++i)
        for (std::size_t j = 0; j < W.shape[1]; ++j) out[i] += W.data[i * W.shape[1] + j] * x[j];
    return out;
}
Vec ref_add(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}
Vec ref_map(Vec a, double (*f)(double)) {
    for (auto& v : a) v = f(v);
    return a;
}
double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double ref_relu(double x) { return x > 0 ? x : 0; }

void ref_lstm(const ParamRegistry<double>& p, const std::string& prefix, const Vec& x, Vec& h,
              Vec& m) {
    std::size_t H = h.size();
    Vec pre = ref_add(ref_add(ref_matvec(p.at(prefix + ".Wx"), x), ref_matvec(p.at(prefix + ".Wh"), h)),
                      Vec(p.at(prefix + ".b").data.begin(), p.at(prefix + ".b").data.end()));
    Vec h2(H), m2(H);
    for (std::size_t k = 0; k < H; ++k) {
        double gi = ref_sigmoid(pre[k]);
        double gf = ref_sigmoid(pre[H + k]);
        double gg = std::tanh(pre[2 * H + k]);
        double go = ref_sigmoid(pre[3 * H + k]);
        m2[k] = gf * m[k] + gi * gg;
        h2[k] = go * std::tanh(m2[k]);
    }
    h = h2;
    m = m2;
}

Vec ref_embed(const ParamRegistry<double>& p, std::size_t id) {
    const auto& E = p.at("embed");
    Vec out(E.shape[1]);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = E.data[id * E.shape[1] + j];
    return out;
}

struct RefStep {
    Vec log_probs, alpha, z, c, g;
};

// Full-variant reference decode step (Eqs. for context, attention,
// co-attention and the word distribution).
RefStep ref_decoder_step(const ModelConfig& cfg, const ParamRegistry<double>& p,
                         const FeatureBundle& fb, const Vec& answer_code, std::size_t token,
                         Vec& h, Vec& m) {
    ref_lstm(p, "dec_lstm", ref_embed(p, token), h, m);
    Vec z = ref_add(ref_matvec(p.at("ctx.W_q"), h),
                    Vec(p.at("ctx.b").data.begin(), p.at("ctx.b").data.end()));
    if (p.has("ctx.W_a")) z = ref_add(std::move(z), ref_matvec(p.at("ctx.W_a"), answer_code));
    z = ref_map(std::move(z), ref_relu);
    std::size_t cells = cfg.grid * cfg.grid;
    Vec tz = ref_map(ref_matvec(p.at("attn.W_z"), z), std::tanh);
    Vec scores(cells);
    for (std::size_t k = 0; k < cells; ++k) {
        Vec v(fb.grid.begin() + static_cast<std::ptrdiff_t>(k * cfg.depth),
              fb.grid.begin() + static_cast<std::ptrdiff_t>((k + 1) * cfg.depth));
        Vec tv = ref_map(ref_matvec(p.at("attn.W_v"), v), std::tanh);
        for (std::size_t j = 0; j < tv.size(); ++j) tv[j] *= tz[j];
        Vec f = ref_map(ref_matvec(p.at("attn.U"), tv), std::tanh);
        double s = 0;
        for (std::size_t j = 0; j < f.size(); ++j) s += f[j] * p.at("attn.p").data[j];
        scores[k] = s;
    }
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    Vec alpha(cells);
    double sum = 0;
    for (std::size_t k = 0; k < cells; ++k) {
        alpha[k] = std::exp(scores[k] - mx);
        sum += alpha[k];
    }
    for (auto& a : alpha) a /= sum;
    Vec c(cfg.depth, 0.0);
    for (std::size_t k = 0; k < cells; ++k)
        for (std::size_t j = 0; j < cfg.depth; ++j) c[j] += alpha[k] * fb.grid[k * cfg.depth + j];
    Vec tc = ref_map(ref_matvec(p.at("coattn.W_c"), c), std::tanh);
    Vec tz2 = ref_map(ref_matvec(p.at("coattn.W_z"), z), std::tanh);
    for (std::size_t j = 0; j < tc.size(); ++j) tc[j] *= tz2[j];
    Vec g = ref_map(ref_matvec(p.at("coattn.U"), tc), std::tanh);
    Vec logits = ref_add(ref_matvec(p.at("out.W_o"), g),
                         Vec(p.at("out.b").data.begin(), p.at("out.b").data.end()));
    double lmx = logits[0];
    for (double v : logits) lmx = std::max(lmx, v);
    double lsum = 0;
    for (double v : logits) lsum += std::exp(v - lmx);
    double lse = lmx + std::log(lsum);
    Vec lp = logits;
    for (auto& v : lp) v -= lse;
    return {lp, alpha, z, c, g};
}

}  // namespace

TEST_CASE("parameter registry has the expected shapes per variant") {
    auto cfg = tiny_config();
    auto p = init_params<double>(cfg, 1);
    REQUIRE(p.at("embed").shape == Shape{7, 2});
    REQUIRE(p.at("dec_lstm.Wx").shape == Shape{12, 2});
    REQUIRE(p.at("dec_lstm.Wh").shape == Shape{12, 3});
    REQUIRE(p.at("attn.W_v").shape == Shape{4, 5});
    REQUIRE(p.at("ctx.W_a").shape == Shape{3, 6});
    REQUIRE(p.at("out.W_o").shape == Shape{7, 4});
    // forget gates start open
    for (std::size_t k = 3; k < 6; ++k) {
        REQUIRE(p.at("dec_lstm.b").data[k] == 1.0);
        REQUIRE(p.at("ans_lstm.b").data[k] == 1.0);
    }
    REQUIRE(p.at("dec_lstm.b").data[0] == 0.0);

    auto pa = init_params<double>(tiny_config(Variant::answer_only), 1);
    REQUIRE_FALSE(pa.has("attn.W_v"));
    REQUIRE_FALSE(pa.has("glimpse.W_ih"));
    REQUIRE(pa.has("ans_lstm.Wx"));
    auto pi = init_params<double>(tiny_config(Variant::image_only), 1);
    REQUIRE_FALSE(pi.has("ans_lstm.Wx"));
    REQUIRE_FALSE(pi.has("type_embed"));
    REQUIRE_FALSE(pi.has("ctx.W_a"));
    auto pt = init_params<double>(tiny_config(Variant::image_plus_answer_type), 1);
    REQUIRE(pt.at("type_embed").shape == Shape{5, 6});
    auto ps = init_params<double>(tiny_config(Variant::sat_style), 1);
    REQUIRE(ps.has("attn.W_v"));
    REQUIRE_FALSE(ps.has("ctx.W_a"));  // context from the question state only
    REQUIRE(ps.has("glimpse.W_ah"));
}

TEST_CASE("decoder step matches the straight-line reference") {
    auto cfg = tiny_config();
    auto p = init_params<double>(cfg, 77);
    auto fb = random_bundle(cfg, 3);
    TokenIds answer{4, 5};

    // reference answer code and initial glimpse
    Vec h(cfg.hidden, 0.0), m(cfg.hidden, 0.0);
    for (std::size_t id : answer) ref_lstm(p, "ans_lstm", ref_embed(p, id), h, m);
    Vec acode = h;
    acode.insert(acode.end(), m.begin(), m.end());
    Vec glob(fb.global.begin(), fb.global.end());
    Vec h0 = ref_add(ref_add(ref_matvec(p.at("glimpse.W_ih"), glob),
                             ref_matvec(p.at("glimpse.W_ah"), acode)),
                     Vec(p.at("glimpse.b").data.begin(), p.at("glimpse.b").data.end()));
    h0 = ref_map(std::move(h0), std::tanh);

    Tape<double> tape;
    ModelOnTape<double> model(tape, cfg, p);
    auto in = model.bind(fb, answer, AnswerType::color);
    for (std::size_t k = 0; k < 2 * cfg.hidden; ++k)
        REQUIRE(tape.value(in.answer).data[k] == Catch::Approx(acode[k]).margin(1e-12));
    auto g0 = model.initial_glimpse(in);
    for (std::size_t k = 0; k < cfg.hidden; ++k)
        REQUIRE(tape.value(g0).data[k] == Catch::Approx(h0[k]).margin(1e-12));

    // two decode steps against the reference
    Vec rh = h0, rm(cfg.hidden, 0.0);
    auto s1 = model.decoder_step(g0, tape.leaf(Tensor<double>::zeros({cfg.hidden})),
                                 Vocabulary::kBos, in);
    auto r1 = ref_decoder_step(cfg, p, fb, acode, Vocabulary::kBos, rh, rm);
    for (std::size_t v = 0; v < cfg.vocab; ++v)
        REQUIRE(tape.value(s1.log_probs).data[v] == Catch::Approx(r1.log_probs[v]).margin(1e-10));
    for (std::size_t k = 0; k < cfg.grid * cfg.grid; ++k)
        REQUIRE(tape.value(s1.alpha).data[k] == Catch::Approx(r1.alpha[k]).margin(1e-10));
    for (std::size_t k = 0; k < cfg.depth; ++k)
        REQUIRE(tape.value(s1.attended).data[k] == Catch::Approx(r1.c[k]).margin(1e-10));
    auto s2 = model.decoder_step(s1.h, s1.m, 4, in);
    auto r2 = ref_decoder_step(cfg, p, fb, acode, 4, rh, rm);
    for (std::size_t v = 0; v < cfg.vocab; ++v)
        REQUIRE(tape.value(s2.log_probs).data[v] == Catch::Approx(r2.log_probs[v]).margin(1e-10));

    // sequence log-prob is the sum of the picked reference terms
    TokenIds q{4, 6, 5};
    double ref_total = 0;
    Vec th = h0, tm(cfg.hidden, 0.0);
    std::size_t prev = Vocabulary::kBos;
    for (std::size_t t = 0; t <= q.size(); ++t) {
        auto rs = ref_decoder_step(cfg, p, fb, acode, prev, th, tm);
        std::size_t target = t < q.size() ? q[t] : Vocabulary::kEos;
        ref_total += rs.log_probs[target];
        prev = target;
    }
    REQUIRE(score_question(cfg, p, q, fb, answer, AnswerType::color) ==
            Catch::Approx(ref_total).margin(1e-9));
}

TEST_CASE("attention maps are simplex points; degenerate cases are exact") {
    auto cfg = tiny_config();
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = init_params<double>(cfg, rng());
        auto fb = random_bundle(cfg, rng());
        Tape<double> tape;
        ModelOnTape<double> model(tape, cfg, p);
        auto in = model.bind(fb, {4}, AnswerType::other);
        auto s = model.decoder_step(model.initial_glimpse(in),
                                    tape.leaf(Tensor<double>::zeros({cfg.hidden})),
                                    Vocabulary::kBos, in);
        double sum = 0;
        for (double a : tape.value(s.alpha).data) {
            REQUIRE(a >= 0.0);
            sum += a;
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
    }

    SECTION("zero attention projection gives uniform attention") {
        auto p = init_params<double>(cfg, 9);
        for (auto& v : p.at("attn.p").data) v = 0.0;
        auto fb = random_bundle(cfg, 2);
        Tape<double> tape;
        ModelOnTape<double> model(tape, cfg, p);
        auto in = model.bind(fb, {4}, AnswerType::other);
        auto s = model.decoder_step(model.initial_glimpse(in),
                                    tape.leaf(Tensor<double>::zeros({cfg.hidden})),
                                    Vocabulary::kBos, in);
        for (double a : tape.value(s.alpha).data) REQUIRE(a == Catch::Approx(0.25).margin(1e-12));
    }

    SECTION("identical cells collapse the attended vector onto the cell") {
        auto p = init_params<double>(cfg, 10);
        auto fb = random_bundle(cfg, 2);
        for (std::size_t k = 1; k < 4; ++k)
            for (std::size_t j = 0; j < cfg.depth; ++j) fb.grid[k * cfg.depth + j] = fb.grid[j];
        Tape<double> tape;
        ModelOnTape<double> model(tape, cfg, p);
        auto in = model.bind(fb, {4}, AnswerType::other);
        auto s = model.decoder_step(model.initial_glimpse(in),
                                    tape.leaf(Tensor<double>::zeros({cfg.hidden})),
                                    Vocabulary::kBos, in);
        for (std::size_t j = 0; j < cfg.depth; ++j)
            REQUIRE(tape.value(s.attended).data[j] == Catch::Approx(fb.grid[j]).margin(1e-10));
    }
}

TEST_CASE("zero output weights give an exactly uniform word model") {
    auto cfg = tiny_config();
    auto p = init_params<double>(cfg, 4);
    for (auto& v : p.at("out.W_o").data) v = 0.0;
    auto fb = random_bundle(cfg, 1);
    TokenIds q{4, 5};
    double lp = score_question(cfg, p, q, fb, {6}, AnswerType::other);
    REQUIRE(lp == Catch::Approx(-3.0 * std::log(7.0)).margin(1e-12));
}

TEST_CASE("length normalization divides by the target length") {
    auto cfg = tiny_config();
    auto p = init_params<double>(cfg, 12);
    auto fb = random_bundle(cfg, 12);
    TokenIds q{4, 5, 6};
    double raw = score_question(cfg, p, q, fb, {4}, AnswerType::other);
    cfg.length_normalize = true;
    double norm = score_question(cfg, p, q, fb, {4}, AnswerType::other);
    REQUIRE(norm == Catch::Approx(raw / 4.0).margin(1e-12));
}

TEST_CASE("variant input gating") {
    auto fb1 = random_bundle(tiny_config(), 21);
    auto fb2 = random_bundle(tiny_config(), 22);
    TokenIds q{4, 5};

    SECTION("answer-only scores ignore the image") {
        auto cfg = tiny_config(Variant::answer_only);
        auto p = init_params<double>(cfg, 2);
        REQUIRE(score_question(cfg, p, q, fb1, {4}, AnswerType::color) ==
                score_question(cfg, p, q, fb2, {4}, AnswerType::color));
        REQUIRE(score_question(cfg, p, q, fb1, {4}, AnswerType::color) !=
                score_question(cfg, p, q, fb1, {5}, AnswerType::color));
    }
    SECTION("image-only scores ignore the answer") {
        auto cfg = tiny_config(Variant::image_only);
        auto p = init_params<double>(cfg, 2);
        REQUIRE(score_question(cfg, p, q, fb1, {4}, AnswerType::color) ==
                score_question(cfg, p, q, fb1, {5}, AnswerType::shape));
        REQUIRE(score_question(cfg, p, q, fb1, {4}, AnswerType::color) !=
                score_question(cfg, p, q, fb2, {4}, AnswerType::color));
    }
    SECTION("type variant sees only the answer type") {
        auto cfg = tiny_config(Variant::image_plus_answer_type);
        auto p = init_params<double>(cfg, 2);
        REQUIRE(score_question(cfg, p, q, fb1, {4}, AnswerType::color) ==
                score_question(cfg, p, q, fb1, {5}, AnswerType::color));
        REQUIRE(score_question(cfg, p, q, fb1, {4}, AnswerType::color) !=
                score_question(cfg, p, q, fb1, {4}, AnswerType::shape));
    }
    SECTION("no-attention variant attends uniformly") {
        auto cfg = tiny_config(Variant::no_attention);
        auto p = init_params<double>(cfg, 2);
        Tape<double> tape;
        ModelOnTape<double> model(tape, cfg, p);
        auto in = model.bind(fb1, {4}, AnswerType::other);
        auto s = model.decoder_step(model.initial_glimpse(in),
                                    tape.leaf(Tensor<double>::zeros({cfg.hidden})),
                                    Vocabulary::kBos, in);
        for (double a : tape.value(s.alpha).data) REQUIRE(a == 0.25);
        auto mp = fb1.mean_pooled();
        for (std::size_t j = 0; j < cfg.depth; ++j)
            REQUIRE(tape.value(s.attended).data[j] == Catch::Approx(mp[j]).margin(1e-12));
    }
}

TEST_CASE("beam search equals exhaustive enumeration on a tiny model") {
    auto cfg = tiny_config();
    cfg.vocab = 5;
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        auto p = init_params<double>(cfg, rng());
        auto fb = random_bundle(cfg, rng());
        TokenIds answer{4};
        std::size_t max_len = 3;
        auto hyps = beam_search(cfg, p, fb, answer, AnswerType::other, 200, max_len);
        REQUIRE_FALSE(hyps.empty());
        for (std::size_t i = 1; i < hyps.size(); ++i)
            REQUIRE(hyps[i - 1].log_prob >= hyps[i].log_prob);

        // exhaustive: all token sequences up to max_len over the full
        // vocabulary, eos terminating
        struct Best {
            TokenIds tokens;
            double lp = -1e300;
        } best;
        std::function<void(TokenIds&, double)> walk = [&](TokenIds& prefix, double lp) {
            Tape<double> tape;
            ModelOnTape<double> model(tape, cfg, p);
            auto in = model.bind(fb, answer, AnswerType::other);
            auto h = model.initial_glimpse(in);
            auto m = tape.leaf(Tensor<double>::zeros({cfg.hidden}));
            std::size_t prev = Vocabulary::kBos;
            for (std::size_t tok : prefix) {
                auto s = model.decoder_step(h, m, prev, in);
                h = s.h;
                m = s.m;
                prev = tok;
            }
            auto s = model.decoder_step(h, m, prev, in);
            const auto& dist = tape.value(s.log_probs).data;
            double eos_lp = lp + dist[Vocabulary::kEos];
            if (eos_lp > best.lp || (eos_lp == best.lp && prefix < best.tokens)) {
                best.lp = eos_lp;
                best.tokens = prefix;
            }
            if (prefix.size() == max_len) {
                if (lp > best.lp) {
                    best.lp = lp;
                    best.tokens = prefix;
                }
                return;
            }
            for (std::size_t v = 0; v < cfg.vocab; ++v) {
                if (v == Vocabulary::kEos) continue;
                prefix.push_back(v);
                walk(prefix, lp + dist[v]);
                prefix.pop_back();
            }
        };
        TokenIds prefix;
        walk(prefix, 0.0);
        REQUIRE(hyps[0].tokens == best.tokens);
        REQUIRE(hyps[0].log_prob == Catch::Approx(best.lp).margin(1e-9));
    }
}

TEST_CASE("beam width 1 is greedy decoding") {
    auto cfg = tiny_config();
    auto p = init_params<double>(cfg, 8);
    auto fb = random_bundle(cfg, 8);
    auto hyps = beam_search(cfg, p, fb, {4}, AnswerType::other, 1, 5);
    // greedy reference
    Tape<double> tape;
    ModelOnTape<double> model(tape, cfg, p);
    auto in = model.bind(fb, {4}, AnswerType::other);
    auto h = model.initial_glimpse(in);
    auto m = tape.leaf(Tensor<double>::zeros({cfg.hidden}));
    TokenIds greedy;
    std::size_t prev = Vocabulary::kBos;
    for (std::size_t t = 0; t < 5; ++t) {
        auto s = model.decoder_step(h, m, prev, in);
        const auto& lp = tape.value(s.log_probs).data;
        std::size_t arg = 0;
        for (std::size_t v = 1; v < cfg.vocab; ++v)
            if (lp[v] > lp[arg]) arg = v;
        if (arg == Vocabulary::kEos) break;
        greedy.push_back(arg);
        h = s.h;
        m = s.m;
        prev = arg;
    }
    bool found = false;
    for (const auto& hyp : hyps)
        if (hyp.tokens == greedy) found = true;
    REQUIRE(found);
}

TEST_CASE("sampling is deterministic per seed") {
    auto cfg = tiny_config();
    auto p = init_params<double>(cfg, 14);
    auto fb = random_bundle(cfg, 14);
    auto a = sample_question(cfg, p, fb, {4}, AnswerType::other, 1.0, 123, 6);
    auto b = sample_question(cfg, p, fb, {4}, AnswerType::other, 1.0, 123, 6);
    REQUIRE(a == b);
    bool any_diff = false;
    for (std::uint64_t s = 0; s < 10; ++s)
        if (sample_question(cfg, p, fb, {4}, AnswerType::other, 1.0, s, 6) != a) any_diff = true;
    REQUIRE(any_diff);
    REQUIRE_THROWS_AS(sample_question(cfg, p, fb, {4}, AnswerType::other, 0.0, 1, 6), UsageError);
}

TEST_CASE("nearest-neighbour baseline prefers matching features and answers") {
    auto mk = [](const std::string& id, double fill, Tokens ans, Tokens q) {
        QATriple t;
        t.image_id = id;
        t.features.g = 1;
        t.features.d = 2;
        t.features.grid = {fill, 1.0 - fill};
        t.features.global = {1.0};
        t.answer = std::move(ans);
        t.question = std::move(q);
        return t;
    };
    std::vector<QATriple> train{
        mk("img_a", 0.9, {"red"}, {"what", "color", "is", "the", "ball", "?"}),
        mk("img_b", 0.1, {"2"}, {"how", "many", "objects", "are", "there", "?"}),
    };
    auto query = mk("q", 0.9, {"red"}, {});
    REQUIRE(nn_predict(query.features, query.answer, train) == train[0].question);
    auto query2 = mk("q", 0.1, {"2"}, {});
    REQUIRE(nn_predict(query2.features, query2.answer, train) == train[1].question);
    // exact tie: both train rows identical except id; smallest id wins
    std::vector<QATriple> tied{
        mk("img_z", 0.5, {"red"}, {"z", "?"}),
        mk("img_a", 0.5, {"red"}, {"a", "?"}),
    };
    auto q3 = mk("q", 0.5, {"red"}, {});
    REQUIRE(nn_predict(q3.features, q3.answer, tied) == tied[1].question);
    REQUIRE_THROWS_AS(nn_predict(q3.features, q3.answer, {}), DataError);
}

TEST_CASE("model card round-trip preserves config and vocabulary") {
    auto cfg = tiny_config(Variant::sat_style);
    cfg.length_normalize = true;
    Vocabulary vocab = Vocabulary::build({{"what", "color", "?"}, {"red"}});
    std::string path = "model_card_test.json";
    save_model_card(path, cfg, vocab);
    auto [cfg2, vocab2] = load_model_card(path);
    REQUIRE(cfg2.variant == Variant::sat_style);
    REQUIRE(cfg2.hidden == cfg.hidden);
    REQUIRE(cfg2.length_normalize);
    REQUIRE(vocab2.tokens() == vocab.tokens());
    REQUIRE(vocab2.hash() == vocab.hash());
    std::remove(path.c_str());
}

TEST_CASE("model guards invalid inputs") {
    auto cfg = tiny_config();
    auto p = init_params<double>(cfg, 1);
    auto fb = random_bundle(cfg, 1);
    Tape<double> tape;
    ModelOnTape<double> model(tape, cfg, p);
    REQUIRE_THROWS_AS(model.encode_answer({}), DataError);
    auto in = model.bind(fb, {4}, AnswerType::other);
    REQUIRE_THROWS_AS(model.decoder_step(model.initial_glimpse(in),
                                         tape.leaf(Tensor<double>::zeros({cfg.hidden})), 99, in),
                      DataError);
    REQUIRE_THROWS_AS(model.sequence_log_prob({}, in), DataError);
    TokenIds too_long(cfg.max_len + 1, 4);
    REQUIRE_THROWS_AS(model.sequence_log_prob(too_long, in), DataError);
    FeatureBundle wrong = fb;
    wrong.g = 3;
    REQUIRE_THROWS_AS(model.bind(wrong, {4}, AnswerType::other), DataError);
    REQUIRE_THROWS_AS(beam_search(cfg, p, fb, {4}, AnswerType::other, 0, 3), UsageError);
}
