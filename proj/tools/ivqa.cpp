// ivqa: data generation, training, generation, ranking and evaluation
// for answer-conditioned visual question generation on a synthetic
// grid micro-world.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ivqa/dataset.hpp"
#include "ivqa/gradcheck.hpp"
#include "ivqa/manifest.hpp"
#include "ivqa/metrics.hpp"
#include "ivqa/microworld.hpp"
#include "ivqa/model.hpp"
#include "ivqa/pool.hpp"
#include "ivqa/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string pair_id_of(const std::string& image_id, const ivqa::Tokens& answer) {
    return image_id + "|" + ivqa::join_tokens(answer);
}

ivqa::Vocabulary vocab_from(const std::vector<ivqa::QATriple>& data) {
    std::vector<ivqa::Tokens> corpus;
    for (const auto& t : data) {
        corpus.push_back(t.question);
        corpus.push_back(t.answer);
    }
    return ivqa::Vocabulary::build(corpus);
}

struct LoadedModel {
    ivqa::ModelConfig cfg;
    ivqa::Vocabulary vocab;
    ivqa::ParamRegistry<float> params;
};

LoadedModel load_model(const std::string& ckpt, std::string card) {
    if (card.empty()) card = (fs::path(ckpt).parent_path() / "model_card.json").string();
    LoadedModel m;
    std::tie(m.cfg, m.vocab) = ivqa::load_model_card(card);
    m.params = ivqa::ParamRegistry<float>::load(ckpt);
    return m;
}

// Ground-truth correctness predicate backed by the scene oracle.
std::function<bool(const std::string&, const ivqa::Tokens&, const ivqa::Tokens&)>
oracle_from_scenes(const std::map<std::string, ivqa::microworld::Scene>& scenes) {
    return [&scenes](const std::string& image_id, const ivqa::Tokens& q,
                     const ivqa::Tokens& a) {
        auto it = scenes.find(image_id);
        if (it == scenes.end()) throw ivqa::DataError("no scene for image: " + image_id);
        auto r = ivqa::microworld::oracle_answer(it->second, q);
        return r.status == ivqa::microworld::OracleStatus::answered && r.answer == a;
    };
}

struct PoolSet {
    std::vector<ivqa::EvalPair> pairs;
    std::vector<ivqa::QuestionPool> pools;  // aligned with pairs
    std::size_t n_invalid = 0;
};

PoolSet build_pools(const std::vector<ivqa::QATriple>& test,
                    const std::vector<ivqa::QATriple>& corpus,
                    const std::vector<ivqa::QATriple>& train,
                    const std::map<std::string, ivqa::microworld::Scene>& scenes,
                    std::uint64_t seed, std::size_t limit) {
    ivqa::PoolResources res;
    res.eval_split = &test;
    res.corpus = &corpus;
    res.train_split = &train;
    res.oracle_correct = oracle_from_scenes(scenes);
    res.profile = ivqa::microworld::typing_profile();
    res.content_words = ivqa::microworld::size_lexicon();
    res.seed = seed;
    PoolSet out;
    for (const auto& pair : ivqa::unique_pairs(test)) {
        if (limit && out.pairs.size() >= limit) break;
        auto pool = ivqa::build_question_pool(pair, res);
        if (!pool) continue;
        if (!ivqa::pool_composition_valid(*pool)) ++out.n_invalid;
        out.pairs.push_back(pair);
        out.pools.push_back(std::move(*pool));
    }
    return out;
}

ivqa::RankReport rank_with_scorer(
    const PoolSet& ps,
    const std::function<double(const ivqa::EvalPair&, const ivqa::Tokens&)>& scorer) {
    std::vector<ivqa::PoolResult> results;
    for (std::size_t i = 0; i < ps.pools.size(); ++i) {
        const auto& pair = ps.pairs[i];
        results.push_back(ivqa::rank_pool(
            ps.pools[i], [&](const ivqa::Tokens& q) { return scorer(pair, q); }));
    }
    return ivqa::rank_report(results);
}

std::function<double(const ivqa::EvalPair&, const ivqa::Tokens&)> model_scorer(
    const LoadedModel& m) {
    return [&m](const ivqa::EvalPair& pair, const ivqa::Tokens& q) {
        return ivqa::score_question<float>(m.cfg, m.params, m.vocab.encode(q),
                                           *pair.features, m.vocab.encode(pair.answer),
                                           pair.answer_type);
    };
}

void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw ivqa::DataError("cannot write: " + path);
    f << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ivqa::DataError("cannot open: " + path);
    return json::parse(f);
}

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ivqa::DataError("cannot open: " + path);
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ivqa::DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

int cmd_gen_data(std::uint64_t seed, std::size_t scenes, double sigma, std::size_t grid,
                 double train_frac, double val_frac, double test_frac, const std::string& out) {
    fs::create_directories(out);
    ivqa::RunManifest man("gen-data");
    man.flag("seed", seed);
    man.flag("scenes", scenes);
    man.flag("sigma", sigma);
    man.flag("grid", grid);
    man.flag("train-frac", train_frac);
    man.flag("val-frac", val_frac);
    man.flag("test-frac", test_frac);
    man.flag("out", out);
    auto ds = ivqa::microworld::generate_dataset(scenes, train_frac, val_frac, test_frac, seed,
                                                 sigma, grid);
    ivqa::save_dataset(ds.train, out + "/train.jsonl");
    ivqa::save_dataset(ds.val, out + "/val.jsonl");
    ivqa::save_dataset(ds.test, out + "/test.jsonl");
    ivqa::microworld::save_scenes(ds.scenes, out + "/scenes.jsonl");
    for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "scenes.jsonl"})
        man.artifact(out + "/" + f);
    man.write(out + "/manifest.json");
    std::printf("wrote %zu train / %zu val / %zu test records (%zu scenes) to %s\n",
                ds.train.size(), ds.val.size(), ds.test.size(), ds.scenes.size(), out.c_str());
    return 0;
}

int cmd_train(const std::string& data, const std::string& out, const ivqa::TrainConfig& tcfg,
              std::size_t hidden, std::size_t embed, std::size_t mlb, const std::string& variant,
              std::size_t max_len, bool quiet) {
    fs::create_directories(out);
    ivqa::RunManifest man("train");
    man.flag("data", data);
    man.flag("out", out);
    man.flag("seed", tcfg.seed);
    man.flag("epochs", tcfg.epochs);
    man.flag("batch-size", tcfg.batch_size);
    man.flag("lr0", tcfg.lr0);
    man.flag("decay", tcfg.decay);
    man.flag("clip", tcfg.grad_clip);
    man.flag("hidden", hidden);
    man.flag("embed", embed);
    man.flag("mlb", mlb);
    man.flag("variant", variant);
    man.flag("max-len", max_len);
    man.input(data);
    auto triples = ivqa::load_dataset(data, max_len);
    if (triples.empty()) throw ivqa::DataError("training set is empty: " + data);
    auto vocab = vocab_from(triples);
    ivqa::ModelConfig mcfg;
    mcfg.hidden = hidden;
    mcfg.embed = embed;
    mcfg.mlb = mlb ? mlb : hidden;
    mcfg.vocab = vocab.size();
    mcfg.grid = triples[0].features.g;
    mcfg.depth = triples[0].features.d;
    mcfg.global_dim = triples[0].features.global.size();
    mcfg.max_len = max_len;
    mcfg.variant = ivqa::variant_from_name(variant);
    auto result = ivqa::train<float>(triples, vocab, mcfg, tcfg, out, !quiet);
    result.params.save(out + "/ckpt_final.bin");
    ivqa::save_loss_curve(result.curve, out + "/loss_curve.csv");
    man.artifact(out + "/model_card.json");
    for (std::size_t e = 0; e < tcfg.epochs; ++e)
        man.artifact(out + "/ckpt_epoch" + std::to_string(e) + ".bin");
    man.artifact(out + "/ckpt_final.bin");
    man.artifact(out + "/loss_curve.csv");
    man.write(out + "/manifest.json");
    double final_loss = result.curve.empty() ? 0.0 : result.curve.back().loss;
    std::printf("trained %s variant for %zu epochs, final batch loss %.4f\n", variant.c_str(),
                tcfg.epochs, final_loss);
    return 0;
}

int cmd_generate(const std::string& ckpt, const std::string& card, const std::string& data,
                 std::size_t beam, std::size_t max_len, const std::string& model_id,
                 const std::string& out) {
    ivqa::RunManifest man("generate");
    man.flag("ckpt", ckpt);
    man.flag("data", data);
    man.flag("beam", beam);
    man.flag("max-len", max_len);
    man.flag("out", out);
    man.input(ckpt);
    man.input(data);
    LoadedModel m = load_model(ckpt, card);
    std::size_t len = max_len ? max_len : m.cfg.max_len;
    auto triples = ivqa::load_dataset(data, m.cfg.max_len);
    std::string mid = model_id.empty() ? ivqa::variant_name(m.cfg.variant) : model_id;
    std::ofstream f(out);
    if (!f) throw ivqa::DataError("cannot write: " + out);
    std::size_t n = 0;
    for (const auto& pair : ivqa::unique_pairs(triples)) {
        auto hyps = ivqa::beam_search<float>(m.cfg, m.params, *pair.features,
                                             m.vocab.encode(pair.answer), pair.answer_type,
                                             beam, len);
        json beams = json::array();
        for (std::size_t i = 0; i < hyps.size() && i < beam; ++i)
            beams.push_back({{"question", ivqa::join_tokens(m.vocab.decode(hyps[i].tokens))},
                             {"log_prob", hyps[i].log_prob},
                             {"finished", hyps[i].finished}});
        json rec = {{"pair_id", pair_id_of(pair.image_id, pair.answer)},
                    {"image_id", pair.image_id},
                    {"answer", ivqa::join_tokens(pair.answer)},
                    {"model_id", mid},
                    {"question", beams.empty() ? "" : beams[0]["question"]},
                    {"beam", beams}};
        f << rec.dump() << "\n";
        ++n;
    }
    f.close();
    man.artifact(out);
    man.write(out + ".manifest.json");
    std::printf("generated questions for %zu pairs -> %s\n", n, out.c_str());
    return 0;
}

int cmd_rank(const std::string& ckpt, const std::string& card, const std::string& test_path,
             const std::string& train_path, const std::string& scenes_path, std::uint64_t seed,
             bool length_normalize, std::size_t limit, const std::string& pools_out,
             const std::string& out) {
    ivqa::RunManifest man("rank");
    man.flag("ckpt", ckpt);
    man.flag("test", test_path);
    man.flag("train", train_path);
    man.flag("scenes", scenes_path);
    man.flag("seed", seed);
    man.flag("length-normalize", length_normalize);
    man.flag("limit", limit);
    man.flag("out", out);
    for (const auto& p : {ckpt, test_path, train_path, scenes_path}) man.input(p);
    LoadedModel m = load_model(ckpt, card);
    m.cfg.length_normalize = length_normalize;
    auto test = ivqa::load_dataset(test_path, m.cfg.max_len);
    auto train = ivqa::load_dataset(train_path, m.cfg.max_len);
    auto scenes = ivqa::microworld::load_scenes(scenes_path);
    std::vector<ivqa::QATriple> corpus = test;
    corpus.insert(corpus.end(), train.begin(), train.end());
    PoolSet ps = build_pools(test, corpus, train, scenes, seed, limit);
    if (!pools_out.empty()) {
        std::ofstream pf(pools_out);
        if (!pf) throw ivqa::DataError("cannot write: " + pools_out);
        for (const auto& pool : ps.pools) pf << ivqa::pool_to_json(pool).dump() << "\n";
        man.artifact(pools_out);
    }
    auto rep = rank_with_scorer(ps, model_scorer(m));
    json j = rep.to_json();
    j["model"] = ivqa::variant_name(m.cfg.variant);
    j["invalid_pools"] = ps.n_invalid;
    write_json(out, j);
    man.artifact(out);
    man.write(out + ".manifest.json");
    std::printf("acc@1 %.3f  acc@3 %.3f  over %zu pairs (%zu with degraded pools)\n", rep.acc1,
                rep.acc3, rep.n_pairs, ps.n_invalid);
    return 0;
}

int cmd_metrics(const std::string& gen_path, const std::string& refs_path,
                const std::string& out) {
    ivqa::RunManifest man("metrics");
    man.flag("gen", gen_path);
    man.flag("refs", refs_path);
    man.flag("out", out);
    man.input(gen_path);
    man.input(refs_path);
    auto refs_data = ivqa::load_dataset(refs_path);
    std::map<std::string, std::vector<ivqa::Tokens>> refs_by_pair;
    std::map<std::string, std::string> image_of_pair;
    for (const auto& t : refs_data) {
        std::string pid = pair_id_of(t.image_id, t.answer);
        refs_by_pair[pid].push_back(t.question);
        image_of_pair[pid] = t.image_id;
    }
    std::vector<ivqa::Tokens> cands;
    std::vector<std::vector<ivqa::Tokens>> refs;
    for (const auto& rec : read_jsonl(gen_path)) {
        std::string pid = rec.at("pair_id").get<std::string>();
        auto it = refs_by_pair.find(pid);
        if (it == refs_by_pair.end())
            throw ivqa::DataError("no references for pair: " + pid);
        cands.push_back(ivqa::tokenize(rec.at("question").get<std::string>()));
        refs.push_back(it->second);
    }
    if (cands.empty()) throw ivqa::DataError("no generated records in " + gen_path);
    json j;
    for (std::size_t n = 1; n <= 4; ++n)
        j["bleu" + std::to_string(n)] = ivqa::bleu_n(cands, refs, n);
    j["rouge_l"] = ivqa::rouge_l_corpus(cands, refs);
    j["cider"] = ivqa::cider(cands, refs);
    j["n_pairs"] = cands.size();
    write_json(out, j);
    man.artifact(out);
    man.write(out + ".manifest.json");
    std::printf("BLEU-4 %.4f  ROUGE-L %.4f  CIDEr %.4f over %zu pairs\n",
                j["bleu4"].get<double>(), j["rouge_l"].get<double>(), j["cider"].get<double>(),
                cands.size());
    return 0;
}

int cmd_breakdown(const std::vector<std::string>& reports, const std::string& out) {
    json combined = json::object();
    std::printf("%-20s %6s %6s  %6s %6s %6s %6s %6s\n", "report", "acc@1", "acc@3", "GT", "CT",
                "PS", "PP", "RN");
    for (const auto& path : reports) {
        json r = read_json(path);
        std::string name = fs::path(path).stem().string();
        const auto& b = r.at("breakdown");
        double sum = 0;
        for (const char* l : {"GT", "CT", "PS", "PP", "RN"}) sum += b.at(l).get<double>();
        if (std::abs(sum - 1.0) > 1e-9)
            throw ivqa::DataError("breakdown fractions in " + path + " do not sum to 1");
        std::printf("%-20s %6.2f %6.2f  %6.3f %6.3f %6.3f %6.3f %6.3f\n", name.c_str(),
                    r.at("acc1").get<double>(), r.at("acc3").get<double>(),
                    b.at("GT").get<double>(), b.at("CT").get<double>(), b.at("PS").get<double>(),
                    b.at("PP").get<double>(), b.at("RN").get<double>());
        combined[name] = r;
    }
    if (!out.empty()) {
        ivqa::RunManifest man("breakdown");
        man.flag("out", out);
        for (const auto& p : reports) man.input(p);
        write_json(out, combined);
        man.artifact(out);
        man.write(out + ".manifest.json");
    }
    return 0;
}

int cmd_bias_audit(const std::vector<std::string>& models, const std::string& test_path,
                   const std::string& train_path, const std::string& scenes_path,
                   std::uint64_t seed, std::size_t limit, const std::string& out) {
    ivqa::RunManifest man("bias-audit");
    man.flag("test", test_path);
    man.flag("train", train_path);
    man.flag("scenes", scenes_path);
    man.flag("seed", seed);
    man.flag("limit", limit);
    man.flag("out", out);
    for (const auto& p : {test_path, train_path, scenes_path}) man.input(p);
    auto test = ivqa::load_dataset(test_path);
    auto train = ivqa::load_dataset(train_path);
    auto scenes = ivqa::microworld::load_scenes(scenes_path);
    std::vector<ivqa::QATriple> corpus = test;
    corpus.insert(corpus.end(), train.begin(), train.end());
    PoolSet ps = build_pools(test, corpus, train, scenes, seed, limit);

    json j;
    // Question-frequency prior over the training split; the blind lower bar.
    std::map<ivqa::Tokens, std::size_t> freq;
    for (const auto& t : train) ++freq[t.question];
    auto prior = rank_with_scorer(ps, [&](const ivqa::EvalPair&, const ivqa::Tokens& q) {
        auto it = freq.find(q);
        return it == freq.end() ? 0.0 : static_cast<double>(it->second);
    });
    j["prior"] = prior.to_json();
    std::printf("%-12s acc@1 %6.2f\n", "prior", prior.acc1);
    std::vector<LoadedModel> loaded;
    loaded.reserve(models.size());
    for (const auto& spec : models) {
        auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw ivqa::UsageError("--model expects NAME=CKPT_PATH, got: " + spec);
        std::string name = spec.substr(0, eq), ckpt = spec.substr(eq + 1);
        man.input(ckpt);
        loaded.push_back(load_model(ckpt, ""));
        auto rep = rank_with_scorer(ps, model_scorer(loaded.back()));
        j[name] = rep.to_json();
        std::printf("%-12s acc@1 %6.2f\n", name.c_str(), rep.acc1);
    }
    write_json(out, j);
    man.artifact(out);
    man.write(out + ".manifest.json");
    return 0;
}

int cmd_gradcheck(std::size_t hidden, std::size_t grid, std::size_t depth, std::size_t vocab,
                  std::size_t mlb, std::size_t embed, const std::string& variant,
                  std::uint64_t seed, std::size_t samples, double tol) {
    ivqa::ModelConfig cfg;
    cfg.hidden = hidden;
    cfg.embed = embed;
    cfg.mlb = mlb;
    cfg.vocab = vocab;
    cfg.grid = grid;
    cfg.depth = depth;
    cfg.global_dim = depth;
    cfg.variant = ivqa::variant_from_name(variant);
    auto rep = ivqa::gradient_check(cfg, seed, samples);
    std::printf("checked %zu parameter elements, max relative error %.3e (worst: %s)\n",
                rep.n_checked, rep.max_rel_error, rep.worst_param.c_str());
    if (rep.max_rel_error >= tol)
        throw ivqa::NumericError("gradient check failed: " + std::to_string(rep.max_rel_error) +
                                 " >= tolerance " + std::to_string(tol));
    return 0;
}

int cmd_rate(const std::string& gen_path, const std::string& scenes_path,
             const std::string& rater, const std::string& out) {
    auto scenes = ivqa::microworld::load_scenes(scenes_path);
    auto records = read_jsonl(gen_path);
    std::printf("rating %zu generated questions; enter 0-4, or q to stop\n\n", records.size());
    std::size_t rated = 0;
    for (const auto& rec : records) {
        std::string image_id = rec.at("image_id").get<std::string>();
        auto it = scenes.find(image_id);
        if (it == scenes.end()) throw ivqa::DataError("no scene for image: " + image_id);
        std::printf("--- %s ---\n%s", image_id.c_str(),
                    ivqa::microworld::scene_ascii(it->second).c_str());
        std::printf("answer:   %s\nquestion: %s\nrating [0-4, q]: ",
                    rec.at("answer").get<std::string>().c_str(),
                    rec.at("question").get<std::string>().c_str());
        std::string line;
        if (!std::getline(std::cin, line) || line == "q") break;
        if (line.size() != 1 || line[0] < '0' || line[0] > '4')
            throw ivqa::UsageError("rating must be a digit 0-4");
        ivqa::RatingRecord r;
        r.pair_id = rec.at("pair_id").get<std::string>();
        r.model_id = rec.value("model_id", "unknown");
        r.rater = rater;
        r.rating = line[0] - '0';
        ivqa::append_rating(out, r);
        ++rated;
        std::printf("\n");
    }
    std::printf("recorded %zu ratings in %s\n", rated, out.c_str());
    if (rated) {
        auto means = ivqa::aggregate_ratings(out);
        for (const auto& [model, mean] : means)
            std::printf("mean rating %-12s %.3f\n", model.c_str(), mean);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"answer-conditioned visual question generation toolkit"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic micro-world dataset");
    std::uint64_t gd_seed = 0;
    std::size_t gd_scenes = 200, gd_grid = 4;
    double gd_sigma = 0.1, gd_tr = 0.8, gd_va = 0.1, gd_te = 0.1;
    std::string gd_out;
    gen->add_option("--seed", gd_seed, "rng seed");
    gen->add_option("--scenes", gd_scenes, "number of scenes");
    gen->add_option("--sigma", gd_sigma, "feature noise stddev");
    gen->add_option("--grid", gd_grid, "grid side length");
    gen->add_option("--train-frac", gd_tr, "train split fraction");
    gen->add_option("--val-frac", gd_va, "val split fraction");
    gen->add_option("--test-frac", gd_te, "test split fraction");
    gen->add_option("--out", gd_out, "output directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "train a question generator");
    std::string tr_data, tr_out, tr_variant = "full";
    ivqa::TrainConfig tcfg;
    std::size_t tr_hidden = 32, tr_embed = 16, tr_mlb = 0, tr_max_len = 20;
    bool tr_quiet = false;
    tr->add_option("--data", tr_data, "training JSONL")->required();
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->add_option("--seed", tcfg.seed, "rng seed");
    tr->add_option("--epochs", tcfg.epochs, "training epochs");
    tr->add_option("--batch-size", tcfg.batch_size, "minibatch size");
    tr->add_option("--lr0", tcfg.lr0, "initial learning rate");
    tr->add_option("--decay", tcfg.decay, "per-epoch lr decay factor");
    tr->add_option("--clip", tcfg.grad_clip, "gradient norm clip");
    tr->add_option("--hidden", tr_hidden, "lstm hidden size");
    tr->add_option("--embed", tr_embed, "word embedding size");
    tr->add_option("--mlb", tr_mlb, "bilinear latent size (0 = hidden)");
    tr->add_option("--variant", tr_variant, "full|noattn|a|i|iat|sat");
    tr->add_option("--max-len", tr_max_len, "max decoded length incl. bos/eos");
    tr->add_flag("--quiet", tr_quiet, "suppress per-epoch log");

    // generate
    auto* ge = app.add_subcommand("generate", "beam-search questions for image-answer pairs");
    std::string ge_ckpt, ge_card, ge_data, ge_out, ge_model_id;
    std::size_t ge_beam = 3, ge_max_len = 0;
    ge->add_option("--ckpt", ge_ckpt, "checkpoint path")->required();
    ge->add_option("--card", ge_card, "model card (default: sibling model_card.json)");
    ge->add_option("--data", ge_data, "JSONL supplying the image-answer pairs")->required();
    ge->add_option("--beam", ge_beam, "beam width");
    ge->add_option("--max-len", ge_max_len, "max decode length (0 = model default)");
    ge->add_option("--model-id", ge_model_id, "model id stored in records");
    ge->add_option("--out", ge_out, "output JSONL")->required();

    // rank
    auto* rk = app.add_subcommand("rank", "rank 24-candidate question pools");
    std::string rk_ckpt, rk_card, rk_test, rk_train, rk_scenes, rk_out, rk_pools;
    std::uint64_t rk_seed = 0;
    std::size_t rk_limit = 0;
    bool rk_norm = false;
    rk->add_option("--ckpt", rk_ckpt, "checkpoint path")->required();
    rk->add_option("--card", rk_card, "model card (default: sibling model_card.json)");
    rk->add_option("--test", rk_test, "evaluation split JSONL")->required();
    rk->add_option("--train", rk_train, "training split JSONL")->required();
    rk->add_option("--scenes", rk_scenes, "scenes JSONL")->required();
    rk->add_option("--seed", rk_seed, "pool construction seed");
    rk->add_flag("--length-normalize", rk_norm, "normalize scores by sequence length");
    rk->add_option("--limit", rk_limit, "max pairs to rank (0 = all)");
    rk->add_option("--pools", rk_pools, "also dump the pools as JSONL");
    rk->add_option("--out", rk_out, "report JSON")->required();

    // metrics
    auto* me = app.add_subcommand("metrics", "corpus BLEU / ROUGE-L / CIDEr");
    std::string me_gen, me_refs, me_out;
    me->add_option("--gen", me_gen, "generated questions JSONL")->required();
    me->add_option("--refs", me_refs, "reference dataset JSONL")->required();
    me->add_option("--out", me_out, "metrics JSON")->required();

    // breakdown
    auto* bd = app.add_subcommand("breakdown", "tabulate rank-1 label breakdowns");
    std::vector<std::string> bd_reports;
    std::string bd_out;
    bd->add_option("--report", bd_reports, "rank report JSON (repeatable)")->required();
    bd->add_option("--out", bd_out, "combined JSON output");

    // bias-audit
    auto* ba = app.add_subcommand("bias-audit", "compare a frequency prior with trained scorers");
    std::vector<std::string> ba_models;
    std::string ba_test, ba_train, ba_scenes, ba_out;
    std::uint64_t ba_seed = 0;
    std::size_t ba_limit = 0;
    ba->add_option("--model", ba_models, "NAME=CKPT_PATH (repeatable)");
    ba->add_option("--test", ba_test, "evaluation split JSONL")->required();
    ba->add_option("--train", ba_train, "training split JSONL")->required();
    ba->add_option("--scenes", ba_scenes, "scenes JSONL")->required();
    ba->add_option("--seed", ba_seed, "pool construction seed");
    ba->add_option("--limit", ba_limit, "max pairs to rank (0 = all)");
    ba->add_option("--out", ba_out, "audit JSON")->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient validation");
    std::size_t gc_hidden = 16, gc_grid = 2, gc_depth = 8, gc_vocab = 20, gc_mlb = 8,
                gc_embed = 8, gc_samples = 2;
    std::string gc_variant = "full";
    std::uint64_t gc_seed = 0;
    double gc_tol = 1e-4;
    gc->add_option("--hidden", gc_hidden, "lstm hidden size");
    gc->add_option("--grid", gc_grid, "grid side length");
    gc->add_option("--depth", gc_depth, "per-cell feature depth");
    gc->add_option("--vocab", gc_vocab, "vocabulary size");
    gc->add_option("--mlb", gc_mlb, "bilinear latent size");
    gc->add_option("--embed", gc_embed, "word embedding size");
    gc->add_option("--variant", gc_variant, "full|noattn|a|i|iat|sat");
    gc->add_option("--seed", gc_seed, "rng seed");
    gc->add_option("--samples", gc_samples, "synthetic batch size");
    gc->add_option("--tol", gc_tol, "max allowed relative error");

    // rate
    auto* ra = app.add_subcommand("rate", "interactively rate generated questions 0-4");
    std::string ra_gen, ra_scenes, ra_rater = "anon", ra_out;
    ra->add_option("--gen", ra_gen, "generated questions JSONL")->required();
    ra->add_option("--scenes", ra_scenes, "scenes JSONL")->required();
    ra->add_option("--rater", ra_rater, "rater id");
    ra->add_option("--out", ra_out, "ratings JSONL (appended)")->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed())
            return cmd_gen_data(gd_seed, gd_scenes, gd_sigma, gd_grid, gd_tr, gd_va, gd_te,
                                gd_out);
        if (tr->parsed())
            return cmd_train(tr_data, tr_out, tcfg, tr_hidden, tr_embed, tr_mlb, tr_variant,
                             tr_max_len, tr_quiet);
        if (ge->parsed())
            return cmd_generate(ge_ckpt, ge_card, ge_data, ge_beam, ge_max_len, ge_model_id,
                                ge_out);
        if (rk->parsed())
            return cmd_rank(rk_ckpt, rk_card, rk_test, rk_train, rk_scenes, rk_seed, rk_norm,
                            rk_limit, rk_pools, rk_out);
        if (me->parsed()) return cmd_metrics(me_gen, me_refs, me_out);
        if (bd->parsed()) return cmd_breakdown(bd_reports, bd_out);
        if (ba->parsed())
            return cmd_bias_audit(ba_models, ba_test, ba_train, ba_scenes, ba_seed, ba_limit,
                                  ba_out);
        if (gc->parsed())
            return cmd_gradcheck(gc_hidden, gc_grid, gc_depth, gc_vocab, gc_mlb, gc_embed,
                                 gc_variant, gc_seed, gc_samples, gc_tol);
        if (ra->parsed()) return cmd_rate(ra_gen, ra_scenes, ra_rater, ra_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ivqa::UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ivqa::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const ivqa::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
