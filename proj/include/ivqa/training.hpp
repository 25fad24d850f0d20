#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ivqa/adam.hpp"
#include "ivqa/dataset.hpp"
#include "ivqa/model.hpp"
#include "ivqa/params.hpp"
#include "ivqa/tape.hpp"
#include "ivqa/text.hpp"

namespace ivqa {

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 30;
    double lr0 = 5e-4;
    double decay = 0.83;  // multiplicative, applied discretely per epoch
    double grad_clip = 5.0;
    std::uint64_t seed = 0;
};

inline double lr_at(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.lr0 <= 0 && cfg.lr0 != 0) throw UsageError("lr0 must be positive");
    return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(epoch));
}

// Dataset record encoded against a vocabulary.
struct EncodedTriple {
    const FeatureBundle* features = nullptr;
    TokenIds question;
    TokenIds answer;
    AnswerType type = AnswerType::other;
};

inline std::vector<EncodedTriple> encode_triples(const std::vector<QATriple>& triples,
                                                 const Vocabulary& vocab) {
    std::vector<EncodedTriple> out;
    out.reserve(triples.size());
    for (const auto& t : triples)
        out.push_back({&t.features, vocab.encode(t.question), vocab.encode(t.answer), t.answer_type});
    return out;
}

// Mean over non-pad target positions of -log p(target). Sequences are
// processed per sample, so pad positions never contribute to loss or
// gradient. Gradients are left on the tape; use ModelOnTape::collect_grads.
template <typename T>
typename Tape<T>::Ref batch_loss(ModelOnTape<T>& model,
                                 const std::vector<const EncodedTriple*>& batch) {
    if (batch.empty()) throw DataError("batch_loss: empty batch");
    auto& tape = model.tape();
    std::vector<typename Tape<T>::Ref> terms;
    std::size_t total_tokens = 0;
    for (const EncodedTriple* t : batch) {
        auto in = model.bind(*t->features, t->answer, t->type);
        terms.push_back(model.sequence_log_prob(t->question, in));
        total_tokens += t->question.size() + 1;  // + terminal eos
    }
    if (total_tokens == 0) throw DataError("batch_loss: no target tokens");
    return tape.scale(tape.sum_scalars(terms), -T(1) / static_cast<T>(total_tokens));
}

// Scale gradients so the global norm is at most `clip`.
template <typename T>
double clip_gradients(std::map<std::string, Tensor<T>>& grads, double clip) {
    double sq = 0;
    for (const auto& [name, g] : grads)
        for (T v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
    double norm = std::sqrt(sq);
    if (norm > clip && norm > 0) {
        double s = clip / norm;
        for (auto& [name, g] : grads)
            for (auto& v : g.data) v = static_cast<T>(static_cast<double>(v) * s);
    }
    return norm;
}

struct LossCurveRow {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double lr = 0;
    double loss = 0;
};

inline void save_loss_curve(const std::vector<LossCurveRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write loss curve: " + path);
    f << "epoch,step,lr,loss\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.10g,%.10g\n", r.epoch, r.step, r.lr, r.loss);
        f << buf;
    }
}

inline std::vector<std::size_t> epoch_order(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // Fisher-Yates with explicit draws, so trajectories are reproducible.
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = rng() % i;
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

template <typename T>
struct TrainResult {
    ParamRegistry<T> params;
    std::vector<LossCurveRow> curve;
};

// Teacher-forced cross-entropy training with per-epoch learning rate
// decay, gradient clipping and per-epoch checkpoints. `out_dir` empty
// disables checkpoint writing.
template <typename T>
TrainResult<T> train(const std::vector<QATriple>& dataset, const Vocabulary& vocab,
                     const ModelConfig& mcfg, const TrainConfig& tcfg,
                     const std::string& out_dir = "", bool verbose = false) {
    if (dataset.empty()) throw DataError("train: empty dataset");
    auto encoded = encode_triples(dataset, vocab);
    TrainResult<T> result;
    result.params = init_params<T>(mcfg, tcfg.seed);
    AdamState<T> adam;
    std::mt19937_64 rng(tcfg.seed);
    if (!out_dir.empty()) save_model_card(out_dir + "/model_card.json", mcfg, vocab);
    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        double lr = lr_at(tcfg, epoch);
        auto order = epoch_order(encoded.size(), rng);
        std::size_t step = 0;
        for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size, ++step) {
            std::vector<const EncodedTriple*> batch;
            for (std::size_t i = start; i < order.size() && i < start + tcfg.batch_size; ++i)
                batch.push_back(&encoded[order[i]]);
            Tape<T> tape;
            ModelOnTape<T> model(tape, mcfg, result.params);
            auto loss = batch_loss(model, batch);
            double loss_val = static_cast<double>(tape.value(loss).data[0]);
            if (!std::isfinite(loss_val))
                throw NumericError("NaN/Inf loss at epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(step));
            tape.backward(loss);
            auto grads = model.collect_grads();
            clip_gradients(grads, tcfg.grad_clip);
            adam_step(result.params, grads, adam, lr);
            result.curve.push_back({epoch, step, lr, loss_val});
        }
        if (!out_dir.empty())
            result.params.save(out_dir + "/ckpt_epoch" + std::to_string(epoch) + ".bin");
        if (verbose) {
            double mean = 0;
            std::size_t n = 0;
            for (auto it = result.curve.rbegin(); it != result.curve.rend() && it->epoch == epoch;
                 ++it, ++n)
                mean += it->loss;
            std::fprintf(stderr, "epoch %zu lr %.3g mean loss %.4f\n", epoch, lr,
                         n ? mean / static_cast<double>(n) : 0.0);
        }
    }
    return result;
}

}  // namespace ivqa
