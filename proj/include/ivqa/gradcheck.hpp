#pragma once

#include <random>
#include <string>
#include <vector>

#include "ivqa/model.hpp"
#include "ivqa/training.hpp"

namespace ivqa {

struct GradCheckReport {
    double max_rel_error = 0;
    std::string worst_param;
    std::size_t n_checked = 0;
};

// Central finite-difference validation of the analytic gradients, over
// every element of every named parameter. Runs in 64-bit regardless of
// the training dtype. The relative-error denominator is floored so that
// vanishing gradients are compared absolutely.
inline GradCheckReport gradient_check(const ModelConfig& cfg, std::uint64_t seed,
                                      std::size_t n_samples = 2, double h = 1e-5,
                                      double denom_floor = 1e-3) {
    using T = double;
    ParamRegistry<T> params = init_params<T>(cfg, seed);
    std::mt19937_64 rng(seed ^ 0xabcdef1234567890ull);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // synthetic inputs: random features, short random questions/answers
    std::vector<FeatureBundle> bundles(n_samples);
    std::vector<EncodedTriple> triples(n_samples);
    std::size_t cells = cfg.grid * cfg.grid;
    for (std::size_t i = 0; i < n_samples; ++i) {
        FeatureBundle& fb = bundles[i];
        fb.g = cfg.grid;
        fb.d = cfg.depth;
        fb.grid.resize(cells * cfg.depth);
        for (auto& v : fb.grid) v = unif(rng);
        fb.global.resize(cfg.global_dim);
        double sum = 0;
        for (auto& v : fb.global) {
            v = unif(rng);
            sum += v;
        }
        for (auto& v : fb.global) v /= sum;
        auto rand_tokens = [&](std::size_t len) {
            TokenIds out;
            for (std::size_t k = 0; k < len; ++k)
                out.push_back(4 + rng() % (cfg.vocab - 4));
            return out;
        };
        triples[i].features = &bundles[i];
        triples[i].question = rand_tokens(3 + rng() % 3);
        triples[i].answer = rand_tokens(1 + rng() % 2);
        triples[i].type = static_cast<AnswerType>(rng() % cfg.n_answer_types);
    }
    std::vector<const EncodedTriple*> batch;
    for (const auto& t : triples) batch.push_back(&t);

    auto loss_of = [&](const ParamRegistry<T>& p) {
        Tape<T> tape;
        ModelOnTape<T> model(tape, cfg, p);
        auto l = batch_loss(model, batch);
        return static_cast<double>(tape.value(l).data[0]);
    };

    std::map<std::string, Tensor<T>> analytic;
    {
        Tape<T> tape;
        ModelOnTape<T> model(tape, cfg, params);
        auto l = batch_loss(model, batch);
        tape.backward(l);
        analytic = model.collect_grads();
    }

    GradCheckReport rep;
    for (auto& e : params.entries()) {
        const Tensor<T>& ag = analytic.at(e.name);
        for (std::size_t i = 0; i < e.tensor.size(); ++i) {
            double orig = e.tensor.data[i];
            e.tensor.data[i] = orig + h;
            double up = loss_of(params);
            e.tensor.data[i] = orig - h;
            double down = loss_of(params);
            e.tensor.data[i] = orig;
            double fd = (up - down) / (2 * h);
            double a = ag.data[i];
            double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), denom_floor});
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_param = e.name + "[" + std::to_string(i) + "]";
            }
            ++rep.n_checked;
        }
    }
    return rep;
}

}  // namespace ivqa
