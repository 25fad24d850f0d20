#include <catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "ivqa/adam.hpp"
#include "ivqa/params.hpp"
#include "ivqa/tape.hpp"
#include "ivqa/tensor.hpp"

using namespace ivqa;

TEST_CASE("tensor construction and accessors") {
    auto t = Tensor<double>::zeros({2, 3});
    REQUIRE(t.size() == 6);
    REQUIRE(t.rows() == 2);
    REQUIRE(t.cols() == 3);
    t.at(1, 2) = 5.0;
    REQUIRE(t.data[5] == 5.0);
    REQUIRE_THROWS_AS(Tensor<double>({2, 2}, {1.0, 2.0, 3.0}), DataError);
}

TEST_CASE("glorot init respects bounds and is deterministic") {
    Shape shape{8, 4};  // fan_out 8, fan_in 4
    double b = std::sqrt(6.0 / 12.0);
    auto t1 = glorot_init<double>(shape, 123);
    auto t2 = glorot_init<double>(shape, 123);
    auto t3 = glorot_init<double>(shape, 124);
    REQUIRE(t1.data == t2.data);
    REQUIRE(t1.data != t3.data);
    for (double v : t1.data) {
        REQUIRE(v >= -b);
        REQUIRE(v <= b);
    }
    REQUIRE_THROWS_AS(glorot_init<double>({0, 3}, 1), DataError);
}

TEST_CASE("softmax on known values") {
    auto s = softmax(Tensor<double>::vec({1.0, 1.0, 1.0}));
    for (double v : s.data) REQUIRE(v == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    auto s2 = softmax(Tensor<double>::vec({1000.0, 1000.0}));  // stability
    REQUIRE(s2.data[0] == Catch::Approx(0.5));
    auto s3 = softmax(Tensor<double>::vec({0.0, std::log(3.0)}));
    REQUIRE(s3.data[0] == Catch::Approx(0.25).epsilon(1e-12));
    REQUIRE(s3.data[1] == Catch::Approx(0.75).epsilon(1e-12));
}

namespace {

// Central finite differences of a scalar-valued function of one leaf.
template <typename F>
std::vector<double> fd_grad(F f, std::vector<double> x, double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double orig = x[i];
        x[i] = orig + h;
        double up = f(x);
        x[i] = orig - h;
        double down = f(x);
        x[i] = orig;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("tape gradients match finite differences per op") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto rand_vec = [&](std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = unif(rng);
        return v;
    };

    SECTION("composite through matvec, tanh, mul, softmax, pick") {
        auto w = rand_vec(12);  // [3,4]
        auto x = rand_vec(4);
        Tape<double> t;
        auto wr = t.leaf(Tensor<double>({3, 4}, w));
        auto xr = t.leaf(Tensor<double>::vec(x));
        auto y = t.tanh_(t.matvec(wr, xr));
        auto z = t.mul(y, y);
        auto p = t.softmax_(z);
        auto root = t.pick(p, 1);
        t.backward(root);
        auto f = [&](const std::vector<double>& xv) {
            Tape<double> tt;
            auto w2 = tt.leaf(Tensor<double>({3, 4}, w));
            auto x2 = tt.leaf(Tensor<double>::vec(xv));
            auto y2 = tt.tanh_(tt.matvec(w2, x2));
            auto z2 = tt.mul(y2, y2);
            auto p2 = tt.softmax_(z2);
            return tt.value(tt.pick(p2, 1)).data[0];
        };
        auto fd = fd_grad(f, x);
        for (std::size_t i = 0; i < x.size(); ++i)
            REQUIRE(t.grad(xr).data[i] == Catch::Approx(fd[i]).margin(1e-7));
    }

    SECTION("rows_linear, rows_mul_vec, rows_dot, mix_rows, log_softmax") {
        auto X = rand_vec(6);   // [3,2]
        auto W = rand_vec(8);   // [4,2]
        auto v = rand_vec(4);
        auto p = rand_vec(4);
        auto f = [&](const std::vector<double>& xv) {
            Tape<double> t;
            auto xr = t.leaf(Tensor<double>({3, 2}, xv));
            auto wr = t.leaf(Tensor<double>({4, 2}, W));
            auto vr = t.leaf(Tensor<double>::vec(v));
            auto pr = t.leaf(Tensor<double>::vec(p));
            auto rows = t.rows_mul_vec(t.rows_linear(wr, xr), vr);   // [3,4]
            auto scores = t.rows_dot(rows, pr);                      // [3]
            auto alpha = t.softmax_(scores);
            auto mixed = t.mix_rows(alpha, xr);                      // [2]
            auto lp = t.log_softmax_(mixed);
            return t.value(t.pick(lp, 0)).data[0];
        };
        Tape<double> t;
        auto xr = t.leaf(Tensor<double>({3, 2}, X));
        auto wr = t.leaf(Tensor<double>({4, 2}, W));
        auto vr = t.leaf(Tensor<double>::vec(v));
        auto pr = t.leaf(Tensor<double>::vec(p));
        auto rows = t.rows_mul_vec(t.rows_linear(wr, xr), vr);
        auto scores = t.rows_dot(rows, pr);
        auto alpha = t.softmax_(scores);
        auto mixed = t.mix_rows(alpha, xr);
        auto lp = t.log_softmax_(mixed);
        auto root = t.pick(lp, 0);
        t.backward(root);
        auto fd = fd_grad(f, X);
        for (std::size_t i = 0; i < X.size(); ++i)
            REQUIRE(t.grad(xr).data[i] == Catch::Approx(fd[i]).margin(1e-7));
    }

    SECTION("slice, concat, row, sigmoid, relu, scale, add, sum_scalars") {
        auto E = rand_vec(6);  // [3,2]
        auto f = [&](const std::vector<double>& ev) {
            Tape<double> t;
            auto er = t.leaf(Tensor<double>({3, 2}, ev));
            auto r1 = t.row(er, 1);
            auto r2 = t.row(er, 2);
            auto cat = t.concat(r1, r2);                 // [4]
            auto s = t.slice(cat, 1, 2);                 // [2]
            auto a = t.add(t.sigmoid_(s), t.relu_(s));
            auto sc = t.scale(a, 0.5);
            std::vector<Tape<double>::Ref> terms{t.pick(sc, 0), t.pick(sc, 1)};
            return t.value(t.sum_scalars(terms)).data[0];
        };
        Tape<double> t;
        auto er = t.leaf(Tensor<double>({3, 2}, E));
        auto r1 = t.row(er, 1);
        auto r2 = t.row(er, 2);
        auto cat = t.concat(r1, r2);
        auto s = t.slice(cat, 1, 2);
        auto a = t.add(t.sigmoid_(s), t.relu_(s));
        auto sc = t.scale(a, 0.5);
        std::vector<Tape<double>::Ref> terms{t.pick(sc, 0), t.pick(sc, 1)};
        auto root = t.sum_scalars(terms);
        t.backward(root);
        auto fd = fd_grad(f, E);
        for (std::size_t i = 0; i < E.size(); ++i)
            REQUIRE(t.grad(er).data[i] == Catch::Approx(fd[i]).margin(1e-7));
    }
}

TEST_CASE("tape rejects non-finite values and bad shapes") {
    Tape<double> t;
    REQUIRE_THROWS_AS(t.leaf(Tensor<double>::vec({1.0, std::nan("")})), NumericError);
    auto a = t.leaf(Tensor<double>::vec({1.0, 2.0}));
    auto b = t.leaf(Tensor<double>::vec({1.0, 2.0, 3.0}));
    REQUIRE_THROWS_AS(t.add(a, b), DataError);
    REQUIRE_THROWS_AS(t.backward(a), DataError);  // non-scalar root
}

TEST_CASE("adam matches a hand-computed trajectory") {
    // 1-d, constant gradient 1: bias correction makes each of the first
    // steps move by almost exactly lr.
    ParamRegistry<double> p;
    p.add("w", Tensor<double>::scalar(1.0));
    AdamState<double> st;
    std::map<std::string, Tensor<double>> g;
    g["w"] = Tensor<double>::scalar(1.0);
    adam_step(p, g, st, 0.1);
    REQUIRE(p.at("w").data[0] == Catch::Approx(0.9).margin(1e-8));
    adam_step(p, g, st, 0.1);
    REQUIRE(p.at("w").data[0] == Catch::Approx(0.8).margin(1e-7));
    REQUIRE(st.t == 2);
    REQUIRE(p.step_count == 2);
}

TEST_CASE("adam converges on a quadratic") {
    ParamRegistry<double> p;
    p.add("w", Tensor<double>::scalar(3.0));
    AdamState<double> st;
    for (int i = 0; i < 2000; ++i) {
        std::map<std::string, Tensor<double>> g;
        g["w"] = Tensor<double>::scalar(2.0 * (p.at("w").data[0] - 1.0));
        adam_step(p, g, st, 0.01);
    }
    REQUIRE(p.at("w").data[0] == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("adam rejects missing or mismatched gradients") {
    ParamRegistry<double> p;
    p.add("w", Tensor<double>::vec({1.0, 2.0}));
    AdamState<double> st;
    std::map<std::string, Tensor<double>> empty;
    REQUIRE_THROWS_AS(adam_step(p, empty, st, 0.1), DataError);
    std::map<std::string, Tensor<double>> bad;
    bad["w"] = Tensor<double>::scalar(1.0);
    REQUIRE_THROWS_AS(adam_step(p, bad, st, 0.1), DataError);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    ParamRegistry<double> p;
    p.rng_seed = 42;
    p.step_count = 99;
    p.add("a", glorot_init<double>({5, 7}, 1));
    p.add("b", glorot_init<double>({3}, 2));
    std::string path = "ckpt_test_roundtrip.bin";
    p.save(path);
    auto q = ParamRegistry<double>::load(path);
    REQUIRE(q.rng_seed == 42);
    REQUIRE(q.step_count == 99);
    REQUIRE(q.names() == p.names());
    REQUIRE(q.at("a").shape == p.at("a").shape);
    REQUIRE(std::memcmp(q.at("a").data.data(), p.at("a").data.data(),
                        p.at("a").size() * sizeof(double)) == 0);
    REQUIRE(std::memcmp(q.at("b").data.data(), p.at("b").data.data(),
                        p.at("b").size() * sizeof(double)) == 0);
    // save -> load -> save produces identical bytes
    std::string path2 = "ckpt_test_roundtrip2.bin";
    q.save(path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(b1 == b2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("checkpoint converts between float and double payloads") {
    ParamRegistry<float> p;
    p.add("a", glorot_init<float>({4, 4}, 3));
    std::string path = "ckpt_test_f32.bin";
    p.save(path);
    auto q = ParamRegistry<double>::load(path);
    for (std::size_t i = 0; i < p.at("a").size(); ++i)
        REQUIRE(q.at("a").data[i] == static_cast<double>(p.at("a").data[i]));
    std::remove(path.c_str());
}

TEST_CASE("checkpoint rejects corrupt files") {
    std::string path = "ckpt_test_bad.bin";
    std::ofstream(path) << "not a checkpoint";
    REQUIRE_THROWS_AS(ParamRegistry<double>::load(path), DataError);
    std::remove(path.c_str());
    REQUIRE_THROWS_AS(ParamRegistry<double>::load("does_not_exist.bin"), DataError);
}
