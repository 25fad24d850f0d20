#pragma once

#include <functional>
#include <vector>

#include "ivqa/tensor.hpp"

namespace ivqa {

// Reverse-mode autodiff over a dynamically built computation record.
// Nodes are append-only, so creation order is a topological order and
// backward() is a single reverse sweep. One record serves one training
// step (or one inference pass, where backward is simply never called).
template <typename T>
class Tape {
  public:
    using Ref = std::size_t;

    explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

    std::size_t size() const { return nodes_.size(); }
    const Tensor<T>& value(Ref r) const { return nodes_[r].value; }
    const Tensor<T>& grad(Ref r) const { return nodes_[r].grad; }

    Ref leaf(Tensor<T> v) { return push(std::move(v), nullptr, "leaf"); }

    Ref add(Ref a, Ref b) {
        require_same(a, b, "add");
        Tensor<T> out = value(a);
        const auto& bb = value(b).data;
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bb[i];
        return push(std::move(out), [a, b](Tape& t, std::size_t y) {
            for (std::size_t i = 0; i < t.nodes_[y].grad.size(); ++i) {
                T g = t.nodes_[y].grad.data[i];
                t.nodes_[a].grad.data[i] += g;
                t.nodes_[b].grad.data[i] += g;
            }
        }, "add");
    }

    Ref mul(Ref a, Ref b) {
        require_same(a, b, "mul");
        Tensor<T> out = value(a);
        const auto& bb = value(b).data;
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bb[i];
        return push(std::move(out), [a, b](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& va = t.nodes_[a].value.data;
            const auto& vb = t.nodes_[b].value.data;
            for (std::size_t i = 0; i < g.size(); ++i) {
                t.nodes_[a].grad.data[i] += g[i] * vb[i];
                t.nodes_[b].grad.data[i] += g[i] * va[i];
            }
        }, "mul");
    }

    Ref scale(Ref a, T c) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) v *= c;
        return push(std::move(out), [a, c](Tape& t, std::size_t y) {
            for (std::size_t i = 0; i < t.nodes_[y].grad.size(); ++i)
                t.nodes_[a].grad.data[i] += c * t.nodes_[y].grad.data[i];
        }, "scale");
    }

    // y = W x, W is [m,n], x is a length-n vector.
    Ref matvec(Ref w, Ref x) {
        const auto& W = value(w);
        const auto& X = value(x);
        if (W.shape.size() != 2 || W.shape[1] != X.size())
            throw DataError("matvec: shape mismatch " + shape_str(W.shape) + " vs " + shape_str(X.shape));
        std::size_t m = W.shape[0], n = W.shape[1];
        Tensor<T> out = Tensor<T>::zeros({m});
        for (std::size_t i = 0; i < m; ++i) {
            T acc = 0;
            const T* wr = &W.data[i * n];
            for (std::size_t j = 0; j < n; ++j) acc += wr[j] * X.data[j];
            out.data[i] = acc;
        }
        return push(std::move(out), [w, x, m, n](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& W = t.nodes_[w].value.data;
            const auto& X = t.nodes_[x].value.data;
            auto& gw = t.nodes_[w].grad.data;
            auto& gx = t.nodes_[x].grad.data;
            for (std::size_t i = 0; i < m; ++i) {
                T gi = g[i];
                if (gi == T(0)) continue;
                for (std::size_t j = 0; j < n; ++j) {
                    gw[i * n + j] += gi * X[j];
                    gx[j] += gi * W[i * n + j];
                }
            }
        }, "matvec");
    }

    // Y = X W^T : X is [K,m], W is [p,m], Y is [K,p]. Applies the same
    // linear map to every row of X.
    Ref rows_linear(Ref w, Ref x) {
        const auto& W = value(w);
        const auto& X = value(x);
        if (W.shape.size() != 2 || X.shape.size() != 2 || W.shape[1] != X.shape[1])
            throw DataError("rows_linear: shape mismatch " + shape_str(W.shape) + " vs " + shape_str(X.shape));
        std::size_t K = X.shape[0], m = X.shape[1], p = W.shape[0];
        Tensor<T> out = Tensor<T>::zeros({K, p});
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t i = 0; i < p; ++i) {
                T acc = 0;
                for (std::size_t j = 0; j < m; ++j) acc += W.data[i * m + j] * X.data[k * m + j];
                out.data[k * p + i] = acc;
            }
        return push(std::move(out), [w, x, K, m, p](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& W = t.nodes_[w].value.data;
            const auto& X = t.nodes_[x].value.data;
            auto& gw = t.nodes_[w].grad.data;
            auto& gx = t.nodes_[x].grad.data;
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t i = 0; i < p; ++i) {
                    T gi = g[k * p + i];
                    if (gi == T(0)) continue;
                    for (std::size_t j = 0; j < m; ++j) {
                        gw[i * m + j] += gi * X[k * m + j];
                        gx[k * m + j] += gi * W[i * m + j];
                    }
                }
        }, "rows_linear");
    }

    // Y[k,:] = X[k,:] * v  (broadcast elementwise product over rows).
    Ref rows_mul_vec(Ref x, Ref v) {
        const auto& X = value(x);
        const auto& V = value(v);
        if (X.shape.size() != 2 || X.shape[1] != V.size())
            throw DataError("rows_mul_vec: shape mismatch");
        std::size_t K = X.shape[0], m = X.shape[1];
        Tensor<T> out = X;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j < m; ++j) out.data[k * m + j] *= V.data[j];
        return push(std::move(out), [x, v, K, m](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& X = t.nodes_[x].value.data;
            const auto& V = t.nodes_[v].value.data;
            auto& gx = t.nodes_[x].grad.data;
            auto& gv = t.nodes_[v].grad.data;
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t j = 0; j < m; ++j) {
                    gx[k * m + j] += g[k * m + j] * V[j];
                    gv[j] += g[k * m + j] * X[k * m + j];
                }
        }, "rows_mul_vec");
    }

    // s[k] = <X[k,:], p>
    Ref rows_dot(Ref x, Ref p) {
        const auto& X = value(x);
        const auto& P = value(p);
        if (X.shape.size() != 2 || X.shape[1] != P.size())
            throw DataError("rows_dot: shape mismatch");
        std::size_t K = X.shape[0], m = X.shape[1];
        Tensor<T> out = Tensor<T>::zeros({K});
        for (std::size_t k = 0; k < K; ++k) {
            T acc = 0;
            for (std::size_t j = 0; j < m; ++j) acc += X.data[k * m + j] * P.data[j];
            out.data[k] = acc;
        }
        return push(std::move(out), [x, p, K, m](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& X = t.nodes_[x].value.data;
            const auto& P = t.nodes_[p].value.data;
            auto& gx = t.nodes_[x].grad.data;
            auto& gp = t.nodes_[p].grad.data;
            for (std::size_t k = 0; k < K; ++k) {
                if (g[k] == T(0)) continue;
                for (std::size_t j = 0; j < m; ++j) {
                    gx[k * m + j] += g[k] * P[j];
                    gp[j] += g[k] * X[k * m + j];
                }
            }
        }, "rows_dot");
    }

    // c = alpha^T X : convex (or arbitrary) combination of the rows of X.
    Ref mix_rows(Ref alpha, Ref x) {
        const auto& A = value(alpha);
        const auto& X = value(x);
        if (X.shape.size() != 2 || X.shape[0] != A.size())
            throw DataError("mix_rows: shape mismatch");
        std::size_t K = X.shape[0], m = X.shape[1];
        Tensor<T> out = Tensor<T>::zeros({m});
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j < m; ++j) out.data[j] += A.data[k] * X.data[k * m + j];
        return push(std::move(out), [alpha, x, K, m](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& A = t.nodes_[alpha].value.data;
            const auto& X = t.nodes_[x].value.data;
            auto& ga = t.nodes_[alpha].grad.data;
            auto& gx = t.nodes_[x].grad.data;
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t j = 0; j < m; ++j) {
                    ga[k] += g[j] * X[k * m + j];
                    gx[k * m + j] += g[j] * A[k];
                }
        }, "mix_rows");
    }

    Ref slice(Ref a, std::size_t off, std::size_t len) {
        const auto& A = value(a);
        if (off + len > A.size()) throw DataError("slice: out of range");
        Tensor<T> out = Tensor<T>::zeros({len});
        for (std::size_t i = 0; i < len; ++i) out.data[i] = A.data[off + i];
        return push(std::move(out), [a, off, len](Tape& t, std::size_t y) {
            for (std::size_t i = 0; i < len; ++i)
                t.nodes_[a].grad.data[off + i] += t.nodes_[y].grad.data[i];
        }, "slice");
    }

    Ref concat(Ref a, Ref b) {
        const auto& A = value(a);
        const auto& B = value(b);
        Tensor<T> out = Tensor<T>::zeros({A.size() + B.size()});
        for (std::size_t i = 0; i < A.size(); ++i) out.data[i] = A.data[i];
        for (std::size_t i = 0; i < B.size(); ++i) out.data[A.size() + i] = B.data[i];
        std::size_t na = A.size(), nb = B.size();
        return push(std::move(out), [a, b, na, nb](Tape& t, std::size_t y) {
            for (std::size_t i = 0; i < na; ++i) t.nodes_[a].grad.data[i] += t.nodes_[y].grad.data[i];
            for (std::size_t i = 0; i < nb; ++i) t.nodes_[b].grad.data[i] += t.nodes_[y].grad.data[na + i];
        }, "concat");
    }

    // Embedding lookup: row i of E.
    Ref row(Ref e, std::size_t i) {
        const auto& E = value(e);
        if (E.shape.size() != 2 || i >= E.shape[0]) throw DataError("row: index out of range");
        std::size_t m = E.shape[1];
        Tensor<T> out = Tensor<T>::zeros({m});
        for (std::size_t j = 0; j < m; ++j) out.data[j] = E.data[i * m + j];
        return push(std::move(out), [e, i, m](Tape& t, std::size_t y) {
            for (std::size_t j = 0; j < m; ++j)
                t.nodes_[e].grad.data[i * m + j] += t.nodes_[y].grad.data[j];
        }, "row");
    }

    Ref tanh_(Ref a) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) v = std::tanh(v);
        return push(std::move(out), [a](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& o = t.nodes_[y].value.data;
            for (std::size_t i = 0; i < g.size(); ++i)
                t.nodes_[a].grad.data[i] += g[i] * (T(1) - o[i] * o[i]);
        }, "tanh");
    }

    Ref sigmoid_(Ref a) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
        return push(std::move(out), [a](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& o = t.nodes_[y].value.data;
            for (std::size_t i = 0; i < g.size(); ++i)
                t.nodes_[a].grad.data[i] += g[i] * o[i] * (T(1) - o[i]);
        }, "sigmoid");
    }

    Ref relu_(Ref a) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) v = v > T(0) ? v : T(0);
        return push(std::move(out), [a](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& in = t.nodes_[a].value.data;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (in[i] > T(0)) t.nodes_[a].grad.data[i] += g[i];
        }, "relu");
    }

    Ref softmax_(Ref a) {
        Tensor<T> out = softmax(value(a));
        return push(std::move(out), [a](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& p = t.nodes_[y].value.data;
            T dot = 0;
            for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * p[i];
            for (std::size_t i = 0; i < g.size(); ++i)
                t.nodes_[a].grad.data[i] += p[i] * (g[i] - dot);
        }, "softmax");
    }

    Ref log_softmax_(Ref a) {
        const auto& A = value(a);
        if (A.size() == 0) throw DataError("log_softmax: empty input");
        T mx = A.data[0];
        for (T v : A.data) mx = std::max(mx, v);
        T sum = 0;
        for (T v : A.data) sum += std::exp(v - mx);
        T lse = mx + std::log(sum);
        Tensor<T> out = A;
        for (auto& v : out.data) v -= lse;
        return push(std::move(out), [a](Tape& t, std::size_t y) {
            const auto& g = t.nodes_[y].grad.data;
            const auto& lp = t.nodes_[y].value.data;
            T gsum = 0;
            for (std::size_t i = 0; i < g.size(); ++i) gsum += g[i];
            for (std::size_t i = 0; i < g.size(); ++i)
                t.nodes_[a].grad.data[i] += g[i] - std::exp(lp[i]) * gsum;
        }, "log_softmax");
    }

    Ref pick(Ref a, std::size_t i) {
        const auto& A = value(a);
        if (i >= A.size()) throw DataError("pick: index out of range");
        return push(Tensor<T>::scalar(A.data[i]), [a, i](Tape& t, std::size_t y) {
            t.nodes_[a].grad.data[i] += t.nodes_[y].grad.data[0];
        }, "pick");
    }

    Ref sum_scalars(const std::vector<Ref>& refs) {
        if (refs.empty()) throw DataError("sum_scalars: empty list");
        T acc = 0;
        for (Ref r : refs) acc += value(r).data[0];
        return push(Tensor<T>::scalar(acc), [refs](Tape& t, std::size_t y) {
            T g = t.nodes_[y].grad.data[0];
            for (Ref r : refs) t.nodes_[r].grad.data[0] += g;
        }, "sum_scalars");
    }

    // Reverse sweep from a scalar root. Call at most once per tape.
    void backward(Ref root) {
        if (value(root).size() != 1) throw DataError("backward: root must be scalar");
        nodes_[root].grad.data[0] = T(1);
        for (std::size_t i = root + 1; i-- > 0;) {
            if (nodes_[i].back) nodes_[i].back(*this, i);
        }
    }

  private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::function<void(Tape&, std::size_t)> back;
    };

    Ref push(Tensor<T> v, std::function<void(Tape&, std::size_t)> back, const char* tag) {
        if (check_finite_) v.require_finite(tag);
        Node n;
        n.grad = Tensor<T>::zeros(v.shape);
        n.value = std::move(v);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return nodes_.size() - 1;
    }

    void require_same(Ref a, Ref b, const char* tag) const {
        if (!value(a).same_shape(value(b)))
            throw DataError(std::string(tag) + ": shape mismatch " + shape_str(value(a).shape) + " vs " +
                            shape_str(value(b).shape));
    }

    std::vector<Node> nodes_;
    bool check_finite_;
};

}  // namespace ivqa
