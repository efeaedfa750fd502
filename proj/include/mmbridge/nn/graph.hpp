#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <type_traits>
#include <memory>
#include <vector>

#include "mmbridge/nn/tensor.hpp"

// Reverse-mode differentiation over a closed op set. Ops append nodes to a
// Tape in program order; backward() replays the tape in reverse. There is no
// general autograd: every op defines its own adjoint below, and models are
// built from exactly these kernels. Accumulation order is fixed, so results
// are bit-reproducible run to run.
namespace mmbridge::nn {

template <typename T>
struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    bool needs_grad = false;
    std::function<void()> backward;  // pushes this->grad into parents

    void ensure_grad() {
        if (grad.v.size() != val.v.size()) {
            grad.shape = val.shape;
            grad.v.assign(val.v.size(), T(0));
        }
    }
};

template <typename T>
class Tape {
public:
    using Ref = Node<T>*;

    /// Constant input (no gradient).
    Ref constant(Tensor<T> t) {
        auto* n = make();
        n->val = std::move(t);
        return n;
    }

    /// Leaf bound to a parameter: gradients accumulate into p.grad.
    Ref param(Param<T>& p) {
        auto* n = make();
        n->val = p.value;
        n->needs_grad = true;
        Param<T>* pp = &p;
        n->backward = [n, pp] {
            for (std::size_t i = 0; i < n->grad.v.size(); ++i) pp->grad.v[i] += n->grad.v[i];
        };
        return n;
    }

    /// Fresh node computed from parents.
    Ref make() {
        nodes_.push_back(std::make_unique<Node<T>>());
        return nodes_.back().get();
    }

    /// Reverse sweep from a scalar loss node.
    void backward(Ref loss) {
        require(loss->val.numel() == 1, "backward needs a scalar loss");
        for (auto& n : nodes_) n->ensure_grad();
        loss->grad.v[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if ((*it)->needs_grad && (*it)->backward) (*it)->backward();
    }

    std::size_t size() const { return nodes_.size(); }

private:
    std::deque<std::unique_ptr<Node<T>>> nodes_;
};

namespace ops {

template <typename T>
using Ref = Node<T>*;

template <typename T>
Ref<T> begin_op(Tape<T>& tape, std::initializer_list<Ref<T>> parents) {
    auto* n = tape.make();
    for (auto* p : parents) n->needs_grad = n->needs_grad || p->needs_grad;
    return n;
}

// ---- elementwise -----------------------------------------------------------

template <typename T>
Ref<T> add(Tape<T>& tape, Ref<T> a, Ref<T> b) {
    require(a->val.same_shape(b->val), "add: shape mismatch");
    auto* n = begin_op(tape, {a, b});
    n->val = a->val;
    for (std::size_t i = 0; i < n->val.v.size(); ++i) n->val.v[i] += b->val.v[i];
    n->backward = [n, a, b] {
        if (a->needs_grad)
            for (std::size_t i = 0; i < n->grad.v.size(); ++i) a->grad.v[i] += n->grad.v[i];
        if (b->needs_grad)
            for (std::size_t i = 0; i < n->grad.v.size(); ++i) b->grad.v[i] += n->grad.v[i];
    };
    return n;
}

template <typename T>
Ref<T> sub(Tape<T>& tape, Ref<T> a, Ref<T> b) {
    require(a->val.same_shape(b->val), "sub: shape mismatch");
    auto* n = begin_op(tape, {a, b});
    n->val = a->val;
    for (std::size_t i = 0; i < n->val.v.size(); ++i) n->val.v[i] -= b->val.v[i];
    n->backward = [n, a, b] {
        if (a->needs_grad)
            for (std::size_t i = 0; i < n->grad.v.size(); ++i) a->grad.v[i] += n->grad.v[i];
        if (b->needs_grad)
            for (std::size_t i = 0; i < n->grad.v.size(); ++i) b->grad.v[i] -= n->grad.v[i];
    };
    return n;
}

template <typename T>
Ref<T> mul(Tape<T>& tape, Ref<T> a, Ref<T> b) {
    require(a->val.same_shape(b->val), "mul: shape mismatch");
    auto* n = begin_op(tape, {a, b});
    n->val = a->val;
    for (std::size_t i = 0; i < n->val.v.size(); ++i) n->val.v[i] *= b->val.v[i];
    n->backward = [n, a, b] {
        if (a->needs_grad)
            for (std::size_t i = 0; i < n->grad.v.size(); ++i)
                a->grad.v[i] += n->grad.v[i] * b->val.v[i];
        if (b->needs_grad)
            for (std::size_t i = 0; i < n->grad.v.size(); ++i)
                b->grad.v[i] += n->grad.v[i] * a->val.v[i];
    };
    return n;
}

template <typename T>
Ref<T> scale(Tape<T>& tape, Ref<T> a, T s) {
    auto* n = begin_op(tape, {a});
    n->val = a->val;
    for (auto& x : n->val.v) x *= s;
    n->backward = [n, a, s] {
        if (a->needs_grad)
            for (std::size_t i = 0; i < n->grad.v.size(); ++i) a->grad.v[i] += s * n->grad.v[i];
    };
    return n;
}

/// Scale each of V scalars onto its own [C,H,W] slice: out = sum_i s_i * x_i.
/// s is a [V] node, xs are V matching nodes.
template <typename T>
Ref<T> gated_sum(Tape<T>& tape, Ref<T> gates, const std::vector<Ref<T>>& xs) {
    require(gates->val.rank() == 1 && gates->val.dim(0) == static_cast<int>(xs.size()),
            "gated_sum: gate count mismatch");
    auto* n = tape.make();
    n->needs_grad = gates->needs_grad;
    for (auto* x : xs) n->needs_grad = n->needs_grad || x->needs_grad;
    n->val = Tensor<T>(xs[0]->val.shape);
    for (std::size_t k = 0; k < xs.size(); ++k) {
        require(xs[k]->val.same_shape(xs[0]->val), "gated_sum: operand shape mismatch");
        const T g = gates->val.v[k];
        for (std::size_t i = 0; i < n->val.v.size(); ++i) n->val.v[i] += g * xs[k]->val.v[i];
    }
    auto xs_copy = xs;
    n->backward = [n, gates, xs_copy] {
        for (std::size_t k = 0; k < xs_copy.size(); ++k) {
            if (xs_copy[k]->needs_grad) {
                const T g = gates->val.v[k];
                for (std::size_t i = 0; i < n->grad.v.size(); ++i)
                    xs_copy[k]->grad.v[i] += g * n->grad.v[i];
            }
            if (gates->needs_grad) {
                T acc = T(0);
                for (std::size_t i = 0; i < n->grad.v.size(); ++i)
                    acc += n->grad.v[i] * xs_copy[k]->val.v[i];
                gates->grad.v[k] += acc;
            }
        }
    };
    return n;
}

/// Multiply a tensor by a scalar node ([1]-shaped), e.g. a learned gate.
template <typename T>
Ref<T> scale_by_scalar(Tape<T>& tape, Ref<T> x, Ref<T> s) {
    require(s->val.numel() == 1, "scale_by_scalar: scalar node required");
    auto* n = begin_op(tape, {x, s});
    n->val = x->val;
    const T sv = s->val.v[0];
    for (auto& v : n->val.v) v *= sv;
    n->backward = [n, x, s] {
        const T sv = s->val.v[0];
        if (x->needs_grad)
            for (std::size_t i = 0; i < n->grad.v.size(); ++i) x->grad.v[i] += sv * n->grad.v[i];
        if (s->needs_grad) {
            T acc = T(0);
            for (std::size_t i = 0; i < n->grad.v.size(); ++i) acc += n->grad.v[i] * x->val.v[i];
            s->grad.v[0] += acc;
        }
    };
    return n;
}

template <typename T>
Ref<T> relu(Tape<T>& tape, Ref<T> a) {
    auto* n = begin_op(tape, {a});
    n->val = a->val;
    for (auto& x : n->val.v) x = x > T(0) ? x : T(0);
    n->backward = [n, a] {
        if (!a->needs_grad) return;
        for (std::size_t i = 0; i < n->grad.v.size(); ++i)
            if (a->val.v[i] > T(0)) a->grad.v[i] += n->grad.v[i];
    };
    return n;
}

template <typename T>
Ref<T> sigmoid(Tape<T>& tape, Ref<T> a) {
    auto* n = begin_op(tape, {a});
    n->val = a->val;
    for (auto& x : n->val.v) x = T(1) / (T(1) + std::exp(-x));
    n->backward = [n, a] {
        if (!a->needs_grad) return;
        for (std::size_t i = 0; i < n->grad.v.size(); ++i) {
            const T s = n->val.v[i];
            a->grad.v[i] += n->grad.v[i] * s * (T(1) - s);
        }
    };
    return n;
}

// ---- shape plumbing --------------------------------------------------------

template <typename T>
Ref<T> reshape(Tape<T>& tape, Ref<T> a, std::vector<int> shape) {
    require(Tensor<T>::numel_of(shape) == a->val.numel(), "reshape: element count mismatch");
    auto* n = begin_op(tape, {a});
    n->val.shape = std::move(shape);
    n->val.v = a->val.v;
    n->backward = [n, a] {
        if (!a->needs_grad) return;
        for (std::size_t i = 0; i < n->grad.v.size(); ++i) a->grad.v[i] += n->grad.v[i];
    };
    return n;
}

template <typename T>
Ref<T> concat_channels(Tape<T>& tape, Ref<T> a, Ref<T> b) {
    require(a->val.rank() == 3 && b->val.rank() == 3 && a->val.dim(1) == b->val.dim(1) &&
                a->val.dim(2) == b->val.dim(2),
            "concat: spatial dims must match");
    auto* n = begin_op(tape, {a, b});
    n->val = Tensor<T>({a->val.dim(0) + b->val.dim(0), a->val.dim(1), a->val.dim(2)});
    std::copy(a->val.v.begin(), a->val.v.end(), n->val.v.begin());
    std::copy(b->val.v.begin(), b->val.v.end(), n->val.v.begin() + static_cast<std::ptrdiff_t>(a->val.numel()));
    n->backward = [n, a, b] {
        const std::size_t na = a->val.numel();
        if (a->needs_grad)
            for (std::size_t i = 0; i < na; ++i) a->grad.v[i] += n->grad.v[i];
        if (b->needs_grad)
            for (std::size_t i = 0; i < b->val.numel(); ++i) b->grad.v[i] += n->grad.v[na + i];
    };
    return n;
}

/// Stack rank-2 nodes with equal column counts along the row axis.
template <typename T>
Ref<T> concat_rows(Tape<T>& tape, const std::vector<Ref<T>>& parts) {
    require(!parts.empty(), "concat_rows: empty input");
    const int cols = parts[0]->val.dim(1);
    int rows = 0;
    auto* n = tape.make();
    for (auto* p : parts) {
        require(p->val.rank() == 2 && p->val.dim(1) == cols, "concat_rows: column mismatch");
        rows += p->val.dim(0);
        n->needs_grad = n->needs_grad || p->needs_grad;
    }
    n->val = Tensor<T>({rows, cols});
    std::size_t off = 0;
    for (auto* p : parts) {
        std::copy(p->val.v.begin(), p->val.v.end(), n->val.v.begin() + static_cast<std::ptrdiff_t>(off));
        off += p->val.numel();
    }
    auto parts_copy = parts;
    n->backward = [n, parts_copy] {
        std::size_t off2 = 0;
        for (auto* p : parts_copy) {
            if (p->needs_grad)
                for (std::size_t i = 0; i < p->val.numel(); ++i) p->grad.v[i] += n->grad.v[off2 + i];
            off2 += p->val.numel();
        }
    };
    return n;
}

template <typename T>
Ref<T> slice_rows(Tape<T>& tape, Ref<T> a, int r0, int r1) {
    require(a->val.rank() == 2 && r0 >= 0 && r1 <= a->val.dim(0) && r0 < r1,
            "slice_rows: bad range");
    auto* n = begin_op(tape, {a});
    const int cols = a->val.dim(1);
    n->val = Tensor<T>({r1 - r0, cols});
    std::copy(a->val.v.begin() + static_cast<std::ptrdiff_t>(r0) * cols,
              a->val.v.begin() + static_cast<std::ptrdiff_t>(r1) * cols, n->val.v.begin());
    n->backward = [n, a, r0, cols] {
        if (!a->needs_grad) return;
        for (std::size_t i = 0; i < n->grad.v.size(); ++i)
            a->grad.v[static_cast<std::size_t>(r0) * cols + i] += n->grad.v[i];
    };
    return n;
}

/// Append zero rows up to total_rows (validity handled by the caller's mask).
template <typename T>
Ref<T> pad_rows(Tape<T>& tape, Ref<T> a, int total_rows) {
    require(a->val.rank() == 2 && total_rows >= a->val.dim(0), "pad_rows: bad target");
    auto* n = begin_op(tape, {a});
    const int cols = a->val.dim(1);
    n->val = Tensor<T>({total_rows, cols});
    std::copy(a->val.v.begin(), a->val.v.end(), n->val.v.begin());
    n->backward = [n, a] {
        if (!a->needs_grad) return;
        for (std::size_t i = 0; i < a->val.numel(); ++i) a->grad.v[i] += n->grad.v[i];
    };
    return n;
}

// ---- dense algebra ---------------------------------------------------------

template <typename T>
Ref<T> matmul(Tape<T>& tape, Ref<T> a, Ref<T> b) {
    require(a->val.rank() == 2 && b->val.rank() == 2 && a->val.dim(1) == b->val.dim(0),
            "matmul: shape mismatch");
    const int n_rows = a->val.dim(0), k = a->val.dim(1), m = b->val.dim(1);
    auto* n = begin_op(tape, {a, b});
    n->val = Tensor<T>({n_rows, m});
    for (int i = 0; i < n_rows; ++i)
        for (int l = 0; l < k; ++l) {
            const T av = a->val.at(i, l);
            for (int j = 0; j < m; ++j) n->val.at(i, j) += av * b->val.at(l, j);
        }
    n->backward = [n, a, b, n_rows, k, m] {
        if (a->needs_grad)
            for (int i = 0; i < n_rows; ++i)
                for (int j = 0; j < m; ++j) {
                    const T g = n->grad.at(i, j);
                    for (int l = 0; l < k; ++l) a->grad.at(i, l) += g * b->val.at(l, j);
                }
        if (b->needs_grad)
            for (int i = 0; i < n_rows; ++i)
                for (int l = 0; l < k; ++l) {
                    const T av = a->val.at(i, l);
                    for (int j = 0; j < m; ++j) b->grad.at(l, j) += av * n->grad.at(i, j);
                }
    };
    return n;
}

template <typename T>
Ref<T> transpose(Tape<T>& tape, Ref<T> a) {
    require(a->val.rank() == 2, "transpose: rank-2 only");
    const int r = a->val.dim(0), c = a->val.dim(1);
    auto* n = begin_op(tape, {a});
    n->val = Tensor<T>({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) n->val.at(j, i) = a->val.at(i, j);
    n->backward = [n, a, r, c] {
        if (!a->needs_grad) return;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) a->grad.at(i, j) += n->grad.at(j, i);
    };
    return n;
}

/// x[N,K] * w[K,M] + b[M]
template <typename T>
Ref<T> dense(Tape<T>& tape, Ref<T> x, Ref<T> w, Ref<T> b) {
    auto* mm = matmul(tape, x, w);
    require(b->val.rank() == 1 && b->val.dim(0) == mm->val.dim(1), "dense: bias shape");
    auto* n = begin_op(tape, {mm, b});
    n->val = mm->val;
    const int rows = mm->val.dim(0), cols = mm->val.dim(1);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) n->val.at(i, j) += b->val.v[static_cast<std::size_t>(j)];
    n->backward = [n, mm, b, rows, cols] {
        if (mm->needs_grad)
            for (std::size_t i = 0; i < n->grad.v.size(); ++i) mm->grad.v[i] += n->grad.v[i];
        if (b->needs_grad)
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) b->grad.v[static_cast<std::size_t>(j)] += n->grad.at(i, j);
    };
    return n;
}

/// Row-wise softmax; optional additive mask applied beforehand by the caller.
template <typename T>
Ref<T> softmax_rows(Tape<T>& tape, Ref<T> a) {
    require(a->val.rank() == 2, "softmax: rank-2 only");
    const int rows = a->val.dim(0), cols = a->val.dim(1);
    auto* n = begin_op(tape, {a});
    n->val = Tensor<T>({rows, cols});
    for (int i = 0; i < rows; ++i) {
        T hi = a->val.at(i, 0);
        for (int j = 1; j < cols; ++j) hi = std::max(hi, a->val.at(i, j));
        T sum = T(0);
        for (int j = 0; j < cols; ++j) {
            const T e = std::exp(a->val.at(i, j) - hi);
            n->val.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < cols; ++j) n->val.at(i, j) /= sum;
    }
    n->backward = [n, a, rows, cols] {
        if (!a->needs_grad) return;
        for (int i = 0; i < rows; ++i) {
            T dot = T(0);
            for (int j = 0; j < cols; ++j) dot += n->grad.at(i, j) * n->val.at(i, j);
            for (int j = 0; j < cols; ++j)
                a->grad.at(i, j) += n->val.at(i, j) * (n->grad.at(i, j) - dot);
        }
    };
    return n;
}

/// Per-row layer normalization with learned gain/bias.
template <typename T>
Ref<T> layer_norm(Tape<T>& tape, Ref<T> x, Ref<T> gamma, Ref<T> beta, T eps = T(1e-5)) {
    require(x->val.rank() == 2, "layer_norm: rank-2 only");
    const int rows = x->val.dim(0), cols = x->val.dim(1);
    require(gamma->val.rank() == 1 && gamma->val.dim(0) == cols, "layer_norm: gamma shape");
    require(beta->val.rank() == 1 && beta->val.dim(0) == cols, "layer_norm: beta shape");
    auto* n = begin_op(tape, {x, gamma, beta});
    n->val = Tensor<T>({rows, cols});

    auto mean_buf = std::make_shared<std::vector<T>>(rows);
    auto inv_std_buf = std::make_shared<std::vector<T>>(rows);
    for (int i = 0; i < rows; ++i) {
        T mu = T(0);
        for (int j = 0; j < cols; ++j) mu += x->val.at(i, j);
        mu /= static_cast<T>(cols);
        T var = T(0);
        for (int j = 0; j < cols; ++j) {
            const T d = x->val.at(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<T>(cols);
        const T inv = T(1) / std::sqrt(var + eps);
        (*mean_buf)[i] = mu;
        (*inv_std_buf)[i] = inv;
        for (int j = 0; j < cols; ++j)
            n->val.at(i, j) = (x->val.at(i, j) - mu) * inv * gamma->val.v[static_cast<std::size_t>(j)] +
                              beta->val.v[static_cast<std::size_t>(j)];
    }
    n->backward = [n, x, gamma, beta, rows, cols, mean_buf, inv_std_buf] {
        for (int i = 0; i < rows; ++i) {
            const T mu = (*mean_buf)[i], inv = (*inv_std_buf)[i];
            // dL/dxhat, plus the two reductions the row normalization needs.
            T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
            for (int j = 0; j < cols; ++j) {
                const T xhat = (x->val.at(i, j) - mu) * inv;
                const T dxhat = n->grad.at(i, j) * gamma->val.v[static_cast<std::size_t>(j)];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                if (gamma->needs_grad) gamma->grad.v[static_cast<std::size_t>(j)] += n->grad.at(i, j) * xhat;
                if (beta->needs_grad) beta->grad.v[static_cast<std::size_t>(j)] += n->grad.at(i, j);
            }
            if (x->needs_grad)
                for (int j = 0; j < cols; ++j) {
                    const T xhat = (x->val.at(i, j) - mu) * inv;
                    const T dxhat = n->grad.at(i, j) * gamma->val.v[static_cast<std::size_t>(j)];
                    x->grad.at(i, j) += inv * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) /
                                                           static_cast<T>(cols));
                }
        }
    };
    return n;
}

// ---- convolution family ----------------------------------------------------

/// Same-padded 2-D convolution, stride 1, integer dilation.
/// x [Cin,H,W], w [Cout,Cin,kh,kw], b [Cout] -> [Cout,H,W]
template <typename T>
Ref<T> conv2d(Tape<T>& tape, Ref<T> x, Ref<T> w, Ref<T> b, int dilation = 1) {
    require(x->val.rank() == 3 && w->val.rank() == 4, "conv2d: x rank 3, w rank 4");
    require(dilation >= 1, "conv2d: dilation must be >= 1");
    const int cin = x->val.dim(0), h = x->val.dim(1), wd = x->val.dim(2);
    const int cout = w->val.dim(0), kh = w->val.dim(2), kw = w->val.dim(3);
    require(w->val.dim(1) == cin, "conv2d: channel mismatch");
    require(kh % 2 == 1 && kw % 2 == 1, "conv2d: odd kernels only");
    require(b->val.rank() == 1 && b->val.dim(0) == cout, "conv2d: bias shape");
    const int ry = dilation * (kh / 2), rx = dilation * (kw / 2);

    auto* n = begin_op(tape, {x, w, b});
    n->val = Tensor<T>({cout, h, wd});
    for (int co = 0; co < cout; ++co) {
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < wd; ++xx) {
                T acc = b->val.v[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < cin; ++ci)
                    for (int i = 0; i < kh; ++i) {
                        const int yy = y + dilation * i - ry;
                        if (yy < 0 || yy >= h) continue;
                        for (int j = 0; j < kw; ++j) {
                            const int xj = xx + dilation * j - rx;
                            if (xj < 0 || xj >= wd) continue;
                            acc += x->val.at(ci, yy, xj) * w->val.at(co, ci, i, j);
                        }
                    }
                n->val.at(co, y, xx) = acc;
            }
    }
    n->backward = [n, x, w, b, cin, h, wd, cout, kh, kw, dilation, ry, rx] {
        for (int co = 0; co < cout; ++co)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < wd; ++xx) {
                    const T g = n->grad.at(co, y, xx);
                    if (g == T(0)) continue;
                    if (b->needs_grad) b->grad.v[static_cast<std::size_t>(co)] += g;
                    for (int ci = 0; ci < cin; ++ci)
                        for (int i = 0; i < kh; ++i) {
                            const int yy = y + dilation * i - ry;
                            if (yy < 0 || yy >= h) continue;
                            for (int j = 0; j < kw; ++j) {
                                const int xj = xx + dilation * j - rx;
                                if (xj < 0 || xj >= wd) continue;
                                if (x->needs_grad) x->grad.at(ci, yy, xj) += g * w->val.at(co, ci, i, j);
                                if (w->needs_grad) w->grad.at(co, ci, i, j) += g * x->val.at(ci, yy, xj);
                            }
                        }
                }
    };
    return n;
}

/// Convolution with learnable real-valued element positions, sampled by
/// bilinear interpolation (zero outside). With positions frozen on the
/// integer grid d*sigma' this reproduces conv2d exactly, including summation
/// order. x [Cin,H,W], w [Cout,Cin,E], pos [E,2] (dy,dx offsets) -> [Cout,H,W]
template <typename T>
Ref<T> ldconv2d(Tape<T>& tape, Ref<T> x, Ref<T> w, Ref<T> pos, T clamp_radius) {
    require(x->val.rank() == 3 && w->val.rank() == 3 && pos->val.rank() == 2, "ldconv2d: ranks");
    const int cin = x->val.dim(0), h = x->val.dim(1), wd = x->val.dim(2);
    const int cout = w->val.dim(0), elems = w->val.dim(2);
    require(w->val.dim(1) == cin, "ldconv2d: channel mismatch");
    require(pos->val.dim(0) == elems && pos->val.dim(1) == 2, "ldconv2d: pos shape");
    pos->val.check_finite("ldconv2d positions");

    // Effective offsets, clamped to the configured receptive-field radius.
    std::vector<T> dy(elems), dx(elems);
    for (int e = 0; e < elems; ++e) {
        dy[e] = std::clamp(pos->val.at(e, 0), -clamp_radius, clamp_radius);
        dx[e] = std::clamp(pos->val.at(e, 1), -clamp_radius, clamp_radius);
    }

    auto* n = begin_op(tape, {x, w, pos});
    n->val = Tensor<T>({cout, h, wd});
    for (int co = 0; co < cout; ++co)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < wd; ++xx) {
                T acc = T(0);
                for (int ci = 0; ci < cin; ++ci)
                    for (int e = 0; e < elems; ++e) {
                        const T sy = static_cast<T>(y) + dy[e];
                        const T sx = static_cast<T>(xx) + dx[e];
                        const int y0 = static_cast<int>(std::floor(sy));
                        const int x0 = static_cast<int>(std::floor(sx));
                        const T fy = sy - static_cast<T>(y0), fx = sx - static_cast<T>(x0);
                        T sample = T(0);
                        for (int by = 0; by < 2; ++by)
                            for (int bx = 0; bx < 2; ++bx) {
                                const int yy = y0 + by, xj = x0 + bx;
                                if (yy < 0 || yy >= h || xj < 0 || xj >= wd) continue;
                                const T wy = by ? fy : T(1) - fy;
                                const T wx = bx ? fx : T(1) - fx;
                                sample += wy * wx * x->val.at(ci, yy, xj);
                            }
                        acc += sample * w->val.at(co, ci, e);
                    }
                n->val.at(co, y, xx) = acc;
            }

    auto dy_sh = std::make_shared<std::vector<T>>(std::move(dy));
    auto dx_sh = std::make_shared<std::vector<T>>(std::move(dx));
    n->backward = [n, x, w, pos, cin, h, wd, cout, elems, clamp_radius, dy_sh, dx_sh] {
        for (int co = 0; co < cout; ++co)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < wd; ++xx) {
                    const T g = n->grad.at(co, y, xx);
                    if (g == T(0)) continue;
                    for (int ci = 0; ci < cin; ++ci)
                        for (int e = 0; e < elems; ++e) {
                            const T sy = static_cast<T>(y) + (*dy_sh)[e];
                            const T sx = static_cast<T>(xx) + (*dx_sh)[e];
                            const int y0 = static_cast<int>(std::floor(sy));
                            const int x0 = static_cast<int>(std::floor(sx));
                            const T fy = sy - static_cast<T>(y0), fx = sx - static_cast<T>(x0);
                            const T wv = w->val.at(co, ci, e);
                            T sample = T(0), d_dy = T(0), d_dx = T(0);
                            for (int by = 0; by < 2; ++by)
                                for (int bx = 0; bx < 2; ++bx) {
                                    const int yy = y0 + by, xj = x0 + bx;
                                    if (yy < 0 || yy >= h || xj < 0 || xj >= wd) continue;
                                    const T wy = by ? fy : T(1) - fy;
                                    const T wx = bx ? fx : T(1) - fx;
                                    const T xv = x->val.at(ci, yy, xj);
                                    sample += wy * wx * xv;
                                    d_dy += (by ? T(1) : T(-1)) * wx * xv;
                                    d_dx += wy * (bx ? T(1) : T(-1)) * xv;
                                    if (x->needs_grad) x->grad.at(ci, yy, xj) += g * wv * wy * wx;
                                }
                            if (w->needs_grad) w->grad.at(co, ci, e) += g * sample;
                            if (pos->needs_grad) {
                                // No gradient through an active clamp.
                                const bool cy = std::abs(pos->val.at(e, 0)) < clamp_radius;
                                const bool cx = std::abs(pos->val.at(e, 1)) < clamp_radius;
                                if (cy) pos->grad.at(e, 0) += g * wv * d_dy;
                                if (cx) pos->grad.at(e, 1) += g * wv * d_dx;
                            }
                        }
                }
    };
    return n;
}

/// 2x2 max pooling, stride 2. Ties resolve to the earliest index, fixed order.
template <typename T>
Ref<T> maxpool2(Tape<T>& tape, Ref<T> x) {
    require(x->val.rank() == 3 && x->val.dim(1) % 2 == 0 && x->val.dim(2) % 2 == 0,
            "maxpool2: even dims required");
    const int c = x->val.dim(0), h = x->val.dim(1) / 2, w = x->val.dim(2) / 2;
    auto* n = begin_op(tape, {x});
    n->val = Tensor<T>({c, h, w});
    auto argmax = std::make_shared<std::vector<int>>(n->val.numel());
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                int best_y = 2 * y, best_x = 2 * xx;
                T best = x->val.at(ci, best_y, best_x);
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const T v = x->val.at(ci, 2 * y + dy, 2 * xx + dx);
                        if (v > best) {
                            best = v;
                            best_y = 2 * y + dy;
                            best_x = 2 * xx + dx;
                        }
                    }
                n->val.at(ci, y, xx) = best;
                (*argmax)[(static_cast<std::size_t>(ci) * h + y) * w + xx] =
                    best_y * x->val.dim(2) + best_x;
            }
    n->backward = [n, x, argmax, c, h, w] {
        if (!x->needs_grad) return;
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) {
                    const int flat = (*argmax)[(static_cast<std::size_t>(ci) * h + y) * w + xx];
                    x->grad.v[static_cast<std::size_t>(ci) * x->val.dim(1) * x->val.dim(2) + flat] +=
                        n->grad.at(ci, y, xx);
                }
    };
    return n;
}

/// Nearest-neighbor 2x upsample.
template <typename T>
Ref<T> upsample2(Tape<T>& tape, Ref<T> x) {
    require(x->val.rank() == 3, "upsample2: rank-3 only");
    const int c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    auto* n = begin_op(tape, {x});
    n->val = Tensor<T>({c, 2 * h, 2 * w});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < 2 * h; ++y)
            for (int xx = 0; xx < 2 * w; ++xx) n->val.at(ci, y, xx) = x->val.at(ci, y / 2, xx / 2);
    n->backward = [n, x, c, h, w] {
        if (!x->needs_grad) return;
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < 2 * h; ++y)
                for (int xx = 0; xx < 2 * w; ++xx)
                    x->grad.at(ci, y / 2, xx / 2) += n->grad.at(ci, y, xx);
    };
    return n;
}

/// Fixed bilinear resize of each channel (edge-aligned). Linear in x.
template <typename T>
Ref<T> resize_bilinear(Tape<T>& tape, Ref<T> x, int out_h, int out_w) {
    require(x->val.rank() == 3, "resize: rank-3 only");
    const int c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    auto* n = begin_op(tape, {x});
    n->val = Tensor<T>({c, out_h, out_w});
    const double sr = out_h > 1 ? static_cast<double>(h - 1) / (out_h - 1) : 0.0;
    const double sc = out_w > 1 ? static_cast<double>(w - 1) / (out_w - 1) : 0.0;

    struct Tap {
        int r0, r1, c0, c1;
        T wr, wc;
    };
    auto taps = std::make_shared<std::vector<Tap>>();
    taps->reserve(static_cast<std::size_t>(out_h) * out_w);
    for (int y = 0; y < out_h; ++y) {
        const double fr = y * sr;
        const int r0 = std::min(static_cast<int>(fr), h - 1), r1 = std::min(r0 + 1, h - 1);
        for (int xx = 0; xx < out_w; ++xx) {
            const double fc = xx * sc;
            const int c0 = std::min(static_cast<int>(fc), w - 1), c1 = std::min(c0 + 1, w - 1);
            taps->push_back({r0, r1, c0, c1, static_cast<T>(fr - r0), static_cast<T>(fc - c0)});
        }
    }
    for (int ci = 0; ci < c; ++ci) {
        std::size_t k = 0;
        for (int y = 0; y < out_h; ++y)
            for (int xx = 0; xx < out_w; ++xx, ++k) {
                const Tap& t = (*taps)[k];
                const T top = (T(1) - t.wc) * x->val.at(ci, t.r0, t.c0) + t.wc * x->val.at(ci, t.r0, t.c1);
                const T bot = (T(1) - t.wc) * x->val.at(ci, t.r1, t.c0) + t.wc * x->val.at(ci, t.r1, t.c1);
                n->val.at(ci, y, xx) = (T(1) - t.wr) * top + t.wr * bot;
            }
    }
    n->backward = [n, x, taps, c, out_h, out_w] {
        if (!x->needs_grad) return;
        for (int ci = 0; ci < c; ++ci) {
            std::size_t k = 0;
            for (int y = 0; y < out_h; ++y)
                for (int xx = 0; xx < out_w; ++xx, ++k) {
                    const Tap& t = (*taps)[k];
                    const T g = n->grad.at(ci, y, xx);
                    x->grad.at(ci, t.r0, t.c0) += g * (T(1) - t.wr) * (T(1) - t.wc);
                    x->grad.at(ci, t.r0, t.c1) += g * (T(1) - t.wr) * t.wc;
                    x->grad.at(ci, t.r1, t.c0) += g * t.wr * (T(1) - t.wc);
                    x->grad.at(ci, t.r1, t.c1) += g * t.wr * t.wc;
                }
        }
    };
    return n;
}

/// Zero-filled integer shift of [C,H,W] content by (dy,dx).
template <typename T>
Ref<T> shift2d(Tape<T>& tape, Ref<T> x, int dy, int dx) {
    require(x->val.rank() == 3, "shift2d: rank-3 only");
    const int c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    auto* n = begin_op(tape, {x});
    n->val = Tensor<T>({c, h, w});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y) {
            const int sy = y - dy;
            if (sy < 0 || sy >= h) continue;
            for (int xx = 0; xx < w; ++xx) {
                const int sx = xx - dx;
                if (sx < 0 || sx >= w) continue;
                n->val.at(ci, y, xx) = x->val.at(ci, sy, sx);
            }
        }
    n->backward = [n, x, dy, dx, c, h, w] {
        if (!x->needs_grad) return;
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y) {
                const int sy = y - dy;
                if (sy < 0 || sy >= h) continue;
                for (int xx = 0; xx < w; ++xx) {
                    const int sx = xx - dx;
                    if (sx < 0 || sx >= w) continue;
                    x->grad.at(ci, sy, sx) += n->grad.at(ci, y, xx);
                }
            }
    };
    return n;
}

/// Non-overlapping patch extraction: [C,H,W] -> [n_patches, C*p*p], patches
/// ordered row-major over the patch grid.
template <typename T>
Ref<T> patchify(Tape<T>& tape, Ref<T> x, int p) {
    require(x->val.rank() == 3, "patchify: rank-3 only");
    const int c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    require(p >= 1 && h % p == 0 && w % p == 0, "patchify: dims must divide by patch size");
    const int gy = h / p, gx = w / p;
    auto* n = begin_op(tape, {x});
    n->val = Tensor<T>({gy * gx, c * p * p});
    for (int py = 0; py < gy; ++py)
        for (int px = 0; px < gx; ++px) {
            const int row = py * gx + px;
            int col = 0;
            for (int ci = 0; ci < c; ++ci)
                for (int i = 0; i < p; ++i)
                    for (int j = 0; j < p; ++j)
                        n->val.at(row, col++) = x->val.at(ci, py * p + i, px * p + j);
        }
    n->backward = [n, x, p, c, gy, gx] {
        if (!x->needs_grad) return;
        for (int py = 0; py < gy; ++py)
            for (int px = 0; px < gx; ++px) {
                const int row = py * gx + px;
                int col = 0;
                for (int ci = 0; ci < c; ++ci)
                    for (int i = 0; i < p; ++i)
                        for (int j = 0; j < p; ++j)
                            x->grad.at(ci, py * p + i, px * p + j) += n->grad.at(row, col++);
            }
    };
    return n;
}

// ---- reductions and losses -------------------------------------------------

template <typename T>
Ref<T> mean_all(Tape<T>& tape, Ref<T> a) {
    auto* n = begin_op(tape, {a});
    n->val = Tensor<T>({1});
    T acc = T(0);
    for (const T& x : a->val.v) acc += x;
    n->val.v[0] = acc / static_cast<T>(a->val.numel());
    n->backward = [n, a] {
        if (!a->needs_grad) return;
        const T g = n->grad.v[0] / static_cast<T>(a->val.numel());
        for (auto& gv : a->grad.v) gv += g;
    };
    return n;
}

/// Mean squared error against a constant target.
template <typename T>
Ref<T> mse_loss(Tape<T>& tape, Ref<T> pred, const Tensor<T>& target) {
    require(pred->val.same_shape(target), "mse: shape mismatch");
    auto* n = begin_op(tape, {pred});
    n->val = Tensor<T>({1});
    T acc = T(0);
    for (std::size_t i = 0; i < pred->val.v.size(); ++i) {
        const T d = pred->val.v[i] - target.v[i];
        acc += d * d;
    }
    n->val.v[0] = acc / static_cast<T>(pred->val.numel());
    auto tgt = std::make_shared<Tensor<T>>(target);
    n->backward = [n, pred, tgt] {
        if (!pred->needs_grad) return;
        const T g = n->grad.v[0] * T(2) / static_cast<T>(pred->val.numel());
        for (std::size_t i = 0; i < pred->grad.v.size(); ++i)
            pred->grad.v[i] += g * (pred->val.v[i] - tgt->v[i]);
    };
    return n;
}

/// Softmax cross-entropy over rows of logits [N,C] with integer labels.
template <typename T>
Ref<T> cross_entropy(Tape<T>& tape, Ref<T> logits, const std::vector<int>& labels) {
    require(logits->val.rank() == 2, "cross_entropy: rank-2 logits");
    const int rows = logits->val.dim(0), cols = logits->val.dim(1);
    require(static_cast<int>(labels.size()) == rows, "cross_entropy: label count");
    auto* n = begin_op(tape, {logits});
    n->val = Tensor<T>({1});

    auto probs = std::make_shared<Tensor<T>>(std::vector<int>{rows, cols});
    T loss = T(0);
    for (int i = 0; i < rows; ++i) {
        require(labels[i] >= 0 && labels[i] < cols, "cross_entropy: label out of range");
        T hi = logits->val.at(i, 0);
        for (int j = 1; j < cols; ++j) hi = std::max(hi, logits->val.at(i, j));
        T sum = T(0);
        for (int j = 0; j < cols; ++j) {
            const T e = std::exp(logits->val.at(i, j) - hi);
            probs->at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < cols; ++j) probs->at(i, j) /= sum;
        loss -= std::log(std::max(probs->at(i, labels[i]), T(1e-30)));
    }
    n->val.v[0] = loss / static_cast<T>(rows);
    auto labels_sh = std::make_shared<std::vector<int>>(labels);
    n->backward = [n, logits, probs, labels_sh, rows, cols] {
        if (!logits->needs_grad) return;
        const T g = n->grad.v[0] / static_cast<T>(rows);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) {
                const T onehot = j == (*labels_sh)[i] ? T(1) : T(0);
                logits->grad.at(i, j) += g * (probs->at(i, j) - onehot);
            }
    };
    return n;
}

// ---- attention and embeddings ----------------------------------------------

/// Scaled dot-product attention with an optional additive mask on the score
/// matrix (use -1e9 on padded key columns). q,k,v are [N,D]; single head.
template <typename T>
Ref<T> attention(Tape<T>& tape, Ref<T> q, Ref<T> k, Ref<T> v,
                 const Tensor<std::type_identity_t<T>>* additive_mask = nullptr,
                 Node<std::type_identity_t<T>>** out_weights = nullptr) {
    require(q->val.rank() == 2 && k->val.rank() == 2 && v->val.rank() == 2, "attention: rank-2");
    require(q->val.dim(1) == k->val.dim(1) && k->val.dim(0) == v->val.dim(0),
            "attention: shape mismatch");
    auto* scores = matmul(tape, q, transpose(tape, k));
    auto* scaled = scale(tape, scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(q->val.dim(1)))));
    Ref<T> pre = scaled;
    if (additive_mask) {
        require(additive_mask->same_shape(scaled->val), "attention: mask shape mismatch");
        pre = add(tape, scaled, tape.constant(*additive_mask));
    }
    auto* weights = softmax_rows(tape, pre);
    if (out_weights) *out_weights = weights;
    return matmul(tape, weights, v);
}

/// Sinusoidal step embedding (constant w.r.t. the graph).
template <typename T>
Tensor<T> sinusoidal_embedding(double t, int dim) {
    require(dim >= 2 && dim % 2 == 0, "time embedding dim must be even");
    Tensor<T> out({dim});
    for (int i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
        out.v[static_cast<std::size_t>(2 * i)] = static_cast<T>(std::sin(t * freq));
        out.v[static_cast<std::size_t>(2 * i + 1)] = static_cast<T>(std::cos(t * freq));
    }
    return out;
}

/// Broadcast-add a [C] vector over the spatial dims of [C,H,W].
template <typename T>
Ref<T> add_channel_bias(Tape<T>& tape, Ref<T> x, Ref<T> bias) {
    require(x->val.rank() == 3 && bias->val.rank() == 1 && bias->val.dim(0) == x->val.dim(0),
            "add_channel_bias: shape mismatch");
    const int c = x->val.dim(0), hw = x->val.dim(1) * x->val.dim(2);
    auto* n = begin_op(tape, {x, bias});
    n->val = x->val;
    for (int ci = 0; ci < c; ++ci) {
        const T b = bias->val.v[static_cast<std::size_t>(ci)];
        for (int i = 0; i < hw; ++i) n->val.v[static_cast<std::size_t>(ci) * hw + i] += b;
    }
    n->backward = [n, x, bias, c, hw] {
        if (x->needs_grad)
            for (std::size_t i = 0; i < n->grad.v.size(); ++i) x->grad.v[i] += n->grad.v[i];
        if (bias->needs_grad)
            for (int ci = 0; ci < c; ++ci) {
                T acc = T(0);
                for (int i = 0; i < hw; ++i) acc += n->grad.v[static_cast<std::size_t>(ci) * hw + i];
                bias->grad.v[static_cast<std::size_t>(ci)] += acc;
            }
    };
    return n;
}

/// Global average pool of [C,H,W] to [C].
template <typename T>
Ref<T> global_avg_pool(Tape<T>& tape, Ref<T> x) {
    require(x->val.rank() == 3, "gap: rank-3 only");
    const int c = x->val.dim(0), hw = x->val.dim(1) * x->val.dim(2);
    auto* n = begin_op(tape, {x});
    n->val = Tensor<T>({c});
    for (int ci = 0; ci < c; ++ci) {
        T acc = T(0);
        for (int i = 0; i < hw; ++i) acc += x->val.v[static_cast<std::size_t>(ci) * hw + i];
        n->val.v[static_cast<std::size_t>(ci)] = acc / static_cast<T>(hw);
    }
    n->backward = [n, x, c, hw] {
        if (!x->needs_grad) return;
        for (int ci = 0; ci < c; ++ci) {
            const T g = n->grad.v[static_cast<std::size_t>(ci)] / static_cast<T>(hw);
            for (int i = 0; i < hw; ++i) x->grad.v[static_cast<std::size_t>(ci) * hw + i] += g;
        }
    };
    return n;
}

/// Weighted mean over rows with constant weights: [N,D] -> [1,D].
template <typename T>
Ref<T> mean_rows_weighted(Tape<T>& tape, Ref<T> x, const std::vector<T>& weights) {
    require(x->val.rank() == 2 && static_cast<int>(weights.size()) == x->val.dim(0),
            "mean_rows: weight count mismatch");
    Tensor<T> w({1, x->val.dim(0)});
    T total = T(0);
    for (const T& v : weights) total += v;
    require(total > T(0), "mean_rows: weights must sum to a positive value");
    for (int i = 0; i < x->val.dim(0); ++i) w.at(0, i) = weights[static_cast<std::size_t>(i)] / total;
    return matmul(tape, tape.constant(std::move(w)), x);
}

template <typename T>
Ref<T> mean_rows(Tape<T>& tape, Ref<T> x) {
    return mean_rows_weighted(tape, x, std::vector<T>(static_cast<std::size_t>(x->val.dim(0)), T(1)));
}

}  // namespace ops
}  // namespace mmbridge::nn
