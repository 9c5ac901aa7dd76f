#include "gestura/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gestura/errors.hpp"

namespace gestura::ad {

namespace {

void same_tape(Var a, Var b) {
    if (a.tape() != b.tape()) throw StateError("operands recorded on different tapes");
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + " expects a matrix, got " + to_string(t.shape()));
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }
std::span<const double> Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Tensor value, bool requires_grad, Backward backward) {
    if (consumed_) throw StateError("tape already consumed by backward()");
    nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(backward)});
    return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value, bool requires_grad) { return push(std::move(value), requires_grad, {}); }

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) {
        if (p.tape() != this) throw StateError("operand recorded on a different tape");
        needs = needs || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw StateError("loss was not recorded on this tape");
    if (consumed_) throw StateError("backward() already ran on this tape");
    if (loss.value().size() != 1) {
        throw ShapeError("backward() needs a scalar loss, got shape " + to_string(loss.value().shape()));
    }
    consumed_ = true;
    for (auto& node : nodes_) {
        if (node.requires_grad) node.grad.assign(node.value.size(), 0.0);
    }
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        auto& node = nodes_[i];
        if (node.requires_grad && node.backward) node.backward(*this, i);
    }
}

Var matmul(Var a, Var b) {
    same_tape(a, b);
    const auto& A = a.value();
    const auto& B = b.value();
    require_matrix(A, "matmul");
    require_matrix(B, "matmul");
    const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    if (B.dim(0) != k) {
        throw ShapeError("matmul shape mismatch: " + to_string(A.shape()) + " x " + to_string(B.shape()));
    }
    Tensor C({m, n});
    const double* pa = A.data().data();
    const double* pb = B.data().data();
    double* pc = C.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = pc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    const auto ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(C), {a, b}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
        const double* g = t.grad(self).data();
        const double* pa = t.value(ia).data().data();
        const double* pb = t.value(ib).data().data();
        if (auto ga = t.grad_buffer(ia); !ga.empty()) {
            // dA = dC * B^T, accumulated row-wise over an explicit B^T so the inner loop is contiguous.
            std::vector<double> bt(k * n);
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = pb[p * n + j];
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = g + i * n;
                double* garow = ga.data() + i * k;
                for (std::size_t j = 0; j < n; ++j) {
                    const double gv = grow[j];
                    const double* btrow = bt.data() + j * k;
                    for (std::size_t p = 0; p < k; ++p) garow[p] += gv * btrow[p];
                }
            }
        }
        if (auto gb = t.grad_buffer(ib); !gb.empty()) {
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = g + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = pa[i * k + p];
                    double* gbrow = gb.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
            }
        }
    });
}

Var transpose(Var a) {
    const auto& A = a.value();
    require_matrix(A, "transpose");
    const std::size_t m = A.dim(0), n = A.dim(1);
    Tensor T({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) T[j * m + i] = A[i * n + j];
    const auto ia = a.id();
    return a.tape()->record(std::move(T), {a}, [ia, m, n](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
}

namespace {

template <typename Fwd, typename BwdA, typename BwdB>
Var elementwise_binary(Var a, Var b, const char* name, Fwd fwd, BwdA da, BwdB db) {
    same_tape(a, b);
    const auto& A = a.value();
    const auto& B = b.value();
    if (A.shape() != B.shape()) {
        throw ShapeError(std::string(name) + " shape mismatch: " + to_string(A.shape()) + " vs " +
                         to_string(B.shape()));
    }
    Tensor out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(A[i], B[i]);
    const auto ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {a, b}, [ia, ib, da, db](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        const auto& A = t.value(ia);
        const auto& B = t.value(ib);
        if (auto ga = t.grad_buffer(ia); !ga.empty())
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += da(g[i], A[i], B[i]);
        if (auto gb = t.grad_buffer(ib); !gb.empty())
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += db(g[i], A[i], B[i]);
    });
}

template <typename Fwd, typename Bwd>
Var elementwise_unary(Var a, Fwd fwd, Bwd bwd) {
    const auto& A = a.value();
    Tensor out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(A[i]);
    const auto ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia, bwd](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        const auto& A = t.value(ia);
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd(A[i]);
    });
}

}  // namespace

Var add(Var a, Var b) {
    return elementwise_binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double g, double, double) { return g; },
        [](double g, double, double) { return g; });
}

Var sub(Var a, Var b) {
    return elementwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double g, double, double) { return g; },
        [](double g, double, double) { return -g; });
}

Var mul(Var a, Var b) {
    return elementwise_binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double g, double, double y) { return g * y; },
        [](double g, double x, double) { return g * x; });
}

Var add_row(Var a, Var row) {
    same_tape(a, row);
    const auto& A = a.value();
    const auto& R = row.value();
    const std::size_t n = A.cols(), m = A.rows();
    if (R.size() != n) {
        throw ShapeError("add_row shape mismatch: " + to_string(A.shape()) + " + " + to_string(R.shape()));
    }
    Tensor out = A;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += R[j];
    const auto ia = a.id(), ir = row.id();
    return a.tape()->record(std::move(out), {a, row}, [ia, ir, m, n](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        if (auto ga = t.grad_buffer(ia); !ga.empty())
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (auto gr = t.grad_buffer(ir); !gr.empty())
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
    });
}

Var mul_row(Var a, Var row) {
    same_tape(a, row);
    const auto& A = a.value();
    const auto& R = row.value();
    const std::size_t n = A.cols(), m = A.rows();
    if (R.size() != n) {
        throw ShapeError("mul_row shape mismatch: " + to_string(A.shape()) + " * " + to_string(R.shape()));
    }
    Tensor out = A;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] *= R[j];
    const auto ia = a.id(), ir = row.id();
    return a.tape()->record(std::move(out), {a, row}, [ia, ir, m, n](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        const auto& A = t.value(ia);
        const auto& R = t.value(ir);
        if (auto ga = t.grad_buffer(ia); !ga.empty())
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * R[j];
        if (auto gr = t.grad_buffer(ir); !gr.empty())
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j] * A[i * n + j];
    });
}

Var scale(Var a, double factor) {
    return elementwise_unary(a, [factor](double x) { return x * factor; }, [factor](double) { return factor; });
}

Var scale_by(Var a, Var s) {
    same_tape(a, s);
    const auto& A = a.value();
    if (s.value().size() != 1) throw ShapeError("scale_by expects a one-element scale, got " + to_string(s.shape()));
    const double c = s.value()[0];
    Tensor out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * c;
    const auto ia = a.id(), is = s.id();
    return a.tape()->record(std::move(out), {a, s}, [ia, is](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        const auto& A = t.value(ia);
        const double c = t.value(is)[0];
        if (auto ga = t.grad_buffer(ia); !ga.empty())
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
        if (auto gs = t.grad_buffer(is); !gs.empty()) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * A[i];
            gs[0] += acc;
        }
    });
}

Var gelu(Var a) {
    return elementwise_unary(
        a,
        [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); },
        [](double x) {
            const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
            return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
        });
}

Var leaky_relu(Var a, double slope) {
    return elementwise_unary(
        a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

namespace {

void softmax_row(const double* x, double* y, std::size_t n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        y[j] = std::exp(x[j] - mx);
        total += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= total;
}

// dx = y * (dy - sum(dy * y)), per row.
void softmax_row_backward(const double* y, const double* g, double* gx, std::size_t n) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
    for (std::size_t j = 0; j < n; ++j) gx[j] += y[j] * (g[j] - dot);
}

}  // namespace

std::vector<double> softmax(std::span<const double> x) {
    std::vector<double> y(x.size());
    if (!x.empty()) softmax_row(x.data(), y.data(), x.size());
    return y;
}

Var softmax(Var a) {
    const auto& A = a.value();
    const std::size_t n = A.cols(), m = A.rows();
    Tensor out(A.shape());
    for (std::size_t i = 0; i < m; ++i) softmax_row(A.data().data() + i * n, out.data().data() + i * n, n);
    const auto ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia, m, n](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        const auto& y = t.value(self);
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < m; ++i)
            softmax_row_backward(y.data().data() + i * n, g.data() + i * n, ga.data() + i * n, n);
    });
}

Var masked_softmax(Var a, const std::vector<std::uint8_t>& mask) {
    const auto& A = a.value();
    require_matrix(A, "masked_softmax");
    const std::size_t m = A.dim(0), n = A.dim(1);
    if (mask.size() != m * n) throw ShapeError("masked_softmax mask size does not match " + to_string(A.shape()));
    Tensor out(A.shape());
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (mask[i * n + j]) {
                mx = std::max(mx, A[i * n + j]);
                any = true;
            }
        }
        if (!any) throw ValidationError("masked_softmax row " + std::to_string(i) + " has no unmasked entry");
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (mask[i * n + j]) {
                out[i * n + j] = std::exp(A[i * n + j] - mx);
                total += out[i * n + j];
            }
        }
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
    }
    const auto ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia, m, n](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        const auto& y = t.value(self);
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < m; ++i)
            softmax_row_backward(y.data().data() + i * n, g.data() + i * n, ga.data() + i * n, n);
    });
}

Var layer_norm(Var a, double eps) {
    const auto& A = a.value();
    const std::size_t n = A.cols(), m = A.rows();
    Tensor out(A.shape());
    std::vector<double> inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* x = A.data().data() + i * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += x[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (x[j] - mu) * inv_std[i];
    }
    const auto ia = a.id();
    return a.tape()->record(std::move(out), {a},
                            [ia, m, n, inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
                                auto g = t.grad(self);
                                const auto& y = t.value(self);
                                auto ga = t.grad_buffer(ia);
                                const double inv_n = 1.0 / static_cast<double>(n);
                                for (std::size_t i = 0; i < m; ++i) {
                                    const double* gr = g.data() + i * n;
                                    const double* yr = y.data().data() + i * n;
                                    double mg = 0.0, mgy = 0.0;
                                    for (std::size_t j = 0; j < n; ++j) {
                                        mg += gr[j];
                                        mgy += gr[j] * yr[j];
                                    }
                                    mg *= inv_n;
                                    mgy *= inv_n;
                                    for (std::size_t j = 0; j < n; ++j)
                                        ga[i * n + j] += inv_std[i] * (gr[j] - mg - yr[j] * mgy);
                                }
                            });
}

Var mean_rows(Var a) {
    const auto& A = a.value();
    const std::size_t n = A.cols(), m = A.rows();
    Tensor out({1, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += A[i * n + j];
    for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
    const auto ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia, m, n](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        auto ga = t.grad_buffer(ia);
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j] * inv;
    });
}

Var col_slice(Var a, std::size_t begin, std::size_t end) {
    const auto& A = a.value();
    const std::size_t n = A.cols(), m = A.rows();
    if (begin >= end || end > n) {
        throw ShapeError("col_slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for " +
                         to_string(A.shape()));
    }
    const std::size_t w = end - begin;
    Tensor out({m, w});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out[i * w + j] = A[i * n + begin + j];
    const auto ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia, m, n, w, begin](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) ga[i * n + begin + j] += g[i * w + j];
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols needs at least one part");
    const std::size_t m = parts[0].value().rows();
    std::vector<std::size_t> widths;
    std::vector<std::size_t> ids;
    std::size_t n = 0;
    for (const auto& p : parts) {
        same_tape(parts[0], p);
        if (p.value().rows() != m) throw ShapeError("concat_cols row mismatch at " + to_string(p.shape()));
        widths.push_back(p.value().cols());
        ids.push_back(p.id());
        n += p.value().cols();
    }
    Tensor out({m, n});
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& P = parts[k].value();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) out[i * n + off + j] = P[i * widths[k] + j];
        off += widths[k];
    }
    return parts[0].tape()->record(
        std::move(out), parts, [m, n, widths = std::move(widths), ids = std::move(ids)](Tape& t, std::size_t self) {
            auto g = t.grad(self);
            std::size_t off = 0;
            for (std::size_t k = 0; k < ids.size(); ++k) {
                if (auto gp = t.grad_buffer(ids[k]); !gp.empty())
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < widths[k]; ++j) gp[i * widths[k] + j] += g[i * n + off + j];
                off += widths[k];
            }
        });
}

Var outer_add(Var col, Var row) {
    same_tape(col, row);
    const auto& C = col.value();
    const auto& R = row.value();
    const std::size_t m = C.size(), n = R.size();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = C[i] + R[j];
    const auto ic = col.id(), ir = row.id();
    return col.tape()->record(std::move(out), {col, row}, [ic, ir, m, n](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        if (auto gc = t.grad_buffer(ic); !gc.empty())
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gc[i] += g[i * n + j];
        if (auto gr = t.grad_buffer(ir); !gr.empty())
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
    });
}

Var conv1d(Var x, Var kernel, std::size_t dilation, std::size_t pad_left) {
    same_tape(x, kernel);
    if (dilation < 1) throw ParameterError("conv1d dilation must be >= 1");
    const auto& X = x.value();
    const auto& W = kernel.value();
    require_matrix(X, "conv1d");
    if (W.rank() != 3 || W.dim(1) != X.dim(1)) {
        throw ShapeError("conv1d kernel " + to_string(W.shape()) + " incompatible with input " + to_string(X.shape()));
    }
    const std::size_t T = X.dim(0), cin = X.dim(1), K = W.dim(0), cout = W.dim(2);
    Tensor out({T, cout});
    for (std::size_t t = 0; t < T; ++t) {
        double* orow = out.data().data() + t * cout;
        for (std::size_t k = 0; k < K; ++k) {
            const auto s = static_cast<std::ptrdiff_t>(t + k * dilation) - static_cast<std::ptrdiff_t>(pad_left);
            if (s < 0 || s >= static_cast<std::ptrdiff_t>(T)) continue;
            const double* xrow = X.data().data() + static_cast<std::size_t>(s) * cin;
            for (std::size_t i = 0; i < cin; ++i) {
                const double xv = xrow[i];
                const double* wrow = W.data().data() + (k * cin + i) * cout;
                for (std::size_t o = 0; o < cout; ++o) orow[o] += xv * wrow[o];
            }
        }
    }
    const auto ix = x.id(), iw = kernel.id();
    return x.tape()->record(std::move(out), {x, kernel}, [=](Tape& tp, std::size_t self) {
        auto g = tp.grad(self);
        const auto& X = tp.value(ix);
        const auto& W = tp.value(iw);
        auto gx = tp.grad_buffer(ix);
        auto gw = tp.grad_buffer(iw);
        // Per-tap transposed kernel [K x Cout x Cin] for a contiguous input-gradient loop.
        std::vector<double> wt;
        if (!gx.empty()) {
            wt.resize(K * cout * cin);
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t i = 0; i < cin; ++i)
                    for (std::size_t o = 0; o < cout; ++o)
                        wt[(k * cout + o) * cin + i] = W[(k * cin + i) * cout + o];
        }
        for (std::size_t t = 0; t < T; ++t) {
            const double* grow = g.data() + t * cout;
            for (std::size_t k = 0; k < K; ++k) {
                const auto s = static_cast<std::ptrdiff_t>(t + k * dilation) - static_cast<std::ptrdiff_t>(pad_left);
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(T)) continue;
                const auto su = static_cast<std::size_t>(s);
                if (!gx.empty()) {
                    double* gxrow = gx.data() + su * cin;
                    for (std::size_t o = 0; o < cout; ++o) {
                        const double gv = grow[o];
                        const double* wtrow = wt.data() + (k * cout + o) * cin;
                        for (std::size_t i = 0; i < cin; ++i) gxrow[i] += gv * wtrow[i];
                    }
                }
                if (!gw.empty()) {
                    for (std::size_t i = 0; i < cin; ++i) {
                        const double xv = X[su * cin + i];
                        double* gwrow = gw.data() + (k * cin + i) * cout;
                        for (std::size_t o = 0; o < cout; ++o) gwrow[o] += xv * grow[o];
                    }
                }
            }
        }
    });
}

Var conv1d_dilated(Var x, Var kernel, std::size_t dilation) {
    if (dilation < 1) throw ParameterError("conv1d_dilated dilation must be >= 1");
    const auto& W = kernel.value();
    if (W.rank() != 3) throw ShapeError("conv1d_dilated kernel must be [K x Cin x Cout], got " + to_string(W.shape()));
    return conv1d(x, kernel, dilation, (W.dim(0) - 1) * dilation);
}

Var sum(Var a) {
    const auto& A = a.value();
    double total = 0.0;
    for (double v : A.data()) total += v;
    const auto ia = a.id();
    return a.tape()->record(Tensor::scalar(total), {a}, [ia](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (auto& v : t.grad_buffer(ia)) v += g;
    });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var element(Var a, std::size_t index) {
    const auto& A = a.value();
    if (index >= A.size()) throw ShapeError("element index out of range for " + to_string(A.shape()));
    const auto ia = a.id();
    return a.tape()->record(Tensor::scalar(A[index]), {a}, [ia, index](Tape& t, std::size_t self) {
        t.grad_buffer(ia)[index] += t.grad(self)[0];
    });
}

Var reshape(Var a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    const auto ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
        auto g = t.grad(self);
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var cross_entropy(Var logits, std::size_t label, double weight) {
    const auto& L = logits.value();
    const std::size_t n = L.size();
    if (label >= n) throw ShapeError("cross_entropy label " + std::to_string(label) + " out of range");
    auto p = softmax(L.data());
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : L.data()) mx = std::max(mx, v);
    double total = 0.0;
    for (double v : L.data()) total += std::exp(v - mx);
    const double loss = weight * (mx + std::log(total) - L[label]);
    const auto il = logits.id();
    return logits.tape()->record(Tensor::scalar(loss), {logits},
                                 [il, label, weight, p = std::move(p)](Tape& t, std::size_t self) {
                                     const double g = t.grad(self)[0] * weight;
                                     auto gl = t.grad_buffer(il);
                                     for (std::size_t j = 0; j < p.size(); ++j)
                                         gl[j] += g * (p[j] - (j == label ? 1.0 : 0.0));
                                 });
}

Var mse(Var a, const Tensor& target) {
    const auto& A = a.value();
    if (A.size() != target.size()) {
        throw ShapeError("mse shape mismatch: " + to_string(A.shape()) + " vs " + to_string(target.shape()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) total += (A[i] - target[i]) * (A[i] - target[i]);
    const double inv = 1.0 / static_cast<double>(A.size());
    const auto ia = a.id();
    return a.tape()->record(Tensor::scalar(total * inv), {a}, [ia, inv, target](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        const auto& A = t.value(ia);
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * 2.0 * inv * (A[i] - target[i]);
    });
}

}  // namespace gestura::ad
