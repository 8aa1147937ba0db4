#include "summ/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "summ/error.hpp"

namespace summ {

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string("ShapeMismatch in ") + op + ": " + a.shape_str() + " vs " +
                     b.shape_str());
}

}  // namespace

int Tape::check(Var v) const {
    if (v.id < 0 || std::size_t(v.id) >= nodes_.size())
        throw ShapeError("IndexOutOfRange: invalid tape var " + std::to_string(v.id));
    return v.id;
}

Var Tape::push(Tensor value, std::function<void(Tape&)> back) {
    const int id = int(nodes_.size());
    nodes_.push_back(Node{std::move(value), Tensor(), std::move(back)});
    return Var{id};
}

Var Tape::leaf(Tensor value) { return push(std::move(value), {}); }

Var Tape::matmul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols() != B.rows()) shape_fail("matmul", A, B);
    const int r = A.rows(), k = A.cols(), c = B.cols();
    Tensor C(r, c);
    for (int i = 0; i < r; ++i) {
        double* crow = C.data() + std::size_t(i) * c;
        const double* arow = A.data() + std::size_t(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = B.data() + std::size_t(kk) * c;
            for (int j = 0; j < c; ++j) crow[j] += av * brow[j];
        }
    }
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, b, out, r, k, c](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        const Tensor& A2 = t.value(a);
        const Tensor& B2 = t.value(b);
        Tensor& dA = t.grad_mut(a);
        Tensor& dB = t.grad_mut(b);
        // dA += G * B^T
        for (int i = 0; i < r; ++i) {
            const double* grow = G.data() + std::size_t(i) * c;
            double* darow = dA.data() + std::size_t(i) * k;
            for (int kk = 0; kk < k; ++kk) {
                const double* brow = B2.data() + std::size_t(kk) * c;
                double acc = 0.0;
                for (int j = 0; j < c; ++j) acc += grow[j] * brow[j];
                darow[kk] += acc;
            }
        }
        // dB += A^T * G
        for (int i = 0; i < r; ++i) {
            const double* arow = A2.data() + std::size_t(i) * k;
            const double* grow = G.data() + std::size_t(i) * c;
            for (int kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                if (av == 0.0) continue;
                double* dbrow = dB.data() + std::size_t(kk) * c;
                for (int j = 0; j < c; ++j) dbrow[j] += av * grow[j];
            }
        }
    });
}

Var Tape::add(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    const bool broadcast = B.rows() == 1 && A.rows() > 1 && A.cols() == B.cols();
    if (!broadcast && !A.same_shape(B)) shape_fail("add", A, B);
    Tensor C = A;
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) C(i, j) += B(broadcast ? 0 : i, j);
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, b, out, broadcast](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dA = t.grad_mut(a);
        Tensor& dB = t.grad_mut(b);
        for (std::size_t i = 0; i < G.size(); ++i) dA.data()[i] += G.data()[i];
        if (broadcast) {
            for (int i = 0; i < G.rows(); ++i)
                for (int j = 0; j < G.cols(); ++j) dB(0, j) += G(i, j);
        } else {
            for (std::size_t i = 0; i < G.size(); ++i) dB.data()[i] += G.data()[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    const bool broadcast = B.rows() == 1 && A.rows() > 1 && A.cols() == B.cols();
    if (!broadcast && !A.same_shape(B)) shape_fail("mul", A, B);
    Tensor C = A;
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) C(i, j) *= B(broadcast ? 0 : i, j);
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, b, out, broadcast](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        const Tensor& A2 = t.value(a);
        const Tensor& B2 = t.value(b);
        Tensor& dA = t.grad_mut(a);
        Tensor& dB = t.grad_mut(b);
        for (int i = 0; i < G.rows(); ++i)
            for (int j = 0; j < G.cols(); ++j) {
                const int bi = broadcast ? 0 : i;
                dA(i, j) += G(i, j) * B2(bi, j);
                dB(bi, j) += G(i, j) * A2(i, j);
            }
    });
}

Var Tape::affine(Var a, double k, double c) {
    Tensor C = value(a);
    for (double& v : C.flat()) v = k * v + c;
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, out, k](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dA = t.grad_mut(a);
        for (std::size_t i = 0; i < G.size(); ++i) dA.data()[i] += k * G.data()[i];
    });
}

Var Tape::scale_by(Var s, Var a) {
    const Tensor& S = value(s);
    if (S.rows() != 1 || S.cols() != 1) shape_fail("scale_by", S, value(a));
    const double sv = S(0, 0);
    Tensor C = value(a);
    for (double& v : C.flat()) v *= sv;
    const Var out{int(nodes_.size())};
    return push(std::move(C), [s, a, out, sv](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        const Tensor& A2 = t.value(a);
        Tensor& dS = t.grad_mut(s);
        Tensor& dA = t.grad_mut(a);
        double acc = 0.0;
        for (std::size_t i = 0; i < G.size(); ++i) {
            acc += G.data()[i] * A2.data()[i];
            dA.data()[i] += sv * G.data()[i];
        }
        dS(0, 0) += acc;
    });
}

Var Tape::sigmoid(Var a) {
    Tensor C = value(a);
    for (double& v : C.flat()) v = 1.0 / (1.0 + std::exp(-v));
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, out](Tape& t) {
        const Tensor& Y = t.nodes_[out.id].value;
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dA = t.grad_mut(a);
        for (std::size_t i = 0; i < G.size(); ++i) {
            const double y = Y.data()[i];
            dA.data()[i] += G.data()[i] * y * (1.0 - y);
        }
    });
}

Var Tape::tanh(Var a) {
    Tensor C = value(a);
    for (double& v : C.flat()) v = std::tanh(v);
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, out](Tape& t) {
        const Tensor& Y = t.nodes_[out.id].value;
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dA = t.grad_mut(a);
        for (std::size_t i = 0; i < G.size(); ++i) {
            const double y = Y.data()[i];
            dA.data()[i] += G.data()[i] * (1.0 - y * y);
        }
    });
}

Var Tape::softmax_rows(Var a) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), A.cols());
    for (int i = 0; i < A.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < A.cols(); ++j) mx = std::max(mx, A(i, j));
        double sum = 0.0;
        for (int j = 0; j < A.cols(); ++j) {
            const double e = std::exp(A(i, j) - mx);
            C(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < A.cols(); ++j) C(i, j) /= sum;
    }
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, out](Tape& t) {
        const Tensor& Y = t.nodes_[out.id].value;
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dA = t.grad_mut(a);
        for (int i = 0; i < Y.rows(); ++i) {
            double dot = 0.0;
            for (int j = 0; j < Y.cols(); ++j) dot += G(i, j) * Y(i, j);
            for (int j = 0; j < Y.cols(); ++j) dA(i, j) += Y(i, j) * (G(i, j) - dot);
        }
    });
}

Var Tape::concat_cols(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rows() != B.rows()) shape_fail("concat_cols", A, B);
    Tensor C(A.rows(), A.cols() + B.cols());
    for (int i = 0; i < A.rows(); ++i) {
        for (int j = 0; j < A.cols(); ++j) C(i, j) = A(i, j);
        for (int j = 0; j < B.cols(); ++j) C(i, A.cols() + j) = B(i, j);
    }
    const int ac = A.cols();
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, b, out, ac](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dA = t.grad_mut(a);
        Tensor& dB = t.grad_mut(b);
        for (int i = 0; i < G.rows(); ++i) {
            for (int j = 0; j < dA.cols(); ++j) dA(i, j) += G(i, j);
            for (int j = 0; j < dB.cols(); ++j) dB(i, j) += G(i, ac + j);
        }
    });
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ShapeError("ShapeMismatch in stack_rows: no rows");
    const int c = value(rows[0]).cols();
    Tensor C(int(rows.size()), c);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Tensor& R = value(rows[i]);
        if (R.rows() != 1 || R.cols() != c) shape_fail("stack_rows", value(rows[0]), R);
        for (int j = 0; j < c; ++j) C(int(i), j) = R(0, j);
    }
    const Var out{int(nodes_.size())};
    return push(std::move(C), [rows, out](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            Tensor& dR = t.grad_mut(rows[i]);
            for (int j = 0; j < G.cols(); ++j) dR(0, j) += G(int(i), j);
        }
    });
}

Var Tape::transpose(Var a) {
    const Tensor& A = value(a);
    Tensor C(A.cols(), A.rows());
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) C(j, i) = A(i, j);
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, out](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dA = t.grad_mut(a);
        for (int i = 0; i < dA.rows(); ++i)
            for (int j = 0; j < dA.cols(); ++j) dA(i, j) += G(j, i);
    });
}

Var Tape::max_pool_rows(Var a) {
    const Tensor& A = value(a);
    if (A.rows() < 1) shape_fail("max_pool_rows", A, A);
    Tensor C(1, A.cols());
    std::vector<int> argmax(std::size_t(A.cols()), 0);
    for (int j = 0; j < A.cols(); ++j) {
        double best = A(0, j);
        int bi = 0;
        for (int i = 1; i < A.rows(); ++i) {
            if (A(i, j) > best) {
                best = A(i, j);
                bi = i;
            }
        }
        C(0, j) = best;
        argmax[std::size_t(j)] = bi;
    }
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, out, argmax = std::move(argmax)](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dA = t.grad_mut(a);
        for (int j = 0; j < G.cols(); ++j) dA(argmax[std::size_t(j)], j) += G(0, j);
    });
}

Var Tape::take_rows(Var table, std::vector<int> ids) {
    const Tensor& T = value(table);
    for (int id : ids)
        if (id < 0 || id >= T.rows())
            throw ShapeError("IndexOutOfRange: row " + std::to_string(id) + " of " +
                             T.shape_str());
    Tensor C(int(ids.size()), T.cols());
    for (std::size_t k = 0; k < ids.size(); ++k)
        for (int j = 0; j < T.cols(); ++j) C(int(k), j) = T(ids[k], j);
    const Var out{int(nodes_.size())};
    return push(std::move(C), [table, out, ids = std::move(ids)](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dT = t.grad_mut(table);
        for (std::size_t k = 0; k < ids.size(); ++k)
            for (int j = 0; j < G.cols(); ++j) dT(ids[k], j) += G(int(k), j);
    });
}

Var Tape::scatter_add_cols(Var a, std::vector<int> ids, int width) {
    const Tensor& A = value(a);
    if (A.rows() != 1 || int(ids.size()) != A.cols())
        throw ShapeError("ShapeMismatch in scatter_add_cols: " + A.shape_str() + " with " +
                         std::to_string(ids.size()) + " ids");
    for (int id : ids)
        if (id < 0 || id >= width)
            throw ShapeError("IndexOutOfRange: column " + std::to_string(id) + " of width " +
                             std::to_string(width));
    Tensor C(1, width);
    for (std::size_t k = 0; k < ids.size(); ++k) C(0, ids[k]) += A(0, int(k));
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, out, ids = std::move(ids)](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dA = t.grad_mut(a);
        for (std::size_t k = 0; k < ids.size(); ++k) dA(0, int(k)) += G(0, ids[k]);
    });
}

Var Tape::pad_cols(Var a, int extra) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), A.cols() + extra);
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) C(i, j) = A(i, j);
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, out](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        Tensor& dA = t.grad_mut(a);
        for (int i = 0; i < dA.rows(); ++i)
            for (int j = 0; j < dA.cols(); ++j) dA(i, j) += G(i, j);
    });
}

Var Tape::at_col(Var a, int idx) {
    const Tensor& A = value(a);
    if (A.rows() != 1 || idx < 0 || idx >= A.cols())
        throw ShapeError("IndexOutOfRange: column " + std::to_string(idx) + " of " +
                         A.shape_str());
    Tensor C(1, 1);
    C(0, 0) = A(0, idx);
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, out, idx](Tape& t) {
        Tensor& dA = t.grad_mut(a);
        dA(0, idx) += t.nodes_[out.id].grad(0, 0);
    });
}

Var Tape::minimum(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) shape_fail("minimum", A, B);
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.data()[i] = std::min(A.data()[i], B.data()[i]);
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, b, out](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        const Tensor& A2 = t.value(a);
        const Tensor& B2 = t.value(b);
        Tensor& dA = t.grad_mut(a);
        Tensor& dB = t.grad_mut(b);
        for (std::size_t i = 0; i < G.size(); ++i) {
            if (A2.data()[i] <= B2.data()[i])
                dA.data()[i] += G.data()[i];
            else
                dB.data()[i] += G.data()[i];
        }
    });
}

Var Tape::log_floored(Var a, double floor) {
    const Tensor& A = value(a);
    Tensor C = A;
    for (double& v : C.flat()) v = std::log(std::max(v, floor));
    const Var out{int(nodes_.size())};
    return push(std::move(C), [a, out, floor](Tape& t) {
        const Tensor& G = t.nodes_[out.id].grad;
        const Tensor& A2 = t.value(a);
        Tensor& dA = t.grad_mut(a);
        for (std::size_t i = 0; i < G.size(); ++i)
            if (A2.data()[i] > floor) dA.data()[i] += G.data()[i] / A2.data()[i];
    });
}

Var Tape::sum_all(Var a) {
    const Tensor& A = value(a);
    double s = 0.0;
    for (double v : A.flat()) s += v;
    const Var out{int(nodes_.size())};
    return push(Tensor::scalar_of(s), [a, out](Tape& t) {
        const double g = t.nodes_[out.id].grad(0, 0);
        Tensor& dA = t.grad_mut(a);
        for (double& v : dA.flat()) v += g;
    });
}

void Tape::backward(Var loss) {
    const int lid = check(loss);
    const Tensor& L = nodes_[lid].value;
    if (L.rows() != 1 || L.cols() != 1)
        throw ShapeError("NotScalarLoss: backward needs a [1x1] loss, got " + L.shape_str());
    for (Node& n : nodes_) {
        n.grad = Tensor(n.value.rows(), n.value.cols());
    }
    nodes_[lid].grad(0, 0) = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

void Tape::truncate(std::size_t mark) {
    if (mark < nodes_.size()) nodes_.resize(mark);
}

GradCheckReport grad_check(const std::function<double()>& eval,
                           const std::function<std::vector<Tensor>()>& analytic,
                           const std::vector<std::pair<std::string, Tensor*>>& params,
                           double eps, double tol) {
    GradCheckReport rep;
    const std::vector<Tensor> grads = analytic();
    if (grads.size() != params.size())
        throw ShapeError("ShapeMismatch in grad_check: " + std::to_string(grads.size()) +
                         " gradients for " + std::to_string(params.size()) + " parameters");
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = *params[p].second;
        if (!theta.same_shape(grads[p]))
            throw ShapeError("ShapeMismatch in grad_check for " + params[p].first + ": " +
                             theta.shape_str() + " vs " + grads[p].shape_str());
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double saved = theta.data()[i];
            theta.data()[i] = saved + eps;
            const double fp = eval();
            theta.data()[i] = saved - eps;
            const double fm = eval();
            theta.data()[i] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("NonFinite: objective not finite during grad_check at " +
                                   params[p].first + "[" + std::to_string(i) + "]");
            const double fd = (fp - fm) / (2.0 * eps);
            const double an = grads[p].data()[i];
            const double rel =
                std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_name = params[p].first;
                rep.worst_index = i;
                rep.worst_analytic = an;
                rep.worst_numeric = fd;
            }
        }
    }
    rep.passed = rep.max_rel_err < tol;
    return rep;
}

}  // namespace summ
