#include "meeqa/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "meeqa/errors.hpp"

namespace meeqa::ad {

namespace {

constexpr double kMaskedLogit = -1e30;

NodePtr make_node(Matrix value, std::vector<NodePtr> parents, const char* op) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->op = op;
    for (const auto& p : n->parents)
        if (p->needs_grad) n->needs_grad = true;
    return n;
}

void check_shape(bool ok, const char* op) {
    if (!ok) throw NumericError(std::string("shape mismatch in ") + op);
}

// C += A * B
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    const int32_t n = a.rows, k = a.cols, m = b.cols;
    for (int32_t i = 0; i < n; ++i) {
        const double* arow = a.a.data() + static_cast<size_t>(i) * k;
        double* crow = c.a.data() + static_cast<size_t>(i) * m;
        for (int32_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.a.data() + static_cast<size_t>(p) * m;
            for (int32_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A^T * B
void matmul_at_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    const int32_t n = a.rows, k = a.cols, m = b.cols;
    for (int32_t i = 0; i < n; ++i) {
        const double* arow = a.a.data() + static_cast<size_t>(i) * k;
        const double* brow = b.a.data() + static_cast<size_t>(i) * m;
        for (int32_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c.a.data() + static_cast<size_t>(p) * m;
            for (int32_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A * B^T
void matmul_bt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    const int32_t n = a.rows, k = a.cols, m = b.rows;
    for (int32_t i = 0; i < n; ++i) {
        const double* arow = a.a.data() + static_cast<size_t>(i) * k;
        double* crow = c.a.data() + static_cast<size_t>(i) * m;
        for (int32_t j = 0; j < m; ++j) {
            const double* brow = b.a.data() + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int32_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

} // namespace

NodePtr constant(Matrix value) { return make_node(std::move(value), {}, "constant"); }

NodePtr parameter(Matrix value) {
    auto n = make_node(std::move(value), {}, "parameter");
    n->needs_grad = true;
    return n;
}

NodePtr transpose(const NodePtr& x) {
    Matrix v(x->value.cols, x->value.rows);
    for (int32_t i = 0; i < x->value.rows; ++i)
        for (int32_t j = 0; j < x->value.cols; ++j) v.at(j, i) = x->value.at(i, j);
    auto n = make_node(std::move(v), {x}, "transpose");
    Node* xp = x.get();
    n->pull = [xp](Node& self) {
        for (int32_t i = 0; i < xp->value.rows; ++i)
            for (int32_t j = 0; j < xp->value.cols; ++j)
                xp->grad.at(i, j) += self.grad.at(j, i);
    };
    return n;
}

NodePtr slice_rows(const NodePtr& x, int32_t r0, int32_t r1) {
    check_shape(r0 >= 0 && r1 <= x->value.rows && r0 < r1, "slice_rows");
    Matrix v(r1 - r0, x->value.cols);
    for (int32_t i = r0; i < r1; ++i)
        for (int32_t j = 0; j < x->value.cols; ++j) v.at(i - r0, j) = x->value.at(i, j);
    auto n = make_node(std::move(v), {x}, "slice_rows");
    Node* xp = x.get();
    n->pull = [xp, r0](Node& self) {
        for (int32_t i = 0; i < self.value.rows; ++i)
            for (int32_t j = 0; j < self.value.cols; ++j)
                xp->grad.at(i + r0, j) += self.grad.at(i, j);
    };
    return n;
}

NodePtr slice_cols(const NodePtr& x, int32_t c0, int32_t c1) {
    check_shape(c0 >= 0 && c1 <= x->value.cols && c0 < c1, "slice_cols");
    Matrix v(x->value.rows, c1 - c0);
    for (int32_t i = 0; i < x->value.rows; ++i)
        for (int32_t j = c0; j < c1; ++j) v.at(i, j - c0) = x->value.at(i, j);
    auto n = make_node(std::move(v), {x}, "slice_cols");
    Node* xp = x.get();
    n->pull = [xp, c0](Node& self) {
        for (int32_t i = 0; i < self.value.rows; ++i)
            for (int32_t j = 0; j < self.value.cols; ++j)
                xp->grad.at(i, j + c0) += self.grad.at(i, j);
    };
    return n;
}

NodePtr concat_cols(const std::vector<NodePtr>& xs) {
    check_shape(!xs.empty(), "concat_cols");
    int32_t rows = xs[0]->value.rows;
    int32_t cols = 0;
    for (const auto& x : xs) {
        check_shape(x->value.rows == rows, "concat_cols");
        cols += x->value.cols;
    }
    Matrix v(rows, cols);
    int32_t off = 0;
    for (const auto& x : xs) {
        for (int32_t i = 0; i < rows; ++i)
            for (int32_t j = 0; j < x->value.cols; ++j)
                v.at(i, off + j) = x->value.at(i, j);
        off += x->value.cols;
    }
    auto n = make_node(std::move(v), xs, "concat_cols");
    n->pull = [](Node& self) {
        int32_t off = 0;
        for (auto& p : self.parents) {
            for (int32_t i = 0; i < p->value.rows; ++i)
                for (int32_t j = 0; j < p->value.cols; ++j)
                    p->grad.at(i, j) += self.grad.at(i, off + j);
            off += p->value.cols;
        }
    };
    return n;
}

NodePtr gather_rows(const NodePtr& table, const std::vector<int32_t>& ids) {
    Matrix v(static_cast<int32_t>(ids.size()), table->value.cols);
    for (size_t i = 0; i < ids.size(); ++i) {
        check_shape(ids[i] >= 0 && ids[i] < table->value.rows, "gather_rows");
        for (int32_t j = 0; j < table->value.cols; ++j)
            v.at(static_cast<int32_t>(i), j) = table->value.at(ids[i], j);
    }
    auto n = make_node(std::move(v), {table}, "gather_rows");
    Node* tp = table.get();
    auto ids_copy = ids;
    n->pull = [tp, ids_copy](Node& self) {
        for (size_t i = 0; i < ids_copy.size(); ++i)
            for (int32_t j = 0; j < self.value.cols; ++j)
                tp->grad.at(ids_copy[i], j) += self.grad.at(static_cast<int32_t>(i), j);
    };
    return n;
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    check_shape(a->value.same_shape(b->value), "add");
    Matrix v = a->value;
    for (size_t i = 0; i < v.size(); ++i) v.a[i] += b->value.a[i];
    auto n = make_node(std::move(v), {a, b}, "add");
    Node* ap = a.get();
    Node* bp = b.get();
    n->pull = [ap, bp](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) {
            ap->grad.a[i] += self.grad.a[i];
            bp->grad.a[i] += self.grad.a[i];
        }
    };
    return n;
}

NodePtr add_row(const NodePtr& a, const NodePtr& row) {
    check_shape(row->value.rows == 1 && row->value.cols == a->value.cols, "add_row");
    Matrix v = a->value;
    for (int32_t i = 0; i < v.rows; ++i)
        for (int32_t j = 0; j < v.cols; ++j) v.at(i, j) += row->value.a[static_cast<size_t>(j)];
    auto n = make_node(std::move(v), {a, row}, "add_row");
    Node* ap = a.get();
    Node* rp = row.get();
    n->pull = [ap, rp](Node& self) {
        for (int32_t i = 0; i < self.value.rows; ++i)
            for (int32_t j = 0; j < self.value.cols; ++j) {
                ap->grad.at(i, j) += self.grad.at(i, j);
                rp->grad.a[static_cast<size_t>(j)] += self.grad.at(i, j);
            }
    };
    return n;
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    check_shape(a->value.same_shape(b->value), "mul");
    Matrix v = a->value;
    for (size_t i = 0; i < v.size(); ++i) v.a[i] *= b->value.a[i];
    auto n = make_node(std::move(v), {a, b}, "mul");
    Node* ap = a.get();
    Node* bp = b.get();
    n->pull = [ap, bp](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) {
            ap->grad.a[i] += self.grad.a[i] * bp->value.a[i];
            bp->grad.a[i] += self.grad.a[i] * ap->value.a[i];
        }
    };
    return n;
}

NodePtr scale(const NodePtr& a, double s) {
    Matrix v = a->value;
    for (double& x : v.a) x *= s;
    auto n = make_node(std::move(v), {a}, "scale");
    Node* ap = a.get();
    n->pull = [ap, s](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) ap->grad.a[i] += s * self.grad.a[i];
    };
    return n;
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    check_shape(a->value.cols == b->value.rows, "matmul");
    Matrix v(a->value.rows, b->value.cols);
    matmul_acc(a->value, b->value, v);
    auto n = make_node(std::move(v), {a, b}, "matmul");
    Node* ap = a.get();
    Node* bp = b.get();
    n->pull = [ap, bp](Node& self) {
        matmul_bt_acc(self.grad, bp->value, ap->grad); // dA += dC * B^T
        matmul_at_acc(ap->value, self.grad, bp->grad); // dB += A^T * dC
    };
    return n;
}

NodePtr pick(const NodePtr& a, int32_t i, int32_t j) {
    check_shape(i >= 0 && i < a->value.rows && j >= 0 && j < a->value.cols, "pick");
    auto n = make_node(Matrix::scalar(a->value.at(i, j)), {a}, "pick");
    Node* ap = a.get();
    n->pull = [ap, i, j](Node& self) { ap->grad.at(i, j) += self.grad.a[0]; };
    return n;
}

NodePtr exp_elem(const NodePtr& a) {
    Matrix v = a->value;
    for (double& x : v.a) x = std::exp(x);
    auto n = make_node(std::move(v), {a}, "exp");
    Node* ap = a.get();
    n->pull = [ap](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i)
            ap->grad.a[i] += self.grad.a[i] * self.value.a[i];
    };
    return n;
}

NodePtr gelu(const NodePtr& x) {
    static const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
    static const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
    Matrix v = x->value;
    for (double& t : v.a) t = 0.5 * t * (1.0 + std::erf(t * kInvSqrt2));
    auto n = make_node(std::move(v), {x}, "gelu");
    Node* xp = x.get();
    n->pull = [xp](Node& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) {
            double t = xp->value.a[i];
            double cdf = 0.5 * (1.0 + std::erf(t * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * t * t);
            xp->grad.a[i] += self.grad.a[i] * (cdf + t * pdf);
        }
    };
    return n;
}

NodePtr layer_norm(const NodePtr& x, const NodePtr& gain, const NodePtr& bias, double eps) {
    check_shape(gain->value.rows == 1 && gain->value.cols == x->value.cols, "layer_norm");
    check_shape(bias->value.rows == 1 && bias->value.cols == x->value.cols, "layer_norm");
    const int32_t rows = x->value.rows, cols = x->value.cols;
    Matrix v(rows, cols);
    Matrix xhat(rows, cols);
    std::vector<double> inv_sigma(static_cast<size_t>(rows));
    for (int32_t i = 0; i < rows; ++i) {
        double mean = 0.0;
        for (int32_t j = 0; j < cols; ++j) mean += x->value.at(i, j);
        mean /= cols;
        double var = 0.0;
        for (int32_t j = 0; j < cols; ++j) {
            double d = x->value.at(i, j) - mean;
            var += d * d;
        }
        var /= cols;
        double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[static_cast<size_t>(i)] = is;
        for (int32_t j = 0; j < cols; ++j) {
            double h = (x->value.at(i, j) - mean) * is;
            xhat.at(i, j) = h;
            v.at(i, j) = h * gain->value.a[static_cast<size_t>(j)] +
                         bias->value.a[static_cast<size_t>(j)];
        }
    }
    auto n = make_node(std::move(v), {x, gain, bias}, "layer_norm");
    Node* xp = x.get();
    Node* gp = gain.get();
    Node* bp = bias.get();
    auto xhat_s = std::make_shared<Matrix>(std::move(xhat));
    auto is_s = std::make_shared<std::vector<double>>(std::move(inv_sigma));
    n->pull = [xp, gp, bp, xhat_s, is_s, cols](Node& self) {
        const Matrix& xh = *xhat_s;
        for (int32_t i = 0; i < self.value.rows; ++i) {
            double sum_dy = 0.0, sum_dyx = 0.0;
            for (int32_t j = 0; j < cols; ++j) {
                double dyg = self.grad.at(i, j) * gp->value.a[static_cast<size_t>(j)];
                sum_dy += dyg;
                sum_dyx += dyg * xh.at(i, j);
                gp->grad.a[static_cast<size_t>(j)] += self.grad.at(i, j) * xh.at(i, j);
                bp->grad.a[static_cast<size_t>(j)] += self.grad.at(i, j);
            }
            double is = (*is_s)[static_cast<size_t>(i)];
            for (int32_t j = 0; j < cols; ++j) {
                double dyg = self.grad.at(i, j) * gp->value.a[static_cast<size_t>(j)];
                xp->grad.at(i, j) +=
                    is * (dyg - sum_dy / cols - xh.at(i, j) * sum_dyx / cols);
            }
        }
    };
    return n;
}

NodePtr softmax_rows(const NodePtr& x) {
    Matrix v = x->value;
    for (int32_t i = 0; i < v.rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int32_t j = 0; j < v.cols; ++j) mx = std::max(mx, v.at(i, j));
        double sum = 0.0;
        for (int32_t j = 0; j < v.cols; ++j) {
            v.at(i, j) = std::exp(v.at(i, j) - mx);
            sum += v.at(i, j);
        }
        for (int32_t j = 0; j < v.cols; ++j) v.at(i, j) /= sum;
    }
    auto n = make_node(std::move(v), {x}, "softmax_rows");
    Node* xp = x.get();
    n->pull = [xp](Node& self) {
        for (int32_t i = 0; i < self.value.rows; ++i) {
            double dot = 0.0;
            for (int32_t j = 0; j < self.value.cols; ++j)
                dot += self.grad.at(i, j) * self.value.at(i, j);
            for (int32_t j = 0; j < self.value.cols; ++j)
                xp->grad.at(i, j) += self.value.at(i, j) * (self.grad.at(i, j) - dot);
        }
    };
    return n;
}

NodePtr masked_log_softmax(const NodePtr& x, const std::vector<uint8_t>& valid) {
    check_shape(x->value.cols == 1 &&
                    valid.size() >= static_cast<size_t>(x->value.rows),
                "masked_log_softmax");
    bool any_valid = false;
    double mx = -std::numeric_limits<double>::infinity();
    for (int32_t i = 0; i < x->value.rows; ++i)
        if (valid[static_cast<size_t>(i)]) {
            any_valid = true;
            mx = std::max(mx, x->value.at(i, 0));
        }
    if (!any_valid) throw NumericError("masked_log_softmax: degenerate mask");
    double sum = 0.0;
    for (int32_t i = 0; i < x->value.rows; ++i)
        if (valid[static_cast<size_t>(i)]) sum += std::exp(x->value.at(i, 0) - mx);
    double lse = mx + std::log(sum);

    Matrix v(x->value.rows, 1);
    for (int32_t i = 0; i < x->value.rows; ++i)
        v.at(i, 0) = valid[static_cast<size_t>(i)] ? x->value.at(i, 0) - lse : kMaskedLogit;
    auto n = make_node(std::move(v), {x}, "masked_log_softmax");
    Node* xp = x.get();
    auto valid_copy = valid;
    n->pull = [xp, valid_copy](Node& self) {
        double total = 0.0;
        for (int32_t i = 0; i < self.value.rows; ++i)
            if (valid_copy[static_cast<size_t>(i)]) total += self.grad.at(i, 0);
        for (int32_t i = 0; i < self.value.rows; ++i) {
            if (!valid_copy[static_cast<size_t>(i)]) continue;
            double p = std::exp(self.value.at(i, 0));
            xp->grad.at(i, 0) += self.grad.at(i, 0) - p * total;
        }
    };
    return n;
}

NodePtr log_softmax_row(const NodePtr& x) {
    check_shape(x->value.rows == 1, "log_softmax_row");
    double mx = -std::numeric_limits<double>::infinity();
    for (int32_t j = 0; j < x->value.cols; ++j) mx = std::max(mx, x->value.at(0, j));
    double sum = 0.0;
    for (int32_t j = 0; j < x->value.cols; ++j) sum += std::exp(x->value.at(0, j) - mx);
    double lse = mx + std::log(sum);
    Matrix v(1, x->value.cols);
    for (int32_t j = 0; j < x->value.cols; ++j) v.at(0, j) = x->value.at(0, j) - lse;
    auto n = make_node(std::move(v), {x}, "log_softmax_row");
    Node* xp = x.get();
    n->pull = [xp](Node& self) {
        double total = 0.0;
        for (int32_t j = 0; j < self.value.cols; ++j) total += self.grad.at(0, j);
        for (int32_t j = 0; j < self.value.cols; ++j) {
            double p = std::exp(self.value.at(0, j));
            xp->grad.at(0, j) += self.grad.at(0, j) - p * total;
        }
    };
    return n;
}

namespace {

void topo_sort(const NodePtr& root, std::vector<Node*>& order) {
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

bool all_finite(const Matrix& m) {
    for (double v : m.a)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace

std::string nonfinite_trace(const NodePtr& root) {
    std::vector<Node*> order;
    topo_sort(root, order); // parents come before children
    for (Node* n : order) {
        if (!all_finite(n->value)) {
            std::string trace = n->op;
            // walk one representative chain towards the root
            return trace;
        }
    }
    return "";
}

void backward(const NodePtr& root) {
    if (root->value.rows != 1 || root->value.cols != 1)
        throw NumericError("backward: root must be scalar");
    if (!std::isfinite(root->value.a[0])) {
        std::string trace = nonfinite_trace(root);
        throw NumericError("non-finite loss" +
                           (trace.empty() ? std::string{} : " (first bad op: " + trace + ")"));
    }
    std::vector<Node*> order;
    topo_sort(root, order);
    for (Node* n : order) {
        n->grad = Matrix(n->value.rows, n->value.cols);
    }
    root->grad.a[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->pull && n->needs_grad) n->pull(*n);
    }
}

} // namespace meeqa::ad
