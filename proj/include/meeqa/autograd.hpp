#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace meeqa::ad {

// Dense row-major double matrix. Scalars are 1x1.
struct Matrix {
    int32_t rows = 0;
    int32_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int32_t r, int32_t c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    static Matrix scalar(double v) {
        Matrix m(1, 1);
        m.a[0] = v;
        return m;
    }

    double& at(int32_t i, int32_t j) { return a[static_cast<size_t>(i) * cols + j]; }
    double at(int32_t i, int32_t j) const { return a[static_cast<size_t>(i) * cols + j]; }
    size_t size() const { return a.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// One tape node. `pull` propagates this node's gradient into its parents.
struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Matrix value;
    Matrix grad; // allocated by backward()
    std::vector<NodePtr> parents;
    std::function<void(Node&)> pull;
    const char* op = "";
    bool needs_grad = false;
};

NodePtr constant(Matrix value);
NodePtr parameter(Matrix value); // participates in gradients

// shape ops
NodePtr transpose(const NodePtr& x);
NodePtr slice_rows(const NodePtr& x, int32_t r0, int32_t r1); // [r0, r1)
NodePtr slice_cols(const NodePtr& x, int32_t c0, int32_t c1); // [c0, c1)
NodePtr concat_cols(const std::vector<NodePtr>& xs);
NodePtr gather_rows(const NodePtr& table, const std::vector<int32_t>& ids);

// arithmetic
NodePtr add(const NodePtr& a, const NodePtr& b);           // same shape
NodePtr add_row(const NodePtr& a, const NodePtr& row);      // row broadcast over rows
NodePtr mul(const NodePtr& a, const NodePtr& b);            // elementwise
NodePtr scale(const NodePtr& a, double s);
NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr pick(const NodePtr& a, int32_t i, int32_t j);       // 1x1 view
NodePtr exp_elem(const NodePtr& a);

// neural-net pieces
NodePtr gelu(const NodePtr& x);
NodePtr layer_norm(const NodePtr& x, const NodePtr& gain, const NodePtr& bias, double eps);
NodePtr softmax_rows(const NodePtr& x);
// Column-vector log-softmax over the positions where valid != 0; invalid
// positions get a large negative constant and zero gradient.
NodePtr masked_log_softmax(const NodePtr& x, const std::vector<uint8_t>& valid);
NodePtr log_softmax_row(const NodePtr& x); // 1xk

// Reverse pass from the scalar `root`. Throws NumericError with a node trace
// when a non-finite intermediate is found.
void backward(const NodePtr& root);

// First non-finite node reachable from root, as "op <- op <- ..." or "".
std::string nonfinite_trace(const NodePtr& root);

} // namespace meeqa::ad
