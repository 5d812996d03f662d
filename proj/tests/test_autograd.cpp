#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>

#include "meeqa/autograd.hpp"
#include "meeqa/errors.hpp"

using namespace meeqa;
using ad::Matrix;
using ad::NodePtr;

namespace {

Matrix random_matrix(int32_t rows, int32_t cols, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Matrix m(rows, cols);
    for (double& v : m.a) v = dist(rng);
    return m;
}

// Central-difference check of d(loss)/d(input[k]) for every coordinate.
void finite_difference_check(
    const Matrix& input, const std::function<NodePtr(const NodePtr&)>& build,
    double tolerance = 1e-6) {
    NodePtr x = ad::parameter(input);
    NodePtr loss = build(x);
    ad::backward(loss);

    const double h = 1e-6;
    for (size_t k = 0; k < input.size(); ++k) {
        Matrix plus = input, minus = input;
        plus.a[k] += h;
        minus.a[k] -= h;
        double f_plus = build(ad::constant(plus))->value.a[0];
        double f_minus = build(ad::constant(minus))->value.a[0];
        double numeric = (f_plus - f_minus) / (2 * h);
        double analytic = x->grad.a[k];
        double err = std::fabs(numeric - analytic) /
                     std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
        CHECK(err < tolerance);
    }
}

// Reduces any matrix node to a scalar through fixed pseudo-random weights so
// the full Jacobian is exercised.
NodePtr reduce_to_scalar(const NodePtr& x) {
    Matrix w(x->value.cols, 1);
    for (size_t i = 0; i < w.size(); ++i)
        w.a[i] = 0.3 + 0.1 * std::sin(static_cast<double>(i + 1));
    Matrix u(1, x->value.rows);
    for (size_t i = 0; i < u.size(); ++i)
        u.a[i] = 0.2 + 0.05 * std::cos(static_cast<double>(i + 1));
    return ad::matmul(ad::constant(u), ad::matmul(x, ad::constant(w)));
}

} // namespace

TEST_CASE("sum of squares has gradient 2p") {
    Matrix p(1, 4);
    p.a = {0.5, -1.0, 2.0, 0.0};
    NodePtr x = ad::parameter(p);
    NodePtr loss = ad::matmul(ad::mul(x, x), ad::constant([] {
                                  Matrix ones(4, 1);
                                  for (double& v : ones.a) v = 1.0;
                                  return ones;
                              }()));
    ad::backward(loss);
    for (size_t i = 0; i < p.size(); ++i)
        CHECK(x->grad.a[i] == doctest::Approx(2.0 * p.a[i]).epsilon(1e-12));
}

TEST_CASE("matmul gradients match finite differences") {
    std::mt19937_64 rng(1);
    Matrix a = random_matrix(3, 4, rng);
    Matrix b = random_matrix(4, 2, rng);
    finite_difference_check(a, [&](const NodePtr& x) {
        return reduce_to_scalar(ad::matmul(x, ad::constant(b)));
    });
    finite_difference_check(b, [&](const NodePtr& x) {
        return reduce_to_scalar(ad::matmul(ad::constant(a), x));
    });
}

TEST_CASE("elementwise and shape op gradients match finite differences") {
    std::mt19937_64 rng(2);
    Matrix a = random_matrix(3, 5, rng);
    Matrix b = random_matrix(3, 5, rng);
    Matrix row = random_matrix(1, 5, rng);

    finite_difference_check(
        a, [&](const NodePtr& x) { return reduce_to_scalar(ad::add(x, ad::constant(b))); });
    finite_difference_check(
        a, [&](const NodePtr& x) { return reduce_to_scalar(ad::mul(x, ad::constant(b))); });
    finite_difference_check(a, [&](const NodePtr& x) {
        return reduce_to_scalar(ad::add_row(x, ad::constant(row)));
    });
    finite_difference_check(row, [&](const NodePtr& x) {
        return reduce_to_scalar(ad::add_row(ad::constant(a), x));
    });
    finite_difference_check(
        a, [&](const NodePtr& x) { return reduce_to_scalar(ad::scale(x, -1.7)); });
    finite_difference_check(
        a, [&](const NodePtr& x) { return reduce_to_scalar(ad::transpose(x)); });
    finite_difference_check(
        a, [&](const NodePtr& x) { return reduce_to_scalar(ad::slice_rows(x, 1, 3)); });
    finite_difference_check(
        a, [&](const NodePtr& x) { return reduce_to_scalar(ad::slice_cols(x, 2, 5)); });
    finite_difference_check(a, [&](const NodePtr& x) {
        return reduce_to_scalar(ad::concat_cols({x, ad::constant(b)}));
    });
}

TEST_CASE("gather_rows accumulates gradients over repeated ids") {
    std::mt19937_64 rng(3);
    Matrix table = random_matrix(5, 3, rng);
    std::vector<int32_t> ids = {1, 3, 1, 0};
    finite_difference_check(table, [&](const NodePtr& x) {
        return reduce_to_scalar(ad::gather_rows(x, ids));
    });
}

TEST_CASE("nonlinearity gradients match finite differences") {
    std::mt19937_64 rng(4);
    Matrix a = random_matrix(4, 6, rng, 2.0);
    finite_difference_check(a,
                            [&](const NodePtr& x) { return reduce_to_scalar(ad::gelu(x)); });
    finite_difference_check(
        a, [&](const NodePtr& x) { return reduce_to_scalar(ad::softmax_rows(x)); });
    finite_difference_check(
        a, [&](const NodePtr& x) { return reduce_to_scalar(ad::exp_elem(ad::scale(x, 0.3))); });
}

TEST_CASE("layer_norm gradients match finite differences") {
    std::mt19937_64 rng(5);
    Matrix a = random_matrix(3, 8, rng);
    Matrix gain = random_matrix(1, 8, rng);
    Matrix bias = random_matrix(1, 8, rng);
    finite_difference_check(a, [&](const NodePtr& x) {
        return reduce_to_scalar(ad::layer_norm(x, ad::constant(gain), ad::constant(bias), 1e-5));
    });
    finite_difference_check(gain, [&](const NodePtr& x) {
        return reduce_to_scalar(ad::layer_norm(ad::constant(a), x, ad::constant(bias), 1e-5));
    });
    finite_difference_check(bias, [&](const NodePtr& x) {
        return reduce_to_scalar(ad::layer_norm(ad::constant(a), ad::constant(gain), x, 1e-5));
    });
}

TEST_CASE("masked log-softmax normalizes over the valid set only") {
    Matrix logits(4, 1);
    logits.a = {1.0, 2.0, 3.0, 4.0};
    std::vector<uint8_t> valid = {1, 0, 1, 0};
    NodePtr x = ad::constant(logits);
    NodePtr logp = ad::masked_log_softmax(x, valid);
    double p0 = std::exp(logp->value.at(0, 0));
    double p2 = std::exp(logp->value.at(2, 0));
    CHECK(p0 + p2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::exp(logp->value.at(1, 0)) == doctest::Approx(0.0));
}

TEST_CASE("masked positions receive zero gradient") {
    Matrix logits(4, 1);
    logits.a = {0.3, -0.2, 0.9, 0.1};
    std::vector<uint8_t> valid = {1, 0, 1, 1};
    NodePtr x = ad::parameter(logits);
    NodePtr loss = ad::scale(ad::pick(ad::masked_log_softmax(x, valid), 2, 0), -1.0);
    ad::backward(loss);
    CHECK(x->grad.a[1] == 0.0);
    CHECK(x->grad.a[0] != 0.0);

    finite_difference_check(logits, [&](const NodePtr& n) {
        return ad::scale(ad::pick(ad::masked_log_softmax(n, valid), 2, 0), -1.0);
    });
}

TEST_CASE("masked log-softmax rejects a fully masked input") {
    Matrix logits(3, 1);
    std::vector<uint8_t> valid = {0, 0, 0};
    CHECK_THROWS_AS(ad::masked_log_softmax(ad::constant(logits), valid), NumericError);
}

TEST_CASE("log_softmax_row gradients match finite differences") {
    std::mt19937_64 rng(6);
    Matrix a = random_matrix(1, 5, rng);
    finite_difference_check(a, [&](const NodePtr& x) {
        return reduce_to_scalar(ad::log_softmax_row(x));
    });
}

TEST_CASE("backward reports non-finite losses") {
    Matrix bad = Matrix::scalar(std::numeric_limits<double>::quiet_NaN());
    NodePtr x = ad::parameter(bad);
    NodePtr loss = ad::scale(x, 2.0);
    CHECK_THROWS_AS(ad::backward(loss), NumericError);
    try {
        ad::backward(loss);
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
    }
}

TEST_CASE("backward requires a scalar root") {
    std::mt19937_64 rng(7);
    NodePtr x = ad::parameter(random_matrix(2, 2, rng));
    CHECK_THROWS_AS(ad::backward(x), NumericError);
}

TEST_CASE("gradients accumulate across shared subexpressions") {
    Matrix v = Matrix::scalar(0.7);
    NodePtr x = ad::parameter(v);
    NodePtr y = ad::mul(x, x);         // x^2
    NodePtr loss = ad::add(y, ad::mul(x, y)); // x^2 + x^3
    ad::backward(loss);
    CHECK(x->grad.a[0] == doctest::Approx(2 * 0.7 + 3 * 0.49).epsilon(1e-12));
}
