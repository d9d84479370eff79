#include <doctest.h>

#include <cmath>

#include "graphmem/error.hpp"
#include "graphmem/gradcheck.hpp"
#include "graphmem/rng.hpp"
#include "graphmem/tape.hpp"
#include "graphmem/tensor.hpp"

using namespace graphmem;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::int64_t> shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Keeps entries away from the LeakyReLU kink so finite differences stay clean.
Tensor random_tensor_off_kink(Rng& rng, std::vector<std::int64_t> shape) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) {
    const double mag = rng.uniform(0.1, 2.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

}  // namespace

TEST_CASE("tensor shape and data invariants") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  CHECK_THROWS_AS(Tensor({3}).rows(), ShapeError);
  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(m.at(1, 0) == 3.0);
}

TEST_CASE("rng determinism and bounds") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(c.uniform_int(17) < 17);
  }
  // forks with different tags diverge, same tag agrees
  Rng d(99);
  CHECK(d.fork(1).next_u64() == Rng(99).fork(1).next_u64());
  CHECK(d.fork(1).next_u64() != d.fork(2).next_u64());
  std::vector<int> v1{1, 2, 3, 4, 5, 6}, v2{1, 2, 3, 4, 5, 6};
  Rng e1(5), e2(5);
  e1.shuffle(v1);
  e2.shuffle(v2);
  CHECK(v1 == v2);
}

TEST_CASE("matmul forward examples") {
  Tape tape;
  // identity case
  Var i2 = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  Var b = tape.constant(Tensor::matrix({{5, 6}, {7, 8}}));
  CHECK(matmul(i2, b).value().data() == b.value().data());
  // zero case
  Var z = tape.constant(Tensor({2, 3}));
  Var c = tape.constant(Tensor::matrix({{1, 1}, {1, 1}, {1, 1}}));
  for (double v : matmul(z, c).value().data()) CHECK(v == 0.0);
  // direct formula
  Var a = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  Var ones = tape.constant(Tensor::matrix({{1}, {1}}));
  const Tensor prod = matmul(a, ones).value();
  CHECK(prod.at(0, 0) == 3.0);
  CHECK(prod.at(1, 0) == 7.0);
  // mismatch
  CHECK_THROWS_AS(matmul(a, c), ShapeError);
}

TEST_CASE("row_softmax examples and invariants") {
  Tape tape;
  Var equal = tape.constant(Tensor::matrix({{2.5, 2.5, 2.5, 2.5}}));
  for (double v : row_softmax(equal).value().data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  Var x = tape.constant(Tensor::matrix({{0.0, std::log(3.0)}}));
  const Tensor sm = row_softmax(x).value();
  CHECK(sm.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(sm.at(0, 1) == doctest::Approx(0.75).epsilon(1e-12));

  Var col = tape.constant(Tensor::matrix({{3.0}, {-1.0}, {0.0}}));
  for (double v : row_softmax(col).value().data()) CHECK(v == 1.0);

  // rows sum to 1 within 1e-12 and shifting a row is a no-op
  Rng rng(3);
  Tensor r = random_tensor(rng, {6, 5}, -4.0, 4.0);
  Tensor shifted = r;
  for (std::int64_t j = 0; j < 5; ++j) shifted.at(2, j) += 123.456;
  Tape t2;
  const Tensor s1 = row_softmax(t2.constant(r)).value();
  const Tensor s2 = row_softmax(t2.constant(shifted)).value();
  for (std::int64_t i = 0; i < 6; ++i) {
    double sum = 0.0;
    for (std::int64_t j = 0; j < 5; ++j) sum += s1.at(i, j);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  for (std::int64_t i = 0; i < s1.numel(); ++i) {
    CHECK(s1.at(i) == doctest::Approx(s2.at(i)).epsilon(1e-12));
  }
}

TEST_CASE("leaky_relu examples") {
  Tape tape;
  Var pos = tape.constant(Tensor::matrix({{0.5, 2.0, 7.0}}));
  CHECK(leaky_relu(pos, 0.01).value().data() == pos.value().data());
  Var neg = tape.constant(Tensor::matrix({{-1.0}}));
  CHECK(leaky_relu(neg, 0.01).value().at(0) == doctest::Approx(-0.01));
  Var zero = tape.constant(Tensor::matrix({{0.0}}));
  CHECK(leaky_relu(zero, 0.01).value().at(0) == 0.0);
  CHECK_THROWS_AS(leaky_relu(pos, 1.5), ContractError);
}

TEST_CASE("pairwise_sq_dist examples") {
  Tape tape;
  Var q = tape.constant(Tensor::matrix({{1.0, 2.0}}));
  CHECK(pairwise_sq_dist(q, q).value().at(0) == 0.0);

  Var origin = tape.constant(Tensor::matrix({{0.0, 0.0}}));
  Var k = tape.constant(Tensor::matrix({{3.0, 4.0}}));
  CHECK(pairwise_sq_dist(origin, k).value().at(0) == 25.0);

  Rng rng(11);
  Tensor qt = random_tensor(rng, {4, 3}, -1.0, 1.0);
  Tensor kt = random_tensor(rng, {5, 3}, -1.0, 1.0);
  Tape t2;
  const Tensor d1 = pairwise_sq_dist(t2.constant(qt), t2.constant(kt)).value();
  const Tensor d2 = pairwise_sq_dist(t2.constant(kt), t2.constant(qt)).value();
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < 5; ++j) CHECK(d1.at(i, j) == d2.at(j, i));
  for (double v : d1.data()) CHECK(v >= 0.0);

  Var bad = t2.constant(Tensor({2, 7}));
  CHECK_THROWS_AS(pairwise_sq_dist(t2.constant(qt), bad), ShapeError);
}

TEST_CASE("grad_check on simple functions") {
  // f = sum(x): analytic gradient all ones
  Tensor x = Tensor::matrix({{1.0, -2.0}, {0.5, 3.0}});
  const double err_lin = grad_check(
      [](Tape&, const Var& v) { return sum_all(v); }, x, 1e-5);
  CHECK(err_lin < 1e-10);

  // f = sum(x^2) at [1, 2]: gradient [2, 4]
  Tensor x2 = Tensor::vector({1.0, 2.0});
  Tape tape;
  Var v = tape.param(x2);
  Var out = sum_squares(v);
  tape.backward(out);
  const Tensor g = tape.grad(v);
  CHECK(g.at(0) == doctest::Approx(2.0));
  CHECK(g.at(1) == doctest::Approx(4.0));
  const double err_sq = grad_check(
      [](Tape&, const Var& vv) { return sum_squares(vv); }, x2, 1e-5);
  CHECK(err_sq < 1e-6);

  // non-scalar output is a contract error
  CHECK_THROWS_AS(grad_check([](Tape&, const Var& vv) { return scale(vv, 2.0); }, x, 1e-5),
                  ContractError);
  // eps outside (0, 1e-3]
  CHECK_THROWS_AS(grad_check([](Tape&, const Var& vv) { return sum_all(vv); }, x, 0.1),
                  ContractError);
}

TEST_CASE("every registered op passes grad_check on random inputs") {
  Rng rng(2024);
  const double tol = 1e-4;
  const double eps = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = random_tensor(rng, {3, 4}, -1.5, 1.5);
    Tensor b = random_tensor(rng, {4, 2}, -1.5, 1.5);
    CHECK(grad_check_params(
              [](Tape&, const std::vector<Var>& vs) {
                return sum_squares(matmul(vs[0], vs[1]));
              },
              {a, b}, eps) < tol);

    Tensor sm_in = random_tensor(rng, {3, 4}, -2.0, 2.0);
    CHECK(grad_check(
              [](Tape&, const Var& v) { return sum_squares(row_softmax(v)); }, sm_in, eps) < tol);

    Tensor lr_in = random_tensor_off_kink(rng, {3, 4});
    CHECK(grad_check(
              [](Tape&, const Var& v) { return sum_squares(leaky_relu(v, 0.01)); }, lr_in, eps) <
          tol);

    Tensor q = random_tensor(rng, {3, 3}, -1.0, 1.0);
    Tensor k = random_tensor(rng, {2, 3}, -1.0, 1.0);
    CHECK(grad_check_params(
              [](Tape&, const std::vector<Var>& vs) {
                return sum_squares(pairwise_sq_dist(vs[0], vs[1]));
              },
              {q, k}, eps) < tol);

    Tensor d = random_tensor(rng, {3, 2}, 0.1, 3.0);
    CHECK(grad_check(
              [](Tape&, const Var& v) { return sum_squares(student_t_kernel(v, 1.0)); }, d, eps) <
          tol);

    Tensor pos = random_tensor(rng, {3, 4}, 0.2, 2.0);
    CHECK(grad_check(
              [](Tape&, const Var& v) { return sum_squares(row_normalize(v)); }, pos, eps) < tol);

    Tensor c1 = random_tensor(rng, {3, 2}, -1.0, 1.0);
    Tensor c2 = random_tensor(rng, {3, 3}, -1.0, 1.0);
    CHECK(grad_check_params(
              [](Tape&, const std::vector<Var>& vs) {
                return sum_squares(concat_cols(vs[0], vs[1]));
              },
              {c1, c2}, eps) < tol);

    Tensor tr = random_tensor(rng, {2, 5}, -1.0, 1.0);
    CHECK(grad_check(
              [](Tape&, const Var& v) { return sum_squares(transpose(v)); }, tr, eps) < tol);

    Tensor seg_in = random_tensor(rng, {5, 1}, -2.0, 2.0);
    const std::vector<std::int64_t> seg{0, 0, 1, 1, 1};
    CHECK(grad_check(
              [&seg](Tape&, const Var& v) { return sum_squares(segment_softmax(v, seg)); },
              seg_in, eps) < tol);

    Tensor rows = random_tensor(rng, {4, 3}, -1.0, 1.0);
    CHECK(grad_check(
              [](Tape&, const Var& v) {
                return sum_squares(take_rows(v, {2, 0, 2}));
              },
              rows, eps) < tol);

    Tensor sc = random_tensor(rng, {4, 1}, -1.0, 1.0);
    CHECK(grad_check_params(
              [](Tape&, const std::vector<Var>& vs) {
                return sum_squares(scale_rows(vs[0], vs[1]));
              },
              {rows, sc}, eps) < tol);

    CHECK(grad_check(
              [&seg](Tape&, const Var& v) {
                return sum_squares(segment_sum(v, {0, 1, 0, 1}, 2));
              },
              random_tensor(rng, {4, 3}, -1.0, 1.0), eps) < tol);

    Tensor one_row = random_tensor(rng, {1, 3}, -1.0, 1.0);
    CHECK(grad_check(
              [](Tape&, const Var& v) { return sum_squares(tile_rows(v, 4)); }, one_row, eps) <
          tol);

    Tensor vec = random_tensor(rng, {4}, -1.0, 1.0);
    CHECK(grad_check(
              [](Tape&, const Var& v) { return scale(select_entry(v, 2), 3.0); }, vec, eps) < tol);

    Tensor logits = random_tensor(rng, {3, 4}, -2.0, 2.0);
    CHECK(grad_check(
              [](Tape&, const Var& v) {
                return softmax_cross_entropy(v, {1, 3, 0});
              },
              logits, eps) < tol);

    Tensor cmat = random_tensor(rng, {3, 3}, 0.05, 1.0);
    Tape norm_tape;
    Tensor p = row_normalize(norm_tape.constant(cmat)).value();
    CHECK(grad_check(
              [&p](Tape&, const Var& v) { return kl_divergence(p, row_normalize(v)); }, cmat,
              eps) < tol);

    Tensor pos_scalar = random_tensor(rng, {1}, 0.5, 2.0);
    CHECK(grad_check(
              [](Tape&, const Var& v) { return sqrt_scalar(v); }, pos_scalar, eps) < tol);
  }
}

TEST_CASE("corrupted backward rule is caught by grad_check") {
  // A product node whose pull deliberately drops the factor 2: the checker
  // must report a large error (negative control for the gradcheck suite).
  Tensor x = Tensor::vector({1.0, 2.0, 3.0});
  const double err = grad_check(
      [](Tape& tape, const Var& v) {
        Tensor out = v.value();
        for (auto& val : out.data()) val *= val;
        Var broken = tape.make(std::move(out), {{v, [](const Tensor& g) {
                                                   return g;  // should be 2*x*g
                                                 }}});
        return sum_all(broken);
      },
      x, 1e-5);
  CHECK(err > 1e-2);
}

TEST_CASE("tape backward visits nodes once and shapes gradients correctly") {
  // y = sum((a + a) * a): gradient 4a; reuses a twice to exercise fan-out.
  Tensor a = Tensor::vector({1.5, -2.0});
  Tape tape;
  Var va = tape.param(a);
  Var out = sum_all(mul(add(va, va), va));
  tape.backward(out);
  const Tensor g = tape.grad(va);
  CHECK(g.shape() == a.shape());
  CHECK(g.at(0) == doctest::Approx(4.0 * 1.5));
  CHECK(g.at(1) == doctest::Approx(-8.0));
  CHECK_THROWS_AS(tape.backward(va), ContractError);  // non-scalar root
}

TEST_CASE("forward determinism given identical seeds") {
  auto run = [] {
    Rng rng(77);
    Tensor a = random_tensor(rng, {4, 4}, -1.0, 1.0);
    Tensor b = random_tensor(rng, {4, 4}, -1.0, 1.0);
    Tape tape;
    return row_softmax(matmul(tape.constant(a), tape.constant(b))).value().data();
  };
  CHECK(run() == run());
}

TEST_CASE("dropout scales kept entries and is identity at rate zero") {
  Rng rng(5);
  Tape tape;
  Var x = tape.param(Tensor::full({50, 10}, 1.0));
  Var same = dropout(x, 0.0, rng);
  CHECK(same.slot() == x.slot());
  Var dropped = dropout(x, 0.4, rng);
  int zeros = 0;
  for (double v : dropped.value().data()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      CHECK(v == doctest::Approx(1.0 / 0.6));
    }
  }
  CHECK(zeros > 100);
  CHECK(zeros < 400);
}
