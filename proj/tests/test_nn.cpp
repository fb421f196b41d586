#include <doctest.h>

#include <sstream>

#include "craftrl/nn.hpp"

using namespace craftrl;
using nn::Matrix;

namespace {

double mse_loss(const Matrix& pred, const Matrix& target) {
  return (pred - target).squaredNorm() / static_cast<double>(pred.cols());
}

}  // namespace

TEST_CASE("dense forward/backward matches finite differences") {
  Rng rng(7);
  nn::Dense l1, l2;
  l1.init(5, 4, nn::Act::tanh_fn, rng);
  l2.init(2, 5, nn::Act::sigmoid, rng);
  Matrix X(4, 3);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1, 1);
  Matrix T(2, 3);
  for (int i = 0; i < T.size(); ++i) T.data()[i] = rng.uniform(0, 1);

  auto loss = [&]() {
    Matrix y = l2.apply(l1.apply(X));
    return mse_loss(y, T);
  };

  std::vector<nn::ParamRef> ps;
  l1.collect(ps);
  l2.collect(ps);
  nn::zero_grads(ps);
  Matrix h = l1.apply(X);
  Matrix y = l2.apply(h);
  Matrix dY = 2.0 * (y - T) / static_cast<double>(y.cols());
  Matrix dH = l2.backward(dY, h, y);
  l1.backward(dH, X, h);

  CHECK(nn::max_rel_grad_error(ps, loss) < 1e-5);
}

TEST_CASE("conv3x3 backward matches finite differences") {
  Rng rng(11);
  nn::Conv3x3 conv;
  conv.init(3, 2, 4, 4, nn::Act::tanh_fn, rng);
  Matrix X(2 * 16, 2);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1, 1);
  Matrix T(3 * 16, 2);
  for (int i = 0; i < T.size(); ++i) T.data()[i] = rng.uniform(-1, 1);

  auto loss = [&]() { return mse_loss(conv.apply(X), T); };

  std::vector<nn::ParamRef> ps;
  conv.collect(ps);
  nn::zero_grads(ps);
  Matrix y = conv.apply(X);
  Matrix dY = 2.0 * (y - T) / static_cast<double>(y.cols());
  conv.backward(dY, X, y);

  CHECK(nn::max_rel_grad_error(ps, loss) < 1e-5);
}

TEST_CASE("residual block with projection matches finite differences") {
  Rng rng(13);
  nn::ResBlock blk;
  blk.init(3, 2, 3, 3, nn::Act::tanh_fn, rng);
  Matrix X(2 * 9, 2);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1, 1);
  Matrix T(3 * 9, 2);
  for (int i = 0; i < T.size(); ++i) T.data()[i] = rng.uniform(-1, 1);

  auto loss = [&]() { return mse_loss(blk.apply(X), T); };

  std::vector<nn::ParamRef> ps;
  blk.collect(ps);
  nn::zero_grads(ps);
  nn::ResBlock::Cache cache;
  Matrix y = blk.forward(X, cache);
  Matrix dY = 2.0 * (y - T) / static_cast<double>(y.cols());
  blk.backward(dY, cache);

  CHECK(nn::max_rel_grad_error(ps, loss) < 1e-5);
}

TEST_CASE("identity-channel residual block gradients") {
  Rng rng(17);
  nn::ResBlock blk;
  blk.init(2, 2, 3, 3, nn::Act::tanh_fn, rng);  // no projection path
  Matrix X(2 * 9, 1);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1, 1);
  Matrix T = Matrix::Zero(2 * 9, 1);

  auto loss = [&]() { return mse_loss(blk.apply(X), T); };
  std::vector<nn::ParamRef> ps;
  blk.collect(ps);
  nn::zero_grads(ps);
  nn::ResBlock::Cache cache;
  Matrix y = blk.forward(X, cache);
  blk.backward(2.0 * (y - T), cache);
  CHECK(nn::max_rel_grad_error(ps, loss) < 1e-5);
}

TEST_CASE("adam reduces a quadratic") {
  Rng rng(3);
  nn::Dense lin;
  lin.init(1, 3, nn::Act::identity, rng);
  Matrix X(3, 8);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1, 1);
  Matrix w_true(1, 3);
  w_true << 0.7, -0.3, 0.5;
  Matrix T = w_true * X;  // realizable target

  std::vector<nn::ParamRef> ps;
  lin.collect(ps);
  nn::Adam adam;
  adam.lr = 0.05;
  double first = 0, last = 0;
  for (int it = 0; it < 200; ++it) {
    nn::zero_grads(ps);
    Matrix y = lin.apply(X);
    double l = mse_loss(y, T);
    if (it == 0) first = l;
    last = l;
    lin.backward(2.0 * (y - T) / 8.0, X, y);
    adam.step(ps);
  }
  CHECK(last < first * 0.05);
}

TEST_CASE("layer serialization round-trips bit-exactly") {
  Rng rng(23);
  nn::Conv3x3 conv;
  conv.init(4, 3, 5, 5, nn::Act::relu, rng);
  std::ostringstream os;
  conv.save(os);
  nn::Conv3x3 back;
  std::istringstream is(os.str());
  back.load(is);
  CHECK(back.W == conv.W);
  CHECK(back.b == conv.b);
  CHECK(back.act == conv.act);

  std::vector<nn::ParamRef> ps;
  conv.collect(ps);
  nn::zero_grads(ps);
  conv.gW.setConstant(0.5);
  nn::Adam adam;
  adam.lr = 1e-3;
  adam.step(ps);
  std::ostringstream os2;
  adam.save(os2);
  nn::Adam a2;
  std::istringstream is2(os2.str());
  a2.load(is2);
  CHECK(a2.t == adam.t);
  CHECK(a2.m[0] == adam.m[0]);
  CHECK(a2.v[1] == adam.v[1]);
}

TEST_CASE("rng determinism and serialization") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  std::string s = a.serialize();
  Rng c;
  c.deserialize(s);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == c.next());
  Rng d(1);
  for (int i = 0; i < 1000; ++i) CHECK(d.uniform_int(7) < 7);
}
