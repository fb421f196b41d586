#include "craftrl/nn.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "craftrl/serialize.hpp"

namespace craftrl::nn {

Act act_from_string(const std::string& s) {
  if (s == "identity") return Act::identity;
  if (s == "tanh") return Act::tanh_fn;
  if (s == "relu") return Act::relu;
  if (s == "sigmoid") return Act::sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string act_to_string(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::tanh_fn: return "tanh";
    case Act::relu: return "relu";
    case Act::sigmoid: return "sigmoid";
  }
  return "identity";
}

void apply_act(Matrix& z, Act act) {
  switch (act) {
    case Act::identity: break;
    case Act::tanh_fn: z = z.array().tanh(); break;
    case Act::relu: z = z.cwiseMax(0.0); break;
    case Act::sigmoid: z = 0.5 * (0.5 * z.array()).tanh() + 0.5; break;
  }
}

Matrix act_grad_from_output(const Matrix& y, Act act) {
  switch (act) {
    case Act::identity: return Matrix::Ones(y.rows(), y.cols());
    case Act::tanh_fn: return (1.0 - y.array().square()).matrix();
    case Act::relu: return (y.array() > 0.0).cast<double>().matrix();
    case Act::sigmoid: return (y.array() * (1.0 - y.array())).matrix();
  }
  return Matrix::Ones(y.rows(), y.cols());
}

static void uniform_init(Matrix& m, Rng& rng, double bound) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------- Dense

void Dense::init(int out, int in, Act a, Rng& rng, double scale) {
  act = a;
  W.resize(out, in);
  b = Matrix::Zero(out, 1);
  uniform_init(W, rng, scale * std::sqrt(6.0 / static_cast<double>(in + out)));
  gW = Matrix::Zero(out, in);
  gb = Matrix::Zero(out, 1);
}

Matrix Dense::apply(const Matrix& X) const {
  Matrix z = W * X;
  z.colwise() += b.col(0);
  apply_act(z, act);
  return z;
}

Matrix Dense::backward(const Matrix& dY, const Matrix& X, const Matrix& Y) {
  Matrix dZ = dY.cwiseProduct(act_grad_from_output(Y, act));
  gW.noalias() += dZ * X.transpose();
  gb.col(0).noalias() += dZ.rowwise().sum();
  return W.transpose() * dZ;
}

void Dense::zero_grad() {
  gW.setZero();
  gb.setZero();
}

void Dense::collect(std::vector<ParamRef>& out) {
  out.push_back({&W, &gW});
  out.push_back({&b, &gb});
}

void Dense::save(std::ostream& os) const {
  io::put_str(os, act_to_string(act));
  io::put_matrix(os, W);
  io::put_matrix(os, b);
}

void Dense::load(std::istream& is) {
  act = act_from_string(io::get_str(is));
  W = io::get_matrix(is);
  b = io::get_matrix(is);
  gW = Matrix::Zero(W.rows(), W.cols());
  gb = Matrix::Zero(b.rows(), 1);
}

// ---------------------------------------------------------------- Conv3x3

void Conv3x3::init(int out_channels, int in_channels, int height, int width, Act a, Rng& rng,
                   double scale) {
  in_ch = in_channels;
  out_ch = out_channels;
  h = height;
  w = width;
  act = a;
  W.resize(out_ch, in_ch * 9);
  b = Matrix::Zero(out_ch, 1);
  uniform_init(W, rng, scale * std::sqrt(6.0 / static_cast<double>((in_ch + out_ch) * 9)));
  gW = Matrix::Zero(out_ch, in_ch * 9);
  gb = Matrix::Zero(out_ch, 1);
}

void Conv3x3::im2col(const double* sample, Matrix& cols) const {
  // cols: (in_ch*9) x (h*w)
  cols.setZero();
  for (int c = 0; c < in_ch; ++c) {
    const double* plane = sample + c * h * w;
    for (int ky = -1; ky <= 1; ++ky) {
      for (int kx = -1; kx <= 1; ++kx) {
        int krow = c * 9 + (ky + 1) * 3 + (kx + 1);
        for (int y = 0; y < h; ++y) {
          int sy = y + ky;
          if (sy < 0 || sy >= h) continue;
          for (int x = 0; x < w; ++x) {
            int sx = x + kx;
            if (sx < 0 || sx >= w) continue;
            cols(krow, y * w + x) = plane[sy * w + sx];
          }
        }
      }
    }
  }
}

Matrix Conv3x3::apply(const Matrix& X) const {
  const int hw = h * w;
  Matrix Y(out_ch * hw, X.cols());
  Matrix cols(in_ch * 9, hw);
  Matrix z(out_ch, hw);
  for (Eigen::Index s = 0; s < X.cols(); ++s) {
    im2col(X.col(s).data(), cols);
    z.noalias() = W * cols;
    z.colwise() += b.col(0);
    apply_act(z, act);
    for (int c = 0; c < out_ch; ++c)
      Y.block(c * hw, s, hw, 1) = z.row(c).transpose();
  }
  return Y;
}

Matrix Conv3x3::backward(const Matrix& dY, const Matrix& X, const Matrix& Y) {
  const int hw = h * w;
  Matrix dX = Matrix::Zero(X.rows(), X.cols());
  Matrix cols(in_ch * 9, hw);
  Matrix dZ(out_ch, hw);
  Matrix dCols(in_ch * 9, hw);
  Matrix dAct = act_grad_from_output(Y, act);
  for (Eigen::Index s = 0; s < X.cols(); ++s) {
    for (int c = 0; c < out_ch; ++c)
      dZ.row(c) = (dY.block(c * hw, s, hw, 1).cwiseProduct(dAct.block(c * hw, s, hw, 1)))
                      .transpose();
    im2col(X.col(s).data(), cols);
    gW.noalias() += dZ * cols.transpose();
    gb.col(0).noalias() += dZ.rowwise().sum();
    dCols.noalias() = W.transpose() * dZ;
    // col2im scatter-add
    double* dst = dX.col(s).data();
    for (int c = 0; c < in_ch; ++c) {
      for (int ky = -1; ky <= 1; ++ky) {
        for (int kx = -1; kx <= 1; ++kx) {
          int krow = c * 9 + (ky + 1) * 3 + (kx + 1);
          for (int y = 0; y < h; ++y) {
            int sy = y + ky;
            if (sy < 0 || sy >= h) continue;
            for (int x = 0; x < w; ++x) {
              int sx = x + kx;
              if (sx < 0 || sx >= w) continue;
              dst[c * hw + sy * w + sx] += dCols(krow, y * w + x);
            }
          }
        }
      }
    }
  }
  return dX;
}

void Conv3x3::zero_grad() {
  gW.setZero();
  gb.setZero();
}

void Conv3x3::collect(std::vector<ParamRef>& out) {
  out.push_back({&W, &gW});
  out.push_back({&b, &gb});
}

void Conv3x3::save(std::ostream& os) const {
  io::put_str(os, act_to_string(act));
  io::put_i64(os, in_ch);
  io::put_i64(os, out_ch);
  io::put_i64(os, h);
  io::put_i64(os, w);
  io::put_matrix(os, W);
  io::put_matrix(os, b);
}

void Conv3x3::load(std::istream& is) {
  act = act_from_string(io::get_str(is));
  in_ch = static_cast<int>(io::get_i64(is));
  out_ch = static_cast<int>(io::get_i64(is));
  h = static_cast<int>(io::get_i64(is));
  w = static_cast<int>(io::get_i64(is));
  W = io::get_matrix(is);
  b = io::get_matrix(is);
  gW = Matrix::Zero(W.rows(), W.cols());
  gb = Matrix::Zero(b.rows(), 1);
}

// ---------------------------------------------------------------- ResBlock

void ResBlock::init(int out_channels, int in_channels, int height, int width, Act a, Rng& rng,
                    double scale) {
  in_ch = in_channels;
  out_ch = out_channels;
  h = height;
  w = width;
  act = a;
  c1.init(out_ch, in_ch, h, w, a, rng, scale);
  c2.init(out_ch, out_ch, h, w, Act::identity, rng, scale);
  if (in_ch != out_ch) {
    Wp.resize(out_ch, in_ch);
    uniform_init(Wp, rng, scale * std::sqrt(6.0 / static_cast<double>(in_ch + out_ch)));
    gWp = Matrix::Zero(out_ch, in_ch);
  } else {
    Wp.resize(0, 0);
    gWp.resize(0, 0);
  }
}

static Matrix project_1x1(const Matrix& Wp, const Matrix& X, int in_ch, int out_ch, int hw) {
  // per-pixel channel mixing
  Matrix Y(out_ch * hw, X.cols());
  for (Eigen::Index s = 0; s < X.cols(); ++s) {
    Eigen::Map<const Matrix> xm(X.col(s).data(), hw, in_ch);
    Eigen::Map<Matrix> ym(Y.col(s).data(), hw, out_ch);
    ym.noalias() = xm * Wp.transpose();
  }
  return Y;
}

Matrix ResBlock::apply(const Matrix& X) const {
  Cache c;
  return forward(X, c);
}

Matrix ResBlock::forward(const Matrix& X, Cache& cache) const {
  cache.x = X;
  cache.y1 = c1.apply(X);
  cache.z2 = c2.apply(cache.y1);
  Matrix skip = (Wp.size() > 0) ? project_1x1(Wp, X, in_ch, out_ch, h * w) : X;
  Matrix y = cache.z2 + skip;
  apply_act(y, act);
  cache.y = y;
  return y;
}

Matrix ResBlock::backward(const Matrix& dY, const Cache& cache) {
  const int hw = h * w;
  Matrix dSum = dY.cwiseProduct(act_grad_from_output(cache.y, act));
  Matrix dY1 = c2.backward(dSum, cache.y1, cache.z2);
  Matrix dX = c1.backward(dY1, cache.x, cache.y1);
  if (Wp.size() > 0) {
    for (Eigen::Index s = 0; s < cache.x.cols(); ++s) {
      Eigen::Map<const Matrix> xm(cache.x.col(s).data(), hw, in_ch);
      Eigen::Map<const Matrix> dm(dSum.col(s).data(), hw, out_ch);
      gWp.noalias() += dm.transpose() * xm;
      Eigen::Map<Matrix> dxm(dX.col(s).data(), hw, in_ch);
      dxm.noalias() += dm * Wp;
    }
  } else {
    dX += dSum;
  }
  return dX;
}

void ResBlock::zero_grad() {
  c1.zero_grad();
  c2.zero_grad();
  if (gWp.size() > 0) gWp.setZero();
}

void ResBlock::collect(std::vector<ParamRef>& out) {
  c1.collect(out);
  c2.collect(out);
  if (Wp.size() > 0) out.push_back({&Wp, &gWp});
}

void ResBlock::save(std::ostream& os) const {
  io::put_str(os, act_to_string(act));
  io::put_i64(os, in_ch);
  io::put_i64(os, out_ch);
  io::put_i64(os, h);
  io::put_i64(os, w);
  c1.save(os);
  c2.save(os);
  io::put_matrix(os, Wp);
}

void ResBlock::load(std::istream& is) {
  act = act_from_string(io::get_str(is));
  in_ch = static_cast<int>(io::get_i64(is));
  out_ch = static_cast<int>(io::get_i64(is));
  h = static_cast<int>(io::get_i64(is));
  w = static_cast<int>(io::get_i64(is));
  c1.load(is);
  c2.load(is);
  Wp = io::get_matrix(is);
  gWp = Matrix::Zero(Wp.rows(), Wp.cols());
}

int64_t ResBlock::param_count() const {
  return c1.param_count() + c2.param_count() + Wp.size();
}

// ---------------------------------------------------------------- Adam

void Adam::step(const std::vector<ParamRef>& params) {
  if (m.size() != params.size()) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.push_back(Matrix::Zero(p.w->rows(), p.w->cols()));
      v.push_back(Matrix::Zero(p.w->rows(), p.w->cols()));
    }
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *params[i].g;
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g.cwiseProduct(g);
    params[i].w->array() -=
        lr * (m[i].array() / bc1) / ((v[i].array() / bc2).sqrt() + eps);
  }
}

void Adam::save(std::ostream& os) const {
  io::put_f64(os, lr);
  io::put_f64(os, beta1);
  io::put_f64(os, beta2);
  io::put_f64(os, eps);
  io::put_i64(os, t);
  io::put_u64(os, m.size());
  for (size_t i = 0; i < m.size(); ++i) {
    io::put_matrix(os, m[i]);
    io::put_matrix(os, v[i]);
  }
}

void Adam::load(std::istream& is) {
  lr = io::get_f64(is);
  beta1 = io::get_f64(is);
  beta2 = io::get_f64(is);
  eps = io::get_f64(is);
  t = io::get_i64(is);
  uint64_t n = io::get_u64(is);
  m.resize(n);
  v.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    m[i] = io::get_matrix(is);
    v[i] = io::get_matrix(is);
  }
}

void zero_grads(const std::vector<ParamRef>& params) {
  for (const auto& p : params) p.g->setZero();
}

double max_rel_grad_error(const std::vector<ParamRef>& params,
                          const std::function<double()>& loss, double h) {
  double worst = 0.0;
  for (const auto& p : params) {
    for (Eigen::Index i = 0; i < p.w->size(); ++i) {
      double orig = p.w->data()[i];
      p.w->data()[i] = orig + h;
      double lp = loss();
      p.w->data()[i] = orig - h;
      double lm = loss();
      p.w->data()[i] = orig;
      double fd = (lp - lm) / (2.0 * h);
      double an = p.g->data()[i];
      double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  }
  return worst;
}

}  // namespace craftrl::nn
