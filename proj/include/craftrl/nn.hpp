#pragma once
#include <Eigen/Core>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "craftrl/rng.hpp"

namespace craftrl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Act { identity, tanh_fn, relu, sigmoid };

Act act_from_string(const std::string& s);
std::string act_to_string(Act a);

void apply_act(Matrix& z, Act act);
// derivative of the activation expressed through its output y
Matrix act_grad_from_output(const Matrix& y, Act act);

// parameter tensor + its gradient accumulator, in a stable registration order
struct ParamRef {
  Matrix* w;
  Matrix* g;
};

// Dense layer, batch = columns.
struct Dense {
  Matrix W;  // out x in
  Matrix b;  // out x 1
  Matrix gW, gb;
  Act act = Act::identity;

  void init(int out, int in, Act a, Rng& rng, double scale = 1.0);
  Matrix apply(const Matrix& X) const;
  // backward through act; accumulates gW/gb, returns dX.
  // X is the layer input, Y the layer output from the same forward pass.
  Matrix backward(const Matrix& dY, const Matrix& X, const Matrix& Y);
  void zero_grad();
  void collect(std::vector<ParamRef>& out);
  void save(std::ostream& os) const;
  void load(std::istream& is);
  int64_t param_count() const { return W.size() + b.size(); }
};

// 3x3 same-padding convolution over fixed h x w grids.
// Sample layout inside a column: index = c*h*w + y*w + x.
struct Conv3x3 {
  int in_ch = 0, out_ch = 0, h = 0, w = 0;
  Matrix W;  // out_ch x (in_ch*9)
  Matrix b;  // out_ch x 1
  Matrix gW, gb;
  Act act = Act::identity;

  void init(int out_channels, int in_channels, int height, int width, Act a, Rng& rng,
            double scale = 1.0);
  Matrix apply(const Matrix& X) const;
  Matrix backward(const Matrix& dY, const Matrix& X, const Matrix& Y);
  void zero_grad();
  void collect(std::vector<ParamRef>& out);
  void save(std::ostream& os) const;
  void load(std::istream& is);
  int64_t param_count() const { return W.size() + b.size(); }

 private:
  void im2col(const double* sample, Matrix& cols) const;
};

// conv -> act -> conv -> (+skip) -> act; skip is a 1x1 projection when the
// channel count changes.
struct ResBlock {
  Conv3x3 c1, c2;
  Matrix Wp, gWp;  // out_ch x in_ch projection, empty when in_ch == out_ch
  Act act = Act::tanh_fn;
  int in_ch = 0, out_ch = 0, h = 0, w = 0;

  struct Cache {
    Matrix x, y1, z2, y;  // z2: pre-skip conv output, y: block output
  };

  void init(int out_channels, int in_channels, int height, int width, Act a, Rng& rng,
            double scale = 1.0);
  Matrix apply(const Matrix& X) const;
  Matrix forward(const Matrix& X, Cache& cache) const;
  Matrix backward(const Matrix& dY, const Cache& cache);
  void zero_grad();
  void collect(std::vector<ParamRef>& out);
  void save(std::ostream& os) const;
  void load(std::istream& is);
  int64_t param_count() const;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::vector<Matrix> m, v;

  void step(const std::vector<ParamRef>& params);
  void save(std::ostream& os) const;
  void load(std::istream& is);
};

void zero_grads(const std::vector<ParamRef>& params);

// central finite differences over every parameter; returns max relative error
// against the analytic gradient. loss() must recompute the loss from current
// parameter values; analytic gradients must already be accumulated in g.
double max_rel_grad_error(const std::vector<ParamRef>& params,
                          const std::function<double()>& loss, double h = 1e-6);

}  // namespace craftrl::nn
