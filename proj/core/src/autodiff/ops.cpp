#include "pedalid/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "pedalid/util/error.hpp"

namespace pedalid::ad::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using NodePtr = std::shared_ptr<TensorNode>;

[[noreturn]] void shape_fail(std::string_view op, const Tensor& a, const Tensor& b,
                             std::string_view why = {}) {
  std::string msg = std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                    shape_to_string(b.shape());
  if (!why.empty()) msg += " (" + std::string(why) + ")";
  throw ShapeError(msg);
}

void require_rank(std::string_view op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_to_string(t.shape()));
  }
}

// Grad buffer of an input that needs one, or nullptr.
double* grad_of(TensorNode* n) {
  if (!n || !n->requires_grad) return nullptr;
  n->ensure_grad();
  return n->grad.data();
}

std::vector<NodePtr> nodes(std::initializer_list<const Tensor*> ts) {
  std::vector<NodePtr> out;
  for (const Tensor* t : ts) {
    if (t && t->defined()) out.push_back(t->node());
  }
  return out;
}

// Channel count and inner extent for tensors laid out [B,C] or [B,C,T].
struct ChannelLayout {
  std::size_t batch = 1, channels = 1, inner = 1;
};

ChannelLayout channel_layout(const Tensor& x) {
  const auto& s = x.shape();
  if (s.size() == 1) return {1, 1, s[0]};
  if (s.size() == 2) return {s[0], s[1], 1};
  return {s[0], s[1], s[2]};
}

}  // namespace

Tensor elementwise_and_linear(Tape& tape, const Tensor& a, const Tensor& b, LinearKind kind) {
  switch (kind) {
    case LinearKind::add:
      return add(tape, a, b);
    case LinearKind::mul:
      return mul(tape, a, b);
    case LinearKind::matmul:
      return matmul(tape, a, b);
    case LinearKind::scale:
      if (b.numel() != 1) shape_fail("scale", a, b, "factor must be a single value");
      return scale(tape, a, b.values()[0]);
  }
  throw ShapeError("unknown linear kind");
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool bias = !same && b.rank() == 1 && b.numel() == a.shape().back();
  if (!same && !bias) shape_fail("add", a, b);
  Tensor out(a.shape());
  auto o = out.values();
  auto av = a.values();
  auto bv = b.values();
  const std::size_t n = bv.size();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[same ? i : i % n];
  if (tape.wants({&a, &b})) {
    TensorNode *A = a.node().get(), *B = b.node().get(), *O = out.node().get();
    tape.record("add", nodes({&a, &b}), out, [A, B, O, same, n] {
      if (double* ga = grad_of(A)) {
        for (std::size_t i = 0; i < O->grad.size(); ++i) ga[i] += O->grad[i];
      }
      if (double* gb = grad_of(B)) {
        for (std::size_t i = 0; i < O->grad.size(); ++i) gb[same ? i : i % n] += O->grad[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a, b);
  Tensor out(a.shape());
  auto o = out.values();
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  if (tape.wants({&a, &b})) {
    TensorNode *A = a.node().get(), *B = b.node().get(), *O = out.node().get();
    tape.record("mul", nodes({&a, &b}), out, [A, B, O] {
      const auto& g = O->grad;
      if (double* ga = grad_of(A)) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B->value[i];
      }
      if (double* gb = grad_of(B)) {
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A->value[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  Tensor out(a.shape());
  auto o = out.values();
  auto av = a.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * factor;
  if (tape.wants({&a})) {
    TensorNode *A = a.node().get(), *O = out.node().get();
    tape.record("scale", nodes({&a}), out, [A, O, factor] {
      double* ga = grad_of(A);
      for (std::size_t i = 0; i < O->grad.size(); ++i) ga[i] += O->grad[i] * factor;
    });
  }
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_fail("matmul", a, b);
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  Tensor out({a.dim(0), b.dim(1)});
  MatMap(out.values().data(), m, n).noalias() =
      ConstMatMap(a.values().data(), m, k) * ConstMatMap(b.values().data(), k, n);
  if (tape.wants({&a, &b})) {
    TensorNode *A = a.node().get(), *B = b.node().get(), *O = out.node().get();
    tape.record("matmul", nodes({&a, &b}), out, [A, B, O, m, k, n] {
      ConstMatMap g(O->grad.data(), m, n);
      if (double* ga = grad_of(A)) {
        MatMap(ga, m, k).noalias() += g * ConstMatMap(B->value.data(), k, n).transpose();
      }
      if (double* gb = grad_of(B)) {
        MatMap(gb, k, n).noalias() += ConstMatMap(A->value.data(), m, k).transpose() * g;
      }
    });
  }
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    // split by sign so exp never overflows
    const double v = xv[i];
    if (v >= 0) {
      o[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      o[i] = e / (1.0 + e);
    }
  }
  if (tape.wants({&x})) {
    TensorNode *X = x.node().get(), *O = out.node().get();
    tape.record("sigmoid", nodes({&x}), out, [X, O] {
      double* gx = grad_of(X);
      for (std::size_t i = 0; i < O->grad.size(); ++i) {
        const double s = O->value[i];
        gx[i] += O->grad[i] * s * (1.0 - s);
      }
    });
  }
  return out;
}

Tensor tanh(Tape& tape, const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(xv[i]);
  if (tape.wants({&x})) {
    TensorNode *X = x.node().get(), *O = out.node().get();
    tape.record("tanh", nodes({&x}), out, [X, O] {
      double* gx = grad_of(X);
      for (std::size_t i = 0; i < O->grad.size(); ++i) {
        const double t = O->value[i];
        gx[i] += O->grad[i] * (1.0 - t * t);
      }
    });
  }
  return out;
}

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, Conv1dOptions options) {
  if (options.stride == 0) throw ShapeError("conv1d: stride must be positive");
  const std::size_t padded = length + 2 * options.zero_pad;
  if (kernel == 0 || kernel > padded) return 0;
  return (padded - kernel) / options.stride + 1;
}

namespace {

// col[(ci*K + k), t] = x[ci, t*stride + k - pad], zero outside the signal.
void im2col(const double* x, std::size_t cin, std::size_t len, std::size_t kernel,
            std::size_t out_len, Conv1dOptions opt, double* col) {
  const auto pad = static_cast<std::ptrdiff_t>(opt.zero_pad);
  const auto slen = static_cast<std::ptrdiff_t>(len);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const double* xr = x + ci * len;
    for (std::size_t k = 0; k < kernel; ++k) {
      double* cr = col + (ci * kernel + k) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) {
        const auto src = static_cast<std::ptrdiff_t>(t * opt.stride + k) - pad;
        cr[t] = (src >= 0 && src < slen) ? xr[src] : 0.0;
      }
    }
  }
}

void col2im_add(const double* col, std::size_t cin, std::size_t len, std::size_t kernel,
                std::size_t out_len, Conv1dOptions opt, double* gx) {
  const auto pad = static_cast<std::ptrdiff_t>(opt.zero_pad);
  const auto slen = static_cast<std::ptrdiff_t>(len);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    double* gr = gx + ci * len;
    for (std::size_t k = 0; k < kernel; ++k) {
      const double* cr = col + (ci * kernel + k) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) {
        const auto src = static_cast<std::ptrdiff_t>(t * opt.stride + k) - pad;
        if (src >= 0 && src < slen) gr[src] += cr[t];
      }
    }
  }
}

}  // namespace

Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias,
              Conv1dOptions opt) {
  require_rank("conv1d", x, 3);
  require_rank("conv1d", w, 3);
  if (x.dim(1) != w.dim(1)) shape_fail("conv1d", x, w, "input channel mismatch");
  const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = w.dim(0), kernel = w.dim(2);
  if (bias.defined() && (bias.rank() != 1 || bias.numel() != cout)) {
    shape_fail("conv1d", w, bias, "bias must have one entry per output channel");
  }
  const std::size_t out_len = conv1d_output_length(len, kernel, opt);
  if (out_len < 1) {
    throw ShapeError("conv1d: kernel " + std::to_string(kernel) + " does not fit length " +
                     std::to_string(len) + " with padding " + std::to_string(opt.zero_pad));
  }
  const auto rows = static_cast<Eigen::Index>(cin * kernel);
  const auto cols = static_cast<Eigen::Index>(out_len);
  const auto co = static_cast<Eigen::Index>(cout);

  Tensor out({batch, cout, out_len});
  Buffer col(cin * kernel * out_len);
  ConstMatMap wm(w.values().data(), co, rows);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(x.values().data() + b * cin * len, cin, len, kernel, out_len, opt, col.data());
    MatMap ob(out.values().data() + b * cout * out_len, co, cols);
    ob.noalias() = wm * ConstMatMap(col.data(), rows, cols);
    if (bias.defined()) {
      for (std::size_t c = 0; c < cout; ++c) ob.row(static_cast<Eigen::Index>(c)).array() += bias.values()[c];
    }
  }

  if (tape.wants({&x, &w, &bias})) {
    TensorNode *X = x.node().get(), *W = w.node().get(), *O = out.node().get();
    TensorNode* Bn = bias.defined() ? bias.node().get() : nullptr;
    tape.record("conv1d", nodes({&x, &w, &bias}), out,
                [=] {
                  double* gx = grad_of(X);
                  double* gw = grad_of(W);
                  double* gb = grad_of(Bn);
                  Buffer colbuf(static_cast<std::size_t>(rows * cols));
                  ConstMatMap wmat(W->value.data(), co, rows);
                  for (std::size_t b = 0; b < batch; ++b) {
                    ConstMatMap g(O->grad.data() + b * cout * out_len, co, cols);
                    if (gb) {
                      for (std::size_t c = 0; c < cout; ++c) gb[c] += g.row(static_cast<Eigen::Index>(c)).sum();
                    }
                    if (gw) {
                      im2col(X->value.data() + b * cin * len, cin, len, kernel, out_len, opt,
                             colbuf.data());
                      MatMap(gw, co, rows).noalias() +=
                          g * ConstMatMap(colbuf.data(), rows, cols).transpose();
                    }
                    if (gx) {
                      MatMap(colbuf.data(), rows, cols).noalias() = wmat.transpose() * g;
                      col2im_add(colbuf.data(), cin, len, kernel, out_len, opt,
                                 gx + b * cin * len);
                    }
                  }
                });
  }
  return out;
}

Tensor prelu(Tape& tape, const Tensor& x, const Tensor& alpha) {
  const auto lay = channel_layout(x);
  const std::size_t na = alpha.numel();
  if (alpha.rank() != 1 || (na != 1 && na != lay.channels)) {
    shape_fail("prelu", x, alpha, "alpha needs one slope per channel or a single slope");
  }
  Tensor out(x.shape());
  auto o = out.values();
  auto xv = x.values();
  auto av = alpha.values();
  std::size_t i = 0;
  for (std::size_t b = 0; b < lay.batch; ++b) {
    for (std::size_t c = 0; c < lay.channels; ++c) {
      const double a = av[na == 1 ? 0 : c];
      for (std::size_t t = 0; t < lay.inner; ++t, ++i) o[i] = xv[i] >= 0 ? xv[i] : a * xv[i];
    }
  }
  if (tape.wants({&x, &alpha})) {
    TensorNode *X = x.node().get(), *A = alpha.node().get(), *O = out.node().get();
    tape.record("prelu", nodes({&x, &alpha}), out, [X, A, O, lay, na] {
      double* gx = grad_of(X);
      double* ga = grad_of(A);
      std::size_t i = 0;
      for (std::size_t b = 0; b < lay.batch; ++b) {
        for (std::size_t c = 0; c < lay.channels; ++c) {
          const std::size_t ai = na == 1 ? 0 : c;
          const double a = A->value[ai];
          for (std::size_t t = 0; t < lay.inner; ++t, ++i) {
            const double v = X->value[i];
            const double g = O->grad[i];
            if (v >= 0) {
              if (gx) gx[i] += g;
            } else {
              if (gx) gx[i] += g * a;
              if (ga) ga[ai] += g * v;
            }
          }
        }
      }
    });
  }
  return out;
}

namespace {

// Writes log-softmax rows of x into out.
void log_softmax_rows(std::span<const double> x, std::size_t rows, std::size_t k,
                      std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * k;
    const double mx = *std::max_element(xr, xr + k);
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(xr[j] - mx);
    const double lse = std::log(s);
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] = xr[j] - mx - lse;
  }
}

}  // namespace

Tensor softmax(Tape& tape, const Tensor& x) {
  require_rank("softmax", x, 2);
  const std::size_t rows = x.dim(0), k = x.dim(1);
  if (k < 1) throw ShapeError("softmax: need at least one class");
  Tensor out(x.shape());
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * k;
    const double mx = *std::max_element(xr, xr + k);
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) s += (o[r * k + j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < k; ++j) o[r * k + j] /= s;
  }
  if (tape.wants({&x})) {
    TensorNode *X = x.node().get(), *O = out.node().get();
    tape.record("softmax", nodes({&x}), out, [X, O, rows, k] {
      double* gx = grad_of(X);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = O->value.data() + r * k;
        const double* g = O->grad.data() + r * k;
        double dot = 0;
        for (std::size_t j = 0; j < k; ++j) dot += g[j] * y[j];
        for (std::size_t j = 0; j < k; ++j) gx[r * k + j] += y[j] * (g[j] - dot);
      }
    });
  }
  return out;
}

Tensor log_softmax(Tape& tape, const Tensor& x) {
  require_rank("log_softmax", x, 2);
  const std::size_t rows = x.dim(0), k = x.dim(1);
  if (k < 1) throw ShapeError("log_softmax: need at least one class");
  Tensor out(x.shape());
  log_softmax_rows(x.values(), rows, k, out.values());
  if (tape.wants({&x})) {
    TensorNode *X = x.node().get(), *O = out.node().get();
    tape.record("log_softmax", nodes({&x}), out, [X, O, rows, k] {
      double* gx = grad_of(X);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = O->value.data() + r * k;
        const double* g = O->grad.data() + r * k;
        double gs = 0;
        for (std::size_t j = 0; j < k; ++j) gs += g[j];
        for (std::size_t j = 0; j < k; ++j) gx[r * k + j] += g[j] - std::exp(y[j]) * gs;
      }
    });
  }
  return out;
}

Tensor global_avg_pool(Tape& tape, const Tensor& x) {
  require_rank("global_avg_pool", x, 3);
  const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
  if (len < 1) throw ShapeError("global_avg_pool: empty time axis");
  Tensor out({batch, ch});
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < batch * ch; ++i) {
    double s = 0;
    for (std::size_t t = 0; t < len; ++t) s += xv[i * len + t];
    o[i] = s / static_cast<double>(len);
  }
  if (tape.wants({&x})) {
    TensorNode *X = x.node().get(), *O = out.node().get();
    tape.record("global_avg_pool", nodes({&x}), out, [X, O, len] {
      double* gx = grad_of(X);
      const double inv = 1.0 / static_cast<double>(len);
      for (std::size_t i = 0; i < O->grad.size(); ++i) {
        const double g = O->grad[i] * inv;
        for (std::size_t t = 0; t < len; ++t) gx[i * len + t] += g;
      }
    });
  }
  return out;
}

Tensor concat(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    shape_fail("concat", a, b, "batch extents must match");
  }
  const std::size_t batch = a.dim(0), na = a.dim(1), nb = b.dim(1), n = na + nb;
  Tensor out({batch, n});
  auto o = out.values();
  for (std::size_t r = 0; r < batch; ++r) {
    std::copy_n(a.values().data() + r * na, na, o.data() + r * n);
    std::copy_n(b.values().data() + r * nb, nb, o.data() + r * n + na);
  }
  if (tape.wants({&a, &b})) {
    TensorNode *A = a.node().get(), *B = b.node().get(), *O = out.node().get();
    tape.record("concat", nodes({&a, &b}), out, [A, B, O, batch, na, nb, n] {
      double* ga = grad_of(A);
      double* gb = grad_of(B);
      for (std::size_t r = 0; r < batch; ++r) {
        const double* g = O->grad.data() + r * n;
        if (ga) {
          for (std::size_t j = 0; j < na; ++j) ga[r * na + j] += g[j];
        }
        if (gb) {
          for (std::size_t j = 0; j < nb; ++j) gb[r * nb + j] += g[na + j];
        }
      }
    });
  }
  return out;
}

Tensor slice(Tape& tape, const Tensor& a, std::size_t begin, std::size_t count) {
  require_rank("slice", a, 2);
  const std::size_t batch = a.dim(0), n = a.dim(1);
  if (begin + count > n || count == 0) {
    throw ShapeError("slice: columns [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") out of range for " +
                     shape_to_string(a.shape()));
  }
  Tensor out({batch, count});
  for (std::size_t r = 0; r < batch; ++r) {
    std::copy_n(a.values().data() + r * n + begin, count, out.values().data() + r * count);
  }
  if (tape.wants({&a})) {
    TensorNode *A = a.node().get(), *O = out.node().get();
    tape.record("slice", nodes({&a}), out, [A, O, batch, n, begin, count] {
      double* ga = grad_of(A);
      for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t j = 0; j < count; ++j) ga[r * n + begin + j] += O->grad[r * count + j];
      }
    });
  }
  return out;
}

Tensor time_step(Tape& tape, const Tensor& x, std::size_t t) {
  require_rank("time_step", x, 3);
  const std::size_t batch = x.dim(0), feat = x.dim(1), len = x.dim(2);
  if (t >= len) {
    throw ShapeError("time_step: index " + std::to_string(t) + " out of range for " +
                     shape_to_string(x.shape()));
  }
  Tensor out({batch, feat});
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < batch * feat; ++i) o[i] = xv[i * len + t];
  if (tape.wants({&x})) {
    TensorNode *X = x.node().get(), *O = out.node().get();
    tape.record("time_step", nodes({&x}), out, [X, O, len, t] {
      double* gx = grad_of(X);
      for (std::size_t i = 0; i < O->grad.size(); ++i) gx[i * len + t] += O->grad[i];
    });
  }
  return out;
}

namespace {

void check_bn_params(std::string_view op, const Tensor& x, const Tensor& gamma,
                     const Tensor& beta) {
  if (x.rank() < 2) throw ShapeError(std::string(op) + ": input must be [B,C] or [B,C,T]");
  const std::size_t c = x.dim(1);
  if (gamma.numel() != c) shape_fail(op, x, gamma, "gamma needs one entry per channel");
  if (beta.numel() != c) shape_fail(op, x, beta, "beta needs one entry per channel");
}

}  // namespace

Tensor batch_norm_train(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        double epsilon, BatchMoments* moments) {
  check_bn_params("batch_norm", x, gamma, beta);
  const auto lay = channel_layout(x);
  const std::size_t count = lay.batch * lay.inner;
  if (count < 2) {
    throw ShapeError("batch_norm: train mode needs at least 2 values per channel, got " +
                     std::to_string(count) + " for " + shape_to_string(x.shape()));
  }
  const std::size_t ch = lay.channels;
  std::vector<double> mu(ch, 0.0), var(ch, 0.0);
  auto xv = x.values();
  auto at = [&](std::size_t b, std::size_t c) { return (b * ch + c) * lay.inner; };
  for (std::size_t c = 0; c < ch; ++c) {
    double s = 0;
    for (std::size_t b = 0; b < lay.batch; ++b) {
      for (std::size_t t = 0; t < lay.inner; ++t) s += xv[at(b, c) + t];
    }
    mu[c] = s / static_cast<double>(count);
    double ss = 0;
    for (std::size_t b = 0; b < lay.batch; ++b) {
      for (std::size_t t = 0; t < lay.inner; ++t) {
        const double d = xv[at(b, c) + t] - mu[c];
        ss += d * d;
      }
    }
    var[c] = ss / static_cast<double>(count);
  }
  std::vector<double> inv_std(ch);
  for (std::size_t c = 0; c < ch; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + epsilon);

  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto o = out.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  for (std::size_t b = 0; b < lay.batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      for (std::size_t t = 0; t < lay.inner; ++t) {
        const std::size_t i = at(b, c) + t;
        const double h = (xv[i] - mu[c]) * inv_std[c];
        (*xhat)[i] = h;
        o[i] = gv[c] * h + bv[c];
      }
    }
  }
  if (moments) {
    moments->mean = mu;
    moments->variance = var;
    moments->count = count;
  }
  if (tape.wants({&x, &gamma, &beta})) {
    TensorNode *X = x.node().get(), *G = gamma.node().get(), *Bt = beta.node().get(),
               *O = out.node().get();
    tape.record("batch_norm_train", nodes({&x, &gamma, &beta}), out,
                [X, G, Bt, O, lay, count, xhat, inv_std = std::move(inv_std)] {
                  double* gx = grad_of(X);
                  double* gg = grad_of(G);
                  double* gb = grad_of(Bt);
                  const std::size_t ch = lay.channels;
                  const auto n = static_cast<double>(count);
                  for (std::size_t c = 0; c < ch; ++c) {
                    double sum_g = 0, sum_gh = 0;
                    for (std::size_t b = 0; b < lay.batch; ++b) {
                      const std::size_t base = (b * ch + c) * lay.inner;
                      for (std::size_t t = 0; t < lay.inner; ++t) {
                        sum_g += O->grad[base + t];
                        sum_gh += O->grad[base + t] * (*xhat)[base + t];
                      }
                    }
                    if (gg) gg[c] += sum_gh;
                    if (gb) gb[c] += sum_g;
                    if (!gx) continue;
                    const double gam = G->value[c];
                    const double k = gam * inv_std[c] / n;
                    for (std::size_t b = 0; b < lay.batch; ++b) {
                      const std::size_t base = (b * ch + c) * lay.inner;
                      for (std::size_t t = 0; t < lay.inner; ++t) {
                        const std::size_t i = base + t;
                        gx[i] += k * (n * O->grad[i] - sum_g - (*xhat)[i] * sum_gh);
                      }
                    }
                  }
                });
  }
  return out;
}

Tensor batch_norm_eval(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       std::span<const double> mean, std::span<const double> variance,
                       double epsilon) {
  check_bn_params("batch_norm", x, gamma, beta);
  const auto lay = channel_layout(x);
  const std::size_t ch = lay.channels;
  if (mean.size() != ch || variance.size() != ch) {
    throw ShapeError("batch_norm: running statistics need " + std::to_string(ch) + " channels");
  }
  std::vector<double> inv_std(ch);
  for (std::size_t c = 0; c < ch; ++c) inv_std[c] = 1.0 / std::sqrt(variance[c] + epsilon);
  std::vector<double> mu(mean.begin(), mean.end());
  Tensor out(x.shape());
  auto o = out.values();
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  for (std::size_t b = 0; b < lay.batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t base = (b * ch + c) * lay.inner;
      for (std::size_t t = 0; t < lay.inner; ++t) {
        o[base + t] = gv[c] * ((xv[base + t] - mu[c]) * inv_std[c]) + bv[c];
      }
    }
  }
  if (tape.wants({&x, &gamma, &beta})) {
    TensorNode *X = x.node().get(), *G = gamma.node().get(), *Bt = beta.node().get(),
               *O = out.node().get();
    tape.record("batch_norm_eval", nodes({&x, &gamma, &beta}), out,
                [X, G, Bt, O, lay, mu = std::move(mu), inv_std = std::move(inv_std)] {
                  double* gx = grad_of(X);
                  double* gg = grad_of(G);
                  double* gb = grad_of(Bt);
                  const std::size_t ch = lay.channels;
                  for (std::size_t b = 0; b < lay.batch; ++b) {
                    for (std::size_t c = 0; c < ch; ++c) {
                      const std::size_t base = (b * ch + c) * lay.inner;
                      for (std::size_t t = 0; t < lay.inner; ++t) {
                        const double g = O->grad[base + t];
                        if (gx) gx[base + t] += g * G->value[c] * inv_std[c];
                        if (gg) gg[c] += g * (X->value[base + t] - mu[c]) * inv_std[c];
                        if (gb) gb[c] += g;
                      }
                    }
                  }
                });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double s = 0;
  for (double v : x.values()) s += v;
  Tensor out = Tensor::scalar(s);
  if (tape.wants({&x})) {
    TensorNode *X = x.node().get(), *O = out.node().get();
    tape.record("sum", nodes({&x}), out, [X, O] {
      double* gx = grad_of(X);
      for (std::size_t i = 0; i < X->value.size(); ++i) gx[i] += O->grad[0];
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.numel()));
}

namespace {

void check_targets(std::string_view op, const Tensor& x, std::span<const std::size_t> targets) {
  if (x.rank() != 2) throw ShapeError(std::string(op) + ": expected [B,K] input");
  if (targets.size() != x.dim(0)) {
    throw ShapeError(std::string(op) + ": " + std::to_string(targets.size()) +
                     " targets for batch of " + std::to_string(x.dim(0)));
  }
  for (std::size_t t : targets) {
    if (t >= x.dim(1)) {
      throw ShapeError(std::string(op) + ": target " + std::to_string(t) +
                       " out of range for " + std::to_string(x.dim(1)) + " classes");
    }
  }
}

}  // namespace

Tensor nll_loss(Tape& tape, const Tensor& log_probs, std::span<const std::size_t> targets) {
  check_targets("nll_loss", log_probs, targets);
  const std::size_t batch = log_probs.dim(0), k = log_probs.dim(1);
  double s = 0;
  for (std::size_t r = 0; r < batch; ++r) s -= log_probs.values()[r * k + targets[r]];
  Tensor out = Tensor::scalar(s / static_cast<double>(batch));
  if (tape.wants({&log_probs})) {
    TensorNode *X = log_probs.node().get(), *O = out.node().get();
    std::vector<std::size_t> tg(targets.begin(), targets.end());
    tape.record("nll_loss", nodes({&log_probs}), out, [X, O, k, tg = std::move(tg)] {
      double* gx = grad_of(X);
      const double g = O->grad[0] / static_cast<double>(tg.size());
      for (std::size_t r = 0; r < tg.size(); ++r) gx[r * k + tg[r]] -= g;
    });
  }
  return out;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::size_t> targets) {
  check_targets("cross_entropy", logits, targets);
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  std::vector<double> logp(logits.numel());
  log_softmax_rows(logits.values(), batch, k, logp);
  double s = 0;
  for (std::size_t r = 0; r < batch; ++r) s -= logp[r * k + targets[r]];
  Tensor out = Tensor::scalar(s / static_cast<double>(batch));
  if (tape.wants({&logits})) {
    TensorNode *X = logits.node().get(), *O = out.node().get();
    std::vector<std::size_t> tg(targets.begin(), targets.end());
    tape.record("cross_entropy", nodes({&logits}), out,
                [X, O, k, tg = std::move(tg), logp = std::move(logp)] {
                  double* gx = grad_of(X);
                  const double g = O->grad[0] / static_cast<double>(tg.size());
                  for (std::size_t r = 0; r < tg.size(); ++r) {
                    for (std::size_t j = 0; j < k; ++j) {
                      const double p = std::exp(logp[r * k + j]);
                      gx[r * k + j] += g * (p - (j == tg[r] ? 1.0 : 0.0));
                    }
                  }
                });
  }
  return out;
}

}  // namespace pedalid::ad::ops
