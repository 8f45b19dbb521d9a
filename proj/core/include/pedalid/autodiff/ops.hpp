#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pedalid/autodiff/tape.hpp"
#include "pedalid/autodiff/tensor.hpp"

// Differentiable primitives. Every function records itself on the tape when
// the tape is recording and at least one input requires a gradient; otherwise
// it returns a constant. Shape violations throw pedalid::ShapeError.
namespace pedalid::ad::ops {

enum class LinearKind { add, mul, matmul, scale };

/// Dispatch over the four linear/elementwise kinds. `scale` reads its factor
/// from the single value of `b` (which is treated as a constant).
Tensor elementwise_and_linear(Tape& tape, const Tensor& a, const Tensor& b, LinearKind kind);

/// a + b. `b` may also be a rank-1 vector matching a's trailing extent.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
/// [M,K] x [K,N] -> [M,N]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t zero_pad = 0;
};

/// Cross-correlation of x[B,Cin,T] with w[Cout,Cin,K]; `bias` ([Cout]) may be
/// undefined. Output length floor((T + 2*pad - K) / stride) + 1.
Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias,
              Conv1dOptions options = {});
std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, Conv1dOptions options);

/// x where x >= 0, alpha * x elsewhere. alpha holds one slope per channel
/// (axis 1 of x) or a single shared slope.
Tensor prelu(Tape& tape, const Tensor& x, const Tensor& alpha);

/// Row-wise over [B,K], max-subtracted.
Tensor softmax(Tape& tape, const Tensor& x);
Tensor log_softmax(Tape& tape, const Tensor& x);

/// [B,C,T] -> [B,C], mean over time.
Tensor global_avg_pool(Tape& tape, const Tensor& x);

/// [B,Na] ++ [B,Nb] -> [B,Na+Nb]
Tensor concat(Tape& tape, const Tensor& a, const Tensor& b);
/// Columns [begin, begin+count) of a [B,N] tensor.
Tensor slice(Tape& tape, const Tensor& a, std::size_t begin, std::size_t count);
/// x[:, :, t] of a [B,F,T] tensor as [B,F].
Tensor time_step(Tape& tape, const Tensor& x, std::size_t t);

/// Per-channel batch statistics produced by batch_norm_train.
struct BatchMoments {
  std::vector<double> mean;
  std::vector<double> variance;  // biased
  std::size_t count = 0;         // elements per channel
};

/// Normalizes x ([B,C] or [B,C,T]) with its own per-channel batch statistics,
/// then applies gamma and beta. Requires at least two elements per channel.
Tensor batch_norm_train(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        double epsilon, BatchMoments* moments = nullptr);
/// Normalizes with fixed statistics; mean and variance are constants.
Tensor batch_norm_eval(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       std::span<const double> mean, std::span<const double> variance,
                       double epsilon);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

/// -mean_b logp[b, target_b] over [B,K] log-probabilities.
Tensor nll_loss(Tape& tape, const Tensor& log_probs, std::span<const std::size_t> targets);
/// mean_b ( -x[b,c] + log sum_j exp x[b,j] ) over [B,K] raw scores.
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::size_t> targets);

}  // namespace pedalid::ad::ops
