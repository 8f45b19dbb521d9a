#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pedalid/autodiff/tape.hpp"
#include "pedalid/autodiff/tensor.hpp"
#include "pedalid/util/random.hpp"

namespace pedalid::testkit {

using Vec = std::vector<double>;

Vec uniform(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0);
ad::Tensor random_tensor(Rng& rng, const ad::Shape& shape, double lo = -2.0, double hi = 2.0);
/// sum(y * w): a scalar whose gradient w.r.t. y is the generic vector w.
ad::Tensor weighted_sum(ad::Tape& tape, const ad::Tensor& y, const ad::Tensor& w);
double max_abs_diff(const Vec& a, const Vec& b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

// Reference implementations written as plain loops, sharing no code with the
// library.

/// a [M,K] x b [K,N]
Vec matmul_oracle(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n);
/// x [B,Cin,T], w [Cout,Cin,K], bias [Cout] or empty
Vec conv1d_oracle(const Vec& x, const Vec& w, const Vec& bias, std::size_t batch, std::size_t cin,
                  std::size_t len, std::size_t cout, std::size_t kernel, std::size_t stride,
                  std::size_t pad);
struct BnOracle {
  Vec out, mean, biased_var, unbiased_var;
};
/// x [B,C,T] (T = 1 for [B,C]); two passes over the data.
BnOracle batchnorm_oracle(const Vec& x, const Vec& gamma, const Vec& beta, std::size_t batch,
                          std::size_t channels, std::size_t len, double eps);
struct LstmLayerRef {
  Vec w_ih, w_hh, b_ih, b_hh;  // [F,4H], [H,4H], [4H], [4H]
  std::size_t in = 0;
};
/// One cell update per batch row; h and c are updated in place.
void lstm_step_oracle(const Vec& x, Vec& h, Vec& c, const LstmLayerRef& w, std::size_t batch,
                      std::size_t hidden);
/// Stacked LSTM over x [B,F,T] without dropout; last layer's final h [B,H].
Vec lstm_sequence_oracle(const Vec& x, const std::vector<LstmLayerRef>& layers,
                         std::size_t batch, std::size_t features, std::size_t len,
                         std::size_t hidden);
/// Straight-line Adam recurrence for a single flat parameter vector.
struct AdamRef {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Vec m, v;
  long t = 0;
  void step(Vec& w, const Vec& g, double lr);
};
/// mean_b( log sum_j exp x[b,j] - x[b,c_b] ) without any stabilization.
double cross_entropy_oracle(const Vec& logits, const std::vector<std::size_t>& targets,
                            std::size_t batch, std::size_t classes);

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  double max_error = 0.0;  // relative for gradient suites, absolute for oracle suites
  double tolerance = 0.0;
  std::size_t kinks = 0;  // coordinates skipped as kink crossings
  bool pass() const { return cases > 0 && max_error < tolerance; }
};

/// Finite-difference checks of every autodiff primitive, `cases` random
/// instances each, inputs uniform in [-2,2], extents <= 8.
std::vector<SuiteResult> primitive_gradient_suite(std::uint64_t seed, std::size_t cases);
/// Same for every layer and model block, in train mode with deterministic
/// dropout masks and, for blocks with batch norm, in eval mode too. Composite
/// checks skip kink crossings and floor the relative error at the
/// finite-difference resolution.
std::vector<SuiteResult> layer_gradient_suite(std::uint64_t seed, std::size_t cases);
/// Library against the loop oracles above on small random instances.
std::vector<SuiteResult> oracle_suite(std::uint64_t seed, std::size_t cases);

}  // namespace pedalid::testkit
