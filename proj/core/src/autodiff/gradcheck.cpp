#include "pedalid/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pedalid/util/error.hpp"

namespace pedalid::ad {

GradCheckResult finite_diff_check(const ScalarFn& f, std::vector<Tensor> inputs,
                                  const GradCheckOptions& options) {
  std::vector<bool> had_grad;
  std::vector<std::vector<double>> saved_grads;
  for (auto& t : inputs) {
    had_grad.push_back(t.requires_grad());
    saved_grads.emplace_back(t.grad().begin(), t.grad().end());
    t.set_requires_grad(true);
    t.zero_grad();
  }

  {
    Tape tape;
    Tensor loss = f(tape);
    if (loss.numel() != 1) throw ShapeError("finite_diff_check: function must be scalar-valued");
    tape.backward(loss);
  }

  auto probe = [&f] {
    Tape tape = Tape::inference();
    return f(tape).item();
  };

  GradCheckResult result;
  const double h = options.step;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto vals = inputs[k].values();
    std::vector<double> analytic(inputs[k].grad().begin(), inputs[k].grad().end());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (options.exclude && options.exclude(k, i)) {
        ++result.skipped;
        continue;
      }
      const double orig = vals[i];
      auto central = [&](double step) {
        vals[i] = orig + step;
        const double up = probe();
        vals[i] = orig - step;
        const double down = probe();
        vals[i] = orig;
        return (up - down) / (2.0 * step);
      };
      const double numeric = central(h);
      if (options.skip_kinks) {
        const double half = central(h / 2);
        const double scale = std::max({std::abs(numeric), std::abs(half), options.denominator_floor});
        if (std::abs(numeric - half) > options.kink_tolerance * scale) {
          ++result.kinks;
          continue;
        }
      }
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.denominator_floor});
      result.max_relative_error =
          std::max(result.max_relative_error, std::abs(analytic[i] - numeric) / denom);
      ++result.checked;
    }
  }

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    inputs[k].set_requires_grad(had_grad[k]);
    auto g = inputs[k].grad();
    std::copy(saved_grads[k].begin(), saved_grads[k].end(), g.begin());
    if (saved_grads[k].empty()) std::fill(g.begin(), g.end(), 0.0);
  }
  return result;
}

double finite_diff_check(const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x,
                         double step) {
  GradCheckOptions opt;
  opt.step = step;
  return finite_diff_check([&](Tape& t) { return f(t, x); }, {x}, opt).max_relative_error;
}

}  // namespace pedalid::ad
