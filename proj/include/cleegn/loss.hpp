#pragma once

#include "cleegn/parallel.hpp"
#include "cleegn/tensor.hpp"

namespace cleegn {

template <typename Real>
struct MseResult {
  double loss = 0.0;
  Tensor4<Real> grad;  // d(loss)/d(pred), 2*(pred - target)/N
};

template <typename Real>
MseResult<Real> mse_loss(const Tensor4<Real>& pred, const Tensor4<Real>& target) {
  require_same_shape(pred, target, "mse_loss");
  const int64_t n = pred.size();
  if (n == 0) throw std::runtime_error("mse_loss: empty tensors");

  MseResult<Real> r;
  r.grad = Tensor4<Real>(pred.dims);
  const Real inv = Real(2) / static_cast<Real>(n);

  std::vector<double> partial(kReduceChunks, 0.0);
  run_chunks([&](int64_t c) {
    auto [i0, i1] = chunk_range(n, c);
    double acc = 0.0;
    for (int64_t i = i0; i < i1; ++i) {
      const size_t si = static_cast<size_t>(i);
      const Real d = pred.data[si] - target.data[si];
      acc += static_cast<double>(d) * static_cast<double>(d);
      r.grad.data[si] = d * inv;
    }
    partial[static_cast<size_t>(c)] = acc;
  });
  for (double p : partial) r.loss += p;
  r.loss /= static_cast<double>(n);
  return r;
}

}  // namespace cleegn
