#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cleegn {

// First/second moment state for one parameter array.
template <typename Real>
struct AdamState {
  std::vector<Real> m, v;
  int64_t t = 0;
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real eps = Real(1e-8);

  AdamState() = default;
  explicit AdamState(size_t n) : m(n, Real(0)), v(n, Real(0)) {}
};

// One Adam update with bias correction, no weight decay.
template <typename Real>
void adam_step(Real* params, const Real* grads, size_t n, AdamState<Real>& st, Real lr,
               const std::string& name = "param") {
  if (st.m.size() != n || st.v.size() != n)
    throw std::runtime_error("adam_step: state for '" + name + "' sized " +
                             std::to_string(st.m.size()) + ", expected " + std::to_string(n));
  st.t += 1;
  const double c1 = 1.0 - std::pow(static_cast<double>(st.beta1), static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(static_cast<double>(st.beta2), static_cast<double>(st.t));
  const Real ic1 = static_cast<Real>(1.0 / c1);
  const Real ic2 = static_cast<Real>(1.0 / c2);
  for (size_t i = 0; i < n; ++i) {
    const Real g = grads[i];
    if (!std::isfinite(static_cast<double>(g)))
      throw std::runtime_error("adam_step: non-finite gradient in '" + name + "' at index " +
                               std::to_string(i));
    st.m[i] = st.beta1 * st.m[i] + (Real(1) - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (Real(1) - st.beta2) * g * g;
    const Real mhat = st.m[i] * ic1;
    const Real vhat = st.v[i] * ic2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

// Exponential decay, applied once per epoch.
inline double lr_schedule(int64_t epoch, double lr0, double gamma) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: epoch must be >= 0");
  if (lr0 < 0.0) throw std::invalid_argument("lr_schedule: lr0 must be >= 0");
  if (gamma <= 0.0 || gamma > 1.0)
    throw std::invalid_argument("lr_schedule: gamma must be in (0, 1]");
  return lr0 * std::pow(gamma, static_cast<double>(epoch));
}

}  // namespace cleegn
