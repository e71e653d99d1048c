#include "inrgan/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace inrgan {

template <typename T>
void adam_step(TensorMap<T>& params, const TensorMap<T>& grads, AdamState<T>& state,
               const AdamHyper& hyper) {
  for (const auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw std::invalid_argument("adam_step: no gradient for '" + name + "'");
    if (it->second.shape() != p.shape()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch for '" + name + "'");
    }
    for (T v : it->second.values()) {
      if (!std::isfinite(v)) throw std::runtime_error("adam_step: non-finite gradient in '" + name + "'");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  const T b1 = static_cast<T>(hyper.beta1);
  const T b2 = static_cast<T>(hyper.beta2);
  // beta == 1 leaves the corresponding moment uncorrected.
  const T inv_c1 = static_cast<T>(c1 > 0.0 ? 1.0 / c1 : 1.0);
  const T inv_c2 = static_cast<T>(c2 > 0.0 ? 1.0 / c2 : 1.0);
  const T lr = static_cast<T>(hyper.lr);
  const T eps = static_cast<T>(hyper.eps);
  for (auto& [name, p] : params) {
    const NdArray<T>& g = grads.at(name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, p.shape());
    auto [v_it, v_new] = state.second_moment.try_emplace(name, p.shape());
    NdArray<T>& m = m_it->second;
    NdArray<T>& v = v_it->second;
    if (m.shape() != p.shape() || v.shape() != p.shape()) {
      throw std::invalid_argument("adam_step: moment shape mismatch for '" + name + "'");
    }
    T* pp = p.data();
    T* mp = m.data();
    T* vp = v.data();
    const T* gp = g.data();
    for (std::int64_t i = 0; i < p.size(); ++i) {
      mp[i] = b1 * mp[i] + (T(1) - b1) * gp[i];
      vp[i] = b2 * vp[i] + (T(1) - b2) * gp[i] * gp[i];
      const T mhat = mp[i] * inv_c1;
      const T vhat = vp[i] * inv_c2;
      pp[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template void adam_step<float>(TensorMap<float>&, const TensorMap<float>&, AdamState<float>&, const AdamHyper&);
template void adam_step<double>(TensorMap<double>&, const TensorMap<double>&, AdamState<double>&, const AdamHyper&);

}  // namespace inrgan
