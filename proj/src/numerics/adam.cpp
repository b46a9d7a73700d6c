#include "m3dseg/numerics/adam.hpp"

#include <cmath>

namespace m3dseg::numerics {

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size())
    throw NumericsError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                        std::to_string(grads.size()) + " gradients");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape())
      throw NumericsError("adam_step: gradient shape " + shape_string(grads[i].shape()) +
                          " does not match parameter " + shape_string(params[i].shape()));
  }
  if (state.m_.empty()) {
    for (const Tensor& p : params) {
      state.m_.push_back(Tensor::zeros(p.shape(), p.precision()));
      state.v_.push_back(Tensor::zeros(p.shape(), p.precision()));
    }
  } else if (state.m_.size() != params.size()) {
    throw NumericsError("adam_step: parameter list changed between steps");
  }

  const AdamConfig& c = state.config_;
  const auto t = static_cast<double>(state.step_count_ + 1);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m_[i].shape() != params[i].shape())
      throw NumericsError("adam_step: moment shape does not match parameter");
    dispatch(params[i].precision(), [&]<class T>() {
      auto p = params[i].data<T>();
      auto g = grads[i].template data<T>();
      auto m = state.m_[i].data<T>();
      auto v = state.v_[i].data<T>();
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double gj = g[j];
        const double mj = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
        const double vj = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double update = c.learning_rate * (mj / correct1) / (std::sqrt(vj / correct2) + c.epsilon);
        p[j] = static_cast<T>(p[j] - update);
      }
    });
  }
  ++state.step_count_;
}

}  // namespace m3dseg::numerics
