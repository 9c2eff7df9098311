#include "klda/adam.hpp"

#include <cmath>

namespace klda {

AdamState AdamState::init(const ParamVector& params) {
  AdamState s;
  s.m = ParamVector::zeros_like(params);
  s.v = ParamVector::zeros_like(params);
  s.step = 0;
  return s;
}

AdamResult adam_step(const ParamVector& params, const ParamVector& grads,
                     const AdamState& state, const AdamConfig& cfg) {
  require(params.same_shape(grads), "adam_step: params/grads shape mismatch");
  require(params.same_shape(state.m) && params.same_shape(state.v),
          "adam_step: optimizer state shape mismatch");
  require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 &&
              cfg.beta2 < 1.0,
          "adam_step: beta coefficients must lie in [0, 1)");

  AdamResult out;
  out.params = params;
  out.state = state;
  out.state.step = state.step + 1;
  const double t = static_cast<double>(out.state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i].value;
    Matrix& m = out.state.m[i].value;
    Matrix& v = out.state.v[i].value;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    Matrix m_hat = m / c1;
    Matrix v_hat = v / c2;
    out.params[i].value -=
        cfg.lr * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + cfg.epsilon).matrix());
  }
  return out;
}

}  // namespace klda
