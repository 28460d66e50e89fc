#include "hevs/optim.hpp"

#include <cmath>

#include "hevs/error.hpp"

namespace hevs {

void OptimConfig::validate() const {
  require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, ErrorCode::Config,
          "Adam betas must lie in (0,1)");
  require(eps > 0.0 && weight_decay >= 0.0, ErrorCode::Config,
          "Adam eps must be positive and weight_decay non-negative");
}

NamedParams named_params(const torch::nn::Module& module) {
  NamedParams out;
  for (const auto& p : module.named_parameters()) out.emplace_back(p.key(), p.value());
  return out;
}

Adam::Adam(NamedParams params, const OptimConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
  cfg.validate();
  for (const auto& [name, p] : params_) {
    m_.push_back(torch::zeros_like(p));
    v_.push_back(torch::zeros_like(p));
  }
  steps_.assign(params_.size(), 0);
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_)
    if (p.grad().defined()) p.mutable_grad().zero_();
}

void Adam::step(double lr) {
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    if (!p.grad().defined()) continue;
    const auto t = static_cast<double>(++steps_[i]);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    auto g = p.grad();
    if (cfg_.weight_decay > 0.0) g = g + cfg_.weight_decay * p;
    m_[i].mul_(cfg_.beta1).add_(g, 1.0 - cfg_.beta1);
    v_[i].mul_(cfg_.beta2).addcmul_(g, g, 1.0 - cfg_.beta2);
    auto denom = (v_[i].sqrt() / std::sqrt(bc2)).add_(cfg_.eps);
    p.addcdiv_(m_[i], denom, -lr / bc1);
  }
}

void Adam::save(Checkpoint& ckpt) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ckpt.tensors["optim.t." + params_[i].first] = torch::tensor({steps_[i]}, torch::kLong);
    ckpt.tensors["optim.m." + params_[i].first] = m_[i].clone();
    ckpt.tensors["optim.v." + params_[i].first] = v_[i].clone();
  }
}

void Adam::load(const Checkpoint& ckpt) {
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    steps_[i] = ckpt.at("optim.t." + params_[i].first).item<std::int64_t>();
    const auto& m = ckpt.at("optim.m." + params_[i].first);
    const auto& v = ckpt.at("optim.v." + params_[i].first);
    require(m.sizes() == m_[i].sizes() && v.sizes() == v_[i].sizes(), ErrorCode::KeyMismatch,
            "optimizer state shape mismatch for " + params_[i].first);
    m_[i].copy_(m);
    v_[i].copy_(v);
  }
}

double clip_grad_norm(const NamedParams& params, double max_norm) {
  torch::NoGradGuard no_grad;
  double sq = 0.0;
  for (const auto& [name, p] : params)
    if (p.grad().defined()) sq += p.grad().to(torch::kDouble).pow(2).sum().item<double>();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (const auto& [name, p] : params)
      if (p.grad().defined()) p.grad().mul_(scale);
  }
  return norm;
}

EmaState EmaState::from_params(const NamedParams& params, double decay) {
  require(decay >= 0.0 && decay <= 1.0, ErrorCode::Config, "EMA decay must lie in [0,1]");
  EmaState s;
  s.decay = decay;
  for (const auto& [name, p] : params) s.shadow.emplace_back(name, p.detach().clone());
  return s;
}

void EmaState::save(Checkpoint& ckpt) const {
  for (const auto& [name, t] : shadow) ckpt.tensors["ema." + name] = t.clone();
}

void EmaState::load(const Checkpoint& ckpt) {
  for (auto& [name, t] : shadow) {
    const auto& src = ckpt.at("ema." + name);
    require(src.sizes() == t.sizes(), ErrorCode::KeyMismatch, "EMA shape mismatch for " + name);
    t.copy_(src);
  }
}

void EmaState::copy_to(const NamedParams& params) const {
  torch::NoGradGuard no_grad;
  require(params.size() == shadow.size(), ErrorCode::Shape, "EMA/parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].first == shadow[i].first, ErrorCode::Shape,
            "EMA parameter order mismatch at " + params[i].first);
    params[i].second.copy_(shadow[i].second);
  }
}

void ema_update_inplace(EmaState& state, const NamedParams& params) {
  torch::NoGradGuard no_grad;
  require(params.size() == state.shadow.size(), ErrorCode::Shape, "EMA/parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& s = state.shadow[i].second;
    const auto& p = params[i].second;
    require(s.sizes() == p.sizes(), ErrorCode::Shape,
            "EMA shape mismatch for " + state.shadow[i].first);
    s.mul_(state.decay).add_(p.detach(), 1.0 - state.decay);
  }
}

EmaState ema_update(EmaState state, const NamedParams& params) {
  for (auto& [name, t] : state.shadow) t = t.clone();
  ema_update_inplace(state, params);
  return state;
}

}  // namespace hevs
