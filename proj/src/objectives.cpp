#include "symrel/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "symrel/error.hpp"
#include "symrel/random.hpp"

namespace symrel {

void MarginConfig::validate() const {
  if (!(margin > 0.0 && margin <= 2.0)) {
    throw UsageError("margin must lie in (0, 2], got " + std::to_string(margin));
  }
}

LabelEmbeddingBank init_label_bank(std::uint64_t seed, std::size_t d) {
  if (d == 0) throw UsageError("init_label_bank: d must be >= 1");
  Rng rng = Rng::derive(seed, 0x6c61626c);
  LabelEmbeddingBank bank;
  for (auto& l : bank.labels) {
    std::vector<double> theta(d);
    for (double& t : theta) t = rng.uniform(-kPi, kPi);
    l = PhaseVector(std::move(theta));
  }
  bank.frozen = true;
  return bank;
}

HeadParams HeadParams::init(std::uint64_t seed, std::size_t d, double scale) {
  HeadParams h;
  h.dim = d;
  Rng rng = Rng::derive(seed, 0x68656164);
  h.weight.resize(2 * 4 * d);
  for (double& w : h.weight) w = scale == 0.0 ? 0.0 : rng.uniform(-scale, scale);
  h.bias.assign(2, 0.0);
  return h;
}

HeadGradients HeadGradients::zeros_like(const HeadParams& head) {
  return {std::vector<double>(head.weight.size(), 0.0), std::vector<double>(head.bias.size(), 0.0)};
}

namespace {

void check_head(const HeadParams& head, const ComplexVector& p, const ComplexVector& h) {
  if (p.dim() != h.dim() || head.dim != p.dim() || head.weight.size() != 8 * head.dim ||
      head.bias.size() != 2) {
    throw DimensionError("classification head shape does not match embeddings");
  }
}

// Hinge on a distance: max(0, m - d)^2 and its derivative in d.
std::pair<double, double> squared_hinge(double d, double margin) {
  const double gap = std::max(0.0, margin - d);
  return {gap * gap, -2.0 * gap};
}

}  // namespace

std::array<double, 2> head_logits(const HeadParams& head, const ComplexVector& p,
                                  const ComplexVector& h) {
  check_head(head, p, h);
  const std::size_t w = 2 * head.dim;
  const auto pr = p.realized();
  const auto hr = h.realized();
  std::array<double, 2> z{};
  for (std::size_t c = 0; c < 2; ++c) {
    const double* row = head.weight.data() + c * 2 * w;
    double s = head.bias[c];
    for (std::size_t j = 0; j < w; ++j) s += row[j] * pr[j] + row[w + j] * hr[j];
    z[c] = s;
  }
  return z;
}

double loss_random_label(const ComplexVector& p, const ComplexVector& h,
                         const LabelEmbeddingBank& bank, Label gold, const MarginConfig& cfg) {
  const double d_pos = rotate_distance(p, h, bank[gold]);
  const double d_neg = rotate_distance(p, h, bank[other(gold)]);
  return d_pos * d_pos + squared_hinge(d_neg, cfg.margin).first;
}

double loss_pairwise(const PhaseVector& l1, const PhaseVector& l2, bool same_label,
                     const MarginConfig& cfg) {
  const double d = label_distance(l1, l2);
  return same_label ? d * d : squared_hinge(d, cfg.margin).first;
}

double loss_cross_entropy(const HeadParams& head, const ComplexVector& p, const ComplexVector& h,
                          Label gold) {
  const auto z = head_logits(head, p, h);
  const double m = std::max(z[0], z[1]);
  const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
  return lse - z[ordinal(gold)];
}

EmbeddingLossGrad loss_random_label_grad(const ComplexVector& p, const ComplexVector& h,
                                         const LabelEmbeddingBank& bank, Label gold,
                                         const MarginConfig& cfg) {
  const auto pos = rotate_distance_grad(p, h, bank[gold]);
  const auto neg = rotate_distance_grad(p, h, bank[other(gold)]);
  const auto [hinge, d_hinge] = squared_hinge(neg.value, cfg.margin);
  EmbeddingLossGrad g;
  g.value = pos.value * pos.value + hinge;
  g.d_p.resize(pos.d_p.size());
  g.d_h.resize(pos.d_h.size());
  for (std::size_t j = 0; j < g.d_p.size(); ++j) {
    g.d_p[j] = 2.0 * pos.value * pos.d_p[j] + d_hinge * neg.d_p[j];
    g.d_h[j] = 2.0 * pos.value * pos.d_h[j] + d_hinge * neg.d_h[j];
  }
  return g;
}

PairwiseLossGrad loss_pairwise_grad(const PhaseVector& l1, const PhaseVector& l2,
                                    bool same_label, const MarginConfig& cfg) {
  const auto dist = label_distance_grad(l1, l2);
  double outer = 0.0;
  PairwiseLossGrad g;
  if (same_label) {
    g.value = dist.value * dist.value;
    outer = 2.0 * dist.value;
  } else {
    std::tie(g.value, outer) = squared_hinge(dist.value, cfg.margin);
  }
  g.d_l1.resize(dist.d_l1.size());
  g.d_l2.resize(dist.d_l2.size());
  for (std::size_t i = 0; i < g.d_l1.size(); ++i) {
    g.d_l1[i] = outer * dist.d_l1[i];
    g.d_l2[i] = outer * dist.d_l2[i];
  }
  return g;
}

CrossEntropyGrad loss_cross_entropy_grad(const HeadParams& head, const ComplexVector& p,
                                         const ComplexVector& h, Label gold) {
  const auto z = head_logits(head, p, h);
  const double m = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - m);
  const double e1 = std::exp(z[1] - m);
  const double lse = m + std::log(e0 + e1);
  const std::array<double, 2> dz = {e0 / (e0 + e1) - (gold == Label::Entailment ? 1.0 : 0.0),
                                    e1 / (e0 + e1) - (gold == Label::Contradiction ? 1.0 : 0.0)};
  const std::size_t w = 2 * head.dim;
  const auto pr = p.realized();
  const auto hr = h.realized();

  CrossEntropyGrad g;
  g.value = lse - z[ordinal(gold)];
  g.d_p.assign(w, 0.0);
  g.d_h.assign(w, 0.0);
  g.d_head = HeadGradients::zeros_like(head);
  for (std::size_t c = 0; c < 2; ++c) {
    const double* row = head.weight.data() + c * 2 * w;
    double* grow = g.d_head.weight.data() + c * 2 * w;
    g.d_head.bias[c] = dz[c];
    for (std::size_t j = 0; j < w; ++j) {
      grow[j] = dz[c] * pr[j];
      grow[w + j] = dz[c] * hr[j];
      g.d_p[j] += dz[c] * row[j];
      g.d_h[j] += dz[c] * row[w + j];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

void scale_in_place(std::vector<double>& v, double f) {
  for (double& x : v) x *= f;
}

}  // namespace

double random_label_term(const EncoderParams& params, const TokenizedPair& ex,
                         const LabelEmbeddingBank& bank, const MarginConfig& cfg,
                         ParamGradients* grads, double weight) {
  auto p = encode_single(params, ex.premise);
  auto h = encode_single(params, ex.hypothesis);
  if (grads == nullptr) return loss_random_label(p.embedding, h.embedding, bank, ex.label, cfg);
  auto g = loss_random_label_grad(p.embedding, h.embedding, bank, ex.label, cfg);
  scale_in_place(g.d_p, weight);
  scale_in_place(g.d_h, weight);
  accumulate_backward(params, p.tape, g.d_p, *grads);
  accumulate_backward(params, h.tape, g.d_h, *grads);
  return g.value;
}

double pairwise_fixed_term(const EncoderParams& params, const TokenizedPair& a,
                           const TokenizedPair& b, const MarginConfig& cfg,
                           ParamGradients* grads, double weight) {
  auto pa = encode_single(params, a.premise);
  auto ha = encode_single(params, a.hypothesis);
  auto pb = encode_single(params, b.premise);
  auto hb = encode_single(params, b.hypothesis);
  const PhaseVector la = extract_label(pa.embedding, ha.embedding);
  const PhaseVector lb = extract_label(pb.embedding, hb.embedding);
  const bool same = a.label == b.label;
  if (grads == nullptr) return loss_pairwise(la, lb, same, cfg);

  auto g = loss_pairwise_grad(la, lb, same, cfg);
  scale_in_place(g.d_l1, weight);
  scale_in_place(g.d_l2, weight);
  const std::size_t w = params.width();
  std::vector<double> d_pa(w, 0.0), d_ha(w, 0.0), d_pb(w, 0.0), d_hb(w, 0.0);
  extract_label_backward(pa.embedding, ha.embedding, g.d_l1, d_pa, d_ha);
  extract_label_backward(pb.embedding, hb.embedding, g.d_l2, d_pb, d_hb);
  accumulate_backward(params, pa.tape, d_pa, *grads);
  accumulate_backward(params, ha.tape, d_ha, *grads);
  accumulate_backward(params, pb.tape, d_pb, *grads);
  accumulate_backward(params, hb.tape, d_hb, *grads);
  return g.value;
}

double pairwise_learnt_term(const EncoderParams& params, const TokenizedPair& a,
                            const TokenizedPair& b, const MarginConfig& cfg,
                            ParamGradients* grads, double weight) {
  auto ea = encode_pair(params, a.premise, a.hypothesis);
  auto eb = encode_pair(params, b.premise, b.hypothesis);
  const bool same = a.label == b.label;
  if (grads == nullptr) return loss_pairwise(ea.label, eb.label, same, cfg);

  auto g = loss_pairwise_grad(ea.label, eb.label, same, cfg);
  scale_in_place(g.d_l1, weight);
  scale_in_place(g.d_l2, weight);
  accumulate_backward(params, ea.tape, g.d_l1, *grads);
  accumulate_backward(params, eb.tape, g.d_l2, *grads);
  return g.value;
}

double cross_entropy_term(const EncoderParams& params, const HeadParams& head,
                          const TokenizedPair& ex, ParamGradients* grads,
                          HeadGradients* head_grads, double weight) {
  auto p = encode_single(params, ex.premise);
  auto h = encode_single(params, ex.hypothesis);
  if (grads == nullptr && head_grads == nullptr) {
    return loss_cross_entropy(head, p.embedding, h.embedding, ex.label);
  }
  auto g = loss_cross_entropy_grad(head, p.embedding, h.embedding, ex.label);
  if (grads != nullptr) {
    scale_in_place(g.d_p, weight);
    scale_in_place(g.d_h, weight);
    accumulate_backward(params, p.tape, g.d_p, *grads);
    accumulate_backward(params, h.tape, g.d_h, *grads);
  }
  if (head_grads != nullptr) {
    for (std::size_t i = 0; i < g.d_head.weight.size(); ++i) {
      head_grads->weight[i] += weight * g.d_head.weight[i];
    }
    for (std::size_t i = 0; i < g.d_head.bias.size(); ++i) {
      head_grads->bias[i] += weight * g.d_head.bias[i];
    }
  }
  return g.value;
}

// ---------------------------------------------------------------------------

AdamState AdamState::for_shapes(const std::vector<std::span<const double>>& tensors) {
  AdamState s;
  for (const auto& t : tensors) {
    s.m.emplace_back(t.size(), 0.0);
    s.v.emplace_back(t.size(), 0.0);
  }
  return s;
}

void adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimensionError("adam_step: parameter/gradient/state tensor counts differ");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size() || params[t].size() != state.m[t].size()) {
      throw DimensionError("adam_step: tensor " + std::to_string(t) + " shape mismatch");
    }
    for (double g : grads[t]) {
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient", state.t + 1);
    }
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& m = state.m[t];
    auto& v = state.v[t];
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double g = grads[t][i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      params[t][i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace symrel
