#include "symrel/metric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "symrel/error.hpp"

namespace symrel {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double nonzero_norm(std::span<const double> v, const char* op) {
  const double n = std::sqrt(dot(v, v));
  if (!(n > 0.0)) throw NumericError(std::string(op) + ": zero-norm embedding");
  return n;
}

}  // namespace

double wrap_phase(double theta) {
  if (theta >= -kPi && theta < kPi) return theta;
  double r = std::remainder(theta, kTwoPi);  // exact, in [-pi, pi]
  if (r >= kPi) r -= kTwoPi;
  if (r < -kPi) r = -kPi;
  return r;
}

// ---------------------------------------------------------------------------

ComplexVector::ComplexVector(std::vector<Complex> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i].real()) || !std::isfinite(values_[i].imag())) {
      throw NumericError("ComplexVector: non-finite component " + std::to_string(i));
    }
  }
}

ComplexVector::ComplexVector(std::span<const double> re, std::span<const double> im) {
  require_same_dim(re.size(), im.size(), "ComplexVector");
  std::vector<Complex> v(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) v[i] = {re[i], im[i]};
  *this = ComplexVector(std::move(v));
}

ComplexVector ComplexVector::from_realized(std::span<const double> interleaved) {
  if (interleaved.size() % 2 != 0) {
    throw DimensionError("ComplexVector: realized length must be even");
  }
  std::vector<Complex> v(interleaved.size() / 2);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = {interleaved[2 * i], interleaved[2 * i + 1]};
  return ComplexVector(std::move(v));
}

double ComplexVector::norm() const { return std::sqrt(dot(realized(), realized())); }

ComplexVector ComplexVector::operator-() const {
  ComplexVector out = *this;
  for (auto& z : out.values_) z = -z;
  return out;
}

// ---------------------------------------------------------------------------

PhaseVector::PhaseVector(std::vector<double> theta) : theta_(std::move(theta)) {
  for (std::size_t i = 0; i < theta_.size(); ++i) {
    if (!std::isfinite(theta_[i])) {
      throw NumericError("PhaseVector: non-finite phase " + std::to_string(i));
    }
    theta_[i] = wrap_phase(theta_[i]);
  }
}

ComplexVector PhaseVector::to_complex() const {
  std::vector<Complex> v(theta_.size());
  for (std::size_t i = 0; i < theta_.size(); ++i) v[i] = std::polar(1.0, theta_[i]);
  return ComplexVector(std::move(v));
}

std::vector<double> PhaseVector::realized() const {
  std::vector<double> out(2 * theta_.size());
  for (std::size_t i = 0; i < theta_.size(); ++i) {
    out[2 * i] = std::cos(theta_[i]);
    out[2 * i + 1] = std::sin(theta_[i]);
  }
  return out;
}

PhaseVector PhaseVector::conj() const {
  std::vector<double> t(theta_.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = -theta_[i];
  return PhaseVector(std::move(t));
}

PhaseVector PhaseVector::shifted(double delta) const {
  std::vector<double> t(theta_.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = theta_[i] + delta;
  return PhaseVector(std::move(t));
}

// ---------------------------------------------------------------------------

ComplexVector hadamard_rotate(const ComplexVector& p, const PhaseVector& l) {
  require_same_dim(p.dim(), l.dim(), "hadamard_rotate");
  std::vector<Complex> out(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double c = std::cos(l[i]);
    const double s = std::sin(l[i]);
    const Complex z = p[i];
    out[i] = {c * z.real() - s * z.imag(), s * z.real() + c * z.imag()};
  }
  return ComplexVector(std::move(out));
}

double cosine_similarity(const ComplexVector& a, const ComplexVector& b) {
  require_same_dim(a.dim(), b.dim(), "cosine_similarity");
  const double na = nonzero_norm(a.realized(), "cosine_similarity");
  const double nb = nonzero_norm(b.realized(), "cosine_similarity");
  return std::clamp(dot(a.realized(), b.realized()) / (na * nb), -1.0, 1.0);
}

double rotate_distance(const ComplexVector& p, const ComplexVector& h, const PhaseVector& l) {
  require_same_dim(p.dim(), h.dim(), "rotate_distance");
  return 1.0 - cosine_similarity(h, hadamard_rotate(p, l));
}

PhaseVector extract_label(const ComplexVector& p, const ComplexVector& h, double min_modulus) {
  require_same_dim(p.dim(), h.dim(), "extract_label");
  std::vector<double> theta(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (!(std::abs(p[i]) >= min_modulus)) {
      throw NumericError("extract_label: premise component " + std::to_string(i) +
                         " has modulus " + std::to_string(std::abs(p[i])) + " below floor " +
                         std::to_string(min_modulus));
    }
    theta[i] = std::arg(h[i]) - std::arg(p[i]);
  }
  return PhaseVector(std::move(theta));
}

double label_distance(const PhaseVector& l1, const PhaseVector& l2) {
  require_same_dim(l1.dim(), l2.dim(), "label_distance");
  if (l1.dim() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < l1.dim(); ++i) s += std::cos(l1[i] - l2[i]);
  return std::clamp(1.0 - s / static_cast<double>(l1.dim()), 0.0, 2.0);
}

// ---------------------------------------------------------------------------

RotateDistanceGrad rotate_distance_grad(const ComplexVector& p, const ComplexVector& h,
                                        const PhaseVector& l) {
  require_same_dim(p.dim(), h.dim(), "rotate_distance");
  const ComplexVector q = hadamard_rotate(p, l);
  const auto hr = h.realized();
  const auto qr = q.realized();
  const double nh = nonzero_norm(hr, "rotate_distance");
  const double nq = nonzero_norm(qr, "rotate_distance");
  const double sim = dot(hr, qr) / (nh * nq);

  RotateDistanceGrad g;
  g.value = 1.0 - std::clamp(sim, -1.0, 1.0);
  g.d_h.resize(hr.size());
  std::vector<double> d_q(qr.size());
  for (std::size_t j = 0; j < hr.size(); ++j) {
    g.d_h[j] = -(qr[j] / (nh * nq) - sim * hr[j] / (nh * nh));
    d_q[j] = -(hr[j] / (nh * nq) - sim * qr[j] / (nq * nq));
  }
  // q_i = e^{i theta_i} p_i, so dL/dp_i = e^{-i theta_i} dL/dq_i.
  g.d_p.resize(qr.size());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double c = std::cos(l[i]);
    const double s = std::sin(l[i]);
    g.d_p[2 * i] = c * d_q[2 * i] + s * d_q[2 * i + 1];
    g.d_p[2 * i + 1] = -s * d_q[2 * i] + c * d_q[2 * i + 1];
  }
  return g;
}

LabelDistanceGrad label_distance_grad(const PhaseVector& l1, const PhaseVector& l2) {
  require_same_dim(l1.dim(), l2.dim(), "label_distance");
  LabelDistanceGrad g;
  g.value = label_distance(l1, l2);
  g.d_l1.resize(l1.dim());
  g.d_l2.resize(l1.dim());
  const double inv_d = 1.0 / static_cast<double>(l1.dim());
  for (std::size_t i = 0; i < l1.dim(); ++i) {
    const double s = std::sin(l1[i] - l2[i]) * inv_d;
    g.d_l1[i] = s;
    g.d_l2[i] = -s;
  }
  return g;
}

void phase_backward(const ComplexVector& z, std::span<const double> upstream,
                    std::span<double> out) {
  for (std::size_t i = 0; i < z.dim(); ++i) {
    const double re = z[i].real();
    const double im = z[i].imag();
    const double r2 = re * re + im * im;
    if (!(r2 > 0.0)) {
      throw NumericError("phase_backward: zero-modulus component " + std::to_string(i));
    }
    out[2 * i] += upstream[i] * (-im / r2);
    out[2 * i + 1] += upstream[i] * (re / r2);
  }
}

void extract_label_backward(const ComplexVector& p, const ComplexVector& h,
                            std::span<const double> upstream, std::span<double> d_p,
                            std::span<double> d_h) {
  phase_backward(h, upstream, d_h);
  std::vector<double> neg(upstream.begin(), upstream.end());
  for (double& v : neg) v = -v;
  phase_backward(p, neg, d_p);
}

}  // namespace symrel
