#pragma once

// Complex rotation algebra for symmetry-aware distances.
//
// Sentence embeddings live in C^d. A relation (or NLI label) is a unit-modulus
// phase vector; applying it is a componentwise rotation. The distance between
// a premise p and hypothesis h under label l is
//
//     d_l(p, h) = 1 - cos(h, p o l)
//
// where the cosine is taken over the interleaved 2d-real realization. The
// distance is direction-sensitive unless every phase of l is 0 or pi.

#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace symrel {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Modulus floor below which a premise component cannot be divided by.
inline constexpr double kDivisionFloor = 1e-8;

// Wraps an angle into [-pi, pi).
double wrap_phase(double theta);

// Signed angular difference a - b wrapped into [-pi, pi).
inline double phase_difference(double a, double b) { return wrap_phase(a - b); }

class ComplexVector {
 public:
  ComplexVector() = default;
  // Throws NumericError if any component is not finite.
  explicit ComplexVector(std::vector<Complex> values);
  ComplexVector(std::span<const double> re, std::span<const double> im);

  // Builds from 2d interleaved reals (re0, im0, re1, im1, ...).
  static ComplexVector from_realized(std::span<const double> interleaved);

  std::size_t dim() const { return values_.size(); }
  const Complex& operator[](std::size_t i) const { return values_[i]; }
  std::span<const Complex> values() const { return values_; }

  // Interleaved 2d-real view over the same storage.
  std::span<const double> realized() const {
    return {reinterpret_cast<const double*>(values_.data()), 2 * values_.size()};
  }

  double norm() const;
  ComplexVector operator-() const;

  friend bool operator==(const ComplexVector&, const ComplexVector&) = default;

 private:
  std::vector<Complex> values_;
};

// Unit-modulus complex vector stored by its phases, each in [-pi, pi).
class PhaseVector {
 public:
  PhaseVector() = default;
  // Phases are wrapped on construction. Throws NumericError on non-finite input.
  explicit PhaseVector(std::vector<double> theta);

  static PhaseVector zeros(std::size_t d) { return PhaseVector(std::vector<double>(d, 0.0)); }

  std::size_t dim() const { return theta_.size(); }
  double operator[](std::size_t i) const { return theta_[i]; }
  std::span<const double> phases() const { return theta_; }

  ComplexVector to_complex() const;
  // (cos t0, sin t0, cos t1, sin t1, ...)
  std::vector<double> realized() const;

  // Componentwise conjugate, i.e. every phase negated (and re-wrapped).
  PhaseVector conj() const;
  // Every phase shifted by delta.
  PhaseVector shifted(double delta) const;

  friend bool operator==(const PhaseVector&, const PhaseVector&) = default;

 private:
  std::vector<double> theta_;
};

ComplexVector hadamard_rotate(const ComplexVector& p, const PhaseVector& l);

// Ordinary cosine over the realized vectors, clamped to [-1, 1].
// Throws NumericError on a zero-norm input.
double cosine_similarity(const ComplexVector& a, const ComplexVector& b);

// 1 - cos(h, p o l), in [0, 2].
double rotate_distance(const ComplexVector& p, const ComplexVector& h, const PhaseVector& l);

// Phase of h / p componentwise. Throws NumericError naming the first component
// whose premise modulus is below min_modulus.
PhaseVector extract_label(const ComplexVector& p, const ComplexVector& h,
                          double min_modulus = kDivisionFloor);

// 1 - cosine of the realized unit vectors, in [0, 2].
double label_distance(const PhaseVector& l1, const PhaseVector& l2);

// ---------------------------------------------------------------------------
// Derivatives. Gradients with respect to complex vectors are returned in the
// realized layout (2d reals).

struct RotateDistanceGrad {
  double value = 0.0;
  std::vector<double> d_p;
  std::vector<double> d_h;
};

RotateDistanceGrad rotate_distance_grad(const ComplexVector& p, const ComplexVector& h,
                                        const PhaseVector& l);

struct LabelDistanceGrad {
  double value = 0.0;
  std::vector<double> d_l1;  // with respect to the phases of l1
  std::vector<double> d_l2;
};

LabelDistanceGrad label_distance_grad(const PhaseVector& l1, const PhaseVector& l2);

// Accumulates upstream * d arg(z_i) / d z_i into out (realized layout).
void phase_backward(const ComplexVector& z, std::span<const double> upstream,
                    std::span<double> out);

// Pulls a gradient on the phases of extract_label(p, h) back onto p and h.
void extract_label_backward(const ComplexVector& p, const ComplexVector& h,
                            std::span<const double> upstream, std::span<double> d_p,
                            std::span<double> d_h);

}  // namespace symrel
