#pragma once

// FFT plumbing for spinor fields on a SpinorBundle grid (FFTW backend).
//
// Plans are created once per transform object; every call runs on buffers
// owned by the caller, so one object can serve concurrent callers.

#include <memory>
#include <span>
#include <vector>

#include "massdirac/torus.hpp"

namespace massdirac {

// FFTW-aligned complex buffer.
class FieldBuffer {
 public:
  FieldBuffer() = default;
  explicit FieldBuffer(std::size_t size);
  FieldBuffer(const FieldBuffer& other);
  FieldBuffer& operator=(const FieldBuffer& other);
  FieldBuffer(FieldBuffer&&) noexcept = default;
  FieldBuffer& operator=(FieldBuffer&&) noexcept = default;

  cplx* data() noexcept { return data_.get(); }
  const cplx* data() const noexcept { return data_.get(); }
  std::size_t size() const noexcept { return size_; }
  std::span<cplx> span() noexcept { return {data_.get(), size_}; }
  std::span<const cplx> span() const noexcept { return {data_.get(), size_}; }
  void zero();

 private:
  struct Free {
    void operator()(cplx* p) const noexcept;
  };
  std::unique_ptr<cplx, Free> data_;
  std::size_t size_ = 0;
};

class SpectralTransform {
 public:
  explicit SpectralTransform(std::shared_ptr<const SpinorBundle> bundle);
  ~SpectralTransform();
  SpectralTransform(const SpectralTransform&) = delete;
  SpectralTransform& operator=(const SpectralTransform&) = delete;

  const SpinorBundle& bundle() const noexcept { return *bundle_; }

  // Fourier coefficients of a field: coeff(xi) = sum_x e^{-i xi.x} phi(x).
  // `out` must be an aligned buffer of field_size(); `in` may alias it.
  void to_modes(std::span<const cplx> field, FieldBuffer& out) const;
  // Inverse of to_modes (includes the 1/M normalization).
  void to_nodes(const FieldBuffer& modes, std::span<cplx> field) const;

  // d_axis phi, spectrally.
  void derivative(std::span<const cplx> field, int axis, std::span<cplx> out) const;

  // Evaluates the trigonometric interpolant of `field` at an arbitrary point.
  CVector interpolate(std::span<const cplx> field, std::span<const double> x) const;

 private:
  std::shared_ptr<const SpinorBundle> bundle_;
  std::vector<cplx> scaled_phase_;  // e^{i delta.x/2} / M
  void* forward_ = nullptr;
  void* backward_ = nullptr;
};

}  // namespace massdirac
