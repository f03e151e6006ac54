#include "massdirac/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>

#include <fftw3.h>

#include "massdirac/kernels.hpp"

namespace massdirac {
namespace {

// The FFTW planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

void FieldBuffer::Free::operator()(cplx* p) const noexcept { fftw_free(p); }

FieldBuffer::FieldBuffer(std::size_t size)
    : data_(reinterpret_cast<cplx*>(fftw_alloc_complex(std::max<std::size_t>(size, 1)))), size_(size) {
  zero();
}

FieldBuffer::FieldBuffer(const FieldBuffer& other) : FieldBuffer(other.size_) {
  if (size_ > 0) std::memcpy(static_cast<void*>(data_.get()), other.data_.get(), size_ * sizeof(cplx));
}

FieldBuffer& FieldBuffer::operator=(const FieldBuffer& other) {
  if (this != &other) {
    FieldBuffer copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void FieldBuffer::zero() {
  if (size_ > 0) std::fill_n(data_.get(), size_, cplx{0.0, 0.0});
}

SpectralTransform::SpectralTransform(std::shared_ptr<const SpinorBundle> bundle)
    : bundle_(std::move(bundle)), scaled_phase_(bundle_->phase()) {
  for (auto& s : scaled_phase_) s /= static_cast<double>(bundle_->nodes());
  const int n = bundle_->dimension();
  const int block = bundle_->spinor_dim();
  std::vector<int> dims(static_cast<std::size_t>(n), bundle_->points_per_axis());
  FieldBuffer a(bundle_->field_size());
  FieldBuffer b(bundle_->field_size());
  auto* ia = reinterpret_cast<fftw_complex*>(a.data());
  auto* ib = reinterpret_cast<fftw_complex*>(b.data());
  std::lock_guard<std::mutex> lock(planner_mutex());
  forward_ = fftw_plan_many_dft(n, dims.data(), block, ia, nullptr, block, 1, ib, nullptr, block, 1, FFTW_FORWARD,
                                FFTW_ESTIMATE);
  backward_ = fftw_plan_many_dft(n, dims.data(), block, ia, nullptr, block, 1, ib, nullptr, block, 1, FFTW_BACKWARD,
                                 FFTW_ESTIMATE);
}

SpectralTransform::~SpectralTransform() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (forward_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  if (backward_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(backward_));
}

void SpectralTransform::to_modes(std::span<const cplx> field, FieldBuffer& out) const {
  const auto& k = kernels::active();
  const std::size_t len = bundle_->field_size();
  const auto block = static_cast<std::size_t>(bundle_->spinor_dim());
  FieldBuffer work(len);
  k.node_scale(len, block, bundle_->inverse_phase().data(), field.data(), work.data());
  fftw_execute_dft(static_cast<fftw_plan>(forward_), reinterpret_cast<fftw_complex*>(work.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

void SpectralTransform::to_nodes(const FieldBuffer& modes, std::span<cplx> field) const {
  const auto& k = kernels::active();
  const std::size_t len = bundle_->field_size();
  const auto block = static_cast<std::size_t>(bundle_->spinor_dim());
  FieldBuffer in(modes);
  FieldBuffer work(len);
  fftw_execute_dft(static_cast<fftw_plan>(backward_), reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(work.data()));
  k.node_scale(len, block, scaled_phase_.data(), work.data(), field.data());
}

void SpectralTransform::derivative(std::span<const cplx> field, int axis, std::span<cplx> out) const {
  const std::size_t len = bundle_->field_size();
  const auto block = static_cast<std::size_t>(bundle_->spinor_dim());
  FieldBuffer modes(len);
  to_modes(field, modes);
  FieldBuffer d(len);
  std::vector<double> xi(bundle_->nodes());
  for (std::size_t mode = 0; mode < xi.size(); ++mode) xi[mode] = bundle_->momentum(mode)[static_cast<std::size_t>(axis)];
  kernels::active().node_imag_axpy(len, block, xi.data(), modes.data(), d.data());
  to_nodes(d, out);
}

CVector SpectralTransform::interpolate(std::span<const cplx> field, std::span<const double> x) const {
  const std::size_t len = bundle_->field_size();
  const int block = bundle_->spinor_dim();
  FieldBuffer modes(len);
  to_modes(field, modes);
  CVector out = CVector::Zero(block);
  for (std::size_t mode = 0; mode < bundle_->nodes(); ++mode) {
    double arg = 0.0;
    const auto xi = bundle_->momentum(mode);
    for (std::size_t j = 0; j < x.size(); ++j) arg += xi[j] * x[j];
    const cplx e{std::cos(arg), std::sin(arg)};
    for (int c = 0; c < block; ++c) out(c) += e * modes.data()[mode * static_cast<std::size_t>(block) + static_cast<std::size_t>(c)];
  }
  return out / static_cast<double>(bundle_->nodes());
}

}  // namespace massdirac
