#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "massdirac/kernels.hpp"

using massdirac::kernels::cplx;
using massdirac::kernels::KernelTable;

namespace {

std::vector<cplx> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> v(n);
  for (auto& x : v) x = {u(rng), u(rng)};
  return v;
}

bool same_bits(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(cplx)) == 0;
}

bool same_bits(cplx a, cplx b) { return std::memcmp(&a, &b, sizeof a) == 0; }

const KernelTable* simd() {
  const KernelTable* t = massdirac::kernels::avx2_table();
  if (t == nullptr) MESSAGE("no AVX2 on this machine; comparing the scalar table with itself");
  return t != nullptr ? t : &massdirac::kernels::scalar_table();
}

}  // namespace

TEST_CASE("active table is one of the two variants") {
  const auto& a = massdirac::kernels::active();
  CHECK((a.name == massdirac::kernels::scalar_table().name || (simd() && a.name == simd()->name)));
}

TEST_CASE("block_matvec_add: AVX2 matches scalar bitwise") {
  const KernelTable& s = massdirac::kernels::scalar_table();
  const KernelTable& v = *simd();
  for (std::size_t dim : {1u, 2u, 4u, 8u, 16u})
    for (std::size_t blocks : {1u, 3u, 17u}) {
      const auto mats = noise(blocks * dim * dim, 1 + dim);
      const auto x = noise(blocks * dim, 2 + blocks);
      auto y1 = noise(blocks * dim, 3);
      auto y2 = y1;
      s.block_matvec_add(blocks, dim, mats.data(), x.data(), y1.data());
      v.block_matvec_add(blocks, dim, mats.data(), x.data(), y2.data());
      CHECK(same_bits(y1, y2));
    }
}

TEST_CASE("axpy, node_scale and node_imag_axpy: AVX2 matches scalar bitwise") {
  const KernelTable& s = massdirac::kernels::scalar_table();
  const KernelTable& v = *simd();
  for (std::size_t block : {1u, 2u, 4u, 8u})
    for (std::size_t nodes : {1u, 5u, 33u}) {
      const std::size_t len = nodes * block;
      const auto x = noise(len, 7);
      auto y1 = noise(len, 8), y2 = y1;
      s.axpy(len, {0.3, -1.7}, x.data(), y1.data());
      v.axpy(len, {0.3, -1.7}, x.data(), y2.data());
      CHECK(same_bits(y1, y2));

      const auto sc = noise(nodes, 9);
      s.node_scale(len, block, sc.data(), x.data(), y1.data());
      v.node_scale(len, block, sc.data(), x.data(), y2.data());
      CHECK(same_bits(y1, y2));

      std::vector<double> re(nodes);
      for (std::size_t i = 0; i < nodes; ++i) re[i] = sc[i].real();
      s.node_imag_axpy(len, block, re.data(), x.data(), y1.data());
      v.node_imag_axpy(len, block, re.data(), x.data(), y2.data());
      CHECK(same_bits(y1, y2));
    }
}

TEST_CASE("weighted_dot: AVX2 matches scalar bitwise and the plain sum") {
  const KernelTable& s = massdirac::kernels::scalar_table();
  const KernelTable& v = *simd();
  for (std::size_t block : {1u, 2u, 4u})
    for (std::size_t nodes : {1u, 2u, 9u, 64u}) {
      const std::size_t len = nodes * block;
      const auto x = noise(len, 11), y = noise(len, 12);
      std::vector<double> w(nodes);
      for (std::size_t i = 0; i < nodes; ++i) w[i] = 0.5 + static_cast<double>(i % 3);
      const cplx a = s.weighted_dot(len, block, w.data(), x.data(), y.data());
      const cplx b = v.weighted_dot(len, block, w.data(), x.data(), y.data());
      CHECK(same_bits(a, b));
      cplx ref{};
      for (std::size_t i = 0; i < len; ++i) ref += w[i / block] * std::conj(x[i]) * y[i];
      CHECK(std::abs(a - ref) < 1e-12 * static_cast<double>(len));
    }
}
