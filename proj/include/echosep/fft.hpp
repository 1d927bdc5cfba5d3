#pragma once

#include <unsupported/Eigen/FFT>

#include "echosep/common.hpp"

namespace echosep {

// One-sided real FFT helpers on top of Eigen's FFT module.

inline std::vector<cplx> rfft(const std::vector<double>& x) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<cplx> out;
  fft.fwd(out, x);
  return out;
}

inline std::vector<double> irfft(const std::vector<cplx>& spec,
                                 std::size_t nfft) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> out;
  fft.inv(out, spec, static_cast<Eigen::Index>(nfft));
  return out;
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Full linear convolution, FFT-based.
inline std::vector<double> fft_convolve(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t n = a.size() + b.size() - 1;
  const std::size_t nfft = next_pow2(n);
  std::vector<double> pa(nfft, 0.0), pb(nfft, 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  std::vector<cplx> fa = rfft(pa), fb = rfft(pb);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> full = irfft(fa, nfft);
  full.resize(n);
  return full;
}

// Cross-correlation r[k] = sum_t a[t] * b[t - k] for k in [-(|b|-1), |a|-1],
// returned with r[0] at index |b|-1.
inline std::vector<double> cross_correlate(const std::vector<double>& a,
                                           const std::vector<double>& b) {
  std::vector<double> br(b.rbegin(), b.rend());
  return fft_convolve(a, br);
}

}  // namespace echosep
