#pragma once

#include <algorithm>
#include <limits>

#include "echosep/fft.hpp"

namespace echosep {

struct EvalResult {
  std::vector<double> sdr;  // dB, per source, in reference order
  std::vector<double> sir;
  std::vector<int> permutation;  // estimate index assigned to each reference
  bool degenerate = false;       // zero-energy input encountered
};

inline constexpr double kInfDb = 300.0;  // cap for exact reconstructions

namespace detail {

struct ProjectionBasis {
  std::vector<std::vector<double>> refs;  // truncated references
  int L = 512;
  Mat gram;                      // (J*L) x (J*L), Toeplitz blocks
  Eigen::LDLT<Mat> gram_ldlt;
  std::vector<Eigen::LDLT<Mat>> block_ldlt;  // per reference
};

inline ProjectionBasis make_basis(std::vector<std::vector<double>> refs,
                                  int L, double ridge = 1e-12) {
  ProjectionBasis basis;
  basis.refs = std::move(refs);
  basis.L = L;
  const int J = static_cast<int>(basis.refs.size());
  const std::size_t T = basis.refs.front().size();
  basis.gram.resize(J * L, J * L);
  double scale = 0.0;
  for (int i = 0; i < J; ++i) {
    for (int j = 0; j < J; ++j) {
      // r[k] = sum_t s_i[t] s_j[t-k]; gram block entry (a,b) = r(b-a)
      std::vector<double> r = cross_correlate(basis.refs[i], basis.refs[j]);
      const std::ptrdiff_t zero = static_cast<std::ptrdiff_t>(T) - 1;
      for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b)
          basis.gram(i * L + a, j * L + b) = r[zero + b - a];
    }
    scale = std::max(scale, basis.gram(i * L, i * L));
  }
  Mat reg = basis.gram + ridge * std::max(scale, 1.0) *
                             Mat::Identity(J * L, J * L);
  basis.gram_ldlt.compute(reg);
  for (int j = 0; j < J; ++j) {
    Mat block = reg.block(j * L, j * L, L, L);
    basis.block_ldlt.emplace_back(block);
  }
  return basis;
}

// filters w (one length-L filter per reference) applied to the references
inline std::vector<double> apply_filters(const ProjectionBasis& basis,
                                         const Eigen::VectorXd& w,
                                         std::size_t out_len) {
  std::vector<double> out(out_len, 0.0);
  const int L = basis.L;
  for (std::size_t i = 0; i < basis.refs.size(); ++i) {
    const std::vector<double>& s = basis.refs[i];
    for (int a = 0; a < L; ++a) {
      const double wa = w(static_cast<int>(i) * L + a);
      if (wa == 0.0) continue;
      for (std::size_t t = a; t < out_len && t - a < s.size(); ++t)
        out[t] += wa * s[t - a];
    }
  }
  return out;
}

inline double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace detail

// BSS decomposition of each estimate into target / interference / artifact
// parts, projecting onto delayed references (up to filter_len taps). Best
// source-to-estimate assignment chosen by mean SIR.
inline EvalResult bss_eval(std::vector<std::vector<double>> estimates,
                           std::vector<std::vector<double>> references,
                           int filter_len = 512) {
  const int J = static_cast<int>(references.size());
  if (static_cast<int>(estimates.size()) != J)
    throw InputError("estimate / reference count mismatch");
  std::size_t T = std::numeric_limits<std::size_t>::max();
  for (const auto& s : estimates) T = std::min(T, s.size());
  for (const auto& s : references) T = std::min(T, s.size());
  if (T == 0) throw InputError("empty signals");
  for (auto& s : estimates) s.resize(T);
  for (auto& s : references) s.resize(T);

  EvalResult result;
  for (const auto& s : references)
    if (detail::energy(s) == 0.0) result.degenerate = true;
  for (const auto& s : estimates)
    if (detail::energy(s) == 0.0) result.degenerate = true;
  if (result.degenerate) {
    result.sdr.assign(J, -kInfDb);
    result.sir.assign(J, -kInfDb);
    result.permutation.resize(J);
    for (int j = 0; j < J; ++j) result.permutation[j] = j;
    return result;
  }

  const int L = std::min<int>(filter_len, static_cast<int>(T) - 1);
  if (L < 1) throw InputError("signals too short for projection");
  detail::ProjectionBasis basis = detail::make_basis(references, L);
  // decomposition energies are taken over the signal support only; the
  // filter's ringing past the last sample would otherwise count as error
  const std::size_t out_len = T;

  // pairwise metrics: sdr[k][j], sir[k][j] for estimate k against reference j
  Mat sdr_kj(J, J), sir_kj(J, J);
  for (int k = 0; k < J; ++k) {
    // correlation of the estimate with each delayed reference
    Eigen::VectorXd c(J * L);
    for (int i = 0; i < J; ++i) {
      std::vector<double> r = cross_correlate(estimates[k], references[i]);
      const std::ptrdiff_t zero = static_cast<std::ptrdiff_t>(T) - 1;
      for (int a = 0; a < L; ++a) c(i * L + a) = r[zero + a];
    }
    Eigen::VectorXd w_all = basis.gram_ldlt.solve(c);
    std::vector<double> p_all = detail::apply_filters(basis, w_all, out_len);
    std::vector<double> est_pad = estimates[k];
    est_pad.resize(out_len, 0.0);
    for (int j = 0; j < J; ++j) {
      Eigen::VectorXd wj = basis.block_ldlt[j].solve(c.segment(j * L, L));
      Eigen::VectorXd w_target = Eigen::VectorXd::Zero(J * L);
      w_target.segment(j * L, L) = wj;
      std::vector<double> s_target =
          detail::apply_filters(basis, w_target, out_len);
      double e_target = detail::energy(s_target);
      double e_interf = 0.0, e_total_err = 0.0;
      for (std::size_t t = 0; t < out_len; ++t) {
        const double interf = p_all[t] - s_target[t];
        const double err = est_pad[t] - s_target[t];
        e_interf += interf * interf;
        e_total_err += err * err;
      }
      auto db = [](double num, double den) {
        if (den <= 0.0) return kInfDb;
        if (num <= 0.0) return -kInfDb;
        return std::min(kInfDb, std::max(-kInfDb, 10.0 * std::log10(num / den)));
      };
      sdr_kj(k, j) = db(e_target, e_total_err);
      sir_kj(k, j) = db(e_target, e_interf);
    }
  }

  // best assignment of estimates to references by mean SIR
  std::vector<int> perm(J);
  for (int j = 0; j < J; ++j) perm[j] = j;
  std::vector<int> best = perm;
  double best_score = -1e300;
  do {
    double score = 0.0;
    for (int j = 0; j < J; ++j) score += sir_kj(perm[j], j);
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  result.permutation = best;
  result.sdr.resize(J);
  result.sir.resize(J);
  for (int j = 0; j < J; ++j) {
    result.sdr[j] = sdr_kj(best[j], j);
    result.sir[j] = sir_kj(best[j], j);
  }
  return result;
}

}  // namespace echosep
