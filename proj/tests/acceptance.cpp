// End-to-end acceptance suite: exact property checks plus desk-scale
// directional reproductions of the echo-aware separation results. Prints one
// PASS/FAIL line per criterion and exits nonzero if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "echosep/echosep.hpp"

using namespace echosep;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok,
            const std::string& details, double seconds) {
  std::printf("[%s] %2d %-38s %s (%.1f s)\n", ok ? "PASS" : "FAIL", idx,
              name.c_str(), details.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

template <typename F>
void criterion(int idx, const std::string& name, F&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  std::string details;
  try {
    std::tie(ok, details) = fn();
  } catch (const std::exception& e) {
    details = std::string("exception: ") + e.what();
  }
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  report(idx, name, ok, details, dt);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

std::vector<double> white(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

// independent mirror enumeration for the image-source cross-check
std::vector<Vec3> brute_force_positions(const Room& room, const Vec3& point,
                                        int max_order, const Vec3& receiver) {
  std::vector<Vec3> out = {point};
  std::set<std::tuple<long long, long long, long long>> seen;
  auto key = [](const Vec3& p) {
    return std::make_tuple(std::llround(p.x() * 1e9), std::llround(p.y() * 1e9),
                           std::llround(p.z() * 1e9));
  };
  seen.insert(key(point));
  const int W = static_cast<int>(room.walls.size());
  std::vector<std::vector<int>> sequences = {{}};
  for (int order = 1; order <= max_order; ++order) {
    std::vector<std::vector<int>> next;
    for (const auto& seq : sequences)
      for (int w = 0; w < W; ++w) {
        auto s = seq;
        s.push_back(w);
        next.push_back(std::move(s));
      }
    std::map<std::tuple<long long, long long, long long>,
             std::vector<ImageSource>>
        by_pos;
    for (const auto& seq : next) {
      Vec3 p = point;
      bool degenerate = false;
      for (int w : seq) {
        if (room.walls[w].signed_distance(p) >= -1e-12) {
          degenerate = true;
          break;
        }
        p = room.walls[w].reflect(p);
      }
      if (degenerate || seen.count(key(p))) continue;
      ImageSource img;
      img.position = p;
      img.order = order;
      img.wall_sequence = seq;
      by_pos[key(p)].push_back(std::move(img));
    }
    for (auto& [k, variants] : by_pos) {
      seen.insert(k);
      for (const ImageSource& v : variants)
        if (image_visible(room, v, receiver)) {
          out.push_back(v.position);
          break;
        }
    }
    sequences = std::move(next);
  }
  return out;
}

std::multiset<std::tuple<long long, long long, long long>> position_set(
    const std::vector<Vec3>& pts) {
  std::multiset<std::tuple<long long, long long, long long>> s;
  for (const Vec3& p : pts)
    s.insert(std::make_tuple(std::llround(p.x() * 1e9),
                             std::llround(p.y() * 1e9),
                             std::llround(p.z() * 1e9)));
  return s;
}

// ---- desk-scale experiment scaffolding --------------------------------

ExperimentConfig desk_base(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.n_sources = 40;
  cfg.pair_subset = 10;
  cfg.max_order = 6;
  cfg.utterance_s = 1.5;
  cfg.mu_iterations = 150;
  cfg.em_iterations = 50;
  cfg.train_speakers = 10;
  cfg.train_utterances = 3;
  cfg.atoms_universal = 10;
  cfg.atoms_speaker = 20;
  cfg.dict_iterations = 150;
  cfg.seed = seed;
  return cfg;
}

struct Medians {
  double sdr = 0, sir = 0;
  int count = 0;
};

std::map<std::string, Medians> medians_by_mode(const ExperimentResult& res,
                                               std::string* error_out) {
  for (const ResultRow& r : res.rows)
    if (!r.error.empty() && error_out && error_out->empty())
      *error_out = r.channel_mode + ": " + r.error;
  std::map<std::string, Medians> out;
  for (const AggregateRow& a : aggregate(res)) {
    out[a.channel_mode] = {a.median_sdr, a.median_sir, a.count};
  }
  return out;
}

}  // namespace

int main() {
  const std::uint64_t kSeed = 20260824ULL;

  // 1. STFT perfect reconstruction
  criterion(1, "STFT round-trip", [] {
    StftConfig cfg;
    double worst = 0.0;
    for (int s = 0; s < 100; ++s) {
      auto x = white(16000 + 37 * s, 1000 + s);
      auto y = istft(stft(x, cfg));
      double num = 0.0, den = 0.0;
      // cosine-windowed ends see a single squared window; measure the
      // interior where overlap-add is complete
      for (std::size_t t = cfg.hop; t + cfg.frame_size < x.size(); ++t) {
        const double d = y[t] - x[t];
        num += d * d;
        den += x[t] * x[t];
      }
      worst = std::max(worst, std::sqrt(num / den));
    }
    return std::make_pair(worst <= 1e-10,
                          fmt("worst rel l2 = %.2e", worst));
  });

  // 2. image-source oracle equivalence
  criterion(2, "image-source oracle equivalence", [] {
    bool ok = true;
    {
      Room room = make_shoebox({4, 6, 3}, 0.4);
      Vec3 p(1.1, 2.3, 0.9), r(2.5, 3.0, 1.5);
      auto fast = enumerate_images(room, p, 2, r);
      std::vector<Vec3> fp;
      for (const auto& i : fast) fp.push_back(i.position);
      ok = ok && position_set(fp) ==
                     position_set(brute_force_positions(room, p, 2, r));
    }
    {
      Room room = make_prism(RoomSpec::default_floor_plan(), 3.0, 0.4);
      Vec3 p(4.5, 3.2, 1.4), r(0.8, 0.9, 1.2);
      auto fast = enumerate_images(room, p, 2, r);
      std::vector<Vec3> fp;
      for (const auto& i : fast) fp.push_back(i.position);
      ok = ok && position_set(fp) ==
                     position_set(brute_force_positions(room, p, 2, r));
    }
    return std::make_pair(ok, std::string("shoebox + prism, order 2"));
  });

  // 3. T60 sanity on the absorption-0.4 room
  criterion(3, "T60 in [60, 160] ms", [] {
    Room room = make_prism(RoomSpec::default_floor_plan(), 3.0, 0.4);
    std::vector<double> t60s;
    Rir r1 = synthesize_rir(room, {4.5, 3.2, 1.4}, {0.7, 0.8, 1.2}, 6);
    Rir r2 = synthesize_rir(room, {5.5, 2.0, 1.6}, {1.2, 4.2, 1.3}, 6);
    t60s.push_back(estimate_t60(r1));
    t60s.push_back(estimate_t60(r2));
    bool ok = true;
    for (double t : t60s) ok = ok && t >= 0.060 && t <= 0.160;
    return std::make_pair(
        ok, fmt("T60 = %.0f ms, %.0f ms", 1e3 * t60s[0], 1e3 * t60s[1]));
  });

  // 4. MU monotonicity across modes and regularization weights
  criterion(4, "MU cost nonincreasing (20 problems)", [kSeed] {
    StftConfig cfg;
    cfg.frame_size = 512;
    cfg.hop = 256;
    Room room = make_shoebox({6, 5, 3}, 0.4);
    int worst_problem = -1;
    double worst_violation = 0.0;
    for (int p = 0; p < 20; ++p) {
      // mode cycle: learned channels, one-echo channels, flat channels,
      // each with its grid-searched regularization weight
      const int mode = p % 3;
      const double gamma = mode == 0 ? 0.1 : (mode == 1 ? 1e-3 : 10.0);
      Scenario sc;
      sc.room = room;
      sc.mic_positions = triangle_array({1.2, 1.1, 1.3});
      Rng pos_rng(kSeed + p);
      sc.source_positions = {
          {pos_rng.uniform(2.5, 5.0), pos_rng.uniform(1.0, 4.0), 1.4},
          {pos_rng.uniform(2.5, 5.0), pos_rng.uniform(1.0, 4.0), 1.6}};
      SpeakerProfile sa = make_speaker_profile(kSeed + 2 * p);
      SpeakerProfile sb = make_speaker_profile(kSeed + 2 * p + 1);
      AudioClip ca = synth_utterance(sa, 0.7, kSeed + 10 * p + 1);
      AudioClip cb = synth_utterance(sb, 0.7, kSeed + 10 * p + 2);
      Mixture mix = render_mixture(sc, {ca.samples, cb.samples}, 3);
      std::vector<Spectrogram> specs;
      for (const auto& sig : mix.mics) specs.push_back(stft(sig, cfg));

      std::vector<std::pair<std::string, std::vector<Mat>>> training = {
          {"a", {power(stft(ca.samples, cfg))}},
          {"b", {power(stft(cb.samples, cfg))}}};
      Dictionary dict = train_dictionary(training, 5, 40, kSeed + p);

      ChannelMatrix ch;
      if (mode == 0)
        ch = baseline_channels(ChannelKind::LearnInit, cfg.n_bins(), 3, 2,
                               kSeed + p);
      else if (mode == 1)
        ch = echo_channels(room, sc.mic_positions, sc.source_positions, 1,
                           cfg.n_bins(), cfg.frame_size);
      else
        ch = baseline_channels(ChannelKind::NoEchoes, cfg.n_bins(), 3, 2);

      MuRunConfig rc;
      rc.gamma = gamma;
      rc.iterations = 50;
      rc.seed = kSeed + 100 + p;
      MuRunResult r = separate_mu(specs, ch, dict, rc);
      for (std::size_t i = 1; i < r.cost_trace.size(); ++i) {
        const double rel = (r.cost_trace[i] - r.cost_trace[i - 1]) /
                           std::abs(r.cost_trace[i - 1]);
        if (rel > worst_violation) {
          worst_violation = rel;
          worst_problem = p;
        }
      }
    }
    return std::make_pair(worst_violation <= 1e-9,
                          fmt("worst rel increase = %.2e (problem %.0f)",
                              worst_violation, double(worst_problem)));
  });

  // 5. EM monotonicity + dense likelihood oracle
  criterion(5, "EM cost nonincreasing + loglik oracle", [kSeed] {
    StftConfig cfg;
    cfg.frame_size = 256;
    cfg.hop = 128;
    double worst_violation = 0.0;
    for (int p = 0; p < 5; ++p) {
      AudioClip a = synth_speech_like(SynthKind::FilteredNoise, 0.35,
                                      kSeed + 2 * p, 16000, 100, 2500);
      AudioClip b = synth_speech_like(SynthKind::FilteredNoise, 0.35,
                                      kSeed + 2 * p + 1, 16000, 2000, 6500);
      std::vector<Spectrogram> X = {stft(a.samples, cfg),
                                    stft(b.samples, cfg)};
      // deterministic random mixing channel, well-conditioned
      Rng rng(kSeed + 50 + p);
      ChannelMatrix ch;
      ch.provenance = ChannelKind::Echoes;
      ch.H.assign(cfg.n_bins(), CMat::Zero(2, 2));
      for (int f = 0; f < cfg.n_bins(); ++f)
        for (int m = 0; m < 2; ++m)
          for (int j = 0; j < 2; ++j)
            ch.H[f](m, j) = rng.uniform(0.6, 1.4) *
                            std::exp(cplx(0.0, rng.uniform(0.0, 2.0 * kPi)));
      ch.fill_q_from_h();
      std::vector<Spectrogram> Y(2, X[0]);
      for (int m = 0; m < 2; ++m) Y[m].data.setZero();
      for (int f = 0; f < cfg.n_bins(); ++f)
        for (int n = 0; n < X[0].n_frames(); ++n)
          for (int m = 0; m < 2; ++m)
            Y[m].data(f, n) = ch.H[f](m, 0) * X[0].data(f, n) +
                              ch.H[f](m, 1) * X[1].data(f, n);
      std::vector<std::pair<std::string, std::vector<Mat>>> training = {
          {"a", {power(X[0])}}, {"b", {power(X[1])}}};
      Dictionary dict = train_dictionary(training, 4, 40, kSeed + p);
      EmRunConfig rc;
      rc.iterations = 300;
      rc.seed = kSeed + 200 + p;
      EmRunResult r = separate_em(Y, ch, dict, rc, {"a", "b"});
      for (std::size_t i = 1; i < r.cost_trace.size(); ++i) {
        const double rel = (r.cost_trace[i] - r.cost_trace[i - 1]) /
                           std::abs(r.cost_trace[i - 1]);
        worst_violation = std::max(worst_violation, rel);
      }
    }

    // dense oracle on a toy size
    double oracle_err = 0.0;
    {
      const int M = 3, J = 2, F = 5, N = 4;
      Rng rng(kSeed + 999);
      std::vector<Spectrogram> mixture(M);
      StftConfig toy;
      toy.frame_size = (F - 1) * 2;
      toy.hop = F - 1;
      for (int m = 0; m < M; ++m) {
        mixture[m].config = toy;
        mixture[m].data.resize(F, N);
        for (int f = 0; f < F; ++f)
          for (int n = 0; n < N; ++n)
            mixture[m].data(f, n) = cplx(rng.normal(), rng.normal());
      }
      std::vector<CMat> H(F, CMat(M, J));
      for (int f = 0; f < F; ++f)
        for (int m = 0; m < M; ++m)
          for (int j = 0; j < J; ++j)
            H[f](m, j) = cplx(rng.normal(), rng.normal());
      std::vector<Mat> sp(J, Mat(F, N));
      for (int j = 0; j < J; ++j)
        for (int f = 0; f < F; ++f)
          for (int n = 0; n < N; ++n) sp[j](f, n) = rng.uniform(0.1, 2.0);
      Eigen::VectorXd sigma2(F);
      for (int f = 0; f < F; ++f) sigma2(f) = rng.uniform(0.01, 0.1);
      const double fast = em_loglik(mixture, H, sp, sigma2);
      double dense = 0.0;
      for (int f = 0; f < F; ++f)
        for (int n = 0; n < N; ++n) {
          CMat sigma = sigma2(f) * CMat::Identity(M, M);
          for (int j = 0; j < J; ++j)
            sigma += sp[j](f, n) * (H[f].col(j) * H[f].col(j).adjoint());
          Eigen::VectorXcd y(M);
          for (int m = 0; m < M; ++m) y(m) = mixture[m].data(f, n);
          dense += std::real(y.dot(sigma.fullPivLu().solve(y).eval()));
          dense += std::log(std::real(sigma.fullPivLu().determinant()));
        }
      oracle_err = std::abs(fast - dense) / std::abs(dense);
    }
    const bool ok = worst_violation <= 1e-8 && oracle_err <= 1e-10;
    return std::make_pair(ok, fmt("worst rel increase = %.2e, oracle err = %.2e",
                                  worst_violation, oracle_err));
  });

  // desk-scale experiments shared by criteria 6-10 and 12
  ExperimentResult mu_universal, mu_speaker, em_speaker;
  std::string exp_error;
  {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ExperimentConfig cfg = desk_base(kSeed);
      cfg.algorithm = Algorithm::Mu;
      cfg.dictionary_mode = DictionaryMode::Universal;
      cfg.channel_modes = {ChannelMode::parse("anechoic"),
                           ChannelMode::parse("K0"),
                           ChannelMode::parse("K6")};
      mu_universal = run_experiment(cfg);

      cfg = desk_base(kSeed);
      cfg.algorithm = Algorithm::Mu;
      cfg.dictionary_mode = DictionaryMode::SpeakerSpecific;
      cfg.channel_modes = {ChannelMode::parse("K1"),
                           ChannelMode::parse("learn")};
      mu_speaker = run_experiment(cfg);

      cfg = desk_base(kSeed);
      cfg.algorithm = Algorithm::Em;
      cfg.dictionary_mode = DictionaryMode::SpeakerSpecific;
      cfg.channel_modes = {ChannelMode::parse("anechoic"),
                           ChannelMode::parse("K1"),
                           ChannelMode::parse("K3"),
                           ChannelMode::parse("K6"),
                           ChannelMode::parse("learn")};
      em_speaker = run_experiment(cfg);
    } catch (const std::exception& e) {
      exp_error = e.what();
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("       desk-scale experiments done (%.1f s)%s\n", dt,
                exp_error.empty() ? "" : (" ERROR: " + exp_error).c_str());
    std::fflush(stdout);
  }

  std::string mu_uni_err, mu_spk_err, em_spk_err;
  auto mu_uni = exp_error.empty()
                    ? medians_by_mode(mu_universal, &mu_uni_err)
                    : std::map<std::string, Medians>{};
  auto mu_spk = exp_error.empty()
                    ? medians_by_mode(mu_speaker, &mu_spk_err)
                    : std::map<std::string, Medians>{};
  auto em_spk = exp_error.empty()
                    ? medians_by_mode(em_speaker, &em_spk_err)
                    : std::map<std::string, Medians>{};

  // 6. universal dictionary with flat channels cannot separate
  criterion(6, "flat-channel degeneracy (MU universal)", [&] {
    if (!exp_error.empty() || !mu_uni_err.empty())
      return std::make_pair(false, exp_error + mu_uni_err);
    const double s_an = mu_uni.at("anechoic").sir;
    const double s_k0 = mu_uni.at("K0").sir;
    const bool ok = std::abs(s_an) <= 3.0 && std::abs(s_k0) <= 3.0;
    return std::make_pair(
        ok, fmt("median SIR anechoic = %.2f dB, K0 = %.2f dB", s_an, s_k0));
  });

  // 7. echoes rescue the universal dictionary
  criterion(7, "echo gain (MU universal, K6 vs K0)", [&] {
    if (!exp_error.empty() || !mu_uni_err.empty())
      return std::make_pair(false, exp_error + mu_uni_err);
    const double dsir = mu_uni.at("K6").sir - mu_uni.at("K0").sir;
    const double dsdr = mu_uni.at("K6").sdr - mu_uni.at("K0").sdr;
    const bool ok = dsir >= 2.0 && dsdr >= 0.5;
    return std::make_pair(
        ok, fmt("dSIR = %+.2f dB (>= +2), dSDR = %+.2f dB (>= +0.5)", dsir,
                dsdr));
  });

  // 8. one echo matches learned transfer functions
  criterion(8, "one echo vs learned TFs (MU and EM)", [&] {
    if (!exp_error.empty() || !mu_spk_err.empty() || !em_spk_err.empty())
      return std::make_pair(false, exp_error + mu_spk_err + em_spk_err);
    const double mu_gap = mu_spk.at("K1").sdr - mu_spk.at("learn").sdr;
    const double em_gap = em_spk.at("K1").sdr - em_spk.at("learn").sdr;
    const bool ok = mu_gap >= -1.0 && em_gap >= -1.0;
    return std::make_pair(
        ok, fmt("SDR(K1)-SDR(learn): MU %+.2f dB, EM %+.2f dB (>= -1)", mu_gap,
                em_gap));
  });

  // 9. EM with exact channels on anechoic mixtures
  criterion(9, "EM anechoic near-perfect", [&] {
    if (!exp_error.empty() || !em_spk_err.empty())
      return std::make_pair(false, exp_error + em_spk_err);
    const double sir = em_spk.at("anechoic").sir;
    return std::make_pair(sir > 20.0, fmt("median SIR = %.2f dB (> 20)", sir));
  });

  // 10. echo saturation after the first three echoes
  criterion(10, "echo saturation (EM, K6 vs K3)", [&] {
    if (!exp_error.empty() || !em_spk_err.empty())
      return std::make_pair(false, exp_error + em_spk_err);
    const double gap = em_spk.at("K6").sdr - em_spk.at("K3").sdr;
    return std::make_pair(gap <= 1.5,
                          fmt("SDR(K6)-SDR(K3) = %+.2f dB (<= 1.5)", gap));
  });

  // 11. metric sanity
  criterion(11, "bss_eval fixtures", [] {
    auto a = white(50000, 1);
    auto b = white(50000, 2);
    std::vector<double> sum(a.size());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = a[i] + b[i];
    EvalResult r = bss_eval({sum, sum}, {a, b});
    const double worst_sir =
        std::max(std::abs(r.sir[0]), std::abs(r.sir[1]));

    std::vector<double> mix1(a.size()), mix2(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      mix1[i] = a[i] + 0.3 * b[i];
      mix2[i] = b[i] + 0.3 * a[i];
    }
    EvalResult r1 = bss_eval({mix1, mix2}, {a, b});
    for (auto& v : mix1) v *= 12.3;
    for (auto& v : mix2) v *= 1e-4;
    EvalResult r2 = bss_eval({mix1, mix2}, {a, b});
    double scale_err = 0.0;
    for (int j = 0; j < 2; ++j) {
      scale_err = std::max(scale_err, std::abs(r1.sir[j] - r2.sir[j]));
      scale_err = std::max(scale_err, std::abs(r1.sdr[j] - r2.sdr[j]));
    }
    const bool ok = worst_sir <= 0.1 && scale_err <= 1e-9;
    return std::make_pair(
        ok, fmt("|SIR| = %.3f dB (<= 0.1), scale err = %.1e dB", worst_sir,
                scale_err));
  });

  // 12. byte-identical results across executions
  criterion(12, "deterministic results.csv", [&] {
    if (!exp_error.empty()) return std::make_pair(false, exp_error);
    ExperimentConfig cfg = desk_base(kSeed);
    cfg.algorithm = Algorithm::Mu;
    cfg.dictionary_mode = DictionaryMode::Universal;
    cfg.channel_modes = {ChannelMode::parse("anechoic"),
                         ChannelMode::parse("K0"),
                         ChannelMode::parse("K6")};
    ExperimentResult rerun = run_experiment(cfg);
    const fs::path dir =
        fs::temp_directory_path() /
        ("echosep_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    emit_report(mu_universal, (dir / "a").string());
    emit_report(rerun, (dir / "b").string());
    auto slurp = [](const fs::path& p) {
      std::ifstream f(p);
      std::stringstream ss;
      ss << f.rdbuf();
      return ss.str();
    };
    const std::string csv_a = slurp(dir / "a" / "results.csv");
    const std::string csv_b = slurp(dir / "b" / "results.csv");
    fs::remove_all(dir);
    const bool ok = !csv_a.empty() && csv_a == csv_b;
    return std::make_pair(
        ok, fmt("results.csv %.0f bytes", double(csv_a.size())) +
                (ok ? ", identical" : ", MISMATCH"));
  });

  std::printf("%d of 12 criteria passed\n", 12 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
