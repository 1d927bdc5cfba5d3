#pragma once

#include <atomic>
#include <chrono>
#include <thread>

#include "echosep/bss_eval.hpp"
#include "echosep/em_separator.hpp"
#include "echosep/serialization.hpp"
#include "echosep/synth_corpus.hpp"

namespace echosep {

enum class Algorithm { Mu, Em };

inline std::string to_string(Algorithm a) {
  return a == Algorithm::Mu ? "mu" : "em";
}
inline std::string to_string(DictionaryMode d) {
  return d == DictionaryMode::Universal ? "universal" : "speaker";
}

// A channel mode as it appears in configs and result rows: "learn",
// "anechoic", or "K<n>" for the n-earliest-echoes model (K0 = no echoes).
struct ChannelMode {
  std::string name;
  ChannelKind kind = ChannelKind::NoEchoes;
  int K = 0;

  static ChannelMode parse(const std::string& s) {
    ChannelMode m;
    m.name = s;
    if (s == "learn") {
      m.kind = ChannelKind::LearnInit;
    } else if (s == "anechoic") {
      m.kind = ChannelKind::Anechoic;
    } else if (s.size() >= 2 && s[0] == 'K') {
      m.K = std::stoi(s.substr(1));
      m.kind = m.K == 0 ? ChannelKind::NoEchoes : ChannelKind::Echoes;
      if (m.K < 0) throw ConfigError("negative K in mode " + s);
    } else {
      throw ConfigError("unknown channel mode: " + s);
    }
    return m;
  }
};

// Regularization weights from the universal-dictionary grid search; zero
// for every mode with speaker-specific dictionaries.
inline double default_gamma(const ChannelMode& mode, DictionaryMode dict) {
  if (dict == DictionaryMode::SpeakerSpecific) return 0.0;
  switch (mode.kind) {
    case ChannelKind::LearnInit: return 1e-1;
    case ChannelKind::Anechoic: return 10.0;
    default: break;
  }
  if (mode.K == 0) return 10.0;
  if (mode.K == 1) return 1e-3;
  return 0.0;
}

struct RoomSpec {
  std::string shape = "prism";  // "shoebox" or "prism"
  Vec3 shoebox_size = Vec3(6.0, 5.0, 3.0);
  std::vector<Eigen::Vector2d> floor_plan;  // prism only
  double height = 3.0;
  double absorption = 0.4;
  double sample_rate = 16000.0;

  Room build() const {
    if (shape == "shoebox")
      return make_shoebox(shoebox_size, absorption, sample_rate);
    return make_prism(floor_plan.empty() ? default_floor_plan() : floor_plan,
                      height, absorption, sample_rate);
  }

  // convex 5-gon; with floor and ceiling this is the default 7-wall room
  static std::vector<Eigen::Vector2d> default_floor_plan() {
    return {{0.0, 0.0}, {7.0, 0.0}, {7.0, 4.0}, {4.0, 6.5}, {0.0, 5.5}};
  }
};

struct ExperimentConfig {
  RoomSpec room;
  Vec3 array_center = Vec3(0.6, 0.7, 1.2);
  double array_edge = 0.3;
  int n_sources = 40;
  std::pair<double, double> dist_range = {2.5, 4.0};
  double min_pair_dist = 1.0;
  Algorithm algorithm = Algorithm::Mu;
  DictionaryMode dictionary_mode = DictionaryMode::Universal;
  std::vector<ChannelMode> channel_modes;
  std::map<std::string, double> gamma_override;
  int mu_iterations = 200;
  int em_iterations = 300;
  std::uint64_t seed = 1;
  int pair_subset = 10;  // 0 = all pairs
  int max_order = 6;     // rendering order; generic rooms get expensive fast
  double utterance_s = 4.0;
  int train_speakers = 10;       // universal dictionary
  int train_utterances = 3;
  int atoms_universal = 10;      // per speaker
  int atoms_speaker = 20;
  int dict_iterations = 150;
  int jobs = 1;

  void validate() const {
    std::vector<std::string> errors;
    if (channel_modes.empty()) errors.push_back("channel_modes empty");
    if (n_sources < 2) errors.push_back("n_sources < 2");
    if (mu_iterations < 1 || em_iterations < 1)
      errors.push_back("iterations must be >= 1");
    if (utterance_s <= 0) errors.push_back("utterance_s <= 0");
    for (const ChannelMode& m : channel_modes)
      if (m.K > 6) errors.push_back("K > 6 in mode " + m.name);
    if (!errors.empty()) {
      std::string msg = "invalid config:";
      for (const std::string& e : errors) msg += " [" + e + "]";
      throw ConfigError(msg);
    }
  }

  double gamma_for(const ChannelMode& mode) const {
    auto it = gamma_override.find(mode.name);
    if (it != gamma_override.end()) return it->second;
    return default_gamma(mode, dictionary_mode);
  }
};

struct ResultRow {
  int pair_id = -1;
  int src_a = -1, src_b = -1;
  std::string algorithm, dictionary_mode, channel_mode;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  double sdr0 = 0, sdr1 = 0, sir0 = 0, sir1 = 0;
  double cost_first = 0, cost_last = 0;
  double runtime_s = 0;  // reported separately; results.csv stays bit-stable
  std::string error;     // nonempty if this run failed
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  ExperimentConfig config;
};

namespace detail {

struct TestSpeakers {
  SpeakerProfile a, b;
  std::string name_a = "testA", name_b = "testB";
};

inline Mat clip_power(const AudioClip& clip, const StftConfig& cfg) {
  return power(stft(clip.samples, cfg, clip.sample_rate));
}

}  // namespace detail

// Trains the dictionary the configured way on synthetic speakers. Universal
// mode concatenates `train_speakers` blocks; speaker-specific mode trains
// one block per test speaker on held-in utterances.
inline Dictionary train_experiment_dictionary(const ExperimentConfig& cfg,
                                              const detail::TestSpeakers& ts,
                                              const StftConfig& stft_cfg) {
  std::vector<std::pair<std::string, std::vector<Mat>>> training;
  const double fs = cfg.room.sample_rate;
  if (cfg.dictionary_mode == DictionaryMode::Universal) {
    for (int s = 0; s < cfg.train_speakers; ++s) {
      SpeakerProfile sp = make_speaker_profile(cfg.seed + 1000 * s);
      std::vector<Mat> spectra;
      for (int u = 0; u < cfg.train_utterances; ++u)
        spectra.push_back(detail::clip_power(
            synth_utterance(sp, cfg.utterance_s, cfg.seed + 1000 * s + u + 1,
                            fs),
            stft_cfg));
      training.emplace_back("spk" + std::to_string(s), std::move(spectra));
    }
    return train_dictionary(training, cfg.atoms_universal,
                            cfg.dict_iterations, cfg.seed + 31);
  }
  for (const auto& [name, sp] :
       {std::pair{ts.name_a, ts.a}, std::pair{ts.name_b, ts.b}}) {
    std::vector<Mat> spectra;
    for (int u = 0; u < cfg.train_utterances; ++u)
      spectra.push_back(detail::clip_power(
          synth_utterance(sp, cfg.utterance_s,
                          cfg.seed + std::hash<std::string>{}(name) % 977 +
                              100 + u,
                          fs),
          stft_cfg));
    training.emplace_back(name, std::move(spectra));
  }
  return train_dictionary(training, cfg.atoms_speaker, cfg.dict_iterations,
                          cfg.seed + 57);
}

inline ResultRow run_single(const ExperimentConfig& cfg,
                            const Scenario& scenario_all, int pair_id,
                            std::pair<int, int> pair,
                            const detail::TestSpeakers& ts,
                            const Dictionary& dict,
                            const ChannelMode& mode,
                            const StftConfig& stft_cfg) {
  ResultRow row;
  row.pair_id = pair_id;
  row.src_a = pair.first;
  row.src_b = pair.second;
  row.algorithm = to_string(cfg.algorithm);
  row.dictionary_mode = to_string(cfg.dictionary_mode);
  row.channel_mode = mode.name;
  row.gamma = cfg.gamma_for(mode);
  row.seed = cfg.seed + 10007ULL * pair_id;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const double fs = cfg.room.sample_rate;
    Scenario sc;
    sc.room = scenario_all.room;
    sc.mic_positions = scenario_all.mic_positions;
    sc.source_positions = {scenario_all.source_positions[pair.first],
                           scenario_all.source_positions[pair.second]};
    sc.seed = row.seed;

    AudioClip ca = synth_utterance(ts.a, cfg.utterance_s, row.seed + 1, fs);
    AudioClip cb = synth_utterance(ts.b, cfg.utterance_s, row.seed + 2, fs);
    const std::size_t len = std::min(ca.samples.size(), cb.samples.size());
    ca.samples.resize(len);
    cb.samples.resize(len);

    const bool anechoic = mode.kind == ChannelKind::Anechoic;
    Mixture mix = render_mixture(sc, {ca.samples, cb.samples},
                                 anechoic ? 0 : cfg.max_order);
    std::vector<Spectrogram> specs;
    for (const auto& sig : mix.mics) specs.push_back(stft(sig, stft_cfg, fs));
    const int F = stft_cfg.n_bins();
    const int M = static_cast<int>(mix.mics.size());

    ChannelMatrix channels;
    switch (mode.kind) {
      case ChannelKind::LearnInit:
        channels = baseline_channels(ChannelKind::LearnInit, F, M, 2,
                                     row.seed + 3);
        break;
      case ChannelKind::Anechoic:
        // EM exploits the exact direct-path phases; MU only sees the flat
        // magnitudes either way
        channels = cfg.algorithm == Algorithm::Em
                       ? exact_anechoic_channels(sc, F, stft_cfg.frame_size)
                       : baseline_channels(ChannelKind::Anechoic, F, M, 2);
        break;
      case ChannelKind::NoEchoes:
      case ChannelKind::Echoes:
        channels = echo_channels(sc.room, sc.mic_positions,
                                 sc.source_positions, mode.K, F,
                                 stft_cfg.frame_size);
        break;
      default:
        throw ConfigError("unsupported mode in experiment");
    }

    std::vector<std::string> speakers = {ts.name_a, ts.name_b};
    std::vector<std::vector<double>> estimates;
    if (cfg.algorithm == Algorithm::Mu) {
      MuRunConfig rc;
      rc.channel_mode = mode.kind;
      rc.gamma = row.gamma;
      rc.iterations = cfg.mu_iterations;
      rc.dictionary_mode = cfg.dictionary_mode;
      rc.seed = row.seed + 11;
      MuRunResult r = separate_mu(specs, channels, dict, rc, speakers);
      estimates = r.sources;
      row.cost_first = r.cost_trace.front();
      row.cost_last = r.cost_trace.back();
    } else {
      EmRunConfig rc;
      rc.channel_mode = mode.kind;
      rc.iterations = cfg.em_iterations;
      rc.dictionary_mode = cfg.dictionary_mode;
      rc.seed = row.seed + 11;
      EmRunResult r = separate_em(specs, channels, dict, rc, speakers);
      estimates = r.sources;
      row.cost_first = r.cost_trace.front();
      row.cost_last = r.cost_trace.back();
    }

    EvalResult ev = bss_eval(estimates, {mix.images[0][0], mix.images[1][0]});
    row.sdr0 = ev.sdr[0];
    row.sdr1 = ev.sdr[1];
    row.sir0 = ev.sir[0];
    row.sir1 = ev.sir[1];
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return row;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Room room = cfg.room.build();
  std::vector<Vec3> mics = triangle_array(cfg.array_center, cfg.array_edge);
  ScenarioPairs sp = sample_scenarios(room, mics, cfg.n_sources,
                                      cfg.dist_range, cfg.min_pair_dist,
                                      cfg.seed);
  std::vector<std::pair<int, int>> pairs = sp.pairs;
  if (cfg.pair_subset > 0 &&
      static_cast<int>(pairs.size()) > cfg.pair_subset) {
    Rng rng(cfg.seed + 13);
    for (std::size_t i = pairs.size(); i > 1; --i)
      std::swap(pairs[i - 1], pairs[rng.integer(i)]);
    pairs.resize(cfg.pair_subset);
  }

  detail::TestSpeakers ts;
  ts.a = make_speaker_profile(cfg.seed + 500001);
  ts.b = make_speaker_profile(cfg.seed + 500002);
  StftConfig stft_cfg;
  Dictionary dict = train_experiment_dictionary(cfg, ts, stft_cfg);
  // speaker-specific blocks carry the test speaker names
  if (cfg.dictionary_mode == DictionaryMode::SpeakerSpecific) {
    dict.blocks[0].speaker = ts.name_a;
    dict.blocks[1].speaker = ts.name_b;
  }

  ExperimentResult result;
  result.config = cfg;
  const int n_tasks =
      static_cast<int>(pairs.size()) * static_cast<int>(cfg.channel_modes.size());
  result.rows.resize(n_tasks);
  const int jobs = std::max(1, cfg.jobs);
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int task = next.fetch_add(1);
      if (task >= n_tasks) break;
      const int p = task / static_cast<int>(cfg.channel_modes.size());
      const int m = task % static_cast<int>(cfg.channel_modes.size());
      result.rows[task] = run_single(cfg, sp.scenario, p, pairs[p], ts, dict,
                                     cfg.channel_modes[m], stft_cfg);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  return result;
}

struct AggregateRow {
  std::string algorithm, dictionary_mode, channel_mode;
  double median_sdr = 0, median_sir = 0;
  double q1_sdr = 0, q3_sdr = 0, q1_sir = 0, q3_sir = 0;
  int count = 0;
};

namespace detail {

// lower median for even counts
inline double lower_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}
inline double quartile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double idx = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (idx - lo) * (v[hi] - v[lo]);
}

}  // namespace detail

inline std::vector<AggregateRow> aggregate(const ExperimentResult& result) {
  if (result.rows.empty()) throw InputError("no results to aggregate");
  std::map<std::tuple<std::string, std::string, std::string>,
           std::pair<std::vector<double>, std::vector<double>>>
      groups;
  for (const ResultRow& r : result.rows) {
    if (!r.error.empty()) continue;
    auto& [sdrs, sirs] =
        groups[{r.algorithm, r.dictionary_mode, r.channel_mode}];
    sdrs.push_back(r.sdr0);
    sdrs.push_back(r.sdr1);
    sirs.push_back(r.sir0);
    sirs.push_back(r.sir1);
  }
  std::vector<AggregateRow> out;
  for (const auto& [key, vals] : groups) {
    AggregateRow a;
    std::tie(a.algorithm, a.dictionary_mode, a.channel_mode) = key;
    a.median_sdr = detail::lower_median(vals.first);
    a.median_sir = detail::lower_median(vals.second);
    a.q1_sdr = detail::quartile(vals.first, 0.25);
    a.q3_sdr = detail::quartile(vals.first, 0.75);
    a.q1_sir = detail::quartile(vals.second, 0.25);
    a.q3_sir = detail::quartile(vals.second, 0.75);
    a.count = static_cast<int>(vals.first.size());
    out.push_back(a);
  }
  return out;
}

inline std::string csv_header() {
  return "pair_id,src_a,src_b,algorithm,dictionary_mode,channel_mode,gamma,"
         "seed,sdr0,sdr1,sir0,sir1,cost_first,cost_last,error";
}

inline std::string csv_line(const ResultRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%d,%d,%d,%s,%s,%s,%.10g,%llu,%.6f,%.6f,%.6f,%.6f,%.10g,%.10g,"
                "%s",
                r.pair_id, r.src_a, r.src_b, r.algorithm.c_str(),
                r.dictionary_mode.c_str(), r.channel_mode.c_str(), r.gamma,
                static_cast<unsigned long long>(r.seed), r.sdr0, r.sdr1,
                r.sir0, r.sir1, r.cost_first, r.cost_last, r.error.c_str());
  return buf;
}

// Writes results.csv, timings.csv, summary.json, and per-mode distribution
// files under `dir`. results.csv is byte-stable for identical configs.
inline void emit_report(const ExperimentResult& result,
                        const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream f(dir + "/results.csv");
    if (!f) throw InputError("cannot write results.csv in " + dir);
    f << csv_header() << "\n";
    for (const ResultRow& r : result.rows) f << csv_line(r) << "\n";
  }
  {
    std::ofstream f(dir + "/timings.csv");
    f << "pair_id,algorithm,channel_mode,runtime_s\n";
    for (const ResultRow& r : result.rows) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%d,%s,%s,%.3f\n", r.pair_id,
                    r.algorithm.c_str(), r.channel_mode.c_str(), r.runtime_s);
      f << buf;
    }
  }
  std::vector<AggregateRow> aggs;
  if (!result.rows.empty()) aggs = aggregate(result);
  {
    json summary = json::array();
    for (const AggregateRow& a : aggs)
      summary.push_back({{"algorithm", a.algorithm},
                         {"dictionary_mode", a.dictionary_mode},
                         {"channel_mode", a.channel_mode},
                         {"median_sdr", a.median_sdr},
                         {"median_sir", a.median_sir},
                         {"q1_sdr", a.q1_sdr},
                         {"q3_sdr", a.q3_sdr},
                         {"q1_sir", a.q1_sir},
                         {"q3_sir", a.q3_sir},
                         {"count", a.count}});
    std::ofstream f(dir + "/summary.json");
    f << summary.dump(2) << "\n";
  }
  // plot-ready per-mode distributions
  std::map<std::string, std::vector<const ResultRow*>> by_mode;
  for (const ResultRow& r : result.rows)
    if (r.error.empty()) by_mode[r.channel_mode].push_back(&r);
  for (const auto& [mode, rows] : by_mode) {
    std::ofstream f(dir + "/dist_" + mode + ".csv");
    f << "sdr,sir\n";
    for (const ResultRow* r : rows) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n%.6f,%.6f\n", r->sdr0,
                    r->sir0, r->sdr1, r->sir1);
      f << buf;
    }
  }
}

inline json config_to_json(const ExperimentConfig& cfg) {
  json modes = json::array();
  for (const ChannelMode& m : cfg.channel_modes) modes.push_back(m.name);
  json plan = json::array();
  for (const auto& v : cfg.room.floor_plan) plan.push_back({v.x(), v.y()});
  return {{"room",
           {{"shape", cfg.room.shape},
            {"shoebox_size",
             {cfg.room.shoebox_size.x(), cfg.room.shoebox_size.y(),
              cfg.room.shoebox_size.z()}},
            {"floor_plan", plan},
            {"height", cfg.room.height},
            {"absorption", cfg.room.absorption},
            {"sample_rate", cfg.room.sample_rate}}},
          {"array_center",
           {cfg.array_center.x(), cfg.array_center.y(), cfg.array_center.z()}},
          {"array_edge", cfg.array_edge},
          {"n_sources", cfg.n_sources},
          {"dist_range", {cfg.dist_range.first, cfg.dist_range.second}},
          {"min_pair_dist", cfg.min_pair_dist},
          {"algorithm", to_string(cfg.algorithm)},
          {"dictionary_mode", to_string(cfg.dictionary_mode)},
          {"channel_modes", modes},
          {"gamma_override", cfg.gamma_override},
          {"mu_iterations", cfg.mu_iterations},
          {"em_iterations", cfg.em_iterations},
          {"seed", cfg.seed},
          {"pair_subset", cfg.pair_subset},
          {"max_order", cfg.max_order},
          {"utterance_s", cfg.utterance_s},
          {"train_speakers", cfg.train_speakers},
          {"train_utterances", cfg.train_utterances},
          {"atoms_universal", cfg.atoms_universal},
          {"atoms_speaker", cfg.atoms_speaker},
          {"dict_iterations", cfg.dict_iterations},
          {"jobs", cfg.jobs}};
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("room")) {
    const json& r = j["room"];
    cfg.room.shape = r.value("shape", cfg.room.shape);
    if (r.contains("shoebox_size"))
      cfg.room.shoebox_size = Vec3(r["shoebox_size"][0], r["shoebox_size"][1],
                                   r["shoebox_size"][2]);
    if (r.contains("floor_plan"))
      for (const auto& v : r["floor_plan"])
        cfg.room.floor_plan.push_back(Eigen::Vector2d(v[0], v[1]));
    cfg.room.height = r.value("height", cfg.room.height);
    cfg.room.absorption = r.value("absorption", cfg.room.absorption);
    cfg.room.sample_rate = r.value("sample_rate", cfg.room.sample_rate);
  }
  if (j.contains("array_center"))
    cfg.array_center = Vec3(j["array_center"][0], j["array_center"][1],
                            j["array_center"][2]);
  cfg.array_edge = j.value("array_edge", cfg.array_edge);
  cfg.n_sources = j.value("n_sources", cfg.n_sources);
  if (j.contains("dist_range"))
    cfg.dist_range = {j["dist_range"][0], j["dist_range"][1]};
  cfg.min_pair_dist = j.value("min_pair_dist", cfg.min_pair_dist);
  if (j.contains("algorithm"))
    cfg.algorithm = j["algorithm"] == "em" ? Algorithm::Em : Algorithm::Mu;
  if (j.contains("dictionary_mode"))
    cfg.dictionary_mode = j["dictionary_mode"] == "speaker"
                              ? DictionaryMode::SpeakerSpecific
                              : DictionaryMode::Universal;
  if (j.contains("channel_modes"))
    for (const auto& m : j["channel_modes"])
      cfg.channel_modes.push_back(ChannelMode::parse(m));
  if (j.contains("gamma_override"))
    for (const auto& [k, v] : j["gamma_override"].items())
      cfg.gamma_override[k] = v;
  cfg.mu_iterations = j.value("mu_iterations", cfg.mu_iterations);
  cfg.em_iterations = j.value("em_iterations", cfg.em_iterations);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.pair_subset = j.value("pair_subset", cfg.pair_subset);
  cfg.max_order = j.value("max_order", cfg.max_order);
  cfg.utterance_s = j.value("utterance_s", cfg.utterance_s);
  cfg.train_speakers = j.value("train_speakers", cfg.train_speakers);
  cfg.train_utterances = j.value("train_utterances", cfg.train_utterances);
  cfg.atoms_universal = j.value("atoms_universal", cfg.atoms_universal);
  cfg.atoms_speaker = j.value("atoms_speaker", cfg.atoms_speaker);
  cfg.dict_iterations = j.value("dict_iterations", cfg.dict_iterations);
  cfg.jobs = j.value("jobs", cfg.jobs);
  return cfg;
}

}  // namespace echosep
