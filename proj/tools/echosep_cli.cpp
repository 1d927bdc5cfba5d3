// Command-line front end: dictionary training, mixture simulation,
// separation, metric evaluation, batch experiments, and report generation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "echosep/echosep.hpp"

using namespace echosep;
namespace fs = std::filesystem;

namespace {

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open config: " + path);
  return json::parse(f);
}

std::vector<std::pair<std::string, std::vector<Mat>>> corpus_spectra(
    const std::map<std::string, std::vector<AudioClip>>& corpus,
    const StftConfig& cfg) {
  std::vector<std::pair<std::string, std::vector<Mat>>> out;
  for (const auto& [speaker, clips] : corpus) {
    std::vector<Mat> spectra;
    for (const AudioClip& c : clips)
      spectra.push_back(power(stft(c.samples, cfg, c.sample_rate)));
    out.emplace_back(speaker, std::move(spectra));
  }
  return out;
}

int cmd_train_dict(const std::string& corpus_root, int synth_speakers,
                   int synth_utts, double synth_duration, double rate,
                   int atoms, int iterations, std::uint64_t seed,
                   const std::string& out_path) {
  StftConfig stft_cfg;
  std::map<std::string, std::vector<AudioClip>> corpus;
  json provenance;
  if (!corpus_root.empty()) {
    CorpusLoadReport rep = load_corpus(corpus_root, rate);
    for (const std::string& r : rep.rejects)
      std::cerr << "rejected: " << r << "\n";
    corpus = std::move(rep.speakers);
    provenance["corpus"] = corpus_root;
  } else {
    corpus = make_synthetic_corpus(synth_speakers, synth_utts, synth_duration,
                                   seed, rate);
    provenance["corpus"] = "synthetic";
    provenance["speakers"] = synth_speakers;
  }
  provenance["atoms_per_speaker"] = atoms;
  provenance["iterations"] = iterations;
  provenance["seed"] = seed;
  Dictionary dict =
      train_dictionary(corpus_spectra(corpus, stft_cfg), atoms, iterations,
                       seed);
  save_dictionary(dict, out_path, provenance);
  std::cout << "wrote " << out_path << " (" << dict.n_atoms() << " atoms, "
            << dict.blocks.size() << " speakers)\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                 int max_order, const std::string& out_dir) {
  json j = config_path.empty() ? json::object() : load_json(config_path);
  ExperimentConfig cfg = config_from_json(j);
  cfg.seed = seed;
  Room room = cfg.room.build();
  std::vector<Vec3> mics = triangle_array(cfg.array_center, cfg.array_edge);
  ScenarioPairs sp = sample_scenarios(room, mics, 2, cfg.dist_range,
                                      cfg.min_pair_dist, seed);
  Scenario& sc = sp.scenario;

  SpeakerProfile sa = make_speaker_profile(seed + 500001);
  SpeakerProfile sb = make_speaker_profile(seed + 500002);
  AudioClip ca = synth_utterance(sa, cfg.utterance_s, seed + 1,
                                 cfg.room.sample_rate);
  AudioClip cb = synth_utterance(sb, cfg.utterance_s, seed + 2,
                                 cfg.room.sample_rate);
  Mixture mix = render_mixture(sc, {ca.samples, cb.samples}, max_order);

  fs::create_directories(out_dir);
  for (std::size_t m = 0; m < mix.mics.size(); ++m)
    write_wav(out_dir + "/mic" + std::to_string(m) + ".wav", mix.mics[m],
              mix.sample_rate);
  for (std::size_t jj = 0; jj < mix.images.size(); ++jj)
    for (std::size_t m = 0; m < mix.images[jj].size(); ++m)
      write_wav(out_dir + "/image_src" + std::to_string(jj) + "_mic" +
                    std::to_string(m) + ".wav",
                mix.images[jj][m], mix.sample_rate);

  json scene;
  scene["room"] = room_to_json(room);
  scene["seed"] = seed;
  scene["max_order"] = max_order;
  json mpos = json::array(), spos = json::array();
  for (const Vec3& p : sc.mic_positions) mpos.push_back({p.x(), p.y(), p.z()});
  for (const Vec3& p : sc.source_positions)
    spos.push_back({p.x(), p.y(), p.z()});
  scene["mic_positions"] = mpos;
  scene["source_positions"] = spos;
  scene["room_spec"] = config_to_json(cfg)["room"];
  std::ofstream(out_dir + "/scene.json") << scene.dump(2) << "\n";
  std::cout << "wrote " << mix.mics.size() << " mic tracks and scene.json to "
            << out_dir << "\n";
  return 0;
}

Scenario scenario_from_scene(const json& scene) {
  Scenario sc;
  ExperimentConfig tmp;
  json wrapper;
  wrapper["room"] = scene.at("room_spec");
  sc.room = config_from_json(wrapper).room.build();
  for (const auto& p : scene.at("mic_positions"))
    sc.mic_positions.push_back(Vec3(p[0], p[1], p[2]));
  for (const auto& p : scene.at("source_positions"))
    sc.source_positions.push_back(Vec3(p[0], p[1], p[2]));
  return sc;
}

int cmd_separate(const std::vector<std::string>& mix_paths,
                 const std::string& dict_path, const std::string& scene_path,
                 const std::string& mode_name, const std::string& algo,
                 int iterations, double gamma, bool gamma_set,
                 std::uint64_t seed, const std::string& out_dir) {
  std::vector<Spectrogram> specs;
  StftConfig stft_cfg;
  double rate = 16000.0;
  for (const std::string& p : mix_paths) {
    AudioClip clip = read_wav(p);
    rate = clip.sample_rate;
    specs.push_back(stft(clip.samples, stft_cfg, clip.sample_rate));
  }
  Dictionary dict = load_dictionary(dict_path);
  const ChannelMode mode = ChannelMode::parse(mode_name);
  const int M = static_cast<int>(specs.size());
  const int F = stft_cfg.n_bins();
  const int J = 2;

  ChannelMatrix channels;
  Scenario sc;
  if (!scene_path.empty()) sc = scenario_from_scene(load_json(scene_path));
  switch (mode.kind) {
    case ChannelKind::LearnInit:
      channels = baseline_channels(ChannelKind::LearnInit, F, M, J, seed + 3);
      break;
    case ChannelKind::Anechoic:
      if (algo == "em" && !scene_path.empty())
        channels = exact_anechoic_channels(sc, F, stft_cfg.frame_size);
      else
        channels = baseline_channels(ChannelKind::Anechoic, F, M, J);
      break;
    default:
      if (mode.K == 0) {
        channels = baseline_channels(ChannelKind::NoEchoes, F, M, J);
      } else {
        if (scene_path.empty())
          throw InputError("--scene required for echo channel modes");
        channels = echo_channels(sc.room, sc.mic_positions,
                                 sc.source_positions, mode.K, F,
                                 stft_cfg.frame_size);
      }
  }

  const DictionaryMode dmode = dict.blocks.size() == 2
                                   ? DictionaryMode::SpeakerSpecific
                                   : DictionaryMode::Universal;
  std::vector<std::string> speakers;
  for (const auto& b : dict.blocks) speakers.push_back(b.speaker);
  if (!gamma_set) gamma = default_gamma(mode, dmode);

  std::vector<std::vector<double>> sources;
  std::vector<double> trace;
  if (algo == "mu") {
    MuRunConfig rc;
    rc.channel_mode = mode.kind;
    rc.gamma = gamma;
    if (iterations > 0) rc.iterations = iterations;
    rc.dictionary_mode = dmode;
    rc.seed = seed;
    MuRunResult r = separate_mu(specs, channels, dict, rc, speakers);
    sources = std::move(r.sources);
    trace = std::move(r.cost_trace);
  } else {
    EmRunConfig rc;
    rc.channel_mode = mode.kind;
    if (iterations > 0) rc.iterations = iterations;
    rc.dictionary_mode = dmode;
    rc.seed = seed;
    EmRunResult r = separate_em(specs, channels, dict, rc, speakers);
    sources = std::move(r.sources);
    trace = std::move(r.cost_trace);
  }

  fs::create_directories(out_dir);
  for (std::size_t j = 0; j < sources.size(); ++j)
    write_wav(out_dir + "/est" + std::to_string(j) + ".wav", sources[j], rate);
  {
    std::ofstream f(out_dir + "/cost_trace.csv");
    f << "iteration,cost\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", i, trace[i]);
      f << buf;
    }
  }
  std::cout << "wrote " << sources.size() << " estimates to " << out_dir
            << "\n";
  return 0;
}

int cmd_evaluate(const std::vector<std::string>& est_paths,
                 const std::vector<std::string>& ref_paths,
                 const std::string& out_path) {
  std::vector<std::vector<double>> ests, refs;
  for (const auto& p : est_paths) ests.push_back(read_wav(p).samples);
  for (const auto& p : ref_paths) refs.push_back(read_wav(p).samples);
  EvalResult r = bss_eval(ests, refs);
  json out;
  out["sdr"] = r.sdr;
  out["sir"] = r.sir;
  out["permutation"] = r.permutation;
  out["degenerate"] = r.degenerate;
  std::cout << out.dump(2) << "\n";
  if (!out_path.empty()) std::ofstream(out_path) << out.dump(2) << "\n";
  return 0;
}

int cmd_experiment(const std::string& config_path, int pairs,
                   const std::string& algo, const std::string& dict_mode,
                   const std::vector<std::string>& modes, std::int64_t seed,
                   const std::string& out_dir, int jobs) {
  json j = config_path.empty() ? json::object() : load_json(config_path);
  ExperimentConfig cfg = config_from_json(j);
  if (pairs >= 0) cfg.pair_subset = pairs;
  if (!algo.empty()) cfg.algorithm = algo == "em" ? Algorithm::Em : Algorithm::Mu;
  if (!dict_mode.empty())
    cfg.dictionary_mode = dict_mode == "speaker"
                              ? DictionaryMode::SpeakerSpecific
                              : DictionaryMode::Universal;
  if (!modes.empty()) {
    cfg.channel_modes.clear();
    for (const std::string& m : modes)
      cfg.channel_modes.push_back(ChannelMode::parse(m));
  }
  if (cfg.channel_modes.empty())
    for (const char* m : {"learn", "anechoic", "K0", "K1", "K2", "K3", "K4",
                          "K5", "K6"})
      cfg.channel_modes.push_back(ChannelMode::parse(m));
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (jobs > 0) cfg.jobs = jobs;

  ExperimentResult result = run_experiment(cfg);
  emit_report(result, out_dir);
  // manifest: the fully resolved configuration, seeds included
  std::ofstream(out_dir + "/manifest.json")
      << config_to_json(result.config).dump(2) << "\n";
  int failed = 0;
  for (const ResultRow& r : result.rows)
    if (!r.error.empty()) ++failed;
  std::cout << result.rows.size() << " rows (" << failed << " failed) -> "
            << out_dir << "\n";
  return failed == 0 ? 0 : 2;
}

int cmd_report(const std::string& results_path, const std::string& out_dir) {
  std::ifstream f(results_path);
  if (!f) throw InputError("cannot open: " + results_path);
  std::string line;
  if (!std::getline(f, line) || line != csv_header())
    throw InputError("unrecognized results file: " + results_path);
  ExperimentResult result;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (cols.size() < 14) throw InputError("malformed row: " + line);
    ResultRow r;
    r.pair_id = std::stoi(cols[0]);
    r.src_a = std::stoi(cols[1]);
    r.src_b = std::stoi(cols[2]);
    r.algorithm = cols[3];
    r.dictionary_mode = cols[4];
    r.channel_mode = cols[5];
    r.gamma = std::stod(cols[6]);
    r.seed = std::stoull(cols[7]);
    r.sdr0 = std::stod(cols[8]);
    r.sdr1 = std::stod(cols[9]);
    r.sir0 = std::stod(cols[10]);
    r.sir1 = std::stod(cols[11]);
    r.cost_first = std::stod(cols[12]);
    r.cost_last = std::stod(cols[13]);
    if (cols.size() > 14) r.error = cols[14];
    result.rows.push_back(std::move(r));
  }
  emit_report(result, out_dir);
  std::cout << "aggregated " << result.rows.size() << " rows -> " << out_dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"echo-aware multichannel source separation"};
  app.require_subcommand(1);

  // train-dict
  std::string td_corpus, td_out = "dict.bin";
  int td_speakers = 10, td_utts = 3, td_atoms = 10, td_iters = 150;
  double td_duration = 4.0, td_rate = 16000.0;
  std::uint64_t td_seed = 1;
  auto* td = app.add_subcommand("train-dict",
                                "train a spectral dictionary (WAV corpus or "
                                "synthetic speakers)");
  td->add_option("--corpus", td_corpus, "corpus root (speaker/utt.wav)");
  td->add_option("--speakers", td_speakers, "synthetic speaker count");
  td->add_option("--utterances", td_utts, "utterances per speaker");
  td->add_option("--duration", td_duration, "utterance seconds");
  td->add_option("--rate", td_rate, "expected sample rate");
  td->add_option("--atoms", td_atoms, "atoms per speaker");
  td->add_option("--iterations", td_iters, "NMF iterations");
  td->add_option("--seed", td_seed, "RNG seed");
  td->add_option("--out", td_out, "output dictionary path");

  // simulate
  std::string sim_config, sim_out = "scene";
  std::uint64_t sim_seed = 1;
  int sim_order = 6;
  auto* sim = app.add_subcommand("simulate",
                                 "render a reverberant two-speaker mixture");
  sim->add_option("--config", sim_config, "experiment config JSON");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--max-order", sim_order, "image-source order");
  sim->add_option("--out", sim_out, "output directory");

  // separate
  std::vector<std::string> sep_mix;
  std::string sep_dict, sep_scene, sep_mode = "K6", sep_algo = "mu",
              sep_out = "separated";
  int sep_iters = 0;
  double sep_gamma = 0.0;
  std::uint64_t sep_seed = 1;
  auto* sep = app.add_subcommand("separate", "separate a recorded mixture");
  sep->add_option("--mix", sep_mix, "mixture WAVs, one per mic")
      ->required()
      ->expected(1, -1);
  sep->add_option("--dictionary", sep_dict, "trained dictionary")->required();
  sep->add_option("--scene", sep_scene, "scene.json from simulate");
  sep->add_option("--mode", sep_mode, "channel mode: learn|anechoic|K<n>");
  sep->add_option("--algo", sep_algo, "mu|em")
      ->check(CLI::IsMember({"mu", "em"}));
  sep->add_option("--iterations", sep_iters, "override iteration count");
  auto* gopt = sep->add_option("--gamma", sep_gamma, "sparsity weight");
  sep->add_option("--seed", sep_seed, "RNG seed");
  sep->add_option("--out", sep_out, "output directory");

  // evaluate
  std::vector<std::string> ev_est, ev_ref;
  std::string ev_out;
  auto* ev = app.add_subcommand("evaluate", "SDR/SIR of estimates vs references");
  ev->add_option("--estimates", ev_est, "estimated WAVs")
      ->required()
      ->expected(1, -1);
  ev->add_option("--references", ev_ref, "reference WAVs")
      ->required()
      ->expected(1, -1);
  ev->add_option("--out", ev_out, "write metrics JSON here");

  // experiment
  std::string ex_config, ex_algo, ex_dict, ex_out = "results";
  std::vector<std::string> ex_modes;
  int ex_pairs = -1, ex_jobs = 0;
  std::int64_t ex_seed = -1;
  auto* ex = app.add_subcommand("experiment", "run a separation sweep");
  ex->add_option("--config", ex_config, "experiment config JSON");
  ex->add_option("--pairs", ex_pairs, "pair subset size (0 = all)");
  ex->add_option("--algo", ex_algo, "mu|em")
      ->check(CLI::IsMember({"", "mu", "em"}));
  ex->add_option("--dict", ex_dict, "universal|speaker")
      ->check(CLI::IsMember({"", "universal", "speaker"}));
  ex->add_option("--modes", ex_modes, "channel modes (learn anechoic K0..K6)");
  ex->add_option("--seed", ex_seed, "RNG seed");
  ex->add_option("--out", ex_out, "output directory");
  ex->add_option("--jobs", ex_jobs, "worker threads");

  // report
  std::string rp_results, rp_out = "report";
  auto* rp = app.add_subcommand("report", "re-aggregate a results.csv");
  rp->add_option("--results", rp_results, "path to results.csv")->required();
  rp->add_option("--out", rp_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (td->parsed())
      return cmd_train_dict(td_corpus, td_speakers, td_utts, td_duration,
                            td_rate, td_atoms, td_iters, td_seed, td_out);
    if (sim->parsed()) return cmd_simulate(sim_config, sim_seed, sim_order,
                                           sim_out);
    if (sep->parsed())
      return cmd_separate(sep_mix, sep_dict, sep_scene, sep_mode, sep_algo,
                          sep_iters, sep_gamma, gopt->count() > 0, sep_seed,
                          sep_out);
    if (ev->parsed()) return cmd_evaluate(ev_est, ev_ref, ev_out);
    if (ex->parsed())
      return cmd_experiment(ex_config, ex_pairs, ex_algo, ex_dict, ex_modes,
                            ex_seed, ex_out, ex_jobs);
    if (rp->parsed()) return cmd_report(rp_results, rp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
