#pragma once

#include <fstream>

#include <nlohmann/json.hpp>

#include "echosep/echo_model.hpp"
#include "echosep/nmf.hpp"

namespace echosep {

using json = nlohmann::json;

// Dictionary container: one JSON header line with block metadata and
// provenance, followed by raw little-endian doubles in column-major order.
inline void save_dictionary(const Dictionary& dict, const std::string& path,
                            const json& provenance = json::object()) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  json header;
  header["magic"] = "echosep-dict-v1";
  header["rows"] = dict.n_bins();
  header["cols"] = dict.n_atoms();
  header["normalization"] = dict.normalization;
  header["provenance"] = provenance;
  json blocks = json::array();
  for (const auto& b : dict.blocks)
    blocks.push_back({{"speaker", b.speaker}, {"start", b.start},
                      {"count", b.count}});
  header["blocks"] = blocks;
  f << header.dump() << "\n";
  f.write(reinterpret_cast<const char*>(dict.D.data()),
          static_cast<std::streamsize>(sizeof(double) * dict.D.size()));
}

inline Dictionary load_dictionary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot read " + path);
  std::string line;
  std::getline(f, line);
  json header = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (header.is_discarded())
    throw InputError("not a dictionary file: " + path);
  if (header.value("magic", "") != "echosep-dict-v1")
    throw InputError("not a dictionary file: " + path);
  Dictionary dict;
  const int rows = header["rows"], cols = header["cols"];
  dict.normalization = header.value("normalization", "l1-column");
  for (const auto& b : header["blocks"])
    dict.blocks.push_back({b["speaker"], b["start"], b["count"]});
  dict.D.resize(rows, cols);
  f.read(reinterpret_cast<char*>(dict.D.data()),
         static_cast<std::streamsize>(sizeof(double) * dict.D.size()));
  if (!f) throw InputError("truncated dictionary file: " + path);
  return dict;
}

// Channel provenance export: delays and amplitudes only, for experiments.
inline json channels_to_json(
    const std::vector<std::vector<EchoChannel>>& echoes) {
  json out = json::array();
  for (const auto& per_mic : echoes) {
    json row = json::array();
    for (const EchoChannel& ec : per_mic)
      row.push_back({{"delays_s", ec.delays_s},
                     {"amplitudes", ec.amplitudes}});
    out.push_back(row);
  }
  return out;
}

inline json room_to_json(const Room& room) {
  json walls = json::array();
  for (const Wall& w : room.walls) {
    json verts = json::array();
    for (const Vec3& v : w.vertices) verts.push_back({v.x(), v.y(), v.z()});
    walls.push_back({{"vertices", verts}, {"absorption", w.absorption}});
  }
  return {{"walls", walls},
          {"speed_of_sound", room.speed_of_sound},
          {"sample_rate", room.sample_rate}};
}

}  // namespace echosep
