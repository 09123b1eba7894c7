#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "satlab/model.hpp"

namespace satlab {

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

/// Checkpoint container, version 1:
///   bytes 0..7   magic "SATLABCK"
///   u32          format version
///   u64          header length L
///   L bytes      JSON header: scalar type, architecture spec, seed, layer chain, taps,
///                parameter names and shapes
///   ...          raw little-endian parameter arrays, in header order
inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'T', 'L', 'A', 'B', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void to_json(nlohmann::json& j, const ArchSpec& s) {
  j = {{"name", s.name},     {"channels", s.channels},       {"height", s.height},
       {"width", s.width},   {"num_classes", s.num_classes}, {"widths", s.widths}};
}

inline void from_json(const nlohmann::json& j, ArchSpec& s) {
  s.name = j.at("name").get<std::string>();
  s.channels = j.at("channels").get<int>();
  s.height = j.at("height").get<int>();
  s.width = j.at("width").get<int>();
  s.num_classes = j.at("num_classes").get<int>();
  s.widths = j.value("widths", std::vector<int>{});
}

template <typename T>
constexpr const char* scalar_name() {
  if constexpr (std::is_same_v<T, float>) {
    return "f32";
  } else {
    static_assert(std::is_same_v<T, double>);
    return "f64";
  }
}

template <typename T>
nlohmann::json checkpoint_header(const Model<T>& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& d : model.layer_descriptors()) layers.push_back({{"kind", d.kind}, {"args", d.args}});
  nlohmann::json taps = nlohmann::json::array();
  for (const auto& t : model.tap_points()) taps.push_back({{"id", t.id}, {"after_layer", t.after_layer}});
  nlohmann::json params = nlohmann::json::array();
  const auto names = model.param_names();
  const auto tensors = model.params();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Shape s = tensors[i]->shape();
    params.push_back({{"name", names[i]}, {"shape", {s.n, s.c, s.h, s.w}}});
  }
  return {{"format", "satlab-checkpoint"}, {"scalar", scalar_name<T>()},
          {"arch", model.spec()},          {"seed", model.seed()},
          {"layers", layers},              {"taps", taps},
          {"params", params}};
}

template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path) {
  const std::string header = checkpoint_header(model).dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
  out.write(kCheckpointMagic, 8);
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), std::streamsize(header.size()));
  for (const auto* t : model.params()) {
    out.write(reinterpret_cast<const char*>(t->data()), std::streamsize(t->size() * sizeof(T)));
  }
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

namespace detail {

template <typename S>
Model<S> read_checkpoint_body(const nlohmann::json& header, std::ifstream& in) {
  std::vector<std::unique_ptr<Layer<S>>> layers;
  for (const auto& l : header.at("layers")) {
    layers.push_back(make_layer<S>({l.at("kind").get<std::string>(), l.at("args").get<std::vector<int>>()}));
  }
  std::vector<TapPoint> taps;
  for (const auto& t : header.at("taps")) {
    taps.push_back({t.at("id").get<std::string>(), t.at("after_layer").get<std::size_t>()});
  }
  Model<S> model(header.at("arch").get<ArchSpec>(), std::move(layers), std::move(taps),
                 header.at("seed").get<std::uint64_t>());
  const auto& params = header.at("params");
  auto tensors = model.params();
  if (params.size() != tensors.size()) throw FormatError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto shape = params[i].at("shape").get<std::vector<std::size_t>>();
    const Shape s{shape.at(0), shape.at(1), shape.at(2), shape.at(3)};
    if (!(s == tensors[i]->shape())) {
      throw FormatError("checkpoint parameter '" + params[i].at("name").get<std::string>() +
                        "' has shape " + to_string(s) + ", expected " +
                        to_string(tensors[i]->shape()));
    }
    in.read(reinterpret_cast<char*>(tensors[i]->data()), std::streamsize(tensors[i]->size() * sizeof(S)));
    if (!in) throw FormatError("checkpoint truncated while reading parameters");
  }
  in.peek();
  if (!in.eof()) throw FormatError("trailing bytes after checkpoint parameters");
  return model;
}

}  // namespace detail

/// Loads a checkpoint; converts scalar type when the file was written with the other one.
template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw FormatError("not a satlab checkpoint: " + path.string());
  }
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  if (len > (1u << 26)) throw FormatError("checkpoint header too large");
  std::string text(len, '\0');
  in.read(text.data(), std::streamsize(len));
  if (!in) throw FormatError("checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const std::string scalar = header.value("scalar", "");
  try {
    if (scalar == "f32") return detail::read_checkpoint_body<float>(header, in).template cast<T>();
    if (scalar == "f64") return detail::read_checkpoint_body<double>(header, in).template cast<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  }
  throw FormatError("unknown checkpoint scalar type '" + scalar + "'");
}

}  // namespace satlab
