#pragma once

// Text checkpoint container. Layout, one record per line:
//
//   lifenet-checkpoint
//   format-version 1
//   n-steps <n>
//   overcompleteness <m>
//   board-height <h>
//   board-width <w>
//   experiment-id <id>
//   master-seed <u64>
//   trial-index <u64>
//   epoch <u64>
//   layers <count>
//   layer <name> <conv3x3|conv1x1> <relu|sigmoid> <out> <in> <kh> <kw>
//   kernel <out*in*kh*kw values>
//   bias <out values>
//   ... (layer/kernel/bias repeated)
//   end
//
// Values use the shortest decimal form that reads back to the same float.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "lifenet/errors.hpp"
#include "lifenet/network.hpp"

namespace lifenet {

inline constexpr int kCheckpointVersion = 1;

struct Provenance {
  std::string experiment_id = "none";
  std::uint64_t master_seed = 0;
  std::uint64_t trial_index = 0;
  std::uint64_t epoch = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Checkpoint {
  Network<float> network;
  Provenance provenance;
};

namespace detail {

inline std::string format_float(float v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& text) : in_(text) {}

  /// Next record, which must start with `field`; returns the remaining tokens.
  std::vector<std::string> expect(const std::string& field) {
    std::string line;
    while (std::getline(in_, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string key;
      ls >> key;
      if (key != field) throw ParseError("checkpoint: expected field '" + field + "', found '" + key + "'");
      std::vector<std::string> tokens;
      for (std::string t; ls >> t;) tokens.push_back(t);
      return tokens;
    }
    throw ParseError("checkpoint: missing field '" + field + "' (file truncated?)");
  }

  std::string single(const std::string& field) {
    auto t = expect(field);
    if (t.size() != 1) throw ParseError("checkpoint: field '" + field + "' takes exactly one value");
    return t[0];
  }

  template <typename Int>
  Int integer(const std::string& field) {
    return parse_int<Int>(single(field), field);
  }

  template <typename Int>
  static Int parse_int(const std::string& s, const std::string& field) {
    Int v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ParseError("checkpoint: field '" + field + "' has invalid integer '" + s + "'");
    return v;
  }

  static std::vector<float> floats(const std::vector<std::string>& tokens, std::size_t count, const std::string& field) {
    if (tokens.size() != count)
      throw ParseError("checkpoint: field '" + field + "' has " + std::to_string(tokens.size()) + " values, expected " +
                       std::to_string(count));
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& s = tokens[i];
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out[i]);
      if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("checkpoint: field '" + field + "' has invalid value '" + s + "'");
    }
    return out;
  }

 private:
  std::istringstream in_;
};

}  // namespace detail

inline std::string checkpoint_to_string(const Network<float>& net, const Provenance& prov) {
  const auto& s = net.spec();
  std::ostringstream out;
  out << "lifenet-checkpoint\n"
      << "format-version " << kCheckpointVersion << "\n"
      << "n-steps " << s.n_steps << "\n"
      << "overcompleteness " << s.overcompleteness << "\n"
      << "board-height " << s.board_height << "\n"
      << "board-width " << s.board_width << "\n"
      << "experiment-id " << prov.experiment_id << "\n"
      << "master-seed " << prov.master_seed << "\n"
      << "trial-index " << prov.trial_index << "\n"
      << "epoch " << prov.epoch << "\n"
      << "layers " << net.layers().size() << "\n";
  for (const auto& l : net.layers()) {
    out << "layer " << l.name << " " << to_string(l.kind) << " " << to_string(l.activation);
    for (auto d : l.kernel.shape()) out << " " << d;
    out << "\nkernel";
    for (float v : l.kernel.data()) out << " " << detail::format_float(v);
    out << "\nbias";
    for (float v : l.bias.data()) out << " " << detail::format_float(v);
    out << "\n";
  }
  out << "end\n";
  return out.str();
}

/// Parses a checkpoint. Throws ParseError naming the offending field, or
/// VersionError for an unsupported format version. Never returns a partial network.
inline Checkpoint checkpoint_from_string(const std::string& text) {
  detail::CheckpointReader r(text);
  r.expect("lifenet-checkpoint");
  const auto version = r.integer<int>("format-version");
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint: format-version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  NetworkSpec spec;
  spec.n_steps = r.integer<int>("n-steps");
  spec.overcompleteness = r.integer<int>("overcompleteness");
  spec.board_height = r.integer<std::size_t>("board-height");
  spec.board_width = r.integer<std::size_t>("board-width");
  Provenance prov;
  prov.experiment_id = r.single("experiment-id");
  prov.master_seed = r.integer<std::uint64_t>("master-seed");
  prov.trial_index = r.integer<std::uint64_t>("trial-index");
  prov.epoch = r.integer<std::uint64_t>("epoch");

  Network<float> net;
  try {
    net = build_network<float>(spec);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("checkpoint: invalid network spec: ") + e.what());
  }
  const auto count = r.integer<std::size_t>("layers");
  if (count != net.layers().size())
    throw ParseError("checkpoint: field 'layers' is " + std::to_string(count) + " but LifeNet(" +
                     std::to_string(spec.n_steps) + ", " + std::to_string(spec.overcompleteness) + ") has " +
                     std::to_string(net.layers().size()));
  for (auto& layer : net.layers()) {
    const auto header = r.expect("layer");
    const std::string where = "layer " + layer.name;
    if (header.size() != 7) throw ParseError("checkpoint: field 'layer' for " + layer.name + " is malformed");
    if (header[0] != layer.name)
      throw ParseError("checkpoint: field 'layer' names '" + header[0] + "', expected '" + layer.name + "'");
    if (header[1] != to_string(layer.kind) || header[2] != to_string(layer.activation))
      throw ParseError("checkpoint: field 'layer' for " + layer.name + " has kind " + header[1] + "/" + header[2]);
    Shape shape;
    for (int i = 3; i < 7; ++i) shape.push_back(detail::CheckpointReader::parse_int<std::size_t>(header[i], where));
    if (shape != layer.kernel.shape())
      throw ParseError("checkpoint: field 'layer' for " + layer.name + " has shape " + shape_string(shape) +
                       ", expected " + shape_string(layer.kernel.shape()));
    auto k = detail::CheckpointReader::floats(r.expect("kernel"), layer.kernel.size(), "kernel of " + layer.name);
    auto b = detail::CheckpointReader::floats(r.expect("bias"), layer.bias.size(), "bias of " + layer.name);
    layer.kernel = Tensor<float>(layer.kernel.shape(), std::move(k));
    layer.bias = Tensor<float>(layer.bias.shape(), std::move(b));
  }
  r.expect("end");
  return {std::move(net), prov};
}

inline void save_checkpoint(const Network<float>& net, const Provenance& prov, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open '" + path + "' for writing");
  out << checkpoint_to_string(net, prov);
  if (!out) throw std::runtime_error("save_checkpoint: write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace lifenet
