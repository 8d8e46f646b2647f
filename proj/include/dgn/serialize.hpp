#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dgn/error.hpp"
#include "dgn/graph.hpp"
#include "dgn/params.hpp"
#include "dgn/tensor.hpp"

namespace dgn {

// All multi-byte integers little-endian; floating payloads are IEEE-754
// little-endian, 4 or 8 bytes per the precision of the saved model.

namespace wire {

inline void put_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
void put_scalar(std::ostream& out, T v) {
  if constexpr (sizeof(T) == 4) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    put_u32(out, bits);
  } else {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    put_u64(out, bits);
  }
}

inline std::uint8_t get_u8(std::istream& in) {
  int c = in.get();
  if (c == EOF) throw FormatError("truncated stream");
  return static_cast<std::uint8_t>(c);
}

inline std::uint32_t get_u32(std::istream& in) {
  char b[4];
  if (!in.read(b, 4)) throw FormatError("truncated stream");
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[3])) << 24);
}

inline std::uint64_t get_u64(std::istream& in) {
  std::uint64_t lo = get_u32(in);
  std::uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

inline std::string get_string(std::istream& in, std::uint32_t max_len = 1u << 28) {
  std::uint32_t len = get_u32(in);
  if (len > max_len) throw FormatError("string length " + std::to_string(len) + " implausible");
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw FormatError("truncated stream");
  return s;
}

template <typename T>
T get_scalar(std::istream& in) {
  if constexpr (sizeof(T) == 4) {
    return std::bit_cast<T>(get_u32(in));
  } else {
    return std::bit_cast<T>(get_u64(in));
  }
}

}  // namespace wire

// Write-temp-then-rename so an interrupted run never leaves a partial file.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---- checkpoints ----
//
// Layout: magic "DGN1", format version u32, scalar width u8 (4 or 8),
// RNG seed u64, config snapshot (UTF-8 JSON string), tensor count u32, then
// per tensor: name, rank u32, dims u32 each, row-major payload.

inline constexpr char kCheckpointMagic[4] = {'D', 'G', 'N', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(std::ostream& out, const ParamStore<T>& params, const std::string& config_json,
                     std::uint64_t seed) {
  out.write(kCheckpointMagic, 4);
  wire::put_u32(out, kCheckpointVersion);
  wire::put_u8(out, static_cast<std::uint8_t>(sizeof(T)));
  wire::put_u64(out, seed);
  wire::put_string(out, config_json);
  wire::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params.at(i);
    wire::put_string(out, p.name);
    wire::put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    wire::put_u32(out, static_cast<std::uint32_t>(p.value.dim0()));
    if (p.value.rank() == 2) wire::put_u32(out, static_cast<std::uint32_t>(p.value.dim1()));
    for (std::size_t k = 0; k < p.value.size(); ++k) wire::put_scalar<T>(out, p.value[k]);
  }
}

struct CheckpointInfo {
  std::uint8_t scalar_width = 0;  // 4 = float, 8 = double
  std::uint64_t seed = 0;
  std::string config_json;
};

inline CheckpointInfo read_checkpoint_header(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic");
  std::uint32_t version = wire::get_u32(in);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  CheckpointInfo info;
  info.scalar_width = wire::get_u8(in);
  if (info.scalar_width != 4 && info.scalar_width != 8)
    throw FormatError("checkpoint: invalid scalar width " + std::to_string(info.scalar_width));
  info.seed = wire::get_u64(in);
  info.config_json = wire::get_string(in);
  return info;
}

template <typename T>
struct LoadedCheckpoint {
  ParamStore<T> params;
  std::string config_json;
  std::uint64_t seed = 0;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(std::istream& in) {
  CheckpointInfo info = read_checkpoint_header(in);
  if (info.scalar_width != sizeof(T))
    throw ConfigError("checkpoint precision is " + std::to_string(info.scalar_width * 8) +
                      "-bit but " + std::to_string(sizeof(T) * 8) + "-bit was requested");
  LoadedCheckpoint<T> out;
  out.config_json = info.config_json;
  out.seed = info.seed;
  std::uint32_t count = wire::get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = wire::get_string(in);
    std::uint32_t rank = wire::get_u32(in);
    if (rank != 1 && rank != 2)
      throw FormatError("checkpoint: tensor " + name + " has rank " + std::to_string(rank));
    std::uint32_t d0 = wire::get_u32(in);
    std::uint32_t d1 = rank == 2 ? wire::get_u32(in) : 1;
    std::size_t total = static_cast<std::size_t>(d0) * d1;
    std::vector<T> data(total);
    for (std::size_t k = 0; k < total; ++k) data[k] = wire::get_scalar<T>(in);
    Tensor<T> tensor = rank == 1 ? Tensor<T>::from_data(d0, std::move(data))
                                 : Tensor<T>::from_data(d0, d1, std::move(data));
    out.params.add(name, std::move(tensor));
  }
  return out;
}

// ---- graph cache ----
//
// One flat binary file per example id. Layout: magic "DGG1", version u32,
// example id string, node count u32, nodes, edge count u32, edges.

inline constexpr char kGraphMagic[4] = {'D', 'G', 'G', '1'};
inline constexpr std::uint32_t kGraphVersion = 1;

inline void save_graph(std::ostream& out, const std::string& example_id,
                       const DocumentGraph& g) {
  out.write(kGraphMagic, 4);
  wire::put_u32(out, kGraphVersion);
  wire::put_string(out, example_id);
  wire::put_u32(out, static_cast<std::uint32_t>(g.nodes.size()));
  for (const auto& node : g.nodes) {
    wire::put_u8(out, static_cast<std::uint8_t>(node.kind));
    wire::put_string(out, node.title);
    if (node.kind == NodeKind::sentence) {
      wire::put_u32(out, node.sentence_index);
      wire::put_string(out, node.text);
    } else {
      wire::put_u32(out, static_cast<std::uint32_t>(node.feature_tokens.size()));
      for (const auto& tok : node.feature_tokens) wire::put_string(out, tok);
    }
  }
  wire::put_u32(out, static_cast<std::uint32_t>(g.edges.size()));
  for (const auto& e : g.edges) {
    wire::put_u32(out, e.a);
    wire::put_u32(out, e.b);
    wire::put_u8(out, static_cast<std::uint8_t>(e.type));
  }
}

struct LoadedGraph {
  std::string example_id;
  DocumentGraph graph;
};

inline LoadedGraph load_graph(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kGraphMagic, 4) != 0)
    throw FormatError("graph cache: bad magic");
  std::uint32_t version = wire::get_u32(in);
  if (version != kGraphVersion)
    throw FormatError("graph cache: unsupported format version " + std::to_string(version));
  LoadedGraph out;
  out.example_id = wire::get_string(in);
  std::uint32_t node_count = wire::get_u32(in);
  for (std::uint32_t i = 0; i < node_count; ++i) {
    GraphNode node;
    std::uint8_t kind = wire::get_u8(in);
    if (kind > 1) throw FormatError("graph cache: invalid node kind");
    node.kind = static_cast<NodeKind>(kind);
    node.title = wire::get_string(in);
    if (node.kind == NodeKind::sentence) {
      node.sentence_index = wire::get_u32(in);
      node.text = wire::get_string(in);
    } else {
      std::uint32_t tok_count = wire::get_u32(in);
      for (std::uint32_t k = 0; k < tok_count; ++k)
        node.feature_tokens.push_back(wire::get_string(in));
    }
    out.graph.nodes.push_back(std::move(node));
  }
  std::uint32_t edge_count = wire::get_u32(in);
  for (std::uint32_t i = 0; i < edge_count; ++i) {
    GraphEdge e;
    e.a = wire::get_u32(in);
    e.b = wire::get_u32(in);
    std::uint8_t type = wire::get_u8(in);
    if (type > 1) throw FormatError("graph cache: invalid edge type");
    if (e.a >= node_count || e.b >= node_count)
      throw FormatError("graph cache: edge endpoint out of range");
    e.type = static_cast<EdgeType>(type);
    out.graph.edges.push_back(e);
  }
  return out;
}

// Filesystem-safe file name for an example id.
inline std::string graph_cache_name(const std::string& example_id) {
  std::string name;
  for (char c : example_id) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
        c == '_') {
      name.push_back(c);
    } else {
      static const char* hex = "0123456789abcdef";
      name.push_back('%');
      name.push_back(hex[(static_cast<unsigned char>(c) >> 4) & 0xf]);
      name.push_back(hex[static_cast<unsigned char>(c) & 0xf]);
    }
  }
  return name + ".dgg";
}

}  // namespace dgn
