#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "iaca/model.hpp"
#include "iaca/synth.hpp"

namespace iaca {

// Checkpoint file layout, all integers and reals little-endian:
//
//   offset  size  field
//   0       4     magic "IACK"
//   4       4     u32 format version (kCheckpointVersion)
//   8       1     u8 variant (0 CA, 1 TCA, 2 JCA, 3 RJCA)
//   9       8     u64 RNG seed
//   17      4     u32 config length C
//   21      C     config snapshot, UTF-8 JSON
//   .       4     u32 tensor count N
//   .             N shape-table entries: u16 name length, name bytes, u64 rows, u64 cols
//   .             raw f64 payload of every tensor in table order, row-major
//
// Tensor names are "<affect>/<parameter>", e.g. "valence/ca.w".

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'I', 'A', 'C', 'K'};

enum class LoadErrorKind : std::uint8_t { Io, BadMagic, Version, Truncated, Shape, Config };

class LoadError : public std::runtime_error {
 public:
  LoadError(LoadErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  LoadErrorKind kind() const noexcept { return kind_; }

 private:
  LoadErrorKind kind_;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  Variant variant = Variant::CA;
  std::uint64_t seed = 0;
  std::string config_json;               // snapshot of whatever produced the models
  std::map<Affect, FusionModel> models;  // one model per output dimension

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
  }
  void put_real(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    bytes_.insert(bytes_.end(), c, c + n);
  }
  const std::vector<char>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double get_real(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw LoadError(LoadErrorKind::Truncated, std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

inline Affect parse_affect(std::string_view s) {
  if (s == "valence") return Affect::Valence;
  if (s == "arousal") return Affect::Arousal;
  throw DomainError("unknown affect '" + std::string(s) + "'");
}

}  // namespace detail

inline std::vector<char> serialize_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put(ck.version);
  w.put(static_cast<std::uint8_t>(ck.variant));
  w.put(ck.seed);
  w.put(static_cast<std::uint32_t>(ck.config_json.size()));
  w.put_bytes(ck.config_json.data(), ck.config_json.size());
  std::vector<const Matrix*> payload;
  std::uint32_t count = 0;
  for (const auto& [_, m] : ck.models) count += static_cast<std::uint32_t>(m.parameters().size());
  w.put(count);
  for (const auto& [affect, m] : ck.models) {
    for (const auto& [name, value] : m.parameters()) {
      const std::string full = std::string(to_string(affect)) + "/" + name;
      w.put(static_cast<std::uint16_t>(full.size()));
      w.put_bytes(full.data(), full.size());
      w.put(static_cast<std::uint64_t>(value.rows()));
      w.put(static_cast<std::uint64_t>(value.cols()));
      payload.push_back(&value);
    }
  }
  for (const Matrix* m : payload)
    for (double x : m->data()) w.put_real(x);
  return w.bytes();
}

/// Rebuilds a checkpoint from bytes. `model_config` maps each affect's tensors
/// back onto a FusionModel with that configuration.
inline Checkpoint deserialize_checkpoint(std::vector<char> bytes,
                                         const std::function<ModelConfig(const std::string&)>& model_config) {
  detail::ByteReader r(std::move(bytes));
  const std::string magic = r.get_string(4, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
    throw LoadError(LoadErrorKind::BadMagic, "not a checkpoint file (bad magic)");
  }
  Checkpoint ck;
  ck.version = r.get<std::uint32_t>("version");
  if (ck.version != kCheckpointVersion) {
    throw LoadError(LoadErrorKind::Version, "unsupported checkpoint version " + std::to_string(ck.version) +
                                                " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto variant = r.get<std::uint8_t>("variant");
  if (variant > static_cast<std::uint8_t>(Variant::RJCA)) {
    throw LoadError(LoadErrorKind::Config, "unknown variant code " + std::to_string(variant));
  }
  ck.variant = static_cast<Variant>(variant);
  ck.seed = r.get<std::uint64_t>("seed");
  const auto clen = r.get<std::uint32_t>("config length");
  ck.config_json = r.get_string(clen, "config");
  ModelConfig mc;
  try {
    mc = model_config(ck.config_json);
  } catch (const std::exception& e) {
    throw LoadError(LoadErrorKind::Config, std::string("bad config snapshot: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  struct Entry {
    Affect affect;
    std::string name;
    std::uint64_t rows, cols;
  };
  std::vector<Entry> table;
  std::uint64_t total = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto nlen = r.get<std::uint16_t>("tensor name length");
    const std::string full = r.get_string(nlen, "tensor name");
    const auto slash = full.find('/');
    if (slash == std::string::npos) throw LoadError(LoadErrorKind::Shape, "malformed tensor name '" + full + "'");
    Entry e;
    try {
      e.affect = detail::parse_affect(full.substr(0, slash));
    } catch (const DomainError&) {
      throw LoadError(LoadErrorKind::Shape, "malformed tensor name '" + full + "'");
    }
    e.name = full.substr(slash + 1);
    e.rows = r.get<std::uint64_t>("rows");
    e.cols = r.get<std::uint64_t>("cols");
    if (e.rows == 0 || e.cols == 0 || e.rows > (1u << 20) || e.cols > (1u << 20)) {
      throw LoadError(LoadErrorKind::Shape, "implausible shape for '" + full + "'");
    }
    total += e.rows * e.cols;
    table.push_back(std::move(e));
  }
  if (r.remaining() != total * sizeof(double)) {
    throw LoadError(r.remaining() < total * sizeof(double) ? LoadErrorKind::Truncated : LoadErrorKind::Shape,
                    "payload holds " + std::to_string(r.remaining()) + " bytes, shape table needs " +
                        std::to_string(total * sizeof(double)));
  }
  for (const auto& e : table) {
    auto it = ck.models.find(e.affect);
    if (it == ck.models.end()) it = ck.models.emplace(e.affect, FusionModel(mc)).first;
    Matrix m(e.rows, e.cols);
    for (auto& x : m.data()) x = r.get_real("payload");
    it->second.add(e.name, std::move(m));
  }
  // Shapes must match what this configuration would build.
  const FusionModel reference = init_model(mc, 0);
  for (const auto& [affect, m] : ck.models) {
    if (m.parameters().size() != reference.parameters().size()) {
      throw LoadError(LoadErrorKind::Shape, "tensor set does not match the model configuration");
    }
    for (const auto& [name, value] : reference.parameters()) {
      const Matrix* got = m.find(name);
      if (got == nullptr || !got->same_shape(value)) {
        throw LoadError(LoadErrorKind::Shape, "tensor '" + name + "' missing or misshapen");
      }
    }
  }
  return ck;
}

inline void write_file_atomic(const std::string& path, const std::vector<char>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot rename " + tmp);
}

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError(LoadErrorKind::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace iaca
