#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iaca/errors.hpp"
#include "iaca/matrix.hpp"
#include "iaca/rng.hpp"

namespace iaca {

enum class RegimeKind : std::uint8_t { Strong, WeakConflicting, DominatingAudio, DominatingVisual };
enum class Affect : std::uint8_t { Valence, Arousal };

inline std::string_view to_string(RegimeKind k) {
  switch (k) {
    case RegimeKind::Strong: return "strong_complementary";
    case RegimeKind::WeakConflicting: return "weak_conflicting";
    case RegimeKind::DominatingAudio: return "dominating_audio";
    case RegimeKind::DominatingVisual: return "dominating_visual";
  }
  return "?";
}

inline RegimeKind parse_regime_kind(std::string_view s) {
  for (auto k : {RegimeKind::Strong, RegimeKind::WeakConflicting, RegimeKind::DominatingAudio,
                 RegimeKind::DominatingVisual})
    if (to_string(k) == s) return k;
  throw DomainError("unknown regime '" + std::string(s) + "'");
}

inline std::string_view to_string(Affect a) { return a == Affect::Valence ? "valence" : "arousal"; }

/// How the two modalities relate to the latent affect tracks.
///
///  - strong_complementary: both modalities observe the tracks.
///  - weak_conflicting: per sequence one modality is chosen at random; over a
///    contiguous block of corrupt_fraction * L clips its track channels are replaced
///    by independent tracks, every feature entry receives extra noise_sigma * N(0, 1),
///    and its quality channel is raised to 1 (the corruption is visible in the
///    features, as pose or blur would be).
///  - dominating_audio / dominating_visual: only the named modality observes the
///    tracks; the other carries them scaled by restrained_gain.
struct Regime {
  RegimeKind kind = RegimeKind::WeakConflicting;
  double noise_sigma = 2.5;
  double corrupt_fraction = 0.5;

  void validate() const {
    if (!(noise_sigma >= 0.0)) throw DomainError("noise_sigma must be >= 0");
    if (!(corrupt_fraction >= 0.0 && corrupt_fraction <= 1.0)) {
      throw DomainError("corrupt_fraction must lie in [0, 1]");
    }
  }
  friend bool operator==(const Regime&, const Regime&) = default;
};

struct SyntheticSequence {
  Matrix xa;       // d x L
  Matrix xv;       // d x L
  Matrix valence;  // 1 x L, entries in [-1, 1]
  Matrix arousal;  // 1 x L, entries in [-1, 1]
  Regime regime;
  std::uint64_t seed = 0;

  const Matrix& target(Affect a) const { return a == Affect::Valence ? valence : arousal; }
  friend bool operator==(const SyntheticSequence&, const SyntheticSequence&) = default;
};

using Dataset = std::vector<SyntheticSequence>;

namespace synth {

inline constexpr std::size_t kDistractors = 4;
inline constexpr std::size_t kLatent = 3 + kDistractors;  // valence, arousal, quality, distractors

}  // namespace synth

/// Generator constants shared by every regime.
struct GeneratorOptions {
  double distractor_scale = 0.5;   // std of the per-clip distractor latents
  double observation_noise = 0.1;  // std of i.i.d. noise added to every feature entry
  double restrained_gain = 0.01;   // track gain of the non-dominant modality
};

namespace synth {

/// Sum of 2-4 low-frequency sinusoids plus an offset, clamped to [-1, 1].
inline Matrix smooth_track(Rng& rng, std::size_t length) {
  const std::size_t components = 2 + rng.below(3);
  std::vector<double> amp(components), freq(components), phase(components);
  double total = 0.0;
  for (std::size_t c = 0; c < components; ++c) {
    amp[c] = rng.uniform(0.2, 1.0);
    freq[c] = rng.uniform(0.5, 3.0);
    phase[c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    total += amp[c];
  }
  const double gain = rng.uniform(0.6, 1.1) / total;
  const double offset = rng.uniform(-0.3, 0.3);
  Matrix out(1, length);
  for (std::size_t t = 0; t < length; ++t) {
    double s = offset;
    const double pos = static_cast<double>(t) / static_cast<double>(length);
    for (std::size_t c = 0; c < components; ++c) {
      s += gain * amp[c] * std::sin(2.0 * std::numbers::pi * freq[c] * pos + phase[c]);
    }
    out(0, t) = std::clamp(s, -1.0, 1.0);
  }
  return out;
}

inline Matrix embedding(Rng& rng, std::size_t d) {
  Matrix e(d, kLatent);
  const double sd = 1.0 / std::sqrt(static_cast<double>(kLatent));
  for (auto& x : e.data()) x = sd * rng.normal();
  return e;
}

}  // namespace synth

/// Deterministic bimodal sequences; modality embeddings are shared across the
/// whole call, so slices of one call form train/val/test splits of one "world".
inline Dataset generate(const Regime& regime, std::size_t d, std::size_t length,
                        std::size_t count, std::uint64_t seed,
                        const GeneratorOptions& opts = {}) {
  if (d < 2 || length < 2) throw DomainError("generate: need d >= 2 and L >= 2");
  regime.validate();
  Rng world(derive_seed(seed, 0));
  const Matrix emb_a = synth::embedding(world, d);
  const Matrix emb_v = synth::embedding(world, d);

  Dataset out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t seq_seed = derive_seed(seed, i + 1);
    Rng rng(seq_seed);
    SyntheticSequence s;
    s.regime = regime;
    s.seed = seq_seed;
    s.valence = synth::smooth_track(rng, length);
    s.arousal = synth::smooth_track(rng, length);

    // latent[m] is kLatent x L for modality m (0 = audio, 1 = visual)
    Matrix latent[2] = {Matrix(synth::kLatent, length), Matrix(synth::kLatent, length)};
    for (auto& z : latent) {
      for (std::size_t t = 0; t < length; ++t) {
        z(0, t) = s.valence(0, t);
        z(1, t) = s.arousal(0, t);
        for (std::size_t k = 3; k < synth::kLatent; ++k) z(k, t) = opts.distractor_scale * rng.normal();
      }
    }
    // Weak-complementary corruption: modality `bad` over clips [start, start + block).
    std::size_t bad = 2, start = 0, block = 0;
    switch (regime.kind) {
      case RegimeKind::Strong:
        break;
      case RegimeKind::WeakConflicting: {
        bad = rng.below(2);
        auto& z = latent[bad];
        const Matrix fake_v = synth::smooth_track(rng, length);
        const Matrix fake_a = synth::smooth_track(rng, length);
        block = static_cast<std::size_t>(std::lround(regime.corrupt_fraction * static_cast<double>(length)));
        start = rng.below(length - block + 1);
        for (std::size_t t = start; t < start + block; ++t) {
          z(0, t) = fake_v(0, t);
          z(1, t) = fake_a(0, t);
          z(2, t) = 1.0;
        }
        break;
      }
      case RegimeKind::DominatingAudio:
      case RegimeKind::DominatingVisual: {
        auto& z = latent[regime.kind == RegimeKind::DominatingAudio ? 1 : 0];
        for (std::size_t t = 0; t < length; ++t) {
          z(0, t) *= opts.restrained_gain;
          z(1, t) *= opts.restrained_gain;
        }
        break;
      }
    }
    Matrix x[2] = {matmul(emb_a, latent[0]), matmul(emb_v, latent[1])};
    for (auto& m : x)
      for (auto& v : m.data()) v += opts.observation_noise * rng.normal();
    if (bad < 2) {
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t t = start; t < start + block; ++t) x[bad](i, t) += regime.noise_sigma * rng.normal();
    }
    s.xa = std::move(x[0]);
    s.xv = std::move(x[1]);
    out.push_back(std::move(s));
  }
  return out;
}

enum class MaskPattern : std::uint8_t { Contiguous, Scattered };

/// Zeroes floor(fraction * L) clip columns: one seeded contiguous block, or a
/// seeded random subset of columns with MaskPattern::Scattered.
inline Matrix corrupt_missing(const Matrix& x, double fraction, std::uint64_t seed,
                              MaskPattern pattern = MaskPattern::Contiguous) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw DomainError("corrupt_missing: fraction must lie in [0, 1], got " + std::to_string(fraction));
  }
  const std::size_t length = x.cols();
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(length)));
  Matrix out = x;
  if (count == 0) return out;
  Rng rng(seed);
  std::vector<std::size_t> cols;
  if (pattern == MaskPattern::Contiguous) {
    const std::size_t start = rng.below(length - count + 1);
    for (std::size_t j = start; j < start + count; ++j) cols.push_back(j);
  } else {
    std::vector<std::size_t> idx(length);
    for (std::size_t j = 0; j < length; ++j) idx[j] = j;
    for (std::size_t j = length - 1; j > 0; --j) std::swap(idx[j], idx[rng.below(j + 1)]);
    cols.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count));
  }
  for (std::size_t j : cols)
    for (std::size_t i = 0; i < out.rows(); ++i) out(i, j) = 0.0;
  return out;
}

inline Matrix corrupt_noise(const Matrix& x, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw DomainError("corrupt_noise: sigma must be >= 0");
  Matrix out = x;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (auto& v : out.data()) v += sigma * rng.normal();
  return out;
}

// Dataset files: CSV with a two-line '#' header, then one row per matrix row:
//   # iaca-dataset v1
//   # d=<d>,L=<L>,count=<n>,regime=<kind>,noise_sigma=<s>,corrupt_fraction=<f>,seed=<seed>
//   seq,stream,row,c0,...,c<L-1>
// where stream is one of xa, xv, valence, arousal, and values use 17 significant digits.
// Per-sequence seeds are not stored; they are re-derived from the header seed
// the same way generate() derives them.

inline void save_dataset(const std::string& path, const Dataset& data, std::uint64_t seed) {
  if (data.empty()) throw ContractError("save_dataset: empty dataset");
  const auto& first = data.front();
  std::ostringstream os;
  os << "# iaca-dataset v1\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", first.regime.noise_sigma);
  os << "# d=" << first.xa.rows() << ",L=" << first.xa.cols() << ",count=" << data.size()
     << ",regime=" << to_string(first.regime.kind) << ",noise_sigma=" << buf;
  std::snprintf(buf, sizeof buf, "%.17g", first.regime.corrupt_fraction);
  os << ",corrupt_fraction=" << buf << ",seed=" << seed << "\n";
  os << "seq,stream,row";
  for (std::size_t j = 0; j < first.xa.cols(); ++j) os << ",c" << j;
  os << "\n";
  auto emit = [&](std::size_t seq, const char* stream, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      os << seq << ',' << stream << ',' << i;
      for (std::size_t j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
        os << ',' << buf;
      }
      os << '\n';
    }
  };
  for (std::size_t s = 0; s < data.size(); ++s) {
    emit(s, "xa", data[s].xa);
    emit(s, "xv", data[s].xv);
    emit(s, "valence", data[s].valence);
    emit(s, "arousal", data[s].arousal);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << os.str();
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(f, line) || line != "# iaca-dataset v1") {
    throw std::runtime_error(path + ": not an iaca dataset file");
  }
  std::getline(f, line);
  std::size_t d = 0, length = 0, count = 0;
  std::uint64_t seed = 0;
  Regime regime;
  {
    std::stringstream hs(line.substr(2));
    std::string kv;
    while (std::getline(hs, kv, ',')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const auto key = kv.substr(0, eq);
      const auto val = kv.substr(eq + 1);
      if (key == "d") d = std::stoul(val);
      else if (key == "L") length = std::stoul(val);
      else if (key == "count") count = std::stoul(val);
      else if (key == "regime") regime.kind = parse_regime_kind(val);
      else if (key == "noise_sigma") regime.noise_sigma = std::stod(val);
      else if (key == "corrupt_fraction") regime.corrupt_fraction = std::stod(val);
      else if (key == "seed") seed = std::stoull(val);
    }
  }
  if (d == 0 || length == 0) throw std::runtime_error(path + ": malformed header");
  Dataset data(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& s = data[i];
    s.seed = derive_seed(seed, i + 1);
    s.xa = Matrix(d, length);
    s.xv = Matrix(d, length);
    s.valence = Matrix(1, length);
    s.arousal = Matrix(1, length);
    s.regime = regime;
  }
  std::getline(f, line);  // column header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string tok;
    std::getline(ls, tok, ',');
    const std::size_t seq = std::stoul(tok);
    std::string stream;
    std::getline(ls, stream, ',');
    std::getline(ls, tok, ',');
    const std::size_t row = std::stoul(tok);
    if (seq >= count) throw std::runtime_error(path + ": sequence index out of range");
    Matrix* m = stream == "xa" ? &data[seq].xa
              : stream == "xv" ? &data[seq].xv
              : stream == "valence" ? &data[seq].valence
              : stream == "arousal" ? &data[seq].arousal
              : nullptr;
    if (m == nullptr || row >= m->rows()) throw std::runtime_error(path + ": bad row '" + line + "'");
    for (std::size_t j = 0; j < length; ++j) {
      if (!std::getline(ls, tok, ',')) throw std::runtime_error(path + ": short row");
      (*m)(row, j) = std::stod(tok);
    }
  }
  return data;
}

}  // namespace iaca
