#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iaca/checkpoint.hpp"
#include "iaca/metrics.hpp"
#include "iaca/model.hpp"
#include "iaca/synth.hpp"
#include "iaca/train.hpp"

namespace iaca {

inline constexpr Affect kAffects[] = {Affect::Valence, Affect::Arousal};

/// One ablation cell: data, model and training settings.
struct ExperimentConfig {
  Variant variant = Variant::CA;
  bool iaca = true;
  Regime regime{};
  GeneratorOptions generator{};
  std::size_t d = 32;
  std::size_t length = 64;
  std::size_t n_train = 64;
  std::size_t n_val = 32;
  std::size_t n_test = 32;
  std::uint64_t data_seed = 1;
  std::uint64_t model_seed = 1;
  TrainConfig train{};
  // model flags
  std::size_t hidden = 16;
  double temperature = 0.1;
  Axis av_axis = Axis::Columns;
  Stage1Input stage1_input = Stage1Input::Raw;
  std::size_t rjca_iterations = 2;
  bool rjca_shared = true;
  std::string output_dir = "results";

  ModelConfig model_config() const {
    ModelConfig m;
    m.variant = variant;
    m.iaca = iaca;
    m.d = d;
    m.hidden = hidden;
    m.temperature = temperature;
    m.av_axis = av_axis;
    m.stage1_input = stage1_input;
    m.rjca_iterations = rjca_iterations;
    m.rjca_shared = rjca_shared;
    return m;
  }

  void validate() const {
    regime.validate();
    train.validate();
    model_config().validate();
    if (d < 2 || length < 2) throw DomainError("d and L must be >= 2");
    if (n_train == 0 || n_val == 0 || n_test == 0) throw DomainError("dataset splits must be non-empty");
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {
      {"variant", std::string(to_string(c.variant))},
      {"iaca", c.iaca},
      {"regime", {{"kind", std::string(to_string(c.regime.kind))},
                  {"noise_sigma", c.regime.noise_sigma},
                  {"corrupt_fraction", c.regime.corrupt_fraction}}},
      {"generator", {{"distractor_scale", c.generator.distractor_scale},
                     {"observation_noise", c.generator.observation_noise},
                     {"restrained_gain", c.generator.restrained_gain}}},
      {"d", c.d},
      {"L", c.length},
      {"n_train", c.n_train},
      {"n_val", c.n_val},
      {"n_test", c.n_test},
      {"data_seed", c.data_seed},
      {"model_seed", c.model_seed},
      {"train", {{"epochs", c.train.epochs},
                 {"batch_size", c.train.batch_size},
                 {"learning_rate", c.train.learning_rate},
                 {"optimizer", std::string(to_string(c.train.optimizer))},
                 {"seed", c.train.seed},
                 {"patience", c.train.patience}}},
      {"hidden", c.hidden},
      {"temperature", c.temperature},
      {"av_axis", std::string(to_string(c.av_axis))},
      {"stage1_input", std::string(to_string(c.stage1_input))},
      {"rjca_iterations", c.rjca_iterations},
      {"rjca_shared", c.rjca_shared},
      {"output_dir", c.output_dir},
  };
}

/// Overlays the keys present in `j` onto `c`; absent keys keep their values.
inline void apply_json(ExperimentConfig& c, const nlohmann::json& j) {
  auto get = [&](const nlohmann::json& obj, const char* key, auto& out) {
    if (obj.contains(key)) obj.at(key).get_to(out);
  };
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  get(j, "iaca", c.iaca);
  if (j.contains("regime")) {
    const auto& r = j.at("regime");
    if (r.contains("kind")) c.regime.kind = parse_regime_kind(r.at("kind").get<std::string>());
    get(r, "noise_sigma", c.regime.noise_sigma);
    get(r, "corrupt_fraction", c.regime.corrupt_fraction);
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    get(g, "distractor_scale", c.generator.distractor_scale);
    get(g, "observation_noise", c.generator.observation_noise);
    get(g, "restrained_gain", c.generator.restrained_gain);
  }
  get(j, "d", c.d);
  get(j, "L", c.length);
  get(j, "n_train", c.n_train);
  get(j, "n_val", c.n_val);
  get(j, "n_test", c.n_test);
  get(j, "data_seed", c.data_seed);
  get(j, "model_seed", c.model_seed);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    get(t, "epochs", c.train.epochs);
    get(t, "batch_size", c.train.batch_size);
    get(t, "learning_rate", c.train.learning_rate);
    if (t.contains("optimizer")) c.train.optimizer = parse_optimizer(t.at("optimizer").get<std::string>());
    get(t, "seed", c.train.seed);
    get(t, "patience", c.train.patience);
  }
  get(j, "hidden", c.hidden);
  get(j, "temperature", c.temperature);
  if (j.contains("av_axis")) c.av_axis = parse_axis(j.at("av_axis").get<std::string>());
  if (j.contains("stage1_input")) c.stage1_input = parse_stage1_input(j.at("stage1_input").get<std::string>());
  get(j, "rjca_iterations", c.rjca_iterations);
  get(j, "rjca_shared", c.rjca_shared);
  get(j, "output_dir", c.output_dir);
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  apply_json(c, j);
  return c;
}

struct Splits {
  Dataset train, val, test;
};

/// Train/val/test slices of one generator call, so every split shares the embeddings.
inline Splits make_splits(const ExperimentConfig& c) {
  const Dataset all = generate(c.regime, c.d, c.length, c.n_train + c.n_val + c.n_test, c.data_seed, c.generator);
  Splits s;
  const auto b = all.begin();
  s.train.assign(b, b + static_cast<std::ptrdiff_t>(c.n_train));
  s.val.assign(b + static_cast<std::ptrdiff_t>(c.n_train), b + static_cast<std::ptrdiff_t>(c.n_train + c.n_val));
  s.test.assign(b + static_cast<std::ptrdiff_t>(c.n_train + c.n_val), all.end());
  return s;
}

inline Checkpoint make_checkpoint(const ExperimentConfig& c, std::map<Affect, FusionModel> models) {
  Checkpoint ck;
  ck.variant = c.variant;
  ck.seed = c.model_seed;
  ck.config_json = to_json(c).dump();
  ck.models = std::move(models);
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  write_file_atomic(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint_bytes(std::vector<char> bytes) {
  return deserialize_checkpoint(std::move(bytes), [](const std::string& json) {
    return config_from_json(nlohmann::json::parse(json)).model_config();
  });
}

inline Checkpoint load_checkpoint(const std::string& path) { return load_checkpoint_bytes(read_file(path)); }

inline ExperimentConfig checkpoint_config(const Checkpoint& ck) {
  return config_from_json(nlohmann::json::parse(ck.config_json));
}

struct CellResult {
  Variant variant = Variant::CA;
  bool iaca = false;
  bool diverged = false;
  std::string error;
  std::map<Affect, double> val_ccc;
  std::map<Affect, double> test_ccc;
  std::map<Affect, std::vector<EpochRecord>> history;
  Checkpoint checkpoint;
};

/// Seed offset that keeps the valence and arousal models' initialisations distinct.
inline std::uint64_t affect_seed(std::uint64_t seed, Affect a) {
  return derive_seed(seed, a == Affect::Valence ? 101 : 202);
}

inline CellResult run_cell(const ExperimentConfig& c, const Splits& splits) {
  c.validate();
  CellResult r;
  r.variant = c.variant;
  r.iaca = c.iaca;
  std::map<Affect, FusionModel> models;
  try {
    for (Affect a : kAffects) {
      auto fitted = fit(init_model(c.model_config(), affect_seed(c.model_seed, a)), splits.train, splits.val, a, c.train);
      r.val_ccc[a] = fitted.best_val_ccc;
      r.test_ccc[a] = evaluate(fitted.model, splits.test, a);
      r.history[a] = std::move(fitted.history);
      models.emplace(a, std::move(fitted.model));
    }
  } catch (const DivergenceError& e) {
    r.diverged = true;
    r.error = e.what();
    return r;
  }
  r.checkpoint = make_checkpoint(c, std::move(models));
  return r;
}

inline CellResult run_cell(const ExperimentConfig& c) { return run_cell(c, make_splits(c)); }

/// Every (variant, iaca) combination on one shared dataset.
inline std::vector<CellResult> run_ablation(const ExperimentConfig& base, const std::vector<Variant>& variants) {
  const Splits splits = make_splits(base);
  std::vector<CellResult> out;
  for (Variant v : variants) {
    for (bool with : {false, true}) {
      ExperimentConfig c = base;
      c.variant = v;
      c.iaca = with;
      out.push_back(run_cell(c, splits));
    }
  }
  return out;
}

// Ablation CSV, one block of three rows per variant:
//   variant,iaca,valence_ccc,arousal_ccc,status
//   CA,without,0.541,0.517,ok
//   CA,with,0.632,0.597,ok
//   CA,delta_pct,16.8,15.5,ok
// CCC values use 3 decimals; delta_pct is (with - without) / without * 100 at
// full precision, printed with 1 decimal. Diverged cells print "nan".

struct AblationRow {
  std::string variant;
  std::string iaca;  // without | with | delta_pct
  double valence = 0.0;
  double arousal = 0.0;
  std::string status = "ok";
};

inline std::vector<AblationRow> ablation_rows(const std::vector<CellResult>& cells) {
  std::vector<AblationRow> rows;
  const double nan = std::nan("");
  for (std::size_t i = 0; i + 1 < cells.size(); i += 2) {
    const auto& without = cells[i];
    const auto& with = cells[i + 1];
    auto pick = [&](const CellResult& c, Affect a) { return c.diverged ? nan : c.val_ccc.at(a); };
    const std::string name(to_string(without.variant));
    rows.push_back({name, "without", pick(without, Affect::Valence), pick(without, Affect::Arousal),
                    without.diverged ? "diverged" : "ok"});
    rows.push_back({name, "with", pick(with, Affect::Valence), pick(with, Affect::Arousal),
                    with.diverged ? "diverged" : "ok"});
    const bool ok = !without.diverged && !with.diverged;
    rows.push_back({name, "delta_pct",
                    ok ? relative_improvement_pct(rows[rows.size() - 2].valence, rows.back().valence) : nan,
                    ok ? relative_improvement_pct(rows[rows.size() - 2].arousal, rows.back().arousal) : nan,
                    ok ? "ok" : "diverged"});
  }
  return rows;
}

inline std::string format_fixed(double v, int decimals) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,iaca,valence_ccc,arousal_ccc,status\n";
  for (const auto& r : rows) {
    const int dec = r.iaca == "delta_pct" ? 1 : 3;
    os << r.variant << ',' << r.iaca << ',' << format_fixed(r.valence, dec) << ',' << format_fixed(r.arousal, dec)
       << ',' << r.status << '\n';
  }
  return os.str();
}

namespace detail {

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::string& header) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != header) {
    throw std::runtime_error("unexpected CSV header '" + line + "', expected '" + header + "'");
  }
  std::vector<std::vector<std::string>> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    out.push_back(std::move(fields));
  }
  return out;
}

inline double parse_real(const std::string& s) { return s == "nan" ? std::nan("") : std::stod(s); }

}  // namespace detail

inline std::vector<AblationRow> parse_ablation_csv(const std::string& text) {
  std::vector<AblationRow> rows;
  for (const auto& f : detail::parse_csv(text, "variant,iaca,valence_ccc,arousal_ccc,status")) {
    if (f.size() != 5) throw std::runtime_error("ablation CSV: expected 5 fields");
    rows.push_back({f[0], f[1], detail::parse_real(f[2]), detail::parse_real(f[3]), f[4]});
  }
  return rows;
}

// Training history CSV: epoch,train_ccc,val_ccc,loss

inline std::string history_csv(const std::vector<EpochRecord>& h) {
  std::ostringstream os;
  os << "epoch,train_ccc,val_ccc,loss\n";
  char buf[128];
  for (const auto& r : h) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", r.epoch, r.train_ccc, r.val_ccc, r.loss);
    os << buf;
  }
  return os.str();
}

inline std::vector<EpochRecord> parse_history_csv(const std::string& text) {
  std::vector<EpochRecord> out;
  for (const auto& f : detail::parse_csv(text, "epoch,train_ccc,val_ccc,loss")) {
    if (f.size() != 4) throw std::runtime_error("history CSV: expected 4 fields");
    out.push_back({std::stoul(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3])});
  }
  return out;
}

// Missing-modality sweep: audio zeroed at test time only.

inline const std::vector<double> kDefaultSweepFractions = {0.0, 0.1, 0.2, 0.4, 0.6, 0.8};

struct SweepRow {
  std::string model;
  double fraction = 0.0;
  double valence = 0.0;
  double arousal = 0.0;
};

/// `data` with each sequence's audio missing over `fraction` of its clips.
inline Dataset drop_audio(const Dataset& data, double fraction, std::uint64_t seed,
                          MaskPattern pattern = MaskPattern::Contiguous) {
  Dataset out = data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].xa = corrupt_missing(out[i].xa, fraction, derive_seed(seed, i), pattern);
  }
  return out;
}

inline std::vector<SweepRow> missing_modality_sweep(const Checkpoint& ck, const Dataset& test,
                                                    std::vector<double> fractions, std::uint64_t seed,
                                                    const std::string& label) {
  std::sort(fractions.begin(), fractions.end());
  std::vector<SweepRow> rows;
  for (double f : fractions) {
    const Dataset corrupted = drop_audio(test, f, seed);
    SweepRow r{label, f, 0.0, 0.0};
    r.valence = evaluate(ck.models.at(Affect::Valence), corrupted, Affect::Valence);
    r.arousal = evaluate(ck.models.at(Affect::Arousal), corrupted, Affect::Arousal);
    rows.push_back(r);
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "model,fraction,valence_ccc,arousal_ccc\n";
  for (const auto& r : rows) {
    os << r.model << ',' << format_fixed(r.fraction, 2) << ',' << format_fixed(r.valence, 3) << ','
       << format_fixed(r.arousal, 3) << '\n';
  }
  return os.str();
}

inline std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::vector<SweepRow> rows;
  for (const auto& f : detail::parse_csv(text, "model,fraction,valence_ccc,arousal_ccc")) {
    if (f.size() != 4) throw std::runtime_error("sweep CSV: expected 4 fields");
    rows.push_back({f[0], std::stod(f[1]), detail::parse_real(f[2]), detail::parse_real(f[3])});
  }
  return rows;
}

// Attention dump.

/// Min-max normalisation to [0, 1]; a constant input maps to all zeros.
inline std::vector<double> min_max(const std::vector<double>& v) {
  if (v.empty()) return v;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double span = *hi - *lo;
  std::vector<double> out(v.size(), 0.0);
  if (span <= 0.0) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp((v[i] - *lo) / span, 0.0, 1.0);
  return out;
}

/// Per-clip L2 norm of attended features.
inline std::vector<double> column_norms(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j) * m(i, j);
    out[j] = std::sqrt(s);
  }
  return out;
}

inline nlohmann::json rows_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

/// Attention JSON schema:
///   { "variant": str, "iaca": bool, "length": L,
///     "<affect>": { "audio_attention": [L], "visual_attention": [L],
///                   "prediction": [L], "target": [L],
///                   "stage1_audio": [[self, cross] x L], "stage1_visual": [[self, cross] x L],
///                   "stage2": [[audio, visual, joint] x L] } }
/// Attention values are min-max normalised per-clip attended-feature norms.
/// Gate arrays are present only for IACA models.
inline nlohmann::json dump_attention(const Checkpoint& ck, const SyntheticSequence& seq) {
  nlohmann::json out;
  const auto& any = ck.models.begin()->second.config();
  out["variant"] = std::string(to_string(any.variant));
  out["iaca"] = any.iaca;
  out["length"] = seq.xa.cols();
  for (const auto& [affect, model] : ck.models) {
    const auto fv = forward_values(model, seq.xa, seq.xv);
    nlohmann::json a;
    a["audio_attention"] = min_max(column_norms(fv.x_att_a));
    a["visual_attention"] = min_max(column_norms(fv.x_att_v));
    a["prediction"] = std::vector<double>(fv.prediction.data().begin(), fv.prediction.data().end());
    const auto& tgt = seq.target(affect);
    a["target"] = std::vector<double>(tgt.data().begin(), tgt.data().end());
    if (fv.gate_a) {
      a["stage1_audio"] = rows_json(*fv.gate_a);
      a["stage1_visual"] = rows_json(*fv.gate_v);
      a["stage2"] = rows_json(*fv.gate_av);
    }
    out[std::string(to_string(affect))] = std::move(a);
  }
  return out;
}

}  // namespace iaca
