// iaca: experiment runner for the inconsistency-aware fusion models.
//
//   iaca train      --config cfg.json [overrides]     -> <out>/model.ckpt, history_*.csv
//   iaca ablation   --config cfg.json --variants CA,TCA,JCA,RJCA
//   iaca sweep      --checkpoint a.ckpt [--checkpoint b.ckpt] [--fractions 0,0.1,...]
//   iaca dump-attn  --checkpoint a.ckpt [--regime dominating_audio] [--index 0]
//   iaca gen-data   --regime strong_complementary --count 16 -o data.csv
//
// Relative output paths resolve against $IACA_OUTPUT_ROOT when it is set.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iaca/experiment.hpp"

namespace fs = std::filesystem;
using namespace iaca;

namespace {

fs::path output_path(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (const char* root = std::getenv("IACA_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
      path = fs::path(root) / path;
    }
  }
  return path;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path.string(), std::vector<char>(text.begin(), text.end()));
}

// Flags that override fields of the JSON config. Only flags given on the
// command line take effect.
struct Overrides {
  std::string config_path;
  std::optional<std::string> variant, regime, optimizer, av_axis, stage1_input, out;
  std::optional<bool> iaca;
  std::optional<std::size_t> d, length, n_train, n_val, n_test, epochs, batch, hidden, rjca_iterations, patience;
  std::optional<double> lr, temperature, noise_sigma, corrupt_fraction;
  std::optional<std::uint64_t> seed, data_seed;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--variant", variant, "CA | TCA | JCA | RJCA");
    app->add_flag("--iaca,!--no-iaca", iaca, "attach the two-stage gating");
    app->add_option("--regime", regime, "strong_complementary | weak_conflicting | dominating_audio | dominating_visual");
    app->add_option("--noise-sigma", noise_sigma);
    app->add_option("--corrupt-fraction", corrupt_fraction);
    app->add_option("--d", d, "feature dimension");
    app->add_option("--L", length, "clips per sequence");
    app->add_option("--n-train", n_train);
    app->add_option("--n-val", n_val);
    app->add_option("--n-test", n_test);
    app->add_option("--epochs", epochs);
    app->add_option("--batch-size", batch);
    app->add_option("--lr", lr);
    app->add_option("--optimizer", optimizer, "adam | sgd");
    app->add_option("--patience", patience);
    app->add_option("--seed", seed, "model and shuffling seed");
    app->add_option("--data-seed", data_seed);
    app->add_option("--hidden", hidden);
    app->add_option("--temperature", temperature);
    app->add_option("--av-axis", av_axis, "columns | rows");
    app->add_option("--stage1-input", stage1_input, "raw | self_attended");
    app->add_option("--rjca-iterations", rjca_iterations);
    app->add_option("-o,--out", out, "output directory");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      apply_json(c, nlohmann::json::parse(f));
    }
    if (variant) c.variant = parse_variant(*variant);
    if (iaca) c.iaca = *iaca;
    if (regime) c.regime.kind = parse_regime_kind(*regime);
    if (noise_sigma) c.regime.noise_sigma = *noise_sigma;
    if (corrupt_fraction) c.regime.corrupt_fraction = *corrupt_fraction;
    if (d) c.d = *d;
    if (length) c.length = *length;
    if (n_train) c.n_train = *n_train;
    if (n_val) c.n_val = *n_val;
    if (n_test) c.n_test = *n_test;
    if (epochs) c.train.epochs = *epochs;
    if (batch) c.train.batch_size = *batch;
    if (lr) c.train.learning_rate = *lr;
    if (optimizer) c.train.optimizer = parse_optimizer(*optimizer);
    if (patience) c.train.patience = *patience;
    if (seed) {
      c.model_seed = *seed;
      c.train.seed = *seed;
    }
    if (data_seed) c.data_seed = *data_seed;
    if (hidden) c.hidden = *hidden;
    if (temperature) c.temperature = *temperature;
    if (av_axis) c.av_axis = parse_axis(*av_axis);
    if (stage1_input) c.stage1_input = parse_stage1_input(*stage1_input);
    if (rjca_iterations) c.rjca_iterations = *rjca_iterations;
    if (out) c.output_dir = *out;
    c.validate();
    return c;
  }
};

std::string cell_name(const ExperimentConfig& c) {
  return std::string(to_string(c.variant)) + (c.iaca ? "_iaca" : "_base");
}

void save_cell(const fs::path& dir, const ExperimentConfig& c, const CellResult& r) {
  fs::create_directories(dir);
  for (const auto& [affect, h] : r.history) {
    write_text(dir / ("history_" + std::string(to_string(affect)) + ".csv"), history_csv(h));
  }
  if (!r.diverged) save_checkpoint((dir / "model.ckpt").string(), r.checkpoint);
  write_text(dir / "config.json", to_json(c).dump(2) + "\n");
}

void print_cell(const CellResult& r) {
  if (r.diverged) {
    std::printf("%-4s %-5s diverged: %s\n", std::string(to_string(r.variant)).c_str(), r.iaca ? "iaca" : "base",
                r.error.c_str());
    return;
  }
  std::printf("%-4s %-5s val V %.3f A %.3f  test V %.3f A %.3f\n", std::string(to_string(r.variant)).c_str(),
              r.iaca ? "iaca" : "base", r.val_ccc.at(Affect::Valence), r.val_ccc.at(Affect::Arousal),
              r.test_ccc.at(Affect::Valence), r.test_ccc.at(Affect::Arousal));
}

std::vector<Variant> parse_variant_list(const std::vector<std::string>& names) {
  if (names.empty()) return {std::begin(kAllVariants), std::end(kAllVariants)};
  std::vector<Variant> out;
  for (const auto& n : names) out.push_back(parse_variant(n));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inconsistency-aware audio-visual fusion: training and evaluation harness"};
  app.require_subcommand(1);

  Overrides train_ov, abl_ov;
  auto* train = app.add_subcommand("train", "train one (variant, iaca) cell for valence and arousal");
  train_ov.attach(train);

  auto* ablation = app.add_subcommand("ablation", "train every variant with and without IACA");
  abl_ov.attach(ablation);
  std::vector<std::string> variant_names;
  ablation->add_option("--variants", variant_names, "subset of CA,TCA,JCA,RJCA")->delimiter(',');

  auto* sweep = app.add_subcommand("sweep", "zero a growing fraction of test audio and re-evaluate");
  std::vector<std::string> sweep_ckpts;
  std::vector<double> fractions = kDefaultSweepFractions;
  std::string sweep_out = "sweep.csv";
  std::uint64_t sweep_seed = 7;
  sweep->add_option("--checkpoint", sweep_ckpts, "trained checkpoint(s)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--fractions", fractions, "missing fractions in [0,1]")->delimiter(',');
  sweep->add_option("--mask-seed", sweep_seed);
  sweep->add_option("-o,--out", sweep_out, "CSV path");

  auto* dump = app.add_subcommand("dump-attn", "write per-clip attention and gate scores as JSON");
  std::string dump_ckpt, dump_out = "attention.json";
  std::optional<std::string> dump_regime;
  std::size_t dump_index = 0;
  dump->add_option("--checkpoint", dump_ckpt)->required()->check(CLI::ExistingFile);
  dump->add_option("--regime", dump_regime, "draw the sequence from this regime instead of the training one");
  dump->add_option("--index", dump_index, "test sequence index");
  dump->add_option("-o,--out", dump_out, "JSON path");

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
  std::string gen_regime = "weak_conflicting", gen_out = "data.csv";
  std::size_t gen_d = 32, gen_l = 64, gen_count = 16;
  std::uint64_t gen_seed = 1;
  Regime gen_params;
  gen->add_option("--regime", gen_regime);
  gen->add_option("--d", gen_d);
  gen->add_option("--L", gen_l);
  gen->add_option("--count", gen_count);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--noise-sigma", gen_params.noise_sigma);
  gen->add_option("--corrupt-fraction", gen_params.corrupt_fraction);
  gen->add_option("-o,--out", gen_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const ExperimentConfig c = train_ov.resolve();
      const CellResult r = run_cell(c);
      print_cell(r);
      const fs::path dir = output_path(c.output_dir) / cell_name(c);
      save_cell(dir, c, r);
      std::printf("wrote %s\n", dir.string().c_str());
      return r.diverged ? 2 : 0;
    }
    if (*ablation) {
      const ExperimentConfig base = abl_ov.resolve();
      const auto variants = parse_variant_list(variant_names);
      const Splits splits = make_splits(base);
      std::vector<CellResult> cells;
      const fs::path root = output_path(base.output_dir);
      for (Variant v : variants) {
        for (bool with : {false, true}) {
          ExperimentConfig c = base;
          c.variant = v;
          c.iaca = with;
          cells.push_back(run_cell(c, splits));
          print_cell(cells.back());
          save_cell(root / cell_name(c), c, cells.back());
        }
      }
      const std::string csv = ablation_csv(ablation_rows(cells));
      write_text(root / "ablation.csv", csv);
      std::cout << csv;
      return 0;
    }
    if (*sweep) {
      std::vector<SweepRow> rows;
      for (const auto& path : sweep_ckpts) {
        const Checkpoint ck = load_checkpoint(path);
        const ExperimentConfig c = checkpoint_config(ck);
        const std::string label = fs::path(path).parent_path().filename().string();
        const auto part = missing_modality_sweep(ck, make_splits(c).test, fractions, sweep_seed,
                                                 label.empty() ? cell_name(c) : label);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      const std::string csv = sweep_csv(rows);
      write_text(output_path(sweep_out), csv);
      std::cout << csv;
      return 0;
    }
    if (*dump) {
      const Checkpoint ck = load_checkpoint(dump_ckpt);
      ExperimentConfig c = checkpoint_config(ck);
      if (dump_regime) c.regime.kind = parse_regime_kind(*dump_regime);
      const Dataset test = make_splits(c).test;
      if (dump_index >= test.size()) throw DomainError("--index past the end of the test split");
      write_text(output_path(dump_out), dump_attention(ck, test[dump_index]).dump(1) + "\n");
      std::printf("wrote %s\n", output_path(dump_out).string().c_str());
      return 0;
    }
    if (*gen) {
      gen_params.kind = parse_regime_kind(gen_regime);
      gen_params.validate();
      const fs::path path = output_path(gen_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      save_dataset(path.string(), generate(gen_params, gen_d, gen_l, gen_count, gen_seed), gen_seed);
      std::printf("wrote %zu sequences to %s\n", gen_count, path.string().c_str());
      return 0;
    }
  } catch (const LoadError& e) {
    std::fprintf(stderr, "load error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
