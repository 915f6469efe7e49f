// Copyright (c) 2026 The PPN Engine Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ppn: command-line front end for enrollment, enhancement, data synthesis,
// training and evaluation.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ppn/audio.hpp"
#include "ppn/config_text.hpp"
#include "ppn/data_synth.hpp"
#include "ppn/embedder.hpp"
#include "ppn/engine.hpp"
#include "ppn/enhancer.hpp"
#include "ppn/error.hpp"
#include "ppn/eval.hpp"
#include "ppn/metrics.hpp"
#include "ppn/recipes.hpp"
#include "ppn/targets.hpp"
#include "ppn/weights_io.hpp"

namespace fs = std::filesystem;
using namespace ppn;
using json = nlohmann::ordered_json;

namespace {

constexpr double kMinEnrollSeconds = 3.0;

enum ExitCode { kOk = 0, kUsage = 2, kDataFailure = 3, kNumericFailure = 4 };

struct Common {
  std::string preset = "ppn512";
  std::uint64_t seed = 1;
  double lookahead_ms = 30.0;
  int sample_rate = kSampleRate;
  std::vector<std::string> overrides;
};

void log(const std::string& msg) { std::cerr << "[ppn] " << msg << '\n'; }

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

void check_common(const Common& c) {
  if (c.sample_rate != kSampleRate) {
    throw ConfigError("--sample-rate " + std::to_string(c.sample_rate) + " is not supported (only 48000)");
  }
}

std::size_t lookahead_frames(const Common& c) {
  const double frames = c.lookahead_ms / 10.0;
  if (!(frames >= 0.0) || frames > 10.0 || std::abs(frames - std::round(frames)) > 1e-9) {
    throw ConfigError("--lookahead-ms must be a multiple of 10 in [0, 100], got " + fmt(c.lookahead_ms, 3));
  }
  return std::size_t(std::lround(frames));
}

void require_lookahead(const Common& c, std::size_t model_frames) {
  if (lookahead_frames(c) != model_frames) {
    throw ConfigError("--lookahead-ms " + fmt(c.lookahead_ms, 0) + " does not match the model (" +
                      std::to_string(model_frames * 10) + " ms)");
  }
}

void reject_overrides(const Common& c) {
  if (!c.overrides.empty()) {
    throw ConfigError("unknown key in --set " + c.overrides.front() + " (this command has no tunable keys)");
  }
}

// Applies --set key=value lines on top of a config's text form.
template <typename Config>
Config with_overrides(const Config& base, const std::vector<std::string>& sets) {
  auto kv = KeyValues::parse(base.to_text());
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    const auto key = trim(s.substr(0, eq));
    if (!kv.has(key) || key == "preset") throw ConfigError("unknown key '" + key + "' in --set");
    kv.set(key, trim(s.substr(eq + 1)));
  }
  return Config::from_text(kv.to_text());
}

// The full resolved configuration of one run.
class Resolved {
 public:
  Resolved(const std::string& command, const Common& c) {
    kv_.set("command", command);
    kv_.set("preset", c.preset);
    kv_.set("seed", std::to_string(c.seed));
    kv_.set("lookahead_ms", fmt(c.lookahead_ms, 1));
    kv_.set("sample_rate", std::to_string(c.sample_rate));
  }
  void set(const std::string& k, const std::string& v) { kv_.set(k, v); }
  void set(const std::string& k, const fs::path& p) { kv_.set(k, p.string()); }
  void merge(const std::string& prefix, const std::string& config_text) {
    const auto parsed = KeyValues::parse(config_text);
    for (const auto& [k, v] : parsed.entries()) kv_.set(prefix + "." + k, v);
  }
  void emit(const fs::path& sidecar) const {
    const auto text = kv_.to_text();
    std::cerr << "[ppn] resolved config:\n" << text;
    write_text(sidecar, text);
  }

  static void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      if (!f) throw DataError("cannot write " + path.string());
      f << text;
      if (!f) throw DataError("cannot write " + path.string());
    }
    fs::rename(tmp, path);
  }

 private:
  KeyValues kv_;
};

fs::path sidecar_for(const fs::path& out) { return out.string() + ".config.txt"; }

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw DataError(std::string(what) + " not found: " + p.string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

struct EnrollArgs {
  fs::path audio, embedder, out;
};

int cmd_enroll(const Common& c, const EnrollArgs& a) {
  check_common(c);
  reject_overrides(c);
  require_file(a.audio, "audio");
  require_file(a.embedder, "embedder weights");
  Resolved r("enroll", c);
  r.set("audio", a.audio);
  r.set("embedder", a.embedder);
  r.set("out", a.out);
  r.emit(sidecar_for(a.out));

  const auto audio = read_wav(a.audio);
  if (audio.duration_s() < kMinEnrollSeconds) {
    throw InputError("enrollment too short: " + fmt(audio.duration_s(), 2) + " s of audio, need at least 3 s");
  }
  const auto model = Embedder::load(a.embedder);
  const auto e = model.enroll_audio(audio.view());
  save_embedding(a.out, e);
  std::cout << "dim " << e.values.size() << " norm " << fmt(e.norm()) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EnhanceArgs {
  fs::path input, embedding, weights, out;
  bool identity = false;
};

int cmd_enhance(const Common& c, const EnhanceArgs& a) {
  check_common(c);
  reject_overrides(c);
  require_file(a.input, "mixture");
  require_file(a.embedding, "embedding");
  if (!a.identity) {
    if (a.weights.empty()) throw ConfigError("enhance needs --weights unless --identity is given");
    require_file(a.weights, "enhancer weights");
  }
  Resolved r("enhance", c);
  r.set("input", a.input);
  r.set("embedding", a.embedding);
  r.set("weights", a.identity ? std::string("(identity)") : a.weights.string());
  r.set("out", a.out);

  const auto audio = read_wav(a.input);
  require_pipeline_audio(audio);
  const auto embedding = load_embedding(a.embedding);
  std::optional<EnhancerModel> model;
  EngineOptions options;
  options.identity = a.identity;
  options.lookahead_frames = lookahead_frames(c);
  if (!a.identity) {
    model.emplace(EnhancerModel::load(a.weights));
    require_lookahead(c, model->config().lookahead_frames);
    if (embedding.values.size() != model->config().embedding_dim) {
      throw InputError("embedding has dimension " + std::to_string(embedding.values.size()) +
                       " but the model expects " + std::to_string(model->config().embedding_dim));
    }
    r.merge("enhancer", model->config().to_text());
  }
  r.emit(sidecar_for(a.out));

  const auto t0 = std::chrono::steady_clock::now();
  const auto y = enhance_signal(model ? &*model : nullptr, embedding, audio.view(), options);
  const double wall = seconds_since(t0);
  write_wav(a.out, AudioBuffer(y));
  log("enhanced " + fmt(audio.duration_s(), 2) + " s, realtime factor " + fmt(audio.duration_s() / std::max(wall, 1e-9), 2));
  return kOk;
}

// ---------------------------------------------------------------------------

struct MixArgs {
  std::string dataset = "eval";
  std::size_t count = 50;
  fs::path out_dir;
};

json ratio_json(double db) { return std::isfinite(db) ? json(db) : json(nullptr); }

int cmd_mix(const Common& c, const MixArgs& a) {
  check_common(c);
  reject_overrides(c);
  const auto preset = dataset_preset(a.dataset);
  Resolved r("mix", c);
  r.set("dataset", a.dataset);
  r.set("count", std::to_string(a.count));
  r.set("out_dir", a.out_dir);
  fs::create_directories(a.out_dir);
  r.emit(a.out_dir / "resolved_config.txt");

  std::vector<bool> enrolled(preset.speakers, false);
  std::ostringstream manifest;
  for (std::size_t i = 0; i < a.count; ++i) {
    const auto ex = synth_example(preset, c.seed, i);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%05zu", i);
    const std::string s = stem;
    const std::string enroll = "enroll_spk" + std::to_string(ex.target_speaker) + ".wav";
    write_wav(a.out_dir / ("mix_" + s + ".wav"), AudioBuffer(ex.mixture));
    write_wav(a.out_dir / ("target_" + s + ".wav"), AudioBuffer(ex.clean_target));
    write_wav(a.out_dir / ("interferer_" + s + ".wav"), AudioBuffer(ex.interferer));
    write_wav(a.out_dir / ("noise_" + s + ".wav"), AudioBuffer(ex.noise));
    if (!enrolled[ex.target_speaker]) {
      write_wav(a.out_dir / enroll, AudioBuffer(ex.enrollment));
      enrolled[ex.target_speaker] = true;
    }
    json row;
    row["index"] = i;
    row["mixture"] = "mix_" + s + ".wav";
    row["target"] = "target_" + s + ".wav";
    row["interferer"] = "interferer_" + s + ".wav";
    row["noise"] = "noise_" + s + ".wav";
    row["enrollment"] = enroll;
    row["target_speaker"] = ex.target_speaker;
    row["interferer_speaker"] = ex.interferer_speaker;
    row["snr_db"] = ex.spec.snr_db;
    row["sir_db"] = ratio_json(ex.spec.sir_db);
    row["achieved_snr_db"] = ex.achieved_snr_db;
    row["achieved_sir_db"] = ratio_json(ex.achieved_sir_db);
    row["lowpass_hz"] = ex.spec.augment.lowpass_hz ? json(*ex.spec.augment.lowpass_hz) : json(nullptr);
    row["tilt_db_per_octave"] =
        ex.spec.augment.tilt_db_per_octave ? json(*ex.spec.augment.tilt_db_per_octave) : json(nullptr);
    manifest << row.dump() << '\n';
  }
  Resolved::write_text(a.out_dir / "manifest.jsonl", manifest.str());
  log("wrote " + std::to_string(a.count) + " mixtures to " + a.out_dir.string());
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainEmbedderArgs {
  std::string dataset = "toy-train";
  fs::path out;
};

int cmd_train_embedder(const Common& c, const TrainEmbedderArgs& a) {
  check_common(c);
  const auto cfg = with_overrides(EmbedderConfig::preset_named(c.preset), c.overrides);
  const auto preset = dataset_preset(a.dataset);
  const EmbedderRecipe recipe;
  Resolved r("train-embedder", c);
  r.set("dataset", a.dataset);
  r.set("out", a.out);
  r.set("recipe.train_utterances", std::to_string(recipe.train_utterances));
  r.set("recipe.heldout_utterances", std::to_string(recipe.heldout_utterances));
  r.set("recipe.utterance_s", fmt(utterance_seconds(recipe, cfg.crop_frames), 3));
  r.merge("embedder", cfg.to_text());
  r.emit(sidecar_for(a.out));

  const auto t0 = std::chrono::steady_clock::now();
  const auto res = train_embedder_recipe(preset, cfg, c.seed, recipe, [&](std::size_t step, double loss) {
    if ((step + 1) % cfg.eval_every == 0) log("step " + std::to_string(step + 1) + " loss " + fmt(loss, 4));
  });
  res.model.save(a.out);

  std::ostringstream curve;
  curve << "step\tloss\n";
  for (std::size_t i = 0; i < res.log.losses.size(); ++i) curve << i << '\t' << fmt(res.log.losses[i], 6) << '\n';
  Resolved::write_text(a.out.string() + ".loss.tsv", curve.str());
  std::ostringstream eers;
  eers << "step\teer\n";
  for (const auto& [step, rate] : res.log.eer) eers << step << '\t' << fmt(rate, 6) << '\n';
  Resolved::write_text(a.out.string() + ".eer.tsv", eers.str());

  log("trained in " + fmt(seconds_since(t0), 1) + " s");
  std::cout << "final EER " << fmt(100.0 * res.log.eer.back().second, 2) << "%\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainEnhancerArgs {
  std::string dataset = "toy-train";
  std::size_t count = 300;
  fs::path embedder, out;
};

int cmd_train_enhancer(const Common& c, const TrainEnhancerArgs& a) {
  check_common(c);
  require_file(a.embedder, "embedder weights");
  auto base = EnhancerConfig::preset_named(c.preset);
  base.lookahead_frames = lookahead_frames(c);
  const auto cfg = with_overrides(base, c.overrides);
  const auto preset = dataset_preset(a.dataset);
  const auto embedder = Embedder::load(a.embedder);
  if (embedder.dim() != cfg.embedding_dim) {
    throw ConfigError("embedder produces dimension " + std::to_string(embedder.dim()) +
                      " but the enhancer expects " + std::to_string(cfg.embedding_dim));
  }
  Resolved r("train-enhancer", c);
  r.set("dataset", a.dataset);
  r.set("count", std::to_string(a.count));
  r.set("embedder", a.embedder);
  r.set("out", a.out);
  r.merge("enhancer", cfg.to_text());
  r.emit(sidecar_for(a.out));

  const auto t0 = std::chrono::steady_clock::now();
  const auto data = synth_enhancer_dataset(preset, c.seed, a.count, enroll_pool(embedder, preset));
  log("dataset ready in " + fmt(seconds_since(t0), 1) + " s");
  double acc = 0;
  const auto res = train_enhancer(data, cfg, c.seed, [&](std::size_t step, double loss) {
    acc += loss;
    if ((step + 1) % 100 == 0) {
      log("step " + std::to_string(step + 1) + " loss " + fmt(acc / 100.0, 4));
      acc = 0;
    }
  });
  res.model.save(a.out);

  std::ostringstream curve;
  curve << "step\tloss\tgain_strength\tvad\n";
  for (std::size_t i = 0; i < res.log.losses.size(); ++i) {
    curve << i << '\t' << fmt(res.log.losses[i]) << '\t' << fmt(res.log.gain_strength[i]) << '\t'
          << fmt(res.log.vad[i]) << '\n';
  }
  Resolved::write_text(a.out.string() + ".loss.tsv", curve.str());
  log("trained in " + fmt(seconds_since(t0), 1) + " s");
  std::cout << "final loss " << fmt(res.log.losses.back()) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  fs::path manifest, embedder, weights, report;
  bool oracle = false;
};

struct ManifestRow {
  std::size_t line = 0;
  std::size_t index = 0;
  fs::path mixture, target, interferer, enrollment;
};

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest " + path.string());
  const fs::path dir = path.parent_path();
  std::vector<ManifestRow> rows;
  std::string text;
  std::size_t line = 0;
  while (std::getline(f, text)) {
    ++line;
    if (trim(text).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line) + ": ";
    try {
      const auto j = json::parse(text);
      ManifestRow r;
      r.line = line;
      r.index = j.at("index").get<std::size_t>();
      r.mixture = dir / j.at("mixture").get<std::string>();
      r.target = dir / j.at("target").get<std::string>();
      r.interferer = dir / j.at("interferer").get<std::string>();
      r.enrollment = dir / j.at("enrollment").get<std::string>();
      rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    }
  }
  if (rows.empty()) throw DataError(path.string() + ": manifest has no rows");
  return rows;
}

int cmd_eval(const Common& c, const EvalArgs& a) {
  check_common(c);
  reject_overrides(c);
  if (a.oracle == !a.weights.empty()) throw ConfigError("eval needs exactly one of --weights or --oracle");
  require_file(a.manifest, "manifest");
  require_file(a.embedder, "embedder weights");
  const auto rows = read_manifest(a.manifest);
  const auto embedder = Embedder::load(a.embedder);
  std::optional<EnhancerModel> model;
  Resolved r("eval", c);
  r.set("manifest", a.manifest);
  r.set("embedder", a.embedder);
  r.set("mode", std::string(a.oracle ? "oracle" : "model"));
  r.set("report", a.report);
  if (!a.oracle) {
    require_file(a.weights, "enhancer weights");
    model.emplace(EnhancerModel::load(a.weights));
    require_lookahead(c, model->config().lookahead_frames);
    if (embedder.dim() != model->config().embedding_dim) {
      throw ConfigError("embedder dimension " + std::to_string(embedder.dim()) +
                        " does not match the enhancer (" + std::to_string(model->config().embedding_dim) + ")");
    }
    r.set("weights", a.weights);
    r.merge("enhancer", model->config().to_text());
  }
  r.emit(sidecar_for(a.report));

  std::vector<EvalRecord> records;
  for (const auto& row : rows) {
    const std::string where = a.manifest.string() + ":" + std::to_string(row.line) + ": ";
    try {
      const auto mix = read_wav(row.mixture);
      const auto clean = read_wav(row.target);
      const auto interf = read_wav(row.interferer);
      const auto labels = compute_targets(clean.view(), mix.view()).vad;
      std::vector<float> y, vad;
      if (a.oracle) {
        y = oracle_mask_enhance(clean.view(), mix.view());
      } else {
        const auto e = embedder.enroll_audio(read_wav(row.enrollment).view());
        std::vector<EnhancerOutputs> outs;
        EngineOptions opt;
        opt.lookahead_frames = model->config().lookahead_frames;
        y = enhance_signal(&*model, e, mix.view(), opt, &outs);
        vad = vad_track(outs);
      }
      records.push_back(evaluate_output(row.index, mix.view(), clean.view(), interf.view(), y, vad, labels, embedder));
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
  }
  const auto report = eval_report(records);
  Resolved::write_text(a.report, report);
  std::cout << to_json_line(summarize(records)) << '\n';
  return kOk;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kConfig:
      return kUsage;
    case ErrorKind::kNumeric:
      return kNumericFailure;
    default:
      return kDataFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Target-speaker speech enhancement toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--preset", common.preset, "Model preset")
      ->check(CLI::IsMember({"ppn512", "ppn1024", "toy"}))
      ->capture_default_str();
  app.add_option("--seed", common.seed, "Random seed")->capture_default_str();
  app.add_option("--lookahead-ms", common.lookahead_ms, "Look-ahead in milliseconds")->capture_default_str();
  app.add_option("--sample-rate", common.sample_rate, "Sample rate (only 48000)")->capture_default_str();
  app.add_option("--set", common.overrides, "Config override key=value (repeatable)");

  EnrollArgs enroll;
  auto* en = app.add_subcommand("enroll", "Compute a speaker embedding from a WAV file");
  en->add_option("--audio", enroll.audio, "Enrollment WAV (>= 3 s)")->required();
  en->add_option("--embedder", enroll.embedder, "Embedder weights")->required();
  en->add_option("--out", enroll.out, "Output embedding file")->required();

  EnhanceArgs enhance;
  auto* eh = app.add_subcommand("enhance", "Stream a mixture through the enhancer");
  eh->add_option("--input", enhance.input, "Mixture WAV")->required();
  eh->add_option("--embedding", enhance.embedding, "Speaker embedding file")->required();
  eh->add_option("--weights", enhance.weights, "Enhancer weights");
  eh->add_option("--out", enhance.out, "Output WAV")->required();
  eh->add_flag("--identity", enhance.identity, "Unit gains, no pitch filtering (debug)");

  MixArgs mix;
  auto* mx = app.add_subcommand("mix", "Synthesize a mixture dataset with a manifest");
  mx->add_option("--dataset", mix.dataset, "Dataset preset")->capture_default_str();
  mx->add_option("--count", mix.count, "Number of mixtures")->capture_default_str();
  mx->add_option("--out-dir", mix.out_dir, "Output directory")->required();

  TrainEmbedderArgs temb;
  auto* te = app.add_subcommand("train-embedder", "Train the speaker embedder on synthetic talkers");
  te->add_option("--dataset", temb.dataset, "Speaker pool preset")->capture_default_str();
  te->add_option("--out", temb.out, "Output weights")->required();

  TrainEnhancerArgs tenh;
  auto* tn = app.add_subcommand("train-enhancer", "Train the enhancer on synthetic mixtures");
  tn->add_option("--dataset", tenh.dataset, "Dataset preset")->capture_default_str();
  tn->add_option("--count", tenh.count, "Training mixtures")->capture_default_str();
  tn->add_option("--embedder", tenh.embedder, "Embedder weights")->required();
  tn->add_option("--out", tenh.out, "Output weights")->required();

  EvalArgs ev;
  auto* evc = app.add_subcommand("eval", "Score enhanced outputs over a manifest");
  evc->add_option("--manifest", ev.manifest, "manifest.jsonl from mix")->required();
  evc->add_option("--embedder", ev.embedder, "Embedder weights for enrollment and probes")->required();
  evc->add_option("--weights", ev.weights, "Enhancer weights");
  evc->add_flag("--oracle", ev.oracle, "Use ideal band gains instead of a model");
  evc->add_option("--report", ev.report, "Output JSONL report")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*en) return cmd_enroll(common, enroll);
    if (*eh) return cmd_enhance(common, enhance);
    if (*mx) return cmd_mix(common, mix);
    if (*te) return cmd_train_embedder(common, temb);
    if (*tn) return cmd_train_enhancer(common, tenh);
    if (*evc) return cmd_eval(common, ev);
  } catch (const Error& e) {
    std::cerr << "ppn: error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ppn: error: " << e.what() << '\n';
    return kDataFailure;
  }
  return kUsage;
}
