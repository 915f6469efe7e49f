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

// End-to-end checks of the ppn command-line tool. Cases run in file order and
// share one working directory; later cases reuse the weights trained earlier.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "doctest.h"
#include "ppn/audio.hpp"
#include "ppn/data_synth.hpp"
#include "ppn/embedder.hpp"
#include "ppn/metrics.hpp"
#include "ppn/weights_io.hpp"

namespace fs = std::filesystem;
using namespace ppn;

namespace {

const fs::path kWork = PPN_CLI_WORKDIR;

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Run run_cli(const std::string& args) {
  const auto out = kWork / "stdout.txt";
  const auto err = kWork / "stderr.txt";
  const std::string cmd = "cd '" + kWork.string() + "' && '" PPN_CLI_PATH "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

bool contains(const std::string& s, const std::string& what) { return s.find(what) != std::string::npos; }

nlohmann::json last_json_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return nlohmann::json::parse(last);
}

}  // namespace

TEST_CASE("setup: fresh working directory") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  CHECK(fs::is_directory(kWork));
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("--preset big mix --out-dir x").code == 2);
  CHECK(run_cli("mix --count 2").code == 2);  // --out-dir missing
  const auto rate = run_cli("--sample-rate 16000 mix --out-dir x");
  CHECK(rate.code == 2);
  CHECK(contains(rate.err, "48000"));
  const auto key = run_cli("--preset toy --set no_such_key=3 train-embedder --out e.ppnw");
  CHECK(key.code == 2);
  CHECK(contains(key.err, "no_such_key"));
  CHECK(run_cli("--lookahead-ms 25 --preset toy train-enhancer --embedder missing --out x").code == 3);
  CHECK(run_cli("mix --dataset nope --out-dir x").code == 2);
}

TEST_CASE("mix: manifest ratios re-measure from the written components") {
  const auto r = run_cli("--seed 7 mix --dataset toy-eval --count 50 --out-dir mix");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(kWork / "mix" / "resolved_config.txt"));
  std::ifstream f(kWork / "mix" / "manifest.jsonl");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(f, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto target = read_wav(kWork / "mix" / j["target"].get<std::string>());
    const auto interf = read_wav(kWork / "mix" / j["interferer"].get<std::string>());
    const auto noise = read_wav(kWork / "mix" / j["noise"].get<std::string>());
    const double snr = energy_ratio_db(target.view(), noise.view());
    const double sir = energy_ratio_db(target.view(), interf.view());
    CHECK(std::abs(snr - j["achieved_snr_db"].get<double>()) < 0.01);
    CHECK(std::abs(sir - j["achieved_sir_db"].get<double>()) < 0.01);
    CHECK(std::abs(snr - j["snr_db"].get<double>()) < 0.01);
    CHECK(std::abs(sir - j["sir_db"].get<double>()) < 0.01);
    ++rows;
  }
  CHECK(rows == 50);

  REQUIRE(run_cli("--seed 7 mix --dataset toy-eval --count 3 --out-dir mix_again").code == 0);
  for (const char* name : {"mix_00000.wav", "target_00002.wav", "noise_00001.wav"}) {
    CHECK(slurp(kWork / "mix" / name) == slurp(kWork / "mix_again" / name));
  }
}

TEST_CASE("train-embedder: toy preset reaches a low held-out EER") {
  const auto r = run_cli("--preset toy --seed 7 train-embedder --out emb.ppnw");
  REQUIRE(r.code == 0);
  const auto pos = r.out.find("final EER ");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(r.out.substr(pos + 10)) < 20.0);
  CHECK(fs::exists(kWork / "emb.ppnw.config.txt"));
  CHECK(contains(slurp(kWork / "emb.ppnw.config.txt"), "embedder.embedding_dim = 32"));
  CHECK(fs::exists(kWork / "emb.ppnw.eer.tsv"));
}

TEST_CASE("enroll: unit norm, byte-identical reruns, short audio rejected") {
  const auto a = run_cli("enroll --audio mix/enroll_spk1.wav --embedder emb.ppnw --out a.emb");
  REQUIRE(a.code == 0);
  CHECK(contains(a.out, "dim 32"));
  CHECK(contains(a.out, "norm 1.000000"));
  CHECK(load_embedding(kWork / "a.emb").norm() == doctest::Approx(1.0).epsilon(1e-6));
  REQUIRE(run_cli("enroll --audio mix/enroll_spk1.wav --embedder emb.ppnw --out b.emb").code == 0);
  CHECK(slurp(kWork / "a.emb") == slurp(kWork / "b.emb"));

  auto one = read_wav(kWork / "mix" / "enroll_spk1.wav");
  one.samples.resize(kSampleRate);
  write_wav(kWork / "short.wav", one);
  const auto s = run_cli("enroll --audio short.wav --embedder emb.ppnw --out s.emb");
  CHECK(s.code == 3);
  CHECK(contains(s.err, "enrollment too short"));
  CHECK_FALSE(fs::exists(kWork / "s.emb"));

  CHECK(run_cli("enroll --audio nothing.wav --embedder emb.ppnw --out s.emb").code == 3);
}

TEST_CASE("enhance: identity debug path reconstructs the input") {
  const auto r = run_cli("enhance --identity --input mix/mix_00000.wav --embedding a.emb --out id.wav");
  REQUIRE(r.code == 0);
  CHECK(contains(r.err, "realtime factor"));
  const auto in = read_wav(kWork / "mix" / "mix_00000.wav");
  const auto out = read_wav(kWork / "id.wav");
  REQUIRE(out.size() == in.size());
  CHECK(si_snr(out.view(), in.view()) >= 40.0);
}

TEST_CASE("train-enhancer, enhance and eval with trained weights") {
  const auto t = run_cli("--preset toy --seed 3 --set steps=600 train-enhancer --count 100 --embedder emb.ppnw --out enh.ppnw");
  REQUIRE(t.code == 0);
  std::ifstream curve(kWork / "enh.ppnw.loss.tsv");
  std::size_t lines = 0;
  for (std::string l; std::getline(curve, l);) ++lines;
  CHECK(lines == 601);
  CHECK(contains(slurp(kWork / "enh.ppnw.config.txt"), "enhancer.steps = 600"));

  const auto manifest = last_json_line(slurp(kWork / "mix" / "manifest.jsonl"));
  const std::string spk = std::to_string(manifest["target_speaker"].get<int>());
  REQUIRE(run_cli("enroll --audio mix/enroll_spk" + spk + ".wav --embedder emb.ppnw --out t.emb").code == 0);
  const std::string mixture = "mix/" + manifest["mixture"].get<std::string>();
  REQUIRE(run_cli("enhance --input " + mixture + " --embedding t.emb --weights enh.ppnw --out y.wav").code == 0);
  const auto mix = read_wav(kWork / mixture);
  const auto clean = read_wav(kWork / "mix" / manifest["target"].get<std::string>());
  const auto y = read_wav(kWork / "y.wav");
  CHECK(y.size() == mix.size());
  CHECK(si_snr_aligned(y.view(), clean.view()) > si_snr(mix.view(), clean.view()));

  save_embedding(kWork / "wrong.emb", SpeakerEmbedding{{0.6f, 0.8f}});
  const auto wrong = run_cli("enhance --input " + mixture + " --embedding wrong.emb --weights enh.ppnw --out w.wav");
  CHECK(wrong.code == 3);
  CHECK(contains(wrong.err, "dimension"));
  CHECK_FALSE(fs::exists(kWork / "w.wav"));

  CHECK(run_cli("--lookahead-ms 20 enhance --input " + mixture + " --embedding t.emb --weights enh.ppnw --out w.wav").code == 2);
  CHECK_FALSE(fs::exists(kWork / "w.wav"));

  const auto e = run_cli("eval --manifest mix/manifest.jsonl --embedder emb.ppnw --weights enh.ppnw --report model.jsonl");
  REQUIRE(e.code == 0);
  const auto summary = last_json_line(slurp(kWork / "model.jsonl"));
  CHECK(summary["count"] == 50);
  CHECK(summary["si_snr_out"].get<double>() > summary["si_snr_in"].get<double>());
}

TEST_CASE("eval: oracle gains separate the target in the probe") {
  const auto r = run_cli("eval --oracle --manifest mix/manifest.jsonl --embedder emb.ppnw --report oracle.jsonl");
  REQUIRE(r.code == 0);
  const auto summary = last_json_line(slurp(kWork / "oracle.jsonl"));
  CHECK(summary["summary"] == "median");
  CHECK(summary["cos_target"].get<double>() > summary["cos_interf"].get<double>());
  REQUIRE(run_cli("eval --oracle --manifest mix/manifest.jsonl --embedder emb.ppnw --report oracle2.jsonl").code == 0);
  CHECK(slurp(kWork / "oracle.jsonl") == slurp(kWork / "oracle2.jsonl"));

  CHECK(run_cli("eval --oracle --weights enh.ppnw --manifest mix/manifest.jsonl --embedder emb.ppnw --report x.jsonl").code == 2);
}

TEST_CASE("eval: manifest errors carry file and line") {
  const auto good = slurp(kWork / "mix" / "manifest.jsonl");
  std::ofstream(kWork / "mix" / "broken.jsonl") << good.substr(0, good.find('\n') + 1) << "{\"index\": 1}\n";
  const auto r = run_cli("eval --oracle --manifest mix/broken.jsonl --embedder emb.ppnw --report b.jsonl");
  CHECK(r.code == 3);
  CHECK(contains(r.err, "broken.jsonl:2:"));
  CHECK_FALSE(fs::exists(kWork / "b.jsonl"));
}
