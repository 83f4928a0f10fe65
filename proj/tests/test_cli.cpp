/* Copyright 2026 The provsage Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "provsage/cli.hpp"
#include "provsage/config.hpp"
#include "provsage/error.hpp"

using namespace provsage;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome cli_run(std::initializer_list<std::string> args, const std::string& input = "") {
  std::vector<std::string> owned{"provsage"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string last_line(const std::string& text) {
  auto end = text.find_last_not_of('\n');
  if (end == std::string::npos) return "";
  const auto begin = text.rfind('\n', end);
  return text.substr(begin == std::string::npos ? 0 : begin + 1,
                     end - (begin == std::string::npos ? 0 : begin + 1) + 1);
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Shared fixture: three benign two-role streams, one attacked stream with
// ground truth and a trained model.
struct Workspace {
  fs::path dir = fs::temp_directory_path() / "provsage_test_cli";
  std::string train[3];
  std::string test, truth, model;

  Workspace() {
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (int i = 0; i < 3; ++i) {
      train[i] = (dir / ("train" + std::to_string(i) + ".tsv")).string();
      REQUIRE(cli_run({"synth", "two-role", "--seed", std::to_string(60 + i), "-o", train[i]}).code == 0);
    }
    test = (dir / "test.tsv").string();
    truth = (dir / "truth.txt").string();
    REQUIRE(cli_run({"synth", "two-role", "--seed", "70", "--anomalies", "5", "--burst", "300",
                     "--ground-truth", truth, "-o", test})
                .code == 0);
    model = (dir / "model.bin").string();
    REQUIRE(cli_run({"train", train[0], train[1], train[2], "-o", model, "--seed", "2"}).code == 0);
  }
};

const Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("config: defaults, file over defaults, validation") {
  Config c;
  CHECK(c.bs == 5000);
  CHECK(c.ss == 200000);
  CHECK(c.split_size == 150000);
  CHECK(c.r == 1.5);
  CHECK(c.t == 168);
  CHECK(c.t_hat == 2);
  CHECK(c.k == 2);
  CHECK(c.hidden_width == 32);
  CHECK(c.epoch == 60);
  CHECK_NOTHROW(c.validate());

  std::istringstream text("# comment\nR = 2.5\n\nT = inf  # never\nss_semantics = active-nodes\n");
  std::vector<std::string> keys;
  apply_config_text(c, text, "cfg", &keys);
  CHECK(c.r == 2.5);
  CHECK(c.t == AlertConfig::kForever);
  CHECK(c.ss_semantics == SnapshotTrigger::kActiveNodes);
  CHECK(keys == std::vector<std::string>{"R", "T", "ss_semantics"});

  // to_text reads back to the same config.
  Config d;
  std::istringstream back(c.to_text());
  apply_config_text(d, back);
  CHECK(d.to_text() == c.to_text());

  for (const char* bad : {"R = 0.5", "K = 3", "BS = 0", "SS = 0", "epoch = 0", "learning_rate = 0",
                          "T = -1"}) {
    Config e;
    std::istringstream s(bad);
    apply_config_text(e, s);
    CHECK_THROWS_AS(e.validate(), InvalidArgument);
  }
  Config e;
  std::istringstream unknown("colour = red\n");
  CHECK_THROWS_AS(apply_config_text(e, unknown), InvalidArgument);
  std::istringstream malformed("K = two\n");
  CHECK_THROWS_AS(apply_config_text(e, malformed), InvalidArgument);
}

TEST_CASE("cli: usage errors exit 2") {
  const auto& w = ws();
  CHECK(cli_run({}).code == cli::kExitUsage);
  CHECK(cli_run({"frobnicate"}).code == cli::kExitUsage);

  const auto missing = (w.dir / "no_such.tsv").string();
  auto o = cli_run({"train", missing, "-o", (w.dir / "x.bin").string()});
  CHECK(o.code == cli::kExitUsage);
  CHECK(o.err.find(missing) != std::string::npos);
  o = cli_run({"detect", "-m", w.model, "-i", missing});
  CHECK(o.code == cli::kExitUsage);
  CHECK(o.err.find(missing) != std::string::npos);

  o = cli_run({"attack", "-m", w.model, "-i", w.test, "--ground-truth", w.truth, "--train",
               w.train[0], "--kind", "bogus"});
  CHECK(o.code == cli::kExitUsage);
  CHECK(o.err.find("bogus") != std::string::npos);

  o = cli_run({"evaluate", "--level", "node", "-m", w.model, "-i", w.test});
  CHECK(o.code == cli::kExitUsage);
  CHECK(o.err.find("ground-truth") != std::string::npos);

  CHECK(cli_run({"evaluate", "--strategy", "random"}).code == cli::kExitUsage);
  CHECK(cli_run({"train", w.train[0], "-o", (w.dir / "x.bin").string(), "--K", "3"}).code ==
        cli::kExitUsage);
  CHECK(cli_run({"help"}).code == cli::kExitUsage);
  CHECK(cli_run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("cli: train is deterministic") {
  const auto& w = ws();
  const auto m1 = (w.dir / "m1.bin").string(), m2 = (w.dir / "m2.bin").string();
  const auto r1 = (w.dir / "r1.json").string(), r2 = (w.dir / "r2.json").string();
  REQUIRE(cli_run({"train", w.train[0], w.train[1], w.train[2], "-o", m1, "--report", r1, "--seed", "2"}).code == 0);
  REQUIRE(cli_run({"train", w.train[0], w.train[1], w.train[2], "-o", m2, "--report", r2, "--seed", "2"}).code == 0);
  CHECK(slurp(m1) == slurp(m2));
  CHECK(slurp(m1) == slurp(w.model));
  CHECK(slurp(r1) == slurp(r2));
  const auto j = nlohmann::json::parse(slurp(r1));
  CHECK(j["submodels"].get<std::size_t>() >= 1);
  CHECK(j["graphs"].get<std::size_t>() == 3);
}

TEST_CASE("cli: flags take precedence over the config file") {
  const auto& w = ws();
  const auto cfg = (w.dir / "run.cfg").string();
  {
    std::ofstream f(cfg);
    f << "R = 2\nepoch = 5\n";
  }
  const auto report = (w.dir / "prec.json").string();
  const auto model = (w.dir / "prec.bin").string();
  REQUIRE(cli_run({"train", w.train[0], "-o", model, "--report", report, "--config", cfg, "--R", "3"}).code == 0);
  const auto text = nlohmann::json::parse(slurp(report))["config"].get<std::string>();
  CHECK(text.find("R = 3\n") != std::string::npos);      // flag over file
  CHECK(text.find("epoch = 5\n") != std::string::npos);  // file over default
  CHECK(text.find("K = 2\n") != std::string::npos);      // default

  const auto bad = (w.dir / "bad.cfg").string();
  {
    std::ofstream f(bad);
    f << "R = 2\nepoch = abc\n";
  }
  const auto o = cli_run({"train", w.train[0], "-o", model, "--config", bad});
  CHECK(o.code == cli::kExitUsage);
  CHECK(o.err.find(":2:") != std::string::npos);
}

TEST_CASE("cli: detect writes alerts, traces and a summary") {
  const auto& w = ws();
  const auto traces = w.dir / "traces";
  fs::remove_all(traces);
  const auto o = cli_run({"detect", "-m", w.model, "-i", w.test, "--SS", "2000", "--trace-dir",
                          traces.string()});
  REQUIRE(o.code == 0);
  const auto out = lines(o.out);
  REQUIRE(!out.empty());
  const std::string summary = last_line(o.out);
  CHECK(summary.rfind("flushes=", 0) == 0);
  CHECK(summary.find("alert_raised=true") != std::string::npos);
  const std::size_t alerts = out.size() - 1;
  CHECK(summary.find("confirmed=" + std::to_string(alerts) + " ") != std::string::npos);
  std::size_t dots = 0;
  for (const auto& e : fs::directory_iterator(traces)) dots += e.path().extension() == ".dot";
  CHECK(dots == alerts);
  for (std::size_t i = 0; i < alerts; ++i) {
    CHECK(std::count(out[i].begin(), out[i].end(), '\t') == 4);
  }

  // Inline detection and stdin give the same output.
  const auto inl = cli_run({"detect", "-m", w.model, "-i", w.test, "--SS", "2000", "--inline"});
  CHECK(inl.out == o.out);
  const auto piped = cli_run({"detect", "-m", w.model, "--SS", "2000"}, slurp(w.test));
  CHECK(piped.out == o.out);
}

TEST_CASE("cli: detect reports the failing line") {
  const auto& w = ws();
  auto o = cli_run({"detect", "-m", w.model},
                   "a\tprocess\tb\tfile\twrite\t1\nb\tprocess\tc\tfile\tread\t2\n");
  CHECK(o.code == cli::kExitFailure);
  CHECK(o.err.find("line 2") != std::string::npos);
  o = cli_run({"detect", "-m", w.model}, "a\tprocess\tb\tfile\twrite\t1\n\nbroken line\n");
  CHECK(o.code == cli::kExitFailure);
  CHECK(o.err.find("line 3") != std::string::npos);
  o = cli_run({"detect", "-m", w.model}, "");
  CHECK(o.code == 0);
  CHECK(o.out == "flushes=0 confirmed=0 alert_raised=false\n");
}

TEST_CASE("cli: attack sweep and evaluate agree on the baseline") {
  const auto& w = ws();
  const auto sweep = (w.dir / "sweep.csv").string();
  const auto traces = (w.dir / "attack.json").string();
  const auto o = cli_run({"attack", "-m", w.model, "-i", w.test, "--ground-truth", w.truth, "--train",
                          w.train[0], w.train[1], w.train[2], "--deltas", "0,0.1", "--kind", "model",
                          "--kind", "train-data", "-o", sweep, "--traces", traces});
  REQUIRE(o.code == 0);
  const auto rows = lines(slurp(sweep));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "delta_a,attack_kind,FNR,FPR,precision,recall");
  CHECK(rows[1].rfind("0,model,", 0) == 0);
  CHECK(rows[3].rfind("0,train-data,", 0) == 0);
  CHECK(nlohmann::json::parse(slurp(traces)).is_array());

  const auto e = cli_run({"evaluate", "--level", "node", "--batch", "-m", w.model, "-i", w.test,
                          "--ground-truth", w.truth});
  REQUIRE(e.code == 0);
  const auto m = lines(e.out);
  REQUIRE(m.size() == 2);
  const std::string eval_fnr = m[1].substr(m[1].rfind(',') + 1);
  auto field = [](const std::string& row, int idx) {
    std::istringstream s(row);
    std::string f;
    for (int i = 0; i <= idx; ++i) std::getline(s, f, ',');
    return f;
  };
  CHECK(field(rows[1], 2) == eval_fnr);
  CHECK(field(rows[3], 2) == eval_fnr);
}

TEST_CASE("cli: graph-level evaluate under both strategies") {
  const auto& w = ws();
  const auto corpus = (w.dir / "corpus.tsv").string();
  REQUIRE(cli_run({"synth", "streamspot", "--graphs-per-scene", "3", "--attack-graphs", "3", "-o", corpus}).code == 0);
  const auto summary = (w.dir / "summary.json").string();
  const auto metrics = (w.dir / "metrics.csv").string();
  auto o = cli_run({"evaluate", "--dataset", corpus, "--repeats", "2", "--SS", "5000", "--metrics",
                    metrics, "--summary", summary});
  REQUIRE(o.code == 0);
  const auto rows = lines(slurp(metrics));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "label,precision,recall,accuracy,f_score,fpr,fnr");
  CHECK(rows[3].rfind("mean,", 0) == 0);
  const auto j = nlohmann::json::parse(slurp(summary));
  CHECK(j["runs"].size() == 2);
  CHECK(j["strategy"] == "streamspot");

  o = cli_run({"evaluate", "--dataset", corpus, "--strategy", "kfold", "--folds", "3", "--repeats", "1",
               "--SS", "5000"});
  REQUIRE(o.code == 0);
  CHECK(lines(o.out).size() == 3);
}
