#include <sstream>

#include "commands.hpp"
#include "run_config.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace ctxda;
using namespace ctxda::testing;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result ctxda_run(std::vector<std::string> args) {
  args.insert(args.begin(), "ctxda");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string small_config(const std::string& extra_train = "") {
  return R"({
  "synthetic": {"num_conversations": 12, "conversation_length": 6, "test_conversations": 4,
                "embedding_dim": 8},
  "model": {"hidden_dim": 4, "baseline_hidden1": 8, "baseline_hidden2": 4},
  "train": {"batch_size": 16, "max_epochs": 3, "learning_rate": 0.01, "patience": 2)" +
         extra_train + R"(}
})";
}

}  // namespace

TEST_CASE("input errors exit with 2") {
  TempDir dir("cli_in");
  const auto out = (dir / "out").string();
  auto r = ctxda_run({"train", "--out", out});
  CHECK(r.code == 2);
  CHECK(r.err.find("train.jsonl") != std::string::npos);

  r = ctxda_run({"train", "--config", (dir / "nope.json").string()});
  CHECK(r.code == 2);

  const auto bad = dir.write("bad.json", "{\"train\": {\"learning_rat\": 1}}");
  r = ctxda_run({"synth", "--config", bad.string(), "--out", out});
  CHECK(r.code == 2);
  CHECK(r.err.find("learning_rat") != std::string::npos);

  r = ctxda_run({"frobnicate"});
  CHECK(r.code == 2);
}

TEST_CASE("corrupted checkpoint exits with 4") {
  TempDir dir("cli_ckpt");
  const auto cfg = dir.write("c.json", small_config());
  const auto out = (dir / "out").string();
  REQUIRE(ctxda_run({"synth", "--config", cfg.string(), "--out", out}).code == 0);
  const auto bad = dir.write("bad.ckpt.json", "{\"format\": \"ctxda-checkpoint\", \"version\": 1}");
  const auto r = ctxda_run({"eval", "--config", cfg.string(), "--out", out, "--nc", bad.string(),
                            "--wc", bad.string()});
  CHECK(r.code == 4);
}

TEST_CASE("empty or missing records exit with 5") {
  TempDir dir("cli_rec");
  const auto empty = dir.write("records.jsonl", "");
  const auto out = (dir / "out").string();
  CHECK(ctxda_run({"analyze", "--out", out, "--records", empty.string()}).code == 5);
  CHECK(ctxda_run({"analyze", "--out", out, "--records", (dir / "none.jsonl").string()}).code == 5);
  const auto junk = dir.write("junk.jsonl", "{{{\n");
  CHECK(ctxda_run({"analyze", "--out", out, "--records", junk.string()}).code == 5);
}

TEST_CASE("divergent training exits with 3") {
  TempDir dir("cli_div");
  const auto cfg = dir.write("c.json", small_config(R"(, "learning_rate": 1e308)"));
  const auto out = (dir / "out").string();
  REQUIRE(ctxda_run({"synth", "--config", cfg.string(), "--out", out}).code == 0);
  const auto r = ctxda_run({"train", "--config", cfg.string(), "--out", out, "--model", "baseline"});
  CHECK(r.code == 3);
  CHECK(r.err.find("epoch") != std::string::npos);
}

TEST_CASE("synth, train, eval and analyze end to end") {
  TempDir dir("cli_flow");
  const auto cfg = dir.write("c.json", small_config());
  const fs::path out = dir / "out";
  const std::vector<std::string> common = {"--config", cfg.string(), "--out", out.string()};
  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), common.begin(), common.end());
    return head;
  };

  REQUIRE(ctxda_run(with({"synth"})).code == 0);
  for (const char* f : {"train.jsonl", "test.jsonl", "tags.txt", "embeddings.txt"})
    CHECK(fs::exists(out / f));

  REQUIRE(ctxda_run(with({"train", "--model", "baseline"})).code == 0);
  REQUIRE(ctxda_run(with({"train", "--model", "uttattbirnn"})).code == 0);
  CHECK(fs::exists(out / "baseline.ckpt.json"));
  CHECK(fs::exists(out / "uttattbirnn_history.csv"));
  const std::string first = read_file(out / "uttattbirnn.ckpt.json");

  // Same seed, same bytes.
  REQUIRE(ctxda_run(with({"train", "--model", "uttattbirnn"})).code == 0);
  CHECK(read_file(out / "uttattbirnn.ckpt.json") == first);

  const auto ev = ctxda_run(with({"eval"}));
  REQUIRE(ev.code == 0);
  CHECK(fs::exists(out / "records.jsonl"));
  CHECK(read_file(out / "accuracy.csv").rfind("run,", 0) == 0);

  const auto an = ctxda_run(with({"analyze"}));
  REQUIRE(an.code == 0);
  for (const char* f : {"failure_pairs.csv", "rescue_pairs.csv", "confidence.csv",
                        "attention_profile.csv", "short_slice.csv", "confidence.svg",
                        "attention.svg"})
    CHECK(fs::exists(out / f));
  CHECK(read_file(out / "failure_pairs.csv").rfind("gt,nc,wc,num,pct", 0) == 0);
  CHECK(fs::exists(out / "ctxda.log"));
}

TEST_CASE("multiple runs and ensembles") {
  TempDir dir("cli_runs");
  const auto cfg = dir.write("c.json", small_config());
  const fs::path out = dir / "out";
  const std::vector<std::string> common = {"--config", cfg.string(), "--out", out.string(), "--runs", "2"};
  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), common.begin(), common.end());
    return head;
  };
  REQUIRE(ctxda_run(with({"synth"})).code == 0);
  REQUIRE(ctxda_run(with({"train", "--model", "baseline"})).code == 0);
  REQUIRE(ctxda_run(with({"train", "--model", "uttattbirnn"})).code == 0);
  CHECK(fs::exists(out / "uttattbirnn.run1.ckpt.json"));
  CHECK(read_file(out / "uttattbirnn.run0.ckpt.json") != read_file(out / "uttattbirnn.run1.ckpt.json"));
  REQUIRE(ctxda_run(with({"eval", "--ensemble", (out / "uttattbirnn.run0.ckpt.json").string(),
                          "--ensemble", (out / "uttattbirnn.run1.ckpt.json").string()}))
              .code == 0);
  CHECK(read_file(out / "accuracy.csv").find("ensemble") != std::string::npos);
  REQUIRE(ctxda_run(with({"analyze", "--records", (out / "records.run0.jsonl").string(), "--records",
                          (out / "records.run1.jsonl").string()}))
              .code == 0);
  CHECK(fs::exists(out / "attention_profile_runs.csv"));
}

TEST_CASE("rerunning synth, eval and analyze gives identical files") {
  TempDir dir("cli_idem");
  const auto cfg = dir.write("c.json", small_config());
  const fs::path out = dir / "out";
  auto run = [&](std::vector<std::string> head) {
    head.insert(head.end(), {"--config", cfg.string(), "--out", out.string()});
    return ctxda_run(head).code;
  };
  auto snapshot = [&](std::initializer_list<const char*> names) {
    std::vector<std::string> s;
    for (const char* n : names) s.push_back(read_file(out / n));
    return s;
  };
  const auto synth_files = {"train.jsonl", "test.jsonl", "tags.txt", "embeddings.txt"};
  const auto eval_files = {"records.jsonl", "accuracy.csv"};
  const auto analyze_files = {"failure_pairs.csv", "rescue_pairs.csv", "confidence.csv",
                              "attention_profile.csv", "short_slice.csv", "confidence.svg",
                              "attention.svg"};

  REQUIRE(run({"synth"}) == 0);
  const auto s1 = snapshot(synth_files);
  REQUIRE(run({"synth"}) == 0);
  CHECK(snapshot(synth_files) == s1);

  REQUIRE(run({"train", "--model", "baseline"}) == 0);
  REQUIRE(run({"train", "--model", "uttattbirnn"}) == 0);
  REQUIRE(run({"eval"}) == 0);
  const auto e1 = snapshot(eval_files);
  REQUIRE(run({"eval"}) == 0);
  CHECK(snapshot(eval_files) == e1);

  REQUIRE(run({"analyze"}) == 0);
  const auto a1 = snapshot(analyze_files);
  REQUIRE(run({"analyze"}) == 0);
  CHECK(snapshot(analyze_files) == a1);
}

TEST_CASE("shipped configs parse") {
  for (const auto& entry : fs::directory_iterator(CTXDA_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    INFO(entry.path().string());
    CHECK_NOTHROW(cli::RunConfig::load(entry.path()).validate());
  }
}

TEST_CASE("checkpoints with different tag orders exit with 4") {
  TempDir dir("cli_tags");
  const auto cfg = dir.write("c.json", small_config());
  const fs::path out = dir / "out";
  const std::vector<std::string> common = {"--config", cfg.string(), "--out", out.string()};
  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), common.begin(), common.end());
    return head;
  };
  REQUIRE(ctxda_run(with({"synth"})).code == 0);
  REQUIRE(ctxda_run(with({"train", "--model", "baseline"})).code == 0);
  REQUIRE(ctxda_run(with({"train", "--model", "uttattbirnn"})).code == 0);

  auto doc = nlohmann::json::parse(read_file(out / "baseline.ckpt.json"));
  std::swap(doc["tags"][0], doc["tags"][1]);
  const auto swapped = dir.write("swapped.ckpt.json", doc.dump(1));
  const auto r = ctxda_run(with({"eval", "--nc", swapped.string(), "--wc",
                                 (out / "uttattbirnn.ckpt.json").string()}));
  CHECK(r.code == 4);
  CHECK(r.err.find("tag vocabularies differ") != std::string::npos);
}
