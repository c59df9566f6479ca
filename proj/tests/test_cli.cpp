#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <sys/wait.h>

#include "c2p/c2p.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace c2p;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Runs the CLI inside `dir` and returns its exit status.
int run(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" C2P_CLI "' " + args + " >stdout.txt 2>stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t line_count(const fs::path& p) {
  const auto text = test::read_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

void five_image_fixture(const fs::path& root) {
  for (int i = 0; i < 3; ++i) test::write_noise(root / "real" / ("r" + std::to_string(i) + ".ppm"), 8, 8, i);
  for (int i = 0; i < 2; ++i) test::write_noise(root / "fake" / ("f" + std::to_string(i) + ".ppm"), 8, 8, 10 + i);
}

}  // namespace

TEST(Cli, ScanWritesOneLinePerImage) {
  auto dir = test::scratch_dir();
  five_image_fixture(dir / "flat");
  ASSERT_EQ(run(dir, "scan --root flat --layout flat --out m.jsonl"), 0);
  EXPECT_EQ(line_count(dir / "m.jsonl"), 5u);
  auto meta = train::read_json(dir / "m.jsonl.meta.json");
  EXPECT_EQ(meta.at("tool_version"), kToolVersion);
  EXPECT_EQ(meta.at("config").at("layout"), "flat");
  EXPECT_EQ(json::parse(test::read_file(dir / "stdout.txt")).at("records"), 5);
}

TEST(Cli, ScanIsByteIdenticalOnRerun) {
  auto dir = test::scratch_dir();
  five_image_fixture(dir / "flat");
  ASSERT_EQ(run(dir, "scan --root flat --layout flat --out a.jsonl"), 0);
  const auto first = test::read_file(dir / "a.jsonl");
  ASSERT_EQ(run(dir, "scan --root flat --layout flat --out a.jsonl"), 0);
  EXPECT_EQ(test::read_file(dir / "a.jsonl"), first);
}

TEST(Cli, ErrorClassesMapToExitCodes) {
  auto dir = test::scratch_dir();
  EXPECT_EQ(run(dir, "scan --root missing --layout flat --out m.jsonl"), 2);
  EXPECT_NE(test::read_file(dir / "stderr.txt").find("missing"), std::string::npos);
  fs::create_directories(dir / "empty" / "real");
  EXPECT_EQ(run(dir, "scan --root empty --layout flat --out m.jsonl"), 2);
  EXPECT_EQ(run(dir, "scan --root empty --layout nonsense --out m.jsonl"), 1);
  EXPECT_EQ(run(dir, "train --backend pretrained --manifest m.jsonl --captions c.jsonl --out ck"), 1);
  EXPECT_NE(test::read_file(dir / "stderr.txt").find("Unsupported"), std::string::npos);
  EXPECT_NE(run(dir, "bogus"), 0);
}

TEST(Cli, FlagsOverrideConfigAndSnapshotIsPersisted) {
  auto dir = test::scratch_dir();
  five_image_fixture(dir / "flat");
  train::write_text(dir / "run.json", R"({"root": "flat", "layout": "flat", "train": {"alpha": 2.0, "batch_size": 2}})");
  ASSERT_EQ(run(dir, "scan --config run.json --out m.jsonl"), 0);
  ASSERT_EQ(run(dir, "caption --config run.json --manifest m.jsonl --provider fixed --out c.jsonl"), 0);
  ASSERT_EQ(run(dir, "train --config run.json --manifest m.jsonl --captions c.jsonl --alpha 3 --out ck"), 0);
  auto snap = train::read_json(dir / "ck" / "config.json");
  EXPECT_EQ(snap.at("train").at("alpha"), 3.0);
  EXPECT_EQ(snap.at("train").at("batch_size"), 2);
  EXPECT_EQ(snap.at("root"), "flat");
  EXPECT_TRUE(fs::exists(dir / "ck" / "VERSION"));
  EXPECT_EQ(line_count(dir / "ck" / "train_log.jsonl"), 2u);
}

TEST(Cli, CaptionCacheDirFromEnvironment) {
  auto dir = test::scratch_dir();
  five_image_fixture(dir / "flat");
  ASSERT_EQ(run(dir, "scan --root flat --layout flat --out m.jsonl"), 0);
  ASSERT_EQ(run(dir, "caption --manifest m.jsonl"), 1);  // no --out and no cache dir
  ::setenv("C2P_CACHE_DIR", (dir / "cache").c_str(), 1);
  const int rc = run(dir, "caption --manifest m.jsonl");
  ::unsetenv("C2P_CACHE_DIR");
  ASSERT_EQ(rc, 0);
  EXPECT_EQ(line_count(dir / "cache" / "captions.jsonl"), 5u);
}

TEST(Cli, StaleCheckpointIsVersionError) {
  auto dir = test::scratch_dir();
  fs::create_directories(dir / "ck");
  train::write_text(dir / "ck" / "checkpoint.json", R"({"format_version": 0, "tool_version": "0.0.1"})");
  EXPECT_EQ(run(dir, "merge --checkpoint ck"), 3);
  EXPECT_NE(test::read_file(dir / "stderr.txt").find("retrain"), std::string::npos);
}

TEST(Cli, WordFrequencyOfCaptionCache) {
  auto dir = test::scratch_dir();
  // caption cache whose enhanced captions reproduce the hand-counted corpus
  std::string cache;
  int i = 0;
  for (const auto& sentence : test::hand_counted_corpus()) {
    const bool fake = sentence.rfind("Deepfake, ", 0) == 0;
    const std::string caption = sentence.substr(sentence.find(", ") + 2);
    cache += json(caption::CaptionRecord{"img" + std::to_string(i++), caption, fake ? 1 : 0, "s"}).dump() + "\n";
  }
  train::write_text(dir / "c.jsonl", cache);
  ASSERT_EQ(run(dir, "analyze --which wordfreq --captions c.jsonl --top-k 50 --out wf.json"), 0);
  auto table = train::read_json(dir / "wf.json").at("table");
  std::vector<std::pair<std::string, std::size_t>> got;
  for (const auto& e : table.at("entries")) got.emplace_back(e.at("word"), e.at("count"));
  EXPECT_EQ(got, test::hand_counts());
}

TEST(Cli, ToyPipelineEndToEnd) {
  auto dir = test::scratch_dir();
  const auto t0 = std::chrono::steady_clock::now();
  ASSERT_EQ(run(dir, "synth --out data/train --n-real 1024 --n-fake 1024"), 0);
  ASSERT_EQ(run(dir, "synth --out data/test --n-real 200 --n-fake 200 --seed 1123"), 0);
  ASSERT_EQ(run(dir, "scan --root data/train --layout flat --split train --out train.jsonl"), 0);
  ASSERT_EQ(run(dir, "scan --root data/test --layout flat --out test.jsonl"), 0);
  ASSERT_EQ(run(dir, "caption --manifest train.jsonl --out caps.jsonl"), 0);
  ASSERT_EQ(run(dir, "train --manifest train.jsonl --captions caps.jsonl --batch-size 8 --out ck"), 0);
  ASSERT_EQ(run(dir, "merge --checkpoint ck"), 0);
  ASSERT_EQ(run(dir, "eval --checkpoint ck --manifest test.jsonl --out plain.json"), 0);
  ASSERT_EQ(run(dir, "eval --merged --checkpoint ck --manifest test.jsonl --out merged.json"), 0);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(seconds, 60.0);

  auto plain = train::read_json(dir / "plain.json"), merged = train::read_json(dir / "merged.json");
  EXPECT_GE(plain.at("mAcc").get<double>(), 0.95);
  EXPECT_NEAR(plain.at("mAP").get<double>(), merged.at("mAP").get<double>(), 1e-5);
  EXPECT_NEAR(plain.at("mAcc").get<double>(), merged.at("mAcc").get<double>(), 1e-5);
  for (const auto& [subset, m] : plain.at("per_subset").items())
    for (const char* key : {"ap", "acc", "balanced_acc"})
      EXPECT_NEAR(m.at(key).get<double>(), merged.at("per_subset").at(subset).at(key).get<double>(), 1e-5);

  // the snapshot alone reproduces the checkpoint bit for bit
  ASSERT_EQ(run(dir, "train --config ck/config.json --out ck2"), 0);
  for (const char* f : {"adapters.c2pt", "classifier.c2pt", "train_log.jsonl", "checkpoint.json"})
    EXPECT_EQ(test::read_file(dir / "ck" / f), test::read_file(dir / "ck2" / f)) << f;

  for (const char* which : {"clusters", "project", "logits", "wordfreq"})
    EXPECT_EQ(run(dir, std::string("analyze --which ") + which + " --checkpoint ck --manifest test.jsonl --out a.json"),
              0)
        << which;
}
