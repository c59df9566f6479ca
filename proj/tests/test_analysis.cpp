#include <gtest/gtest.h>

#include "c2p/c2p.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace c2p;
using namespace c2p::analysis;
using nn::Matrix;
using nn::RowVector;

namespace {
RowVector row(std::initializer_list<double> xs) {
  RowVector r(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) r(i++) = x;
  return r;
}

double pairwise_distance_gap(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.rows(); ++j)
      worst = std::max(worst, std::abs((a.row(i) - a.row(j)).norm() - (b.row(i) - b.row(j)).norm()));
  return worst;
}
}  // namespace

TEST(DetectionFeature, WorkedExample) {
  RowVector f = detection_vector(row({1.0, 2.0}), row({0.5, -1.0}), 0.1);
  EXPECT_NEAR(f(0), 0.6, 1e-15);
  EXPECT_NEAR(f(1), -1.9, 1e-15);
}

TEST(DetectionFeature, IdentityHeadReturnsFeature) {
  RowVector v = row({0.3, -4.0, 2.5});
  EXPECT_EQ(detection_vector(v, RowVector::Ones(3), 0.0), v);
  EXPECT_THROW(detection_vector(v, RowVector::Ones(2), 0.0), Error);
}

TEST(DetectionFeature, SumRecoversLogit) {
  Rng rng(12);
  train::LinearClassifier head(9);
  for (auto& [_, p] : head.parameters()) p.value = nn::random_normal(rng, p.value.rows(), p.value.cols(), 1.0);
  for (int i = 0; i < 20; ++i) {
    RowVector v = nn::random_normal(rng, 1, 9, 2.0).row(0);
    auto df = detection_feature(v, head, "img", 1);
    EXPECT_NEAR(logit_from_detection(df.vector, head.bias()), head.logit(v), 1e-12);
  }
}

TEST(StubDecoder, DeterministicAndPrefixed) {
  StubFeatureDecoder dec(16, 5);
  Rng rng(1);
  RowVector f = nn::random_normal(rng, 1, 16, 1.0).row(0);
  const auto text = decode_feature_to_text(f, dec);
  EXPECT_EQ(text, decode_feature_to_text(f, StubFeatureDecoder(16, 5)));
  EXPECT_EQ(text.rfind("a picture of ", 0), 0u);
  EXPECT_EQ(decode_feature_to_text(RowVector::Zero(16), dec), "a picture of nothing");
}

TEST(StubDecoder, OutputDependsOnScale) {
  StubFeatureDecoder dec(16, 5);
  Rng rng(2);
  int differing = 0;
  for (int i = 0; i < 10; ++i) {
    RowVector f = nn::random_normal(rng, 1, 16, 1.0).row(0);
    f *= dec.expected_norm() / f.norm();
    if (dec.decode(f) != dec.decode(f * 25.0)) ++differing;
  }
  EXPECT_GT(differing, 0);
}

TEST(StubDecoder, FailuresAreDecodeErrors) {
  StubFeatureDecoder dec(16);
  try {
    decode_feature_to_text(RowVector::Zero(4), dec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DecodeError);
  }
  ExternalCommandDecoder failing("false", test::scratch_dir());
  EXPECT_THROW(decode_feature_to_text(row({1.0}), failing), Error);
}

TEST(ExternalDecoder, ReadsCommandOutput) {
  auto dir = test::scratch_dir();
  const auto script = dir / "decode.sh";
  test::write_bytes(script, "#!/bin/sh\nprintf 'a picture of %s\\n' \"$(wc -c < \"$1\" | tr -d ' ')\"\n");
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);
  ExternalCommandDecoder dec(script.string(), dir);
  // [1,2] serializes as 9 bytes
  EXPECT_EQ(decode_feature_to_text(row({1.0, 2.0}), dec), "a picture of 9");
}

TEST(WordFrequency, EmptyCorpus) {
  auto t = word_frequency({});
  EXPECT_TRUE(t.entries.empty());
  EXPECT_EQ(t.total_tokens, 0u);
  EXPECT_EQ(t.corpus_size, 0u);
}

TEST(WordFrequency, SmallExample) {
  auto t = word_frequency({"a cat and a dog", "the cat"});
  ASSERT_EQ(t.entries.size(), 2u);
  EXPECT_EQ(t.entries[0], (std::pair<std::string, std::size_t>{"cat", 2}));
  EXPECT_EQ(t.entries[1], (std::pair<std::string, std::size_t>{"dog", 1}));
}

TEST(WordFrequency, TiesBreakAlphabetically) {
  auto t = word_frequency({"zebra apple mango", "mango zebra apple"});
  ASSERT_EQ(t.entries.size(), 3u);
  EXPECT_EQ(t.entries[0].first, "apple");
  EXPECT_EQ(t.entries[1].first, "mango");
  EXPECT_EQ(t.entries[2].first, "zebra");
}

TEST(WordFrequency, MatchesHandCounts) {
  auto t = word_frequency(test::hand_counted_corpus(), 50);
  EXPECT_EQ(t.entries, test::hand_counts());
  EXPECT_EQ(t.total_tokens, 30u);
  EXPECT_EQ(t.corpus_size, 10u);
  std::size_t sum = 0;
  for (const auto& e : t.entries) sum += e.second;
  EXPECT_EQ(sum, t.total_tokens);
  auto top3 = word_frequency(test::hand_counted_corpus(), 3);
  ASSERT_EQ(top3.entries.size(), 3u);
  EXPECT_EQ(top3.entries[2].first, "dog");
  EXPECT_EQ(top3.total_tokens, 30u);
  nlohmann::json j = top3;
  EXPECT_EQ(j["stop_words"], kStopWordsVersion);
}

TEST(KMeans, OnePointPerCluster) {
  Matrix x(3, 2);
  x << 0, 0, 5, 5, -3, 1;
  auto r = kmeans(x, 3, 1);
  EXPECT_NEAR(r.objective.back(), 0.0, 1e-15);
  std::set<int> used(r.assignments.begin(), r.assignments.end());
  EXPECT_EQ(used.size(), 3u);
}

TEST(KMeans, RecoversBlobCenters) {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto blobs = test::gaussian_blobs(seed);
    auto r = kmeans(blobs.points, 3, seed);
    EXPECT_TRUE(r.converged);
    EXPECT_LT(test::worst_center_error(blobs.centers, r.centers), blobs.sigma);
  }
}

TEST(KMeans, ObjectiveNeverIncreases) {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = nn::random_normal(rng, 200, 4, 1.0);
    auto r = kmeans(x, 5, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 1; i < r.objective.size(); ++i) EXPECT_LE(r.objective[i], r.objective[i - 1] * (1 + 1e-12));
  }
}

TEST(KMeans, DeterministicAndValidated) {
  auto blobs = test::gaussian_blobs(4);
  auto a = kmeans(blobs.points, 3, 7), b = kmeans(blobs.points, 3, 7);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.centers, b.centers);
  try {
    kmeans(Matrix::Zero(2, 2), 3, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(Projection, TwoDimensionalInputIsRigidlyMoved) {
  Rng rng(5);
  Matrix x = nn::random_normal(rng, 30, 2, 3.0);
  auto y = project_2d(x, *make_projection("pca"), 0);
  EXPECT_LT(pairwise_distance_gap(x, y), 1e-9);
}

TEST(Projection, RankTwoDataIsIsometric) {
  Rng rng(6);
  Matrix basis = nn::random_normal(rng, 32, 2, 1.0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(32, 2);
  Matrix coords = nn::random_normal(rng, 40, 2, 2.0);
  Matrix x = coords * q.transpose();
  x.rowwise() += nn::random_normal(rng, 1, 32, 5.0).row(0);
  auto y = project_2d(x, PcaProjection{}, 0);
  EXPECT_EQ(y.cols(), 2);
  EXPECT_LT(pairwise_distance_gap(x, y), 1e-6);
}

TEST(Projection, DeterministicAndValidated) {
  Rng rng(7);
  Matrix x = nn::random_normal(rng, 25, 8, 1.0);
  EXPECT_EQ(project_2d(x, PcaProjection{}, 1), project_2d(x, PcaProjection{}, 2));
  EXPECT_THROW(project_2d(Matrix::Zero(1, 4), PcaProjection{}, 0), Error);
  EXPECT_THROW(make_projection("tsne"), Error);
}
