#include <gtest/gtest.h>

#include "memsam/error.hpp"
#include "memsam/mock_backend.hpp"
#include "memsam/pipeline.hpp"
#include "support/test_support.hpp"

namespace memsam {
namespace {

using testing::TempDir;

// Extracts like the mock backend but never returns a mask.
class BrokenSegmenter final : public Backend {
 public:
  FeatureGrid extract_features(const std::filesystem::path& image) const override {
    return mock_.extract_features(image);
  }
  std::vector<ScoredMask> segment(const std::filesystem::path&,
                                  const PromptSet&) const override {
    throw Error(ErrorCode::BackendError, "segmenter offline");
  }
  nlohmann::json describe() const override { return {{"kind", "broken"}}; }

 private:
  MockBackend mock_;
};

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    write_synth_dataset(synth_dataset(12, 21, SynthFamily::Simple), dir_->path());
    write_synth_dataset(synth_dataset(6, 99, SynthFamily::Adversarial), *dir_ / "adv");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  void SetUp() override {
    samples = scan_dataset(dir_->path());
    support.assign(samples.begin(), samples.begin() + 8);
    queries.assign(samples.begin() + 8, samples.end());
    bank = build_bank_from_samples(support, backend, 2);
  }

  static TempDir* dir_;
  MockBackend backend;
  std::vector<Sample> samples, support, queries;
  MemoryBank bank;
};

TempDir* PipelineTest::dir_ = nullptr;

TEST_F(PipelineTest, SelfQueryIsNearPerfect) {
  const MemoryBank all = build_bank_from_samples(samples, backend);
  const EvalReport r = run_pipeline(samples, all, backend, {});
  ASSERT_EQ(r.per_image.size(), samples.size());
  for (const auto& img : r.per_image) {
    EXPECT_FALSE(img.failed) << img.id << ": " << img.failure;
    EXPECT_EQ(img.exemplar_id, img.id);
    EXPECT_NEAR(img.retrieval_similarity, 1.0, 1e-6);
  }
  EXPECT_GE(r.aggregate.miou, 0.95);
}

TEST_F(PipelineTest, SingletonBankRetrievesIt) {
  const std::size_t first = 0;
  const MemoryBank one = bank.subset(std::span(&first, 1));
  const EvalReport r = run_pipeline(queries, one, backend, {});
  for (const auto& img : r.per_image) {
    if (!img.failed) EXPECT_EQ(img.exemplar_id, one.entry(0).id);
  }
}

TEST_F(PipelineTest, AnalysisIsConsistent) {
  const QueryAnalysis a = analyze_query(queries[0].image, bank, backend, {});
  EXPECT_EQ(a.exemplar_id, bank.entry(a.hit.entry).id);
  EXPECT_EQ(a.features.dim(), kMockFeatureDim);
  for (const auto& c : a.matches.fg) EXPECT_GE(c.similarity, 0.9);
  for (const auto& c : a.matches.bg) EXPECT_GE(c.similarity, 0.9);
}

TEST_F(PipelineTest, FailuresAreRecordedAndRunContinues) {
  const BrokenSegmenter broken;
  const EvalReport r = run_pipeline(queries, bank, broken, {});
  ASSERT_EQ(r.per_image.size(), queries.size());
  for (const auto& img : r.per_image) {
    EXPECT_TRUE(img.failed);
    EXPECT_NE(img.failure.find("segmenter offline"), std::string::npos);
    EXPECT_DOUBLE_EQ(img.scores.miou, 0.0);
  }
  EXPECT_EQ(r.aggregate.failures, queries.size());
  EXPECT_DOUBLE_EQ(r.aggregate.miou, 0.0);
}

TEST_F(PipelineTest, EmptyBankIsFatal) {
  EXPECT_MEMSAM_ERROR(run_pipeline(queries, MemoryBank(), backend, {}), ErrorCode::EmptyBank);
}

TEST_F(PipelineTest, AggregateIsMeanOfPerImage) {
  const EvalReport r = run_pipeline(queries, bank, backend, {});
  double miou = 0, mpa = 0, acc = 0;
  for (const auto& img : r.per_image) {
    miou += img.scores.miou;
    mpa += img.scores.mpa;
    acc += img.scores.acc;
  }
  const double n = static_cast<double>(r.per_image.size());
  EXPECT_NEAR(r.aggregate.miou, miou / n, 1e-12);
  EXPECT_NEAR(r.aggregate.mpa, mpa / n, 1e-12);
  EXPECT_NEAR(r.aggregate.acc, acc / n, 1e-12);
  EXPECT_EQ(r.aggregate.images, queries.size());
}

TEST(Aggregate, HandBuilt) {
  std::vector<ImageResult> rs(3);
  rs[0].scores.miou = 1.0;
  rs[1].scores.miou = 0.5;
  rs[2].failed = true;
  rs[1].leak_points = 2;
  const Aggregate a = aggregate_results(rs);
  EXPECT_DOUBLE_EQ(a.miou, 0.5);
  EXPECT_EQ(a.failures, 1u);
  EXPECT_EQ(a.leaks, 1u);
  EXPECT_EQ(a.images, 3u);
  EXPECT_EQ(aggregate_results({}).images, 0u);
}

TEST_F(PipelineTest, QueryOrderAndThreadCountDoNotMatter) {
  PipelineConfig one;
  PipelineConfig three;
  three.jobs = 3;
  auto reversed = queries;
  std::reverse(reversed.begin(), reversed.end());
  const auto a = to_json(run_pipeline(queries, bank, backend, one));
  const auto b = to_json(run_pipeline(reversed, bank, backend, three));
  EXPECT_EQ(a.at("per_image"), b.at("per_image"));
  EXPECT_EQ(a.at("aggregate"), b.at("aggregate"));
}

TEST_F(PipelineTest, NoBackgroundModeWarns) {
  const QueryAnalysis a = analyze_query(queries[0].image, bank, backend, {});
  PromptPolicy none;
  none.bg_mode = BgMode::none();
  const PromptOutcome out = make_prompts(a.matches, none);
  EXPECT_EQ(out.prompts.size(), 1u);
  ASSERT_TRUE(out.warning.has_value());
  EXPECT_NE(out.warning->find("background"), std::string::npos);
  const PromptOutcome all = make_prompts(a.matches, {});
  EXPECT_EQ(all.prompts.size(), 1 + all.would_be_bg.size());
  EXPECT_EQ(out.would_be_bg, all.would_be_bg);
}

TEST_F(PipelineTest, StrictThresholdGivesNoForeground) {
  const QueryAnalysis a = analyze_query(queries[0].image, bank, backend, {1.0, 1.0});
  if (a.matches.fg.empty()) {
    EXPECT_MEMSAM_ERROR(make_prompts(a.matches, {}), ErrorCode::NoForeground);
  }
}

TEST_F(PipelineTest, BgAblationMemoMatchesFreshRuns) {
  const auto adv = scan_dataset(*dir_ / "adv");
  const std::vector<Sample> adv_support(adv.begin(), adv.begin() + 1);
  const std::vector<Sample> adv_queries(adv.begin() + 1, adv.end());
  const MemoryBank adv_bank = build_bank_from_samples(adv_support, backend);
  const std::vector<BgMode> modes{BgMode::none(), BgMode::top_n(5), BgMode::all()};
  const auto memo = ablate_bg(adv_queries, adv_bank, backend, modes, {}, true);
  const auto fresh = ablate_bg(adv_queries, adv_bank, backend, modes, {}, false);
  ASSERT_EQ(memo.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(memo[k].mode, modes[k]);
    EXPECT_EQ(to_json(memo[k].report), to_json(fresh[k].report));
  }
  for (const auto& img : memo[0].report.per_image) EXPECT_EQ(img.bg_prompts, 0u);
  for (std::size_t q = 0; q < memo[1].report.per_image.size(); ++q) {
    EXPECT_LE(memo[1].report.per_image[q].bg_prompts, 5u);
    EXPECT_LE(memo[1].report.per_image[q].bg_prompts, memo[2].report.per_image[q].bg_prompts);
  }
}

TEST(SamplePool, NestedAndDeterministic) {
  const auto p1 = sample_pool(20, 1, 42);
  const auto p10 = sample_pool(20, 10, 42);
  const auto p20 = sample_pool(20, 20, 42);
  EXPECT_EQ(p10, sample_pool(20, 10, 42));
  EXPECT_TRUE(std::equal(p1.begin(), p1.end(), p10.begin()));
  EXPECT_TRUE(std::equal(p10.begin(), p10.end(), p20.begin()));
  auto sorted = p20;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(sorted[k], k);
  EXPECT_NE(sample_pool(20, 10, 43), p10);
  EXPECT_MEMSAM_ERROR(sample_pool(20, 21, 42), ErrorCode::ConfigError);
  EXPECT_MEMSAM_ERROR(sample_pool(20, 0, 42), ErrorCode::ConfigError);
}

TEST_F(PipelineTest, MemoryAblationRows) {
  const auto rows = ablate_memory(queries, bank, backend, {1, 4, 8}, 42, {});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].pool_size, 1u);
  EXPECT_EQ(rows[2].pool_ids.size(), 8u);
  EXPECT_TRUE(std::equal(rows[0].pool_ids.begin(), rows[0].pool_ids.end(),
                         rows[1].pool_ids.begin()));
  for (const auto& row : rows) {
    EXPECT_EQ(row.report.per_image.size(), queries.size());
    EXPECT_EQ(row.report.config.at("pool_size"), row.pool_size);
    for (const auto& img : row.report.per_image) {
      if (img.failed) continue;
      EXPECT_NE(std::find(row.pool_ids.begin(), row.pool_ids.end(), img.exemplar_id),
                row.pool_ids.end());
    }
  }
  EXPECT_MEMSAM_ERROR(ablate_memory(queries, bank, backend, {1, 9}, 42, {}),
                      ErrorCode::ConfigError);
}

TEST_F(PipelineTest, ReportRendering) {
  const EvalReport r = run_pipeline(queries, bank, backend, {});
  const auto j = to_json(r);
  ASSERT_EQ(j.at("per_image").size(), queries.size());
  const auto& first = j.at("per_image")[0];
  for (const char* key : {"id", "iou_fg", "iou_bg", "miou", "mpa", "acc", "failed",
                          "exemplar_id", "retrieval_similarity", "bg_prompts", "leak_points"}) {
    EXPECT_TRUE(first.contains(key)) << key;
  }
  EXPECT_EQ(j.at("aggregate").at("images"), queries.size());
  EXPECT_EQ(j.at("config").at("tau_fg"), 0.9);
  EXPECT_EQ(j.at("config").at("bg_mode"), "all");

  const std::string table = render_table(r);
  EXPECT_NE(table.find("mIoU"), std::string::npos);
  EXPECT_NE(table.find(queries[0].id), std::string::npos);
  EXPECT_NE(table.find("mean over 4 images"), std::string::npos);

  const std::string cmp = render_comparison("bg", {{"5", r.aggregate}, {"all", r.aggregate}});
  EXPECT_NE(cmp.find("all"), std::string::npos);
  EXPECT_EQ(std::count(cmp.begin(), cmp.end(), '\n'), 3);
}

}  // namespace
}  // namespace memsam
