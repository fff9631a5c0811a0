#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "../support/fixtures.hpp"
#include "tracekit/pipeline.hpp"
#include "tracekit/svg.hpp"
#include "tracekit/synth.hpp"

namespace tracekit {
namespace {

constexpr int kSide = 32;

PipelineSpec spec(std::initializer_list<Stage> stages) { return {std::vector<Stage>(stages)}; }

FilterStage sobel_inv() { return {{FilterTag::sobel, FilterVariant::inverse}}; }
FilterStage canny_dir() { return {{FilterTag::canny, FilterVariant::direct}}; }

PipelineContext small_context() {
  PipelineContext ctx;
  ctx.side = kSide;
  ctx.models.set_model("default", make_model(1, kSide));
  ctx.models.set_model("sobel", make_model(2, kSide));
  return ctx;
}

std::string strip_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

TEST(Naming, Examples) {
  EXPECT_EQ(spec({AutoencodeStage{}, sobel_inv(), VectorizeStage{}}).name(), "default-dec-sobel-vect");
  EXPECT_EQ(spec({canny_dir(), AutoencodeStage{}}).name(), "canny_direct-dec");
  EXPECT_EQ(spec({VectorizeStage{}}).name(), "default-vect");
  EXPECT_EQ(spec({sobel_inv(), VectorizeStage{}}).name(), "sobel-vect");
  EXPECT_EQ(spec({FilterStage{{FilterTag::gaussian_highpass, FilterVariant::direct}}}).name(), "ghp_direct");
}

TEST(Naming, ParseFormatBijection) {
  std::vector<Stage> pool{AutoencodeStage{}, VectorizeStage{}};
  for (const auto& k : FilterKind::all()) pool.push_back(FilterStage{k});
  int checked = 0;
  // every valid one-, two- and three-stage list
  for (std::size_t a = 0; a < pool.size(); ++a)
    for (std::size_t b = 0; b <= pool.size(); ++b)
      for (std::size_t c = 0; c <= pool.size(); ++c) {
        PipelineSpec s{{pool[a]}};
        if (b < pool.size()) s.stages.push_back(pool[b]);
        if (c < pool.size()) {
          if (b == pool.size()) continue;
          s.stages.push_back(pool[c]);
        }
        try {
          s.validate();
        } catch (const Error&) {
          continue;
        }
        EXPECT_EQ(PipelineSpec::parse(s.name()), s) << s.name();
        ++checked;
      }
  EXPECT_GT(checked, 100);
}

TEST(Naming, RejectsInvalidNames) {
  for (const char* n : {"", "default", "default-sobel", "dec-vect", "vect-dec", "default-dec-dec", "sobel-bogus",
                        "default-vect-vect", "sobel--vect"})
    EXPECT_THROW(PipelineSpec::parse(n), Error) << n;
}

TEST(Naming, SpecListSkipsCommentsAndBlanks) {
  const auto specs = parse_spec_list("# pipelines\n\ndefault-dec-sobel-vect\n  sobel-dec-vect  # trailing\n");
  ASSERT_EQ(specs.size(), 2u);
  EXPECT_EQ(specs[1].name(), "sobel-dec-vect");
  EXPECT_THROW(parse_spec_list("# nothing\n"), Error);
}

TEST(Validate, StageRules) {
  EXPECT_THROW(spec({}).validate(), Error);
  EXPECT_THROW(spec({AutoencodeStage{}, AutoencodeStage{}}).validate(), Error);
  EXPECT_THROW(spec({VectorizeStage{}, sobel_inv()}).validate(), Error);
  EXPECT_NO_THROW(spec({sobel_inv(), AutoencodeStage{}, canny_dir(), VectorizeStage{}}).validate());
}

TEST(RunPipeline, VectorizeWhiteImage) {
  const auto art = run_pipeline(spec({VectorizeStage{}}), fixture::uniform(kSide, kSide, 255), small_context());
  EXPECT_EQ(art.row.path_count, 0u);
  EXPECT_EQ(art.row.ssim, 1.0);
  EXPECT_EQ(art.row.mse, 0.0);
  EXPECT_EQ(art.row.pipeline, "default-vect");
  EXPECT_EQ(complexity_stats(art.svg).path_count, 0u);
}

TEST(RunPipeline, FilterTwiceIsBitIdentical) {
  const auto ctx = small_context();
  const auto img = synth_image(3, SynthKind::scene, kSide);
  const auto a = run_pipeline(spec({sobel_inv()}), img, ctx), b = run_pipeline(spec({sobel_inv()}), img, ctx);
  ASSERT_EQ(a.intermediates.size(), b.intermediates.size());
  for (std::size_t i = 0; i < a.intermediates.size(); ++i) EXPECT_EQ(a.intermediates[i], b.intermediates[i]);
  EXPECT_EQ(a.row.ssim, b.row.ssim);
}

TEST(RunPipeline, IntermediatesAreStageLabelled) {
  const auto art = run_pipeline(spec({AutoencodeStage{}, sobel_inv(), VectorizeStage{}}),
                                synth_image(4, SynthKind::blobs, kSide), small_context(), "img");
  std::vector<std::string> labels;
  for (const auto& [l, im] : art.intermediates) labels.push_back(l);
  EXPECT_EQ(labels, (std::vector<std::string>{"input", "1-dec", "2-sobel", "3-vect"}));
  EXPECT_EQ(art.row.image, "img");
}

TEST(RunPipeline, MetricsCompareVectorizerInputWithRender) {
  const auto img = synth_image(5, SynthKind::blobs, kSide);
  const auto art = run_pipeline(spec({sobel_inv(), VectorizeStage{}}), img, small_context());
  EXPECT_EQ(art.reference, art.intermediates[1].second);
  EXPECT_EQ(art.output, art.intermediates[2].second);
  EXPECT_EQ(art.row.ssim, ssim(art.reference, art.output));
  EXPECT_EQ(art.row.mse_original, mse(img, art.output));
  EXPECT_EQ(art.row.path_count, complexity_stats(art.svg).path_count);
  EXPECT_EQ(art.row.d_chars, complexity_stats(art.svg).total_d_chars);
}

TEST(RunPipeline, WithoutVectorizeComparesLastStage) {
  const auto img = synth_image(6, SynthKind::blobs, kSide);
  const auto art = run_pipeline(spec({sobel_inv(), AutoencodeStage{}}), img, small_context());
  EXPECT_FALSE(art.doc.has_value());
  EXPECT_EQ(art.row.path_count, 0u);
  EXPECT_EQ(art.reference, art.intermediates[1].second);
  EXPECT_EQ(art.output, art.intermediates[2].second);
}

TEST(RunPipeline, AutoencoderUsesModelOfItsInputDomain) {
  const auto img = synth_image(7, SynthKind::blobs, kSide);
  const auto ctx = small_context();
  const auto art = run_pipeline(spec({sobel_inv(), AutoencodeStage{}}), img, ctx);
  EXPECT_EQ(art.output, forward(*ctx.models.get("sobel"), art.reference).image);
  EXPECT_NE(art.output, forward(*ctx.models.get("default"), art.reference).image);
}

TEST(RunPipeline, MissingModelNamesTheStage) {
  const auto img = synth_image(8, SynthKind::blobs, kSide);
  try {
    run_pipeline(spec({canny_dir(), AutoencodeStage{}}), img, small_context());
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("stage 2 (dec)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("canny_direct"), std::string::npos) << msg;
  }
}

class BatchTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fixture::temp_dir(std::string("batch_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    corpus = dir / "corpus";
    write_corpus(corpus, synth_corpus(5, 20, SynthKind::scene, 48));
  }
  BatchConfig config() const {
    BatchConfig c;
    c.corpus = corpus;
    c.specs = {PipelineSpec::parse("default-vect"), PipelineSpec::parse("default-dec-sobel-vect")};
    c.sample_n = 5;
    c.seed = 9;
    c.threads = 2;
    return c;
  }
  std::filesystem::path dir, corpus;
};

TEST_F(BatchTest, CartesianRows) {
  const auto rep = run_batch(config(), small_context());
  EXPECT_EQ(rep.rows.size(), 10u);
  EXPECT_EQ(rep.warnings, 0u);
  ASSERT_EQ(rep.summaries.size(), 2u);
  EXPECT_EQ(rep.summaries[0].ssim.n, 5u);
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    EXPECT_LT(std::tie(rep.rows[i - 1].image, rep.rows[i - 1].pipeline), std::tie(rep.rows[i].image, rep.rows[i].pipeline));
}

TEST_F(BatchTest, DeterministicExceptTiming) {
  auto c = config();
  c.out_dir = dir / "a";
  run_batch(c, small_context());
  c.out_dir = dir / "b";
  c.threads = 1;
  run_batch(c, small_context());
  const auto a = read_text_file(dir / "a" / "report.csv"), b = read_text_file(dir / "b" / "report.csv");
  EXPECT_EQ(strip_timing(a), strip_timing(b));
  EXPECT_EQ(read_text_file(dir / "a" / "default-dec-sobel-vect" / "img_0002.svg"),
            read_text_file(dir / "b" / "default-dec-sobel-vect" / "img_0002.svg"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "default-dec-sobel-vect" / "img_0002.1-dec.pgm"));
}

TEST_F(BatchTest, SampleOrderDependsOnSeed) {
  const auto files = list_corpus(corpus);
  ASSERT_EQ(files.size(), 5u);
  EXPECT_EQ(sample_corpus(files, 3, 4), sample_corpus(files, 3, 4));
  EXPECT_EQ(sample_corpus(files, 3, 4).size(), 3u);
  bool differs = false;
  for (std::uint64_t s = 5; s < 15; ++s) differs |= sample_corpus(files, 5, s) != sample_corpus(files, 5, 4);
  EXPECT_TRUE(differs);
}

TEST_F(BatchTest, OversizedSampleUsesWholeCorpusWithWarning) {
  auto c = config();
  c.sample_n = 50;
  const auto rep = run_batch(c, small_context());
  EXPECT_EQ(rep.rows.size(), 10u);
  EXPECT_EQ(rep.warnings, 1u);
}

TEST_F(BatchTest, UnreadableImagesAreSkipped) {
  std::ofstream(corpus / "broken.pgm") << "P5 garbage";
  auto c = config();
  c.sample_n = 6;
  const auto rep = run_batch(c, small_context());
  EXPECT_EQ(rep.rows.size(), 10u);
  EXPECT_EQ(rep.warnings, 1u);
}

TEST_F(BatchTest, EmptyCorpusIsAnError) {
  auto c = config();
  c.corpus = dir / "empty";
  std::filesystem::create_directories(c.corpus);
  EXPECT_THROW(run_batch(c, small_context()), Error);
}

TEST_F(BatchTest, CsvRoundTripAndHeader) {
  auto c = config();
  const auto rep = run_batch(c, small_context());
  const auto csv = report_csv(rep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "image,pipeline,path_count,d_chars,mse,ssim,ms");
  const auto back = read_report_csv(csv);
  ASSERT_EQ(back.rows.size(), rep.rows.size());
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].path_count, rep.rows[i].path_count);
    EXPECT_NEAR(back.rows[i].ssim, rep.rows[i].ssim, 1e-9);
  }
  EXPECT_EQ(report_csv(back), csv);
  const auto wide = report_csv(rep, true);
  EXPECT_EQ(wide.substr(0, wide.find('\n')), "image,pipeline,path_count,d_chars,mse,ssim,ms,mse_original,ssim_original");
  EXPECT_EQ(report_csv(read_report_csv(wide), true), wide);
}

MetricsRow row(std::string img, std::string pipe, double ssim_v, std::size_t paths) {
  MetricsRow r;
  r.image = std::move(img);
  r.pipeline = std::move(pipe);
  r.ssim = ssim_v;
  r.path_count = paths;
  return r;
}

TEST(Report, SinglePipelineGivesOneBoxRow) {
  RunReport rep;
  rep.rows = {row("a", "sobel_direct-vect", 0.202 - 0.044, 3), row("b", "sobel_direct-vect", 0.202 + 0.044, 5)};
  rep.summaries = summarize_rows(rep.rows);
  EXPECT_EQ(boxplot_csv(rep, false),
            "pipeline,n,mean,std,min,q1,median,q3,max\n"
            "sobel_direct-vect,2,0.202000,0.044000,0.158000,0.180000,0.202000,0.224000,0.246000\n");
}

TEST(Report, IdenticalRowsGiveIdenticalSummaries) {
  RunReport rep;
  for (const char* p : {"x-vect", "y-vect"})
    for (int i = 0; i < 4; ++i) rep.rows.push_back(row("i" + std::to_string(i), p, 0.1 * i, i));
  const auto s = summarize_rows(rep.rows);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].ssim, s[1].ssim);
  EXPECT_EQ(s[0].log_path_count, s[1].log_path_count);
  EXPECT_NEAR(s[0].log_path_count.max, std::log10(4.0), 1e-12);
}

TEST(Report, RankingByMeanSsim) {
  RunReport rep;
  rep.rows = {row("a", "low-vect", 0.2, 1), row("a", "high-vect", 0.9, 1), row("a", "mid-vect", 0.5, 1)};
  rep.summaries = summarize_rows(rep.rows);
  const auto csv = ranking_csv(rep);
  EXPECT_NE(csv.find("1,high-vect"), std::string::npos) << csv;
  EXPECT_NE(csv.find("2,mid-vect"), std::string::npos);
  EXPECT_NE(csv.find("3,low-vect"), std::string::npos);
  const auto dir = fixture::temp_dir("ranking");
  EXPECT_EQ(compare_report(rep, dir).size(), 3u);
  EXPECT_EQ(read_text_file(dir / "ranking.csv"), csv);
}

TEST(Config, ParsesAndApplies) {
  const auto cfg = parse_config("# tuning\ntrace.turdsize = 5\ntrace.opticurve=false\ncanny.low=20\n"
                                "ssim.window=9\nmodel.sobel=/tmp/s.tkae\n");
  PipelineContext ctx;
  apply_config(cfg, ctx);
  EXPECT_EQ(ctx.trace.turdsize, 5);
  EXPECT_FALSE(ctx.trace.opticurve);
  EXPECT_EQ(ctx.filter.canny_low, 20);
  EXPECT_EQ(ctx.ssim.window, 9);
  EXPECT_TRUE(ctx.models.has("sobel"));
}

TEST(Config, Errors) {
  PipelineContext ctx;
  EXPECT_THROW(parse_config("no equals sign\n"), Error);
  EXPECT_THROW(apply_config(parse_config("bogus.key=1"), ctx), Error);
  EXPECT_THROW(apply_config(parse_config("trace.turdsize=abc"), ctx), Error);
  EXPECT_THROW(apply_config(parse_config("ssim.window=4"), ctx), Error);
  EXPECT_THROW(apply_config(parse_config("model.nonsense=/x"), ctx), Error);
}

TEST(Config, EnvironmentProvidesDefaultModel) {
  const auto dir = fixture::temp_dir("env_model");
  save_model(make_model(3, kSide), dir / "m.tkae");
  ::setenv("TRACEKIT_MODEL", (dir / "m.tkae").c_str(), 1);
  PipelineContext ctx;
  apply_environment(ctx);
  ::unsetenv("TRACEKIT_MODEL");
  ASSERT_TRUE(ctx.models.has("default"));
  EXPECT_EQ(encode_model(*ctx.models.get("default")), encode_model(make_model(3, kSide)));
}

}  // namespace
}  // namespace tracekit
