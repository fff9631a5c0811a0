#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <regex>
#include <string>

#include "../support/fixtures.hpp"
#include "tracekit/autoencoder.hpp"
#include "tracekit/svg.hpp"
#include "tracekit/synth.hpp"

namespace tracekit {
namespace {

struct Result {
  int status;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(TRACEKIT_CLI_PATH) + " " + args + " 2>&1";
  FILE* f = ::popen(cmd.c_str(), "r");
  if (!f) throw std::runtime_error("popen failed");
  std::string out;
  std::array<char, 4096> buf;
  while (auto n = std::fread(buf.data(), 1, buf.size(), f)) out.append(buf.data(), n);
  const int st = ::pclose(f);
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir = fixture::temp_dir(std::string("cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name()); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
  std::filesystem::path dir;
};

TEST_F(Cli, MetricsPrintsBothValues) {
  save_pgm(fixture::uniform(16, 16, 100), p("a.pgm"));
  save_pgm(fixture::uniform(16, 16, 110), p("b.pgm"));
  const auto r = run("metrics " + p("a.pgm") + " " + p("b.pgm") + " --ssim-window 5");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(std::regex_search(r.out, std::regex("^mse=100(\\.0+)? ssim=0\\.99"))) << r.out;
}

TEST_F(Cli, TraceAndRasterize) {
  save_pgm(fixture::disk(64, 32, 32, 20), p("disk.pgm"));
  auto r = run("trace --turdsize 2 --alphamax 1 " + p("disk.pgm") + " " + p("disk.svg"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(complexity_stats(read_text_file(dir / "disk.svg")).path_count, 1u);
  r = run("rasterize " + p("disk.svg") + " --size 64x64 " + p("back.pgm"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto back = load_image(dir / "back.pgm");
  EXPECT_EQ(back.width(), 64);
  EXPECT_EQ(back.at(32, 32), 0);
  EXPECT_EQ(back.at(2, 2), 255);
}

TEST_F(Cli, FilterVariants) {
  save_pgm(fixture::vertical_step(16, 16, 0, 255), p("step.pgm"));
  ASSERT_EQ(run("filter --kind sobel --variant inverse " + p("step.pgm") + " " + p("s.pgm")).status, 0);
  EXPECT_EQ(load_image(dir / "s.pgm").at(2, 8), 255);
  ASSERT_EQ(run("filter --kind canny --variant direct --low 20 --high 60 --sigma 1.0 " + p("step.pgm") + " " + p("c.pgm")).status, 0);
  EXPECT_EQ(load_image(dir / "c.pgm").at(2, 8), 0);
  const auto bad = run("filter --kind laplace --variant direct " + p("step.pgm") + " " + p("x.pgm"));
  EXPECT_NE(bad.status, 0);
}

TEST_F(Cli, TrainThenAutoencode) {
  write_corpus(dir / "data", synth_corpus(3, 1, SynthKind::blobs, 32));
  auto r = run("train --data " + p("data") + " --epochs 2 --seed 5 --batch 2 --out " + p("m.tkae"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("epoch 2 loss="), std::string::npos) << r.out;
  r = run("autoencode --model " + p("m.tkae") + " " + p("data/img_0000.pgm") + " " + p("rec.pgm"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(load_image(dir / "rec.pgm").width(), 256);  // corpus images are prepared to the model side
}

TEST_F(Cli, PipelineRunAndReport) {
  write_corpus(dir / "data", synth_corpus(4, 1, SynthKind::scene, 64));
  write_text_file(dir / "specs.txt", "default-vect\nsobel-vect\n");
  auto r = run("pipeline run --specs " + p("specs.txt") + " --data " + p("data") + " --n 3 --seed 2 --out " + p("out"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto csv = read_text_file(dir / "out" / "report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 6);
  r = run("pipeline report --in " + p("out/report.csv") + " --out " + p("plots"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "plots" / "ranking.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "plots" / "boxplot_log_paths.csv"));
}

TEST_F(Cli, ErrorsGoToStderrWithNonzeroStatus) {
  const auto r = run("metrics /nonexistent/a.pgm /nonexistent/b.pgm");
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.out.rfind("tracekit: ", 0), 0u) << r.out;
  EXPECT_NE(run("pipeline run --specs /nonexistent --data /nonexistent --out " + p("o")).status, 0);
}

}  // namespace
}  // namespace tracekit
