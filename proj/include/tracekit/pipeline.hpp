#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tracekit/autoencoder.hpp"
#include "tracekit/filters.hpp"
#include "tracekit/metrics.hpp"
#include "tracekit/tracer.hpp"

namespace tracekit {

struct AutoencodeStage {
  bool operator==(const AutoencodeStage&) const = default;
};
struct FilterStage {
  FilterKind kind;
  bool operator==(const FilterStage&) const = default;
};
struct VectorizeStage {
  bool operator==(const VectorizeStage&) const = default;
};
using Stage = std::variant<AutoencodeStage, FilterStage, VectorizeStage>;

/// Ordered stage list. Names join stage tokens with '-': "dec" for the
/// autoencoder, the filter token, "vect"; names not starting with a filter
/// start with "default" (the unfiltered input), e.g. "default-dec-sobel-vect",
/// "canny-dec".
struct PipelineSpec {
  std::vector<Stage> stages;

  std::string name() const;
  static PipelineSpec parse(std::string_view name);
  /// At most one autoencode stage; vectorize only last; nonempty.
  void validate() const;
  bool has_vectorize() const;
  bool operator==(const PipelineSpec&) const = default;
};

std::string stage_token(const Stage& s);

/// One spec name per line; blank lines and '#' comments ignored.
std::vector<PipelineSpec> parse_spec_list(std::string_view text);

/// Autoencoder models keyed by the domain they were trained on: "default"
/// for unfiltered images or a filter token ("sobel", "canny_direct", ...).
/// An autoencode stage uses the model of the image domain it receives.
class ModelSet {
 public:
  ModelSet() = default;
  ModelSet(const ModelSet& other);
  ModelSet& operator=(const ModelSet& other);

  void set_path(const std::string& domain, std::filesystem::path path);
  void set_model(const std::string& domain, AeModel model);
  bool has(const std::string& domain) const;
  /// Loads on first use; thread-safe.
  std::shared_ptr<const AeModel> get(const std::string& domain) const;
  std::vector<std::string> domains() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::filesystem::path> paths_;
  mutable std::map<std::string, std::shared_ptr<const AeModel>> loaded_;
};

struct PipelineContext {
  ModelSet models;
  FilterParams filter;
  TraceParams trace;
  SsimParams ssim;
  double flatten_tolerance = 0.25;
  int side = 256;
};

struct MetricsRow {
  std::string image;
  std::string pipeline;
  std::size_t path_count = 0;
  std::size_t d_chars = 0;
  double mse = 0;
  double ssim = 0;
  double ms = 0;
  // against the prepared original image
  double mse_original = 0;
  double ssim_original = 0;
};

struct PipelineArtifacts {
  /// (stage-suffixed label, image) in stage order, starting with "input".
  std::vector<std::pair<std::string, GrayImage>> intermediates;
  std::optional<VectorDoc> doc;
  std::string svg;
  /// Reference and output compared for the row: the vectorizer's input and
  /// the rendered vector, or the last stage's input and output without one.
  GrayImage reference;
  GrayImage output;
  MetricsRow row;
};

/// `img` must already be side x side grayscale.
PipelineArtifacts run_pipeline(const PipelineSpec& spec, const GrayImage& img, const PipelineContext& ctx,
                               const std::string& image_id = "image");

struct PipelineSummary {
  std::string pipeline;
  Summary ssim, mse, path_count, log_path_count;
};

struct RunReport {
  std::vector<MetricsRow> rows;  // ordered by (image, pipeline)
  std::vector<PipelineSummary> summaries;  // ordered by pipeline name
  std::size_t warnings = 0;
  std::vector<std::string> messages;
};

struct BatchConfig {
  std::filesystem::path corpus;
  std::vector<PipelineSpec> specs;
  int sample_n = 50;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> out_dir;  // CSV, SVGs and intermediates
  bool write_intermediates = true;
  bool original_columns = false;
  int threads = 0;  // 0: hardware concurrency
};

/// Image files (png, pgm, pnm, ppm) directly inside `dir`, sorted by name.
std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir);

/// Seeded shuffle of the sorted corpus, truncated to n.
std::vector<std::filesystem::path> sample_corpus(const std::vector<std::filesystem::path>& files, int n,
                                                 std::uint64_t seed);

RunReport run_batch(const BatchConfig& config, const PipelineContext& ctx);

std::vector<PipelineSummary> summarize_rows(const std::vector<MetricsRow>& rows);

std::string report_csv(const RunReport& report, bool original_columns = false);
RunReport read_report_csv(std::string_view csv);

/// Writes boxplot_ssim.csv, boxplot_log_paths.csv and ranking.csv; returns their paths.
std::vector<std::filesystem::path> compare_report(const RunReport& report, const std::filesystem::path& out_dir);
std::string boxplot_csv(const RunReport& report, bool log_paths);
std::string ranking_csv(const RunReport& report);

/// key=value lines, '#' comments.
std::map<std::string, std::string> parse_config(std::string_view text);
/// Recognised keys: model.<domain>, trace.*, canny.*, ghp.sigma, ssim.window,
/// ssim.weighting, flatten.tolerance. Unknown keys are an error.
void apply_config(const std::map<std::string, std::string>& cfg, PipelineContext& ctx);
/// Registers $TRACEKIT_MODEL as the default-domain model when set.
void apply_environment(PipelineContext& ctx);

}  // namespace tracekit
