#include "tracekit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>

#include "tracekit/error.hpp"
#include "tracekit/rasterizer.hpp"
#include "tracekit/svg.hpp"

namespace tracekit {

namespace {

constexpr const char* kDefaultDomain = "default";

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string trim(std::string_view s) { return boost::algorithm::trim_copy(std::string(s)); }

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw Error("bad value for " + key + ": '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error("bad value for " + key + ": '" + v + "'");
}

// Domain of the image entering stage i: the last filter before it, if any.
std::string domain_before(const PipelineSpec& spec, std::size_t i) {
  std::string d = kDefaultDomain;
  for (std::size_t k = 0; k < i; ++k)
    if (auto f = std::get_if<FilterStage>(&spec.stages[k])) d = f->kind.token();
  return d;
}

}  // namespace

std::string stage_token(const Stage& s) {
  if (std::holds_alternative<AutoencodeStage>(s)) return "dec";
  if (std::holds_alternative<VectorizeStage>(s)) return "vect";
  return std::get<FilterStage>(s).kind.token();
}

std::string PipelineSpec::name() const {
  std::string out;
  if (stages.empty() || !std::holds_alternative<FilterStage>(stages.front())) out = kDefaultDomain;
  for (const auto& s : stages) {
    if (!out.empty()) out += '-';
    out += stage_token(s);
  }
  return out;
}

PipelineSpec PipelineSpec::parse(std::string_view name) {
  std::vector<std::string> tokens;
  const std::string text = trim(name);
  boost::algorithm::split(tokens, text, [](char c) { return c == '-'; });
  PipelineSpec spec;
  std::size_t i = 0;
  if (!tokens.empty() && tokens[0] == kDefaultDomain) {
    ++i;
    if (tokens.size() > 1 && !(tokens[1] == "dec" || tokens[1] == "vect"))
      throw Error("pipeline '" + text + "': 'default' cannot precede a filter");
  }
  for (; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t == "dec")
      spec.stages.emplace_back(AutoencodeStage{});
    else if (t == "vect")
      spec.stages.emplace_back(VectorizeStage{});
    else
      try {
        spec.stages.emplace_back(FilterStage{FilterKind::from_token(t)});
      } catch (const Error& e) {
        throw Error("pipeline '" + text + "': unknown stage '" + t + "'");
      }
  }
  spec.validate();
  if (spec.name() != text) throw Error("pipeline '" + text + "' is not in canonical form ('" + spec.name() + "')");
  return spec;
}

void PipelineSpec::validate() const {
  if (stages.empty()) throw Error("pipeline has no stages");
  const auto n_dec = std::count_if(stages.begin(), stages.end(),
                                   [](const Stage& s) { return std::holds_alternative<AutoencodeStage>(s); });
  if (n_dec > 1) throw Error("pipeline has more than one autoencode stage");
  for (std::size_t i = 0; i + 1 < stages.size(); ++i)
    if (std::holds_alternative<VectorizeStage>(stages[i])) throw Error("vectorize must be the last stage");
}

bool PipelineSpec::has_vectorize() const {
  return !stages.empty() && std::holds_alternative<VectorizeStage>(stages.back());
}

std::vector<PipelineSpec> parse_spec_list(std::string_view text) {
  std::vector<PipelineSpec> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (!line.empty()) out.push_back(PipelineSpec::parse(line));
  }
  if (out.empty()) throw Error("spec list is empty");
  return out;
}

// ---- models -----------------------------------------------------------------

ModelSet::ModelSet(const ModelSet& other) {
  std::lock_guard lock(other.mu_);
  paths_ = other.paths_;
  loaded_ = other.loaded_;
}

ModelSet& ModelSet::operator=(const ModelSet& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  paths_ = other.paths_;
  loaded_ = other.loaded_;
  return *this;
}

void ModelSet::set_path(const std::string& domain, std::filesystem::path path) {
  std::lock_guard lock(mu_);
  paths_[domain] = std::move(path);
  loaded_.erase(domain);
}

void ModelSet::set_model(const std::string& domain, AeModel model) {
  std::lock_guard lock(mu_);
  loaded_[domain] = std::make_shared<const AeModel>(std::move(model));
}

bool ModelSet::has(const std::string& domain) const {
  std::lock_guard lock(mu_);
  return loaded_.count(domain) || paths_.count(domain);
}

std::shared_ptr<const AeModel> ModelSet::get(const std::string& domain) const {
  std::lock_guard lock(mu_);
  if (auto it = loaded_.find(domain); it != loaded_.end()) return it->second;
  auto it = paths_.find(domain);
  if (it == paths_.end())
    throw Error("no autoencoder model for domain '" + domain + "' (configure model." + domain + ")");
  auto m = std::make_shared<const AeModel>(load_model(it->second));
  loaded_[domain] = m;
  return m;
}

std::vector<std::string> ModelSet::domains() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [k, v] : paths_) out.push_back(k);
  for (const auto& [k, v] : loaded_)
    if (!paths_.count(k)) out.push_back(k);
  std::sort(out.begin(), out.end());
  return out;
}

// ---- single image -------------------------------------------------------------

PipelineArtifacts run_pipeline(const PipelineSpec& spec, const GrayImage& img, const PipelineContext& ctx,
                               const std::string& image_id) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::string name = spec.name();
  PipelineArtifacts art;
  art.intermediates.emplace_back("input", img);
  GrayImage cur = img;
  GrayImage stage_input = img;

  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const auto& stage = spec.stages[i];
    const std::string token = stage_token(stage);
    try {
      stage_input = cur;
      if (std::holds_alternative<AutoencodeStage>(stage)) {
        const auto model = ctx.models.get(domain_before(spec, i));
        cur = forward(*model, cur).image;
      } else if (auto f = std::get_if<FilterStage>(&stage)) {
        cur = apply(f->kind, cur, ctx.filter);
      } else {
        art.doc = trace(cur, ctx.trace);
        art.svg = emit_svg(*art.doc);
        cur = render(*art.doc, cur.width(), cur.height(), ctx.flatten_tolerance);
      }
    } catch (const std::exception& e) {
      throw Error("pipeline " + name + ", stage " + std::to_string(i + 1) + " (" + token + "): " + e.what());
    }
    art.intermediates.emplace_back(std::to_string(i + 1) + "-" + token, cur);
  }

  art.reference = stage_input;
  art.output = cur;
  auto& row = art.row;
  row.image = image_id;
  row.pipeline = name;
  if (art.doc) {
    const auto st = complexity_stats(art.svg);
    row.path_count = st.path_count;
    row.d_chars = st.total_d_chars;
  }
  row.mse = mse(art.reference, art.output);
  row.ssim = ssim(art.reference, art.output, ctx.ssim);
  row.mse_original = mse(img, art.output);
  row.ssim_original = ssim(img, art.output, ctx.ssim);
  row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return art;
}

// ---- batches --------------------------------------------------------------------

std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("corpus directory not found: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = boost::algorithm::to_lower_copy(e.path().extension().string());
    if (ext == ".png" || ext == ".pgm" || ext == ".pnm" || ext == ".ppm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::filesystem::path> sample_corpus(const std::vector<std::filesystem::path>& files, int n,
                                                 std::uint64_t seed) {
  auto out = files;
  std::mt19937_64 rng(seed);
  for (std::size_t i = out.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(out[i - 1], out[pick(rng)]);
  }
  out.resize(std::min(out.size(), static_cast<std::size_t>(std::max(n, 0))));
  return out;
}

namespace {

struct ImageResult {
  std::vector<MetricsRow> rows;
  std::vector<std::string> messages;
  bool unreadable = false;
};

void write_artifacts(const std::filesystem::path& dir, const std::string& image_id, const PipelineArtifacts& art,
                     bool intermediates) {
  std::filesystem::create_directories(dir);
  if (intermediates)
    for (const auto& [label, im] : art.intermediates)
      if (label != "input") save_pgm(im, dir / (image_id + "." + label + ".pgm"));
  if (art.doc) write_text_file(dir / (image_id + ".svg"), art.svg);
}

ImageResult process_image(const std::filesystem::path& file, const BatchConfig& cfg, const PipelineContext& ctx) {
  ImageResult r;
  const std::string id = file.stem().string();
  GrayImage img;
  try {
    img = prepare(load_image(file), ctx.side);
  } catch (const std::exception& e) {
    r.unreadable = true;
    r.messages.push_back("skipping unreadable image " + file.string() + ": " + e.what());
    return r;
  }
  for (const auto& spec : cfg.specs) {
    auto art = run_pipeline(spec, img, ctx, id);
    if (cfg.out_dir) write_artifacts(*cfg.out_dir / art.row.pipeline, id, art, cfg.write_intermediates);
    r.rows.push_back(std::move(art.row));
  }
  return r;
}

}  // namespace

RunReport run_batch(const BatchConfig& cfg, const PipelineContext& ctx) {
  if (cfg.specs.empty()) throw Error("no pipelines to run");
  for (const auto& s : cfg.specs) s.validate();
  const auto files = list_corpus(cfg.corpus);
  if (files.empty()) throw Error("corpus is empty: " + cfg.corpus.string());

  RunReport report;
  if (cfg.sample_n > static_cast<int>(files.size())) {
    ++report.warnings;
    report.messages.push_back("requested " + std::to_string(cfg.sample_n) + " images but corpus has " +
                              std::to_string(files.size()) + "; using all");
  }
  const auto sample = sample_corpus(files, cfg.sample_n, cfg.seed);

  std::vector<ImageResult> results(sample.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < sample.size();) {
      try {
        results[i] = process_image(sample[i], cfg, ctx);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(sample.size(), 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  for (auto& r : results) {
    if (r.unreadable) ++report.warnings;
    for (auto& m : r.messages) report.messages.push_back(std::move(m));
    for (auto& row : r.rows) report.rows.push_back(std::move(row));
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::tie(a.image, a.pipeline) < std::tie(b.image, b.pipeline);
  });
  report.summaries = summarize_rows(report.rows);
  if (cfg.out_dir) {
    std::filesystem::create_directories(*cfg.out_dir);
    write_text_file(*cfg.out_dir / "report.csv", report_csv(report, cfg.original_columns));
  }
  return report;
}

std::vector<PipelineSummary> summarize_rows(const std::vector<MetricsRow>& rows) {
  std::map<std::string, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) groups[r.pipeline].push_back(&r);
  std::vector<PipelineSummary> out;
  for (const auto& [name, rs] : groups) {
    std::vector<double> s, m, p, lp;
    for (const auto* r : rs) {
      s.push_back(r->ssim);
      m.push_back(r->mse);
      p.push_back(static_cast<double>(r->path_count));
      lp.push_back(std::log10(static_cast<double>(r->path_count) + 1.0));
    }
    out.push_back({name, summarize(s), summarize(m), summarize(p), summarize(lp)});
  }
  return out;
}

// ---- CSV --------------------------------------------------------------------------

std::string report_csv(const RunReport& report, bool original_columns) {
  std::string out = "image,pipeline,path_count,d_chars,mse,ssim,ms";
  if (original_columns) out += ",mse_original,ssim_original";
  out += '\n';
  for (const auto& r : report.rows) {
    out += r.image + ',' + r.pipeline + ',' + std::to_string(r.path_count) + ',' + std::to_string(r.d_chars) + ',' +
           fmt("%.6f", r.mse) + ',' + fmt("%.9f", r.ssim) + ',' + fmt("%.3f", r.ms);
    if (original_columns) out += ',' + fmt("%.6f", r.mse_original) + ',' + fmt("%.9f", r.ssim_original);
    out += '\n';
  }
  return out;
}

RunReport read_report_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw Error("report CSV is empty");
  std::vector<std::string> header;
  boost::algorithm::split(header, trim(line), [](char c) { return c == ','; });
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  for (const char* required : {"image", "pipeline", "path_count", "d_chars", "mse", "ssim", "ms"})
    if (!col(required)) throw Error(std::string("report CSV lacks column ") + required);

  RunReport report;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> f;
    boost::algorithm::split(f, line, [](char c) { return c == ','; });
    if (f.size() != header.size()) throw Error("report CSV line " + std::to_string(lineno) + ": wrong field count");
    const std::string where = "report CSV line " + std::to_string(lineno);
    MetricsRow r;
    r.image = f[*col("image")];
    r.pipeline = f[*col("pipeline")];
    r.path_count = parse_number<std::size_t>(where, f[*col("path_count")]);
    r.d_chars = parse_number<std::size_t>(where, f[*col("d_chars")]);
    r.mse = parse_number<double>(where, f[*col("mse")]);
    r.ssim = parse_number<double>(where, f[*col("ssim")]);
    r.ms = parse_number<double>(where, f[*col("ms")]);
    if (auto c = col("mse_original")) r.mse_original = parse_number<double>(where, f[*c]);
    if (auto c = col("ssim_original")) r.ssim_original = parse_number<double>(where, f[*c]);
    report.rows.push_back(std::move(r));
  }
  if (report.rows.empty()) throw Error("report CSV has no rows");
  report.summaries = summarize_rows(report.rows);
  return report;
}

std::string boxplot_csv(const RunReport& report, bool log_paths) {
  std::string out = "pipeline,n,mean,std,min,q1,median,q3,max\n";
  for (const auto& ps : report.summaries) {
    const Summary& s = log_paths ? ps.log_path_count : ps.ssim;
    out += ps.pipeline + ',' + std::to_string(s.n);
    for (double v : {s.mean, s.std, s.min, s.q1, s.median, s.q3, s.max}) out += ',' + fmt("%.6f", v);
    out += '\n';
  }
  return out;
}

std::string ranking_csv(const RunReport& report) {
  auto ranked = report.summaries;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const PipelineSummary& a, const PipelineSummary& b) { return a.ssim.mean > b.ssim.mean; });
  std::string out = "rank,pipeline,mean_ssim,std_ssim,mean_mse,median_path_count\n";
  int rank = 0;
  for (const auto& ps : ranked)
    out += std::to_string(++rank) + ',' + ps.pipeline + ',' + fmt("%.6f", ps.ssim.mean) + ',' +
           fmt("%.6f", ps.ssim.std) + ',' + fmt("%.6f", ps.mse.mean) + ',' + fmt("%.1f", ps.path_count.median) + '\n';
  return out;
}

std::vector<std::filesystem::path> compare_report(const RunReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> paths{out_dir / "boxplot_ssim.csv", out_dir / "boxplot_log_paths.csv",
                                           out_dir / "ranking.csv"};
  write_text_file(paths[0], boxplot_csv(report, false));
  write_text_file(paths[1], boxplot_csv(report, true));
  write_text_file(paths[2], ranking_csv(report));
  return paths;
}

// ---- configuration ------------------------------------------------------------------

std::map<std::string, std::string> parse_config(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key=value");
    auto key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return out;
}

void apply_config(const std::map<std::string, std::string>& cfg, PipelineContext& ctx) {
  for (const auto& [k, v] : cfg) {
    if (k.rfind("model.", 0) == 0) {
      const auto domain = k.substr(6);
      if (domain != kDefaultDomain) FilterKind::from_token(domain);  // validates
      ctx.models.set_path(domain, v);
    } else if (k == "trace.threshold") {
      ctx.trace.threshold = parse_number<int>(k, v);
    } else if (k == "trace.turdsize") {
      ctx.trace.turdsize = parse_number<int>(k, v);
    } else if (k == "trace.turnpolicy") {
      ctx.trace.turnpolicy = turn_policy_from_string(v);
    } else if (k == "trace.alphamax") {
      ctx.trace.alphamax = parse_number<double>(k, v);
    } else if (k == "trace.opticurve") {
      ctx.trace.opticurve = parse_bool(k, v);
    } else if (k == "trace.opttolerance") {
      ctx.trace.opttolerance = parse_number<double>(k, v);
    } else if (k == "canny.low") {
      ctx.filter.canny_low = parse_number<int>(k, v);
    } else if (k == "canny.high") {
      ctx.filter.canny_high = parse_number<int>(k, v);
    } else if (k == "canny.sigma") {
      ctx.filter.canny_sigma = parse_number<double>(k, v);
    } else if (k == "ghp.sigma") {
      ctx.filter.highpass_sigma = parse_number<double>(k, v);
    } else if (k == "ssim.window") {
      ctx.ssim.window = parse_number<int>(k, v);
    } else if (k == "ssim.weighting") {
      if (v == "uniform")
        ctx.ssim.weighting = SsimWeighting::uniform;
      else if (v == "gaussian")
        ctx.ssim.weighting = SsimWeighting::gaussian;
      else
        throw Error("bad value for ssim.weighting: '" + v + "'");
    } else if (k == "flatten.tolerance") {
      ctx.flatten_tolerance = parse_number<double>(k, v);
    } else {
      throw Error("unknown config key '" + k + "'");
    }
  }
  ctx.trace.validate();
  ctx.ssim.validate();
  if (!(ctx.flatten_tolerance > 0)) throw Error("flatten.tolerance must be positive");
}

void apply_environment(PipelineContext& ctx) {
  if (const char* p = std::getenv("TRACEKIT_MODEL"); p && *p) ctx.models.set_path(kDefaultDomain, p);
}

}  // namespace tracekit
