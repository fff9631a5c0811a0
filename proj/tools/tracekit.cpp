#include <malloc.h>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tracekit/autoencoder.hpp"
#include "tracekit/error.hpp"
#include "tracekit/filters.hpp"
#include "tracekit/metrics.hpp"
#include "tracekit/pipeline.hpp"
#include "tracekit/rasterizer.hpp"
#include "tracekit/svg.hpp"
#include "tracekit/synth.hpp"
#include "tracekit/tracer.hpp"

namespace tk = tracekit;

namespace {

std::pair<int, int> parse_size(const std::string& s) {
  int w = 0, h = 0;
  char x = 0, extra = 0;
  if (std::sscanf(s.c_str(), "%d%c%d%c", &w, &x, &h, &extra) != 3 || (x != 'x' && x != 'X') || w <= 0 || h <= 0)
    throw tk::Error("size must look like 256x256, got '" + s + "'");
  return {w, h};
}

std::filesystem::path default_model(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* p = std::getenv("TRACEKIT_MODEL"); p && *p) return p;
  throw tk::Error("no model given (use --model or set TRACEKIT_MODEL)");
}

}  // namespace

int main(int argc, char** argv) {
  // large tensors are reused across layers; keep freed memory mapped
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"tracekit: autoencoding, filtering and vectorization of grayscale images"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train an autoencoder on a directory of images");
  std::string train_data, train_out, train_filter, train_opt = "adam";
  int epochs = 200, batch = 16, limit = 0;
  double lr = 1e-3;
  std::uint64_t train_seed = 1;
  train->add_option("--data", train_data, "Image directory")->required();
  train->add_option("--epochs", epochs, "Epoch count")->capture_default_str();
  train->add_option("--seed", train_seed, "Random seed")->capture_default_str();
  train->add_option("--batch", batch, "Batch size")->capture_default_str();
  train->add_option("--lr", lr, "Learning rate")->capture_default_str();
  train->add_option("--optimizer", train_opt, "adam or sgd")->capture_default_str();
  train->add_option("--filter", train_filter, "Train on filtered images (token such as sobel, canny_direct)");
  train->add_option("--limit", limit, "Use at most N images (sorted by name)");
  train->add_option("--out", train_out, "Model file")->required();

  // autoencode
  auto* ae = app.add_subcommand("autoencode", "Reconstruct an image through a trained model");
  std::string ae_model, ae_in, ae_out;
  ae->add_option("--model", ae_model, "Model file (default $TRACEKIT_MODEL)");
  ae->add_option("IN", ae_in)->required();
  ae->add_option("OUT", ae_out)->required();

  // filter
  auto* filt = app.add_subcommand("filter", "Apply a high-pass filter");
  std::string kind = "sobel", variant = "inverse", f_in, f_out;
  int low = 50, high = 150;
  double sigma = 0;
  filt->add_option("--kind", kind, "sobel | canny | ghp")->check(CLI::IsMember({"sobel", "canny", "ghp"}));
  filt->add_option("--variant", variant, "direct | inverse")->check(CLI::IsMember({"direct", "inverse"}));
  filt->add_option("--low", low, "Canny low threshold")->capture_default_str();
  filt->add_option("--high", high, "Canny high threshold")->capture_default_str();
  filt->add_option("--sigma", sigma, "Canny smoothing or high-pass blur sigma");
  filt->add_option("IN", f_in)->required();
  filt->add_option("OUT", f_out)->required();

  // trace
  auto* tr = app.add_subcommand("trace", "Vectorize an image to SVG");
  tk::TraceParams tp;
  std::string policy = tk::to_string(tp.turnpolicy), t_in, t_out;
  bool no_opticurve = false;
  tr->add_option("--threshold", tp.threshold, "Pixels darker than this are foreground")->capture_default_str();
  tr->add_option("--turdsize", tp.turdsize, "Drop loops smaller than this many pixels")->capture_default_str();
  tr->add_option("--turnpolicy", policy, "black|white|majority|minority")->capture_default_str();
  tr->add_option("--alphamax", tp.alphamax, "Corner threshold")->capture_default_str();
  tr->add_flag("--no-opticurve", no_opticurve, "Skip curve optimization");
  tr->add_option("--opttolerance", tp.opttolerance, "Curve optimization tolerance")->capture_default_str();
  tr->add_option("IN", t_in)->required();
  tr->add_option("OUT", t_out)->required();

  // rasterize
  auto* ras = app.add_subcommand("rasterize", "Render an SVG to PGM");
  std::string r_in, r_out, size = "256x256";
  double tol = tk::kDefaultFlattenTolerance;
  ras->add_option("IN", r_in)->required();
  ras->add_option("--size", size, "WIDTHxHEIGHT")->capture_default_str();
  ras->add_option("--tolerance", tol, "Curve flattening tolerance in pixels")->capture_default_str();
  ras->add_option("OUT", r_out)->required();

  // metrics
  auto* met = app.add_subcommand("metrics", "Compare two images");
  std::string m_a, m_b;
  int window = 7;
  bool gaussian = false;
  met->add_option("A", m_a)->required();
  met->add_option("B", m_b)->required();
  met->add_option("--ssim-window", window, "Odd window side")->capture_default_str();
  met->add_flag("--gaussian", gaussian, "Gaussian-weighted window");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Batch evaluation");
  pipe->require_subcommand(1);
  auto* run = pipe->add_subcommand("run", "Run pipelines over a sampled corpus");
  std::string specs_file, data_dir, out_dir, config_file;
  std::vector<std::string> model_opts;
  int n = 50, threads = 0;
  std::uint64_t seed = 1;
  bool no_inter = false, orig_cols = false;
  run->add_option("--specs", specs_file, "File with one pipeline name per line")->required();
  run->add_option("--data", data_dir, "Corpus directory")->required();
  run->add_option("--n", n, "Sample size")->capture_default_str();
  run->add_option("--seed", seed, "Sampling seed")->capture_default_str();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--config", config_file, "key=value configuration file");
  run->add_option("--model", model_opts, "DOMAIN=PATH (domain: default or a filter token)");
  run->add_option("--threads", threads, "Worker threads (0: all cores)");
  run->add_flag("--no-intermediates", no_inter, "Only write SVGs and the report");
  run->add_flag("--original-columns", orig_cols, "Add metrics against the original image");

  auto* rep = pipe->add_subcommand("report", "Box-plot data and ranking from a report CSV");
  std::string rep_in, rep_out;
  rep->add_option("--in", rep_in, "report.csv")->required();
  rep->add_option("--out", rep_out, "Output directory")->required();

  // synth
  auto* syn = app.add_subcommand("synth", "Write a procedural test corpus");
  std::string syn_kind = "scene", syn_out;
  int syn_n = 20, side = 256;
  std::uint64_t syn_seed = 1;
  syn->add_option("--kind", syn_kind, "scene | blobs")->check(CLI::IsMember({"scene", "blobs"}));
  syn->add_option("--n", syn_n, "Image count")->capture_default_str();
  syn->add_option("--seed", syn_seed, "Seed")->capture_default_str();
  syn->add_option("--side", side, "Image side")->capture_default_str();
  syn->add_option("--out", syn_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      std::vector<tk::GrayImage> data;
      auto files = tk::list_corpus(train_data);
      if (limit > 0 && static_cast<int>(files.size()) > limit) files.resize(limit);
      for (const auto& f : files) {
        auto img = tk::prepare(tk::load_image(f), 256);
        if (!train_filter.empty()) img = tk::apply(tk::FilterKind::from_token(train_filter), img);
        data.push_back(std::move(img));
      }
      tk::TrainConfig cfg;
      cfg.epochs = epochs;
      cfg.batch_size = batch;
      cfg.learning_rate = lr;
      cfg.seed = train_seed;
      cfg.optimizer = train_opt;
      auto res = tk::train(cfg, data, [](int e, double loss) { std::printf("epoch %d loss=%.6f\n", e, loss); std::fflush(stdout); });
      tk::save_model(res.model, train_out);
    } else if (*ae) {
      const auto model = tk::load_model(default_model(ae_model));
      const auto img = tk::prepare(tk::load_image(ae_in), model.architecture().input.w);
      tk::save_pgm(tk::forward(model, img).image, ae_out);
    } else if (*filt) {
      tk::FilterKind k;
      k.tag = kind == "sobel" ? tk::FilterTag::sobel : kind == "canny" ? tk::FilterTag::canny : tk::FilterTag::gaussian_highpass;
      k.variant = variant == "direct" ? tk::FilterVariant::direct : tk::FilterVariant::inverse;
      tk::FilterParams fp;
      fp.canny_low = low;
      fp.canny_high = high;
      if (sigma > 0) (k.tag == tk::FilterTag::canny ? fp.canny_sigma : fp.highpass_sigma) = sigma;
      tk::save_pgm(tk::apply(k, tk::load_image(f_in), fp), f_out);
    } else if (*tr) {
      tp.turnpolicy = tk::turn_policy_from_string(policy);
      tp.opticurve = !no_opticurve;
      tk::write_text_file(t_out, tk::emit_svg(tk::trace(tk::load_image(t_in), tp)));
    } else if (*ras) {
      const auto [w, h] = parse_size(size);
      tk::save_pgm(tk::render(tk::parse_paths(tk::read_text_file(r_in)), w, h, tol), r_out);
    } else if (*met) {
      tk::SsimParams sp = gaussian ? tk::SsimParams::gaussian() : tk::SsimParams{};
      if (met->count("--ssim-window")) sp.window = window;
      const auto a = tk::load_image(m_a), b = tk::load_image(m_b);
      std::printf("mse=%.6f ssim=%.6f\n", tk::mse(a, b), tk::ssim(a, b, sp));
    } else if (*run) {
      tk::PipelineContext ctx;
      tk::apply_environment(ctx);
      if (!config_file.empty()) tk::apply_config(tk::parse_config(tk::read_text_file(config_file)), ctx);
      for (const auto& m : model_opts) {
        const auto eq = m.find('=');
        if (eq == std::string::npos) throw tk::Error("--model expects DOMAIN=PATH, got '" + m + "'");
        tk::apply_config({{"model." + m.substr(0, eq), m.substr(eq + 1)}}, ctx);
      }
      tk::BatchConfig bc;
      bc.corpus = data_dir;
      bc.specs = tk::parse_spec_list(tk::read_text_file(specs_file));
      bc.sample_n = n;
      bc.seed = seed;
      bc.out_dir = out_dir;
      bc.write_intermediates = !no_inter;
      bc.original_columns = orig_cols;
      bc.threads = threads;
      const auto report = tk::run_batch(bc, ctx);
      for (const auto& m : report.messages) std::fprintf(stderr, "warning: %s\n", m.c_str());
      tk::compare_report(report, out_dir);
      std::printf("%zu rows, %zu warnings; report in %s\n", report.rows.size(), report.warnings,
                  (std::filesystem::path(out_dir) / "report.csv").c_str());
      std::fputs(tk::ranking_csv(report).c_str(), stdout);
    } else if (*rep) {
      const auto report = tk::read_report_csv(tk::read_text_file(rep_in));
      tk::compare_report(report, rep_out);
      std::fputs(tk::ranking_csv(report).c_str(), stdout);
    } else if (*syn) {
      const auto k = syn_kind == "blobs" ? tk::SynthKind::blobs : tk::SynthKind::scene;
      const auto paths = tk::write_corpus(syn_out, tk::synth_corpus(syn_n, syn_seed, k, side));
      std::printf("wrote %zu images to %s\n", paths.size(), syn_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "tracekit: %s\n", e.what());
    return 1;
  }
  return 0;
}
