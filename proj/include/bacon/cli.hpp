#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bacon/analysis.hpp"
#include "bacon/bench.hpp"
#include "bacon/checkpoint.hpp"
#include "bacon/config.hpp"
#include "bacon/csv.hpp"
#include "bacon/extraction.hpp"
#include "bacon/image.hpp"
#include "bacon/image_io.hpp"
#include "bacon/parallel.hpp"
#include "bacon/sdf.hpp"

namespace bacon::cli {

namespace fs = std::filesystem;

struct Context {
  Config config;
  fs::path out;
  std::uint64_t seed = 0;
  Provenance provenance;
  std::ostream* log = &std::cout;

  void write_csv(const std::string& name, const CsvTable& t) const {
    std::ofstream f(out / name);
    if (!f) throw InvalidInput("cannot write " + (out / name).string());
    t.write(f, &provenance);
  }
  std::string path(const std::string& name) const { return (out / name).string(); }
  void note(const std::string& s) const { *log << s << '\n'; }
};

// Wall-clock stages. Kept in timing.csv, which is the one artifact that is
// not reproducible across runs.
class Stopwatch {
 public:
  void mark(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    rows_.emplace_back(stage, std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }
  CsvTable table() const {
    CsvTable t({"stage", "seconds"});
    for (const auto& [s, v] : rows_) t.row() << s << v;
    return t;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, double>> rows_;
};

inline fs::path data_path(const std::string& p) {
  if (p.empty() || fs::exists(p)) return p;
#ifdef BACON_DATA_DIR
  const fs::path bundled = fs::path(BACON_DATA_DIR) / p;
  if (fs::exists(bundled)) return bundled;
#endif
  return p;
}

inline std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// --- fit-image -----------------------------------------------------------------

inline void fit_image(const Context& ctx) {
  const auto& c = ctx.config;
  Stopwatch clock;
  const auto img = image::read_image(data_path(c.text("image.path", "astronaut_64.png")).string());
  image::ImageFitConfig fc;
  fc.hidden_dim = c.get("image.hidden_dim", fc.hidden_dim);
  fc.steps = c.get("image.steps", fc.steps);
  fc.lr_start = c.get("image.lr_start", fc.lr_start);
  fc.lr_end = c.get("image.lr_end", fc.lr_end);
  fc.bandwidth = c.get("image.bandwidth", fc.bandwidth);
  const auto mode = c.text("image.mode", "per_head");
  if (mode == "per_head")
    fc.mode = training::SupervisionMode::PerHead;
  else if (mode == "shared")
    fc.mode = training::SupervisionMode::SharedTarget;
  else
    throw ConfigError("image.mode must be per_head or shared, got '" + mode + "'");
  fc.seed = ctx.seed;
  clock.mark("load");

  const auto r = image::fit_image(img, fc);
  clock.mark("fit");

  CsvTable metrics({"output", "layer", "height", "width", "bandwidth", "psnr", "ssim"});
  for (const auto& m : r.metrics) metrics.row() << "head" << m.layer << m.height << m.width << m.bandwidth << m.psnr << m.ssim;
  metrics.row() << "validation" << r.spec.deepest_head() << img.height << img.width
                << network::cumulative_bandwidth(r.spec, r.spec.deepest_head()) << r.validation_psnr << std::string();
  // The coarsest head against point subsampling of the full-resolution output.
  if (!r.pyramid.empty() && img.height % r.pyramid.front().height == 0 && r.pyramid.front().height < img.height) {
    const int factor = img.height / r.pyramid.front().height;
    const auto naive = image::point_subsample(r.head_outputs.back(), factor);
    metrics.row() << "point_subsampled" << r.spec.deepest_head() << naive.height << naive.width << std::string()
                  << image::psnr(naive, r.pyramid.front()) << std::string();
  }
  ctx.write_csv("image_metrics.csv", metrics);
  ctx.write_csv("loss_curve.csv", training::loss_curve_table(r.curve, r.spec.num_heads()));
  ctx.write_csv("band_limit.csv", analysis::spectrum_summary(analysis::head_spectra(r.params, r.spec, 2 * std::max(img.height, img.width))));
  for (std::size_t h = 0; h < r.head_outputs.size(); ++h)
    image::write_image(ctx.path("head" + std::to_string(r.spec.output_head_layers[h]) + ".png"), r.head_outputs[h]);
  const auto ext = image::render_extrapolated(r.params, r.spec, img.width);
  image::Image clamped = ext;
  for (auto& v : clamped.pixels) v = std::clamp(v, 0.0, 1.0);
  image::write_image(ctx.path("extrapolated.png"), clamped);
  network::save_checkpoint(ctx.path("model.ckpt"), r.spec, r.params);
  clock.mark("report");
  ctx.write_csv("timing.csv", clock.table());
  ctx.note("fit-image: psnr " + fixed(r.metrics.back().psnr, 2) + " dB, validation " + fixed(r.validation_psnr, 2) + " dB");
}

// --- fit-sdf ---------------------------------------------------------------------

struct SdfEvaluation {
  int layer = 0;
  double bandwidth = 0.0;
  double iou = 0.0;
  double chamfer = 0.0;
  mesh::TriangleMesh mesh;
};

inline constexpr std::uint64_t kEvalStream = 3;

// Occupancy IOU at cell centers and Chamfer between surface samples of the
// ground truth and of the head's dense marching-cubes mesh.
template <class T>
std::vector<SdfEvaluation> evaluate_sdf_fit(const sdf::SdfSource& src, const network::BaconParams<T>& p, const network::NetworkSpec& spec,
                                            int resolution, std::size_t chamfer_points, std::uint64_t seed) {
  const auto truth = sdf::occupancy(src, resolution);
  auto rng = numerics::Rng(seed).fork(kEvalStream);
  std::vector<mesh::Vec3> gt_points;
  if (src.is_mesh())
    gt_points = sdf::sample_mesh_surface(src.triangle_mesh(), chamfer_points, rng);
  else
    for (std::size_t i = 0; i < chamfer_points; ++i) gt_points.push_back(src.sample_surface(rng));
  std::vector<SdfEvaluation> out;
  for (int layer : spec.output_head_layers) {
    SdfEvaluation e;
    e.layer = layer;
    e.bandwidth = network::cumulative_bandwidth(spec, layer);
    e.iou = sdf::iou(truth, sdf::network_occupancy(p, spec, resolution, layer));
    mesh::ExtractionConfig ec;
    ec.resolution = resolution;
    ec.strategy = mesh::Strategy::Dense;
    e.mesh = mesh::extract(mesh::single_field(mesh::network_field(p, spec, layer)), ec).mesh;
    if (e.mesh.empty()) {
      e.chamfer = std::numeric_limits<double>::infinity();
    } else {
      auto mesh_rng = rng.fork(static_cast<std::uint64_t>(layer));
      e.chamfer = sdf::chamfer(gt_points, sdf::sample_mesh_surface(e.mesh, chamfer_points, mesh_rng));
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline sdf::SdfSource sdf_source(const Config& c) {
  const auto shape = c.text("sdf.shape", "sphere");
  if (shape == "sphere") return sdf::SdfSource::sphere(c.get("sdf.radius", 0.25));
  if (shape == "mesh") {
    const auto path = c.text("sdf.mesh", "");
    if (path.empty()) throw ConfigError("sdf.shape = mesh needs sdf.mesh");
    auto m = mesh::read_obj(data_path(path).string());
    if (c.get("sdf.normalize", true)) m = sdf::normalize_to_domain(std::move(m));
    return sdf::SdfSource::from_mesh(std::move(m));
  }
  throw ConfigError("sdf.shape must be sphere or mesh, got '" + shape + "'");
}

inline void fit_sdf(const Context& ctx) {
  const auto& c = ctx.config;
  Stopwatch clock;
  const auto src = sdf_source(c);
  sdf::SdfFitConfig fc;
  fc.bandwidth = c.get("sdf.bandwidth", fc.bandwidth);
  fc.hidden_dim = c.get("sdf.hidden_dim", fc.hidden_dim);
  fc.steps = c.get("sdf.steps", fc.steps);
  fc.coarse_samples = c.get("sdf.coarse_samples", fc.coarse_samples);
  fc.fine_samples = c.get("sdf.fine_samples", fc.fine_samples);
  fc.coarse_variance = c.get("sdf.coarse_variance", fc.coarse_variance);
  fc.fine_variance = c.get("sdf.fine_variance", fc.fine_variance);
  fc.lambda = c.get("sdf.lambda", fc.lambda);
  fc.lr_start = c.get("sdf.lr_start", fc.lr_start);
  fc.lr_end = c.get("sdf.lr_end", fc.lr_end);
  fc.seed = ctx.seed;
  const int res = c.get("sdf.eval_resolution", 64);
  const auto points = c.get<std::size_t>("sdf.chamfer_points", 30000);
  if (c.get("sdf.export_samples", false)) {
    auto rng = numerics::Rng(ctx.seed).fork(sdf::kSampleStream).fork(0);
    const auto coarse = sdf::sample_sdf_batch(src, fc.coarse_samples, sdf::Tier::Coarse, rng, fc.coarse_variance);
    const auto fine = sdf::sample_sdf_batch(src, fc.fine_samples, sdf::Tier::Fine, rng, fc.fine_variance);
    ctx.write_csv("samples.csv", sdf::sample_table({coarse, fine}));
  }
  clock.mark("load");

  const auto r = sdf::fit_sdf(src, fc);
  clock.mark("fit");
  network::save_checkpoint(ctx.path("model.ckpt"), r.spec, r.params);
  ctx.write_csv("loss_curve.csv", training::loss_curve_table(r.curve, r.spec.num_heads()));

  const auto evals = evaluate_sdf_fit(src, r.params, r.spec, res, points, ctx.seed);
  CsvTable t({"layer", "bandwidth", "resolution", "iou", "chamfer", "vertices", "faces"});
  for (const auto& e : evals) {
    t.row() << e.layer << e.bandwidth << res << e.iou << e.chamfer << static_cast<std::uint64_t>(e.mesh.vertices.size())
            << static_cast<std::uint64_t>(e.mesh.faces.size());
    mesh::write_obj(ctx.path("mesh_head" + std::to_string(e.layer) + ".obj"), e.mesh);
  }
  ctx.write_csv("sdf_metrics.csv", t);
  clock.mark("evaluate");
  ctx.write_csv("timing.csv", clock.table());
  ctx.note("fit-sdf: iou " + fixed(evals.back().iou, 4) + ", chamfer " + format_number(evals.back().chamfer));
}

// --- extract-mesh ------------------------------------------------------------------

inline void extract_mesh(const Context& ctx) {
  const auto& c = ctx.config;
  const auto path = c.text("extract.checkpoint", "");
  if (path.empty()) throw ConfigError("extract-mesh needs a checkpoint (--checkpoint or extract.checkpoint)");
  const auto ck = network::load_checkpoint<float>(path);
  mesh::ExtractionConfig ec;
  ec.resolution = c.get("extract.resolution", ec.resolution);
  ec.levels = c.get("extract.levels", ec.levels);
  ec.tau_factor = c.get("extract.tau_factor", ec.tau_factor);
  ec.alpha = c.get("extract.alpha", ec.alpha);
  const auto which = c.text("extract.strategy", "combined");
  std::vector<mesh::Strategy> strategies;
  if (which == "all")
    strategies = {mesh::Strategy::Dense, mesh::Strategy::Adaptive, mesh::Strategy::Multiscale, mesh::Strategy::Combined};
  else
    try {
      strategies = {mesh::parse_strategy(which)};
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  try {
    ec.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }

  std::vector<mesh::ExtractionReport> reports;
  for (auto s : strategies) {
    ec.strategy = s;
    reports.push_back(mesh::extract_network(ck.params, ck.spec, ec));
    mesh::write_obj(ctx.path(std::string("mesh_") + mesh::strategy_name(s) + ".obj"), reports.back().mesh);
  }
  // Counts only; wall times go to timing.csv.
  CsvTable stats({"strategy", "level", "cells_evaluated", "low_queries", "full_queries", "vertices", "faces", "open_edges", "chamfer_vs_dense"});
  const mesh::ExtractionReport* dense = nullptr;
  for (const auto& r : reports)
    if (r.strategy == mesh::Strategy::Dense) dense = &r;
  std::vector<mesh::Vec3> dense_points;
  const auto points = c.get<std::size_t>("extract.chamfer_points", 30000);
  const numerics::Rng root(ctx.seed);
  if (dense && !dense->mesh.empty()) {
    auto rng = root.fork(0);
    dense_points = sdf::sample_mesh_surface(dense->mesh, points, rng);
  }
  for (const auto& r : reports) {
    for (const auto& l : r.levels)
      stats.row() << mesh::strategy_name(r.strategy) << l.level << static_cast<std::uint64_t>(l.cells_evaluated)
                  << static_cast<std::uint64_t>(l.low_queries) << static_cast<std::uint64_t>(l.full_queries) << std::string() << std::string()
                  << std::string() << std::string();
    std::size_t cells = 0;
    for (const auto& l : r.levels) cells += l.cells_evaluated;
    auto row = stats.row();
    row << mesh::strategy_name(r.strategy) << "total" << static_cast<std::uint64_t>(cells) << static_cast<std::uint64_t>(r.low_queries())
        << static_cast<std::uint64_t>(r.full_queries()) << static_cast<std::uint64_t>(r.mesh.vertices.size())
        << static_cast<std::uint64_t>(r.mesh.faces.size()) << static_cast<std::uint64_t>(r.open_edges);
    if (!dense_points.empty() && !r.mesh.empty()) {
      auto rng = root.fork(1 + static_cast<std::uint64_t>(r.strategy));
      row << sdf::chamfer(dense_points, sdf::sample_mesh_surface(r.mesh, points, rng));
    } else {
      row << std::string();
    }
  }
  ctx.write_csv("extraction_stats.csv", stats);
  ctx.write_csv("timing.csv", mesh::timing_report(reports));
  for (const auto& r : reports)
    ctx.note(std::string("extract-mesh: ") + mesh::strategy_name(r.strategy) + " " + fixed(r.seconds) + " s, " +
             std::to_string(r.mesh.faces.size()) + " faces");
}

// --- analyze-spectrum ----------------------------------------------------------------

inline void analyze_spectrum(const Context& ctx) {
  const auto& c = ctx.config;
  network::NetworkSpec spec;
  network::BaconParams<double> params;
  const auto path = c.text("spectrum.checkpoint", "");
  if (!path.empty()) {
    auto ck = network::load_checkpoint<double>(path);
    spec = ck.spec;
    params = std::move(ck.params);
  } else {
    // Freshly initialized network.
    const int layers = c.get("spectrum.layers", 4);
    const double b = c.get("spectrum.bandwidth", 32.0);
    spec.input_dim = c.get("spectrum.input_dim", 1);
    spec.hidden_dim = c.get("spectrum.hidden_dim", 32);
    spec.num_sine_layers = layers;
    spec.output_dim = 1;
    spec.layer_bandwidths.assign(static_cast<std::size_t>(layers), b / layers);
    spec.output_head_layers.clear();
    for (int i = 0; i < layers; ++i) spec.output_head_layers.push_back(i);
    try {
      spec.validate();
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
    numerics::Rng rng(ctx.seed);
    params = network::init_network(spec, rng);
  }
  // Default grid: twice the Nyquist rate of the total bandwidth, capped per dimension.
  const int cap = spec.input_dim == 1 ? 1 << 14 : spec.input_dim == 2 ? 512 : 64;
  int res = 2;
  while (res < 4 * spec.max_bandwidth() && res < cap) res *= 2;
  res = c.get("spectrum.resolution", res);
  const auto heads = analysis::head_spectra(params, spec, res);
  ctx.write_csv("spectrum_summary.csv", analysis::spectrum_summary(heads));
  if (c.get("spectrum.bins", spec.input_dim < 3))
    for (const auto& h : heads)
      ctx.write_csv("spectrum_head" + std::to_string(h.layer) + "_out" + std::to_string(h.output) + ".csv", analysis::spectrum_bins(h.spectrum));
  double worst = 0.0;
  for (const auto& h : heads) worst = std::max(worst, h.out_of_band);
  ctx.note("analyze-spectrum: " + std::to_string(heads.size()) + " head(s) at " + std::to_string(res) + " samples per axis, worst out-of-band " +
           format_number(worst));
}

// --- verify-init -------------------------------------------------------------------

inline void verify_init(const Context& ctx) {
  const auto& c = ctx.config;
  analysis::InitConfig ic;
  ic.hidden_dim = c.get("init.hidden_dim", ic.hidden_dim);
  ic.layers = c.get("init.layers", ic.layers);
  ic.bandwidth_rad = c.get("init.bandwidth_rad", ic.bandwidth_rad);
  ic.samples = c.get("init.samples", ic.samples);
  ic.quantize = c.get("init.quantize", ic.quantize);
  ic.seed = ctx.seed;
  if (ic.hidden_dim < 1 || ic.layers < 2 || !(ic.bandwidth_rad > 0.0) || ic.samples < 1)
    throw ConfigError("verify-init needs hidden_dim >= 1, layers >= 2, bandwidth_rad > 0 and samples >= 1");
  const auto r = analysis::init_report(ic);
  ctx.write_csv("init_statistics.csv", analysis::init_table(r));
  const double first = r.mfn.post_linear[1].variance, last = r.mfn.post_linear.back().variance;
  ctx.note("verify-init: bacon post-linear variance " + fixed(r.bacon.post_linear.back().variance) + " at the last layer; reference init " +
           format_number(first) + " -> " + format_number(last));
}

// --- bench-idft ----------------------------------------------------------------------

inline void bench_idft(const Context& ctx) {
  const auto& c = ctx.config;
  bench::BenchConfig bc;
  bc.spectrum_sizes = c.get_list<std::size_t>("bench.sizes", bc.spectrum_sizes);
  bc.sample_counts = c.get_list<std::size_t>("bench.samples", bc.sample_counts);
  bc.hidden_dim = c.get("bench.hidden_dim", bc.hidden_dim);
  bc.layers = c.get("bench.layers", bc.layers);
  bc.repeats = c.get("bench.repeats", bc.repeats);
  bc.seed = ctx.seed;
  for (auto n : bc.spectrum_sizes)
    if (n < 2 || (n & (n - 1))) throw ConfigError("bench.sizes: " + std::to_string(n) + " is not a power of two");
  const auto rows = bench::run(bc);
  ctx.write_csv("bench_idft.csv", bench::table(rows));
  if (bc.spectrum_sizes.size() >= 2 && !rows.empty())
    ctx.note("bench-idft: naive IDFT slope " + fixed(bench::log_log_slope(rows, "naive_idft"), 3) + ", network spread " +
             fixed(100 * bench::spread_about_median(rows, "bacon"), 1) + "%");
}

// --- command table ---------------------------------------------------------------------

struct Flag {
  std::string name;  // e.g. "--steps"
  std::string key;   // config key it overrides
  std::string help;
};

struct Task {
  std::string name;
  std::string help;
  std::set<std::string> keys;
  std::vector<Flag> flags;
  std::function<void(const Context&)> run;
};

inline std::vector<Task> tasks() {
  return {
      {"fit-image",
       "Fit an image with multiscale supervision",
       {"image.path", "image.hidden_dim", "image.steps", "image.lr_start", "image.lr_end", "image.bandwidth", "image.mode"},
       {{"--image", "image.path", "Input PNG/PNM (bundled names are resolved)"},
        {"--bandwidth", "image.bandwidth", "Total bandwidth, cycles per unit (0: half a cycle per pixel)"},
        {"--steps", "image.steps", "Training steps"}},
       fit_image},
      {"fit-sdf",
       "Fit a signed distance function and report IOU / Chamfer",
       {"sdf.shape", "sdf.radius", "sdf.mesh", "sdf.normalize", "sdf.bandwidth", "sdf.hidden_dim", "sdf.steps", "sdf.coarse_samples",
        "sdf.fine_samples", "sdf.coarse_variance", "sdf.fine_variance", "sdf.lambda", "sdf.lr_start", "sdf.lr_end", "sdf.eval_resolution",
        "sdf.chamfer_points", "sdf.export_samples"},
       {{"--mesh", "sdf.mesh", "Watertight OBJ (sets shape = mesh)"},
        {"--bandwidth", "sdf.bandwidth", "Total bandwidth, cycles per unit"},
        {"--resolution", "sdf.eval_resolution", "Evaluation grid per axis"},
        {"--steps", "sdf.steps", "Training steps"}},
       fit_sdf},
      {"extract-mesh",
       "Extract a mesh from an SDF checkpoint",
       {"extract.checkpoint", "extract.resolution", "extract.levels", "extract.tau_factor", "extract.alpha", "extract.strategy",
        "extract.chamfer_points"},
       {{"--checkpoint", "extract.checkpoint", "Network checkpoint"},
        {"--resolution", "extract.resolution", "Finest grid per axis (power of two)"},
        {"--strategy", "extract.strategy", "dense | adaptive | multiscale | combined | all"},
        {"--tau-factor", "extract.tau_factor", "Adaptive threshold in finest voxels"},
        {"--alpha", "extract.alpha", "Multiscale margin"},
        {"--levels", "extract.levels", "Octree levels"}},
       extract_mesh},
      {"analyze-spectrum",
       "Spectra of every head of a checkpoint (or of a fresh network)",
       {"spectrum.checkpoint", "spectrum.resolution", "spectrum.bins", "spectrum.input_dim", "spectrum.hidden_dim", "spectrum.layers",
        "spectrum.bandwidth"},
       {{"--checkpoint", "spectrum.checkpoint", "Network checkpoint"},
        {"--resolution", "spectrum.resolution", "Samples per axis"},
        {"--bandwidth", "spectrum.bandwidth", "Total bandwidth of a fresh network"}},
       analyze_spectrum},
      {"verify-init",
       "Activation statistics at initialization against closed forms",
       {"init.hidden_dim", "init.layers", "init.bandwidth_rad", "init.samples", "init.quantize"},
       {{"--d-h", "init.hidden_dim", "Hidden width"},
        {"--layers", "init.layers", "Sine layers"},
        {"--bandwidth-rad", "init.bandwidth_rad", "Per-layer frequency bound, radians"},
        {"--samples", "init.samples", "Input samples"}},
       verify_init},
      {"bench-idft",
       "Network evaluation vs explicit inverse DFT / FFT timing",
       {"bench.sizes", "bench.samples", "bench.hidden_dim", "bench.layers", "bench.repeats"},
       {{"--sizes", "bench.sizes", "Comma-separated spectrum sizes (powers of two)"},
        {"--samples", "bench.samples", "Comma-separated sample counts"}},
       bench_idft},
  };
}

inline void error_record(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  nlohmann::json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  err << j.dump() << '\n';
}

// Exit codes: 0 success, 2 bad command line or configuration, 1 runtime failure.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Band-limited coordinate networks: fitting, extraction and analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  struct Parsed {
    std::string config, out = "out";
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flag_values;
  };
  const auto table = tasks();
  std::vector<Parsed> parsed(table.size());
  std::vector<CLI::App*> subs;
  std::vector<std::vector<CLI::Option*>> flag_opts(table.size());
  for (std::size_t t = 0; t < table.size(); ++t) {
    auto* sub = app.add_subcommand(table[t].name, table[t].help);
    auto& p = parsed[t];
    sub->add_option("--config", p.config, "INI config file");
    sub->add_option("--out", p.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", p.seed, "Top-level random seed")->capture_default_str();
    sub->add_option("--threads", p.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--set", p.sets, "Override: section.key=value (repeatable)");
    for (const auto& f : table[t].flags) flag_opts[t].push_back(sub->add_option(f.name, p.flag_values[f.key], f.help + " [" + f.key + "]"));
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    error_record(err, "usage", e.what(), 2);
    return 2;
  }

  std::size_t t = 0;
  while (t < subs.size() && !subs[t]->parsed()) ++t;
  const auto& task = table[t];
  const auto& p = parsed[t];
  auto keys = task.keys;
  keys.insert({"run.seed", "run.threads"});

  Context ctx;
  try {
    ctx.config = p.config.empty() ? Config(keys) : Config::load(p.config, keys);
    for (const auto& s : p.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
      ctx.config.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (std::size_t f = 0; f < task.flags.size(); ++f)
      if (flag_opts[t][f]->count()) ctx.config.set(task.flags[f].key, p.flag_values.at(task.flags[f].key));
    if (task.name == "fit-sdf" && flag_opts[t][0]->count()) ctx.config.set("sdf.shape", "mesh");
    const auto* seed_opt = subs[t]->get_option("--seed");
    const auto* threads_opt = subs[t]->get_option("--threads");
    if (seed_opt->count()) ctx.config.set("run.seed", std::to_string(p.seed));
    if (threads_opt->count()) ctx.config.set("run.threads", std::to_string(p.threads));
    ctx.seed = ctx.config.get<std::uint64_t>("run.seed", 0);
    const int threads = ctx.config.get("run.threads", 1);
    if (threads < 1) throw ConfigError("run.threads must be >= 1");
    set_thread_limit(threads);
    ctx.out = p.out;
    ctx.log = &out;
    ctx.provenance = {ctx.seed, ctx.config.hash()};
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + ctx.out.string() + ": " + ec.message());
  } catch (const ConfigError& e) {
    error_record(err, "config", e.what(), 2);
    return 2;
  }

  try {
    task.run(ctx);
  } catch (const ConfigError& e) {
    error_record(err, "config", e.what(), 2);
    return 2;
  } catch (const std::exception& e) {
    error_record(err, "runtime", e.what(), 1);
    return 1;
  }
  return 0;
}

}  // namespace bacon::cli
