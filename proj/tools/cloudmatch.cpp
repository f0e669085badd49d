#include "cloudmatch/cloudmatch.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cloudmatch;

namespace {

constexpr std::uint64_t kDefaultSeed = 0;

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --seed wins over CLOUDMATCH_SEED, which wins over the default.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  std::uint64_t seed = kDefaultSeed;
  if (flag) {
    seed = *flag;
  } else if (const char* env = std::getenv("CLOUDMATCH_SEED"); env != nullptr && *env) {
    const std::string s(env);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw PipelineError("CLOUDMATCH_SEED is not an unsigned integer: '" + s + "'");
    }
  }
  std::cerr << "seed: " << seed << "\n";
  return seed;
}

// *.ply files in name order; the stem is the label.
std::vector<std::pair<std::string, fs::path>> list_clouds(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw PipelineError("not a directory: '" + dir.string() + "'");
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ply") {
      out.emplace_back(e.path().stem().string(), e.path());
    }
  }
  if (out.empty()) throw PipelineError("no .ply files in '" + dir.string() + "'");
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<GalleryEntry> load_gallery(const fs::path& dir, std::size_t nbhd) {
  std::vector<GalleryEntry> gallery;
  for (const auto& [label, path] : list_clouds(dir)) {
    gallery.emplace_back(label, ply::read_cloud(path), nbhd);
  }
  return gallery;
}

void parse_sweep(const std::string& text, io::RunConfig& cfg) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t comma; (comma = text.find(',', start)) != std::string::npos;) {
    parts.push_back(text.substr(start, comma - start));
    start = comma + 1;
  }
  parts.push_back(text.substr(start));
  if (parts.size() != 3) throw CLI::ValidationError("--sweep", "expected min,max,count");
  try {
    std::size_t used = 0;
    cfg.sweep_min = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("min");
    cfg.sweep_max = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("max");
    const long long count = std::stoll(parts[2], &used);
    if (used != parts[2].size() || count < 1) throw std::invalid_argument("count");
    cfg.sweep_count = static_cast<std::size_t>(count);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--sweep", "expected min,max,count");
  }
  if (!(cfg.sweep_max >= cfg.sweep_min)) {
    throw CLI::ValidationError("--sweep", "max must be >= min");
  }
}

int run_align(const std::string& src, const std::string& dst, const IcpParams& base,
              const std::optional<std::uint64_t>& seed_flag, const std::string& out_json,
              const std::string& out_ply) {
  IcpParams p = base;
  p.rng_seed = resolve_seed(seed_flag);
  const PointCloud source = ply::read_cloud(fs::path(src));
  const PointCloud destination = ply::read_cloud(fs::path(dst));
  const IcpResult r = align(source, destination, p);
  const std::string json = io::transform_to_json(r, p.rng_seed).dump(2) + "\n";
  if (out_json.empty()) {
    std::cout << json;
  } else {
    io::write_text(out_json, json);
  }
  if (!out_ply.empty()) ply::write_cloud(r.aligned, fs::path(out_ply));
  return 0;
}

int run_distance(const std::string& a, const std::string& b, double k, bool symmetric) {
  const PointCloud ca = ply::read_cloud(fs::path(a));
  const PointCloud cb = ply::read_cloud(fs::path(b));
  std::cout << io::trimmed_distance_csv_header() << "\n";
  if (symmetric) {
    // Both directions, then their mean.
    const auto ab = trimmed_cloud_distance(ca, cb, k);
    const auto ba = trimmed_cloud_distance(cb, ca, k);
    std::cout << io::trimmed_distance_csv_row(ab) << "\n"
              << io::trimmed_distance_csv_row(ba) << "\n"
              << "symmetric," << io::format_real((ab.distance + ba.distance) / 2.0) << "\n";
  } else {
    std::cout << io::trimmed_distance_csv_row(trimmed_cloud_distance(ca, cb, k)) << "\n";
  }
  return 0;
}

int run_match(const std::string& probe_path, const std::string& gallery_dir,
              const MatchOptions& options, const std::optional<std::uint64_t>& seed_flag,
              unsigned threads) {
  const std::uint64_t seed = resolve_seed(seed_flag);
  const PointCloud probe = ply::read_cloud(fs::path(probe_path));
  const auto gallery = load_gallery(gallery_dir, options.icp.normal_neighborhood);
  const ScoreMatrix m = score_all({{"probe", probe}}, gallery, options, seed, threads);
  std::vector<std::size_t> order(m.cols());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return m(0, a) < m(0, b); });
  std::cout << "rank,identity,score\n";
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t j = order[r];
    const bool failed = std::find(m.failed.begin(), m.failed.end(),
                                  std::pair<std::size_t, std::size_t>{0, j}) != m.failed.end();
    std::cout << r + 1 << "," << m.gallery[j] << ","
              << (failed ? std::string("failed") : io::format_real(m(0, j))) << "\n";
  }
  return 0;
}

int run_eval(io::RunConfig cfg, const std::optional<std::uint64_t>& seed_flag,
             unsigned threads, bool write_scores) {
  cfg.seed = resolve_seed(seed_flag);
  const auto gallery = load_gallery(cfg.gallery_dir, cfg.icp.normal_neighborhood);
  std::vector<Probe> probes;
  for (const auto& [label, path] : list_clouds(cfg.probes_dir)) {
    probes.push_back({label, ply::read_cloud(path)});
  }
  const GroundTruth truth = io::parse_truth_csv(io::read_text(cfg.truth_path), cfg.truth_path);

  MatchOptions options;
  options.icp = cfg.icp;
  options.k = cfg.k;
  options.direction = cfg.symmetric ? ScoreDirection::kSymmetric : ScoreDirection::kProbeToGallery;
  const ScoreMatrix m = score_all(probes, gallery, options, cfg.seed, threads);
  for (const auto& [i, j] : m.failed) {
    std::cerr << "warning: match failed for " << m.probes[i] << " vs " << m.gallery[j] << "\n";
  }

  const auto report = verification_report(
      m, truth, threshold_sweep(cfg.sweep_min, cfg.sweep_max, cfg.sweep_count));
  const auto cmc = cmc_curve(m, truth);

  const fs::path out = cfg.output_dir.empty() ? fs::path(".") : fs::path(cfg.output_dir);
  fs::create_directories(out);
  io::write_text(out / "roc.csv", io::roc_csv(report));
  io::write_text(out / "cmc.csv", io::cmc_csv(cmc));
  io::write_text(out / "config.json", io::to_json(cfg).dump(2) + "\n");
  if (write_scores) io::write_text(out / "scores.csv", io::scores_csv(m));

  std::cout << "eer," << io::format_real(report.eer) << "\n"
            << "eer_threshold," << io::format_real(report.eer_threshold) << "\n"
            << "rank1," << io::format_real(cmc.rank_rates.front()) << "\n";
  return 0;
}

int run_synth(std::size_t identities, std::size_t captures, const synth::BenchmarkTemplate& t,
              const std::optional<std::uint64_t>& seed_flag, const std::string& out_dir) {
  const std::uint64_t seed = resolve_seed(seed_flag);
  const auto b = synth::build_benchmark(identities, captures, t, seed);
  const fs::path out(out_dir);
  fs::create_directories(out / "gallery");
  fs::create_directories(out / "probes");
  for (const auto& g : b.gallery) {
    ply::write_cloud(g.model(), out / "gallery" / (g.identity() + ".ply"));
  }
  for (const auto& p : b.probes) ply::write_cloud(p.cloud, out / "probes" / (p.label + ".ply"));
  io::write_text(out / "truth.csv", io::truth_csv(b.truth));
  return 0;
}

void add_icp_options(CLI::App* cmd, IcpParams& p) {
  cmd->add_option("--sample-size", p.sample_size, "points sampled per iteration")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--iterations", p.iterations, "ICP iterations")->check(CLI::PositiveNumber);
  cmd->add_option("--outlier-k", p.outlier_k, "reject pairs beyond k x median")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--normal-k", p.normal_neighborhood, "neighbours for normal estimation")
      ->check(CLI::Range(3, 1 << 20));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud registration and biometric matching"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  IcpParams icp;
  unsigned threads = 1;

  auto* align_cmd = app.add_subcommand("align", "register src onto dst");
  std::string src, dst, out_json, out_ply;
  align_cmd->add_option("src", src, "source PLY")->required();
  align_cmd->add_option("dst", dst, "destination PLY")->required();
  add_icp_options(align_cmd, icp);
  align_cmd->add_option("--seed", seed, "sampling seed");
  align_cmd->add_option("--out", out_json, "transform JSON (default: stdout)");
  align_cmd->add_option("--aligned", out_ply, "write the aligned source cloud");

  auto* dist_cmd = app.add_subcommand("distance", "trimmed distance from a to b");
  std::string a, b;
  double k = kDefaultOutlierK;
  bool symmetric = false;
  dist_cmd->add_option("a", a, "source PLY")->required();
  dist_cmd->add_option("b", b, "destination PLY")->required();
  dist_cmd->add_option("--k", k, "outlier multiplier")->check(CLI::PositiveNumber);
  dist_cmd->add_flag("--symmetric", symmetric, "also report b->a and the mean");

  auto* match_cmd = app.add_subcommand("match", "rank gallery models for one probe");
  std::string probe, gallery_dir;
  match_cmd->add_option("probe", probe, "probe PLY")->required();
  match_cmd->add_option("--gallery", gallery_dir, "directory of gallery PLY files")->required();
  add_icp_options(match_cmd, icp);
  match_cmd->add_option("--k", k, "outlier multiplier")->check(CLI::PositiveNumber);
  match_cmd->add_flag("--symmetric", symmetric, "score in both directions");
  match_cmd->add_option("--seed", seed, "base seed");
  match_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* eval_cmd = app.add_subcommand("eval", "score probes against the gallery");
  io::RunConfig cfg;
  std::string sweep, config_path;
  bool write_scores = false;
  eval_cmd->add_option("--gallery", cfg.gallery_dir, "directory of gallery PLY files");
  eval_cmd->add_option("--probes", cfg.probes_dir, "directory of probe PLY files");
  eval_cmd->add_option("--truth", cfg.truth_path, "truth CSV (probe_id,identity)");
  eval_cmd->add_option("--sweep", sweep, "threshold sweep min,max,count");
  eval_cmd->add_option("--out", cfg.output_dir, "output directory (default: .)");
  eval_cmd->add_option("--config", config_path, "run config JSON; flags override it");
  add_icp_options(eval_cmd, icp);
  eval_cmd->add_option("--k", k, "outlier multiplier")->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--symmetric", symmetric, "score in both directions");
  eval_cmd->add_option("--seed", seed, "base seed");
  eval_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--scores", write_scores, "also write scores.csv");

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic benchmark");
  std::size_t identities = 27, captures = 3;
  synth::BenchmarkTemplate tmpl;
  std::string synth_out;
  synth_cmd->add_option("--identities", identities, "number of identities")
      ->check(CLI::Range(2, 100000));
  synth_cmd->add_option("--captures", captures, "captures per identity (first is enrolled)")
      ->check(CLI::Range(2, 1000));
  synth_cmd->add_option("--points", tmpl.point_count, "points per capture")
      ->check(CLI::Range(100, 100000000));
  synth_cmd->add_option("--noise", tmpl.noise_sigma, "noise sigma as a fraction of diameter")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--crop", tmpl.crop_fraction, "fraction of points cropped")
      ->check(CLI::Range(0.0, 0.99));
  synth_cmd->add_option("--seed", seed, "master seed");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();

  try {
    app.parse(argc, argv);
    if (*eval_cmd) {
      if (!config_path.empty()) {
        const io::RunConfig base = io::run_config_from_json(
            nlohmann::json::parse(io::read_text(config_path)));
        // Explicit flags override the file.
        auto keep = [&](const char* flag, auto& field, const auto& from_file) {
          if (eval_cmd->count(flag) == 0) field = from_file;
        };
        keep("--gallery", cfg.gallery_dir, base.gallery_dir);
        keep("--probes", cfg.probes_dir, base.probes_dir);
        keep("--truth", cfg.truth_path, base.truth_path);
        keep("--out", cfg.output_dir, base.output_dir);
        keep("--sample-size", icp.sample_size, base.icp.sample_size);
        keep("--iterations", icp.iterations, base.icp.iterations);
        keep("--outlier-k", icp.outlier_k, base.icp.outlier_k);
        keep("--normal-k", icp.normal_neighborhood, base.icp.normal_neighborhood);
        keep("--k", k, base.k);
        keep("--symmetric", symmetric, base.symmetric);
        if (!seed && std::getenv("CLOUDMATCH_SEED") == nullptr) seed = base.seed;
        if (sweep.empty()) {
          cfg.sweep_min = base.sweep_min;
          cfg.sweep_max = base.sweep_max;
          cfg.sweep_count = base.sweep_count;
        }
      }
      if (!sweep.empty()) parse_sweep(sweep, cfg);
      if (cfg.gallery_dir.empty() || cfg.probes_dir.empty() || cfg.truth_path.empty() ||
          cfg.sweep_count == 0) {
        throw CLI::RequiredError("--gallery, --probes, --truth and --sweep");
      }
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cloudmatch: error: " << e.what() << "\n";
    return 1;
  }

  try {
    icp.validate();
    if (*align_cmd) return run_align(src, dst, icp, seed, out_json, out_ply);
    if (*dist_cmd) return run_distance(a, b, k, symmetric);
    MatchOptions options;
    options.icp = icp;
    options.k = k;
    options.direction = symmetric ? ScoreDirection::kSymmetric : ScoreDirection::kProbeToGallery;
    if (*match_cmd) return run_match(probe, gallery_dir, options, seed, threads);
    if (*eval_cmd) {
      cfg.icp = icp;
      cfg.k = k;
      cfg.symmetric = symmetric;
      return run_eval(cfg, seed, threads, write_scores);
    }
    if (*synth_cmd) return run_synth(identities, captures, tmpl, seed, synth_out);
  } catch (const std::exception& e) {
    std::cerr << "cloudmatch: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
