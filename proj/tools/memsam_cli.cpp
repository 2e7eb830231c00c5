// memsam: build exemplar banks, segment images, evaluate and ablate.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 backend, 4 pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "memsam/backend.hpp"
#include "memsam/dataset.hpp"
#include "memsam/error.hpp"
#include "memsam/image_io.hpp"
#include "memsam/memory_bank.hpp"
#include "memsam/metrics.hpp"
#include "memsam/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace memsam;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kBackend = 3, kPipeline = 4 };

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
      return kUsage;
    case ErrorCode::IoError:
    case ErrorCode::MissingFile:
    case ErrorCode::MissingManifest:
    case ErrorCode::BadManifest:
    case ErrorCode::BadMagic:
    case ErrorCode::VersionMismatch:
    case ErrorCode::Truncated:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::UnmatchedPairs:
      return kIo;
    case ErrorCode::BackendError:
    case ErrorCode::PromptError:
      return kBackend;
    default:
      return kPipeline;
  }
}

struct PipelineFlags {
  std::string backend = "mock";
  double tau_fg = 0.9;
  double tau_bg = 0.9;
  std::string fg_strategy = "most-confident";
  std::string bg = "all";
  std::size_t jobs = 1;

  void attach(CLI::App& app, bool prompts) {
    app.add_option("--backend", backend, "mock or bridge:<command>")->capture_default_str();
    app.add_option("--jobs", jobs, "parallel queries (and bridge processes)")
        ->capture_default_str();
    if (!prompts) return;
    app.add_option("--tau-fg", tau_fg, "foreground similarity threshold")->capture_default_str();
    app.add_option("--tau-bg", tau_bg, "background similarity threshold")->capture_default_str();
    app.add_option("--fg-strategy", fg_strategy, "most-confident or kmeans")
        ->capture_default_str();
    app.add_option("--bg", bg, "background prompts: all, N, or 0 for none")
        ->capture_default_str();
  }

  PipelineConfig config() const {
    for (double tau : {tau_fg, tau_bg}) {
      if (!(tau > 0.0 && tau <= 1.0)) {
        throw Error(ErrorCode::ConfigError, "thresholds must lie in (0, 1]");
      }
    }
    if (jobs < 1) throw Error(ErrorCode::ConfigError, "--jobs must be >= 1");
    PipelineConfig c;
    c.match = {tau_fg, tau_bg};
    c.policy = {parse_fg_strategy(fg_strategy), BgMode::parse(bg)};
    c.jobs = jobs;
    return c;
  }

  std::unique_ptr<Backend> make() const {
    BackendDescriptor d = BackendDescriptor::parse(backend);
    d.bridge.connections = std::max<std::size_t>(jobs, 1);
    return make_backend(d);
  }
};

struct SplitFlags {
  std::string which = "query";
  std::uint64_t seed = 42;
  double ratio = 0.70;

  void attach(CLI::App& app, std::vector<std::string> choices) {
    app.add_option("--split", which, "which side of the split to use")
        ->check(CLI::IsMember(choices))
        ->capture_default_str();
    app.add_option("--seed", seed, "split seed")->capture_default_str();
    app.add_option("--ratio", ratio, "support fraction")->capture_default_str();
  }

  SplitSpec spec() const {
    SplitSpec s{ratio, seed};
    s.validate();
    return s;
  }

  json to_json() const { return {{"split", which}, {"seed", seed}, {"ratio", ratio}}; }

  // Samples on the chosen side; "all" keeps everything.
  std::vector<Sample> select(const std::vector<Sample>& samples) const {
    if (which == "all") return samples;
    std::vector<std::string> ids;
    for (const auto& s : samples) ids.push_back(s.id);
    const Split split = split_dataset(ids, spec());
    return select_samples(samples, which == "support" ? split.support : split.query);
  }
};

void write_json(const fs::path& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_extension(suffix);
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<Point> points_of(std::span<const PointPrompt> prompts) {
  std::vector<Point> out;
  for (const auto& p : prompts) out.push_back(p.point);
  return out;
}

void write_overlay(const fs::path& image, const BinaryMask& mask, const PromptSet& prompts,
                   const fs::path& out) {
  const std::vector<Point> fg{prompts.foreground().point};
  const auto bg = points_of(prompts.background());
  write_rgb_png(render_overlay(read_rgb_image(image), mask, fg, bg), out);
}

// Near-duplicate removal over the whole dataset, ahead of any split, so a
// query never has a near-copy in the bank.
std::vector<Sample> dedup_samples(const std::vector<Sample>& samples, const Backend& backend,
                                  double threshold, std::vector<std::string>& removed) {
  std::vector<std::vector<float>> descriptors;
  descriptors.reserve(samples.size());
  for (const auto& s : samples) {
    descriptors.push_back(global_descriptor(backend.extract_features(s.image)));
  }
  const auto kept = dedup_positions(descriptors, threshold);
  std::vector<Sample> out;
  std::size_t next = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (next < kept.size() && kept[next] == k) {
      out.push_back(samples[k]);
      ++next;
    } else {
      removed.push_back(samples[k].id);
    }
  }
  return out;
}

// Dataset scan, optional union dedup, then the split selection.
std::vector<Sample> select_queries(const fs::path& data, const std::optional<double>& threshold,
                                   const Backend& backend, const SplitFlags& split) {
  auto samples = scan_dataset(data);
  if (threshold) {
    std::vector<std::string> removed;
    samples = dedup_samples(samples, backend, *threshold, removed);
  }
  auto queries = split.select(samples);
  if (queries.empty()) {
    throw Error(ErrorCode::EmptyInput, "the " + split.which + " split is empty");
  }
  return queries;
}

// Commands ----------------------------------------------------------------

struct BuildMemory {
  fs::path images, masks, out;
  std::optional<double> dedup_threshold;
  std::string dedup_scope = "union";
  PipelineFlags pipeline;
  SplitFlags split{"all"};

  void attach(CLI::App& app) {
    app.add_option("--images", images, "image directory")->required();
    app.add_option("--masks", masks, "mask directory (paired by file stem)")->required();
    app.add_option("--out", out, "bank directory")->required();
    app.add_option("--dedup-threshold", dedup_threshold,
                   "drop entries whose descriptor similarity to a kept one reaches this");
    app.add_option("--dedup-scope", dedup_scope,
                   "union: dedup all pairs before splitting; bank: only the selected entries")
        ->check(CLI::IsMember({"union", "bank"}))
        ->capture_default_str();
    pipeline.attach(app, false);
    split.attach(app, {"all", "support", "query"});
  }

  int run() {
    if (pipeline.jobs < 1) throw Error(ErrorCode::ConfigError, "--jobs must be >= 1");
    auto backend = pipeline.make();
    auto samples = scan_pairs(images, masks);
    std::vector<std::string> removed;
    if (dedup_threshold && dedup_scope == "union") {
      samples = dedup_samples(samples, *backend, *dedup_threshold, removed);
    }
    samples = split.select(samples);
    if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no image/mask pairs selected");
    MemoryBank bank = build_bank_from_samples(samples, *backend, pipeline.jobs);
    if (dedup_threshold && dedup_scope == "bank") {
      DedupResult d = dedup(bank, *dedup_threshold);
      bank = std::move(d.bank);
      removed = std::move(d.removed);
    }
    save_bank(bank, out);
    json config = {{"command", "build-memory"},
                   {"images", images.string()},
                   {"masks", masks.string()},
                   {"backend", backend->describe()},
                   {"selection", split.to_json()},
                   {"entries", bank.size()},
                   {"removed", removed}};
    if (dedup_threshold) {
      config["dedup_threshold"] = *dedup_threshold;
      config["dedup_scope"] = dedup_scope;
    }
    write_json(out / "config.json", config);
    std::printf("bank: %zu entries written to %s\n", bank.size(), out.c_str());
    std::printf("dedup: %zu removed", removed.size());
    for (const auto& id : removed) std::printf(" %s", id.c_str());
    std::printf("\n");
    return kOk;
  }
};

struct Segment {
  fs::path query, memory, out;
  std::optional<fs::path> gt;
  PipelineFlags pipeline;

  void attach(CLI::App& app) {
    app.add_option("--query", query, "query image")->required();
    app.add_option("--memory", memory, "bank directory")->required();
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--gt", gt, "ground-truth mask for scoring");
    pipeline.attach(app, true);
  }

  int run() {
    const PipelineConfig config = pipeline.config();
    const MemoryBank bank = load_bank(memory);
    auto backend = pipeline.make();
    const QueryAnalysis analysis = analyze_query(query, bank, *backend, config.match);
    const PromptOutcome prompts = make_prompts(analysis.matches, config.policy);
    if (prompts.warning) std::fprintf(stderr, "warning: %s\n", prompts.warning->c_str());
    const SegmentOutcome seg = segment_query(query, prompts.prompts, *backend);

    ensure_dir(out);
    write_file_atomic(out / "mask.png", encode_mask_png(seg.mask()));
    write_json(out / "prompts.json", to_json(prompts.prompts));
    write_json(out / "retrieval.json", {{"exemplar_id", analysis.exemplar_id},
                                        {"similarity", analysis.hit.similarity},
                                        {"fg_candidates", analysis.matches.fg.size()},
                                        {"bg_candidates", analysis.matches.bg.size()},
                                        {"mask_score", seg.score()},
                                        {"mask_candidates", seg.candidates.size()}});
    write_overlay(query, seg.mask(), prompts.prompts, out / "overlay.png");
    json echo = config_to_json(config);
    echo["command"] = "segment";
    echo["query"] = query.string();
    echo["memory"] = memory.string();
    echo["backend"] = backend->describe();
    write_json(out / "config.json", echo);

    std::printf("exemplar %s (similarity %.4f), %zu FG / %zu BG prompts\n",
                analysis.exemplar_id.c_str(), analysis.hit.similarity, std::size_t{1},
                prompts.prompts.background().size());
    if (gt) {
      const BinaryMask truth = read_mask_png(*gt);
      const SegmentationScores s = compute_metrics(seg.mask(), truth);
      std::size_t leaks = 0;
      for (Point p : prompts.would_be_bg) {
        if (seg.mask().contains(p) && !truth.contains(p)) ++leaks;
      }
      write_json(out / "metrics.json", {{"iou_fg", s.iou_fg},
                                        {"iou_bg", s.iou_bg},
                                        {"miou", s.miou},
                                        {"mpa", s.mpa},
                                        {"acc", s.acc},
                                        {"leak_points", leaks}});
      std::printf("mIoU %.4f  mPA %.4f  Acc %.4f  leak points %zu\n", s.miou, s.mpa, s.acc,
                  leaks);
    }
    return kOk;
  }
};

struct Evaluate {
  fs::path data, memory, report;
  std::optional<fs::path> overlays;
  std::optional<double> dedup_threshold;
  PipelineFlags pipeline;
  SplitFlags split;

  void attach(CLI::App& app) {
    app.add_option("--data", data, "dataset directory with images/ and masks/")->required();
    app.add_option("--memory", memory, "bank directory")->required();
    app.add_option("--report", report, "report JSON path (table written beside it)")
        ->required();
    app.add_option("--overlays", overlays, "directory for per-image overlay PNGs");
    app.add_option("--dedup-threshold", dedup_threshold,
                   "repeat build-memory's union dedup so the split matches");
    pipeline.attach(app, true);
    split.attach(app, {"support", "query"});
  }

  int run() {
    const PipelineConfig config = pipeline.config();
    auto backend = pipeline.make();
    const auto queries = select_queries(data, dedup_threshold, *backend, split);
    const MemoryBank bank = load_bank(memory);
    EvalReport result = run_pipeline(queries, bank, *backend, config);
    result.config["command"] = "evaluate";
    result.config["data"] = data.string();
    result.config["memory"] = memory.string();
    result.config["selection"] = split.to_json();
    if (dedup_threshold) result.config["dedup_threshold"] = *dedup_threshold;

    if (report.has_parent_path()) ensure_dir(report.parent_path());
    write_json(report, to_json(result));
    const std::string table = render_table(result);
    write_file_atomic(sibling(report, ".txt"), table);
    std::fputs(table.c_str(), stdout);

    if (overlays) {
      ensure_dir(*overlays);
      for (const auto& q : queries) {
        try {
          const auto a = analyze_query(q.image, bank, *backend, config.match);
          const auto p = make_prompts(a.matches, config.policy);
          const auto seg = segment_query(q.image, p.prompts, *backend);
          write_overlay(q.image, seg.mask(), p.prompts, *overlays / (q.id + ".png"));
        } catch (const Error&) {
          // Already recorded as a failure in the report.
        }
      }
    }
    return kOk;
  }
};

template <typename T>
std::vector<T> parse_list(const std::string& text, T (*parse)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse(item));
  if (out.empty()) throw Error(ErrorCode::ConfigError, "empty list '" + text + "'");
  return out;
}

std::size_t parse_size(const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size()) {
    throw Error(ErrorCode::ConfigError, "not a count: '" + text + "'");
  }
  return static_cast<std::size_t>(v);
}

BgMode parse_bg(const std::string& text) { return BgMode::parse(text); }

struct Ablate {
  std::string mode;
  fs::path data, memory;
  std::optional<fs::path> report;
  std::string bg_modes = "5,20,all";
  std::string pools = "1,10,20";
  std::uint64_t pool_seed = 42;
  std::optional<double> dedup_threshold;
  PipelineFlags pipeline;
  SplitFlags split;

  void attach(CLI::App& app) {
    app.add_option("--mode", mode, "bg or memory")
        ->required()
        ->check(CLI::IsMember({"bg", "memory"}));
    app.add_option("--data", data, "dataset directory with images/ and masks/")->required();
    app.add_option("--memory", memory,
                   "bank directory (for --mode memory: the full support pool)")
        ->required();
    app.add_option("--report", report, "JSON path for all runs (table written beside it)");
    app.add_option("--bg-modes", bg_modes, "comma-separated BG modes")->capture_default_str();
    app.add_option("--pools", pools, "comma-separated pool sizes")->capture_default_str();
    app.add_option("--pool-seed", pool_seed, "pool sampling seed")->capture_default_str();
    app.add_option("--dedup-threshold", dedup_threshold,
                   "repeat build-memory's union dedup so the split matches");
    pipeline.attach(app, true);
    split.attach(app, {"support", "query"});
  }

  int run() {
    const PipelineConfig config = pipeline.config();
    const auto modes = parse_list<BgMode>(bg_modes, parse_bg);
    const auto sizes = parse_list<std::size_t>(pools, parse_size);
    auto backend = pipeline.make();
    const auto queries = select_queries(data, dedup_threshold, *backend, split);
    const MemoryBank bank = load_bank(memory);

    std::vector<TableRow> rows;
    json runs = json::array();
    std::string header;
    if (mode == "bg") {
      header = "BG points";
      for (auto& row : ablate_bg(queries, bank, *backend, modes, config)) {
        rows.push_back({row.mode.label(), row.report.aggregate});
        runs.push_back({{"bg_mode", row.mode.label()}, {"report", to_json(row.report)}});
      }
    } else {
      header = "pool size";
      for (auto& row : ablate_memory(queries, bank, *backend, sizes, pool_seed, config)) {
        rows.push_back({std::to_string(row.pool_size), row.report.aggregate});
        runs.push_back({{"pool_size", row.pool_size},
                        {"pool_ids", row.pool_ids},
                        {"report", to_json(row.report)}});
      }
    }
    const std::string table = render_comparison(header, rows);
    std::fputs(table.c_str(), stdout);
    if (report) {
      if (report->has_parent_path()) ensure_dir(report->parent_path());
      json echo = config_to_json(config);
      echo["command"] = "ablate";
      echo["mode"] = mode;
      echo["data"] = data.string();
      echo["memory"] = memory.string();
      echo["selection"] = split.to_json();
      echo["backend"] = backend->describe();
      if (mode == "memory") echo["pool_seed"] = pool_seed;
      if (dedup_threshold) echo["dedup_threshold"] = *dedup_threshold;
      write_json(*report, {{"config", echo}, {"runs", runs}});
      write_file_atomic(sibling(*report, ".txt"), table);
    }
    return kOk;
  }
};

struct Synth {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string family = "simple";
  fs::path out;

  void attach(CLI::App& app) {
    app.add_option("--count", count, "number of scenes")->required();
    app.add_option("--seed", seed, "generator seed")->required();
    app.add_option("--family", family, "simple or adversarial")
        ->check(CLI::IsMember({"simple", "adversarial"}))
        ->capture_default_str();
    app.add_option("--out", out, "output directory")->required();
  }

  int run() {
    const auto samples = synth_dataset(count, seed, parse_synth_family(family));
    write_synth_dataset(samples, out);
    write_json(out / "config.json",
               {{"command", "synth"}, {"count", count}, {"seed", seed}, {"family", family}});
    std::printf("%zu %s scenes written to %s\n", samples.size(), family.c_str(), out.c_str());
    return kOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exemplar-retrieval point prompting for promptable segmenters"};
  app.require_subcommand(1);

  BuildMemory build;
  Segment segment;
  Evaluate evaluate;
  Ablate ablate;
  Synth synth;
  build.attach(*app.add_subcommand("build-memory", "build an exemplar bank from image/mask pairs"));
  segment.attach(*app.add_subcommand("segment", "segment one image"));
  evaluate.attach(*app.add_subcommand("evaluate", "score the pipeline on a dataset split"));
  ablate.attach(*app.add_subcommand("ablate", "compare BG prompt modes or memory pool sizes"));
  synth.attach(*app.add_subcommand("synth", "generate a synthetic dataset"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand("build-memory")) return build.run();
    if (app.got_subcommand("segment")) return segment.run();
    if (app.got_subcommand("evaluate")) return evaluate.run();
    if (app.got_subcommand("ablate")) return ablate.run();
    return synth.run();
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    if (e.code() == ErrorCode::NoForeground) {
      std::fprintf(stderr, "hint: no query patch reached tau_fg; try a lower --tau-fg\n");
    }
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kPipeline;
  }
}
