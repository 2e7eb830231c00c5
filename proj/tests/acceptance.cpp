// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Oracles come from support/test_support.hpp.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "memsam/dataset.hpp"
#include "memsam/memory_bank.hpp"
#include "memsam/metrics.hpp"
#include "memsam/mock_backend.hpp"
#include "memsam/pipeline.hpp"
#include "support/test_support.hpp"

#ifndef MEMSAM_CLI_PATH
#error "MEMSAM_CLI_PATH must point at the memsam executable"
#endif

namespace memsam {
namespace {

namespace fs = std::filesystem;
namespace oracle = testing::oracle;
using testing::TempDir;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

struct Criterion {
  std::string name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::uint32_t> side(16, 256);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  Outcome out;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto h = side(rng), w = side(rng);
    const BinaryMask gt = testing::random_mask(rng, h, w, frac(rng));
    const BinaryMask pred = testing::random_mask(rng, h, w, frac(rng));
    const auto got = compute_metrics(pred, gt);
    const auto want = oracle::scores(pred, gt);
    for (auto [a, b] : {std::pair{got.iou_fg, want.iou_fg}, {got.iou_bg, want.iou_bg},
                        {got.miou, want.miou}, {got.mpa, want.mpa}, {got.acc, want.acc}}) {
      worst = std::max(worst, std::abs(a - b));
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max deviation %.3g", worst);
  if (worst > 1e-9) out.fail(buf);
  if (out.pass) out.detail = std::string("1000 pairs, ") + buf;
  return out;
}

Outcome retrieval_exactness() {
  std::mt19937_64 rng(1002);
  Outcome out;
  std::size_t ties = 0;
  for (int b = 0; b < 200 && out.pass; ++b) {
    const std::size_t size = 1 + rng() % 128;
    const auto dim = static_cast<std::uint32_t>(1 + rng() % 64);
    std::vector<ExemplarInput> inputs;
    std::vector<std::vector<float>> planted;
    for (std::size_t m = 0; m < size; ++m) {
      std::vector<float> v = (m > 0 && rng() % 4 == 0) ? planted[rng() % m]
                                                        : testing::random_unit_vector(rng, dim);
      planted.push_back(v);
      inputs.push_back({"e" + std::to_string(m), "e.png", BinaryMask(16, 16),
                        FeatureGrid(1, 1, dim, v, 16, {16, 16})});
    }
    const MemoryBank bank = build_bank(std::move(inputs));
    std::vector<std::vector<float>> rows;
    for (const auto& e : bank.entries()) rows.push_back(e.descriptor);

    for (int q = 0; q < 3; ++q) {
      const std::vector<float> query =
          q == 0 ? rows[rng() % size] : testing::random_unit_vector(rng, dim);
      const std::size_t k = q == 2 ? size : 1 + rng() % size;
      const auto got = retrieve(query, bank, k);
      const auto want = oracle::retrieve(query, rows, k);
      if (got.size() != want.size()) {
        out.fail("bank " + std::to_string(b) + ": size mismatch");
        break;
      }
      for (std::size_t r = 0; r < k; ++r) {
        if (r > 0 && want[r].second == want[r - 1].second) ++ties;
        if (got[r].entry != want[r].first ||
            std::abs(got[r].similarity - want[r].second) > 1e-12) {
          out.fail("bank " + std::to_string(b) + " rank " + std::to_string(r) + ": entry " +
                   std::to_string(got[r].entry) + " vs " + std::to_string(want[r].first));
          break;
        }
      }
    }
  }
  if (out.pass) out.detail = "200 banks, " + std::to_string(ties) + " tied ranks checked";
  return out;
}

Outcome matching_equivalence() {
  std::mt19937_64 rng(1003);
  const std::vector<double> taus{0.0, 0.5, 0.9, 0.99};
  Outcome out;
  std::size_t accepted = 0;
  for (int t = 0; t < 100 && out.pass; ++t) {
    const auto dim = static_cast<std::uint32_t>(1 + rng() % 16);
    const FeatureGrid query = testing::random_grid(rng, 1 + rng() % 8, 1 + rng() % 8, dim);
    const auto ref_rows = static_cast<std::uint32_t>(1 + rng() % 8);
    const auto ref_cols = static_cast<std::uint32_t>(2 + rng() % 7);
    FeatureGrid ref = testing::random_grid(rng, ref_rows, ref_cols, dim);
    if (t % 3 == 0) {
      // Duplicate ref patches so argmax ties occur.
      std::vector<float> data(ref.data().begin(), ref.data().end());
      const std::size_t n = ref.patch_count();
      for (std::size_t j = 1; j < n; j += 2) {
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>((j - 1) * dim), dim,
                    data.begin() + static_cast<std::ptrdiff_t>(j * dim));
      }
      ref = FeatureGrid(ref_rows, ref_cols, dim, data, 16, ref.source());
    }
    std::vector<bool> is_fg(ref.patch_count());
    std::vector<PatchLabel> labels(ref.patch_count());
    for (std::size_t j = 0; j < is_fg.size(); ++j) is_fg[j] = rng() % 2 == 0;
    is_fg[0] = true;
    is_fg[1] = false;
    for (std::size_t j = 0; j < is_fg.size(); ++j) {
      labels[j] = is_fg[j] ? PatchLabel::Foreground : PatchLabel::Background;
    }
    const PatchLabelGrid grid(ref_rows, ref_cols, labels);

    std::vector<std::set<std::pair<int, std::size_t>>> kept;
    for (double tau : taus) {
      const MatchResult got = match_constrained(query, ref, grid, {tau, tau});
      const auto [want_fg, want_bg] = oracle::match(query, ref, is_fg, tau, tau);
      std::string why;
      if (!oracle::same_candidates(got.fg, want_fg, 1e-12, &why) ||
          !oracle::same_candidates(got.bg, want_bg, 1e-12, &why)) {
        out.fail("instance " + std::to_string(t) + " tau " + std::to_string(tau) + ": " + why);
        break;
      }
      std::set<std::pair<int, std::size_t>> s;
      for (const auto& c : got.fg) s.insert({1, c.query_patch});
      for (const auto& c : got.bg) s.insert({0, c.query_patch});
      accepted += s.size();
      kept.push_back(std::move(s));
    }
    for (std::size_t k = 1; k < kept.size() && out.pass; ++k) {
      if (!std::includes(kept[k - 1].begin(), kept[k - 1].end(), kept[k].begin(),
                         kept[k].end())) {
        out.fail("instance " + std::to_string(t) + ": not monotone in tau");
      }
    }
  }
  if (out.pass) {
    out.detail = "100 instances x 4 thresholds, " + std::to_string(accepted) +
                 " accepted candidates, monotone";
  }
  return out;
}

// Shared by the end-to-end and memory-size criteria.
struct SimpleSetup {
  TempDir dir;
  std::vector<Sample> support, queries;
  MockBackend backend;
  MemoryBank bank;
};

SimpleSetup& simple_setup() {
  static SimpleSetup s;
  if (s.support.empty()) {
    write_synth_dataset(synth_dataset(70, 7, SynthFamily::Simple), s.dir.path());
    const auto all = scan_dataset(s.dir.path());
    std::vector<std::string> ids;
    for (const auto& x : all) ids.push_back(x.id);
    const Split split = split_dataset(ids, {50.0 / 70.0, 42});
    s.support = select_samples(all, split.support);
    s.queries = select_samples(all, split.query);
  }
  return s;
}

Outcome end_to_end() {
  SimpleSetup& s = simple_setup();
  s.bank = build_bank_from_samples(s.support, s.backend, 4);
  PipelineConfig config;
  config.jobs = 4;
  const EvalReport r = run_pipeline(s.queries, s.bank, s.backend, config);
  Outcome out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu support / %zu queries, mIoU %.4f, failures %zu",
                s.support.size(), s.queries.size(), r.aggregate.miou, r.aggregate.failures);
  out.detail = buf;
  if (s.support.size() != 50 || s.queries.size() != 20) out.fail("split is not 50/20");
  if (r.aggregate.miou < 0.95) out.fail(std::string(buf) + " below 0.95");
  return out;
}

Outcome bg_safety() {
  TempDir dir;
  const MockBackend backend;
  write_synth_dataset(synth_dataset(30, 11, SynthFamily::Adversarial), dir / "scenes");
  write_synth_dataset(synth_dataset(1, 99, SynthFamily::Adversarial), dir / "exemplar");
  const auto queries = scan_dataset(dir / "scenes");
  const MemoryBank bank = build_bank_from_samples(scan_dataset(dir / "exemplar"), backend);
  const std::vector<BgMode> modes{BgMode::none(), BgMode::top_n(5), BgMode::top_n(20),
                                  BgMode::all()};
  PipelineConfig config;
  config.jobs = 4;
  const auto rows = ablate_bg(queries, bank, backend, modes, config);

  std::vector<std::size_t> strict(rows.size(), 0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (const auto& img : rows[k].report.per_image) strict[k] += img.bg_points_in_mask > 0;
  }
  const Aggregate& none = rows[0].report.aggregate;
  const Aggregate& top5 = rows[1].report.aggregate;
  const Aggregate& top20 = rows[2].report.aggregate;
  const Aggregate& all = rows[3].report.aggregate;

  Outcome out;
  char buf[400];
  std::snprintf(buf, sizeof buf,
                "leaks FG-only %zu / All %zu; mIoU All %.4f, 20 %.4f, 5 %.4f, FG-only %.4f; "
                "any BG point inside mask (incl. inside target): FG-only %zu, All %zu",
                none.leaks, all.leaks, all.miou, top20.miou, top5.miou, none.miou, strict[0],
                strict[3]);
  out.detail = buf;
  if (none.leaks < 1) out.fail(std::string("FG-only produced no leak; ") + buf);
  if (all.leaks != 0) out.fail(std::string("All mode leaked; ") + buf);
  if (!(all.miou >= top20.miou && top20.miou >= top5.miou)) {
    out.fail(std::string("mIoU ordering violated; ") + buf);
  }
  return out;
}

Outcome memory_size() {
  SimpleSetup& s = simple_setup();
  if (s.bank.empty()) s.bank = build_bank_from_samples(s.support, s.backend, 4);
  const std::vector<std::size_t> sizes{1, 10, 20};
  PipelineConfig config;
  config.jobs = 4;

  const EvalReport full = run_pipeline(s.queries, s.bank, s.backend, config);
  std::map<std::string, std::string> nearest;
  for (const auto& img : full.per_image) nearest[img.id] = img.exemplar_id;
  const auto in_pool = [](const MemoryAblationRow& row, const std::string& id) {
    return std::find(row.pool_ids.begin(), row.pool_ids.end(), id) != row.pool_ids.end();
  };

  Outcome out;
  std::size_t qualifying = 0, checked = 0;
  constexpr std::uint64_t kSeeds = 10;
  for (std::uint64_t seed = 42; seed < 42 + kSeeds && out.pass; ++seed) {
    // The pool-1 exemplar's own image guarantees a qualifying query per seed.
    auto queries = s.queries;
    const Sample& anchor = s.support.at(sample_pool(s.support.size(), 1, seed).front());
    queries.push_back(anchor);
    nearest[anchor.id] = anchor.id;

    const auto rows = ablate_memory(queries, s.bank, s.backend, sizes, seed, config);
    const auto& base = rows[0].report.per_image;
    for (std::size_t q = 0; q < base.size(); ++q) {
      ++checked;
      const std::string& id = base[q].id;
      const std::string& ex = nearest[id];
      if (!std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return in_pool(r, ex); })) {
        continue;
      }
      ++qualifying;
      for (std::size_t k = 1; k < rows.size(); ++k) {
        const auto& other = rows[k].report.per_image[q];
        if (other.id != id || other.prompts != base[q].prompts || other.exemplar_id != ex) {
          out.fail("seed " + std::to_string(seed) + " query " + id + ": prompts differ between pool " +
                   std::to_string(sizes[0]) + " and " + std::to_string(sizes[k]));
        }
      }
    }
  }
  if (qualifying == 0) out.fail("no qualifying query");
  if (out.pass) {
    out.detail = std::to_string(qualifying) + " of " + std::to_string(checked) +
                 " (query, pool seed) pairs have the nearest exemplar in every pool; "
                 "prompts identical";
  }
  return out;
}

// ---------------------------------------------------------------------------

int cli(const std::string& args) {
  const std::string cmd = std::string("'") + MEMSAM_CLI_PATH + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

Outcome cli_determinism() {
  TempDir dir;
  const fs::path root = dir / "run";
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  const std::vector<std::string> commands{
      "synth --count 12 --seed 5 --out " + q(root / "data"),
      "synth --count 4 --seed 6 --family adversarial --out " + q(root / "adv"),
      "build-memory --images " + q(root / "data/images") + " --masks " +
          q(root / "data/masks") + " --out " + q(root / "bank") +
          " --split support --dedup-threshold 0.999 --jobs 3",
      "segment --query " + q(root / "data/images/simple_0000.png") + " --memory " +
          q(root / "bank") + " --out " + q(root / "seg") + " --gt " +
          q(root / "data/masks/simple_0000.png"),
      "evaluate --data " + q(root / "data") + " --memory " + q(root / "bank") + " --report " +
          q(root / "eval/report.json") + " --overlays " + q(root / "eval/overlays") +
          " --dedup-threshold 0.999 --jobs 3",
      "ablate --mode bg --data " + q(root / "data") + " --memory " + q(root / "bank") +
          " --dedup-threshold 0.999 --bg-modes 0,5,20,all --report " + q(root / "ablate/bg.json"),
      "ablate --mode memory --data " + q(root / "data") + " --memory " + q(root / "bank") +
          " --dedup-threshold 0.999 --pools 1,3,5 --report " + q(root / "ablate/memory.json"),
  };
  Outcome out;
  std::map<std::string, std::string> first;
  for (int pass = 0; pass < 2 && out.pass; ++pass) {
    fs::remove_all(root);
    for (const auto& c : commands) {
      if (const int code = cli(c); code != 0) {
        out.fail("exit " + std::to_string(code) + ": " + c.substr(0, c.find(' ')));
        break;
      }
    }
    if (!out.pass) break;
    auto files = snapshot(root);
    if (pass == 0) {
      first = std::move(files);
      continue;
    }
    if (files.size() != first.size()) out.fail("file count changed");
    for (const auto& [name, bytes] : first) {
      auto it = files.find(name);
      if (it == files.end() || it->second != bytes) {
        out.fail("differs: " + name);
        break;
      }
    }
  }
  if (out.pass) {
    out.detail = std::to_string(commands.size()) + " commands, " +
                 std::to_string(first.size()) + " output files bit-identical across reruns";
  }
  return out;
}

template <class F>
void expect_error(Outcome& out, ErrorCode code, const std::string& what, F&& f) {
  try {
    f();
    out.fail(what + ": no error");
  } catch (const Error& e) {
    if (e.code() != code) {
      out.fail(what + ": got " + std::string(to_string(e.code())) + ", want " +
               std::string(to_string(code)));
    }
  }
}

Outcome serialization() {
  std::mt19937_64 rng(1004);
  Outcome out;
  TempDir dir;

  for (int t = 0; t < 200 && out.pass; ++t) {
    const FeatureGrid g = testing::random_grid(rng, 1 + rng() % 12, 1 + rng() % 12,
                                               1 + rng() % 40, 8 + rng() % 16);
    if (decode_feature_grid(encode_feature_grid(g)) != g) out.fail("MSFG round-trip " + std::to_string(t));
  }
  const FeatureGrid big = testing::random_grid(rng, 32, 32, 1024);
  write_feature_grid(big, dir / "big.msfg");
  if (read_feature_grid(dir / "big.msfg") != big) out.fail("32x32x1024 file round-trip");

  const auto bytes = encode_feature_grid(testing::random_grid(rng, 2, 3, 4));
  auto corrupt = [&](std::size_t offset, std::uint8_t value) {
    auto b = bytes;
    b[offset] = value;
    return b;
  };
  expect_error(out, ErrorCode::BadMagic, "magic",
               [&] { decode_feature_grid(corrupt(0, 'X')); });
  expect_error(out, ErrorCode::VersionMismatch, "version",
               [&] { decode_feature_grid(corrupt(4, 9)); });
  expect_error(out, ErrorCode::DimensionOverflow, "dims",
               [&] { decode_feature_grid(corrupt(19, 0xff)); });
  expect_error(out, ErrorCode::Truncated, "short header", [&] {
    decode_feature_grid(std::span(bytes).first(20));
  });
  expect_error(out, ErrorCode::Truncated, "short payload", [&] {
    decode_feature_grid(std::span(bytes).first(bytes.size() - 4));
  });

  std::vector<ExemplarInput> inputs;
  for (int m = 0; m < 6; ++m) {
    FeatureGrid g = testing::random_grid(rng, 3, 4, 24);
    inputs.push_back({"ex" + std::to_string(m), dir / ("ex" + std::to_string(m) + ".png"),
                      testing::random_mask(rng, 48, 64, 0.3), std::move(g)});
  }
  const MemoryBank bank = build_bank(std::move(inputs));
  save_bank(bank, dir / "bank");
  const MemoryBank back = load_bank(dir / "bank");
  bool same = back.size() == bank.size();
  for (std::size_t k = 0; same && k < bank.size(); ++k) {
    const auto& a = bank.entry(k);
    const auto& b = back.entry(k);
    same = a.id == b.id && *a.mask == *b.mask && *a.features == *b.features &&
           a.descriptor == b.descriptor;
  }
  if (!same) out.fail("bank round-trip");

  fs::copy(dir / "bank", dir / "bad_version", fs::copy_options::recursive);
  {
    std::ifstream in(dir / "bad_version/manifest.json");
    auto j = nlohmann::json::parse(in);
    j["version"] = 99;
    std::ofstream(dir / "bad_version/manifest.json") << j.dump();
  }
  expect_error(out, ErrorCode::VersionMismatch, "manifest version",
               [&] { load_bank(dir / "bad_version"); });

  fs::copy(dir / "bank", dir / "bad_feature", fs::copy_options::recursive);
  {
    std::fstream f(dir / "bad_feature/features/ex2.msfg", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('Z');
  }
  expect_error(out, ErrorCode::ChecksumMismatch, "feature header in bank",
               [&] { load_bank(dir / "bad_feature"); });

  fs::copy(dir / "bank", dir / "no_manifest", fs::copy_options::recursive);
  fs::remove(dir / "no_manifest/manifest.json");
  expect_error(out, ErrorCode::MissingManifest, "manifest", [&] { load_bank(dir / "no_manifest"); });

  if (out.pass) {
    out.detail = "200 MSFG + 32x32x1024 file + 6-entry bank round-trips; 8 corruptions rejected";
  }
  return out;
}

}  // namespace
}  // namespace memsam

int main() {
  using namespace memsam;
  const std::vector<Criterion> criteria{
      {"metric oracle equivalence", 10.0, metric_oracle},
      {"retrieval exactness", 5.0, retrieval_exactness},
      {"matching brute-force equivalence", 10.0, matching_equivalence},
      {"end-to-end synthetic pipeline", 60.0, end_to_end},
      {"background-prompt safety", 0.0, bg_safety},
      {"memory-size insensitivity", 0.0, memory_size},
      {"CLI determinism", 0.0, cli_determinism},
      {"serialization", 0.0, serialization},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.fail("took " + std::to_string(secs) + " s, budget " + std::to_string(c.budget_s) + " s");
    }
    failures += !o.pass;
    std::printf("%s  %-34s %7.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
