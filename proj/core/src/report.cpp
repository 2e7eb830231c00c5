#include <algorithm>
#include <cstdio>

#include "memsam/pipeline.hpp"

namespace memsam {

namespace {

std::string fixed(double v, int precision = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// Left-aligns the first column, right-aligns the rest.
std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(width[c] - row[c].size(), ' ');
      if (c > 0) line += "  ";
      line += c == 0 ? row[c] + pad : pad + row[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

nlohmann::json aggregate_json(const Aggregate& agg) {
  return {{"miou", agg.miou},         {"mpa", agg.mpa},           {"acc", agg.acc},
          {"images", agg.images},     {"failures", agg.failures}, {"leaks", agg.leaks}};
}

}  // namespace

nlohmann::json to_json(const ImageResult& r) {
  nlohmann::json j = {{"id", r.id},
                      {"iou_fg", r.scores.iou_fg},
                      {"iou_bg", r.scores.iou_bg},
                      {"miou", r.scores.miou},
                      {"mpa", r.scores.mpa},
                      {"acc", r.scores.acc},
                      {"failed", r.failed},
                      {"exemplar_id", r.exemplar_id},
                      {"retrieval_similarity", r.retrieval_similarity},
                      {"fg_candidates", r.fg_candidates},
                      {"bg_candidates", r.bg_candidates},
                      {"bg_prompts", r.bg_prompts},
                      {"bg_points_in_mask", r.bg_points_in_mask},
                      {"leak_points", r.leak_points},
                      {"warnings", r.warnings}};
  if (r.failed) j["failure"] = r.failure;
  if (r.prompts) j["prompts"] = to_json(*r.prompts)["points"];
  return j;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.per_image) rows.push_back(to_json(r));
  return {{"per_image", std::move(rows)},
          {"aggregate", aggregate_json(report.aggregate)},
          {"config", report.config}};
}

std::string render_table(const EvalReport& report) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"id", "exemplar", "sim", "IoU_fg", "IoU_bg", "mIoU", "mPA", "Acc", "BG", "status"});
  for (const auto& r : report.per_image) {
    std::string status = "ok";
    if (r.failed) {
      status = "FAILED";
    } else if (r.leaked()) {
      status = "leak";
    }
    rows.push_back({r.id, r.exemplar_id.empty() ? "-" : r.exemplar_id,
                    fixed(r.retrieval_similarity), fixed(r.scores.iou_fg),
                    fixed(r.scores.iou_bg), fixed(r.scores.miou), fixed(r.scores.mpa),
                    fixed(r.scores.acc), std::to_string(r.bg_prompts), status});
  }
  const Aggregate& agg = report.aggregate;
  std::string out = render_rows(rows);
  out += "mean over " + std::to_string(agg.images) + " images: mIoU " + fixed(agg.miou) +
         "  mPA " + fixed(agg.mpa) + "  Acc " + fixed(agg.acc) + "  failures " +
         std::to_string(agg.failures) + "  leaks " + std::to_string(agg.leaks) + '\n';
  for (const auto& r : report.per_image) {
    if (r.failed) out += "  " + r.id + ": " + r.failure + '\n';
  }
  return out;
}

std::string render_comparison(const std::string& header, const std::vector<TableRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({header, "mIoU", "mPA", "Acc", "images", "failures", "leaks"});
  for (const auto& row : rows) {
    const Aggregate& a = row.aggregate;
    cells.push_back({row.label, fixed(a.miou), fixed(a.mpa), fixed(a.acc),
                     std::to_string(a.images), std::to_string(a.failures),
                     std::to_string(a.leaks)});
  }
  return render_rows(cells);
}

}  // namespace memsam
