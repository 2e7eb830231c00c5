#include "memsam/prompt_gen.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <nlohmann/json.hpp>

#include "memsam/error.hpp"

namespace memsam {

BgMode BgMode::top_n(std::size_t count) {
  if (count < 1) throw Error(ErrorCode::ConfigError, "TopN count must be >= 1");
  return BgMode(Kind::TopN, count);
}

BgMode BgMode::parse(const std::string& text) {
  if (text == "all" || text == "n") return all();
  if (text == "none" || text == "0") return none();
  std::size_t count = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, count);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw Error(ErrorCode::ConfigError, "bad background mode '" + text + "'");
  }
  return top_n(count);
}

std::string BgMode::label() const {
  switch (kind_) {
    case Kind::All: return "all";
    case Kind::None: return "none";
    case Kind::TopN: return std::to_string(count_);
  }
  return "?";
}

std::string to_string(FgStrategy s) {
  return s == FgStrategy::MostConfident ? "most-confident" : "kmeans";
}

FgStrategy parse_fg_strategy(const std::string& text) {
  if (text == "most-confident") return FgStrategy::MostConfident;
  if (text == "kmeans") return FgStrategy::KMeansRepresentative;
  throw Error(ErrorCode::ConfigError, "bad foreground strategy '" + text + "'");
}

PointPrompt select_fg(std::span<const MatchCandidate> fg_candidates,
                      FgStrategy strategy) {
  if (fg_candidates.empty()) {
    throw Error(ErrorCode::NoForeground,
                "no query patch reached the foreground threshold; try a lower "
                "tau_fg");
  }
  const MatchCandidate* best = &fg_candidates.front();
  if (strategy == FgStrategy::MostConfident) {
    for (const auto& c : fg_candidates) {
      if (c.similarity > best->similarity ||
          (c.similarity == best->similarity && c.query_patch < best->query_patch)) {
        best = &c;
      }
    }
    return {best->point, 1};
  }

  double cx = 0.0;
  double cy = 0.0;
  for (const auto& c : fg_candidates) {
    cx += c.point.x;
    cy += c.point.y;
  }
  cx /= static_cast<double>(fg_candidates.size());
  cy /= static_cast<double>(fg_candidates.size());
  const auto dist2 = [&](const MatchCandidate& c) {
    const double dx = c.point.x - cx;
    const double dy = c.point.y - cy;
    return dx * dx + dy * dy;
  };
  double best_d = dist2(*best);
  for (const auto& c : fg_candidates) {
    const double d = dist2(c);
    if (d < best_d ||
        (d == best_d && (c.similarity > best->similarity ||
                         (c.similarity == best->similarity &&
                          c.query_patch < best->query_patch)))) {
      best = &c;
      best_d = d;
    }
  }
  return {best->point, 1};
}

std::vector<PointPrompt> select_bg(std::span<const MatchCandidate> bg_candidates,
                                   const BgMode& mode, Point fg_point) {
  std::vector<const MatchCandidate*> pool;
  for (const auto& c : bg_candidates) {
    if (c.point != fg_point) pool.push_back(&c);
  }
  std::sort(pool.begin(), pool.end(), [](const auto* a, const auto* b) {
    return a->query_patch < b->query_patch;
  });

  std::vector<PointPrompt> out;
  switch (mode.kind()) {
    case BgMode::Kind::None:
      return out;
    case BgMode::Kind::All:
      break;
    case BgMode::Kind::TopN: {
      std::stable_sort(pool.begin(), pool.end(), [](const auto* a, const auto* b) {
        return a->similarity > b->similarity;
      });
      if (pool.size() > mode.count()) pool.resize(mode.count());
      break;
    }
  }
  std::set<Point> seen;
  for (const auto* c : pool) {
    // Distinct query patches have distinct centers, so this only guards
    // candidate lists assembled by hand.
    if (seen.insert(c->point).second) out.push_back({c->point, 0});
  }
  return out;
}

PromptSet::PromptSet(PointPrompt fg, std::vector<PointPrompt> bg) {
  if (fg.label != 1) {
    throw Error(ErrorCode::InvariantViolation, "anchor prompt must have label 1");
  }
  std::set<Point> seen{fg.point};
  points_.reserve(bg.size() + 1);
  points_.push_back(fg);
  for (const auto& p : bg) {
    if (p.label != 0) {
      throw Error(ErrorCode::InvariantViolation, "negative prompt must have label 0");
    }
    if (p.point == fg.point) {
      throw Error(ErrorCode::InvariantViolation,
                  "background prompt coincides with the foreground anchor");
    }
    if (!seen.insert(p.point).second) {
      throw Error(ErrorCode::InvariantViolation, "duplicate background prompt");
    }
    points_.push_back(p);
  }
}

std::vector<Point> PromptSet::background_points() const {
  std::vector<Point> out;
  for (const auto& p : background()) out.push_back(p.point);
  return out;
}

PromptSet build_prompt_set(PointPrompt fg, std::vector<PointPrompt> bg) {
  return PromptSet(fg, std::move(bg));
}

nlohmann::json to_json(const PromptSet& prompts) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : prompts.points()) {
    points.push_back({{"x", p.point.x}, {"y", p.point.y}, {"label", p.label}});
  }
  return {{"points", std::move(points)}};
}

PromptSet prompt_set_from_json(const nlohmann::json& j) {
  try {
    std::vector<PointPrompt> fg;
    std::vector<PointPrompt> bg;
    for (const auto& p : j.at("points")) {
      PointPrompt pp{{p.at("x").get<int>(), p.at("y").get<int>()},
                     p.at("label").get<int>()};
      if (pp.label == 1) {
        fg.push_back(pp);
      } else if (pp.label == 0) {
        bg.push_back(pp);
      } else {
        throw Error(ErrorCode::PromptError, "label must be 0 or 1");
      }
    }
    if (fg.size() != 1) {
      throw Error(ErrorCode::PromptError,
                  "prompt set needs exactly one foreground point, got " +
                      std::to_string(fg.size()));
    }
    return PromptSet(fg.front(), std::move(bg));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::PromptError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::PromptError) throw;
    throw Error(ErrorCode::PromptError, e.what());
  }
}

}  // namespace memsam
