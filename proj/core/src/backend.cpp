#include "memsam/backend.hpp"

#include "memsam/bridge_backend.hpp"
#include "memsam/error.hpp"
#include "memsam/mock_backend.hpp"

namespace memsam {

std::size_t select_best_index(std::span<const ScoredMask> candidates) {
  if (candidates.empty()) {
    throw Error(ErrorCode::NoCandidates, "segmenter returned no candidates");
  }
  std::size_t best = 0;
  std::size_t best_area = candidates[0].mask.foreground_count();
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const double s = candidates[k].score;
    if (s < candidates[best].score) continue;
    const std::size_t area = candidates[k].mask.foreground_count();
    if (s > candidates[best].score || area < best_area) {
      best = k;
      best_area = area;
    }
  }
  return best;
}

BinaryMask select_best(std::span<const ScoredMask> candidates) {
  return candidates[select_best_index(candidates)].mask;
}

BackendDescriptor BackendDescriptor::parse(const std::string& text) {
  BackendDescriptor d;
  if (text == "mock") {
    d.kind = Kind::Mock;
    return d;
  }
  constexpr std::string_view kBridge = "bridge:";
  if (text.rfind(kBridge, 0) == 0 && text.size() > kBridge.size()) {
    d.kind = Kind::Bridge;
    d.bridge.command = text.substr(kBridge.size());
    return d;
  }
  throw Error(ErrorCode::ConfigError,
              "backend must be 'mock' or 'bridge:<command>', got '" + text + "'");
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor) {
  switch (descriptor.kind) {
    case BackendDescriptor::Kind::Mock:
      return std::make_unique<MockBackend>(descriptor.mock);
    case BackendDescriptor::Kind::Bridge:
      return std::make_unique<BridgeBackend>(descriptor.bridge);
  }
  throw Error(ErrorCode::ConfigError, "unknown backend kind");
}

}  // namespace memsam
