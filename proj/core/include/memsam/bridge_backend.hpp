#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memsam/backend.hpp"

namespace memsam {

/// Client side of the model-runner bridge.
///
/// The runner is a child process speaking line-delimited JSON on its
/// standard streams, one request in flight per process:
///
///   -> {"op": "extract", "image": PATH}
///   <- {"ok": true, "features": MSFG_PATH}
///   -> {"op": "segment", "image": PATH, "points": [{"x", "y", "label"}...]}
///   <- {"ok": true, "masks": [{"png": PNG_PATH, "score": FLOAT}...]}
///   <- {"ok": false, "error": TEXT}
///
/// Up to `connections` runner processes are started lazily and shared
/// between calling threads. A runner that times out, closes its stream or
/// answers with something other than a JSON line is killed and replaced on
/// the next request.
class BridgeBackend final : public Backend {
 public:
  explicit BridgeBackend(BridgeParams params);
  ~BridgeBackend() override;

  BridgeBackend(const BridgeBackend&) = delete;
  BridgeBackend& operator=(const BridgeBackend&) = delete;

  FeatureGrid extract_features(const std::filesystem::path& image) const override;
  std::vector<ScoredMask> segment(const std::filesystem::path& image,
                                  const PromptSet& prompts) const override;
  nlohmann::json describe() const override;

  /// Sends one request and returns the decoded "ok": true response.
  /// Throws BackendError with the recent transcript on any failure.
  nlohmann::json call(const nlohmann::json& request) const;

 private:
  class Connection;

  std::unique_ptr<Connection> acquire() const;
  void release(std::unique_ptr<Connection> conn) const;

  BridgeParams params_;
  mutable std::mutex mutex_;
  mutable std::condition_variable available_;
  mutable std::vector<std::unique_ptr<Connection>> idle_;
  mutable std::size_t live_ = 0;
};

}  // namespace memsam
