// Scripted stand-in for the model runner, driven by argv:
//
//   stub_runner echo FEATURES MASK [SCORE]   fixed answers for every request
//   stub_runner multi MASK SCORE [MASK SCORE...]
//   stub_runner fail | garbage | hang | exit | nomasks
//   stub_runner exit-once MARKER FEATURES MASK
//       exits without answering unless MARKER exists (and creates it),
//       then behaves like echo
//
// When STUB_LOG is set, every request line is appended to that file.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace {

void reply(const json& j) { std::cout << j.dump() << '\n' << std::flush; }

json masks_reply(const std::vector<std::pair<std::string, double>>& masks) {
  json list = json::array();
  for (const auto& [png, score] : masks) list.push_back({{"png", png}, {"score", score}});
  return {{"ok", true}, {"masks", list}};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return 2;
  const std::string mode = argv[1];
  std::vector<std::string> args(argv + 2, argv + argc);

  if (mode == "exit-once") {
    if (args.size() < 3) return 2;
    const std::filesystem::path marker = args[0];
    if (!std::filesystem::exists(marker)) {
      std::ofstream(marker) << "x";
      std::string line;
      std::getline(std::cin, line);
      return 3;
    }
    args.erase(args.begin());
  }

  const char* log_path = std::getenv("STUB_LOG");
  std::string line;
  while (std::getline(std::cin, line)) {
    if (log_path) std::ofstream(log_path, std::ios::app) << line << '\n';
    if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
    }
    if (mode == "exit") return 3;
    if (mode == "garbage") {
      std::cout << "this is not json\n" << std::flush;
      continue;
    }
    if (mode == "fail") {
      reply({{"ok", false}, {"error", "model exploded"}});
      continue;
    }

    json request;
    try {
      request = json::parse(line);
    } catch (const json::exception& e) {
      reply({{"ok", false}, {"error", std::string("bad request: ") + e.what()}});
      continue;
    }
    const std::string op = request.value("op", "");
    if (op == "extract") {
      if (args.empty()) {
        reply({{"ok", false}, {"error", "no features configured"}});
      } else {
        reply({{"ok", true}, {"features", args[0]}});
      }
    } else if (op == "segment") {
      if (mode == "nomasks") {
        reply(masks_reply({}));
      } else if (mode == "multi") {
        std::vector<std::pair<std::string, double>> masks;
        for (std::size_t k = 0; k + 1 < args.size(); k += 2) {
          masks.emplace_back(args[k], std::stod(args[k + 1]));
        }
        reply(masks_reply(masks));
      } else if (args.size() >= 2) {
        reply(masks_reply({{args[1], args.size() >= 3 ? std::stod(args[2]) : 0.9}}));
      } else {
        reply({{"ok", false}, {"error", "no mask configured"}});
      }
    } else {
      reply({{"ok", false}, {"error", "unknown op '" + op + "'"}});
    }
  }
  return 0;
}
