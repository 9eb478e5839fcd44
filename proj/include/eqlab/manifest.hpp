#pragma once

// Run manifests. The hash covers everything that determines output content
// (subcommand, resolved config, input file digests, seeds, tool version) and
// deliberately excludes output paths, so the same run written elsewhere
// produces the same bytes.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "io.hpp"

#ifndef EQLAB_VERSION
#define EQLAB_VERSION "0.0.0"
#endif

namespace eqlab {

inline constexpr std::string_view kToolVersion = EQLAB_VERSION;
inline constexpr std::string_view kManifestFormat = "eqlab-manifest";

struct RunManifest {
  std::string subcommand;
  io::Json config = io::Json::object();
  std::map<std::string, std::string> inputs;   // path -> content digest
  std::vector<std::string> outputs;
  io::Json seeds = io::Json::object();

  void add_input(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    inputs[path.string()] =
        io::hex64(io::fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
  }

  io::Json hashed_part() const {
    io::Json digests = io::Json::array();
    for (const auto& [path, digest] : inputs) digests.push_back(digest);
    return {{"tool", "eqlab"},         {"tool_version", std::string(kToolVersion)},
            {"subcommand", subcommand}, {"config", config},
            {"input_digests", digests}, {"seeds", seeds}};
  }

  std::string hash() const { return io::json_hash(hashed_part()); }

  io::Json to_json() const {
    io::Json j = hashed_part();
    j["format"] = kManifestFormat;
    j["version"] = "1.0";
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["manifest_hash"] = hash();
    return j;
  }

  void write(const std::filesystem::path& path) const { io::write_text(path, to_json().dump(2) + "\n"); }
};

inline std::filesystem::path manifest_path(const std::filesystem::path& output) {
  return std::filesystem::path(output.string() + ".manifest.json");
}

}  // namespace eqlab
