#pragma once

// Run manifests: every artifact the CLI emits gets a sibling
// <artifact>.manifest.json holding the command, the fully resolved
// configuration, and the tool version, so any run can be replayed.

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "estrain/version.hpp"

namespace estrain {

inline void write_manifest(const std::filesystem::path& artifact, const std::string& command,
                           const nlohmann::json& config) {
    nlohmann::json m;
    m["tool"] = "estrain";
    m["version"] = version_string;
    m["command"] = command;
    m["artifact"] = artifact.filename().string();
    m["config"] = config;
    const auto path = artifact.string() + ".manifest.json";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write manifest: " + path);
    f << m.dump(2) << '\n';
}

}  // namespace estrain
