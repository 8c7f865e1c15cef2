#pragma once

#include "taoslite/types.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace taoslite {

/// One configured external checker.
struct PluginEntry {
    std::string name;
    PluginGroup group = PluginGroup::Base;
    Phase phase = Phase::Format;
    std::string command;
    std::vector<std::string> args;
    int timeout_sec = 300;
    bool enabled = true;

    bool operator==(const PluginEntry&) const = default;
};

/// A build backend activated by the presence of its packaging script.
struct PlatformProfile {
    std::string name;
    std::string packaging_script;  // relative path inside the source tree
    std::string build_command;
    std::string dependency_command;  // optional, empty = none
    int build_timeout_sec = 3600;

    bool operator==(const PlatformProfile&) const = default;
};

struct ReporterConfig {
    std::string base_url;   // mock or real code-host endpoint, empty = reporting disabled
    std::string token;
    int backoff_ms = 1000;  // first retry delay, doubled per attempt

    bool operator==(const ReporterConfig&) const = default;
};

struct EngineConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8020;
    std::string webhook_secret;
    std::filesystem::path workspace_root;
    std::filesystem::path repo_root;  // base dir for "<owner>/<name>.git" fetches
    int max_run_queue = 4;
    bool keep_failed_workspaces = false;
    std::vector<PluginEntry> plugins;
    std::vector<PlatformProfile> profiles;
    ReporterConfig reporter;
};

/// Plug-in / plug-out difference between two validated configs.
struct ConfigDelta {
    std::vector<PluginEntry> plug_ins;
    std::vector<std::string> plug_outs;
    std::vector<PluginEntry> changed;  // same name, different fields

    bool empty() const { return plug_ins.empty() && plug_outs.empty() && changed.empty(); }
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string message, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                      : std::move(message)),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

EngineConfig load_config(const std::filesystem::path& path);

/// Parse from text; `validate` controls whether invariants (workspace_root
/// existence etc.) are enforced.
EngineConfig parse_config(const std::string& text, bool validate = true);

void validate_config(const EngineConfig& cfg);

ConfigDelta diff_config(const EngineConfig& old_cfg, const EngineConfig& new_cfg);

/// Applies a delta to a plugin list; used by the round-trip property test and
/// by reload bookkeeping.
std::vector<PluginEntry> apply_delta(std::vector<PluginEntry> plugins, const ConfigDelta& delta);

std::optional<PluginGroup> parse_group(const std::string& s);
std::optional<Phase> parse_phase(const std::string& s);

}  // namespace taoslite
