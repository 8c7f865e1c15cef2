#include "taoslite/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace taoslite {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int parse_positive_int(const std::string& value, const std::string& key, int line) {
    try {
        size_t pos = 0;
        int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + value + "'", line);
    }
}

bool parse_bool(const std::string& value, const std::string& key, int line) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + value + "'", line);
}

}  // namespace

std::optional<PluginGroup> parse_group(const std::string& s) {
    if (s == "base") return PluginGroup::Base;
    if (s == "good") return PluginGroup::Good;
    if (s == "staging") return PluginGroup::Staging;
    return std::nullopt;
}

std::optional<Phase> parse_phase(const std::string& s) {
    if (s == "format") return Phase::Format;
    if (s == "audit") return Phase::Audit;
    return std::nullopt;
}

EngineConfig parse_config(const std::string& text, bool validate) {
    EngineConfig cfg;
    PluginEntry* plugin = nullptr;
    PlatformProfile* profile = nullptr;

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("unterminated section header", lineno);
            std::string header = trim(line.substr(1, line.size() - 2));
            auto space = header.find(' ');
            std::string kind = space == std::string::npos ? header : header.substr(0, space);
            std::string name = space == std::string::npos ? "" : trim(header.substr(space + 1));
            if (name.empty())
                throw ConfigError("section '" + kind + "' requires a name", lineno);
            plugin = nullptr;
            profile = nullptr;
            if (kind == "plugin") {
                cfg.plugins.push_back(PluginEntry{.name = name});
                plugin = &cfg.plugins.back();
            } else if (kind == "profile") {
                cfg.profiles.push_back(PlatformProfile{.name = name});
                profile = &cfg.profiles.back();
            } else {
                throw ConfigError("unknown section kind '" + kind + "'", lineno);
            }
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value'", lineno);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));

        if (plugin) {
            if (key == "group") {
                auto g = parse_group(value);
                if (!g) throw ConfigError("unknown group '" + value + "'", lineno);
                plugin->group = *g;
            } else if (key == "phase") {
                auto p = parse_phase(value);
                if (!p) throw ConfigError("unknown phase '" + value + "'", lineno);
                plugin->phase = *p;
            } else if (key == "command") {
                plugin->command = value;
            } else if (key == "args") {
                std::istringstream as(value);
                std::string a;
                while (as >> a) plugin->args.push_back(a);
            } else if (key == "timeout_sec") {
                plugin->timeout_sec = parse_positive_int(value, key, lineno);
            } else if (key == "enabled") {
                plugin->enabled = parse_bool(value, key, lineno);
            } else {
                throw ConfigError("unknown plugin key '" + key + "'", lineno);
            }
        } else if (profile) {
            if (key == "packaging_script") {
                profile->packaging_script = value;
            } else if (key == "build_command") {
                profile->build_command = value;
            } else if (key == "dependency_command") {
                profile->dependency_command = value;
            } else if (key == "build_timeout_sec") {
                profile->build_timeout_sec = parse_positive_int(value, key, lineno);
            } else {
                throw ConfigError("unknown profile key '" + key + "'", lineno);
            }
        } else {
            if (key == "listen") {
                auto colon = value.rfind(':');
                if (colon == std::string::npos)
                    throw ConfigError("listen must be host:port", lineno);
                cfg.listen_host = value.substr(0, colon);
                cfg.listen_port = parse_positive_int(value.substr(colon + 1), key, lineno);
            } else if (key == "webhook_secret") {
                cfg.webhook_secret = value;
            } else if (key == "workspace_root") {
                cfg.workspace_root = value;
            } else if (key == "repo_root") {
                cfg.repo_root = value;
            } else if (key == "max_run_queue") {
                cfg.max_run_queue = parse_positive_int(value, key, lineno);
            } else if (key == "keep_failed_workspaces") {
                cfg.keep_failed_workspaces = parse_bool(value, key, lineno);
            } else if (key == "reporter_url") {
                cfg.reporter.base_url = value;
            } else if (key == "reporter_token") {
                cfg.reporter.token = value;
            } else if (key == "reporter_backoff_ms") {
                cfg.reporter.backoff_ms = parse_positive_int(value, key, lineno);
            } else {
                throw ConfigError("unknown key '" + key + "'", lineno);
            }
        }
    }

    if (validate) validate_config(cfg);
    return cfg;
}

void validate_config(const EngineConfig& cfg) {
    if (cfg.max_run_queue < 1)
        throw ConfigError("max_run_queue must be >= 1, got " + std::to_string(cfg.max_run_queue));
    std::unordered_set<std::string> names;
    for (const auto& p : cfg.plugins) {
        if (!names.insert(p.name).second)
            throw ConfigError("duplicate plugin name '" + p.name + "'");
        if (p.timeout_sec < 1)
            throw ConfigError("plugin '" + p.name + "': timeout_sec must be >= 1");
        if (p.command.empty())
            throw ConfigError("plugin '" + p.name + "': command is required");
    }
    std::unordered_set<std::string> profile_names;
    for (const auto& p : cfg.profiles) {
        if (!profile_names.insert(p.name).second)
            throw ConfigError("duplicate profile name '" + p.name + "'");
        if (p.packaging_script.empty())
            throw ConfigError("profile '" + p.name + "': packaging_script is required");
        if (p.build_command.empty())
            throw ConfigError("profile '" + p.name + "': build_command is required");
    }
    if (cfg.workspace_root.empty())
        throw ConfigError("workspace_root is required");
    std::error_code ec;
    if (!std::filesystem::is_directory(cfg.workspace_root, ec))
        throw ConfigError("workspace_root does not exist or is not a directory: " +
                          cfg.workspace_root.string());
}

EngineConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file: " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str());
}

ConfigDelta diff_config(const EngineConfig& old_cfg, const EngineConfig& new_cfg) {
    ConfigDelta delta;
    std::unordered_map<std::string, const PluginEntry*> old_by_name;
    for (const auto& p : old_cfg.plugins) old_by_name[p.name] = &p;
    std::unordered_set<std::string> new_names;
    for (const auto& p : new_cfg.plugins) {
        new_names.insert(p.name);
        auto it = old_by_name.find(p.name);
        if (it == old_by_name.end()) {
            delta.plug_ins.push_back(p);
        } else if (*it->second != p) {
            delta.changed.push_back(p);
        }
    }
    for (const auto& p : old_cfg.plugins) {
        if (!new_names.count(p.name)) delta.plug_outs.push_back(p.name);
    }
    return delta;
}

std::vector<PluginEntry> apply_delta(std::vector<PluginEntry> plugins, const ConfigDelta& delta) {
    for (const auto& name : delta.plug_outs) {
        std::erase_if(plugins, [&](const PluginEntry& p) { return p.name == name; });
    }
    for (const auto& changed : delta.changed) {
        for (auto& p : plugins) {
            if (p.name == changed.name) p = changed;
        }
    }
    for (const auto& added : delta.plug_ins) plugins.push_back(added);
    return plugins;
}

}  // namespace taoslite
