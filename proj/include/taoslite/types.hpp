#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace taoslite {

using JobId = std::uint64_t;
using Clock = std::chrono::steady_clock;

/// Normalized merge-request event extracted from a raw webhook payload.
struct CommitEvent {
    std::string repo;        // "owner/name"
    std::int64_t change_id = 0;
    std::string source_ref;
    std::string target_ref;
    std::string head_sha;    // 40-char lowercase hex
    std::string author;
    Clock::time_point received_at{};
};

enum class JobState { Waiting, Running, Succeeded, Failed, Killed, Replaced };

inline bool is_terminal(JobState s) {
    return s == JobState::Succeeded || s == JobState::Failed ||
           s == JobState::Killed || s == JobState::Replaced;
}

inline const char* to_string(JobState s) {
    switch (s) {
    case JobState::Waiting:   return "waiting";
    case JobState::Running:   return "running";
    case JobState::Succeeded: return "succeeded";
    case JobState::Failed:    return "failed";
    case JobState::Killed:    return "killed";
    case JobState::Replaced:  return "replaced";
    }
    return "?";
}

enum class Phase { Format, Audit };

inline const char* to_string(Phase p) {
    return p == Phase::Format ? "format" : "audit";
}

enum class PluginGroup { Base, Good, Staging };

inline const char* to_string(PluginGroup g) {
    switch (g) {
    case PluginGroup::Base:    return "base";
    case PluginGroup::Good:    return "good";
    case PluginGroup::Staging: return "staging";
    }
    return "?";
}

}  // namespace taoslite
