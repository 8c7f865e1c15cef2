#pragma once

#include "taoslite/config.hpp"
#include "taoslite/proc.hpp"
#include "taoslite/workspace.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace taoslite {

struct BuildOutcome {
    std::string profile;
    bool success = false;
    int exit_code = -1;
    std::int64_t duration_ms = 0;
    std::vector<std::string> artifacts;  // relative to job_dir
    std::filesystem::path log_path;
};

/// Profiles whose packaging script exists in source_dir, in config order.
std::vector<PlatformProfile> detect_profiles(const WorkspaceHandle& handle,
                                             std::span<const PlatformProfile> profiles);

BuildOutcome build(const WorkspaceHandle& handle, const PlatformProfile& profile,
                   JobControl* control = nullptr);

}  // namespace taoslite
