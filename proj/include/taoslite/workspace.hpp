#pragma once

#include "taoslite/config.hpp"
#include "taoslite/proc.hpp"
#include "taoslite/types.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace taoslite {

/// Per-job directory layout under the designated root folder:
/// root/<job-id>/{src,out,log}.
struct WorkspaceHandle {
    std::filesystem::path root;
    std::filesystem::path job_dir;
    std::filesystem::path source_dir;
    std::filesystem::path artifact_dir;
    std::filesystem::path log_dir;
};

/// Disk, permission, fetch or tooling failure — distinct from a CI verdict.
class InfrastructureError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Source and target edited the same lines; a legitimate CI verdict.
class MergeConflictError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MergedTree {
    std::vector<std::string> changed_files;  // relative to source_dir
};

WorkspaceHandle allocate(const std::filesystem::path& root, JobId id);

/// Checks out target_ref and merges the event's head on top, inside
/// source_dir. `repo_root` holds bare repositories at <repo_root>/<repo>.git.
MergedTree prepare_sources(const WorkspaceHandle& handle, const CommitEvent& event,
                           const std::filesystem::path& repo_root,
                           JobControl* control = nullptr);

void prepare_dependencies(const WorkspaceHandle& handle, const PlatformProfile& profile,
                          JobControl* control = nullptr);

void release(const WorkspaceHandle& handle, JobState outcome, bool keep_failed);

}  // namespace taoslite
