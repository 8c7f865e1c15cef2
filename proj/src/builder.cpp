#include "taoslite/builder.hpp"

#include <unistd.h>

namespace taoslite {

std::vector<PlatformProfile> detect_profiles(const WorkspaceHandle& handle,
                                             std::span<const PlatformProfile> profiles) {
    std::vector<PlatformProfile> active;
    for (const auto& p : profiles) {
        std::error_code ec;
        if (std::filesystem::exists(handle.source_dir / p.packaging_script, ec))
            active.push_back(p);
    }
    return active;
}

BuildOutcome build(const WorkspaceHandle& handle, const PlatformProfile& profile,
                   JobControl* control) {
    if (::access(profile.build_command.c_str(), X_OK) != 0)
        throw InfrastructureError("build command not executable: " + profile.build_command);

    std::filesystem::path profile_out = handle.artifact_dir / profile.name;
    std::error_code ec;
    std::filesystem::create_directories(profile_out, ec);

    BuildOutcome outcome;
    outcome.profile = profile.name;
    outcome.log_path = handle.log_dir / ("build-" + profile.name + ".txt");

    ProcessRequest req;
    req.command = profile.build_command;
    req.working_dir = handle.source_dir;
    req.timeout_sec = profile.build_timeout_sec;
    req.log_path = outcome.log_path;
    req.env = {{"TAOS_ARTIFACT_DIR", profile_out.string()},
               {"TAOS_SOURCE_DIR", handle.source_dir.string()},
               {"TAOS_PROFILE", profile.name}};

    auto r = run_process(req, control);
    outcome.duration_ms = r.duration_ms;
    if (r.status == ProcessResult::Status::SpawnFailed)
        throw InfrastructureError("cannot spawn build command: " + r.error);
    outcome.exit_code = r.exit_code;
    outcome.success = r.status == ProcessResult::Status::Exited && r.exit_code == 0;

    if (outcome.success) {
        for (auto it = std::filesystem::recursive_directory_iterator(profile_out, ec);
             !ec && it != std::filesystem::recursive_directory_iterator(); ++it) {
            if (it->is_regular_file())
                outcome.artifacts.push_back(
                    std::filesystem::relative(it->path(), handle.job_dir, ec).string());
        }
    }
    return outcome;
}

}  // namespace taoslite
