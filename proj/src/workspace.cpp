#include "taoslite/workspace.hpp"

#include <fstream>
#include <sstream>

namespace taoslite {

namespace {

ProcessResult run_git(const WorkspaceHandle& handle, std::vector<std::string> args,
                      JobControl* control) {
    ProcessRequest req;
    req.command = "git";
    req.args = std::move(args);
    req.working_dir = handle.source_dir;
    req.timeout_sec = 300;
    // Fixture repos carry no user identity; merges need one.
    req.env = {{"GIT_AUTHOR_NAME", "taoslite"},
               {"GIT_AUTHOR_EMAIL", "ci@localhost"},
               {"GIT_COMMITTER_NAME", "taoslite"},
               {"GIT_COMMITTER_EMAIL", "ci@localhost"}};
    return run_process(req, control);
}

void append_log(const WorkspaceHandle& handle, const std::string& file,
                const std::string& text) {
    std::ofstream f(handle.log_dir / file, std::ios::app);
    f << text;
}

}  // namespace

WorkspaceHandle allocate(const std::filesystem::path& root, JobId id) {
    WorkspaceHandle handle;
    handle.root = root;
    handle.job_dir = root / std::to_string(id);
    handle.source_dir = handle.job_dir / "src";
    handle.artifact_dir = handle.job_dir / "out";
    handle.log_dir = handle.job_dir / "log";

    std::error_code ec;
    if (std::filesystem::exists(handle.job_dir, ec)) {
        // Stale leftover from a crash; start fresh.
        std::filesystem::remove_all(handle.job_dir, ec);
    }
    for (const auto& dir : {handle.job_dir, handle.source_dir, handle.artifact_dir,
                            handle.log_dir}) {
        if (!std::filesystem::create_directories(dir, ec) || ec) {
            throw InfrastructureError("cannot create workspace directory " + dir.string() +
                                      ": " + ec.message());
        }
    }
    return handle;
}

MergedTree prepare_sources(const WorkspaceHandle& handle, const CommitEvent& event,
                           const std::filesystem::path& repo_root, JobControl* control) {
    std::filesystem::path repo_url = repo_root / (event.repo + ".git");

    auto fail = [&](const std::string& what, const ProcessResult& r) -> InfrastructureError {
        append_log(handle, "merge.txt", what + " failed:\n" + r.output + "\n");
        return InfrastructureError(what + " failed (exit " + std::to_string(r.exit_code) +
                                   "): " + r.output);
    };

    auto init = run_git(handle, {"init", "-q"}, control);
    if (init.exit_code != 0) throw fail("git init", init);

    auto fetch = run_git(handle,
                         {"fetch", "-q", repo_url.string(),
                          event.target_ref + ":refs/heads/_target", event.source_ref},
                         control);
    if (fetch.exit_code != 0) throw fail("git fetch", fetch);

    auto checkout = run_git(handle, {"checkout", "-q", "_target"}, control);
    if (checkout.exit_code != 0) throw fail("git checkout", checkout);

    auto target_tip = run_git(handle, {"rev-parse", "HEAD"}, control);
    if (target_tip.exit_code != 0) throw fail("git rev-parse", target_tip);
    std::string target_sha = target_tip.output;
    while (!target_sha.empty() && std::isspace(static_cast<unsigned char>(target_sha.back())))
        target_sha.pop_back();

    auto merge = run_git(handle,
                         {"merge", "-q", "--no-edit", "-m", "ci merge", event.head_sha},
                         control);
    append_log(handle, "merge.txt", merge.output);
    if (merge.exit_code != 0) {
        auto check = run_git(handle, {"cat-file", "-e", event.head_sha}, control);
        if (check.exit_code != 0)
            throw InfrastructureError("head commit " + event.head_sha + " not found after fetch");
        throw MergeConflictError("merge conflict merging " + event.head_sha + " into " +
                                 event.target_ref + ":\n" + merge.output);
    }

    auto diff = run_git(handle, {"diff", "--name-only", target_sha, "HEAD"}, control);
    if (diff.exit_code != 0) throw fail("git diff", diff);

    MergedTree tree;
    std::istringstream lines(diff.output);
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty()) tree.changed_files.push_back(line);
    }
    return tree;
}

void prepare_dependencies(const WorkspaceHandle& handle, const PlatformProfile& profile,
                          JobControl* control) {
    if (profile.dependency_command.empty()) return;

    ProcessRequest req;
    req.command = profile.dependency_command;
    req.working_dir = handle.job_dir;
    req.timeout_sec = profile.build_timeout_sec;
    req.log_path = handle.log_dir / "deps.txt";
    req.env = {{"TAOS_SOURCE_DIR", handle.source_dir.string()},
               {"TAOS_ARTIFACT_DIR", handle.artifact_dir.string()},
               {"TAOS_PROFILE", profile.name}};
    auto r = run_process(req, control);
    if (r.status != ProcessResult::Status::Exited || r.exit_code != 0) {
        throw InfrastructureError("dependency command for profile '" + profile.name +
                                  "' failed with exit code " + std::to_string(r.exit_code));
    }
}

void release(const WorkspaceHandle& handle, JobState outcome, bool keep_failed) {
    if (outcome == JobState::Failed && keep_failed) return;
    std::error_code ec;
    std::filesystem::remove_all(handle.job_dir, ec);
    // Deletion failure is logged by the caller's context; never fatal.
}

}  // namespace taoslite
