#pragma once

#include "taoslite/config.hpp"
#include "taoslite/proc.hpp"
#include "taoslite/types.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace taoslite::test {

/// Unique temp directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Writes an executable shell script and returns its path.
std::filesystem::path write_script(const std::filesystem::path& path, const std::string& body);

/// A bare fixture repository with a main branch and one feature branch.
struct FixtureRepo {
    std::filesystem::path repo_root;  // holds <owner>/<name>.git
    std::string repo = "org/app";
    std::string target_ref = "main";
    std::string feature_ref = "feature";
    std::string main_sha;
    std::string feature_sha;
};

/// Layout: main has hello.c (+ optional extra files); feature adds f.c.
/// When `conflicting`, feature instead rewrites hello.c divergently from a
/// second main commit so the merge conflicts.
FixtureRepo make_fixture_repo(const std::filesystem::path& root, bool conflicting = false,
                              const std::map<std::string, std::string>& extra_files = {});

CommitEvent event_for(const FixtureRepo& repo, std::int64_t change_id);

/// Runs `git` in `dir`, throwing on failure; returns trimmed stdout.
std::string git(const std::filesystem::path& dir, std::vector<std::string> args);

/// GitHub-style pull_request payload for the fixture.
std::string pull_request_payload(const FixtureRepo& repo, std::int64_t change_id,
                                 const std::string& action = "opened");

}  // namespace taoslite::test
