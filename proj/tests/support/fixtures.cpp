#include "support/fixtures.hpp"

#include <json.hpp>

#include <atomic>
#include <fstream>
#include <stdexcept>
#include <sys/stat.h>
#include <unistd.h>

namespace taoslite::test {

namespace {
std::atomic<int> g_counter{0};
}

TempDir::TempDir(const std::string& prefix) {
    path_ = std::filesystem::temp_directory_path() /
            (prefix + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(g_counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::filesystem::path write_script(const std::filesystem::path& path, const std::string& body) {
    std::filesystem::create_directories(path.parent_path());
    {
        std::ofstream f(path);
        f << "#!/bin/sh\n" << body;
        if (!body.empty() && body.back() != '\n') f << "\n";
    }
    ::chmod(path.c_str(), 0755);
    return path;
}

std::string git(const std::filesystem::path& dir, std::vector<std::string> args) {
    ProcessRequest req;
    req.command = "git";
    req.args = std::move(args);
    req.working_dir = dir;
    req.timeout_sec = 60;
    req.env = {{"GIT_AUTHOR_NAME", "fixture"},
               {"GIT_AUTHOR_EMAIL", "fixture@localhost"},
               {"GIT_COMMITTER_NAME", "fixture"},
               {"GIT_COMMITTER_EMAIL", "fixture@localhost"}};
    auto r = run_process(req);
    if (r.status != ProcessResult::Status::Exited || r.exit_code != 0)
        throw std::runtime_error("fixture git failed: " + r.output);
    std::string out = r.output;
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out;
}

FixtureRepo make_fixture_repo(const std::filesystem::path& root, bool conflicting,
                              const std::map<std::string, std::string>& extra_files) {
    FixtureRepo fx;
    fx.repo_root = root;

    std::filesystem::path work = root / "_work";
    std::filesystem::create_directories(work);

    git(work, {"init", "-q", "-b", "main"});
    {
        std::ofstream f(work / "hello.c");
        f << "#include <stdio.h>\n"
          << "int main(void) { printf(\"hello\\n\"); return 0; }\n";
    }
    for (const auto& [name, content] : extra_files) {
        std::filesystem::create_directories((work / name).parent_path());
        std::ofstream f(work / name);
        f << content;
    }
    git(work, {"add", "-A"});
    git(work, {"commit", "-q", "-m", "initial"});

    git(work, {"checkout", "-q", "-b", fx.feature_ref});
    if (conflicting) {
        std::ofstream f(work / "hello.c");
        f << "int main(void) { return 1; } /* feature side */\n";
    } else {
        std::ofstream f(work / "f.c");
        f << "int feature(void) { return 42; }\n";
    }
    git(work, {"add", "-A"});
    git(work, {"commit", "-q", "-m", "feature change"});
    fx.feature_sha = git(work, {"rev-parse", "HEAD"});

    if (conflicting) {
        git(work, {"checkout", "-q", "main"});
        std::ofstream f(work / "hello.c");
        f << "int main(void) { return 2; } /* main side */\n";
        f.close();
        git(work, {"add", "-A"});
        git(work, {"commit", "-q", "-m", "diverge"});
    } else {
        git(work, {"checkout", "-q", "main"});
    }
    fx.main_sha = git(work, {"rev-parse", "HEAD"});

    std::filesystem::path bare = root / (fx.repo + ".git");
    std::filesystem::create_directories(bare.parent_path());
    git(root, {"clone", "-q", "--bare", work.string(), bare.string()});
    std::filesystem::remove_all(work);
    return fx;
}

CommitEvent event_for(const FixtureRepo& repo, std::int64_t change_id) {
    CommitEvent ev;
    ev.repo = repo.repo;
    ev.change_id = change_id;
    ev.source_ref = repo.feature_ref;
    ev.target_ref = repo.target_ref;
    ev.head_sha = repo.feature_sha;
    ev.author = "fixture";
    ev.received_at = Clock::now();
    return ev;
}

std::string pull_request_payload(const FixtureRepo& repo, std::int64_t change_id,
                                 const std::string& action) {
    nlohmann::json payload{
        {"action", action},
        {"number", change_id},
        {"repository", {{"full_name", repo.repo}}},
        {"pull_request",
         {{"head", {{"sha", repo.feature_sha}, {"ref", repo.feature_ref}}},
          {"base", {{"ref", repo.target_ref}}},
          {"user", {{"login", "fixture"}}}}}};
    return payload.dump();
}

}  // namespace taoslite::test
