#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <sys/types.h>
#include <utility>
#include <vector>

namespace taoslite {

/// Cooperative cancellation shared between the scheduler and a job's executor.
/// request_kill() flips the flag and signals whatever child process group is
/// currently registered.
struct JobControl {
    std::atomic<bool> kill_requested{false};
    std::atomic<pid_t> child_pgid{0};

    void request_kill();
    bool killed() const { return kill_requested.load(std::memory_order_acquire); }
};

struct ProcessRequest {
    std::string command;
    std::vector<std::string> args;
    std::filesystem::path working_dir;
    std::vector<std::pair<std::string, std::string>> env;  // added on top of inherited env
    int timeout_sec = 0;                                   // 0 = no timeout
    std::filesystem::path log_path;  // stdout+stderr capture; empty = temp file, read into output
    int grace_period_sec = 5;        // SIGTERM -> SIGKILL window
};

struct ProcessResult {
    enum class Status { Exited, TimedOut, Killed, SpawnFailed, Signaled };

    Status status = Status::SpawnFailed;
    int exit_code = -1;    // valid when status == Exited
    int term_signal = 0;   // valid when status == Signaled
    std::int64_t duration_ms = 0;
    std::string output;    // captured only when log_path was empty
    std::string error;     // spawn failure detail
};

/// Runs a child in its own process group, capturing combined stdout/stderr.
/// Polls `control` (when given) and terminates the whole group on kill request
/// or timeout: SIGTERM, then SIGKILL after the grace period.
ProcessResult run_process(const ProcessRequest& req, JobControl* control = nullptr);

}  // namespace taoslite
