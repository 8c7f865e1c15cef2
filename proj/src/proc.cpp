#include "taoslite/proc.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <sstream>
#include <thread>
#include <unistd.h>
#include <sys/wait.h>

namespace taoslite {

void JobControl::request_kill() {
    kill_requested.store(true, std::memory_order_release);
    pid_t pgid = child_pgid.load(std::memory_order_acquire);
    if (pgid > 0) ::kill(-pgid, SIGTERM);
}

namespace {

using std::chrono::steady_clock;
using std::chrono::milliseconds;
using std::chrono::duration_cast;

std::filesystem::path make_temp_capture_path() {
    static std::atomic<std::uint64_t> counter{0};
    auto n = counter.fetch_add(1);
    return std::filesystem::temp_directory_path() /
           ("taoslite-proc-" + std::to_string(::getpid()) + "-" + std::to_string(n) + ".log");
}

// Waits for the group leader; returns true once reaped.
bool try_reap(pid_t pid, int& wstatus) {
    pid_t r = ::waitpid(pid, &wstatus, WNOHANG);
    return r == pid;
}

}  // namespace

ProcessResult run_process(const ProcessRequest& req, JobControl* control) {
    ProcessResult result;
    auto start = steady_clock::now();

    bool temp_capture = req.log_path.empty();
    std::filesystem::path capture = temp_capture ? make_temp_capture_path() : req.log_path;

    int out_fd = ::open(capture.c_str(), O_CREAT | O_WRONLY | O_TRUNC, 0644);
    if (out_fd < 0) {
        result.error = std::string("open capture file: ") + std::strerror(errno);
        return result;
    }

    std::vector<char*> argv;
    argv.push_back(const_cast<char*>(req.command.c_str()));
    for (const auto& a : req.args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);

    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(out_fd);
        result.error = std::string("fork: ") + std::strerror(errno);
        return result;
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(out_fd, STDOUT_FILENO);
        ::dup2(out_fd, STDERR_FILENO);
        ::close(out_fd);
        if (!req.working_dir.empty() && ::chdir(req.working_dir.c_str()) != 0) _exit(127);
        for (const auto& [k, v] : req.env) ::setenv(k.c_str(), v.c_str(), 1);
        ::execvp(req.command.c_str(), argv.data());
        _exit(127);
    }

    ::close(out_fd);
    ::setpgid(pid, pid);  // may race with the child's own call; either order is fine
    if (control) control->child_pgid.store(pid, std::memory_order_release);

    auto deadline = req.timeout_sec > 0
                        ? start + std::chrono::seconds(req.timeout_sec)
                        : steady_clock::time_point::max();

    int wstatus = 0;
    bool reaped = false;
    bool timed_out = false;
    bool killed = false;

    while (!reaped) {
        reaped = try_reap(pid, wstatus);
        if (reaped) break;
        auto now = steady_clock::now();
        if (control && control->killed()) {
            killed = true;
        } else if (now >= deadline) {
            timed_out = true;
        }
        if (killed || timed_out) {
            ::kill(-pid, SIGTERM);
            auto grace_end = steady_clock::now() + std::chrono::seconds(req.grace_period_sec);
            while (!reaped && steady_clock::now() < grace_end) {
                reaped = try_reap(pid, wstatus);
                if (!reaped) std::this_thread::sleep_for(milliseconds(10));
            }
            if (!reaped) {
                ::kill(-pid, SIGKILL);
                ::waitpid(pid, &wstatus, 0);
                reaped = true;
            }
            break;
        }
        std::this_thread::sleep_for(milliseconds(5));
    }

    // Sweep any grandchildren left in the group.
    ::kill(-pid, SIGKILL);

    if (control) control->child_pgid.store(0, std::memory_order_release);

    result.duration_ms = duration_cast<milliseconds>(steady_clock::now() - start).count();
    if (timed_out) {
        result.status = ProcessResult::Status::TimedOut;
    } else if (killed) {
        result.status = ProcessResult::Status::Killed;
    } else if (WIFEXITED(wstatus)) {
        result.status = ProcessResult::Status::Exited;
        result.exit_code = WEXITSTATUS(wstatus);
    } else if (WIFSIGNALED(wstatus)) {
        result.status = ProcessResult::Status::Signaled;
        result.term_signal = WTERMSIG(wstatus);
    }

    if (temp_capture) {
        std::ifstream f(capture);
        std::ostringstream buf;
        buf << f.rdbuf();
        result.output = buf.str();
        std::error_code ec;
        std::filesystem::remove(capture, ec);
    }
    return result;
}

}  // namespace taoslite
