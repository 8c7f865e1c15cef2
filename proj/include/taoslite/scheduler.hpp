#pragma once

#include "taoslite/pipeline.hpp"
#include "taoslite/proc.hpp"
#include "taoslite/types.hpp"

#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_map>
#include <vector>

namespace taoslite {

struct Job {
    JobId id = 0;
    CommitEvent event;
    JobState state = JobState::Waiting;
    std::int64_t priority = 0;  // larger = more urgent; derived from enqueue order
    Clock::time_point enqueued_at{};
    std::optional<Clock::time_point> started_at;
    std::optional<Clock::time_point> finished_at;
    std::shared_ptr<JobControl> control;
    std::shared_ptr<JobReport> report;
};

struct JobSummary {
    JobId id = 0;
    std::string repo;
    std::int64_t change_id = 0;
    JobState state = JobState::Waiting;
    std::int64_t priority = 0;
};

struct QueueSnapshot {
    std::vector<JobSummary> waiting;  // FIFO order
    std::vector<JobSummary> running;
    int max_run_queue = 0;
};

class SchedulerShutdown : public std::runtime_error {
public:
    SchedulerShutdown() : std::runtime_error("scheduler is shutting down") {}
};

/// The commit scheduler: FIFO wait queue feeding a worker pool of exactly
/// max_run_queue threads (the run queue). All queue state lives behind one
/// mutex; executors run outside it and re-enter via complete().
class Scheduler {
public:
    /// The executor runs outside the scheduler lock and must finish by calling
    /// complete() with a terminal outcome. A job whose control flag reports
    /// killed() was already transitioned by the scheduler; its complete() call
    /// is then a no-op state error.
    using Executor = std::function<void(const Job& job)>;

    Scheduler(int max_run_queue, Executor executor);
    ~Scheduler();

    Scheduler(const Scheduler&) = delete;
    Scheduler& operator=(const Scheduler&) = delete;

    JobId submit(const CommitEvent& event);  // throws SchedulerShutdown when stopping
    void complete(JobId id, JobState outcome, std::shared_ptr<JobReport> report = nullptr);
    bool kill(JobId id);
    QueueSnapshot snapshot() const;
    std::optional<Job> find(JobId id) const;

    /// Stops accepting, drains running jobs up to `grace`, then kills leftovers
    /// and joins the pool.
    void shutdown(std::chrono::milliseconds grace = std::chrono::seconds(10));

    /// Blocks until no job is Waiting or Running (test helper).
    void wait_idle() const;

    /// Notifications for replaced/killed jobs (superseded note to the code
    /// host); invoked outside the lock would complicate ordering, so the
    /// callback must be cheap and non-reentrant.
    std::function<void(const Job&)> on_superseded;

private:
    std::vector<JobId> victim_sweep_locked(const CommitEvent& event);
    std::vector<JobId> dispatch_locked();
    void worker_loop();

    mutable std::mutex mutex_;
    mutable std::condition_variable work_cv_;   // workers wait for ready jobs
    mutable std::condition_variable idle_cv_;   // wait_idle / shutdown drain
    int max_run_queue_;
    Executor executor_;
    bool accepting_ = true;
    bool stopping_ = false;
    JobId next_id_ = 1;
    std::int64_t next_seq_ = 0;

    std::deque<JobId> wait_queue_;   // FIFO, Waiting jobs
    std::deque<JobId> ready_queue_;  // dispatched, Running, awaiting a worker pickup
    std::unordered_map<JobId, Job> jobs_;
    int running_ = 0;
    int idle_workers_ = 0;
    std::vector<std::thread> workers_;
};

}  // namespace taoslite
