#include "taoslite/scheduler.hpp"

#include <algorithm>

namespace taoslite {

Scheduler::Scheduler(int max_run_queue, Executor executor)
    : max_run_queue_(max_run_queue), executor_(std::move(executor)) {
    workers_.reserve(static_cast<size_t>(max_run_queue_));
    for (int i = 0; i < max_run_queue_; ++i)
        workers_.emplace_back([this] { worker_loop(); });
}

Scheduler::~Scheduler() {
    shutdown(std::chrono::milliseconds(0));
}

JobId Scheduler::submit(const CommitEvent& event) {
    std::vector<Job> superseded;
    JobId id;
    {
        std::lock_guard lock(mutex_);
        if (!accepting_) throw SchedulerShutdown();

        // Wait-queue replacement: an older Waiting duplicate is superseded by
        // the incoming event.
        for (auto it = wait_queue_.begin(); it != wait_queue_.end();) {
            Job& j = jobs_.at(*it);
            if (j.event.repo == event.repo && j.event.change_id == event.change_id) {
                j.state = JobState::Replaced;
                j.finished_at = Clock::now();
                superseded.push_back(j);
                it = wait_queue_.erase(it);
            } else {
                ++it;
            }
        }

        // Victim maker: kill older Running duplicates.
        victim_sweep_locked(event);

        id = next_id_++;
        Job job;
        job.id = id;
        job.event = event;
        job.state = JobState::Waiting;
        job.enqueued_at = Clock::now();
        job.priority = -(next_seq_++);  // older = higher priority, consistent with FIFO
        job.control = std::make_shared<JobControl>();
        jobs_.emplace(id, std::move(job));
        wait_queue_.push_back(id);

        dispatch_locked();
    }
    if (on_superseded)
        for (const auto& j : superseded) on_superseded(j);
    return id;
}

std::vector<JobId> Scheduler::victim_sweep_locked(const CommitEvent& event) {
    // Oldest first: collect Running duplicates ordered by started_at.
    std::vector<JobId> victims;
    for (auto& [id, j] : jobs_) {
        if (j.state == JobState::Running && j.event.repo == event.repo &&
            j.event.change_id == event.change_id)
            victims.push_back(id);
    }
    std::sort(victims.begin(), victims.end(), [&](JobId a, JobId b) {
        return jobs_.at(a).started_at < jobs_.at(b).started_at;
    });
    for (JobId id : victims) {
        Job& j = jobs_.at(id);
        j.state = JobState::Killed;
        j.finished_at = Clock::now();
        j.control->request_kill();
        std::erase(ready_queue_, id);
        --running_;
    }
    if (!victims.empty()) idle_cv_.notify_all();
    return victims;
}

std::vector<JobId> Scheduler::dispatch_locked() {
    std::vector<JobId> moved;
    while (running_ < max_run_queue_ && !wait_queue_.empty()) {
        JobId id = wait_queue_.front();
        wait_queue_.pop_front();
        Job& j = jobs_.at(id);
        j.state = JobState::Running;
        j.started_at = Clock::now();
        ++running_;
        ready_queue_.push_back(id);
        moved.push_back(id);
    }
    if (!moved.empty()) work_cv_.notify_all();
    return moved;
}

void Scheduler::worker_loop() {
    std::unique_lock lock(mutex_);
    for (;;) {
        work_cv_.wait(lock, [&] { return stopping_ || !ready_queue_.empty(); });
        if (stopping_ && ready_queue_.empty()) return;

        JobId id = ready_queue_.front();
        ready_queue_.pop_front();
        auto it = jobs_.find(id);
        if (it == jobs_.end() || it->second.state != JobState::Running)
            continue;  // killed between dispatch and pickup
        Job job = it->second;  // copy; shared state travels via control/report pointers
        lock.unlock();
        executor_(job);
        lock.lock();
    }
}

void Scheduler::complete(JobId id, JobState outcome, std::shared_ptr<JobReport> report) {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return;  // unknown id: logged by caller, not fatal
    Job& j = it->second;
    if (j.state != JobState::Running) return;  // already killed/terminal
    j.state = outcome;
    j.finished_at = Clock::now();
    j.report = std::move(report);
    --running_;
    dispatch_locked();
    idle_cv_.notify_all();
}

bool Scheduler::kill(JobId id) {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return false;
    Job& j = it->second;
    if (j.state == JobState::Waiting) {
        j.state = JobState::Replaced;
        j.finished_at = Clock::now();
        std::erase(wait_queue_, id);
        idle_cv_.notify_all();
        return true;
    }
    if (j.state == JobState::Running) {
        j.state = JobState::Killed;
        j.finished_at = Clock::now();
        j.control->request_kill();
        std::erase(ready_queue_, id);
        --running_;
        dispatch_locked();
        idle_cv_.notify_all();
        return true;
    }
    return false;
}

QueueSnapshot Scheduler::snapshot() const {
    std::lock_guard lock(mutex_);
    QueueSnapshot snap;
    snap.max_run_queue = max_run_queue_;
    for (JobId id : wait_queue_) {
        const Job& j = jobs_.at(id);
        snap.waiting.push_back({j.id, j.event.repo, j.event.change_id, j.state, j.priority});
    }
    for (const auto& [id, j] : jobs_) {
        if (j.state == JobState::Running)
            snap.running.push_back({j.id, j.event.repo, j.event.change_id, j.state, j.priority});
    }
    std::sort(snap.running.begin(), snap.running.end(),
              [](const JobSummary& a, const JobSummary& b) { return a.id < b.id; });
    return snap;
}

std::optional<Job> Scheduler::find(JobId id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

void Scheduler::wait_idle() const {
    std::unique_lock lock(mutex_);
    idle_cv_.wait(lock, [&] { return wait_queue_.empty() && running_ == 0; });
}

void Scheduler::shutdown(std::chrono::milliseconds grace) {
    std::unique_lock lock(mutex_);
    if (!accepting_ && stopping_) {
        lock.unlock();
        for (auto& w : workers_)
            if (w.joinable()) w.join();
        return;
    }
    accepting_ = false;

    if (grace.count() > 0)
        idle_cv_.wait_for(lock, grace, [&] { return wait_queue_.empty() && running_ == 0; });

    // Kill whatever is left.
    for (auto& [id, j] : jobs_) {
        if (j.state == JobState::Running) {
            j.state = JobState::Killed;
            j.finished_at = Clock::now();
            j.control->request_kill();
            --running_;
        } else if (j.state == JobState::Waiting) {
            j.state = JobState::Replaced;
            j.finished_at = Clock::now();
        }
    }
    wait_queue_.clear();
    ready_queue_.clear();
    stopping_ = true;
    work_cv_.notify_all();
    idle_cv_.notify_all();
    lock.unlock();

    for (auto& w : workers_)
        if (w.joinable()) w.join();
}

}  // namespace taoslite
