#pragma once

#include "taoslite/config.hpp"
#include "taoslite/pipeline.hpp"
#include "taoslite/types.hpp"

#include <mutex>
#include <set>
#include <string>
#include <utility>

namespace taoslite {

enum class StatusState { Pending, Success, Failure, Error };

inline const char* to_string(StatusState s) {
    switch (s) {
    case StatusState::Pending: return "pending";
    case StatusState::Success: return "success";
    case StatusState::Failure: return "failure";
    case StatusState::Error:   return "error";
    }
    return "?";
}

struct StatusUpdate {
    std::string repo;
    std::string head_sha;
    std::string context;  // taos/format | taos/build | taos/audit | taos/total
    StatusState state = StatusState::Pending;
    std::string description;  // truncated to 140 chars on post
};

struct DeliveryResult {
    bool delivered = false;
    int attempts = 0;
    std::string error;
};

std::string render_report_comment(const JobReport& report);

/// Posts statuses and report comments to the code-host API. Outbound calls are
/// serialized (one in-flight at a time); transport failures retry up to 3
/// times with exponential backoff. Terminal statuses are posted at most once
/// per (job, context).
class Reporter {
public:
    explicit Reporter(ReporterConfig config);

    bool enabled() const { return !config_.base_url.empty(); }

    DeliveryResult post_status(JobId job, const StatusUpdate& update);
    DeliveryResult post_report(const CommitEvent& event, const JobReport& report);
    DeliveryResult post_comment(const CommitEvent& event, const std::string& body);

    void post_pending(JobId job, const CommitEvent& event);
    void post_terminal(JobId job, const CommitEvent& event, const JobReport& report);

private:
    DeliveryResult deliver(const std::string& path, const std::string& json_body);

    ReporterConfig config_;
    std::mutex outbound_mutex_;  // one in-flight API call at a time
    std::mutex seen_mutex_;
    std::set<std::pair<JobId, std::string>> terminal_posted_;
};

}  // namespace taoslite
