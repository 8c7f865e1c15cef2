#include "taoslite/reporter.hpp"

#include <httplib.h>
#include <json.hpp>

#include <sstream>
#include <thread>

namespace taoslite {

namespace {

constexpr int kMaxAttempts = 3;
constexpr size_t kMaxMessagesPerPlugin = 20;

std::string truncate(const std::string& s, size_t n) {
    return s.size() <= n ? s : s.substr(0, n);
}

void render_phase(std::ostringstream& out, const PhaseReport& phase) {
    out << to_string(phase.phase) << " phase: " << (phase.passed ? "PASS" : "FAIL") << "\n";
    for (const auto& r : phase.results) {
        out << "  [" << to_string(r.group) << "] " << r.plugin << ": "
            << to_string(r.verdict) << " (" << r.duration_ms << " ms)\n";
        size_t shown = std::min(r.messages.size(), kMaxMessagesPerPlugin);
        for (size_t i = 0; i < shown; ++i) {
            const auto& m = r.messages[i];
            out << "    " << m.severity;
            if (!m.file.empty()) {
                out << " " << m.file;
                if (m.line > 0) out << ":" << m.line;
            }
            out << ": " << m.text << "\n";
        }
        if (r.messages.size() > shown)
            out << "    … and " << (r.messages.size() - shown) << " more\n";
    }
}

}  // namespace

std::string render_report_comment(const JobReport& report) {
    std::ostringstream out;
    out << "CI result for job " << report.job_id << ": "
        << (report.final_pass ? "PASS" : "FAIL") << "\n```\n";
    render_phase(out, report.format);
    for (const auto& b : report.builds) {
        out << "build " << b.profile << ": " << (b.success ? "ok" : "failed")
            << " (exit " << b.exit_code << ", " << b.duration_ms << " ms, "
            << b.artifacts.size() << " artifacts)\n";
    }
    if (report.audit) render_phase(out, *report.audit);
    for (const auto& n : report.notes) out << "note: " << n << "\n";
    out << "```\n";
    return out.str();
}

Reporter::Reporter(ReporterConfig config) : config_(std::move(config)) {}

DeliveryResult Reporter::deliver(const std::string& path, const std::string& json_body) {
    std::lock_guard lock(outbound_mutex_);
    DeliveryResult result;
    int backoff_ms = config_.backoff_ms;
    for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
        result.attempts = attempt;
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(5, 0);
        httplib::Headers headers;
        if (!config_.token.empty())
            headers.emplace("Authorization", "token " + config_.token);
        auto res = client.Post(path, headers, json_body, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            result.delivered = true;
            return result;
        }
        if (res && (res->status == 401 || res->status == 403)) {
            result.error = "authentication rejected (" + std::to_string(res->status) + ")";
            return result;  // undeliverable, no retry
        }
        result.error = res ? "http status " + std::to_string(res->status)
                           : "transport error";
        if (attempt < kMaxAttempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
    }
    return result;
}

DeliveryResult Reporter::post_status(JobId job, const StatusUpdate& update) {
    if (!enabled()) return {true, 0, "reporting disabled"};
    if (update.state != StatusState::Pending) {
        std::lock_guard lock(seen_mutex_);
        if (!terminal_posted_.insert({job, update.context}).second)
            return {true, 0, "duplicate terminal status suppressed"};
    }
    nlohmann::json body{{"state", to_string(update.state)},
                        {"context", update.context},
                        {"description", truncate(update.description, 140)}};
    return deliver("/repos/" + update.repo + "/statuses/" + update.head_sha, body.dump());
}

DeliveryResult Reporter::post_comment(const CommitEvent& event, const std::string& body) {
    if (!enabled()) return {true, 0, "reporting disabled"};
    nlohmann::json payload{{"body", body}};
    return deliver("/repos/" + event.repo + "/issues/" + std::to_string(event.change_id) +
                       "/comments",
                   payload.dump());
}

DeliveryResult Reporter::post_report(const CommitEvent& event, const JobReport& report) {
    return post_comment(event, render_report_comment(report));
}

void Reporter::post_pending(JobId job, const CommitEvent& event) {
    for (const char* context : {"taos/format", "taos/build", "taos/audit", "taos/total"}) {
        post_status(job, {event.repo, event.head_sha, context, StatusState::Pending,
                          "queued"});
    }
}

void Reporter::post_terminal(JobId job, const CommitEvent& event, const JobReport& report) {
    auto post = [&](const char* context, StatusState state, const std::string& desc) {
        post_status(job, {event.repo, event.head_sha, context, state, desc});
    };

    bool format_pass = report.format.passed;
    post("taos/format", format_pass ? StatusState::Success : StatusState::Failure,
         format_pass ? "format checks passed" : "format checks failed");

    bool builds_ok = true;
    for (const auto& b : report.builds) builds_ok = builds_ok && b.success;
    if (!format_pass) {
        post("taos/build", StatusState::Error, "skipped: format failed");
        post("taos/audit", StatusState::Error, "skipped: format failed");
    } else {
        if (report.builds.empty()) {
            post("taos/build", StatusState::Success, "no packaging scripts");
        } else {
            post("taos/build", builds_ok ? StatusState::Success : StatusState::Failure,
                 builds_ok ? "all profiles built" : "build failed");
        }
        if (report.audit) {
            post("taos/audit",
                 report.audit->passed ? StatusState::Success : StatusState::Failure,
                 report.audit->passed ? "audit checks passed" : "audit checks failed");
        } else if (!builds_ok) {
            post("taos/audit", StatusState::Error, "skipped: build failed");
        } else {
            post("taos/audit", StatusState::Success, "no audit needed");
        }
    }

    post("taos/total", report.final_pass ? StatusState::Success : StatusState::Failure,
         report.final_pass ? "all checks passed" : "checks failed");

    post_report(event, report);
}

}  // namespace taoslite
