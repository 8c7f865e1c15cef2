#include "taoslite/pipeline.hpp"

#include "taoslite/workspace.hpp"

#include <chrono>
#include <fstream>

namespace taoslite {

namespace {

using std::chrono::duration_cast;
using std::chrono::milliseconds;

nlohmann::json to_json(const PluginResult& r) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : r.messages) {
        nlohmann::json msg{{"severity", m.severity}, {"text", m.text}};
        if (!m.file.empty()) msg["file"] = m.file;
        if (m.line > 0) msg["line"] = m.line;
        messages.push_back(std::move(msg));
    }
    nlohmann::json out{{"plugin", r.plugin},
                       {"group", to_string(r.group)},
                       {"verdict", to_string(r.verdict)},
                       {"duration_ms", r.duration_ms},
                       {"messages", std::move(messages)}};
    if (r.exit_code >= 0) out["exit_code"] = r.exit_code;
    return out;
}

}  // namespace

nlohmann::json to_json(const PhaseReport& report) {
    nlohmann::json results = nlohmann::json::array();
    for (const auto& r : report.results) results.push_back(to_json(r));
    return {{"phase", to_string(report.phase)},
            {"verdict", report.passed ? "pass" : "fail"},
            {"duration_ms", report.duration_ms},
            {"results", std::move(results)}};
}

nlohmann::json to_json(const JobReport& report) {
    nlohmann::json builds = nlohmann::json::array();
    for (const auto& b : report.builds) {
        builds.push_back({{"profile", b.profile},
                          {"success", b.success},
                          {"exit_code", b.exit_code},
                          {"duration_ms", b.duration_ms},
                          {"artifacts", b.artifacts}});
    }
    nlohmann::json out{{"job_id", report.job_id},
                       {"format", to_json(report.format)},
                       {"builds", std::move(builds)},
                       {"final_verdict", report.final_pass ? "pass" : "fail"},
                       {"notes", report.notes},
                       {"builder_invocations", report.builder_invocations}};
    if (report.audit) out["audit"] = to_json(*report.audit);
    return out;
}

bool is_blocking_failure(const PluginResult& r) {
    if (r.group == PluginGroup::Staging) return false;
    return r.verdict == Verdict::Fail || r.verdict == Verdict::TimedOut ||
           r.verdict == Verdict::Crashed;
}

PhaseReport run_phase(const ExecutionPlan& plan, PluginContext& ctx, JobControl* control,
                      const PipelineHooks* hooks, JobId job) {
    PhaseReport report;
    report.phase = ctx.phase;
    auto start = Clock::now();
    for (const auto& entry : plan.phase_order(ctx.phase)) {
        if (control && control->killed()) break;
        auto result = run_plugin(entry, ctx, control);
        if (hooks && hooks->on_plugin_timing)
            hooks->on_plugin_timing(job, result.plugin, result.duration_ms);
        if (is_blocking_failure(result)) report.passed = false;
        report.results.push_back(std::move(result));
    }
    report.duration_ms = duration_cast<milliseconds>(Clock::now() - start).count();
    return report;
}

JobReport aggregate(JobId job, PhaseReport format, std::vector<BuildOutcome> builds,
                    std::optional<PhaseReport> audit, std::vector<std::string> notes) {
    JobReport report;
    report.job_id = job;
    report.format = std::move(format);
    report.builds = std::move(builds);
    report.audit = std::move(audit);
    report.notes = std::move(notes);

    bool builds_ok = true;
    for (const auto& b : report.builds) {
        if (!b.success) {
            builds_ok = false;
            report.notes.push_back("build failed for profile '" + b.profile + "'");
        }
    }
    for (const auto& r : report.format.results) {
        if (r.group == PluginGroup::Staging && r.verdict != Verdict::Pass &&
            r.verdict != Verdict::Skipped)
            report.notes.push_back("staging plugin '" + r.plugin + "' did not pass (non-blocking)");
    }
    report.final_pass = report.format.passed && builds_ok &&
                        (!report.audit || report.audit->passed);
    return report;
}

JobReport execute_job(JobId job, const CommitEvent& event, const ExecutionPlan& plan,
                      const EngineConfig& config, JobControl* control,
                      const PipelineHooks* hooks) {
    auto killed_report = [&](std::vector<std::string> notes) {
        notes.push_back("killed");
        JobReport r = aggregate(job, PhaseReport{}, {}, std::nullopt, std::move(notes));
        r.final_pass = false;
        return r;
    };
    auto infra_failure = [&](const std::string& what) {
        JobReport r;
        r.job_id = job;
        r.final_pass = false;
        r.format.passed = false;
        r.notes.push_back("infrastructure error: " + what);
        return r;
    };

    WorkspaceHandle handle;
    try {
        handle = allocate(config.workspace_root, job);
    } catch (const InfrastructureError& e) {
        return infra_failure(e.what());
    }

    auto finish = [&](JobReport report) {
        std::ofstream out(handle.log_dir / "report.json");
        out << to_json(report).dump(2) << "\n";
        out.close();
        JobState outcome = control && control->killed() ? JobState::Killed
                           : report.final_pass         ? JobState::Succeeded
                                                       : JobState::Failed;
        release(handle, outcome, config.keep_failed_workspaces);
        return report;
    };

    MergedTree tree;
    try {
        tree = prepare_sources(handle, event, config.repo_root, control);
    } catch (const MergeConflictError& e) {
        JobReport r;
        r.job_id = job;
        r.final_pass = false;
        r.format.passed = false;
        r.notes.push_back(std::string("merge-conflict: ") + e.what());
        return finish(std::move(r));
    } catch (const InfrastructureError& e) {
        if (control && control->killed()) return finish(killed_report({}));
        return finish(infra_failure(e.what()));
    }
    if (control && control->killed()) return finish(killed_report({}));

    PluginContext ctx = compute_shared_context(job, handle, event, tree.changed_files);

    ctx.phase = Phase::Format;
    PhaseReport format = run_phase(plan, ctx, control, hooks, job);
    if (control && control->killed()) return finish(killed_report({}));

    std::vector<std::string> notes;
    if (!format.passed) {
        // Stop before any builder invocation.
        JobReport r = aggregate(job, std::move(format), {}, std::nullopt, std::move(notes));
        return finish(std::move(r));
    }

    auto active = detect_profiles(handle, config.profiles);
    if (active.empty()) notes.push_back("no packaging scripts");

    std::vector<BuildOutcome> builds;
    int builder_invocations = 0;
    bool builds_ok = true;
    for (const auto& profile : active) {
        if (control && control->killed()) return finish(killed_report(std::move(notes)));
        try {
            prepare_dependencies(handle, profile, control);
            ++builder_invocations;
            builds.push_back(build(handle, profile, control));
        } catch (const InfrastructureError& e) {
            if (control && control->killed()) return finish(killed_report(std::move(notes)));
            JobReport r = aggregate(job, std::move(format), std::move(builds), std::nullopt,
                                    std::move(notes));
            r.builder_invocations = builder_invocations;
            r.final_pass = false;
            r.notes.push_back("infrastructure error: " + std::string(e.what()));
            return finish(std::move(r));
        }
        if (!builds.back().success) {
            builds_ok = false;
            break;  // stop, no audit
        }
    }

    std::optional<PhaseReport> audit;
    if (builds_ok && !active.empty() && format.passed) {
        if (control && control->killed()) return finish(killed_report(std::move(notes)));
        ctx.phase = Phase::Audit;
        audit = run_phase(plan, ctx, control, hooks, job);
    }

    JobReport r = aggregate(job, std::move(format), std::move(builds), std::move(audit),
                            std::move(notes));
    r.builder_invocations = builder_invocations;
    if (control && control->killed()) {
        r.final_pass = false;
        r.notes.push_back("killed");
    }
    return finish(std::move(r));
}

}  // namespace taoslite
