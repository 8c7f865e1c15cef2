#include "taoslite/modulator.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <thread>
#include <unistd.h>

namespace taoslite {

namespace {

bool executable_exists(const std::string& command) {
    if (command.find('/') != std::string::npos)
        return ::access(command.c_str(), X_OK) == 0;
    // Bare command names resolve through PATH at spawn time.
    const char* path = ::getenv("PATH");
    if (!path) return false;
    std::string p(path);
    size_t start = 0;
    while (start <= p.size()) {
        size_t end = p.find(':', start);
        if (end == std::string::npos) end = p.size();
        std::string candidate = p.substr(start, end - start) + "/" + command;
        if (::access(candidate.c_str(), X_OK) == 0) return true;
        start = end + 1;
    }
    return false;
}

void append_ordered(std::vector<PluginEntry>& out, std::span<const PluginEntry> plugins,
                    Phase phase) {
    for (PluginGroup g : {PluginGroup::Base, PluginGroup::Good, PluginGroup::Staging}) {
        for (const auto& p : plugins) {
            if (p.enabled && p.phase == phase && p.group == g) out.push_back(p);
        }
    }
}

std::vector<PluginEntry> flatten(const ExecutionPlan& plan) {
    std::vector<PluginEntry> all = plan.format_order;
    all.insert(all.end(), plan.audit_order.begin(), plan.audit_order.end());
    return all;
}

void run_producer(PluginContext& ctx, const std::string& name,
                  const std::function<void()>& body) {
    body();
    if (ctx.producer_counts) ++(*ctx.producer_counts)[name];
}

std::vector<PluginMessage> parse_report_file(const std::filesystem::path& path,
                                             bool& malformed) {
    malformed = false;
    std::ifstream f(path);
    if (!f) return {};
    nlohmann::json doc = nlohmann::json::parse(f, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        malformed = true;
        return {};
    }
    std::vector<PluginMessage> messages;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("severity") || !item.contains("text")) {
            malformed = true;
            return {};
        }
        PluginMessage m;
        m.severity = item.value("severity", "info");
        m.file = item.value("file", "");
        m.line = item.value("line", 0);
        m.text = item.value("text", "");
        messages.push_back(std::move(m));
    }
    return messages;
}

}  // namespace

ExecutionPlan build_plan(std::span<const PluginEntry> plugins, std::uint64_t version) {
    std::string missing;
    for (const auto& p : plugins) {
        if (p.enabled && !executable_exists(p.command)) {
            if (!missing.empty()) missing += ", ";
            missing += p.name;
        }
    }
    if (!missing.empty())
        throw PlanError("plugins with missing executables: " + missing);

    ExecutionPlan plan;
    plan.version = version;
    append_ordered(plan.format_order, plugins, Phase::Format);
    append_ordered(plan.audit_order, plugins, Phase::Audit);
    return plan;
}

ExecutionPlan plug_in(const ExecutionPlan& plan, const PluginEntry& entry) {
    auto all = flatten(plan);
    for (const auto& p : all) {
        if (p.name == entry.name)
            throw PlanError("plugin '" + entry.name + "' already registered");
    }
    all.push_back(entry);
    return build_plan(all, plan.version + 1);
}

ExecutionPlan plug_out(const ExecutionPlan& plan, const std::string& name) {
    auto all = flatten(plan);
    auto before = all.size();
    std::erase_if(all, [&](const PluginEntry& p) { return p.name == name; });
    if (all.size() == before)
        throw PlanError("plugin '" + name + "' not registered");
    return build_plan(all, plan.version + 1);
}

PluginContext compute_shared_context(JobId job, const WorkspaceHandle& handle,
                                     const CommitEvent& event,
                                     std::vector<std::string> changed_files, int setup_ms) {
    PluginContext ctx;
    ctx.workspace = handle;
    ctx.event = event;
    ctx.changed_files = std::move(changed_files);
    ctx.producer_counts = std::make_shared<std::map<std::string, int>>();
    ctx.setup_ms = setup_ms;

    run_producer(ctx, "commit_metadata", [&] {
        ctx.shared_values["repo"] = event.repo;
        ctx.shared_values["change_id"] = std::to_string(event.change_id);
        ctx.shared_values["head_sha"] = event.head_sha;
        ctx.shared_values["author"] = event.author;
    });

    run_producer(ctx, "changed_file_classes", [&] {
        std::map<std::string, int> by_ext;
        for (const auto& f : ctx.changed_files) {
            auto dot = f.rfind('.');
            std::string ext = dot == std::string::npos ? "(none)" : f.substr(dot + 1);
            ++by_ext[ext];
        }
        std::string summary;
        for (const auto& [ext, n] : by_ext) {
            if (!summary.empty()) summary += ",";
            summary += ext + ":" + std::to_string(n);
        }
        ctx.shared_values["changed_by_extension"] = summary;
    });

    run_producer(ctx, "changed_line_counts", [&] {
        std::int64_t total = 0;
        for (const auto& f : ctx.changed_files) {
            std::ifstream in(handle.source_dir / f);
            std::string line;
            while (std::getline(in, line)) ++total;
        }
        ctx.shared_values["changed_file_lines"] = std::to_string(total);
    });

    if (setup_ms > 0) {
        run_producer(ctx, "simulated_setup", [&] {
            std::this_thread::sleep_for(std::chrono::milliseconds(setup_ms));
        });
    }

    ctx.changed_files_path = handle.job_dir / "changed_files.txt";
    std::ofstream list(ctx.changed_files_path);
    for (const auto& f : ctx.changed_files) list << f << "\n";

    (void)job;
    return ctx;
}

void rerun_producers_naive(PluginContext& ctx) {
    auto counts = ctx.producer_counts;
    auto fresh = compute_shared_context(0, ctx.workspace, ctx.event, ctx.changed_files,
                                        ctx.setup_ms);
    ctx.shared_values = std::move(fresh.shared_values);
    // Fold the rerun's producer invocations into the job's counter.
    if (counts && fresh.producer_counts) {
        for (const auto& [name, n] : *fresh.producer_counts) (*counts)[name] += n;
        ctx.producer_counts = counts;
    }
}

PluginResult run_plugin(const PluginEntry& entry, const PluginContext& ctx,
                        JobControl* control) {
    PluginResult result;
    result.plugin = entry.name;
    result.group = entry.group;

    std::filesystem::path report_path =
        ctx.workspace.job_dir / ("report-" + entry.name + ".json");
    std::error_code ec;
    std::filesystem::remove(report_path, ec);

    ProcessRequest req;
    req.command = entry.command;
    req.args = entry.args;
    req.working_dir = ctx.workspace.source_dir;
    req.timeout_sec = entry.timeout_sec;
    req.log_path = ctx.workspace.log_dir / ("plugin-" + entry.name + ".txt");
    req.env = {{"TAOS_PHASE", to_string(ctx.phase)},
               {"TAOS_WORKSPACE", ctx.workspace.job_dir.string()},
               {"TAOS_SOURCE_DIR", ctx.workspace.source_dir.string()},
               {"TAOS_CHANGED_FILES", ctx.changed_files_path.string()},
               {"TAOS_REPORT", report_path.string()},
               {"TAOS_CHANGE_ID", std::to_string(ctx.event.change_id)},
               {"TAOS_HEAD_SHA", ctx.event.head_sha},
               {"TAOS_REPO", ctx.event.repo}};
    if (ctx.phase == Phase::Audit)
        req.env.emplace_back("TAOS_ARTIFACT_DIR", ctx.workspace.artifact_dir.string());

    auto r = run_process(req, control);
    result.duration_ms = r.duration_ms;

    switch (r.status) {
    case ProcessResult::Status::TimedOut:
        result.verdict = Verdict::TimedOut;
        return result;
    case ProcessResult::Status::Killed:
    case ProcessResult::Status::Signaled:
    case ProcessResult::Status::SpawnFailed:
        result.verdict = Verdict::Crashed;
        return result;
    case ProcessResult::Status::Exited:
        break;
    }

    result.exit_code = r.exit_code;
    switch (r.exit_code) {
    case 0: result.verdict = Verdict::Pass; break;
    case 1: result.verdict = Verdict::Fail; break;
    case 2: result.verdict = Verdict::Skipped; break;
    default: result.verdict = Verdict::Crashed; return result;
    }

    if (std::filesystem::exists(report_path, ec)) {
        bool malformed = false;
        auto messages = parse_report_file(report_path, malformed);
        if (malformed) {
            result.messages.push_back(
                {"warning", "", 0, "plugin report file was malformed and was ignored"});
        } else {
            result.messages = std::move(messages);
        }
    }
    return result;
}

}  // namespace taoslite
