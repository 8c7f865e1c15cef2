#include "taoslite/engine.hpp"

#include "taoslite/pipeline.hpp"

#include <httplib.h>

#include <cstdlib>

namespace taoslite {

std::filesystem::path control_socket_path(const EngineConfig& cfg) {
    if (const char* override_path = std::getenv("TAOSLITE_CONTROL"))
        return override_path;
    return cfg.workspace_root / "control.sock";
}

Engine::Engine(EngineConfig config, std::filesystem::path config_path)
    : config_path_(std::move(config_path)) {
    plan_version_ = 1;
    plan_ = std::make_shared<const ExecutionPlan>(build_plan(config.plugins, plan_version_));
    reporter_ = std::make_unique<Reporter>(config.reporter);
    config_ = std::make_shared<const EngineConfig>(std::move(config));
    scheduler_ = std::make_unique<Scheduler>(config_->max_run_queue,
                                             [this](const Job& job) { execute(job); });
    scheduler_->on_superseded = [this](const Job& job) {
        reporter_->post_comment(job.event,
                                "CI job " + std::to_string(job.id) +
                                    " superseded by a newer push for change " +
                                    std::to_string(job.event.change_id));
    };
    hooks_.on_plugin_timing = [this](JobId job, const std::string& plugin,
                                     std::int64_t duration_ms) {
        metrics_.record_plugin_timing(job, plugin, duration_ms);
    };
}

Engine::~Engine() {
    stop(std::chrono::milliseconds(0));
}

std::shared_ptr<const ExecutionPlan> Engine::plan() const {
    std::lock_guard lock(snapshot_mutex_);
    return plan_;
}

std::shared_ptr<const EngineConfig> Engine::config() const {
    std::lock_guard lock(snapshot_mutex_);
    return config_;
}

void Engine::execute(const Job& job) {
    // Snapshots acquired at dispatch: a reload mid-job never changes this
    // job's plan.
    auto plan_snapshot = plan();
    auto config_snapshot = config();

    auto report = std::make_shared<JobReport>(execute_job(
        job.id, job.event, *plan_snapshot, *config_snapshot, job.control.get(), &hooks_));

    if (job.control->killed()) {
        scheduler_->complete(job.id, JobState::Killed, report);  // no-op if already Killed
        reporter_->post_comment(job.event,
                                "CI job " + std::to_string(job.id) + " was killed");
        return;
    }
    scheduler_->complete(job.id, report->final_pass ? JobState::Succeeded : JobState::Failed,
                         report);
    reporter_->post_terminal(job.id, job.event, *report);
}

Engine::WebhookResponse Engine::handle_webhook(const RawWebhook& raw) {
    auto cfg = config();
    if (!verify_signature(raw.body, raw.signature, cfg->webhook_secret))
        return {401, "signature verification failed"};

    std::variant<CommitEvent, Ignored> parsed;
    try {
        parsed = parse_event(raw);
    } catch (const WebhookParseError& e) {
        return {400, e.what()};
    }
    if (std::holds_alternative<Ignored>(parsed))
        return {202, "ignored: " + std::get<Ignored>(parsed).reason};

    const auto& event = std::get<CommitEvent>(parsed);
    JobId id;
    try {
        id = scheduler_->submit(event);
    } catch (const SchedulerShutdown&) {
        return {503, "engine shutting down, retry later"};
    }
    reporter_->post_pending(id, event);
    return {202, nlohmann::json{{"job_id", id}}.dump()};
}

Engine::ReloadOutcome Engine::reload() {
    if (config_path_.empty())
        return {.accepted = false, .error = "engine was started without a config path"};
    EngineConfig new_config;
    try {
        new_config = load_config(config_path_);
    } catch (const ConfigError& e) {
        return {.accepted = false, .error = e.what()};
    }
    return apply_new_config(std::move(new_config));
}

Engine::ReloadOutcome Engine::apply_new_config(EngineConfig new_config) {
    ReloadOutcome outcome;
    std::lock_guard lock(snapshot_mutex_);
    outcome.delta = diff_config(*config_, new_config);
    if (outcome.delta.empty()) {
        outcome.accepted = true;
        outcome.active_plugins = plan_->size();
        outcome.plan_version = plan_->version;  // no-op keeps the same plan object
        return outcome;
    }
    std::shared_ptr<const ExecutionPlan> new_plan;
    try {
        // build_plan validates every enabled command; a bad plug-in entry
        // rejects the whole reload and the old plan stays active.
        new_plan = std::make_shared<const ExecutionPlan>(
            build_plan(new_config.plugins, plan_version_ + 1));
    } catch (const PlanError& e) {
        outcome.accepted = false;
        outcome.error = e.what();
        return outcome;
    }
    ++plan_version_;
    plan_ = std::move(new_plan);
    config_ = std::make_shared<const EngineConfig>(std::move(new_config));
    outcome.accepted = true;
    outcome.active_plugins = plan_->size();
    outcome.plan_version = plan_->version;
    return outcome;
}

nlohmann::json Engine::handle_control(const nlohmann::json& request) {
    std::string cmd = request.value("cmd", "");
    if (cmd == "ping") return {{"ok", true}};
    if (cmd == "queue") {
        auto snap = scheduler_->snapshot();
        auto summaries = [](const std::vector<JobSummary>& jobs) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& j : jobs) {
                arr.push_back({{"id", j.id},
                               {"repo", j.repo},
                               {"change_id", j.change_id},
                               {"state", to_string(j.state)},
                               {"priority", j.priority}});
            }
            return arr;
        };
        return {{"ok", true},
                {"max_run_queue", snap.max_run_queue},
                {"waiting", summaries(snap.waiting)},
                {"running", summaries(snap.running)}};
    }
    if (cmd == "kill") {
        JobId id = request.value("id", JobId{0});
        bool killed = scheduler_->kill(id);
        return {{"ok", killed}, {"error", killed ? "" : "unknown or terminal job id"}};
    }
    if (cmd == "reload") {
        auto outcome = reload();
        nlohmann::json plug_ins = nlohmann::json::array();
        for (const auto& p : outcome.delta.plug_ins) plug_ins.push_back(p.name);
        nlohmann::json changed = nlohmann::json::array();
        for (const auto& p : outcome.delta.changed) changed.push_back(p.name);
        return {{"ok", outcome.accepted},
                {"error", outcome.error},
                {"plug_ins", plug_ins},
                {"plug_outs", outcome.delta.plug_outs},
                {"changed", changed},
                {"active_plugins", outcome.active_plugins},
                {"plan_version", outcome.plan_version}};
    }
    if (cmd == "metrics_export") {
        std::string path = request.value("path", "");
        if (path.empty()) return {{"ok", false}, {"error", "path required"}};
        try {
            metrics_.export_csv(path);
        } catch (const std::exception& e) {
            return {{"ok", false}, {"error", e.what()}};
        }
        return {{"ok", true}, {"path", path}};
    }
    return {{"ok", false}, {"error", "unknown command '" + cmd + "'"}};
}

void Engine::start() {
    auto cfg = config();

    http_ = std::make_unique<httplib::Server>();
    // Lightweight: a small fixed accept pool instead of httplib's default.
    http_->new_task_queue = [] { return new httplib::ThreadPool(4); };
    http_->Post("/webhook", [this](const httplib::Request& req, httplib::Response& res) {
        RawWebhook raw;
        raw.event_kind = req.get_header_value("X-Event-Kind");
        raw.signature = req.get_header_value("X-Signature-256");
        raw.body = req.body;
        auto out = handle_webhook(raw);
        res.status = out.status;
        res.set_content(out.body, "application/json");
    });
    http_->Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });

    if (cfg->listen_port == 0) {
        http_port_ = http_->bind_to_any_port(cfg->listen_host);
        if (http_port_ <= 0)
            throw std::runtime_error("cannot bind " + cfg->listen_host);
    } else {
        if (!http_->bind_to_port(cfg->listen_host, cfg->listen_port))
            throw std::runtime_error("cannot bind " + cfg->listen_host + ":" +
                                     std::to_string(cfg->listen_port));
        http_port_ = cfg->listen_port;
    }
    http_thread_ = std::thread([this] { http_->listen_after_bind(); });

    control_.start(control_socket_path(*cfg),
                   [this](const nlohmann::json& req) { return handle_control(req); });

    metrics_.start_ticker();
    started_ = true;
}

void Engine::stop(std::chrono::milliseconds grace) {
    if (started_) {
        control_.stop();
        http_->stop();
        if (http_thread_.joinable()) http_thread_.join();
        metrics_.stop_ticker();
        started_ = false;
    }
    scheduler_->shutdown(grace);
}

}  // namespace taoslite
