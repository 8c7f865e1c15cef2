#pragma once

#include "taoslite/config.hpp"
#include "taoslite/control.hpp"
#include "taoslite/metrics.hpp"
#include "taoslite/modulator.hpp"
#include "taoslite/reporter.hpp"
#include "taoslite/scheduler.hpp"
#include "taoslite/webhook.hpp"

#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace taoslite {

std::filesystem::path control_socket_path(const EngineConfig& cfg);

/// The core engine: webhook gateway + scheduler + modulator + reporter +
/// metrics, plus the control socket the CLI talks to. Config and plan are
/// immutable snapshots swapped atomically on reload.
class Engine {
public:
    struct ReloadOutcome {
        bool accepted = false;
        std::string error;
        ConfigDelta delta;
        std::size_t active_plugins = 0;
        std::uint64_t plan_version = 0;
    };

    struct WebhookResponse {
        int status = 500;
        std::string body;
    };

    Engine(EngineConfig config, std::filesystem::path config_path = {});
    ~Engine();

    void start();  // throws on port bind / socket failure
    void stop(std::chrono::milliseconds grace = std::chrono::seconds(10));

    WebhookResponse handle_webhook(const RawWebhook& raw);

    ReloadOutcome reload();  // re-reads the config file given at construction
    ReloadOutcome apply_new_config(EngineConfig new_config);

    std::shared_ptr<const ExecutionPlan> plan() const;
    std::shared_ptr<const EngineConfig> config() const;

    Scheduler& scheduler() { return *scheduler_; }
    MetricsRecorder& metrics() { return metrics_; }
    Reporter& reporter() { return *reporter_; }
    int http_port() const { return http_port_; }

private:
    void execute(const Job& job);
    nlohmann::json handle_control(const nlohmann::json& request);

    std::filesystem::path config_path_;
    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const EngineConfig> config_;
    std::shared_ptr<const ExecutionPlan> plan_;
    std::uint64_t plan_version_ = 0;

    std::unique_ptr<Reporter> reporter_;
    std::unique_ptr<Scheduler> scheduler_;
    MetricsRecorder metrics_;
    PipelineHooks hooks_;

    std::unique_ptr<httplib::Server> http_;
    std::thread http_thread_;
    int http_port_ = 0;
    ControlServer control_;
    bool started_ = false;
};

}  // namespace taoslite
