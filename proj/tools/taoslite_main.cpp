#include "taoslite/config.hpp"
#include "taoslite/control.hpp"
#include "taoslite/engine.hpp"
#include "taoslite/metrics.hpp"
#include "taoslite/webhook.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

std::atomic<bool> g_shutdown{false};

void handle_signal(int) {
    g_shutdown = true;
}

taoslite::EngineConfig load_or_exit(const std::string& config_path) {
    try {
        return taoslite::load_config(config_path);
    } catch (const taoslite::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        std::exit(1);
    }
}

int cmd_serve(const std::string& config_path) {
    auto cfg = load_or_exit(config_path);
    try {
        taoslite::Engine engine(cfg, config_path);
        engine.start();
        std::cout << "taoslite listening on " << cfg.listen_host << ":" << cfg.listen_port
                  << ", control socket " << taoslite::control_socket_path(cfg).string()
                  << "\n";
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        while (!g_shutdown)
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        std::cout << "shutting down\n";
        engine.stop(std::chrono::seconds(10));
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_replay(const std::string& config_path, const std::string& event_file) {
    auto cfg = load_or_exit(config_path);

    std::ifstream f(event_file);
    if (!f) {
        std::cerr << "cannot read " << event_file << "\n";
        return 2;
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    nlohmann::json doc = nlohmann::json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded() || !doc.contains("body")) {
        std::cerr << "malformed replay file (expected {headers:{...}, body:\"...\"})\n";
        return 2;
    }

    std::string body = doc["body"].is_string() ? doc["body"].get<std::string>()
                                               : doc["body"].dump();
    std::string kind = "pull_request";
    if (doc.contains("headers") && doc["headers"].contains("X-Event-Kind"))
        kind = doc["headers"]["X-Event-Kind"].get<std::string>();

    httplib::Client client(cfg.listen_host, cfg.listen_port);
    httplib::Headers headers{
        {"X-Event-Kind", kind},
        {"X-Signature-256", "sha256=" + taoslite::hmac_sha256_hex(body, cfg.webhook_secret)}};
    auto res = client.Post("/webhook", headers, body, "application/json");
    if (!res) {
        std::cerr << "cannot reach engine at " << cfg.listen_host << ":" << cfg.listen_port
                  << "\n";
        return 1;
    }
    std::cout << res->status << " " << res->body << "\n";
    return res->status < 400 ? 0 : 1;
}

int send_control(const taoslite::EngineConfig& cfg, const nlohmann::json& request,
                 bool json_output, const std::function<void(const nlohmann::json&)>& render) {
    try {
        auto response = taoslite::control_request(taoslite::control_socket_path(cfg), request);
        if (json_output) {
            std::cout << response.dump(2) << "\n";
        } else {
            render(response);
        }
        return response.value("ok", false) ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

void render_queue(const nlohmann::json& r) {
    std::cout << "run queue (max " << r.value("max_run_queue", 0) << "):\n";
    for (const auto& j : r["running"])
        std::cout << "  #" << j["id"].get<std::uint64_t>() << " " << j["repo"].get<std::string>()
                  << " change " << j["change_id"].get<std::int64_t>() << " [running]\n";
    std::cout << "wait queue:\n";
    for (const auto& j : r["waiting"])
        std::cout << "  #" << j["id"].get<std::uint64_t>() << " " << j["repo"].get<std::string>()
                  << " change " << j["change_id"].get<std::int64_t>() << " [waiting]\n";
}

void render_reload(const nlohmann::json& r) {
    if (!r.value("ok", false)) {
        std::cout << "reload rejected: " << r.value("error", "") << "\n";
        return;
    }
    auto names = [](const nlohmann::json& arr) {
        std::string out;
        for (const auto& n : arr) {
            if (!out.empty()) out += ", ";
            out += n.get<std::string>();
        }
        return out.empty() ? "(none)" : out;
    };
    std::cout << "plug-in: " << names(r["plug_ins"]) << "\n"
              << "plug-out: " << names(r["plug_outs"]) << "\n"
              << "changed: " << names(r["changed"]) << "\n"
              << "active plugins: " << r.value("active_plugins", 0) << " (plan v"
              << r.value("plan_version", 0) << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"taoslite - lightweight CI engine"};
    app.require_subcommand(1);

    std::string config_path = "taoslite.conf";
    app.add_option("-c,--config", config_path, "engine configuration file");
    bool json_output = false;

    auto* serve = app.add_subcommand("serve", "run the engine until signaled");

    std::string event_file;
    auto* replay = app.add_subcommand("replay", "inject a recorded webhook event");
    replay->add_option("file", event_file, "replay file {headers, body}")->required();

    auto* queue = app.add_subcommand("queue", "show wait/run queues");
    queue->add_flag("--json", json_output, "machine-readable output");

    std::uint64_t kill_id = 0;
    auto* kill = app.add_subcommand("kill", "kill a waiting or running job");
    kill->add_option("id", kill_id, "job id")->required();
    kill->add_flag("--json", json_output, "machine-readable output");

    auto* reload = app.add_subcommand("reload", "re-read config and apply plug-in/plug-out");
    reload->add_flag("--json", json_output, "machine-readable output");

    auto* metrics = app.add_subcommand("metrics", "metrics harness");
    std::string export_path;
    auto* mexport = metrics->add_subcommand("export", "export recorded metrics as CSV");
    mexport->add_option("path", export_path, "output CSV path")->required();

    auto* scaling = metrics->add_subcommand("scaling", "run the module-count scaling harness");
    std::string n_range = "1..12";
    std::string mode = "shared";
    int setup_ms = 200;
    scaling->add_option("--n", n_range, "module counts, A..B");
    scaling->add_option("--mode", mode, "shared|naive")
        ->check(CLI::IsMember({"shared", "naive"}));
    scaling->add_option("--setup-ms", setup_ms, "simulated shared setup cost (ms)");

    CLI11_PARSE(app, argc, argv);

    if (serve->parsed()) return cmd_serve(config_path);
    if (replay->parsed()) return cmd_replay(config_path, event_file);

    if (scaling->parsed()) {
        auto dots = n_range.find("..");
        int lo = 1, hi = 12;
        try {
            if (dots == std::string::npos) {
                lo = hi = std::stoi(n_range);
            } else {
                lo = std::stoi(n_range.substr(0, dots));
                hi = std::stoi(n_range.substr(dots + 2));
            }
        } catch (const std::exception&) {
            std::cerr << "invalid --n range: " << n_range << "\n";
            return 2;
        }
        std::vector<int> ns;
        for (int n = lo; n <= hi; ++n) ns.push_back(n);
        auto scratch = std::filesystem::temp_directory_path() / "taoslite-scaling";
        auto rows = taoslite::scaling_run(ns, mode, setup_ms, scratch);
        std::cout << "n_modules,mode,total_ms,per_module_ms\n";
        for (const auto& r : rows)
            std::cout << r.n_modules << "," << r.mode << "," << r.total_ms << ","
                      << r.per_module_ms << "\n";
        return 0;
    }

    auto cfg = load_or_exit(config_path);
    if (queue->parsed())
        return send_control(cfg, {{"cmd", "queue"}}, json_output, render_queue);
    if (kill->parsed())
        return send_control(cfg, {{"cmd", "kill"}, {"id", kill_id}}, json_output,
                            [&](const nlohmann::json& r) {
                                std::cout << (r.value("ok", false) ? "killed" : "not killed")
                                          << "\n";
                            });
    if (reload->parsed())
        return send_control(cfg, {{"cmd", "reload"}}, json_output, render_reload);
    if (mexport->parsed())
        return send_control(cfg, {{"cmd", "metrics_export"}, {"path", export_path}},
                            json_output, [&](const nlohmann::json& r) {
                                std::cout << "exported to " << r.value("path", "") << "\n";
                            });

    std::cerr << "no command\n";
    return 2;
}
