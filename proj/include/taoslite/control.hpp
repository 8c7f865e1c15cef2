#pragma once

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <functional>
#include <thread>

namespace taoslite {

/// Line-delimited JSON request/response over a local unix socket. One request
/// per connection.
class ControlServer {
public:
    using Handler = std::function<nlohmann::json(const nlohmann::json& request)>;

    ControlServer() = default;
    ~ControlServer();

    void start(const std::filesystem::path& socket_path, Handler handler);
    void stop();

private:
    void accept_loop();

    std::filesystem::path socket_path_;
    Handler handler_;
    int listen_fd_ = -1;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
};

/// Client side; throws std::runtime_error on connection failure.
nlohmann::json control_request(const std::filesystem::path& socket_path,
                               const nlohmann::json& request);

}  // namespace taoslite
