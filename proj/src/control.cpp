#include "taoslite/control.hpp"

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <string>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

namespace taoslite {

namespace {

sockaddr_un make_addr(const std::filesystem::path& path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    std::string p = path.string();
    if (p.size() >= sizeof(addr.sun_path))
        throw std::runtime_error("control socket path too long: " + p);
    std::strncpy(addr.sun_path, p.c_str(), sizeof(addr.sun_path) - 1);
    return addr;
}

std::string read_line(int fd) {
    std::string line;
    char c;
    while (true) {
        ssize_t n = ::read(fd, &c, 1);
        if (n <= 0) break;
        if (c == '\n') break;
        line.push_back(c);
        if (line.size() > 16 * 1024 * 1024) break;
    }
    return line;
}

void write_all(int fd, const std::string& data) {
    size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n <= 0) break;
        off += static_cast<size_t>(n);
    }
}

}  // namespace

ControlServer::~ControlServer() {
    stop();
}

void ControlServer::start(const std::filesystem::path& socket_path, Handler handler) {
    socket_path_ = socket_path;
    handler_ = std::move(handler);
    stopping_ = false;

    std::error_code ec;
    std::filesystem::remove(socket_path_, ec);

    listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (listen_fd_ < 0)
        throw std::runtime_error(std::string("control socket: ") + std::strerror(errno));
    auto addr = make_addr(socket_path_);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 8) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw std::runtime_error("control socket bind/listen failed on " +
                                 socket_path_.string() + ": " + std::strerror(errno));
    }
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void ControlServer::accept_loop() {
    while (!stopping_) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (stopping_) break;
            continue;
        }
        std::string line = read_line(fd);
        nlohmann::json response;
        try {
            nlohmann::json request = nlohmann::json::parse(line);
            response = handler_(request);
        } catch (const std::exception& e) {
            response = {{"ok", false}, {"error", e.what()}};
        }
        write_all(fd, response.dump() + "\n");
        ::close(fd);
    }
}

void ControlServer::stop() {
    if (listen_fd_ < 0) return;
    stopping_ = true;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    listen_fd_ = -1;
    std::error_code ec;
    std::filesystem::remove(socket_path_, ec);
}

nlohmann::json control_request(const std::filesystem::path& socket_path,
                               const nlohmann::json& request) {
    int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd < 0)
        throw std::runtime_error(std::string("control socket: ") + std::strerror(errno));
    auto addr = make_addr(socket_path);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int err = errno;
        ::close(fd);
        throw std::runtime_error("cannot connect to engine at " + socket_path.string() +
                                 ": " + std::strerror(err));
    }
    write_all(fd, request.dump() + "\n");
    std::string line = read_line(fd);
    ::close(fd);
    return nlohmann::json::parse(line);
}

}  // namespace taoslite
