#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "oscbf/simulator.hpp"

namespace oscbf::teleop {

inline constexpr int kWireVersion = 1;

// ------------------------------------------------------------------- wire

struct WireStateFrame {
    double t = 0.0;
    Vec q;
    Vec3 position = Vec3::Zero();
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
    Vec3 target_position = Vec3::Zero();
    std::map<std::string, double> min_h_by_kind;
    double min_h = 0.0;
    double slack_max = 0.0;
    ControlMode mode = ControlMode::Velocity;
    QpStatus status = QpStatus::Optimal;
    std::uint64_t command_seq = 0;  // last command applied to the target
    std::vector<Vec3> obstacle_centers;
};

struct WireCommand {
    Vec3 position = Vec3::Zero();
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
    std::optional<Vec> q_des;
    double client_time = 0.0;
    std::uint64_t seq = 0;  // client sequence number, echoed in frames once applied
};

struct WireError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const WireStateFrame& frame);
WireStateFrame state_frame_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const WireCommand& command);
/// Parses and validates a target message; throws WireError with a reason.
WireCommand parse_command(const std::string& text, int dof);

nlohmann::json error_message(const std::string& reason);
/// Sent once on connect: robot geometry and scenario description for rendering.
nlohmann::json hello_message(const Simulation& sim);

WireStateFrame make_frame(const Simulation& sim, const LogRecord& rec, std::uint64_t command_seq);

// ------------------------------------------------------------- websocket

/// Sec-WebSocket-Accept for a client key.
std::string websocket_accept_key(const std::string& client_key);

enum class WsOpcode : std::uint8_t { Continuation = 0x0, Text = 0x1, Binary = 0x2, Close = 0x8, Ping = 0x9, Pong = 0xA };

/// One frame; clients must mask, servers must not.
std::string encode_ws_frame(WsOpcode op, const std::string& payload, bool mask);

struct WsFrame {
    WsOpcode opcode = WsOpcode::Text;
    bool fin = true;
    std::string payload;
};

/// Decode a frame from the front of `buffer`; returns nullopt if more bytes
/// are needed, and removes the consumed bytes otherwise.
std::optional<WsFrame> decode_ws_frame(std::string& buffer, std::size_t max_payload = 1 << 20);

/// Blocking socket endpoint used by the server (per client) and by WsClient.
class WsConnection {
public:
    WsConnection(int fd, bool is_client);
    ~WsConnection();
    WsConnection(const WsConnection&) = delete;
    WsConnection& operator=(const WsConnection&) = delete;

    bool send_text(const std::string& text);
    /// Next complete text message; nullopt on close, error or timeout.
    std::optional<std::string> receive(std::chrono::milliseconds timeout);
    void close();
    bool open() const { return m_open.load(); }
    // Bytes already read past the HTTP handshake.
    void prime(std::string bytes) { m_buffer = std::move(bytes); }

private:
    bool send_raw(const std::string& bytes);

    int m_fd;
    bool m_client;
    std::atomic<bool> m_open{true};
    std::mutex m_send_mutex;
    std::string m_buffer;
    std::string m_fragment;
};

class WsClient {
public:
    /// Connects and performs the upgrade; throws std::runtime_error on failure.
    WsClient(const std::string& host, int port, const std::string& path = "/ws");

    bool send_text(const std::string& text) { return m_conn->send_text(text); }
    std::optional<std::string> receive(std::chrono::milliseconds timeout) { return m_conn->receive(timeout); }
    void close() { m_conn->close(); }

private:
    std::unique_ptr<WsConnection> m_conn;
};

// --------------------------------------------------------------- mailbox

/// Single-value latest-wins slot. put() and try_get() never block on each
/// other for longer than one copy; the control loop uses the try_ variants.
template <class T>
class Mailbox {
public:
    void put(T value)
    {
        std::lock_guard lock(m_mutex);
        m_value = std::move(value);
        ++m_version;
    }
    bool try_put(const T& value)
    {
        std::unique_lock lock(m_mutex, std::try_to_lock);
        if (!lock.owns_lock()) return false;
        m_value = value;
        ++m_version;
        return true;
    }
    /// Copy out the value if it is newer than `seen`.
    bool take_newer(std::uint64_t& seen, T& out)
    {
        std::lock_guard lock(m_mutex);
        if (m_version == seen || !m_value) return false;
        seen = m_version;
        out = *m_value;
        return true;
    }
    bool try_take_newer(std::uint64_t& seen, T& out)
    {
        std::unique_lock lock(m_mutex, std::try_to_lock);
        if (!lock.owns_lock() || m_version == seen || !m_value) return false;
        seen = m_version;
        out = *m_value;
        return true;
    }

private:
    std::mutex m_mutex;
    std::optional<T> m_value;
    std::uint64_t m_version = 0;
};

// ---------------------------------------------------------------- server

struct ServerOptions {
    int port = 8080;              // 0 picks a free port
    double broadcast_hz = 60.0;
    bool realtime = true;         // pace the sim loop to wall clock
    std::filesystem::path static_dir;  // served over plain HTTP when set
};

struct ServerStats {
    std::uint64_t sim_steps = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t commands_accepted = 0;
    std::uint64_t commands_rejected = 0;
    double min_h = 0.0;
    double max_step_overrun = 0.0;  // seconds beyond the control period
    bool diverged = false;
};

/// Runs a scenario live: a fixed-rate simulation loop, a broadcaster and one
/// reader per client. Roles exchange data only through Mailbox slots.
class TeleopServer {
public:
    TeleopServer(const ScenarioConfig& config, ServerOptions options);
    ~TeleopServer();

    /// Binds and starts every role; returns once the port accepts connections.
    void start();
    void stop();
    /// Blocks until stop() is called or the simulation diverges.
    void wait();
    int port() const { return m_port; }
    ServerStats stats() const;

private:
    struct Client;

    void sim_loop();
    void broadcast_loop();
    void accept_loop();
    void client_loop(std::shared_ptr<Client> client);
    void serve_http(int fd, const std::string& request);

    ScenarioConfig m_config;
    ServerOptions m_opt;
    std::unique_ptr<Simulation> m_sim;
    nlohmann::json m_hello;
    int m_listen_fd = -1;
    int m_port = 0;
    std::atomic<bool> m_running{false};

    Mailbox<WireCommand> m_commands;
    Mailbox<WireStateFrame> m_frames;

    mutable std::mutex m_clients_mutex;
    std::vector<std::shared_ptr<Client>> m_clients;

    std::atomic<std::uint64_t> m_steps{0}, m_sent{0}, m_accepted{0}, m_rejected{0};
    std::atomic<double> m_min_h{0.0}, m_overrun{0.0};
    std::atomic<bool> m_diverged{false};

    std::thread m_sim_thread, m_broadcast_thread, m_accept_thread;
    std::vector<std::thread> m_client_threads;
};

}  // namespace oscbf::teleop
