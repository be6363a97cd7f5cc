#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>
#include <limits>
#include <sstream>

#include "oscbf/teleop.hpp"

namespace oscbf::teleop {

struct TeleopServer::Client {
    std::unique_ptr<WsConnection> conn;
};

namespace {

std::string header_value(const std::string& request, const std::string& name)
{
    std::istringstream in(request);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string key = line.substr(0, colon);
        for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (key != name) continue;
        std::string v = line.substr(colon + 1);
        const auto b = v.find_first_not_of(" \t");
        return b == std::string::npos ? std::string() : v.substr(b);
    }
    return {};
}

std::string content_type(const std::filesystem::path& p)
{
    const std::string ext = p.extension().string();
    if (ext == ".html") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".csv") return "text/csv";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    return "application/octet-stream";
}

void send_all(int fd, const std::string& bytes)
{
    std::size_t off = 0;
    while (off < bytes.size()) {
        const ssize_t k = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
        if (k <= 0) return;
        off += static_cast<std::size_t>(k);
    }
}

void http_reply(int fd, int code, const std::string& reason, const std::string& type, const std::string& body)
{
    std::ostringstream o;
    o << "HTTP/1.1 " << code << ' ' << reason << "\r\nContent-Type: " << type << "\r\nContent-Length: " << body.size()
      << "\r\nConnection: close\r\n\r\n"
      << body;
    send_all(fd, o.str());
}

}  // namespace

TeleopServer::TeleopServer(const ScenarioConfig& config, ServerOptions options) : m_config(config), m_opt(std::move(options))
{
    const auto kind = m_config.reference.kind;
    if (kind != ReferenceKind::Teleop && kind != ReferenceKind::Hold) {
        throw ConfigError("serve needs a scenario with reference kind 'teleop' or 'hold'");
    }
    if (!(m_opt.broadcast_hz > 0.0)) throw ConfigError("broadcast rate must be positive");
    m_sim = std::make_unique<Simulation>(m_config);
    m_hello = hello_message(*m_sim);
}

TeleopServer::~TeleopServer() { stop(); }

void TeleopServer::start()
{
    if (m_running) return;
    m_listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (m_listen_fd < 0) throw std::runtime_error("socket() failed");
    const int yes = 1;
    ::setsockopt(m_listen_fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(static_cast<std::uint16_t>(m_opt.port));
    if (::bind(m_listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(m_listen_fd, 16) != 0) {
        ::close(m_listen_fd);
        m_listen_fd = -1;
        throw std::runtime_error("cannot listen on port " + std::to_string(m_opt.port));
    }
    socklen_t len = sizeof addr;
    ::getsockname(m_listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
    m_port = ntohs(addr.sin_port);
    m_min_h = std::numeric_limits<double>::infinity();
    m_running = true;
    m_sim_thread = std::thread(&TeleopServer::sim_loop, this);
    m_broadcast_thread = std::thread(&TeleopServer::broadcast_loop, this);
    m_accept_thread = std::thread(&TeleopServer::accept_loop, this);
}

void TeleopServer::stop()
{
    m_running = false;
    for (auto* t : {&m_sim_thread, &m_broadcast_thread, &m_accept_thread}) {
        if (t->joinable()) t->join();
    }
    {
        std::lock_guard lock(m_clients_mutex);
        for (auto& c : m_clients) c->conn->close();
        m_clients.clear();
    }
    for (auto& t : m_client_threads) {
        if (t.joinable()) t.join();
    }
    m_client_threads.clear();
    if (m_listen_fd >= 0) {
        ::close(m_listen_fd);
        m_listen_fd = -1;
    }
}

void TeleopServer::wait()
{
    while (m_running) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

ServerStats TeleopServer::stats() const
{
    ServerStats s;
    s.sim_steps = m_steps;
    s.frames_sent = m_sent;
    s.commands_accepted = m_accepted;
    s.commands_rejected = m_rejected;
    s.min_h = m_min_h;
    s.max_step_overrun = m_overrun;
    s.diverged = m_diverged;
    return s;
}

void TeleopServer::sim_loop()
{
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(m_config.dt));
    TaskTarget target = m_sim->reference().at(0.0);
    std::uint64_t seen = 0, applied = 0;
    WireCommand cmd;
    auto next = clock::now();
    double min_h = std::numeric_limits<double>::infinity();
    while (m_running) {
        if (m_commands.try_take_newer(seen, cmd)) {
            target.position = cmd.position;
            target.rotation = cmd.orientation.normalized().toRotationMatrix();
            target.twist.setZero();
            target.twist_rate.setZero();
            if (cmd.q_des) target.q_des = *cmd.q_des;
            applied = cmd.seq;
        }
        try {
            const LogRecord rec = m_sim->step(&target);
            min_h = std::min(min_h, rec.min_h);
            m_min_h = min_h;
            m_frames.try_put(make_frame(*m_sim, rec, applied));
        } catch (const SimDiverged&) {
            m_diverged = true;
            m_running = false;
            break;
        }
        ++m_steps;
        next += period;
        if (m_opt.realtime) {
            const auto now = clock::now();
            if (now > next) {
                m_overrun = std::max(m_overrun.load(), std::chrono::duration<double>(now - next).count());
                // Falling behind: resynchronise instead of bursting.
                next = now;
            } else {
                std::this_thread::sleep_until(next);
            }
        }
    }
}

void TeleopServer::broadcast_loop()
{
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / m_opt.broadcast_hz));
    std::uint64_t seen = 0;
    WireStateFrame frame;
    auto next = clock::now();
    while (m_running) {
        if (m_frames.take_newer(seen, frame)) {
            const std::string text = to_json(frame).dump();
            std::vector<std::shared_ptr<Client>> clients;
            {
                std::lock_guard lock(m_clients_mutex);
                std::erase_if(m_clients, [](const auto& c) { return !c->conn->open(); });
                clients = m_clients;
            }
            for (auto& c : clients) {
                if (c->conn->send_text(text)) ++m_sent;
            }
        }
        next += period;
        std::this_thread::sleep_until(next);
    }
}

void TeleopServer::accept_loop()
{
    while (m_running) {
        pollfd p{m_listen_fd, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        const int fd = ::accept(m_listen_fd, nullptr, nullptr);
        if (fd < 0) continue;
        timeval tv{1, 0};
        ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
        auto client = std::make_shared<Client>();
        client->conn = std::make_unique<WsConnection>(fd, false);
        // The HTTP request is read on the client's own thread.
        m_client_threads.emplace_back([this, client, fd] {
            std::string req;
            char tmp[2048];
            while (req.find("\r\n\r\n") == std::string::npos && req.size() < 16384) {
                pollfd q{fd, POLLIN, 0};
                if (::poll(&q, 1, 2000) <= 0) return;
                const ssize_t k = ::recv(fd, tmp, sizeof tmp, 0);
                if (k <= 0) return;
                req.append(tmp, static_cast<std::size_t>(k));
            }
            const std::size_t end = req.find("\r\n\r\n");
            if (end == std::string::npos) return;
            const std::string head = req.substr(0, end + 4);
            std::string upgrade = header_value(head, "upgrade");
            for (auto& ch : upgrade) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            if (upgrade != "websocket") {
                serve_http(fd, head);
                client->conn->close();
                return;
            }
            const std::string key = header_value(head, "sec-websocket-key");
            if (key.empty()) {
                http_reply(fd, 400, "Bad Request", "text/plain", "missing Sec-WebSocket-Key\n");
                client->conn->close();
                return;
            }
            send_all(fd, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                         "Sec-WebSocket-Accept: " + websocket_accept_key(key) + "\r\n\r\n");
            client->conn->prime(req.substr(end + 4));
            client->conn->send_text(m_hello.dump());
            {
                std::lock_guard lock(m_clients_mutex);
                m_clients.push_back(client);
            }
            client_loop(client);
        });
    }
}

void TeleopServer::client_loop(std::shared_ptr<Client> client)
{
    const int dof = m_sim->model().dof();
    while (m_running && client->conn->open()) {
        const auto msg = client->conn->receive(std::chrono::milliseconds(200));
        if (!msg) continue;
        try {
            m_commands.put(parse_command(*msg, dof));
            ++m_accepted;
        } catch (const WireError& e) {
            ++m_rejected;
            client->conn->send_text(error_message(e.what()).dump());
        }
    }
}

void TeleopServer::serve_http(int fd, const std::string& request)
{
    std::istringstream in(request);
    std::string method, target;
    in >> method >> target;
    if (method != "GET") {
        http_reply(fd, 405, "Method Not Allowed", "text/plain", "GET only\n");
        return;
    }
    if (m_opt.static_dir.empty()) {
        http_reply(fd, 404, "Not Found", "text/plain", "no static directory configured\n");
        return;
    }
    std::string path = target.substr(0, target.find('?'));
    if (path.empty() || path == "/") path = "/index.html";
    const std::filesystem::path rel = std::filesystem::path(path.substr(1)).lexically_normal();
    if (rel.empty() || rel.is_absolute() || *rel.begin() == "..") {
        http_reply(fd, 403, "Forbidden", "text/plain", "forbidden\n");
        return;
    }
    const auto file = m_opt.static_dir / rel;
    std::ifstream f(file, std::ios::binary);
    if (!f || std::filesystem::is_directory(file)) {
        http_reply(fd, 404, "Not Found", "text/plain", "not found\n");
        return;
    }
    std::ostringstream body;
    body << f.rdbuf();
    http_reply(fd, 200, "OK", content_type(file), body.str());
}

}  // namespace oscbf::teleop
