#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <random>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "oscbf/teleop.hpp"

namespace oscbf::teleop {

std::string websocket_accept_key(const std::string& client_key)
{
    static constexpr char kGuid[] = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
    const std::string in = client_key + kGuid;
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(in.data()), in.size(), digest);
    unsigned char out[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
    const int len = EVP_EncodeBlock(out, digest, SHA_DIGEST_LENGTH);
    return std::string(reinterpret_cast<char*>(out), static_cast<std::size_t>(len));
}

std::string encode_ws_frame(WsOpcode op, const std::string& payload, bool mask)
{
    std::string f;
    f.reserve(payload.size() + 14);
    f.push_back(static_cast<char>(0x80 | static_cast<std::uint8_t>(op)));
    const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
    const std::size_t n = payload.size();
    if (n < 126) {
        f.push_back(static_cast<char>(mask_bit | n));
    } else if (n <= 0xFFFF) {
        f.push_back(static_cast<char>(mask_bit | 126));
        f.push_back(static_cast<char>((n >> 8) & 0xFF));
        f.push_back(static_cast<char>(n & 0xFF));
    } else {
        f.push_back(static_cast<char>(mask_bit | 127));
        for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xFF));
    }
    if (!mask) return f + payload;
    static thread_local std::mt19937 rng{std::random_device{}()};
    std::uint8_t key[4];
    for (auto& k : key) k = static_cast<std::uint8_t>(rng());
    f.append(reinterpret_cast<char*>(key), 4);
    for (std::size_t i = 0; i < n; ++i) f.push_back(static_cast<char>(payload[i] ^ key[i % 4]));
    return f;
}

std::optional<WsFrame> decode_ws_frame(std::string& buf, std::size_t max_payload)
{
    if (buf.size() < 2) return std::nullopt;
    const auto byte = [&](std::size_t i) { return static_cast<std::uint8_t>(buf[i]); };
    WsFrame f;
    f.fin = (byte(0) & 0x80) != 0;
    if (byte(0) & 0x70) throw std::runtime_error("websocket: reserved bits set");
    f.opcode = static_cast<WsOpcode>(byte(0) & 0x0F);
    const bool masked = (byte(1) & 0x80) != 0;
    std::uint64_t len = byte(1) & 0x7F;
    std::size_t pos = 2;
    if (len == 126) {
        if (buf.size() < 4) return std::nullopt;
        len = (static_cast<std::uint64_t>(byte(2)) << 8) | byte(3);
        pos = 4;
    } else if (len == 127) {
        if (buf.size() < 10) return std::nullopt;
        len = 0;
        for (int i = 0; i < 8; ++i) len = (len << 8) | byte(2 + static_cast<std::size_t>(i));
        pos = 10;
    }
    if (len > max_payload) throw std::runtime_error("websocket: frame too large");
    std::uint8_t key[4] = {0, 0, 0, 0};
    if (masked) {
        if (buf.size() < pos + 4) return std::nullopt;
        for (int i = 0; i < 4; ++i) key[i] = byte(pos + static_cast<std::size_t>(i));
        pos += 4;
    }
    if (buf.size() < pos + len) return std::nullopt;
    f.payload = buf.substr(pos, len);
    if (masked) {
        for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] = static_cast<char>(f.payload[i] ^ key[i % 4]);
    }
    buf.erase(0, pos + len);
    return f;
}

// --------------------------------------------------------------------------

WsConnection::WsConnection(int fd, bool is_client) : m_fd(fd), m_client(is_client) {}

WsConnection::~WsConnection()
{
    close();
    if (m_fd >= 0) ::close(m_fd);
}

bool WsConnection::send_raw(const std::string& bytes)
{
    std::lock_guard lock(m_send_mutex);
    if (!m_open) return false;
    std::size_t off = 0;
    while (off < bytes.size()) {
        const ssize_t k = ::send(m_fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
        if (k <= 0) {
            if (k < 0 && errno == EINTR) continue;
            m_open = false;
            return false;
        }
        off += static_cast<std::size_t>(k);
    }
    return true;
}

bool WsConnection::send_text(const std::string& text) { return send_raw(encode_ws_frame(WsOpcode::Text, text, m_client)); }

void WsConnection::close()
{
    if (!m_open) return;
    send_raw(encode_ws_frame(WsOpcode::Close, std::string("\x03\xE8", 2), m_client));
    m_open = false;
    ::shutdown(m_fd, SHUT_RDWR);
}

std::optional<std::string> WsConnection::receive(std::chrono::milliseconds timeout)
{
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
        try {
            while (auto f = decode_ws_frame(m_buffer)) {
                switch (f->opcode) {
                case WsOpcode::Ping:
                    send_raw(encode_ws_frame(WsOpcode::Pong, f->payload, m_client));
                    break;
                case WsOpcode::Pong:
                    break;
                case WsOpcode::Close:
                    close();
                    return std::nullopt;
                case WsOpcode::Text:
                case WsOpcode::Binary:
                case WsOpcode::Continuation:
                    m_fragment += f->payload;
                    if (f->fin) {
                        std::string msg;
                        msg.swap(m_fragment);
                        return msg;
                    }
                    break;
                }
            }
        } catch (const std::runtime_error&) {
            close();
            return std::nullopt;
        }
        if (!m_open) return std::nullopt;
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) return std::nullopt;
        pollfd p{m_fd, POLLIN, 0};
        const int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 100)));
        if (r < 0 && errno != EINTR) {
            m_open = false;
            return std::nullopt;
        }
        if (r <= 0) continue;
        char tmp[4096];
        const ssize_t k = ::recv(m_fd, tmp, sizeof tmp, 0);
        if (k <= 0) {
            m_open = false;
            return std::nullopt;
        }
        m_buffer.append(tmp, static_cast<std::size_t>(k));
    }
}

// --------------------------------------------------------------------------

WsClient::WsClient(const std::string& host, int port, const std::string& path)
{
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
        throw std::runtime_error("cannot resolve " + host);
    }
    int fd = -1;
    for (addrinfo* a = res; a; a = a->ai_next) {
        fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port));

    std::mt19937_64 rng{std::random_device{}()};
    unsigned char raw[16];
    for (auto& b : raw) b = static_cast<unsigned char>(rng());
    unsigned char key_b64[32];
    const int klen = EVP_EncodeBlock(key_b64, raw, 16);
    const std::string key(reinterpret_cast<char*>(key_b64), static_cast<std::size_t>(klen));
    const std::string req = "GET " + path + " HTTP/1.1\r\nHost: " + host + ":" + std::to_string(port) +
                            "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: " + key +
                            "\r\nSec-WebSocket-Version: 13\r\n\r\n";
    if (::send(fd, req.data(), req.size(), MSG_NOSIGNAL) != static_cast<ssize_t>(req.size())) {
        ::close(fd);
        throw std::runtime_error("handshake send failed");
    }
    std::string resp;
    char tmp[1024];
    while (resp.find("\r\n\r\n") == std::string::npos) {
        pollfd p{fd, POLLIN, 0};
        if (::poll(&p, 1, 5000) <= 0) {
            ::close(fd);
            throw std::runtime_error("handshake timed out");
        }
        const ssize_t k = ::recv(fd, tmp, sizeof tmp, 0);
        if (k <= 0) {
            ::close(fd);
            throw std::runtime_error("handshake: connection closed");
        }
        resp.append(tmp, static_cast<std::size_t>(k));
    }
    const std::size_t end = resp.find("\r\n\r\n") + 4;
    const std::string head = resp.substr(0, end);
    if (head.rfind("HTTP/1.1 101", 0) != 0 || head.find(websocket_accept_key(key)) == std::string::npos) {
        ::close(fd);
        throw std::runtime_error("websocket upgrade rejected");
    }
    m_conn = std::make_unique<WsConnection>(fd, true);
    m_conn->prime(resp.substr(end));
}

}  // namespace oscbf::teleop
