#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>

#include "helpers.hpp"
#include "oscbf/teleop.hpp"

using namespace oscbf;
using namespace oscbf::teleop;
using namespace std::chrono_literals;

namespace {

ScenarioConfig teleop_config()
{
    return load_scenario(test::scenario_path("teleop_clutter"), {"mode=velocity"});
}

// Next message of the given type, skipping others.
std::optional<nlohmann::json> next_of_type(WsClient& c, const std::string& type,
                                           std::chrono::milliseconds budget = 5000ms)
{
    const auto deadline = std::chrono::steady_clock::now() + budget;
    while (std::chrono::steady_clock::now() < deadline) {
        const auto msg = c.receive(200ms);
        if (!msg) continue;
        auto doc = nlohmann::json::parse(*msg);
        if (doc.value("type", "") == type) return doc;
    }
    return std::nullopt;
}

std::string http_get(int port, const std::string& target)
{
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        return {};
    }
    const std::string req = "GET " + target + " HTTP/1.1\r\nHost: localhost\r\n\r\n";
    ::send(fd, req.data(), req.size(), MSG_NOSIGNAL);
    std::string resp;
    char buf[4096];
    ssize_t k;
    while ((k = ::recv(fd, buf, sizeof buf, 0)) > 0) resp.append(buf, static_cast<std::size_t>(k));
    ::close(fd);
    return resp;
}

}  // namespace

TEST_SUITE("teleop")
{
    TEST_CASE("handshake accept key")
    {
        CHECK(websocket_accept_key("dGhlIHNhbXBsZSBub25jZQ==") == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
    }

    TEST_CASE("frame encoding round trip")
    {
        for (std::size_t n : {0u, 5u, 125u, 126u, 300u, 70000u}) {
            for (bool mask : {false, true}) {
                std::string payload(n, 'a');
                for (std::size_t i = 0; i < n; ++i) payload[i] = static_cast<char>('a' + i % 26);
                std::string buf = encode_ws_frame(WsOpcode::Text, payload, mask);
                const std::size_t full = buf.size();
                std::string partial = buf.substr(0, full - 1);
                CHECK_FALSE(decode_ws_frame(partial).has_value());
                buf += "tail";
                const auto f = decode_ws_frame(buf);
                REQUIRE(f.has_value());
                CHECK(f->payload == payload);
                CHECK(f->opcode == WsOpcode::Text);
                CHECK(f->fin);
                CHECK(buf == "tail");
            }
        }
        std::string big = encode_ws_frame(WsOpcode::Binary, std::string(2048, 'x'), false);
        CHECK_THROWS(decode_ws_frame(big, 1024));
    }

    TEST_CASE("command parsing")
    {
        WireCommand c;
        c.position = Vec3(0.4, 0.1, 0.5);
        c.orientation = Eigen::Quaterniond(0.0, 1.0, 0.0, 0.0);
        c.seq = 12;
        c.q_des = Vec::Zero(7);
        const WireCommand back = parse_command(to_json(c).dump(), 7);
        CHECK((back.position - c.position).norm() == 0.0);
        CHECK(back.orientation.isApprox(c.orientation));
        CHECK(back.seq == 12);
        REQUIRE(back.q_des.has_value());

        const auto rejects = [](const std::string& text) { CHECK_THROWS_AS(parse_command(text, 7), WireError); };
        rejects("{not json");
        rejects("[1,2,3]");
        rejects(R"({"type":"target","position":[0,0,0]})");
        rejects(R"({"v":2,"type":"target","position":[0,0,0]})");
        rejects(R"({"v":1,"type":"hello","position":[0,0,0]})");
        rejects(R"({"v":1,"type":"target"})");
        rejects(R"({"v":1,"type":"target","position":[0,0]})");
        rejects(R"({"v":1,"type":"target","position":[0,"a",0]})");
        rejects(R"({"v":1,"type":"target","position":[0,0,0],"quaternion":[1,1,0,0]})");
        rejects(R"({"v":1,"type":"target","position":[0,0,0],"q_des":[0,0]})");
        rejects(R"({"v":1,"type":"target","position":[0,0,0],"seq":"x"})");
        CHECK_NOTHROW(parse_command(R"({"v":1,"type":"target","position":[0,0,0]})", 7));
    }

    TEST_CASE("state frame round trip")
    {
        WireStateFrame f;
        f.t = 1.5;
        f.q = Vec::LinSpaced(7, 0.0, 0.6);
        f.position = Vec3(0.1, 0.2, 0.3);
        f.target_position = Vec3(0.3, 0.2, 0.1);
        f.min_h_by_kind = {{"collision_pair", 0.7}, {"singularity", 0.02}};
        f.min_h = 0.02;
        f.mode = ControlMode::Torque;
        f.status = QpStatus::MaxIters;
        f.command_seq = 4;
        f.obstacle_centers = {Vec3(1, 2, 3)};
        const auto j = to_json(f);
        CHECK(j["v"] == 1);
        CHECK(j["min_h"]["collision_pair"] == 0.7);
        const WireStateFrame g = state_frame_from_json(nlohmann::json::parse(j.dump()));
        CHECK((g.q - f.q).norm() == 0.0);
        CHECK(g.min_h_by_kind == f.min_h_by_kind);
        CHECK(g.mode == ControlMode::Torque);
        CHECK(g.status == QpStatus::MaxIters);
        CHECK(g.command_seq == 4);
        CHECK(g.obstacle_centers.size() == 1);
        CHECK(error_message("bad")["v"] == 1);
    }

    TEST_CASE("mailbox keeps only the latest value")
    {
        Mailbox<int> box;
        std::uint64_t seen = 0;
        int out = 0;
        CHECK_FALSE(box.take_newer(seen, out));
        box.put(1);
        box.put(2);
        CHECK(box.try_put(3));
        CHECK(box.take_newer(seen, out));
        CHECK(out == 3);
        CHECK_FALSE(box.take_newer(seen, out));
    }

    TEST_CASE("server rejects scenarios without a live reference")
    {
        const ScenarioConfig c = load_scenario(test::scenario_path("fig1_all_constraints"));
        CHECK_THROWS_AS(TeleopServer(c, {}), ConfigError);
    }

    TEST_CASE("live session")
    {
        const ScenarioConfig cfg = teleop_config();
        ServerOptions opt;
        opt.port = 0;
        TeleopServer server(cfg, opt);
        server.start();
        REQUIRE(server.port() > 0);

        WsClient a("127.0.0.1", server.port());
        const auto hello = next_of_type(a, "hello");
        REQUIRE(hello.has_value());
        CHECK((*hello)["v"] == 1);
        CHECK((*hello)["robot"]["joints"].size() == 7);
        CHECK((*hello)["obstacles"].size() == 2);

        // Without commands the target stays at the initial pose.
        const RobotModel m = scenario_model(cfg);
        const Vec3 ee0 = forward_kinematics(m, *cfg.initial_q).ee.translation();
        const auto first = next_of_type(a, "state");
        REQUIRE(first.has_value());
        const WireStateFrame f0 = state_frame_from_json(*first);
        CHECK((f0.target_position - ee0).norm() < 1e-9);
        CHECK(f0.command_seq == 0);
        CHECK(f0.q.size() == 7);

        WsClient b("127.0.0.1", server.port());
        REQUIRE(next_of_type(b, "hello").has_value());
        CHECK(next_of_type(b, "state").has_value());

        WireCommand cmd;
        cmd.position = ee0 + Vec3(0.0, 0.05, 0.0);
        cmd.orientation = Eigen::Quaterniond(forward_kinematics(m, *cfg.initial_q).ee.linear());
        cmd.seq = 5;
        REQUIRE(a.send_text(to_json(cmd).dump()));
        bool acked = false;
        const auto deadline = std::chrono::steady_clock::now() + 5s;
        while (!acked && std::chrono::steady_clock::now() < deadline) {
            const auto s = next_of_type(a, "state", 500ms);
            if (s && (*s)["ack"] == 5) {
                acked = true;
                CHECK((state_frame_from_json(*s).target_position - cmd.position).norm() < 1e-12);
            }
        }
        CHECK(acked);

        REQUIRE(b.send_text("{\"v\":1,\"type\":\"target\"}"));
        const auto err = next_of_type(b, "error");
        REQUIRE(err.has_value());
        CHECK((*err)["v"] == 1);

        a.close();
        b.close();
        std::this_thread::sleep_for(100ms);
        server.stop();
        const ServerStats st = server.stats();
        CHECK(st.sim_steps > 0);
        CHECK(st.frames_sent > 0);
        CHECK(st.commands_accepted == 1);
        CHECK(st.commands_rejected == 1);
        CHECK(st.min_h >= -1e-3);
        CHECK_FALSE(st.diverged);
    }

    TEST_CASE("static files over HTTP")
    {
        const auto dir = std::filesystem::temp_directory_path() / "oscbf_static_test";
        std::filesystem::create_directories(dir);
        std::ofstream(dir / "index.html") << "<html>cockpit</html>";
        ServerOptions opt;
        opt.port = 0;
        opt.static_dir = dir;
        TeleopServer server(teleop_config(), opt);
        server.start();
        const std::string index = http_get(server.port(), "/");
        CHECK(index.rfind("HTTP/1.1 200", 0) == 0);
        CHECK(index.find("text/html") != std::string::npos);
        CHECK(index.find("<html>cockpit</html>") != std::string::npos);
        CHECK(http_get(server.port(), "/missing.js").rfind("HTTP/1.1 404", 0) == 0);
        CHECK(http_get(server.port(), "/../etc/passwd").rfind("HTTP/1.1 403", 0) == 0);
        server.stop();
        std::filesystem::remove_all(dir);
    }
}
