#include "mpr/gateway_server.hpp"

#include <httplib.h>

namespace mpr {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

// Runs `fn(request_body)` and maps engine errors onto HTTP statuses.
template <typename Fn>
void guarded(const httplib::Request& req, httplib::Response& res, Fn&& fn, bool needs_body = true) {
    try {
        json body = json::object();
        if (needs_body) body = json::parse(req.body);
        reply(res, 200, fn(body));
    } catch (const json::exception& e) {
        reply(res, 400, {{"error", std::string("malformed request: ") + e.what()}});
    } catch (const ImageNotFound& e) {
        reply(res, 404, {{"error", e.what()}});
    } catch (const GatewayUnavailable& e) {
        reply(res, 503, {{"error", e.what()}});
    } catch (const GatewayError& e) {
        reply(res, 400, {{"error", e.what()}});
    } catch (const ValidationError& e) {
        reply(res, 400, {{"error", e.what()}});
    } catch (const ConfigError& e) {
        reply(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
    }
}

}  // namespace

HttpService::HttpService() : server_(std::make_unique<httplib::Server>()) {}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound < 0) throw Error("cannot bind " + host);
        return bound;
    }
    if (!server_->bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpService::start() {
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void HttpService::listen() { server_->listen_after_bind(); }

void HttpService::stop() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

GatewayServer::GatewayServer(const ModelGateway& gateway) : gateway_(gateway) {
    server().Get("/v1/descriptor", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [this](const json&) { return wire::descriptor_to_json(gateway_.descriptor()); }, false);
    });
    server().Post("/v1/encode_pair", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [this](const json& body) {
            const std::string question = body.at("question").get<std::string>();
            return wire::encode_pair_response(gateway_.encode_pair(question, wire::image_from_json(body)));
        });
    });
    server().Post("/v1/encode_image", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [this](const json& body) {
            return wire::encode_image_response(gateway_.encode_image_tokens(wire::image_from_json(body)));
        });
    });
    server().Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [this](const json& body) {
            return json{{"text", gateway_.generate(wire::prompt_from_request(body)).text}};
        });
    });
}

}  // namespace mpr
