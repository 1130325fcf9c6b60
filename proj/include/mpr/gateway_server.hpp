#pragma once

#include <memory>
#include <string>
#include <thread>

#include "mpr/model_gateway.hpp"

namespace httplib {
class Server;
}

namespace mpr {

/// Small HTTP host shared by the gateway and answer services. Owns the
/// server and, once started in the background, its listening thread.
class HttpService {
public:
    HttpService();
    virtual ~HttpService();

    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds `host:port`; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);

    /// Serves on the bound socket from a background thread.
    void start();

    /// Serves on the bound socket, blocking the caller.
    void listen();

    void stop();

protected:
    httplib::Server& server() { return *server_; }

private:
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

/// Exposes a ModelGateway over the /v1 wire protocol.
class GatewayServer final : public HttpService {
public:
    explicit GatewayServer(const ModelGateway& gateway);

private:
    const ModelGateway& gateway_;
};

}  // namespace mpr
