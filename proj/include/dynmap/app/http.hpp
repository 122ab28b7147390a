// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/app/service.hpp>

#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace dynmap::app {

inline constexpr const char* kAddrEnv = "DYNMAP_ADDR";
inline constexpr const char* kDefaultAddr = "127.0.0.1:8080";

struct BindAddress {
    std::string host;
    int port = 0;
};

/// Parses "host:port"; the port may be 0 to pick a free one.
BindAddress parse_addr(const std::string& addr);

/// Explicit flag first, then the DYNMAP_ADDR environment variable, then
/// the built-in default.
std::string resolve_addr(const std::string& flag);

/// HTTP front end: GET /meta, POST /render (JSON body), GET /render (query).
/// Render responses are PNG with the render time in X-Render-Millis.
class HttpServer {
public:
    explicit HttpServer(RenderService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and returns the actual port; throws when binding fails.
    int bind(const BindAddress& addr);
    /// Serves until stop() is called.
    void listen();
    void stop();

private:
    RenderService& service_;
    std::unique_ptr<httplib::Server> server_;
};

} // namespace dynmap::app
