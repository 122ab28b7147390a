// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/app/http.hpp>

#include <httplib.h>

#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace dynmap::app {

BindAddress parse_addr(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0) {
        throw std::invalid_argument("address '" + addr + "' is not host:port");
    }
    BindAddress out;
    out.host = addr.substr(0, colon);
    try {
        std::size_t used = 0;
        const auto port = addr.substr(colon + 1);
        out.port = std::stoi(port, &used);
        if (used != port.size() || out.port < 0 || out.port > 65535) {
            throw std::invalid_argument(port);
        }
    } catch (const std::exception&) {
        throw std::invalid_argument("address '" + addr + "' has an invalid port");
    }
    return out;
}

std::string resolve_addr(const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv(kAddrEnv); env != nullptr && *env != '\0') {
        return env;
    }
    return kDefaultAddr;
}

namespace {

int status_of(RequestError::Kind k) {
    switch (k) {
    case RequestError::Kind::not_found: return 404;
    case RequestError::Kind::too_large: return 413;
    case RequestError::Kind::bad_request: return 400;
    }
    return 400;
}

void error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
}

} // namespace

HttpServer::HttpServer(RenderService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Expose-Headers", "X-Render-Millis"}});
    s.Get("/meta", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(service_.meta().dump(), "application/json");
    });
    auto serve = [this](httplib::Response& res, const RenderRequest& req) {
        const auto out = service_.render(req);
        char ms[32];
        std::snprintf(ms, sizeof ms, "%.3f", out.millis);
        res.set_header("X-Render-Millis", ms);
        res.set_content(reinterpret_cast<const char*>(out.png.data()), out.png.size(), "image/png");
    };
    s.Post("/render", [serve](const httplib::Request& req, httplib::Response& res) {
        try {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                throw RequestError(RequestError::Kind::bad_request, "request body is not valid JSON");
            }
            serve(res, request_from_json(body));
        } catch (const RequestError& e) {
            error(res, status_of(e.kind), e.what());
        }
    });
    s.Get("/render", [serve](const httplib::Request& req, httplib::Response& res) {
        try {
            std::map<std::string, std::string> query;
            for (const auto& [k, v] : req.params) {
                if (!query.emplace(k, v).second) {
                    throw RequestError(RequestError::Kind::bad_request, "repeated query parameter '" + k + "'");
                }
            }
            serve(res, request_from_query(query));
        } catch (const RequestError& e) {
            error(res, status_of(e.kind), e.what());
        }
    });
    s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            error(res, 500, e.what());
        } catch (...) {
            error(res, 500, "unknown error");
        }
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const BindAddress& addr) {
    if (addr.port == 0) {
        const int port = server_->bind_to_any_port(addr.host);
        if (port < 0) {
            throw std::runtime_error("cannot bind " + addr.host);
        }
        return port;
    }
    if (!server_->bind_to_port(addr.host, addr.port)) {
        throw std::runtime_error("cannot bind " + addr.host + ":" + std::to_string(addr.port));
    }
    return addr.port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
    if (server_ && server_->is_running()) {
        server_->stop();
    }
}

} // namespace dynmap::app
