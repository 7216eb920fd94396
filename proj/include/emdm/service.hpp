#pragma once

// JSON-over-HTTP front end. Routing lives in Service::handle so it can be
// exercised without sockets; serve() puts it behind cpp-httplib.

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "emdm/store.hpp"

namespace emdm {

struct HttpRequest {
    std::string method;  // GET, POST, PUT, DELETE
    std::string path;    // without the query string
    std::map<std::string, std::string> query;
    std::string body;
};

struct HttpResponse {
    int status = 200;
    std::string body;  // JSON text
};

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::function<void(int port)> on_ready;
};

class Service {
public:
    explicit Service(std::shared_ptr<Store> store);
    ~Service();

    HttpResponse handle(const HttpRequest& request);

    // Blocks until stop(). Throws BindError when the address is taken.
    void serve(const ServeOptions& options);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace emdm
