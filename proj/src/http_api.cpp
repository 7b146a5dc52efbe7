#include "cospar/http_api.hpp"

#include "cospar/errors.hpp"

#include <httplib.h>

namespace cospar {
namespace {

HttpError make_error(int status, const char* code, const std::string& message, Json details = Json::object()) {
    return {status, {{"code", code}, {"message", message}, {"details", std::move(details)}}};
}

void send(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (...) {
            const auto error = http_error_from_current_exception();
            send(res, error.status, error.body);
        }
    };
}

Json body_of(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
        return Json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("request body is not valid JSON: ") + e.what());
    }
}

}  // namespace

HttpError http_error_from_current_exception() {
    try {
        throw;
    } catch (const ValidationError& e) {
        return make_error(422, "validation_error", e.what(), {{"fields", e.fields()}});
    } catch (const UnsupportedVersionError& e) {
        return make_error(422, "unsupported_version", e.what());
    } catch (const NotFoundError& e) {
        return make_error(404, "not_found", e.what());
    } catch (const ConflictError& e) {
        return make_error(409, "conflict", e.what());
    } catch (const ParseError& e) {
        return make_error(400, "bad_request", e.what());
    } catch (const ConfigError& e) {
        return make_error(422, "validation_error", e.what());
    } catch (const ProtocolError& e) {
        return make_error(422, "protocol_error", e.what());
    } catch (const NumericalError& e) {
        return make_error(500, "numerical_error", e.what(), {{"last_gradient_norm", e.last_gradient_norm()}});
    } catch (const std::exception& e) {
        return make_error(500, "internal_error", e.what());
    } catch (...) {
        return make_error(500, "internal_error", "unknown error");
    }
}

void mount_session_api(httplib::Server& server, SessionService& service, std::string cors_origin) {
    server.set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/presets", guarded([&service](const httplib::Request&, httplib::Response& res) {
                   send(res, 200, service.list_presets());
               }));
    server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    send(res, 201, service.create(body_of(req)));
                }));
    server.Post("/sessions/import", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    send(res, 201, service.import_session(body_of(req)));
                }));
    server.Get(R"(/sessions/([0-9A-Za-z_-]+))",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   send(res, 200, service.get(req.matches[1]));
               }));
    server.Post(R"(/sessions/([0-9A-Za-z_-]+)/feedback)",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    send(res, 200, service.submit_feedback(req.matches[1], body_of(req)));
                }));
    server.Get(R"(/sessions/([0-9A-Za-z_-]+)/posterior)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   send(res, 200, service.posterior(req.matches[1]));
               }));
    server.Get(R"(/sessions/([0-9A-Za-z_-]+)/history)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   send(res, 200, service.history(req.matches[1]));
               }));
    server.Post(R"(/sessions/([0-9A-Za-z_-]+)/close)",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    send(res, 200, service.close(req.matches[1]));
                }));
    server.Get(R"(/sessions/([0-9A-Za-z_-]+)/export)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   send(res, 200, service.export_session(req.matches[1]));
               }));
}

}  // namespace cospar
