#pragma once

#include "cospar/session.hpp"

#include <string>

namespace httplib {
class Server;
}

namespace cospar {

/// JSON error body {code, message, details} and its HTTP status for an
/// exception thrown by the session layer.
struct HttpError {
    int status;
    Json body;
};

HttpError http_error_from_current_exception();

/// Routes:
///   POST /sessions                 GET  /sessions/{id}
///   POST /sessions/{id}/feedback   GET  /sessions/{id}/posterior
///   GET  /sessions/{id}/history    POST /sessions/{id}/close
///   GET  /sessions/{id}/export     POST /sessions/import
///   GET  /presets
/// Every response carries CORS headers for `cors_origin`.
void mount_session_api(httplib::Server& server, SessionService& service, std::string cors_origin = "*");

}  // namespace cospar
