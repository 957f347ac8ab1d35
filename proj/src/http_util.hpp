#pragma once

#include <httplib.h>

#include <memory>
#include <string>

#include "sense/error.hpp"
#include "sense/json_util.hpp"
#include "sense/protocol.hpp"

namespace sense {

int http_status_for(ErrorCode code);
[[noreturn]] void throw_envelope(const std::string& body, int status);

namespace http_util {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status_for(e.code()), protocol::encode(protocol::envelope_from(e)));
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const std::exception& e) {
    send_error(res, Error(ErrorCode::kBadState, e.what()));
  }
}

inline std::unique_ptr<httplib::Client> make_client(const std::string& base_url, const std::string& token) {
  auto cli = std::make_unique<httplib::Client>(base_url);
  cli->set_connection_timeout(5);
  cli->set_read_timeout(120);
  cli->set_write_timeout(30);
  if (!token.empty()) cli->set_bearer_token_auth(token);
  return cli;
}

inline json expect_json(const httplib::Result& r, const std::string& what) {
  if (!r) {
    throw Error(ErrorCode::kTransport, what + ": " + httplib::to_string(r.error()),
                {{"operation", what}});
  }
  if (r->status >= 400) throw_envelope(r->body, r->status);
  return parse_json(r->body, what);
}

}  // namespace http_util
}  // namespace sense
