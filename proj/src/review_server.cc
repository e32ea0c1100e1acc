#include "soelabel/review_server.h"

#include "httplib.h"
#include "json.hpp"
#include "soelabel/error.h"

namespace soelabel {

using nlohmann::json;
using nlohmann::ordered_json;

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownItem:
    case ErrorCode::kUnknownTable:
      return 404;
    case ErrorCode::kNotClaimHolder:
    case ErrorCode::kNotEscalated:
    case ErrorCode::kInvalidState:
      return 409;
    case ErrorCode::kNotExpert:
    case ErrorCode::kNotRegistered:
      return 403;
    case ErrorCode::kMalformedLine:
    case ErrorCode::kConfigError:
      return 400;
    default:
      return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                const std::string& message) {
  ordered_json j;
  j["code"] = code;
  j["message"] = message;
  send_json(res, status, j.dump());
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::kMalformedLine, "body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedLine, std::string("bad JSON body: ") + e.what());
  }
}

std::string field(const json& body, const char* name) {
  auto it = body.find(name);
  if (it == body.end() || !it->is_string()) {
    throw Error(ErrorCode::kMalformedLine, std::string("missing string field '") + name + "'");
  }
  return it->get<std::string>();
}

std::string items_json(const std::vector<ReviewItem>& items) {
  std::string out = "{\"items\":[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += review_item_to_json(items[i]);
  }
  out += "]}";
  return out;
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, http_status_for(e.code()), error_code_name(e.code()), e.detail());
    } catch (const std::exception& e) {
      send_error(res, 500, "INTERNAL", e.what());
    }
  };
}

}  // namespace

struct ReviewServer::Impl {
  ReviewQueue& queue;
  httplib::Server server;
  explicit Impl(ReviewQueue& q) : queue(q) {}
};

ReviewServer::ReviewServer(ReviewQueue& queue, ReviewServerOptions options)
    : impl_(std::make_unique<Impl>(queue)) {
  auto& srv = impl_->server;
  auto& q = impl_->queue;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, R"({"status":"ok"})");
  });

  srv.Get("/queue", guarded([&q](const httplib::Request& req, httplib::Response& res) {
    q.expire_claims();
    std::optional<ReviewStatus> status;
    if (req.has_param("status") && !req.get_param_value("status").empty()) {
      status = review_status_from_string(req.get_param_value("status"));
    }
    send_json(res, 200, items_json(q.list(status)));
  }));

  srv.Post("/claim", guarded([&q](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    auto item = q.claim(field(body, "annotator_id"));
    send_json(res, 200,
              std::string("{\"item\":") + (item ? review_item_to_json(*item) : "null") + "}");
  }));

  srv.Post(R"(/items/([^/]+)/claim)",
           guarded([&q](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             send_json(res, 200,
                       review_item_to_json(q.claim_item(field(body, "annotator_id"),
                                                        req.matches[1].str())));
           }));

  srv.Post(R"(/items/([^/]+)/label)",
           guarded([&q](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             const auto d = decision_from_string(field(body, "decision"));
             send_json(res, 200,
                       review_item_to_json(
                           q.submit_label(field(body, "annotator_id"), req.matches[1].str(), d)));
           }));

  srv.Post(R"(/items/([^/]+)/resolve)",
           guarded([&q](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             const auto d = decision_from_string(field(body, "decision"));
             send_json(res, 200,
                       review_item_to_json(
                           q.expert_resolve(field(body, "expert_id"), req.matches[1].str(), d)));
           }));

  srv.Post(R"(/items/([^/]+)/override)",
           guarded([&q](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             const auto d = decision_from_string(field(body, "decision"));
             send_json(res, 200,
                       review_item_to_json(
                           q.admin_override(field(body, "expert_id"), req.matches[1].str(), d)));
           }));

  srv.Get(R"(/items/([^/]+))", guarded([&q](const httplib::Request& req, httplib::Response& res) {
            q.expire_claims();
            auto item = q.get(req.matches[1].str());
            if (!item) throw Error(ErrorCode::kUnknownItem, req.matches[1].str());
            send_json(res, 200, review_item_to_json(*item));
          }));

  srv.Get("/stats", guarded([&q](const httplib::Request&, httplib::Response& res) {
    q.expire_claims();
    send_json(res, 200, q.stats().to_json());
  }));

  srv.Get("/export/human-labels",
          guarded([&q](const httplib::Request&, httplib::Response& res) {
            ordered_json j = ordered_json::object();
            for (const auto& [id, label] : q.export_human_labels()) j[id] = label;
            send_json(res, 200, j.dump());
          }));

  if (!options.static_dir.empty()) {
    if (!srv.set_mount_point("/", options.static_dir.string())) {
      throw Error(ErrorCode::kConfigError,
                  "static directory not found: " + options.static_dir.string());
    }
  }
}

ReviewServer::~ReviewServer() { stop(); }

bool ReviewServer::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int ReviewServer::bind_to_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool ReviewServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void ReviewServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void ReviewServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace soelabel
