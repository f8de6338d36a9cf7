#include <httplib.h>

#include "facematch/service.hpp"

namespace facematch::service {

namespace {

nlohmann::json error_json(const std::string& code, const std::string& message,
                          nlohmann::json details = nlohmann::json::array()) {
  return {{"error", {{"code", code}, {"message", message}, {"details", std::move(details)}}}};
}

}  // namespace

ErrorReply error_reply(const std::exception& e, ImageSource source) {
  if (const auto* pe = dynamic_cast<const params::ParameterError*>(&e)) {
    nlohmann::json details = nlohmann::json::array();
    for (const auto& issue : pe->issues()) {
      details.push_back({{"code", params::issue_code(issue.kind)},
                         {"field", issue.field},
                         {"value", issue.value},
                         {"allowed", issue.allowed},
                         {"message", issue.describe()}});
    }
    return {400, error_json(pe->code(), pe->what(), std::move(details))};
  }
  if (const auto* re = dynamic_cast<const RequestError*>(&e)) {
    return {re->http_status(), error_json(re->code(), re->what())};
  }
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    const std::string& code = err->code();
    int status = 500;
    if (code == "BackendUnavailable" || code == "BackendRejected" || code == "InvalidImagePayload") {
      status = 502;
    } else if (code == "NoFaceDetected") {
      status = 422;
    } else if (code == "EmptyStore") {
      status = 409;
    } else if (code == "ImageDecodeError") {
      status = source == ImageSource::kUpload ? 415 : 502;
    } else if (code == "DimensionMismatch" || code == "InvalidArgument") {
      status = 400;
    }
    return {status, error_json(code, err->what())};
  }
  return {500, error_json("InternalError", "internal server error")};
}

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn, ImageSource source = ImageSource::kGenerated) {
  return [fn = std::move(fn), source](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const std::exception& e) {
      const auto reply = error_reply(e, source);
      send_json(res, reply.status, reply.body);
    }
  };
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) throw RequestError(400, "MalformedRequest", "request body is missing");
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception&) {
    throw RequestError(400, "MalformedRequest", "request body is not valid JSON");
  }
}

std::size_t parse_k_text(const std::string& text) {
  try {
    std::size_t used = 0;
    const long long k = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return validate_k(k);
  } catch (const RequestError&) {
    throw;
  } catch (const std::exception&) {
    throw RequestError(400, "InvalidK", "k must be an integer, got '" + text + "'");
  }
}

}  // namespace

HttpServer::HttpServer(MatchService& service, HttpOptions options) : impl_(std::make_unique<Impl>()) {
  auto& svr = impl_->server;
  svr.set_payload_max_length(32u * 1024 * 1024);

  svr.Get("/healthz", guarded([&service](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}, {"profile_count", service.profile_count()}});
          }));

  svr.Get("/api/v1/vocabulary", guarded([](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, vocabulary_document());
          }));

  svr.Post("/api/v1/prompt", guarded([&service](const httplib::Request& req, httplib::Response& res) {
             const auto p = parse_parameters(parse_body(req));
             send_json(res, 200, {{"prompt", service.prompt(p).text()}});
           }));

  svr.Post("/api/v1/match", guarded([&service](const httplib::Request& req, httplib::Response& res) {
             const MatchRequest request = parse_match_request(parse_body(req));
             send_json(res, 200, service.match(request).to_json());
           }));

  svr.Post("/api/v1/match-by-image",
           guarded(
               [&service](const httplib::Request& req, httplib::Response& res) {
                 std::size_t k = kDefaultK;
                 if (req.has_param("k")) k = parse_k_text(req.get_param_value("k"));
                 std::string image;
                 if (req.is_multipart_form_data()) {
                   if (req.has_file("k")) k = parse_k_text(req.get_file_value("k").content);
                   if (!req.has_file("image")) {
                     throw RequestError(400, "MalformedRequest", "multipart upload needs an 'image' part");
                   }
                   image = req.get_file_value("image").content;
                 } else {
                   image = req.body;
                 }
                 if (image.empty()) throw RequestError(400, "MalformedRequest", "no image uploaded");
                 const std::vector<std::uint8_t> bytes(image.begin(), image.end());
                 send_json(res, 200, service.match_by_image(bytes, k).to_json());
               },
               ImageSource::kUpload));

  svr.Get(R"(/api/v1/images/([0-9a-f]+))",
          guarded([&service](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            auto img = service.image(id);
            if (!img) throw RequestError(404, "NotFound", "no generated image with id " + id);
            res.status = 200;
            res.set_content(std::string(img->bytes.begin(), img->bytes.end()),
                            std::string(mime_type(img->format)));
          }));

  svr.Get(R"(/api/v1/profiles/(.+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            auto md = service.profile(id);
            if (!md) throw RequestError(404, "NotFound", "no profile with id " + id);
            nlohmann::json body = {{"id", id}};
            for (const char* key : {"name", "image_url"}) {
              auto it = md->find(key);
              body[key] = it == md->end() ? "" : it->second;
            }
            send_json(res, 200, body);
          }));

  if (options.web_root) svr.set_mount_point("/", options.web_root->string());

  svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send_json(res, 404, error_json("NotFound", "no such endpoint"));
    } else if (res.status >= 400) {
      send_json(res, res.status, error_json("HttpError", "request failed"));
    }
  });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    send_json(res, 500, error_json("InternalError", "internal server error"));
  });
}

HttpServer::~HttpServer() = default;

bool HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    return port_ > 0;
  }
  if (!impl_->server.bind_to_port(host, port)) return false;
  port_ = port;
  return true;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace facematch::service
