#include "cmi/encoder/mock_server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cmi/core/codecs.hpp"
#include "cmi/core/errors.hpp"

namespace cmi::encoder {

using nlohmann::json;

struct MockEncoderServer::Impl {
  httplib::Server server;
};

MockEncoderServer::MockEncoderServer(BlackBoxEncoder& encoder,
                                     std::optional<std::string> auth_token)
    : impl_(std::make_unique<Impl>()) {
  impl_->server.Post("/embed", [this, &encoder, auth_token](
                                   const httplib::Request& req,
                                   httplib::Response& res) {
    if (fail_remaining_.load() > 0) {
      --fail_remaining_;
      res.status = 500;
      res.set_content("injected failure", "text/plain");
      return;
    }
    if (auth_token) {
      const auto it = req.headers.find("Authorization");
      if (it == req.headers.end() || it->second != "Bearer " + *auth_token) {
        res.status = 401;
        res.set_content("unauthorized", "text/plain");
        return;
      }
    }
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content("bad json", "text/plain");
      return;
    }
    std::vector<Image> images;
    try {
      for (const auto& b64 : body.at("images")) {
        const auto png = base64_decode(b64.get<std::string>());
        images.push_back(decode_png(png.data(), png.size()));
      }
    } catch (const std::exception&) {
      res.status = 400;
      res.set_content("bad image payload", "text/plain");
      return;
    }
    auto features = encoder.embed_batch(images);
    if (drop_one_.load() && !features.empty()) features.pop_back();

    json reply;
    reply["dim"] = encoder.dim();
    reply["features"] = json::array();
    for (const auto& f : features) reply["features"].push_back(f);
    res.set_content(reply.dump(), "application/json");
  });

  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) raise(ErrorKind::Io, "mock server failed to bind");
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockEncoderServer::~MockEncoderServer() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace cmi::encoder
