#include "cmi/encoder/remote.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cmi/core/codecs.hpp"
#include "cmi/core/digest.hpp"
#include "cmi/core/errors.hpp"

namespace cmi::encoder {

using nlohmann::json;

namespace {

class RemoteEncoder : public BlackBoxEncoder {
 public:
  explicit RemoteEncoder(RemoteConfig config)
      : config_(std::move(config)),
        digest_(digest_hex("remote:" + config_.host + ":" +
                           std::to_string(config_.port) + config_.path)) {}

  int dim() const override { return config_.dim; }
  int input_resolution() const override { return config_.input_resolution; }
  std::string digest() const override { return digest_; }

  std::vector<std::vector<float>> embed_batch(
      const std::vector<Image>& images) override {
    std::vector<std::vector<float>> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += config_.max_batch) {
      const std::size_t end = std::min(images.size(), start + config_.max_batch);
      post_chunk(images, start, end, out);
    }
    return out;
  }

 private:
  void post_chunk(const std::vector<Image>& images, std::size_t start,
                  std::size_t end, std::vector<std::vector<float>>& out) {
    json body;
    body["images"] = json::array();
    for (std::size_t i = start; i < end; ++i) {
      const auto png = encode_png(images[i]);
      body["images"].push_back(base64_encode(png.data(), png.size()));
    }
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(
            std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
      httplib::Client client(config_.host, config_.port);
      client.set_connection_timeout(config_.timeout_s, 0);
      client.set_read_timeout(config_.timeout_s, 0);
      httplib::Headers headers;
      if (config_.auth_token)
        headers.emplace("Authorization", "Bearer " + *config_.auth_token);

      auto res = client.Post(config_.path, headers, payload, "application/json");
      if (!res) {
        last_error = "connection failed";
        continue;
      }
      if (res->status >= 500) {
        last_error = "server returned status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        raise(ErrorKind::ProtocolViolation,
              "server returned status " + std::to_string(res->status));
      parse_response(res->body, end - start, out);
      return;
    }
    raise(ErrorKind::Transport, "remote encoder unreachable after " +
                                    std::to_string(config_.retries + 1) +
                                    " attempts: " + last_error);
  }

  void parse_response(const std::string& body, std::size_t expected,
                      std::vector<std::vector<float>>& out) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception&) {
      raise(ErrorKind::ProtocolViolation, "response is not valid json");
    }
    if (!j.contains("features") || !j["features"].is_array())
      raise(ErrorKind::ProtocolViolation, "response lacks a features array");
    const auto& feats = j["features"];
    if (feats.size() != expected)
      raise(ErrorKind::ProtocolViolation,
            "expected " + std::to_string(expected) + " feature vectors, got " +
                std::to_string(feats.size()));
    for (const auto& row : feats) {
      std::vector<float> v = row.get<std::vector<float>>();
      if (config_.dim > 0 && static_cast<int>(v.size()) != config_.dim)
        raise(ErrorKind::ProtocolViolation,
              "feature vector has dimension " + std::to_string(v.size()) +
                  ", declared " + std::to_string(config_.dim));
      out.push_back(std::move(v));
    }
  }

  RemoteConfig config_;
  std::string digest_;
};

}  // namespace

std::unique_ptr<BlackBoxEncoder> connect_remote(const RemoteConfig& config) {
  if (config.host.empty()) raise(ErrorKind::Validation, "remote host is empty");
  return std::make_unique<RemoteEncoder>(config);
}

}  // namespace cmi::encoder
