#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <thread>

#include "cmi/encoder/blackbox.hpp"

namespace cmi::encoder {

// Serves any BlackBoxEncoder over the wire protocol. Used by tests and by
// `audit-remote` demos; fault injection knobs let tests exercise the client's
// retry and protocol-violation paths.
class MockEncoderServer {
 public:
  // Binds to an ephemeral port on 127.0.0.1 and serves until destruction.
  explicit MockEncoderServer(BlackBoxEncoder& encoder,
                             std::optional<std::string> auth_token = std::nullopt);
  ~MockEncoderServer();

  MockEncoderServer(const MockEncoderServer&) = delete;
  MockEncoderServer& operator=(const MockEncoderServer&) = delete;

  int port() const { return port_; }

  // The next n requests answer 500.
  void fail_next(int n) { fail_remaining_ = n; }
  // Every subsequent response drops the last feature vector.
  void set_drop_one(bool on) { drop_one_ = on; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> fail_remaining_{0};
  std::atomic<bool> drop_one_{false};
};

}  // namespace cmi::encoder
