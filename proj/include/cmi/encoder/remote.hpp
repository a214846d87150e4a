#pragma once

#include <optional>

#include "cmi/encoder/blackbox.hpp"

namespace cmi::encoder {

// Wire protocol, shared by the client and the bundled mock server:
//   POST <path>   body: {"images": ["<base64 png>", ...]}
//   200 response: {"features": [[f, ...], ...], "dim": d}
// Images travel as 8-bit PNG; an optional bearer token rides in the
// Authorization header.
struct RemoteConfig {
  std::string host;               // e.g. "127.0.0.1"
  int port = 80;
  std::string path = "/embed";
  std::optional<std::string> auth_token;
  int dim = 0;                    // declared output dimension
  int input_resolution = 224;
  std::size_t max_batch = 64;     // client-side chunking
  int retries = 3;
  int backoff_ms = 50;            // doubled per retry
  int timeout_s = 10;
};

std::unique_ptr<BlackBoxEncoder> connect_remote(const RemoteConfig& config);

}  // namespace cmi::encoder
