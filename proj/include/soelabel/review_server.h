#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "soelabel/error.h"
#include "soelabel/review.h"

namespace soelabel {

struct ReviewServerOptions {
  // Served at / when set (review UI bundle).
  std::filesystem::path static_dir;
};

// HTTP/JSON front end for a ReviewQueue. Errors are {"code", "message"}.
class ReviewServer {
 public:
  ReviewServer(ReviewQueue& queue, ReviewServerOptions options = {});
  ~ReviewServer();

  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Blocks until stop().
  bool listen(const std::string& host, int port);
  // Returns the bound port, or -1.
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// HTTP status for a service error code.
int http_status_for(ErrorCode code);

}  // namespace soelabel
