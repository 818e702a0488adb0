#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "ser/model.hpp"

namespace ser::service {

inline constexpr std::size_t kDefaultMaxUploadBytes = 10u * 1024u * 1024u;

struct ServiceConfig {
  std::string host = "0.0.0.0";
  int port = 8080;  // 0 picks a free port
  std::string model_path;
  std::size_t max_upload_bytes = kDefaultMaxUploadBytes;
  std::optional<std::string> static_asset_dir;

  /// Throws kInvalidArgument for a zero upload cap, a port outside 0..65535,
  /// or a static directory that does not exist.
  void validate() const;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// The features and model output behind one /api/predict response.
struct PipelineResult {
  model::PredictionResult prediction;
  double duration_seconds = 0.0;  // decoded clip length at its own rate
  double window_seconds = 0.0;    // audio the network actually saw
  bool cropped = false;
  bool padded = false;
};

/// decode -> mono -> resample -> mel -> dB -> fix_length -> predict.
/// Throws the underlying ser::Error on bad audio.
PipelineResult predict_endpoint_pipeline(const model::SerModel& model, std::span<const std::uint8_t> wav);

/// Request handling without any transport. Every method is const and safe to
/// call from many threads.
class PredictionService {
 public:
  explicit PredictionService(model::SerModel model, std::size_t max_upload_bytes = kDefaultMaxUploadBytes);

  const model::SerModel& model() const noexcept { return model_; }
  std::size_t max_upload_bytes() const noexcept { return max_upload_bytes_; }

  /// 200 with the ranked distribution, or a JSON error:
  /// 400 malformed_wav | empty_audio | payload_too_large | unprocessable_audio,
  /// 415 unsupported_encoding, 500 internal_error with an opaque id.
  HttpResponse handle_predict(std::span<const std::uint8_t> wav) const;
  HttpResponse handle_health() const;
  HttpResponse handle_model_info() const;

 private:
  model::SerModel model_;
  std::size_t max_upload_bytes_;
  std::string fingerprint_;
};

/// JSON error body {"error": {"code": ..., "message": ...}}.
HttpResponse error_response(int status, const std::string& code, const std::string& message);

/// httplib front end over a PredictionService.
class HttpServer {
 public:
  HttpServer(const PredictionService& service, ServiceConfig config);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts listening on a background thread; returns the bound port.
  /// Throws kIoError when the address cannot be bound.
  int start();
  int bound_port() const noexcept;
  /// Stops listening and joins the background thread. Idempotent.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Loads the model (failing fast), serves until SIGINT or SIGTERM, and
/// returns 0. Status lines go to log.
int serve(const ServiceConfig& config, std::ostream& log);

}  // namespace ser::service
