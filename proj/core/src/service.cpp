#include "ser/service.hpp"

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "ser/audio_io.hpp"
#include "ser/dsp.hpp"
#include "ser/error.hpp"

namespace ser::service {
namespace {

using ojson = nlohmann::ordered_json;

// Slack on top of the audio cap for multipart boundaries and headers.
constexpr std::size_t kMultipartOverhead = 64 * 1024;

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::string next_error_id() {
  static std::atomic<std::uint64_t> counter{0};
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  char buf[40];
  std::snprintf(buf, sizeof buf, "%llx-%llu", static_cast<unsigned long long>(ms),
                static_cast<unsigned long long>(counter.fetch_add(1) + 1));
  return buf;
}

HttpResponse internal_error(const std::string& detail) {
  const std::string id = next_error_id();
  std::cerr << "ser serve: internal error " << id << ": " << detail << '\n';
  HttpResponse r = error_response(500, "internal_error", "internal error");
  auto j = ojson::parse(r.body);
  j["error"]["id"] = id;
  r.body = j.dump();
  return r;
}

std::string layer_summary(const nn::LayerSpec& s) {
  const auto kind = std::string(nn::to_string(s.kind));
  switch (s.kind) {
    case nn::LayerKind::kConv2d:
      return kind + " " + std::to_string(s.in_features) + "->" + std::to_string(s.out_features) + " " +
             std::to_string(s.kernel) + "x" + std::to_string(s.kernel) + " stride " + std::to_string(s.stride) +
             " pad " + std::to_string(s.padding);
    case nn::LayerKind::kBatchNorm2d: return kind + " " + std::to_string(s.in_features);
    case nn::LayerKind::kMaxPool2d: return kind + " 2x2";
    case nn::LayerKind::kDropout: {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.2f", s.rate);
      return kind + buf;
    }
    case nn::LayerKind::kDense:
      return kind + " " + std::to_string(s.in_features) + "->" + std::to_string(s.out_features);
    default: return kind;
  }
}

ojson class_json(const data::ClassLabel& l, double probability) {
  return {{"gender", std::string(data::to_string(l.gender()))},
          {"emotion", std::string(data::to_string(l.emotion()))},
          {"label", l.name()},
          {"probability", probability}};
}

}  // namespace

void ServiceConfig::validate() const {
  if (max_upload_bytes == 0) throw Error(ErrorCode::kInvalidArgument, "max upload size must be positive");
  if (port < 0 || port > 65535) throw Error(ErrorCode::kInvalidArgument, "port must be in 0..65535");
  if (static_asset_dir && !std::filesystem::is_directory(*static_asset_dir)) {
    throw Error(ErrorCode::kInvalidArgument, "UI directory '" + *static_asset_dir + "' does not exist");
  }
}

HttpResponse error_response(int status, const std::string& code, const std::string& message) {
  ojson j;
  j["error"] = {{"code", code}, {"message", message}};
  return {status, "application/json", j.dump()};
}

PipelineResult predict_endpoint_pipeline(const model::SerModel& model, std::span<const std::uint8_t> wav) {
  const audio::AudioClip decoded = audio::decode_wav(wav);
  const dsp::MelParams mp;
  const dsp::StftParams sp;
  const audio::AudioClip clip = audio::resample(decoded, mp.sample_rate);
  const dsp::MelSpectrogram raw = dsp::power_to_db(dsp::mel_spectrogram(clip, sp, mp), mp);
  const std::size_t frames = model.input_shape().at(2);

  PipelineResult result;
  result.duration_seconds = decoded.duration_seconds();
  result.cropped = raw.n_frames > frames;
  result.padded = raw.n_frames < frames;
  const double window = static_cast<double>((frames - 1) * sp.hop) / mp.sample_rate;
  result.window_seconds = std::min(clip.duration_seconds(), window);
  result.prediction = model::predict(model, dsp::fix_length(raw, frames));
  return result;
}

PredictionService::PredictionService(model::SerModel model, std::size_t max_upload_bytes)
    : model_(std::move(model)), max_upload_bytes_(max_upload_bytes), fingerprint_(hex32(model::model_fingerprint(model_))) {
  if (max_upload_bytes_ == 0) throw Error(ErrorCode::kInvalidArgument, "max upload size must be positive");
}

HttpResponse PredictionService::handle_predict(std::span<const std::uint8_t> wav) const {
  if (wav.size() > max_upload_bytes_) {
    return error_response(400, "payload_too_large",
                          "upload is " + std::to_string(wav.size()) + " bytes; the limit is " +
                              std::to_string(max_upload_bytes_));
  }
  try {
    const PipelineResult r = predict_endpoint_pipeline(model_, wav);
    ojson j;
    const auto& top = r.prediction.ranked.front();
    j["top1"] = class_json(top.label, top.probability);
    ojson ranked = ojson::array();
    for (const auto& c : r.prediction.ranked) ranked.push_back(class_json(c.label, c.probability));
    j["ranked"] = ranked;
    j["model_version"] = model_.version();
    j["window_seconds"] = r.window_seconds;
    j["duration_seconds"] = r.duration_seconds;
    j["cropped"] = r.cropped;
    j["padded"] = r.padded;
    return {200, "application/json", j.dump()};
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kMalformedContainer: return error_response(400, "malformed_wav", e.what());
      case ErrorCode::kUnsupportedEncoding: return error_response(415, "unsupported_encoding", e.what());
      case ErrorCode::kEmptyAudio: return error_response(400, "empty_audio", e.what());
      case ErrorCode::kInsufficientSamples:
      case ErrorCode::kDomainError: return error_response(400, "unprocessable_audio", e.what());
      default: return internal_error(std::string(error_code_name(e.code())) + ": " + e.what());
    }
  } catch (const std::exception& e) {
    return internal_error(e.what());
  }
}

HttpResponse PredictionService::handle_health() const {
  ojson j;
  j["status"] = "ok";
  j["model_version"] = model_.version();
  j["model_fingerprint"] = fingerprint_;
  return {200, "application/json", j.dump()};
}

HttpResponse PredictionService::handle_model_info() const {
  ojson j;
  j["model_version"] = model_.version();
  j["model_fingerprint"] = fingerprint_;
  j["input_shape"] = model_.input_shape();
  j["standardizes_input"] = model_.standardizes_input();
  ojson labels = ojson::array();
  for (const auto& l : model_.class_labels()) labels.push_back(l.name());
  j["class_labels"] = labels;
  j["parameter_count"] = model_.parameter_count();
  ojson layers = ojson::array();
  for (const auto& s : model_.architecture()) layers.push_back(layer_summary(s));
  j["layers"] = layers;
  j["sample_rate"] = audio::kCanonicalSampleRate;
  j["max_upload_bytes"] = max_upload_bytes_;
  return {200, "application/json", j.dump()};
}

struct HttpServer::Impl {
  Impl(const PredictionService& s, ServiceConfig c) : service(s), config(std::move(c)) {}

  const PredictionService& service;
  ServiceConfig config;
  httplib::Server server;
  std::thread thread;
  int port = -1;
  std::once_flag stopped;
};

namespace {

void apply(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

constexpr const char* kPlaceholderPage =
    "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>ser</title></head>\n"
    "<body><h1>ser</h1><p>The prediction API is up. POST a WAV file to <code>/api/predict</code>; "
    "see <code>/api/health</code> and <code>/api/model-info</code>.</p></body></html>\n";

}  // namespace

HttpServer::HttpServer(const PredictionService& service, ServiceConfig config)
    : impl_(std::make_unique<Impl>(service, std::move(config))) {
  impl_->config.validate();
  auto& svr = impl_->server;
  const PredictionService& svc = impl_->service;

  // httplib also sets SO_REUSEPORT, which would let a second server share the port.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  svr.set_payload_max_length(svc.max_upload_bytes() + kMultipartOverhead);
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});

  svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  svr.Get("/api/health", [&svc](const httplib::Request&, httplib::Response& res) { apply(res, svc.handle_health()); });
  svr.Get("/api/model-info",
          [&svc](const httplib::Request&, httplib::Response& res) { apply(res, svc.handle_model_info()); });

  svr.Post("/api/predict", [&svc](const httplib::Request& req, httplib::Response& res) {
    if (req.is_multipart_form_data()) {
      if (!req.has_file("audio")) {
        apply(res, error_response(400, "missing_audio_field", "multipart upload needs a file field named 'audio'"));
        return;
      }
      const auto file = req.get_file_value("audio");
      const auto* p = reinterpret_cast<const std::uint8_t*>(file.content.data());
      apply(res, svc.handle_predict({p, file.content.size()}));
      return;
    }
    const auto* p = reinterpret_cast<const std::uint8_t*>(req.body.data());
    apply(res, svc.handle_predict({p, req.body.size()}));
  });

  if (impl_->config.static_asset_dir) {
    svr.set_mount_point("/", *impl_->config.static_asset_dir);
  } else {
    svr.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kPlaceholderPage, "text/html"); });
  }

  svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    HttpResponse r;
    switch (res.status) {
      case 404: r = error_response(404, "not_found", "no such endpoint"); break;
      case 405: r = error_response(405, "method_not_allowed", "method not allowed"); break;
      case 413: r = error_response(400, "payload_too_large", "upload exceeds the size limit"); break;
      default:
        if (res.status >= 500) {
          r = error_response(res.status, "internal_error", "internal error");
        } else {
          r = error_response(res.status, "bad_request", "request could not be processed");
        }
    }
    apply(res, r);
  });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "unknown exception";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    apply(res, internal_error(what));
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  auto& impl = *impl_;
  if (impl.port >= 0) return impl.port;
  impl.port = impl.config.port == 0 ? impl.server.bind_to_any_port(impl.config.host)
                                    : (impl.server.bind_to_port(impl.config.host, impl.config.port) ? impl.config.port : -1);
  if (impl.port < 0) {
    throw Error(ErrorCode::kIoError, "cannot bind " + impl.config.host + ":" + std::to_string(impl.config.port));
  }
  impl.thread = std::thread([&impl] { impl.server.listen_after_bind(); });
  impl.server.wait_until_ready();
  return impl.port;
}

int HttpServer::bound_port() const noexcept { return impl_->port; }

void HttpServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  std::call_once(impl_->stopped, [this] {
    impl_->server.stop();
    impl_->thread.join();
  });
}

namespace {
volatile std::sig_atomic_t g_stop_requested = 0;
extern "C" void on_stop_signal(int) { g_stop_requested = 1; }

// Installed before the port is announced so an early signal is not lost.
struct StopSignalGuard {
  StopSignalGuard() {
    g_stop_requested = 0;
    prev_int = std::signal(SIGINT, on_stop_signal);
    prev_term = std::signal(SIGTERM, on_stop_signal);
  }
  ~StopSignalGuard() {
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
  }
  void (*prev_int)(int) = nullptr;
  void (*prev_term)(int) = nullptr;
};
}  // namespace

int serve(const ServiceConfig& config, std::ostream& log) {
  config.validate();
  model::SerModel model = model::load_model(config.model_path);
  PredictionService service(std::move(model), config.max_upload_bytes);
  HttpServer server(service, config);
  const StopSignalGuard signals;
  const int port = server.start();
  log << "ser serve: model " << config.model_path << " (fingerprint "
      << hex32(model::model_fingerprint(service.model())) << ")\n"
      << "ser serve: listening on http://" << config.host << ":" << port << "/\n";
  log.flush();

  while (!g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));

  log << "ser serve: shutting down\n";
  server.stop();
  return 0;
}

}  // namespace ser::service
