#include "scopelens/annotation_http.hpp"

#include <charconv>

#include <httplib.h>

#include "scopelens/error.hpp"

namespace scopelens {

namespace {

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, std::string_view what, const std::string& reason) {
  reply(res, status, {{"status", what}, {"reason", reason}});
}

int http_status(SubmitStatus s) {
  switch (s) {
    case SubmitStatus::Accepted: return 200;
    case SubmitStatus::QualityControl: return 422;
    case SubmitStatus::Invalid: return 422;
    case SubmitStatus::Conflict: return 409;
    case SubmitStatus::UnknownTask: return 404;
  }
  return 500;
}

}  // namespace

void mount_annotation_routes(httplib::Server& server, AnnotationService& service) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      fail(res, 500, "error", e.what());
    } catch (...) {
      fail(res, 500, "error", "unknown error");
    }
  });

  server.Get("/units", [&service](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, service.units());
  });

  server.Get("/task", [&service](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("unit")) return fail(res, 400, "bad_request", "missing 'unit' query parameter");
    Unit unit;
    try {
      unit = parse_unit(req.get_param_value("unit"));
    } catch (const ValidationError& e) {
      return fail(res, 400, "bad_request", e.what());
    }
    std::uint64_t seed = 0;
    if (req.has_param("seed")) {
      const std::string s = req.get_param_value("seed");
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        return fail(res, 400, "bad_request", "seed must be a nonnegative integer");
      }
    }
    try {
      reply(res, 200, service.task_payload(service.task(unit, seed)));
    } catch (const ValidationError& e) {
      fail(res, 404, "unknown_unit", e.what());
    }
  });

  server.Get(R"(/img/(.+))", [&service](const httplib::Request& req, httplib::Response& res) {
    auto png = service.image_png(req.matches[1].str());
    if (png.empty()) return fail(res, 404, "not_found", "no such image");
    res.status = 200;
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  });

  server.Post("/submit", [&service](const httplib::Request& req, httplib::Response& res) {
    Submission s;
    try {
      s = submission_from_json(nlohmann::json::parse(req.body));
    } catch (const nlohmann::json::exception& e) {
      return fail(res, 400, "bad_request", e.what());
    } catch (const ValidationError& e) {
      return fail(res, 400, "bad_request", e.what());
    }
    const SubmitResult r = service.submit(s);
    if (r.status != SubmitStatus::Accepted) return fail(res, http_status(r.status), to_string(r.status), r.reason);
    reply(res, 200, {{"status", "accepted"}, {"record", to_json(*r.record)}});
  });

  server.Get(R"(/stats/layer/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    double min_precision = 0.75;
    if (req.has_param("min_precision")) {
      try {
        min_precision = std::stod(req.get_param_value("min_precision"));
      } catch (const std::exception&) {
        return fail(res, 400, "bad_request", "min_precision must be a number");
      }
    }
    reply(res, 200, to_json(service.stats(req.matches[1].str(), min_precision)));
  });
}

void serve_annotation(AnnotationService& service, const std::string& host, int port) {
  httplib::Server server;
  mount_annotation_routes(server, service);
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace scopelens
