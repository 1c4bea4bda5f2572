#pragma once

#include <string>

#include "scopelens/annotation.hpp"

namespace httplib {
class Server;
}

namespace scopelens {

/// Registers the annotation endpoints on a server:
///   GET  /units                     -> 200 [{unit, layer, channel, annotated}]
///   GET  /task?unit=L:C&seed=S      -> 200 task payload | 400 bad query | 404 unknown unit
///   GET  /img/<task id>:<index>     -> 200 image/png | 404
///   POST /submit                    -> 200 accepted | 400 malformed | 404 unknown task |
///                                      409 duplicate | 422 validation or quality control
///   GET  /stats/layer/<L>[?min_precision=p] -> 200 distribution
/// Every error body is {"status", "reason"}.
void mount_annotation_routes(httplib::Server& server, AnnotationService& service);

/// Blocks serving on host:port until the server is stopped.
void serve_annotation(AnnotationService& service, const std::string& host, int port);

}  // namespace scopelens
