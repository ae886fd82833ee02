#pragma once

#include <cmath>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "simrec/serve.hpp"

namespace simrec {

namespace detail {

inline double round6(double x) { return std::round(x * 1e6) / 1e6; }

inline void reply_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace detail

/// POST /v1/events   {"user":"u1","item":"i9","kind":"click"} -> {"ok":true}
/// GET  /v1/similar?user=u1&item=i9&k=30 -> {"ranker":...,"items":[{"id","score"}]}
/// GET  /v1/health -> {"status":"ok","items":N,"dim":d}
inline void attach_routes(httplib::Server& server, ServingEngine& engine) {
  server.Post("/v1/events", [&engine](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body, nullptr, /*allow_exceptions=*/false);
    if (body.is_discarded() || !body.is_object() || !body.contains("user") ||
        !body.contains("item") || !body["user"].is_string() || !body["item"].is_string()) {
      detail::reply_json(res, 400, {{"error", "expected {user, item, kind}"}});
      return;
    }
    std::string kind_tok = body.value("kind", "click");
    EventKind kind;
    if (kind_tok == "click") kind = EventKind::Click;
    else if (kind_tok == "add_cart") kind = EventKind::AddCart;
    else {
      detail::reply_json(res, 400, {{"error", "kind must be click or add_cart"}});
      return;
    }
    engine.record_event(body["user"].get<std::string>(), body["item"].get<std::string>(), kind);
    detail::reply_json(res, 200, {{"ok", true}});
  });

  server.Get("/v1/similar", [&engine](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("user") || !req.has_param("item")) {
      detail::reply_json(res, 400, {{"error", "user and item parameters required"}});
      return;
    }
    int k = engine.config().k;
    if (req.has_param("k")) {
      std::int64_t parsed = 0;
      if (!parse_i64(req.get_param_value("k"), parsed) || parsed < 1 ||
          parsed > engine.config().k * 100) {
        detail::reply_json(res, 400, {{"error", "k must be a positive integer"}});
        return;
      }
      k = static_cast<int>(parsed);
    }
    SimilarResult result =
        engine.similar_items(req.get_param_value("user"), req.get_param_value("item"), k);
    nlohmann::json items = nlohmann::json::array();
    for (const auto& e : result.items)
      items.push_back({{"id", engine.item_name(e.item)}, {"score", detail::round6(e.score)}});
    nlohmann::json body = {{"ranker", result.ranker}, {"items", items}};
    if (!result.reason.empty()) body["reason"] = result.reason;
    detail::reply_json(res, 200, body);
  });

  server.Get("/v1/health", [&engine](const httplib::Request&, httplib::Response& res) {
    detail::reply_json(res, 200,
                       {{"status", "ok"}, {"items", engine.item_count()}, {"dim", engine.dim()}});
  });
}

}  // namespace simrec
