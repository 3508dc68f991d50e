#pragma once

// HTTP+JSON front end over a Workspace. All endpoints live under /v1.
//
//   POST /v1/classify        raw RFC 5322 message as the body
//   POST /v1/feedback        {"email_ref", "kind": "customer_fp"|"customer_fn", "d"?}
//   GET  /v1/metrics         per-day MetricPoint series
//   GET  /v1/review/queue    sampled convictions awaiting a label
//   GET  /v1/review/labeled  sampled convictions already labeled
//   POST /v1/review/sample   {"day"?, "n", "seed"}
//   POST /v1/review/label    {"record_id", "label": "TP"|"FP", "labeled_by"?}
//   POST /v1/model/update    {"sigma"?, "sigma_overrides"? {name: sigma}}
//   GET  /v1/model/weights   current model
//   GET  /v1/impact          relative impact and mean Shapley per detector
//
// Errors are {"error": message} with 400 (bad request), 401 (token),
// 404 (unknown record), 409 (no labeled data) or 500.

#include <functional>
#include <string>

#include "bec/service/workspace.hpp"
#include "httplib.h"

namespace bec::service {

class Service {
 public:
  Service(Workspace& workspace, std::string api_token = {}) : ws_(workspace), token_(std::move(api_token)) {}

  void mount(httplib::Server& server) {
    server.set_payload_max_length(32u << 20);
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { cors(res); });
    post(server, "/v1/classify", [this](const httplib::Request& req) { return classify(req); });
    post(server, "/v1/feedback", [this](const httplib::Request& req) { return feedback(req); });
    get(server, "/v1/metrics", [this](const httplib::Request&) { return metrics(); });
    get(server, "/v1/review/queue", [this](const httplib::Request&) { return records(ws_.review_queue()); });
    get(server, "/v1/review/labeled", [this](const httplib::Request&) { return records(ws_.reviewed()); });
    post(server, "/v1/review/sample", [this](const httplib::Request& req) { return sample(req); });
    post(server, "/v1/review/label", [this](const httplib::Request& req) { return label(req); });
    post(server, "/v1/model/update", [this](const httplib::Request& req) { return update(req); });
    get(server, "/v1/model/weights",
        [this](const httplib::Request&) { return pipeline::model_json(*ws_.pipeline().model()); });
    get(server, "/v1/impact", [this](const httplib::Request&) { return pipeline::impact_json(ws_.impact()); });
    get(server, "/v1/health", [](const httplib::Request&) { return json{{"status", "ok"}}; });
  }

 private:
  using Handler = std::function<json(const httplib::Request&)>;

  struct HttpError : std::runtime_error {
    HttpError(int s, const std::string& m) : std::runtime_error(m), status(s) {}
    int status;
  };

  static void cors(httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, X-Api-Token");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
  }

  void wrap(const httplib::Request& req, httplib::Response& res, const Handler& h) const {
    cors(res);
    auto fail = [&](int status, const std::string& msg) {
      res.status = status;
      res.set_content(json{{"error", msg}}.dump(), "application/json");
    };
    if (!token_.empty() && req.get_header_value("X-Api-Token") != token_) return fail(401, "missing or wrong X-Api-Token");
    try {
      res.set_content(h(req).dump(), "application/json");
      res.status = 200;
    } catch (const HttpError& e) {
      fail(e.status, e.what());
    } catch (const NotFound& e) {
      fail(404, e.what());
    } catch (const Conflict& e) {
      fail(409, e.what());
    } catch (const json::exception& e) {
      fail(400, std::string("bad JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
      fail(400, e.what());
    } catch (const std::exception& e) {
      fail(500, e.what());
    }
  }

  void post(httplib::Server& s, const std::string& path, Handler h) {
    s.Post(path, [this, h](const httplib::Request& req, httplib::Response& res) { wrap(req, res, h); });
  }
  void get(httplib::Server& s, const std::string& path, Handler h) {
    s.Get(path, [this, h](const httplib::Request& req, httplib::Response& res) { wrap(req, res, h); });
  }

  static json body_json(const httplib::Request& req) {
    if (req.body.empty()) throw HttpError(400, "empty request body");
    auto j = json::parse(req.body);
    if (!j.is_object()) throw HttpError(400, "request body must be a JSON object");
    return j;
  }

  json classify(const httplib::Request& req) {
    if (req.body.empty()) throw HttpError(400, "empty request body; send the raw message");
    auto [result, stored] = ws_.classify(RawEmail{req.body, {}});
    json j = pipeline::classify_response(result, ws_.pipeline().manifest());
    j["record_id"] = stored.record_id;
    j["email_ref"] = stored.email_ref;
    return j;
  }

  json feedback(const httplib::Request& req) {
    json b = body_json(req);
    auto kind = efficacy::parse_feedback_kind(b.at("kind").get<std::string>());
    if (!kind) throw HttpError(400, "kind must be customer_fp or customer_fn");
    std::optional<std::vector<double>> d;
    if (b.contains("d")) d = b.at("d").get<std::vector<double>>();
    auto lv = ws_.feedback(*kind, b.at("email_ref").get<std::string>(), d);
    return {{"email_ref", b.at("email_ref")}, {"y", lv.y}, {"source", std::string(classifier::to_string(lv.source))}};
  }

  json metrics() {
    json series = json::array();
    for (const auto& p : ws_.metrics()) series.push_back(pipeline::metric_json(p));
    return {{"series", series}};
  }

  static json records(const std::vector<efficacy::ReviewRecord>& recs) {
    json items = json::array();
    for (const auto& r : recs) items.push_back(Workspace::review_json(r));
    return {{"records", items}};
  }

  json sample(const httplib::Request& req) {
    json b = req.body.empty() ? json::object() : body_json(req);
    std::optional<mailgraph::Day> day;
    if (b.contains("day") && !b["day"].is_null()) day = b["day"].get<mailgraph::Day>();
    auto n = b.value("n", static_cast<std::size_t>(Workspace::kDefaultReviewSample));
    auto seed = b.value("seed", static_cast<std::uint64_t>(0));
    return records(ws_.sample_review(day, n, seed));
  }

  json label(const httplib::Request& req) {
    json b = body_json(req);
    auto l = efficacy::parse_human_label(b.at("label").get<std::string>());
    if (!l) throw HttpError(400, "label must be TP or FP");
    auto rec = ws_.label(b.at("record_id").get<std::string>(), *l, b.value("labeled_by", "analyst"));
    return Workspace::review_json(rec);
  }

  json update(const httplib::Request& req) {
    json b = req.body.empty() ? json::object() : body_json(req);
    std::optional<double> sigma;
    if (b.contains("sigma") && !b["sigma"].is_null()) sigma = b["sigma"].get<double>();
    std::map<std::string, double> overrides;
    if (b.contains("sigma_overrides")) {
      for (const auto& [k, v] : b["sigma_overrides"].items()) overrides[k] = v.get<double>();
    }
    auto r = ws_.update_model(sigma, overrides);
    return {{"previous_version", r.previous_version},
            {"version", r.version},
            {"training_size", r.training_size},
            {"diff", pipeline::diff_json(r.diff)}};
  }

  Workspace& ws_;
  std::string token_;
};

}  // namespace bec::service
