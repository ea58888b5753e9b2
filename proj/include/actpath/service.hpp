#pragma once

// HTTP JSON API over a loaded model bundle. Handlers are plain functions of
// (bundle, request) so they can be exercised without a socket; mount() wires
// them into a cpp-httplib server.

#include <memory>
#include <string>

#include "actpath/pipeline.hpp"

// After pipeline.hpp: httplib pulls in resolv.h, whose _res macro breaks Eigen.
#include <httplib.h>

namespace actpath {

inline constexpr const char* kVersion = "0.1.0";

struct ApiError : std::runtime_error {
    int status;
    std::string code;
    Json detail;
    ApiError(int s, std::string c, const std::string& msg, Json d = nullptr)
        : std::runtime_error(msg), status(s), code(std::move(c)), detail(std::move(d)) {}
};

struct ApiResponse {
    int status = 200;
    Json body;
};

inline Json error_body(const std::string& code, const std::string& message, Json detail = nullptr) {
    return {{"code", code}, {"message", message}, {"detail", std::move(detail)}};
}

class Service {
public:
    explicit Service(std::shared_ptr<const ModelBundle> bundle = nullptr) : bundle_(std::move(bundle)) {}

    bool loaded() const { return bundle_ != nullptr; }
    const ModelBundle& bundle() const {
        if (!bundle_) throw ApiError(503, "not_loaded", "no model bundle loaded");
        return *bundle_;
    }

    ApiResponse health() const {
        if (!bundle_) return {503, error_body("not_loaded", "no model bundle loaded")};
        const auto& b = *bundle_;
        return {200,
                {{"status", "ok"},
                 {"build", {{"name", "actpath"}, {"version", kVersion}}},
                 {"bundle",
                  {{"id", bundle_id()},
                   {"features", b.features},
                   {"response", b.schema[b.schema.response_index()].name},
                   {"surrogate_k", b.surrogate.spec().k},
                   {"test_instances", b.test.rows()}}}}};
    }

    // filter: empty or "response>=V" etc.
    ApiResponse instances(const std::string& filter) const {
        const auto& b = bundle();
        std::optional<ResponseFilter> f;
        if (!filter.empty()) f = parse_response_filter(filter);
        Json list = Json::array();
        for (std::size_t r = 0; r < b.test.rows(); ++r) {
            const double y = b.test.response(r);
            if (f && !f->accepts(y)) continue;
            const auto x = features_by_name(b.test, r, b.features);
            list.push_back({{"id", b.test.ids[r]}, {"features", real_features_json(b, x)}, {"response", y},
                            {"prediction", b.predict_real(x)}});
        }
        return {200, {{"count", list.size()}, {"instances", list}}};
    }

    // Parses and validates a /v1/plan body; all 4xx outcomes surface here.
    PreparedPlan prepare(const std::string& body) const {
        const auto& b = bundle();
        const Json j = parse_body(body);
        check_keys(j,
                   {"instance_id", "features", "intervention", "cell_sigma", "L", "direction", "constraints", "seed",
                    "baseline_count", "weight_floor"},
                   "request");
        PlanRequest req;
        req.settings = b.config.planning;
        req.seed = json_get<std::uint64_t>(j, "seed", b.config.seed, "request");
        if (j.contains("features")) {
            req.instance_id = json_get<std::string>(j, "instance_id", "custom", "request");
            req.features = features_from_json(b, j["features"], true);
        } else if (j.contains("instance_id")) {
            req.instance_id = json_get<std::string>(j, "instance_id", "", "request");
            auto r = b.test.find_id(req.instance_id);
            if (!r) throw ApiError(404, "not_found", "unknown instance '" + req.instance_id + "'");
            req.features = features_by_name(b.test, *r, b.features);
        } else {
            throw ValidationError("request: provide instance_id or features");
        }
        PlanSettings& s = req.settings;
        if (j.contains("intervention")) {
            s.intervention.clear();
            apply_intervention_json(s, j["intervention"], "request.intervention");
        }
        s.cell_sigma = json_get<double>(j, "cell_sigma", s.cell_sigma, "request");
        if (j.contains("L") && !j["L"].is_number_unsigned()) throw ValidationError("request.L: expected a non-negative integer");
        s.iterations = json_get<std::size_t>(j, "L", s.iterations, "request");
        if (s.iterations > b.config.service.l_ceiling)
            throw ValidationError("request.L=" + std::to_string(s.iterations) + " exceeds the ceiling of " +
                                  std::to_string(b.config.service.l_ceiling));
        s.direction = direction_from_string(json_get<std::string>(j, "direction", to_string(s.direction), "request"));
        if (j.contains("constraints")) {
            s.feature_constraints.clear();
            s.prediction_ceiling.reset();
            s.prediction_floor.reset();
            s.target.reset();
            apply_constraints_json(s, j["constraints"], "request.constraints");
        }
        s.baseline_count = json_get<std::size_t>(j, "baseline_count", s.baseline_count, "request");
        s.weight_floor = json_get<bool>(j, "weight_floor", s.weight_floor, "request");
        return prepare_plan(b, req);
    }

    ApiResponse plan(const std::string& body, std::function<bool()> cancelled = {}) const {
        return guarded([&] { return ApiResponse{200, run_plan(bundle(), prepare(body), std::move(cancelled))}; });
    }

    ApiResponse density(const std::string& body) const {
        return guarded([&] {
            const auto& b = bundle();
            const Json j = parse_body(body);
            if (j.contains("points")) {
                check_keys(j, {"points"}, "request");
                if (!j["points"].is_array()) throw ValidationError("request.points: expected an array");
                Json out = Json::array();
                for (const auto& p : j["points"]) out.push_back(density_point(b, p));
                return ApiResponse{200, {{"results", out}}};
            }
            return ApiResponse{200, density_point(b, j)};
        });
    }

    template <class Fn>
    static ApiResponse guarded(Fn&& fn) {
        try {
            return fn();
        } catch (const ApiError& e) {
            return {e.status, error_body(e.code, e.what(), e.detail)};
        } catch (const MissingInterventionValue& e) {
            return {422, error_body("missing_intervention_values", e.what())};
        } catch (const ValidationError& e) {
            return {400, error_body("bad_request", e.what())};
        } catch (const SearchCancelled& e) {
            return {499, error_body("cancelled", e.what())};
        } catch (const std::exception& e) {
            return {500, error_body("internal", e.what())};
        }
    }

    std::string bundle_id() const {
        if (!bundle_) return {};
        const auto& b = *bundle_;
        std::uint64_t h = hash_text(b.regressor.model().to_json().dump());
        h = mix64(h ^ hash_text(b.surrogate.to_json().dump()));
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

private:
    static Json parse_body(const std::string& body) {
        try {
            Json j = Json::parse(body);
            if (!j.is_object()) throw ValidationError("request body must be a JSON object");
            return j;
        } catch (const Json::parse_error& e) {
            throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
        }
    }

    static Json real_features_json(const ModelBundle& b, std::span<const double> x) {
        Json out = Json::object();
        for (std::size_t i = 0; i < b.features.size(); ++i) {
            if (is_missing(x[i])) {
                out[b.features[i]] = nullptr;
            } else if (b.continuous[i]) {
                out[b.features[i]] = x[i];
            } else {
                out[b.features[i]] = b.schema[b.schema.index_of(b.features[i])].levels.at(static_cast<std::size_t>(x[i]));
            }
        }
        return out;
    }

    // Object keyed by feature name, or an array in model feature order.
    // Discrete values are level labels (strings or numbers matching a label).
    static std::vector<double> features_from_json(const ModelBundle& b, const Json& j, bool allow_null) {
        std::vector<double> x(b.features.size(), kMissing);
        auto convert = [&](std::size_t i, const Json& v) {
            const std::string& name = b.features[i];
            if (v.is_null()) {
                if (!allow_null) throw ValidationError("feature '" + name + "' is null");
                return kMissing;
            }
            if (b.continuous[i]) {
                if (!v.is_number()) throw ValidationError("feature '" + name + "' must be a number");
                const double d = v.get<double>();
                if (!std::isfinite(d)) throw ValidationError("feature '" + name + "' must be finite");
                return d;
            }
            const auto& levels = b.schema[b.schema.index_of(name)].levels;
            const std::string label = v.is_string() ? v.get<std::string>() : v.dump();
            for (std::size_t l = 0; l < levels.size(); ++l) {
                double a = 0.0, c = 0.0;
                if (levels[l] == label || (v.is_number() && parse_double(levels[l], a) && parse_double(label, c) && a == c))
                    return static_cast<double>(l);
            }
            throw ValidationError("feature '" + name + "' has unknown level '" + label + "'");
        };
        if (j.is_array()) {
            if (j.size() != b.features.size())
                throw ValidationError("expected " + std::to_string(b.features.size()) + " feature values, got " +
                                      std::to_string(j.size()));
            for (std::size_t i = 0; i < j.size(); ++i) x[i] = convert(i, j[i]);
            return x;
        }
        if (!j.is_object()) throw ValidationError("features must be an object or an array");
        for (auto it = j.begin(); it != j.end(); ++it) (void)b.position(it.key());
        for (std::size_t i = 0; i < b.features.size(); ++i) {
            if (!j.contains(b.features[i])) throw ValidationError("missing feature '" + b.features[i] + "'");
            x[i] = convert(i, j[b.features[i]]);
        }
        return x;
    }

    static Json density_point(const ModelBundle& b, const Json& p) {
        check_keys(p, {"x", "y"}, "point");
        if (!p.contains("x")) throw ValidationError("point: 'x' is required");
        const auto x = features_from_json(b, p["x"], false);
        const auto y = json_opt_double(p, "y", "point");
        const double pred = b.predict_real(x);
        return {{"log_density", b.log_density_real(x, y ? y : std::optional<double>(pred))}, {"prediction", pred}};
    }

    std::shared_ptr<const ModelBundle> bundle_;
};

// ---------------------------------------------------------------------------
// HTTP wiring

inline void send_json(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
}

inline void mount(httplib::Server& server, const Service& svc, const std::string& cors_origin = "*") {
    server.set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/v1/health", [&svc](const httplib::Request&, httplib::Response& res) { send_json(res, svc.health()); });

    server.Get("/v1/instances", [&svc](const httplib::Request& req, httplib::Response& res) {
        send_json(res, Service::guarded([&] { return svc.instances(req.get_param_value("filter")); }));
    });

    // Validation happens before any bytes are sent; the search itself runs
    // inside the content provider so a client disconnect cancels it.
    server.Post("/v1/plan", [&svc](const httplib::Request& req, httplib::Response& res) {
        std::shared_ptr<PreparedPlan> prep;
        const ApiResponse pre = Service::guarded([&] {
            prep = std::make_shared<PreparedPlan>(svc.prepare(req.body));
            return ApiResponse{};
        });
        if (!prep) {
            send_json(res, pre);
            return;
        }
        res.status = 200;
        res.set_chunked_content_provider("application/json", [&svc, prep](std::size_t, httplib::DataSink& sink) {
            const ApiResponse r = Service::guarded(
                [&] { return ApiResponse{200, run_plan(svc.bundle(), *prep, [&sink] { return !sink.is_writable(); })}; });
            if (r.status == 499) return false;
            const std::string text = r.status == 200 ? r.body.dump() : Json{{"error", r.body}}.dump();
            sink.write(text.data(), text.size());
            sink.done();
            return true;
        });
    });

    server.Post("/v1/density", [&svc](const httplib::Request& req, httplib::Response& res) { send_json(res, svc.density(req.body)); });

    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        const std::string code = res.status == 404 ? "not_found" : "http_" + std::to_string(res.status);
        res.set_content(error_body(code, "no route for " + req.method + " " + req.path).dump(), "application/json");
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string msg = "unknown error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            msg = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(error_body("internal", msg).dump(), "application/json");
    });
}

}  // namespace actpath
