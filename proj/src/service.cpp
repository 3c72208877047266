#include "boolmrc/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>

#include "boolmrc/errors.hpp"
#include "boolmrc/ingestion.hpp"
#include "boolmrc/model_backends.hpp"
#include "boolmrc/records.hpp"
#include "boolmrc/text.hpp"
#include "boolmrc/tinyformer/serialization.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that clashes with Eigen internals.
#include <httplib.h>

namespace boolmrc {

std::string_view to_string(ServiceMode m) noexcept {
    return m == ServiceMode::Monolith ? "MONOLITH" : "COMPONENT";
}

std::string_view to_string(ServiceRole r) noexcept {
    switch (r) {
        case ServiceRole::Qtype: return "QTYPE";
        case ServiceRole::Extract: return "EXTRACT";
        case ServiceRole::Boolean: return "BOOLEAN";
        case ServiceRole::Normalize: return "NORMALIZE";
    }
    return "?";
}

ServiceMode parse_service_mode(std::string_view s) {
    if (s == "MONOLITH") return ServiceMode::Monolith;
    if (s == "COMPONENT") return ServiceMode::Component;
    throw ParseError(0, "unknown service mode '" + std::string(s) + "'");
}

ServiceRole parse_service_role(std::string_view s) {
    for (auto r : kAllRoles)
        if (s == to_string(r)) return r;
    throw ParseError(0, "unknown service role '" + std::string(s) + "'");
}

std::string_view endpoint_of(ServiceRole r) noexcept {
    switch (r) {
        case ServiceRole::Qtype: return "/qtype";
        case ServiceRole::Extract: return "/extract";
        case ServiceRole::Boolean: return "/boolean";
        case ServiceRole::Normalize: return "/normalize";
    }
    return "";
}

namespace {

std::string_view stage_of(ServiceRole r) noexcept {
    switch (r) {
        case ServiceRole::Qtype: return kStageQtype;
        case ServiceRole::Extract: return kStageExtract;
        case ServiceRole::Boolean: return kStageBoolean;
        case ServiceRole::Normalize: return kStageNormalize;
    }
    return "";
}

bool is_http_url(std::string_view url) { return url.rfind("http://", 0) == 0 && url.size() > 7; }

}  // namespace

HostPort parse_listen_address(std::string_view address) {
    const auto colon = address.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == address.size())
        throw ValidationError("listen address must be host:port, got '" + std::string(address) + "'");
    HostPort out;
    out.host = std::string(address.substr(0, colon));
    const std::string port(address.substr(colon + 1));
    std::size_t used = 0;
    try {
        out.port = std::stoi(port, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != port.size() || out.port < 0 || out.port > 65535)
        throw ValidationError("bad port in listen address '" + std::string(address) + "'");
    return out;
}

void ServiceConfig::validate() const {
    if (mode == ServiceMode::Component && !component_role)
        throw ValidationError("COMPONENT mode needs a component_role");
    if (mode == ServiceMode::Monolith && component_role)
        throw ValidationError("component_role is only valid in COMPONENT mode");
    if (mode == ServiceMode::Component && !peer_endpoints.empty())
        throw ValidationError("a COMPONENT service does not call peers");
    parse_listen_address(listen_address);
    for (const auto& [role, url] : peer_endpoints) {
        if (!is_http_url(url))
            throw ValidationError("peer endpoint for " + std::string(to_string(role)) +
                                  " must be an http:// URL");
        if (model_paths.count(role))
            throw ValidationError(std::string(to_string(role)) +
                                  " has both a model path and a peer endpoint");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in [0,1]");
    if (max_document_chars == 0) throw ValidationError("max_document_chars must be positive");
    if (peer_timeout_ms <= 0) throw ValidationError("peer_timeout_ms must be positive");
    if (threads <= 0) throw ValidationError("threads must be positive");
}

std::vector<ServiceRole> ServiceConfig::served_roles() const {
    if (mode == ServiceMode::Component) return {*component_role};
    return {std::begin(kAllRoles), std::end(kAllRoles)};
}

namespace {

const std::set<std::string> kConfigKeys{"mode",           "component_role",  "listen_address",
                                        "model_paths",    "peer_endpoints",  "pipeline",
                                        "max_document_chars", "peer_timeout_ms", "threads"};
const std::set<std::string> kPipelineKeys{"boolean_strategy", "threshold", "evidence_left_offset",
                                          "evidence_right_offset"};

std::map<ServiceRole, std::string> role_map(const json& j, const char* key) {
    if (!j.is_object()) throw ParseError(0, std::string(key) + " must be an object");
    std::map<ServiceRole, std::string> out;
    for (const auto& [k, v] : j.items()) {
        if (!v.is_string()) throw ParseError(0, std::string(key) + "." + k + " must be a string");
        out[parse_service_role(k)] = v.get<std::string>();
    }
    return out;
}

json role_map_json(const std::map<ServiceRole, std::string>& m) {
    json out = json::object();
    for (const auto& [r, v] : m) out[std::string(to_string(r))] = v;
    return out;
}

}  // namespace

ServiceConfig service_config_from_json(const json& j) {
    if (!j.is_object()) throw ParseError(0, "service config must be an object");
    for (const auto& [k, v] : j.items())
        if (!kConfigKeys.count(k)) throw ParseError(0, "unknown config key '" + k + "'");
    ServiceConfig c;
    try {
        if (j.contains("mode")) c.mode = parse_service_mode(j.at("mode").get<std::string>());
        if (j.contains("component_role") && !j.at("component_role").is_null())
            c.component_role = parse_service_role(j.at("component_role").get<std::string>());
        if (j.contains("listen_address")) c.listen_address = j.at("listen_address").get<std::string>();
        if (j.contains("model_paths")) c.model_paths = role_map(j.at("model_paths"), "model_paths");
        if (j.contains("peer_endpoints"))
            c.peer_endpoints = role_map(j.at("peer_endpoints"), "peer_endpoints");
        if (j.contains("pipeline")) {
            const auto& p = j.at("pipeline");
            if (!p.is_object()) throw ParseError(0, "pipeline must be an object");
            for (const auto& [k, v] : p.items())
                if (!kPipelineKeys.count(k)) throw ParseError(0, "unknown pipeline key '" + k + "'");
            if (p.contains("boolean_strategy"))
                c.boolean_strategy = parse_boolean_strategy(p.at("boolean_strategy").get<std::string>());
            if (p.contains("threshold")) c.threshold = p.at("threshold").get<double>();
            if (p.contains("evidence_left_offset"))
                c.evidence_left_offset = p.at("evidence_left_offset").get<std::size_t>();
            if (p.contains("evidence_right_offset"))
                c.evidence_right_offset = p.at("evidence_right_offset").get<std::size_t>();
        }
        if (j.contains("max_document_chars"))
            c.max_document_chars = j.at("max_document_chars").get<std::size_t>();
        if (j.contains("peer_timeout_ms")) c.peer_timeout_ms = j.at("peer_timeout_ms").get<int>();
        if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("service config: ") + e.what());
    }
    c.validate();
    return c;
}

json to_json(const ServiceConfig& c) {
    json j{{"mode", to_string(c.mode)},
           {"listen_address", c.listen_address},
           {"model_paths", role_map_json(c.model_paths)},
           {"peer_endpoints", role_map_json(c.peer_endpoints)},
           {"pipeline",
            {{"boolean_strategy", to_string(c.boolean_strategy)},
             {"threshold", c.threshold},
             {"evidence_left_offset", c.evidence_left_offset},
             {"evidence_right_offset", c.evidence_right_offset}}},
           {"max_document_chars", c.max_document_chars},
           {"peer_timeout_ms", c.peer_timeout_ms},
           {"threads", c.threads}};
    if (c.component_role) j["component_role"] = to_string(*c.component_role);
    return j;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(0, path.string() + ": " + e.what());
    }
    return service_config_from_json(j);
}

std::filesystem::path resolve_config_path(const std::optional<std::filesystem::path>& requested) {
    if (const char* env = std::getenv("BOOLMRC_CONFIG"); env && *env) return env;
    if (requested) return *requested;
    throw ValidationError("no config given (use --config or BOOLMRC_CONFIG)");
}

// ---------------------------------------------------------------- wire format

json ask_request(const Question& question, std::string_view document) {
    json j{{"question", question.text}, {"language", question.language}, {"document", document}};
    if (!question.id.empty()) j["id"] = question.id;
    return j;
}

json ask_response(const FinalAnswer& answer, std::string_view document) {
    json j{{"predicted_type", to_string(answer.predicted_type)},
           {"kind", to_string(answer.kind)},
           {"score", answer.normalized_score}};
    if (answer.span) {
        j[answer.is_boolean() ? "evidence" : "span"] = to_json(*answer.span);
        j["answer_text"] = slice(document, *answer.span);
    }
    return j;
}

namespace {

json question_json(const Question& q) {
    json j{{"question", q.text}, {"language", q.language}};
    if (!q.id.empty()) j["id"] = q.id;
    return j;
}

const json& field(const json& body, const char* key) {
    if (!body.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    return body.at(key);
}

std::string string_field(const json& body, const char* key) {
    const auto& v = field(body, key);
    if (!v.is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

Question question_from(const json& body) {
    if (!body.is_object()) throw ValidationError("request body must be an object");
    Question q;
    q.text = string_field(body, "question");
    if (trim(q.text).empty()) throw ValidationError("question is empty");
    if (body.contains("language") && !body.at("language").is_null()) {
        q.language = string_field(body, "language");
        if (q.language.empty()) q.language = "en";
    }
    if (body.contains("id") && !body.at("id").is_null()) q.id = string_field(body, "id");
    return q;
}

double number_field(const json& body, const char* key) {
    const auto& v = field(body, key);
    if (!v.is_number()) throw ValidationError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

class PeerClient {
public:
    PeerClient(std::string url, int timeout_ms) : url_(std::move(url)), timeout_ms_(timeout_ms) {}

    json post(std::string_view path, const json& body) const {
        httplib::Client cli(url_);
        const auto t = std::chrono::milliseconds(timeout_ms_);
        cli.set_connection_timeout(t);
        cli.set_read_timeout(t);
        cli.set_write_timeout(t);
        auto res = cli.Post(std::string(path), body.dump(), "application/json");
        if (!res)
            throw PeerError("peer " + url_ + std::string(path) + " unreachable: " +
                            httplib::to_string(res.error()));
        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::parse_error&) {
            throw PeerError("peer " + url_ + std::string(path) + " returned a non-JSON body");
        }
        if (res->status != 200) {
            const std::string msg = reply.is_object() && reply.contains("error") && reply["error"].is_string()
                                        ? reply["error"].get<std::string>()
                                        : res->body;
            throw PeerError("peer " + url_ + std::string(path) + " answered " +
                            std::to_string(res->status) + ": " + msg);
        }
        return reply;
    }

    std::string version() const { return "remote:" + url_; }

private:
    std::string url_;
    int timeout_ms_;
};

template <typename T>
T read_reply(const json& reply, const char* what, T (*convert)(const json&)) {
    try {
        return convert(reply);
    } catch (const std::exception& e) {
        throw PeerError(std::string("malformed ") + what + " reply: " + e.what());
    }
}

class RemoteQtype final : public QuestionTypeBackend {
public:
    RemoteQtype(std::string url, int timeout_ms) : peer_(std::move(url), timeout_ms) {}
    TypePrediction classify(const Question& q) const override {
        return read_reply<TypePrediction>(peer_.post("/qtype", question_json(q)), "qtype",
                                          [](const json& r) {
                                              return TypePrediction{
                                                  parse_question_type(r.at("type").get<std::string>()),
                                                  r.at("confidence").get<double>()};
                                          });
    }
    std::string version() const override { return peer_.version(); }

private:
    PeerClient peer_;
};

class RemoteExtractor final : public SpanExtractorBackend {
public:
    RemoteExtractor(std::string url, int timeout_ms) : peer_(std::move(url), timeout_ms) {}
    Extraction extract(const Question& q, std::string_view text) const override {
        auto body = question_json(q);
        body["text"] = text;
        return read_reply<Extraction>(peer_.post("/extract", body), "extract", [](const json& r) {
            return Extraction{span_from_json(r.at("span")), r.at("raw_score").get<double>()};
        });
    }
    std::string version() const override { return peer_.version(); }

private:
    PeerClient peer_;
};

class RemoteBoolean final : public BooleanAnswerBackend {
public:
    RemoteBoolean(std::string url, int timeout_ms) : peer_(std::move(url), timeout_ms) {}
    YesNoPrediction classify(const Question& q, std::string_view context) const override {
        auto body = question_json(q);
        body["context"] = context;
        return read_reply<YesNoPrediction>(peer_.post("/boolean", body), "boolean", [](const json& r) {
            return YesNoPrediction{parse_yes_no(r.at("label").get<std::string>()),
                                   r.at("p_yes").get<double>()};
        });
    }
    std::string version() const override { return peer_.version(); }

private:
    PeerClient peer_;
};

class RemoteNormalizer final : public ScoreNormalizerBackend {
public:
    RemoteNormalizer(std::string url, int timeout_ms) : peer_(std::move(url), timeout_ms) {}
    double normalize(double raw_score, QuestionType type, double type_confidence) const override {
        const json body{{"raw_score", raw_score}, {"type", to_string(type)}, {"type_confidence", type_confidence}};
        return read_reply<double>(peer_.post("/normalize", body), "normalize",
                                  [](const json& r) { return r.at("score").get<double>(); });
    }
    std::string version() const override { return peer_.version(); }

private:
    PeerClient peer_;
};

}  // namespace

std::shared_ptr<const QuestionTypeBackend> remote_qtype(const std::string& url, int timeout_ms) {
    return std::make_shared<RemoteQtype>(url, timeout_ms);
}
std::shared_ptr<const SpanExtractorBackend> remote_extractor(const std::string& url, int timeout_ms) {
    return std::make_shared<RemoteExtractor>(url, timeout_ms);
}
std::shared_ptr<const BooleanAnswerBackend> remote_boolean(const std::string& url, int timeout_ms) {
    return std::make_shared<RemoteBoolean>(url, timeout_ms);
}
std::shared_ptr<const ScoreNormalizerBackend> remote_normalizer(const std::string& url, int timeout_ms) {
    return std::make_shared<RemoteNormalizer>(url, timeout_ms);
}

// ---------------------------------------------------------------- model loading

namespace {

const char* default_task(ServiceRole r) {
    switch (r) {
        case ServiceRole::Qtype: return kTaskQtype;
        case ServiceRole::Extract: return kTaskSpan;
        case ServiceRole::Boolean: return kTaskBoolean;
        case ServiceRole::Normalize: break;
    }
    return "";
}

class ModelLoader {
public:
    const OracleBackends& oracle(const std::string& path) {
        auto it = oracles_.find(path);
        if (it == oracles_.end()) {
            datasets_.push_back(std::make_unique<Dataset>(load_dataset(path, DatasetSchema::TydiLike)));
            it = oracles_.emplace(path, OracleBackends(*datasets_.back())).first;
        }
        return it->second;
    }

    std::pair<BundlePtr, std::string> bundle(const std::string& spec, ServiceRole role) {
        std::string dir = spec, task = default_task(role);
        if (const auto hash = spec.rfind('#'); hash != std::string::npos) {
            dir = spec.substr(0, hash);
            task = spec.substr(hash + 1);
        }
        auto it = bundles_.find(dir);
        if (it == bundles_.end())
            it = bundles_.emplace(dir, std::make_shared<const tinyformer::ModelBundle>(
                                           tinyformer::load_bundle(dir))).first;
        return {it->second, task};
    }

private:
    std::vector<std::unique_ptr<Dataset>> datasets_;
    std::map<std::string, OracleBackends> oracles_;
    std::map<std::string, BundlePtr> bundles_;
};

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

void load_role(ServiceModels& m, ModelLoader& loader, ServiceRole role, const std::string& spec) {
    switch (role) {
        case ServiceRole::Qtype:
            if (spec == "rule") {
                m.qtype = std::make_shared<RuleQuestionTypeBackend>();
            } else if (starts_with(spec, "rule:")) {
                m.qtype = std::make_shared<RuleQuestionTypeBackend>(Lexicon::load_directory(spec.substr(5)));
            } else if (starts_with(spec, "oracle:")) {
                m.qtype = loader.oracle(spec.substr(7)).question_type();
            } else {
                auto [b, task] = loader.bundle(spec, role);
                m.qtype = std::make_shared<TinyQuestionTypeClassifier>(b, task);
            }
            return;
        case ServiceRole::Extract:
            if (starts_with(spec, "oracle:")) {
                m.extractor = loader.oracle(spec.substr(7)).extractor();
            } else {
                auto [b, task] = loader.bundle(spec, role);
                m.extractor = std::make_shared<TinySpanExtractor>(b, task);
            }
            return;
        case ServiceRole::Boolean:
            if (spec == "always-yes") {
                m.boolean = always_yes_backend();
            } else if (starts_with(spec, "always-yes:")) {
                double prior = 0.0;
                try {
                    prior = std::stod(spec.substr(11));
                } catch (const std::exception&) {
                    throw ValidationError("bad always-yes prior in '" + spec + "'");
                }
                m.boolean = always_yes_backend(prior);
            } else if (starts_with(spec, "oracle:")) {
                m.boolean = loader.oracle(spec.substr(7)).boolean();
            } else {
                auto [b, task] = loader.bundle(spec, role);
                m.boolean = std::make_shared<TinyBooleanClassifier>(b, task);
            }
            return;
        case ServiceRole::Normalize:
            if (spec == "sigmoid") {
                NormalizerModel n;
                n.weight_score = 1.0;
                m.normalizer = std::make_shared<LocalNormalizer>(n);
            } else {
                m.normalizer = std::make_shared<LocalNormalizer>(load_normalizer(spec));
            }
            return;
    }
}

bool role_loaded(const ServiceModels& m, ServiceRole role) {
    switch (role) {
        case ServiceRole::Qtype: return m.qtype != nullptr;
        case ServiceRole::Extract: return m.extractor != nullptr;
        case ServiceRole::Boolean: return m.boolean != nullptr;
        case ServiceRole::Normalize: return m.normalizer != nullptr;
    }
    return false;
}

std::string role_version(const ServiceModels& m, ServiceRole role) {
    switch (role) {
        case ServiceRole::Qtype: return m.qtype->version();
        case ServiceRole::Extract: return m.extractor->version();
        case ServiceRole::Boolean: return m.boolean->version();
        case ServiceRole::Normalize: return m.normalizer->version();
    }
    return "";
}

// Roles a service must have loaded to answer everything it serves.
std::vector<ServiceRole> required_roles(const ServiceConfig& c) {
    if (c.mode == ServiceMode::Component) return {*c.component_role};
    std::vector<ServiceRole> out;
    for (auto r : kAllRoles) {
        const bool optional_boolean = r == ServiceRole::Boolean &&
                                      c.boolean_strategy == BooleanStrategy::AlwaysYes &&
                                      !c.model_paths.count(r) && !c.peer_endpoints.count(r);
        if (!optional_boolean) out.push_back(r);
    }
    return out;
}

}  // namespace

ServiceModels load_service_models(const ServiceConfig& config) {
    config.validate();
    ServiceModels m;
    ModelLoader loader;
    for (auto role : required_roles(config)) {
        if (auto peer = config.peer_endpoints.find(role); peer != config.peer_endpoints.end()) {
            const int t = config.peer_timeout_ms;
            switch (role) {
                case ServiceRole::Qtype: m.qtype = remote_qtype(peer->second, t); break;
                case ServiceRole::Extract: m.extractor = remote_extractor(peer->second, t); break;
                case ServiceRole::Boolean: m.boolean = remote_boolean(peer->second, t); break;
                case ServiceRole::Normalize: m.normalizer = remote_normalizer(peer->second, t); break;
            }
            continue;
        }
        const auto path = config.model_paths.find(role);
        if (path == config.model_paths.end()) {
            m.load_errors[role] = "no model configured";
            continue;
        }
        try {
            load_role(m, loader, role, path->second);
        } catch (const std::exception& e) {
            m.load_errors[role] = e.what();
        }
    }
    return m;
}

// ---------------------------------------------------------------- service

Service::Service(ServiceConfig config) : Service(config, load_service_models(config)) {}

Service::Service(ServiceConfig config, ServiceModels models)
    : config_(std::move(config)), models_(std::move(models)) {
    config_.validate();
}

bool Service::ready() const {
    for (auto r : required_roles(config_))
        if (!role_loaded(models_, r)) return false;
    return true;
}

json Service::health() const {
    json roles = json::array();
    for (auto r : config_.served_roles()) roles.push_back(to_string(r));
    json versions = json::object();
    for (auto r : kAllRoles)
        if (role_loaded(models_, r)) versions[std::string(to_string(r))] = role_version(models_, r);
    json j{{"status", ready() ? "ok" : "degraded"},
           {"mode", to_string(config_.mode)},
           {"roles", roles},
           {"model_versions", versions}};
    if (!models_.load_errors.empty()) {
        json errors = json::object();
        for (const auto& [r, msg] : models_.load_errors) errors[std::string(to_string(r))] = msg;
        j["load_errors"] = errors;
    }
    return j;
}

PipelineConfig pipeline_config(const ServiceConfig& config, const ServiceModels& models) {
    PipelineConfig p;
    p.boolean_strategy = config.boolean_strategy;
    p.threshold = config.threshold;
    p.evidence_left_offset = config.evidence_left_offset;
    p.evidence_right_offset = config.evidence_right_offset;
    p.qtype_backend = models.qtype;
    p.extractor_backend = models.extractor;
    p.boolean_backend = models.boolean;
    p.normalizer_backend = models.normalizer;
    return p;
}

PipelineConfig Service::pipeline() const { return pipeline_config(config_, models_); }

namespace {

HttpReply error_reply(int status, const std::string& message) {
    return {status, json{{"error", message}}};
}

HttpReply stage_reply(int status, std::string_view stage, const std::string& message) {
    return {status, json{{"error", message}, {"stage", stage}}};
}

}  // namespace

HttpReply Service::ask(const json& body) const {
    if (config_.mode != ServiceMode::Monolith) return error_reply(404, "/ask is not served by a component");
    const auto q = question_from(body);
    const auto document = string_field(body, "document");
    if (document.empty()) throw ValidationError("document is empty");
    if (codepoint_length(document) > config_.max_document_chars)
        return error_reply(413, "document exceeds " + std::to_string(config_.max_document_chars) +
                                    " characters");
    if (!ready()) return error_reply(503, "service is degraded: models not loaded");
    try {
        const auto a = answer(pipeline(), q, document);
        return {200, ask_response(a, document)};
    } catch (const PipelineError& e) {
        return stage_reply(e.peer_failure() ? 502 : 500, e.stage(), e.what());
    }
}

HttpReply Service::component(ServiceRole role, const json& body) const {
    const auto served = config_.served_roles();
    if (std::find(served.begin(), served.end(), role) == served.end())
        return error_reply(404, std::string(to_string(role)) + " is not served here");
    if (!body.is_object()) throw ValidationError("request body must be an object");
    if (!role_loaded(models_, role))
        return error_reply(503, std::string(to_string(role)) + " model is not loaded");

    // Inputs are validated before the backend runs so that bad requests are
    // 400, not stage failures.
    Question q;
    std::string text;
    double raw = 0.0, confidence = 1.0;
    QuestionType type = QuestionType::Extractive;
    switch (role) {
        case ServiceRole::Qtype: q = question_from(body); break;
        case ServiceRole::Extract:
            q = question_from(body);
            text = string_field(body, "text");
            if (text.empty()) throw ValidationError("text is empty");
            if (codepoint_length(text) > config_.max_document_chars)
                return error_reply(413, "text exceeds " + std::to_string(config_.max_document_chars) +
                                            " characters");
            break;
        case ServiceRole::Boolean:
            q = question_from(body);
            text = string_field(body, "context");
            if (text.empty()) throw ValidationError("context is empty");
            break;
        case ServiceRole::Normalize:
            raw = number_field(body, "raw_score");
            try {
                type = parse_question_type(string_field(body, "type"));
            } catch (const ParseError& e) {
                throw ValidationError(e.what());
            }
            if (body.contains("type_confidence")) confidence = number_field(body, "type_confidence");
            break;
    }

    try {
        switch (role) {
            case ServiceRole::Qtype: {
                const auto t = models_.qtype->classify(q);
                return {200, json{{"type", to_string(t.type)}, {"confidence", t.confidence}}};
            }
            case ServiceRole::Extract: {
                const auto e = models_.extractor->extract(q, text);
                return {200, json{{"span", to_json(e.span)}, {"raw_score", e.raw_score}}};
            }
            case ServiceRole::Boolean: {
                const auto v = models_.boolean->classify(q, text);
                return {200, json{{"label", to_string(v.label)}, {"p_yes", v.p_yes}}};
            }
            case ServiceRole::Normalize:
                return {200, json{{"score", models_.normalizer->normalize(raw, type, confidence)}}};
        }
    } catch (const std::exception& e) {
        const bool peer = dynamic_cast<const PeerError*>(&e) != nullptr;
        return stage_reply(peer ? 502 : 500, stage_of(role), e.what());
    }
    return error_reply(500, "unreachable");
}

HttpReply Service::handle(std::string_view method, std::string_view path, std::string_view body) const {
    if (path == "/health") {
        if (method != "GET") return error_reply(405, "use GET /health");
        return {200, health()};
    }
    std::optional<ServiceRole> role;
    for (auto r : kAllRoles)
        if (path == endpoint_of(r)) role = r;
    if (path != "/ask" && !role) return error_reply(404, "no such endpoint " + std::string(path));
    if (method != "POST") return error_reply(405, "use POST " + std::string(path));

    json parsed;
    try {
        parsed = json::parse(body);
    } catch (const json::parse_error& e) {
        return error_reply(400, std::string("malformed JSON body: ") + e.what());
    }
    try {
        return role ? component(*role, parsed) : ask(parsed);
    } catch (const ValidationError& e) {
        return error_reply(400, e.what());
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

// ---------------------------------------------------------------- transport

HttpServer::HttpServer(std::shared_ptr<const Service> service)
    : service_(std::move(service)), server_(std::make_unique<httplib::Server>()) {
    const auto& cfg = service_->config();
    const int threads = cfg.threads;
    server_->new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
    // The handler enforces the document limit itself; this only guards memory.
    server_->set_payload_max_length(cfg.max_document_chars * 4 + (1u << 20));

    auto dispatch = [svc = service_](const httplib::Request& req, httplib::Response& res) {
        const auto reply = svc->handle(req.method, req.path, req.body);
        res.status = reply.status;
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_content(reply.body.dump(), "application/json");
    };
    for (const char* path : {"/ask", "/qtype", "/extract", "/boolean", "/normalize"}) {
        server_->Post(path, dispatch);
        server_->Get(path, dispatch);
    }
    server_->Get("/health", dispatch);
    server_->Post("/health", dispatch);
    server_->Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    server_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        const std::string msg = res.status == 413 ? "request body too large"
                                                  : "no such endpoint " + req.path;
        res.set_content(json{{"error", msg}}.dump(), "application/json");
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ <= 0) throw Error("cannot bind " + host);
    } else {
        if (!server_->bind_to_port(host, port))
            throw Error("cannot bind " + host + ":" + std::to_string(port));
        port_ = port;
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void HttpServer::run(const std::string& host, int port) {
    start(host, port);
    thread_.join();
}

void HttpServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace boolmrc
