#pragma once
// HTTP front door. A MONOLITH serves /ask plus every component endpoint; a
// COMPONENT serves exactly one role. Roles listed in peer_endpoints are
// delegated to another process over HTTP.
//
// Model specs (model_paths values):
//   QTYPE      rule | rule:<lexicon dir> | oracle:<dataset> | <bundle dir>[#task]
//   EXTRACT    oracle:<dataset> | <bundle dir>[#task]
//   BOOLEAN    oracle:<dataset> | always-yes[:prior] | <bundle dir>[#task]
//   NORMALIZE  sigmoid | <normalizer file>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "boolmrc/pipeline.hpp"

namespace httplib {
class Server;
}

namespace boolmrc {

using json = nlohmann::json;

enum class ServiceMode { Monolith, Component };
enum class ServiceRole { Qtype, Extract, Boolean, Normalize };

inline constexpr ServiceRole kAllRoles[] = {ServiceRole::Qtype, ServiceRole::Extract,
                                            ServiceRole::Boolean, ServiceRole::Normalize};

std::string_view to_string(ServiceMode m) noexcept;
std::string_view to_string(ServiceRole r) noexcept;
ServiceMode parse_service_mode(std::string_view s);  // MONOLITH | COMPONENT
ServiceRole parse_service_role(std::string_view s);  // QTYPE | EXTRACT | BOOLEAN | NORMALIZE
std::string_view endpoint_of(ServiceRole r) noexcept;  // "/qtype", ...

struct ServiceConfig {
    ServiceMode mode = ServiceMode::Monolith;
    std::optional<ServiceRole> component_role;
    std::string listen_address = "127.0.0.1:8080";
    std::map<ServiceRole, std::string> model_paths;
    std::map<ServiceRole, std::string> peer_endpoints;  // role -> http://host:port

    BooleanStrategy boolean_strategy = BooleanStrategy::Classifier;
    double threshold = 0.5;
    std::size_t evidence_left_offset = kDefaultEvidenceOffset;
    std::size_t evidence_right_offset = kDefaultEvidenceOffset;

    std::size_t max_document_chars = 200000;  // code points; larger /ask bodies get 413
    int peer_timeout_ms = 5000;
    int threads = 8;

    // Throws ValidationError.
    void validate() const;
    std::vector<ServiceRole> served_roles() const;
};

// Unknown keys and malformed values throw ParseError; the result is validated.
ServiceConfig service_config_from_json(const json& j);
json to_json(const ServiceConfig& config);
ServiceConfig load_service_config(const std::filesystem::path& path);

// BOOLMRC_CONFIG, when set and non-empty, wins over `requested`.
std::filesystem::path resolve_config_path(const std::optional<std::filesystem::path>& requested);

struct HostPort {
    std::string host;
    int port = 0;
};
HostPort parse_listen_address(std::string_view address);

// Remote stand-ins that call a peer's component endpoint. Transport failures
// and non-200 replies throw PeerError.
std::shared_ptr<const QuestionTypeBackend> remote_qtype(const std::string& url, int timeout_ms);
std::shared_ptr<const SpanExtractorBackend> remote_extractor(const std::string& url, int timeout_ms);
std::shared_ptr<const BooleanAnswerBackend> remote_boolean(const std::string& url, int timeout_ms);
std::shared_ptr<const ScoreNormalizerBackend> remote_normalizer(const std::string& url, int timeout_ms);

// Loaded stages; a null member means the role failed to load (or is not needed).
struct ServiceModels {
    std::shared_ptr<const QuestionTypeBackend> qtype;
    std::shared_ptr<const SpanExtractorBackend> extractor;
    std::shared_ptr<const BooleanAnswerBackend> boolean;
    std::shared_ptr<const ScoreNormalizerBackend> normalizer;
    std::map<ServiceRole, std::string> load_errors;
};

ServiceModels load_service_models(const ServiceConfig& config);

// Pipeline settings of `config` wired to `models`.
PipelineConfig pipeline_config(const ServiceConfig& config, const ServiceModels& models);

struct HttpReply {
    int status = 200;
    json body;
};

// Request handling independent of the transport. Immutable after
// construction, so handle() is safe to call concurrently.
class Service {
public:
    explicit Service(ServiceConfig config);
    Service(ServiceConfig config, ServiceModels models);

    HttpReply handle(std::string_view method, std::string_view path, std::string_view body) const;

    json health() const;
    const ServiceConfig& config() const noexcept { return config_; }
    bool ready() const;

private:
    HttpReply ask(const json& body) const;
    HttpReply component(ServiceRole role, const json& body) const;
    PipelineConfig pipeline() const;

    ServiceConfig config_;
    ServiceModels models_;
};

// Binds and serves a Service on a background thread.
class HttpServer {
public:
    explicit HttpServer(std::shared_ptr<const Service> service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Port 0 picks a free port. Returns the bound port; throws Error on failure.
    int start(const std::string& host, int port);
    void stop();
    // Blocks until stop() is called from another thread or a signal handler.
    void run(const std::string& host, int port);
    int port() const noexcept { return port_; }

private:
    std::shared_ptr<const Service> service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

// "/ask" body for a question; shared by the CLI and tests.
json ask_request(const Question& question, std::string_view document);
json ask_response(const FinalAnswer& answer, std::string_view document);

}  // namespace boolmrc
