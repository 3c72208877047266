// Command-line front door: data preparation, training, calibration,
// evaluation and serving.
//
// Exit codes: 0 success, 1 usage or validation error, 2 runtime error.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "boolmrc/errors.hpp"
#include "boolmrc/evaluation.hpp"
#include "boolmrc/ingestion.hpp"
#include "boolmrc/model_backends.hpp"
#include "boolmrc/normalizer.hpp"
#include "boolmrc/pipeline.hpp"
#include "boolmrc/records.hpp"
#include "boolmrc/service.hpp"
#include "boolmrc/synthetic.hpp"
#include "boolmrc/tinyformer/serialization.hpp"

#include <httplib.h>

using namespace boolmrc;
namespace tf = boolmrc::tinyformer;
namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    return out;
}

std::vector<FinalAnswer> load_predictions(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open predictions " + path.string());
    return read_predictions(in);
}

std::vector<RawPrediction> load_raw(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open raw predictions " + path.string());
    return read_raw_predictions(in);
}

std::optional<ServiceConfig> maybe_config(const std::string& flag) {
    const char* env = std::getenv("BOOLMRC_CONFIG");
    if (flag.empty() && !(env && *env)) return std::nullopt;
    return load_service_config(resolve_config_path(flag.empty() ? std::nullopt
                                                                : std::optional<fs::path>(flag)));
}

ServiceConfig require_config(const std::string& flag) {
    auto c = maybe_config(flag);
    if (!c) throw ValidationError("a service config is required (--config or BOOLMRC_CONFIG)");
    return *c;
}

ServiceModels require_models(const ServiceConfig& config, std::initializer_list<ServiceRole> roles) {
    auto models = load_service_models(config);
    for (auto r : roles)
        if (auto it = models.load_errors.find(r); it != models.load_errors.end())
            throw ValidationError(std::string(to_string(r)) + " model: " + it->second);
    return models;
}

// Answers every example with the threshold at 0 so that each prediction
// keeps its span; thresholds are applied at evaluation time.
BatchResult predict_all(const ServiceConfig& config, const Dataset& ds, unsigned threads) {
    std::vector<ServiceRole> need{ServiceRole::Qtype, ServiceRole::Extract, ServiceRole::Normalize};
    if (config.boolean_strategy == BooleanStrategy::Classifier) need.push_back(ServiceRole::Boolean);
    auto models = load_service_models(config);
    for (auto r : need)
        if (auto it = models.load_errors.find(r); it != models.load_errors.end())
            throw ValidationError(std::string(to_string(r)) + " model: " + it->second);
    auto p = pipeline_config(config, models);
    p.threshold = 0.0;
    auto r = answer_batch(p, ds, threads);
    for (const auto& e : r.errors)
        std::cerr << "warning: " << e.example_id << " failed at " << e.stage << ": " << e.message << '\n';
    return r;
}

struct DatasetArgs {
    std::string path;
    std::string schema = "tydi-like";

    Dataset load() const { return load_dataset(path, parse_schema(schema)); }
};

void add_dataset(CLI::App* cmd, DatasetArgs& a, const char* flag, const char* what) {
    cmd->add_option(flag, a.path, what)->required();
    cmd->add_option("--schema", a.schema, "tydi-like | boolq-like")->capture_default_str();
}

std::pair<std::string, std::string> split_pair(const std::string& s, const char* flag) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
        throw ValidationError(std::string(flag) + " expects NAME=VALUE, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Boolean and extractive reading comprehension pipeline"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every command");

    // synth
    std::size_t synth_n = 100;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    MixSpec synth_mix;
    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic YN/MA/NA dataset");
    synth->add_option("--n", synth_n, "Number of examples")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
    synth->add_option("--yn", synth_mix.yn, "Fraction of boolean questions")->capture_default_str();
    synth->add_option("--ma", synth_mix.ma, "Fraction of extractive questions")->capture_default_str();
    synth->add_option("--out", synth_out, "Output dataset")->required();

    // ingest
    DatasetArgs ingest_in;
    std::string ingest_out;
    auto* ingest = app.add_subcommand("ingest", "Validate a dataset and rewrite it in canonical form");
    add_dataset(ingest, ingest_in, "--in", "Input dataset");
    ingest->add_option("--out", ingest_out, "Output dataset")->required();

    // expand
    DatasetArgs expand_in;
    std::string expand_out;
    ExpansionSpec expand_spec;
    auto* expand = app.add_subcommand("expand", "Build fixed-length passage windows around gold passages");
    expand->alias("expand-data");
    add_dataset(expand, expand_in, "--in", "Input dataset");
    expand->add_option("--out", expand_out, "Output dataset")->required();
    expand->add_option("--words", expand_spec.target_words, "Window length in words")->capture_default_str();
    expand->add_flag("--pseudo-negatives", expand_spec.pseudo_negatives,
                     "Add a non-overlapping no-answer window per example");
    expand->add_option("--seed", expand_spec.seed, "Seed for pseudo-negative windows")->capture_default_str();

    // train
    std::string train_task, train_mode = "separate", train_data, train_base, train_out;
    std::string train_schema = "tydi-like";
    std::size_t train_synthetic = 0;
    std::uint64_t train_data_seed = 1;
    tf::EncoderConfig enc;
    tf::TrainHyper hyper;
    auto* train = app.add_subcommand("train", "Train one task of the miniature encoder");
    train->add_option("--task", train_task, "qtype | boolean | span")
        ->required()
        ->check(CLI::IsMember({"qtype", "boolean", "span"}));
    train->add_option("--mode", train_mode, "separate | adapter")
        ->check(CLI::IsMember({"separate", "adapter"}))
        ->capture_default_str();
    train->add_option("--train", train_data, "Training dataset");
    train->add_option("--schema", train_schema, "tydi-like | boolq-like")->capture_default_str();
    train->add_option("--synthetic-questions", train_synthetic,
                      "qtype only: train on N synthetic bilingual questions instead of a dataset");
    train->add_option("--data-seed", train_data_seed, "Seed for synthetic questions")->capture_default_str();
    train->add_option("--base", train_base, "adapter mode: bundle whose base stack is shared");
    train->add_option("--out", train_out, "Output bundle directory")->required();
    train->add_option("--epochs", hyper.epochs)->capture_default_str();
    train->add_option("--lr", hyper.lr)->capture_default_str();
    train->add_option("--l2", hyper.l2)->capture_default_str();
    train->add_option("--batch-size", hyper.batch_size)->capture_default_str();
    train->add_option("--seed", hyper.seed, "Shuffling seed")->capture_default_str();
    train->add_option("--layers", enc.num_layers)->capture_default_str();
    train->add_option("--hidden", enc.hidden_dim)->capture_default_str();
    train->add_option("--heads", enc.num_heads)->capture_default_str();
    train->add_option("--ffn", enc.ffn_dim)->capture_default_str();
    train->add_option("--buckets", enc.vocab_buckets)->capture_default_str();
    train->add_option("--max-len", enc.max_seq_len)->capture_default_str();
    train->add_option("--init-seed", enc.seed, "Weight initialisation seed")->capture_default_str();

    // calibrate-normalizer
    DatasetArgs cn_data;
    SplitSpec cn_split;
    std::string cn_partition = "example", cn_config, cn_out, cn_feature = "hard";
    NormalizerHyper cn_hyper;
    auto* cal_norm = app.add_subcommand("calibrate-normalizer",
                                        "Fit the score normalizer on a held-out part of a dataset");
    add_dataset(cal_norm, cn_data, "--train", "Dataset to split");
    cal_norm->add_option("--holdout-fraction", cn_split.holdout_fraction)->capture_default_str();
    cal_norm->add_option("--seed", cn_split.seed, "Split seed")->capture_default_str();
    cal_norm->add_option("--partition", cn_partition, "example | file-index")
        ->check(CLI::IsMember({"example", "file-index"}))
        ->capture_default_str();
    cal_norm->add_option("--config", cn_config, "Service config naming the QTYPE and EXTRACT models");
    cal_norm->add_option("--qtype-feature", cn_feature, "hard | confidence")
        ->check(CLI::IsMember({"hard", "confidence"}))
        ->capture_default_str();
    cal_norm->add_option("--epochs", cn_hyper.epochs)->capture_default_str();
    cal_norm->add_option("--lr", cn_hyper.lr)->capture_default_str();
    cal_norm->add_option("--l2", cn_hyper.l2)->capture_default_str();
    cal_norm->add_option("--out", cn_out, "Output normalizer file")->required();

    // predict
    DatasetArgs pr_data;
    std::string pr_config, pr_out, pr_raw;
    unsigned pr_threads = 1;
    auto* predict = app.add_subcommand("predict", "Answer every example of a dataset");
    add_dataset(predict, pr_data, "--dev", "Dataset to answer");
    predict->add_option("--config", pr_config, "Service config");
    predict->add_option("--out", pr_out, "Prediction records (threshold 0)")->required();
    predict->add_option("--raw-out", pr_raw, "Raw extractor records");
    predict->add_option("--threads", pr_threads)->capture_default_str();

    // calibrate-threshold
    DatasetArgs ct_data;
    std::string ct_preds, ct_config;
    auto* cal_thr = app.add_subcommand("calibrate-threshold", "Pick the F1-optimal answer threshold");
    add_dataset(cal_thr, ct_data, "--dev", "Development dataset");
    auto* ct_p = cal_thr->add_option("--predictions", ct_preds, "Prediction records");
    auto* ct_c = cal_thr->add_option("--config", ct_config, "Service config to predict with");
    ct_p->excludes(ct_c);

    // evaluate
    DatasetArgs ev_data;
    std::string ev_report, ev_preds, ev_config, ev_raw;
    double ev_threshold = -1.0;
    int ev_bins = 20;
    std::vector<std::string> ev_bundles, ev_params;
    auto* evaluate = app.add_subcommand("evaluate", "Render an evaluation report");
    evaluate->add_option("--report", ev_report, "min-f1 | confusion | yesno | histogram | footprint")
        ->required()
        ->check(CLI::IsMember({"min-f1", "confusion", "yesno", "histogram", "footprint"}));
    evaluate->add_option("--dev", ev_data.path, "Development dataset");
    evaluate->add_option("--schema", ev_data.schema)->capture_default_str();
    evaluate->add_option("--predictions", ev_preds, "Prediction records");
    evaluate->add_option("--raw", ev_raw, "Raw extractor records (histogram)");
    evaluate->add_option("--config", ev_config, "Service config to predict with");
    evaluate->add_option("--threshold", ev_threshold, "Answer threshold (default: config, else 0.5)");
    evaluate->add_option("--bins", ev_bins)->capture_default_str();
    evaluate->add_option("--bundle", ev_bundles, "footprint: NAME=DIR, repeatable");
    evaluate->add_option("--params", ev_params, "footprint: NAME=COUNT, repeatable");

    // serve
    std::string serve_config;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--config", serve_config, "Service config (BOOLMRC_CONFIG overrides)");

    // ask
    std::string ask_question, ask_doc, ask_lang = "en", ask_config, ask_url;
    auto* ask = app.add_subcommand("ask", "Answer one question about one document");
    ask->add_option("--question", ask_question, "Question text")->required();
    ask->add_option("--document-file", ask_doc, "UTF-8 document")->required();
    ask->add_option("--language", ask_lang)->capture_default_str();
    ask->add_option("--config", ask_config, "Answer in process with this service config");
    ask->add_option("--url", ask_url, "Answer through a running service, e.g. http://127.0.0.1:8080");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
            std::cerr << sub->help();
        else
            std::cerr << app.help();
        return kExitValidation;
    }

    try {
        if (*synth) {
            save_dataset(synth_out, synthetic_dataset(synth_n, synth_seed, synth_mix));
            std::cout << "wrote " << synth_n << " examples to " << synth_out << '\n';
        } else if (*ingest) {
            const auto ds = ingest_in.load();
            save_dataset(ingest_out, ds);
            std::cout << "wrote " << ds.size() << " examples to " << ingest_out << '\n';
            for (const auto& [lang, n] : ds.language_counts()) std::cout << "  " << lang << ": " << n << '\n';
        } else if (*expand) {
            const auto r = expand_dataset(expand_in.load(), expand_spec);
            save_dataset(expand_out, r.dataset);
            std::cout << "wrote " << r.dataset.size() << " passages to " << expand_out << " ("
                      << r.truncated << " short documents, " << r.negatives_skipped
                      << " pseudo-negatives unavailable)\n";
        } else if (*train) {
            const auto mode = parse_train_mode(train_mode);
            std::optional<tf::ModelBundle> base;
            if (!train_base.empty()) {
                if (mode != TrainMode::Adapter) throw ValidationError("--base only applies to --mode adapter");
                base = tf::load_bundle(train_base);
                enc = base->config;
            }
            enc.validate();
            auto bundle = prepare_task_bundle(train_task, mode, enc, base ? &*base : nullptr);

            std::vector<tf::TrainingExample> data;
            if (train_task == kTaskQtype && train_synthetic > 0) {
                if (!train_data.empty()) throw ValidationError("use either --train or --synthetic-questions");
                data = qtype_examples(enc, synthetic_questions(train_synthetic, train_data_seed));
            } else {
                if (train_data.empty()) throw ValidationError("--train is required");
                const auto ds = load_dataset(train_data, parse_schema(train_schema));
                if (train_task == kTaskQtype) data = qtype_examples(enc, typed_questions(ds));
                else if (train_task == kTaskBoolean) data = boolean_examples(enc, ds);
                else data = span_examples(enc, ds);
            }
            if (data.empty()) throw ValidationError("no training examples for task " + train_task);

            tf::TrainLog log;
            bundle = tf::train(std::move(bundle), train_task, data, hyper, &log);
            tf::save_bundle(bundle, train_out);
            std::cout << "task " << train_task << " (" << train_mode << "), " << data.size()
                      << " examples, objective " << log.epoch_objective.front() << " -> "
                      << log.epoch_objective.back() << '\n'
                      << "trainable parameters: "
                      << tf::count_parameters(bundle, tf::ParamScope::All, true) << " of "
                      << tf::count_parameters(bundle, tf::ParamScope::All) << '\n'
                      << "saved " << train_out << '\n';
        } else if (*cal_norm) {
            const auto ds = cn_data.load();
            cn_split.partition_key =
                cn_partition == "example" ? PartitionKey::ByExample : PartitionKey::ByFileIndex;
            const auto split = split_dataset(ds, cn_split);
            auto models = require_models(require_config(cn_config), {ServiceRole::Qtype, ServiceRole::Extract});
            cn_hyper.qtype_feature =
                cn_feature == "hard" ? QtypeFeature::HardLabel : QtypeFeature::TypeConfidence;

            std::vector<NormalizerSample> samples;
            std::size_t failed = 0;
            for (const auto& ex : split.holdout.examples()) {
                try {
                    const auto t = models.qtype->classify(ex.question);
                    const auto e = models.extractor->extract(ex.question, ex.document_text);
                    const double p_boolean = t.type == QuestionType::Boolean ? t.confidence : 1.0 - t.confidence;
                    samples.push_back({e.raw_score, t.type, ex.gold.answerable(), p_boolean});
                } catch (const std::exception& e) {
                    ++failed;
                    std::cerr << "warning: " << ex.question.id << ": " << e.what() << '\n';
                }
            }
            NormalizerFitLog log;
            const auto model = fit_normalizer(samples, cn_hyper, &log);
            save_normalizer(model, cn_out);
            std::cout << "fit on " << samples.size() << " of " << ds.size() << " examples (holdout "
                      << split.holdout.size() << ", " << failed << " failed)\n"
                      << "loss " << log.initial_loss << " -> " << log.final_loss << '\n'
                      << normalizer_to_text(model) << '\n';
        } else if (*predict) {
            const auto ds = pr_data.load();
            const auto r = predict_all(require_config(pr_config), ds, pr_threads);
            auto out = open_out(pr_out);
            write_predictions(out, r.answers);
            if (!pr_raw.empty()) {
                std::vector<RawPrediction> raw;
                for (const auto& p : r.raw)
                    if (p) raw.push_back(*p);
                auto rout = open_out(pr_raw);
                write_raw_predictions(rout, raw);
            }
            std::cout << "answered " << ds.size() << " examples (" << r.errors.size() << " failed)\n";
        } else if (*cal_thr) {
            const auto ds = ct_data.load();
            std::vector<FinalAnswer> preds;
            if (!ct_preds.empty()) preds = load_predictions(ct_preds);
            else preds = predict_all(require_config(ct_config), ds, 1).answers;
            const auto cal = calibrate_threshold(preds, ds.examples());
            std::cout << json{{"threshold", cal.threshold},
                              {"f1", cal.achieved_f1},
                              {"grid_points", cal.sweep_points}}
                             .dump()
                      << '\n';
        } else if (*evaluate) {
            if (ev_report == "footprint") {
                std::vector<FootprintConfig> configs;
                for (const auto& b : ev_bundles) {
                    const auto [name, dir] = split_pair(b, "--bundle");
                    const auto bundle = tf::load_bundle(dir);
                    configs.push_back({name,
                                       {{"base", tf::count_parameters(bundle, tf::ParamScope::Base)},
                                        {"adapters", tf::count_parameters(bundle, tf::ParamScope::Adapters)},
                                        {"heads", tf::count_parameters(bundle, tf::ParamScope::Heads)}}});
                }
                for (const auto& p : ev_params) {
                    const auto [name, count] = split_pair(p, "--params");
                    std::int64_t n = 0;
                    try {
                        std::size_t used = 0;
                        n = std::stoll(count, &used);
                        if (used != count.size() || n < 0) throw std::invalid_argument(count);
                    } catch (const std::exception&) {
                        throw ValidationError("--params count must be a non-negative integer: " + count);
                    }
                    configs.push_back({name, {{"total", n}}});
                }
                if (configs.empty()) throw ValidationError("footprint needs --bundle or --params");
                std::cout << render_footprint(footprint_report(configs));
                return 0;
            }
            if (ev_data.path.empty()) throw ValidationError("--dev is required for report " + ev_report);
            const auto ds = ev_data.load();
            const auto config = maybe_config(ev_config);
            double threshold = ev_threshold >= 0.0 ? ev_threshold : config ? config->threshold : 0.5;

            std::vector<FinalAnswer> preds;
            std::vector<RawPrediction> raw;
            if (!ev_preds.empty()) {
                preds = load_predictions(ev_preds);
                if (!ev_raw.empty()) raw = load_raw(ev_raw);
            } else {
                if (!config) throw ValidationError("give --predictions or a service config");
                const auto r = predict_all(*config, ds, 1);
                preds = r.answers;
                for (const auto& p : r.raw)
                    if (p) raw.push_back(*p);
            }
            check_aligned(preds, ds.examples());

            if (ev_report == "min-f1") {
                std::cout << render_min_f1(minimal_answer_f1(preds, ds.examples(), threshold), "overall");
                for (const auto& [lang, s] : minimal_answer_f1_by_language(preds, ds.examples(), threshold))
                    std::cout << render_min_f1(s, lang);
            } else if (ev_report == "confusion") {
                std::vector<GoldAnnotation> golds;
                for (const auto& e : ds.examples()) golds.push_back(e.gold);
                std::ostringstream title;
                title << "threshold " << threshold;
                std::cout << render_confusion(confusion_matrix(preds, golds, threshold), title.str());
            } else if (ev_report == "yesno") {
                std::vector<YesNo> gold;
                for (const auto& e : ds.examples())
                    if (e.gold.category == GoldCategory::YN) gold.push_back(*e.gold.yn_label);
                const auto y = yesno_f1(preds, ds.examples());
                const auto m = majority_baseline(gold);
                std::cout.setf(std::ios::fixed);
                std::cout.precision(1);
                std::cout << "gold YN questions: " << gold.size() << '\n'
                          << "system    F1 YES " << 100 * y.f1_yes << "  F1 NO " << 100 * y.f1_no << '\n'
                          << "majority  F1 YES " << 100 * m.f1_yes << "  F1 NO " << 100 * m.f1_no << '\n';
            } else {
                if (raw.empty()) throw ValidationError("histogram needs --raw or a service config");
                std::vector<GoldAnnotation> golds;
                for (const auto& p : raw) golds.push_back(ds.at(p.example_id).gold);
                std::cout << histogram_csv(score_histogram(raw, golds, ev_bins));
            }
        } else if (*serve) {
            const auto config = load_service_config(
                resolve_config_path(serve_config.empty() ? std::nullopt : std::optional<fs::path>(serve_config)));
            auto service = std::make_shared<const Service>(config);
            const auto health = service->health();
            std::cerr << health.dump() << '\n';

            sigset_t signals;
            sigemptyset(&signals);
            sigaddset(&signals, SIGINT);
            sigaddset(&signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &signals, nullptr);

            HttpServer server(service);
            const auto hp = parse_listen_address(config.listen_address);
            const int port = server.start(hp.host, hp.port);
            std::cerr << "listening on " << hp.host << ':' << port << " (" << to_string(config.mode) << ")\n";
            int sig = 0;
            sigwait(&signals, &sig);
            server.stop();
        } else if (*ask) {
            Question q;
            q.text = ask_question;
            q.language = ask_lang;
            const auto document = read_file(ask_doc);
            const auto body = ask_request(q, document);
            int status = 0;
            std::string reply;
            if (!ask_url.empty()) {
                httplib::Client cli(ask_url);
                auto res = cli.Post("/ask", body.dump(), "application/json");
                if (!res) throw PeerError("cannot reach " + ask_url + ": " + httplib::to_string(res.error()));
                status = res->status;
                reply = res->body;
            } else {
                const Service service(require_config(ask_config));
                const auto r = service.handle("POST", "/ask", body.dump());
                status = r.status;
                reply = r.body.dump();
            }
            std::cout << reply << '\n';
            if (status == 400 || status == 413) return kExitValidation;
            if (status != 200) return kExitRuntime;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const RangeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const LookupError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ConflictError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
