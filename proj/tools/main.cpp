// mousesim: command-line front end for the trajectory similarity toolkit.

#include "cli_util.hpp"

#include "mousesim/authn.hpp"
#include "mousesim/error.hpp"
#include "mousesim/eval.hpp"
#include "mousesim/experiment.hpp"
#include "mousesim/ingest.hpp"
#include "mousesim/model.hpp"
#include "mousesim/pairs.hpp"
#include "mousesim/preprocess.hpp"
#include "mousesim/rng.hpp"
#include "mousesim/sample_store.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mousesim;

namespace {

constexpr int kExitRejected = 2;
constexpr int kExitInsufficient = 3;

bool g_verbose = false;

void log(const std::string& msg) {
    if (g_verbose) std::cerr << msg << '\n';
}

std::string_view module_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownSchema:
        case ErrorCode::EmptyLog:
        case ErrorCode::NonpositiveResolution:
            return "ingest";
        case ErrorCode::DegenerateSegment:
            return "preprocess";
        case ErrorCode::TooFewSamples:
        case ErrorCode::NoOtherUsers:
        case ErrorCode::TooFewUsers:
        case ErrorCode::TooFewInstances:
            return "pairs";
        case ErrorCode::ShapeMismatch:
        case ErrorCode::EmptyDataset:
        case ErrorCode::NonfiniteLoss:
        case ErrorCode::CorruptModelFile:
            return "model";
        case ErrorCode::NoValidationData:
        case ErrorCode::IndexOutOfRange:
        case ErrorCode::UnknownUser:
        case ErrorCode::NoQuerySamples:
        case ErrorCode::InsufficientData:
            return "authn";
        case ErrorCode::OneClassOnly:
            return "eval";
        case ErrorCode::InvalidConfig:
            return "config";
        case ErrorCode::MissingFile:
        case ErrorCode::IoFailure:
            return "io";
    }
    return "?";
}

// ---- shared option groups -------------------------------------------------

struct ModelOpts {
    bool fast = false;
    std::size_t epochs = 0, batch_size = 0, kernel = 0, hidden = 0;
    double learning_rate = 0.0, dropout = 0.0;
    std::vector<std::size_t> conv, head;
    bool swap_augment = false;
    CLI::Option *o_epochs{}, *o_batch{}, *o_kernel{}, *o_hidden{}, *o_lr{}, *o_dropout{}, *o_conv{}, *o_head{};

    void attach(CLI::App* app) {
        app->add_flag("--fast", fast, "Desk-scale preset: narrower network, 50 epochs at 1e-4, batch 8");
        o_epochs = app->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
        o_batch = app->add_option("--batch-size", batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
        o_lr = app->add_option("--lr", learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
        o_dropout = app->add_option("--dropout", dropout, "Head dropout rate")->check(CLI::Range(0.0, 0.999));
        o_kernel = app->add_option("--kernel", kernel, "Convolution kernel width")->check(CLI::PositiveNumber);
        o_hidden = app->add_option("--hidden", hidden, "Recurrent hidden units")->check(CLI::PositiveNumber);
        o_conv = app->add_option("--conv-channels", conv, "Three convolution widths")->expected(3);
        o_head = app->add_option("--head-widths", head, "Two hidden head widths")->expected(2);
        app->add_flag("--swap-augment", swap_augment, "Also train on every pair with operands swapped");
    }

    model::ModelConfig resolve(std::uint64_t seed) const {
        auto c = fast ? model::ModelConfig::fast() : model::ModelConfig::full();
        if (o_epochs->count()) c.epochs = epochs;
        if (o_batch->count()) c.batch_size = batch_size;
        if (o_lr->count()) c.learning_rate = learning_rate;
        if (o_dropout->count()) c.dropout = dropout;
        if (o_kernel->count()) c.conv_kernel = kernel;
        if (o_hidden->count()) c.recurrent_hidden = hidden;
        if (o_conv->count()) std::copy(conv.begin(), conv.end(), c.conv_channels.begin());
        if (o_head->count()) std::copy(head.begin(), head.end(), c.head_widths.begin());
        c.swap_augment = swap_augment;
        c.seed = seed;
        c.validate();
        return c;
    }
};

void attach_preprocess(CLI::App* app, preprocess::PreprocessConfig& cfg) {
    app->add_option("--gap-cut", cfg.gap_cut, "Cut a segment at gaps above this many seconds")->capture_default_str();
    app->add_option("--min-seg-points", cfg.min_seg_points, "Drop segments with fewer events")->capture_default_str();
    app->add_option("--min-move-frac", cfg.min_move_frac, "Movement filter bound, fraction of the screen")->capture_default_str();
    app->add_option("--max-rows", cfg.max_rows, "Sample length limit in feature rows")->capture_default_str();
    app->add_option("--min-sample-rows", cfg.min_sample_rows, "Smallest sample kept, in feature rows")->capture_default_str();
    app->add_flag("--literal-filter", cfg.literal_filter,
                  "Drop segments whose movement EXCEEDS min-move-frac (the literal reading)");
}

json preprocess_json(const preprocess::PreprocessConfig& c) {
    return {{"gap_cut", c.gap_cut},
            {"min_seg_points", c.min_seg_points},
            {"min_move_frac", c.min_move_frac},
            {"max_rows", c.max_rows},
            {"min_sample_rows", c.min_sample_rows},
            {"literal_filter", c.literal_filter}};
}

struct LogOpts {
    std::string schema = "canonical";
    std::vector<double> resolution{1920.0, 1080.0};

    void attach(CLI::App* app) {
        app->add_option("--schema", schema, "Event log layout: canonical, sapimouse or balabit")->capture_default_str();
        app->add_option("--resolution", resolution, "Screen width and height in pixels")->capture_default_str()->expected(2);
    }

    ingest::Session read(const fs::path& path) const {
        auto log = ingest::parse_event_log_file(path, ingest::parse_schema(schema));
        return ingest::normalize(std::move(log.events), resolution[0], resolution[1]);
    }
};

// Hashes of the files that make up a sample store.
json store_inputs(const fs::path& store) {
    return {{"samples.json", cli::git_blob_hash(store / "samples.json")},
            {"samples.bin", cli::git_blob_hash(store / "samples.bin")}};
}

// ---- synth ----------------------------------------------------------------

struct SynthCmd {
    std::size_t users = 0;
    std::uint64_t seed = 0;
    double duration = 240.0;
    std::size_t sessions = 1;
    std::string out;

    void attach(CLI::App& app) {
        auto* c = app.add_subcommand("synth", "Write a synthetic dataset (canonical CSV sessions + manifest)");
        c->add_option("--users", users, "Number of users")->required()->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
        c->add_option("--seed", seed, "Root seed")->capture_default_str();
        c->add_option("--duration", duration, "Seconds of activity per session")->capture_default_str()->check(CLI::PositiveNumber);
        c->add_option("--sessions", sessions, "Sessions per user")->capture_default_str()->check(CLI::PositiveNumber);
        c->add_option("--out", out, "Output directory")->required();
        c->callback([this] { run(); });
    }

    void run() const {
        const json cfg = {{"command", "synth"}, {"users", users}, {"seed", seed}, {"duration", duration}, {"sessions", sessions}};
        const std::string hash = cli::config_hash(cfg);
        const fs::path root(out);
        const auto population = ingest::synth_population(users, derive_seed(seed, "population"));
        const int width = static_cast<int>(std::to_string(users - 1).size());
        json manifest = {{"config_hash", hash}, {"seed", seed}, {"users", json::array()}};
        for (std::size_t u = 0; u < users; ++u) {
            char id[32];
            std::snprintf(id, sizeof id, "user%0*zu", width, u);
            json entry = {{"user_id", id}, {"resolution", {1920, 1080}}, {"schema", "canonical"},
                          {"source", "synthetic"}, {"params", population[u]}, {"sessions", json::array()}};
            for (std::size_t s = 0; s < sessions; ++s) {
                const auto events = ingest::synth_user(population[u], derive_seed(seed, std::string(id) + "/session/" + std::to_string(s)),
                                                       duration);
                const std::string rel = std::string(id) + "/session" + std::to_string(s) + ".csv";
                std::ostringstream csv;
                ingest::write_canonical_log(csv, events);
                cli::write_file(root / rel, csv.str());
                entry["sessions"].push_back(rel);
            }
            manifest["users"].push_back(std::move(entry));
            log("wrote " + std::string(id));
        }
        cli::write_json(root / "manifest.json", manifest);
        std::cout << "synthesized " << users << " users into " << root.string() << " (config " << hash << ")\n";
    }
};

// ---- ingest ---------------------------------------------------------------

struct IngestCmd {
    std::string manifest, out;

    void attach(CLI::App& app) {
        auto* c = app.add_subcommand("ingest", "Normalize a dataset into canonical logs on a 1920x1080 reference screen");
        c->add_option("--manifest", manifest, "Dataset manifest (JSON)")->required();
        c->add_option("--out", out, "Output directory")->required();
        c->callback([this] { run(); });
    }

    void run() const {
        const json cfg = {{"command", "ingest"}, {"manifest", cli::git_blob_hash(manifest)}};
        const std::string hash = cli::config_hash(cfg);
        ingest::LoadStats stats;
        const auto users = ingest::load_dataset(manifest, &stats);
        const fs::path root(out);
        json m = {{"config_hash", hash}, {"users", json::array()}};
        for (const auto& user : users) {
            json entry = {{"user_id", user.user_id}, {"resolution", {1920, 1080}}, {"schema", "canonical"},
                          {"source", ingest::to_string(user.source_tag)}, {"sessions", json::array()}};
            for (std::size_t s = 0; s < user.sessions.size(); ++s) {
                std::ostringstream csv;
                ingest::write_canonical_log(csv, ingest::to_raw(user.sessions[s], 1920.0, 1080.0));
                const std::string rel = user.user_id + "/session" + std::to_string(s) + ".csv";
                cli::write_file(root / rel, csv.str());
                entry["sessions"].push_back(rel);
            }
            m["users"].push_back(std::move(entry));
        }
        cli::write_json(root / "manifest.json", m);
        std::cout << json{{"users", stats.users}, {"sessions", stats.sessions}, {"events", stats.events},
                          {"malformed_lines", stats.malformed_lines}, {"empty_sessions", stats.empty_sessions},
                          {"config_hash", hash}}
                         .dump(2)
                  << '\n';
    }
};

// ---- preprocess -----------------------------------------------------------

struct PreprocessCmd {
    std::string manifest, out;
    preprocess::PreprocessConfig cfg;

    void attach(CLI::App& app) {
        auto* c = app.add_subcommand("preprocess", "Segment, filter and window a dataset into a sample store");
        c->add_option("--manifest", manifest, "Dataset manifest (JSON)")->required();
        c->add_option("--out", out, "Sample store directory")->required();
        attach_preprocess(c, cfg);
        c->callback([this] { run(); });
    }

    void run() const {
        cfg.validate();
        const json run_cfg = {{"command", "preprocess"}, {"preprocess", preprocess_json(cfg)},
                              {"manifest", cli::git_blob_hash(manifest)}};
        const std::string hash = cli::config_hash(run_cfg);
        ingest::LoadStats load;
        const auto users = ingest::load_dataset(manifest, &load);
        if (load.empty_sessions > 0)
            std::cerr << "warning: " << load.empty_sessions << " empty session file(s) skipped\n";

        SampleStore store(cfg.max_rows);
        preprocess::SessionStats total;
        json per_user = json::array();
        double duration_sum = 0.0;
        std::size_t n_samples = 0;
        for (const auto& user : users) {
            preprocess::SessionStats st;
            auto samples = preprocess::preprocess_user(user, cfg, &st);
            double dur = 0.0;
            for (const auto& s : samples) dur += s.effective_duration;
            duration_sum += dur;
            n_samples += samples.size();
            if (samples.empty()) std::cerr << "warning: user " << user.user_id << " yields no samples\n";
            per_user.push_back({{"user_id", user.user_id}, {"sessions", user.sessions.size()}, {"segments", st.segments},
                                {"dropped_short", st.filter.dropped_short},
                                {"dropped_movement", st.filter.dropped_movement}, {"kept", st.filter.kept},
                                {"samples", samples.size()},
                                {"mean_effective_duration_s", samples.empty() ? 0.0 : dur / samples.size()}});
            total.segments += st.segments;
            total.filter.dropped_short += st.filter.dropped_short;
            total.filter.dropped_movement += st.filter.dropped_movement;
            total.filter.kept += st.filter.kept;
            store.add_all(std::move(samples));
        }
        const json meta = {{"config_hash", hash}, {"preprocess", preprocess_json(cfg)}};
        store.save(out, meta.dump());
        const json stats = {
            {"config_hash", hash},
            {"literal_filter", cfg.literal_filter},
            {"segments", total.segments},
            {"dropped", {{"short", total.filter.dropped_short}, {"movement", total.filter.dropped_movement}}},
            {"kept_segments", total.filter.kept},
            {"samples", n_samples},
            {"mean_effective_duration_s", n_samples ? duration_sum / n_samples : 0.0},
            {"users", per_user}};
        cli::write_json(fs::path(out) / "stats.json", stats);
        std::cout << "segments " << total.segments << ", dropped (< " << cfg.min_seg_points
                  << " points) " << total.filter.dropped_short << ", dropped (movement"
                  << (cfg.literal_filter ? " above " : " below ") << cfg.min_move_frac << ") "
                  << total.filter.dropped_movement << ", samples " << n_samples << ", mean effective duration "
                  << (n_samples ? duration_sum / n_samples : 0.0) << " s\n";
    }
};

// ---- pairs ----------------------------------------------------------------

struct PairsCmd {
    std::string store_dir, out, protocol = "identity";
    std::uint64_t seed = 0;
    std::size_t k = 5;
    double val_fraction = 0.125;

    void attach(CLI::App& app) {
        auto* c = app.add_subcommand("pairs", "Generate labeled instances and the split plan");
        c->add_option("--store", store_dir, "Sample store directory")->required();
        c->add_option("--out", out, "Output directory")->required();
        c->add_option("--protocol", protocol, "identity or auth")->capture_default_str();
        c->add_option("--seed", seed, "Root seed")->required();
        c->add_option("--k", k, "Folds (identity protocol)")->capture_default_str();
        c->add_option("--val-fraction", val_fraction, "Tail share of training instances kept for validation")->capture_default_str();
        c->callback([this] { run(); });
    }

    void run() const {
        const auto proto = experiment::parse_protocol(protocol);
        const json cfg = {{"command", "pairs"}, {"protocol", experiment::to_string(proto)}, {"seed", seed}, {"k", k},
                          {"val_fraction", val_fraction}, {"inputs", store_inputs(store_dir)}};
        const std::string hash = cli::config_hash(cfg);
        const auto store = SampleStore::load(store_dir);
        const fs::path root(out);
        json plan = {{"config_hash", hash}, {"protocol", experiment::to_string(proto)}, {"seed", seed}};
        if (proto == experiment::Protocol::identity_kfold) {
            const auto folds = experiment::identity_folds(store, k, seed, val_fraction);
            plan["folds"] = json::array();
            for (std::size_t f = 0; f < folds.size(); ++f) {
                const fs::path dir = root / ("fold" + std::to_string(f));
                fs::create_directories(dir);
                pairs::save_instances(dir / "train.jsonl", folds[f].train);
                pairs::save_instances(dir / "val.jsonl", folds[f].val);
                pairs::save_instances(dir / "test.jsonl", folds[f].test);
                plan["folds"].push_back({{"train_users", folds[f].train_users}, {"test_users", folds[f].test_users},
                                         {"n_train", folds[f].train.size()}, {"n_val", folds[f].val.size()},
                                         {"n_test", folds[f].test.size()}});
            }
        } else {
            const auto parts = experiment::auth_partition(store, seed, val_fraction);
            std::vector<pairs::Instance> train, val, test;
            plan["users"] = json::array();
            for (const auto& p : parts) {
                train.insert(train.end(), p.train.begin(), p.train.end());
                val.insert(val.end(), p.val.begin(), p.val.end());
                test.insert(test.end(), p.test.begin(), p.test.end());
                plan["users"].push_back({{"user_id", p.user_id}, {"n_train", p.train.size()}, {"n_val", p.val.size()},
                                         {"n_test", p.test.size()}, {"train_samples", p.train_samples},
                                         {"val_samples", p.val_samples}});
            }
            fs::create_directories(root);
            pairs::save_instances(root / "train.jsonl", train);
            pairs::save_instances(root / "val.jsonl", val);
            pairs::save_instances(root / "test.jsonl", test);
        }
        cli::write_json(root / "plan.json", plan);
        std::cout << "wrote " << experiment::to_string(proto) << " instances to " << root.string() << " (config " << hash
                  << ")\n";
    }
};

// ---- train ----------------------------------------------------------------

struct TrainCmd {
    std::string store_dir, train_file, val_file, out;
    std::uint64_t seed = 0;
    bool quiet_val = false;
    ModelOpts model;

    void attach(CLI::App& app) {
        auto* c = app.add_subcommand("train", "Train the pair scorer on an instance file");
        c->add_option("--store", store_dir, "Sample store directory")->required();
        c->add_option("--train", train_file, "Training instances (JSON lines)")->required();
        c->add_option("--val", val_file, "Validation instances (JSON lines)");
        c->add_option("--out", out, "Model file to write")->required();
        c->add_option("--seed", seed, "Initialization and shuffling seed")->capture_default_str();
        c->add_flag("--final-val-only", quiet_val, "Validate after the last epoch only");
        model.attach(c);
        c->callback([this] { run(); });
    }

    void run() const {
        const auto mcfg = model.resolve(seed);
        json inputs = store_inputs(store_dir);
        inputs["train"] = cli::git_blob_hash(train_file);
        if (!val_file.empty()) inputs["val"] = cli::git_blob_hash(val_file);
        const json cfg = {{"command", "train"}, {"model", mcfg}, {"inputs", inputs}};
        const std::string hash = cli::config_hash(cfg);
        const auto store = SampleStore::load(store_dir);
        const auto train = pairs::load_instances(train_file);
        const auto val = val_file.empty() ? std::vector<pairs::Instance>{} : pairs::load_instances(val_file);
        model::TrainOptions opt;
        opt.validate_each_epoch = !quiet_val;
        opt.on_epoch = [&](const model::EpochRecord& e) {
            std::fprintf(stderr, "epoch %zu/%zu loss %.5f val_loss %.5f val_auc %.4f (%.1fs)\n", e.epoch, mcfg.epochs,
                         e.train_loss, e.val_loss, e.val_auc, e.wall_time_s);
        };
        const auto t0 = std::chrono::steady_clock::now();
        auto result = model::train(mcfg, train, val, store, opt);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.model.set_metadata(json{{"config_hash", hash}}.dump());
        result.model.save(out);
        cli::write_json(out + ".history.json",
                        {{"config_hash", hash}, {"train_time_s", wall}, {"history", result.history}});
        std::cout << "trained " << result.history.total_steps << " steps in " << wall << " s, final loss "
                  << result.history.epochs.back().train_loss << " -> " << out << '\n';
    }
};

// ---- select-bases ---------------------------------------------------------

struct SelectBasesCmd {
    std::string store_dir, model_file, train_file, val_file, out;
    std::uint64_t seed = 0;

    void attach(CLI::App& app) {
        auto* c = app.add_subcommand("select-bases", "Rank each user's training samples by validation loss");
        c->add_option("--store", store_dir, "Sample store directory")->required();
        c->add_option("--model", model_file, "Trained model file")->required();
        c->add_option("--train", train_file, "Training instances: their samples are the candidates")->required();
        c->add_option("--val", val_file, "Validation instances: their samples are the probes")->required();
        c->add_option("--seed", seed, "Probe-drawing seed")->capture_default_str();
        c->add_option("--out", out, "Base sample file (JSON)")->required();
        c->callback([this] { run(); });
    }

    void run() const {
        json inputs = store_inputs(store_dir);
        inputs["model"] = cli::git_blob_hash(model_file);
        inputs["train"] = cli::git_blob_hash(train_file);
        inputs["val"] = cli::git_blob_hash(val_file);
        const std::string hash = cli::config_hash({{"command", "select-bases"}, {"seed", seed}, {"inputs", inputs}});
        const auto store = SampleStore::load(store_dir);
        const auto net = model::EmbeddingModel::load(model_file);
        const auto train = experiment::owned_samples(pairs::load_instances(train_file));
        auto val = experiment::owned_samples(pairs::load_instances(val_file));
        for (auto& [uid, idx] : val) {
            auto it = train.find(uid);
            if (it == train.end()) continue;
            std::erase_if(idx, [&](std::size_t j) { return std::binary_search(it->second.begin(), it->second.end(), j); });
        }
        const authn::ModelScorer scorer(net);
        const auto bases = experiment::select_store_bases(scorer, store, train, val, seed);
        bases.save(out);
        cli::write_json(out + ".run.json", {{"config_hash", hash}, {"inputs", inputs}});
        std::cout << "ranked bases for " << bases.ranked.size() << " users -> " << out << '\n';
    }
};

// ---- experiment -----------------------------------------------------------

struct ExperimentCmd {
    std::string store_dir, out, protocol = "identity", sweep = "7", threshold = "default";
    std::uint64_t seed = 0;
    std::size_t k = 5;
    double val_fraction = 0.125;
    bool csv = false, svg = false, save_models = false, final_val_only = false;
    ModelOpts model;

    void attach(CLI::App& app) {
        auto* c = app.add_subcommand("experiment", "Run a protocol end to end and write evaluation reports");
        c->add_option("--store", store_dir, "Sample store directory")->required();
        c->add_option("--out", out, "Report directory")->required();
        c->add_option("--seed", seed, "Root seed; every random choice derives from it")->required();
        c->add_option("--protocol", protocol, "identity (user-disjoint k-fold) or auth (per-user 80/20)")->capture_default_str();
        c->add_option("--k", k, "Folds for the identity protocol")->capture_default_str();
        c->add_option("--samp-n-sweep", sweep, "Comma-separated samp_n values (auth protocol)")->capture_default_str();
        c->add_option("--threshold", threshold, "Threshold preset name or value in [0,1]")->capture_default_str();
        c->add_option("--val-fraction", val_fraction, "Tail share of training instances kept for validation")->capture_default_str();
        c->add_flag("--csv", csv, "Also write CSV reports");
        c->add_flag("--svg", svg, "Also write FRR-FAR curve plots");
        c->add_flag("--save-models", save_models, "Keep the trained model of every run");
        c->add_flag("--final-val-only", final_val_only, "Validate after the last epoch only");
        model.attach(c);
        c->callback([this] { run(); });
    }

    void run() const {
        experiment::ExperimentConfig cfg;
        cfg.protocol = experiment::parse_protocol(protocol);
        cfg.k = k;
        cfg.samp_n_sweep = cli::parse_size_list(sweep);
        cfg.threshold = authn::resolve_threshold(threshold);
        cfg.val_fraction = val_fraction;
        cfg.validate_each_epoch = !final_val_only;
        cfg.model = model.resolve(seed);
        cfg.seed = seed;
        const json inputs = store_inputs(store_dir);
        const json run_cfg = {{"command", "experiment"}, {"experiment", cfg}, {"threshold_name", threshold},
                              {"inputs", inputs}};
        cfg.config_hash = cli::config_hash(run_cfg);
        cfg.validate();

        const auto store = SampleStore::load(store_dir);
        const fs::path root(out);
        fs::create_directories(root);
        const auto t0 = std::chrono::steady_clock::now();
        auto result = experiment::run_experiment(store, cfg, [](const std::string& m) { std::cerr << m << '\n'; });
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        json written = json::array();
        auto emit = [&](const eval::EvalReport& r) {
            eval::export_report(r, root / (r.name + ".json"), eval::ReportFormat::json);
            written.push_back(r.name + ".json");
            if (csv) eval::export_report(r, root / (r.name + ".csv"), eval::ReportFormat::csv);
            if (svg) eval::export_curve_svg(r, root / (r.name + ".svg"));
        };
        for (const auto& r : result.reports) emit(r);
        emit(result.aggregate);
        if (save_models) {
            for (std::size_t i = 0; i < result.models.size(); ++i) {
                result.models[i].set_metadata(json{{"config_hash", cfg.config_hash}}.dump());
                result.models[i].save(root / (result.runs[i].name + ".model"));
            }
            for (const auto& b : result.bases) b.save(root / "bases.json");
        }
        json runs = json::array();
        for (const auto& r : result.runs) runs.push_back(r);
        cli::write_json(root / "run_manifest.json",
                        {{"config_hash", cfg.config_hash}, {"config", run_cfg}, {"root_seed", seed},
                         {"inputs", inputs}, {"wall_time_s", wall}, {"runs", runs}, {"reports", written}});

        std::printf("%-22s %8s %8s %8s %9s\n", "report", "AUC", "FAR", "FRR", "excluded");
        for (const auto* r : [&] {
                 std::vector<const eval::EvalReport*> v;
                 for (const auto& x : result.reports) v.push_back(&x);
                 v.push_back(&result.aggregate);
                 return v;
             }())
            std::printf("%-22s %8.4f %8.4f %8.4f %9zu\n", r->name.c_str(), r->auc, r->far, r->frr, r->excluded);
        std::printf("config %s, %.1f s\n", cfg.config_hash.c_str(), wall);
    }
};

// ---- authenticate ---------------------------------------------------------

struct AuthenticateCmd {
    std::string model_file, bases_file, store_dir, user, threshold = "default";
    std::vector<std::string> logs;
    std::size_t samp_n = 7, start = 0;
    LogOpts log_opts;
    preprocess::PreprocessConfig pcfg;
    int* exit_code = nullptr;

    void attach(CLI::App& app, int& code) {
        exit_code = &code;
        auto* c = app.add_subcommand("authenticate", "Check a live session against a claimed user's base sample");
        c->add_option("--model", model_file, "Trained model file")->required();
        c->add_option("--bases", bases_file, "Base sample file")->required();
        c->add_option("--store", store_dir, "Sample store holding the enrolled base samples")->required();
        c->add_option("--user", user, "Claimed user id")->required();
        c->add_option("logs", logs, "Event log(s) of the session, in order")->required();
        c->add_option("--samp-n", samp_n, "Expanded samples to score")->capture_default_str()->check(CLI::PositiveNumber);
        c->add_option("--start", start, "Query sample to expand from")->capture_default_str();
        c->add_option("--threshold", threshold, "Threshold preset name or value in [0,1]")->capture_default_str();
        log_opts.attach(c);
        attach_preprocess(c, pcfg);
        c->callback([this] { run(); });
    }

    void run() const {
        json inputs = {{"model", cli::git_blob_hash(model_file)}, {"bases", cli::git_blob_hash(bases_file)}};
        for (const auto& l : logs) inputs["logs"].push_back(cli::git_blob_hash(l));
        const std::string hash = cli::config_hash({{"command", "authenticate"}, {"user", user}, {"samp_n", samp_n},
                                                    {"start", start}, {"threshold", threshold},
                                                    {"preprocess", preprocess_json(pcfg)}, {"inputs", inputs}});
        const auto net = model::EmbeddingModel::load(model_file);
        const auto bases = authn::BaseSampleSet::load(bases_file);
        const auto store = SampleStore::load(store_dir);
        std::vector<preprocess::Sample> samples;
        for (std::size_t s = 0; s < logs.size(); ++s) {
            auto part = preprocess::preprocess_session(log_opts.read(logs[s]), pcfg, "query", s);
            std::move(part.begin(), part.end(), std::back_inserter(samples));
        }
        authn::AuthRequest req;
        req.claimed_user = user;
        for (const auto& s : samples) req.query_samples.push_back(&s);
        req.start = start;
        req.samp_n = samp_n;
        req.threshold = authn::resolve_threshold(threshold);
        if (samples.empty()) throw Error(ErrorCode::NoQuerySamples, "session yields no samples; collect more movement");
        const authn::ModelScorer scorer(net);
        const auto v = authn::authenticate(scorer, bases, store, req);
        json out = v;
        out["claimed_user"] = user;
        out["config_hash"] = hash;
        std::cout << out.dump(2) << '\n';
        *exit_code = v.accepted ? 0 : kExitRejected;
    }
};

// ---- detect ---------------------------------------------------------------

struct DetectCmd {
    std::string model_file, record_a, record_b, threshold = "default";
    std::size_t k_pairs = 8;
    std::uint64_t seed = 0;
    LogOpts log_opts;
    preprocess::PreprocessConfig pcfg;
    int* exit_code = nullptr;

    void attach(CLI::App& app, int& code) {
        exit_code = &code;
        auto* c = app.add_subcommand("detect", "Decide whether two event logs come from the same person");
        c->add_option("--model", model_file, "Trained model file")->required();
        c->add_option("record_a", record_a, "First event log")->required();
        c->add_option("record_b", record_b, "Second event log")->required();
        c->add_option("--threshold", threshold, "Threshold preset name or value in [0,1]")->capture_default_str();
        c->add_option("--k-pairs", k_pairs, "Cross pairs to average")->capture_default_str()->check(CLI::PositiveNumber);
        c->add_option("--seed", seed, "Pair-drawing seed")->capture_default_str();
        log_opts.attach(c);
        attach_preprocess(c, pcfg);
        c->footer("Exit status: 0 consistent, 2 inconsistent, 3 not enough movement, 1 error.");
        c->callback([this] { run(); });
    }

    void run() const {
        const auto net = model::EmbeddingModel::load(model_file);
        const json inputs = {{"model", cli::git_blob_hash(model_file)}, {"a", cli::git_blob_hash(record_a)},
                             {"b", cli::git_blob_hash(record_b)}};
        const std::string hash = cli::config_hash({{"command", "detect"}, {"threshold", threshold}, {"k_pairs", k_pairs},
                                                    {"seed", seed}, {"preprocess", preprocess_json(pcfg)},
                                                    {"inputs", inputs}});
        const auto a = log_opts.read(record_a);
        const auto b = log_opts.read(record_b);
        const authn::ModelScorer scorer(net);
        const auto v = authn::detect_inconsistency(scorer, a, b, pcfg, authn::resolve_threshold(threshold), k_pairs, seed);
        json out = v;
        out["consistent"] = v.accepted;
        out["config_hash"] = hash;
        std::cout << out.dump(2) << '\n';
        *exit_code = v.accepted ? 0 : kExitRejected;
    }
};

// ---- report ---------------------------------------------------------------

struct ReportCmd {
    std::vector<std::string> files;
    std::string csv_dir, svg_dir;

    void attach(CLI::App& app) {
        auto* c = app.add_subcommand("report", "Summarize report files and convert them to CSV or SVG");
        c->add_option("reports", files, "Report JSON files")->required()->check(CLI::ExistingFile);
        c->add_option("--csv-dir", csv_dir, "Write <name>.csv for every report here");
        c->add_option("--svg-dir", svg_dir, "Write <name>.svg curve plots here");
        c->callback([this] { run(); });
    }

    void run() const {
        std::printf("%-22s %-28s %8s %8s %8s %6s %7s %7s %8s\n", "report", "tags", "AUC", "FAR", "FRR", "thr", "genuine",
                    "impost", "auth_s");
        if (!csv_dir.empty()) fs::create_directories(csv_dir);
        if (!svg_dir.empty()) fs::create_directories(svg_dir);
        for (const auto& f : files) {
            const auto r = eval::import_report(f);
            std::string tags;
            for (const auto& [k, v] : r.tags) tags += (tags.empty() ? "" : ",") + k + "=" + v;
            std::printf("%-22s %-28s %8.4f %8.4f %8.4f %6.3f %7zu %7zu %8.2f\n", r.name.c_str(), tags.c_str(), r.auc,
                        r.far, r.frr, r.threshold, r.n_genuine, r.n_impostor, r.auth_time_s);
            if (!csv_dir.empty()) eval::export_report(r, fs::path(csv_dir) / (r.name + ".csv"), eval::ReportFormat::csv);
            if (!svg_dir.empty()) eval::export_curve_svg(r, fs::path(svg_dir) / (r.name + ".svg"));
        }
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mousesim: mouse-trajectory similarity for authentication and identity-inconsistency checks"};
    app.set_config("--config", "", "Read options from an INI/TOML file (flags override it)");
    app.add_flag("-v,--verbose", g_verbose, "Progress messages on stderr");
    app.require_subcommand(1);

    int code = 0;
    SynthCmd synth;
    IngestCmd ingest_cmd;
    PreprocessCmd pre;
    PairsCmd pairs_cmd;
    TrainCmd train;
    SelectBasesCmd bases;
    ExperimentCmd exp;
    AuthenticateCmd auth;
    DetectCmd detect;
    ReportCmd report;
    synth.attach(app);
    ingest_cmd.attach(app);
    pre.attach(app);
    pairs_cmd.attach(app);
    train.attach(app);
    bases.attach(app);
    exp.attach(app);
    auth.attach(app, code);
    detect.attach(app, code);
    report.attach(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "mousesim: [" << module_of(e.code()) << "] " << e.what() << '\n';
        if (e.code() == ErrorCode::InsufficientData || e.code() == ErrorCode::NoQuerySamples) return kExitInsufficient;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "mousesim: " << e.what() << '\n';
        return 1;
    }
    return code;
}
