#include "mousesim/experiment.hpp"

#include "mousesim/error.hpp"
#include "mousesim/rng.hpp"
#include "mousesim/sample_store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace mousesim::experiment {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void say(const Progress& progress, const std::string& msg) {
    if (progress) progress(msg);
}

model::TrainOptions train_options(const ExperimentConfig& cfg, const Progress& progress, const std::string& run) {
    model::TrainOptions opt;
    opt.validate_each_epoch = cfg.validate_each_epoch;
    if (progress) {
        opt.on_epoch = [progress, run, total = cfg.model.epochs](const model::EpochRecord& e) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s epoch %zu/%zu loss %.4f val_loss %.4f val_auc %.3f (%.1fs)",
                          run.c_str(), e.epoch, total, e.train_loss, e.val_loss, e.val_auc, e.wall_time_s);
            progress(buf);
        };
    }
    return opt;
}

eval::ScoredSet scored_instances(const std::vector<pairs::Instance>& instances, const std::vector<double>& scores,
                                 std::size_t fold, const std::string& condition) {
    eval::ScoredSet set;
    for (std::size_t k = 0; k < instances.size(); ++k) {
        const auto& inst = instances[k];
        const bool same = inst.label == pairs::Label::same;
        set.add(scores[k], same ? eval::ItemLabel::genuine : eval::ItemLabel::impostor,
                {inst.a.user_id, inst.b.user_id, fold, condition});
    }
    return set;
}

ExperimentResult run_identity(const SampleStore& store, const ExperimentConfig& cfg, const Progress& progress) {
    ExperimentResult out;
    const auto folds = identity_folds(store, cfg.k, cfg.seed, cfg.val_fraction);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto& [train_users, test_users, train, val, test] = folds[f];
        const std::string tag = "fold" + std::to_string(f);
        if (test.empty()) throw Error(ErrorCode::EmptyDataset, tag + ": test users produced no instances");

        model::ModelConfig mcfg = cfg.model;
        mcfg.seed = derive_seed(cfg.seed, tag + "/model");
        RunRecord rec;
        rec.name = "fold-" + std::to_string(f);
        rec.n_train = train.size();
        rec.n_val = val.size();
        rec.n_test = test.size();
        say(progress, rec.name + ": " + std::to_string(train_users.size()) + " train users, " +
                          std::to_string(train.size()) + " train instances, " + std::to_string(test.size()) +
                          " test instances");
        auto t0 = std::chrono::steady_clock::now();
        auto trained = model::train(mcfg, train, val, store, train_options(cfg, progress, rec.name));
        rec.train_wall_s = seconds_since(t0);
        rec.history = trained.history;

        t0 = std::chrono::steady_clock::now();
        const auto scores = model::score_instances(trained.model, test, store);
        const auto set = scored_instances(test, scores, f, "identity");
        auto report = eval::evaluate(set, cfg.threshold, eval::Role::as_attacker, rec.name);
        rec.score_wall_s = seconds_since(t0);
        report.tags = {{"protocol", "identity"}, {"fold", std::to_string(f)}};
        report.config_hash = cfg.config_hash;
        say(progress, rec.name + ": AUC " + std::to_string(report.auc));
        out.reports.push_back(std::move(report));
        out.runs.push_back(std::move(rec));
        out.models.push_back(std::move(trained.model));
    }
    out.aggregate = eval::mean_report(out.reports, "mean");
    out.aggregate.tags = {{"protocol", "identity"}, {"aggregate", "folds"}};
    return out;
}

ExperimentResult run_auth(const SampleStore& store, const ExperimentConfig& cfg, const Progress& progress) {
    ExperimentResult out;
    const auto parts = auth_partition(store, cfg.seed, cfg.val_fraction);
    std::vector<pairs::Instance> train, val;
    std::map<std::string, std::vector<std::size_t>> train_samples, val_samples;
    std::size_t n_test = 0;
    for (const auto& p : parts) {
        train.insert(train.end(), p.train.begin(), p.train.end());
        val.insert(val.end(), p.val.begin(), p.val.end());
        train_samples[p.user_id] = p.train_samples;
        val_samples[p.user_id] = p.val_samples;
        n_test += p.test.size();
    }

    model::ModelConfig mcfg = cfg.model;
    mcfg.seed = derive_seed(cfg.seed, "auth/model");
    RunRecord rec;
    rec.name = "auth";
    rec.n_train = train.size();
    rec.n_val = val.size();
    rec.n_test = n_test;
    say(progress, "auth: " + std::to_string(parts.size()) + " users, " + std::to_string(train.size()) +
                      " train instances, " + std::to_string(n_test) + " test instances");
    auto t0 = std::chrono::steady_clock::now();
    auto trained = model::train(mcfg, train, val, store, train_options(cfg, progress, rec.name));
    rec.train_wall_s = seconds_since(t0);
    rec.history = trained.history;

    t0 = std::chrono::steady_clock::now();
    const authn::ModelScorer scorer(trained.model);
    auto bases = select_store_bases(scorer, store, train_samples, val_samples, derive_seed(cfg.seed, "auth/bases"));

    std::map<std::string, std::vector<const preprocess::Sample*>> lists;
    for (const auto& uid : store.users())
        for (const auto& s : store.samples_of(uid)) lists[uid].push_back(&s);

    for (std::size_t samp_n : cfg.samp_n_sweep) {
        const std::string cond = "samp_n=" + std::to_string(samp_n);
        eval::ScoredSet set;
        std::size_t excluded = 0;
        double movement = 0.0;
        for (const auto& p : parts) {
            for (const auto& inst : p.test) {
                const bool same = inst.label == pairs::Label::same;
                const auto& query = same ? inst.a : inst.b;
                authn::AuthRequest req;
                req.claimed_user = p.user_id;
                req.query_samples = lists.at(query.user_id);
                req.start = query.index;
                req.samp_n = samp_n;
                req.threshold = cfg.threshold;
                const auto v = authn::authenticate(scorer, bases, store, req);
                if (v.samples_used < samp_n) {
                    ++excluded;
                    continue;
                }
                movement += v.movement_s;
                set.add(v.score, same ? eval::ItemLabel::genuine : eval::ItemLabel::impostor,
                        {p.user_id, query.user_id, 0, cond});
            }
        }
        if (set.count(eval::ItemLabel::genuine) == 0 || set.count(eval::ItemLabel::impostor) == 0)
            throw Error(ErrorCode::OneClassOnly, cond + ": too few test items survive expansion");
        auto report = eval::evaluate(set, cfg.threshold, eval::Role::as_target, "auth-samp_n-" + std::to_string(samp_n));
        report.excluded = excluded;
        report.auth_time_s = movement / static_cast<double>(set.size());
        report.tags = {{"protocol", "auth"}, {"samp_n", std::to_string(samp_n)}};
        report.config_hash = cfg.config_hash;
        say(progress, cond + ": AUC " + std::to_string(report.auc) + ", excluded " + std::to_string(excluded));
        out.reports.push_back(std::move(report));
    }
    rec.score_wall_s = seconds_since(t0);
    out.aggregate = eval::mean_report(out.reports, "mean");
    out.aggregate.tags = {{"protocol", "auth"}, {"aggregate", "conditions"}};
    out.runs.push_back(std::move(rec));
    out.models.push_back(std::move(trained.model));
    out.bases.push_back(std::move(bases));
    return out;
}

}  // namespace

Protocol parse_protocol(const std::string& name) {
    if (name == "identity" || name == "identity_kfold") return Protocol::identity_kfold;
    if (name == "auth" || name == "auth_temporal") return Protocol::auth_temporal;
    throw Error(ErrorCode::InvalidConfig, "unknown protocol '" + name + "'");
}

std::string to_string(Protocol p) { return p == Protocol::identity_kfold ? "identity" : "auth"; }

void ExperimentConfig::validate() const {
    model.validate();
    if (protocol == Protocol::identity_kfold && k < 2) throw Error(ErrorCode::InvalidConfig, "k must be at least 2");
    if (samp_n_sweep.empty()) throw Error(ErrorCode::InvalidConfig, "samp_n sweep is empty");
    for (auto n : samp_n_sweep)
        if (n < 1) throw Error(ErrorCode::InvalidConfig, "samp_n must be at least 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::InvalidConfig, "threshold outside [0, 1]");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw Error(ErrorCode::InvalidConfig, "val_fraction outside [0, 1)");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json{{"protocol", to_string(c.protocol)},
                       {"k", c.k},
                       {"samp_n_sweep", c.samp_n_sweep},
                       {"threshold", c.threshold},
                       {"val_fraction", c.val_fraction},
                       {"validate_each_epoch", c.validate_each_epoch},
                       {"model", c.model},
                       {"seed", c.seed}};
}

std::pair<std::vector<pairs::Instance>, std::vector<pairs::Instance>> split_validation(
    const std::vector<pairs::Instance>& instances, double val_fraction) {
    const std::size_t n_pairs = instances.size() / 2;
    std::size_t val_pairs = 0;
    if (n_pairs >= 2 && val_fraction > 0.0)
        val_pairs = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(val_fraction * n_pairs)), 1,
                                            n_pairs - 1);
    const auto cut = instances.begin() + static_cast<std::ptrdiff_t>(instances.size() - 2 * val_pairs);
    return {std::vector<pairs::Instance>(instances.begin(), cut), std::vector<pairs::Instance>(cut, instances.end())};
}

std::map<std::string, std::vector<std::size_t>> owned_samples(const std::vector<pairs::Instance>& instances) {
    std::map<std::string, std::set<std::size_t>> acc;
    for (const auto& inst : instances) {
        auto& s = acc[inst.a.user_id];
        s.insert(inst.a.index);
        if (inst.b.user_id == inst.a.user_id) s.insert(inst.b.index);
    }
    std::map<std::string, std::vector<std::size_t>> out;
    for (auto& [uid, s] : acc) out[uid].assign(s.begin(), s.end());
    return out;
}

std::vector<UserPartition> auth_partition(const SampleStore& store, std::uint64_t root_seed, double val_fraction) {
    const auto per_user = pairs::build_instances(store.counts(), derive_seed(root_seed, "auth/pairs"));
    const auto plan = pairs::auth_temporal_split(per_user);
    std::vector<UserPartition> out;
    for (std::size_t u = 0; u < per_user.size(); ++u) {
        const auto& all = per_user[u].instances;
        const auto cut = all.begin() + static_cast<std::ptrdiff_t>(plan.boundaries[u].train_count);
        UserPartition p;
        p.user_id = per_user[u].user_id;
        std::tie(p.train, p.val) = split_validation(std::vector<pairs::Instance>(all.begin(), cut), val_fraction);
        p.test.assign(cut, all.end());
        auto tr = owned_samples(p.train);
        auto va = owned_samples(p.val);
        p.train_samples = tr[p.user_id];
        for (auto j : va[p.user_id])
            if (!std::binary_search(p.train_samples.begin(), p.train_samples.end(), j)) p.val_samples.push_back(j);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<FoldInstances> identity_folds(const SampleStore& store, std::size_t k, std::uint64_t root_seed,
                                          double val_fraction) {
    const auto plan = pairs::identity_kfold_split(store.users(), k, derive_seed(root_seed, "folds"));
    std::vector<FoldInstances> out;
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        const std::string tag = "fold" + std::to_string(f);
        FoldInstances fi;
        fi.train_users = plan.folds[f].train_users;
        fi.test_users = plan.folds[f].test_users;
        for (const auto& ui : pairs::build_instances(store.counts(fi.train_users), derive_seed(root_seed, tag + "/train"))) {
            auto [t, v] = split_validation(ui.instances, val_fraction);
            fi.train.insert(fi.train.end(), t.begin(), t.end());
            fi.val.insert(fi.val.end(), v.begin(), v.end());
        }
        fi.test = pairs::flatten(pairs::build_instances(store.counts(fi.test_users), derive_seed(root_seed, tag + "/test")));
        out.push_back(std::move(fi));
    }
    return out;
}

authn::BaseSampleSet select_store_bases(const authn::PairScorer& scorer, const SampleStore& store,
                                        const std::map<std::string, std::vector<std::size_t>>& train,
                                        const std::map<std::string, std::vector<std::size_t>>& val,
                                        std::uint64_t seed) {
    std::vector<authn::UserSamples> tr, va;
    for (const auto& [uid, idx] : train) {
        authn::UserSamples t{uid, {}}, v{uid, {}};
        for (auto j : idx) t.samples.push_back(&store.at({uid, j}));
        if (auto it = val.find(uid); it != val.end())
            for (auto j : it->second) v.samples.push_back(&store.at({uid, j}));
        tr.push_back(std::move(t));
        va.push_back(std::move(v));
    }
    auto bases = authn::select_base_samples(scorer, tr, va, seed);
    for (auto& [uid, list] : bases.ranked) {
        const auto& idx = train.at(uid);
        for (auto& r : list) r.index = idx[r.index];
    }
    return bases;
}

void to_json(nlohmann::json& j, const RunRecord& r) {
    j = nlohmann::json{{"name", r.name},
                       {"n_train", r.n_train},
                       {"n_val", r.n_val},
                       {"n_test", r.n_test},
                       {"train_wall_s", r.train_wall_s},
                       {"score_wall_s", r.score_wall_s},
                       {"history", r.history}};
}

ExperimentResult run_experiment(const SampleStore& store, const ExperimentConfig& cfg, const Progress& progress) {
    cfg.validate();
    if (store.size() == 0) throw Error(ErrorCode::EmptyDataset, "sample store is empty");
    return cfg.protocol == Protocol::identity_kfold ? run_identity(store, cfg, progress) : run_auth(store, cfg, progress);
}

}  // namespace mousesim::experiment
