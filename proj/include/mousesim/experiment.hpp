#pragma once

#include "mousesim/authn.hpp"
#include "mousesim/eval.hpp"
#include "mousesim/model.hpp"
#include "mousesim/pairs.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace mousesim {
class SampleStore;
}

namespace mousesim::experiment {

enum class Protocol { identity_kfold, auth_temporal };

Protocol parse_protocol(const std::string& name);
std::string to_string(Protocol p);

struct ExperimentConfig {
    Protocol protocol = Protocol::identity_kfold;
    std::size_t k = 5;
    std::vector<std::size_t> samp_n_sweep{7};
    double threshold = 0.5;
    // Share of each user's training instances (tail) held out as validation.
    double val_fraction = 0.125;
    bool validate_each_epoch = true;
    model::ModelConfig model;
    std::uint64_t seed = 0;
    std::string config_hash;

    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);

// Train/validation/test instances of one user under the temporal split, plus
// the user's own samples each part touches.
struct UserPartition {
    std::string user_id;
    std::vector<pairs::Instance> train, val, test;
    std::vector<std::size_t> train_samples, val_samples;
};

// Temporal 80/20 split of every user's instances; the pairing seed is derived
// from `root_seed`.
std::vector<UserPartition> auth_partition(const SampleStore& store, std::uint64_t root_seed, double val_fraction);

struct FoldInstances {
    std::vector<std::string> train_users, test_users;
    std::vector<pairs::Instance> train, val, test;
};

// User-disjoint folds with instances generated inside each side.
std::vector<FoldInstances> identity_folds(const SampleStore& store, std::size_t k, std::uint64_t root_seed,
                                          double val_fraction);

// Distinct sample indices of each instance owner (the user of `a`) that the
// instances reference, keyed and ordered by user.
std::map<std::string, std::vector<std::size_t>> owned_samples(const std::vector<pairs::Instance>& instances);

// Splits one user's interleaved instances into (train, val). The tail holds
// round(val_fraction * n / 2) positive/negative pairs, at least one pair when
// the user has two or more.
std::pair<std::vector<pairs::Instance>, std::vector<pairs::Instance>> split_validation(
    const std::vector<pairs::Instance>& instances, double val_fraction);

// Base selection over store samples: candidates are each user's `train`
// samples, probes come from `val`. Ranked indices are store indices.
authn::BaseSampleSet select_store_bases(const authn::PairScorer& scorer, const SampleStore& store,
                                        const std::map<std::string, std::vector<std::size_t>>& train,
                                        const std::map<std::string, std::vector<std::size_t>>& val,
                                        std::uint64_t seed);

struct RunRecord {
    std::string name;
    std::size_t n_train = 0, n_val = 0, n_test = 0;
    double train_wall_s = 0.0;
    double score_wall_s = 0.0;
    model::TrainHistory history;
};

void to_json(nlohmann::json& j, const RunRecord& r);

struct ExperimentResult {
    std::vector<eval::EvalReport> reports;  // per fold or condition
    eval::EvalReport aggregate;
    std::vector<RunRecord> runs;
    std::vector<model::EmbeddingModel> models;  // one per training run
    std::vector<authn::BaseSampleSet> bases;    // auth protocol only
};

using Progress = std::function<void(const std::string&)>;

ExperimentResult run_experiment(const SampleStore& store, const ExperimentConfig& cfg, const Progress& progress = {});

}  // namespace mousesim::experiment
