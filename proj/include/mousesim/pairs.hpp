#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mousesim::pairs {

// A sample addressed by its owner and its position in that owner's ordered
// sample list.
struct SampleRef {
    std::string user_id;
    std::size_t index = 0;

    auto operator<=>(const SampleRef&) const = default;
};

enum class Label { same, different };

struct Instance {
    SampleRef a;
    SampleRef b;
    Label label = Label::same;

    bool operator==(const Instance&) const = default;
};

struct UserSampleCount {
    std::string user_id;
    std::size_t samples = 0;
};

// Pairs each sample with the one half a list away:
// (S_j, S_{j + ceil(n/2)}) for j < floor(n/2). Throws TooFewSamples for n < 2.
std::vector<Instance> positive_instances(const std::string& user_id, std::size_t n_samples);

// One negative per positive: the positive's first sample paired with a sample
// of another user, chosen by picking the user uniformly and then the sample
// uniformly. `pool` may list the positives' own user; it is excluded.
std::vector<Instance> negative_instances(const std::vector<Instance>& positives,
                                         const std::vector<UserSampleCount>& pool, std::uint64_t seed);

// Balanced instances for one user, interleaved as pos_0, neg_0, pos_1, neg_1,
// ... so any prefix stays balanced and ordered by sample index.
std::vector<Instance> user_instances(const std::string& user_id, const std::vector<UserSampleCount>& pool,
                                     std::uint64_t seed);

struct UserInstances {
    std::string user_id;
    std::vector<Instance> instances;
};

// Instances for every user in `users` that has at least two samples, with
// negatives drawn only from `users` (no pairs across a split boundary).
std::vector<UserInstances> build_instances(const std::vector<UserSampleCount>& users, std::uint64_t seed);

enum class SplitKind { identity_kfold, auth_temporal };

struct Fold {
    std::vector<std::string> train_users;
    std::vector<std::string> test_users;
};

struct UserBoundary {
    std::string user_id;
    std::size_t n_instances = 0;
    std::size_t train_count = 0;  // instances [0, train_count) train, the rest test
};

struct SplitPlan {
    SplitKind kind = SplitKind::identity_kfold;
    std::vector<Fold> folds;
    std::vector<UserBoundary> boundaries;
    std::uint64_t seed = 0;
};

SplitPlan identity_kfold_split(const std::vector<std::string>& user_ids, std::size_t k, std::uint64_t seed);

SplitPlan auth_temporal_split(const std::vector<UserInstances>& per_user, double train_fraction = 0.8);

std::size_t train_count_for(std::size_t n, double train_fraction);

void write_instances_jsonl(std::ostream& out, const std::vector<Instance>& instances);
std::vector<Instance> read_instances_jsonl(std::istream& in);
void save_instances(const std::filesystem::path& path, const std::vector<Instance>& instances);
std::vector<Instance> load_instances(const std::filesystem::path& path);

std::vector<Instance> flatten(const std::vector<UserInstances>& per_user);

}  // namespace mousesim::pairs
