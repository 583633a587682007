#include "mousesim/pairs.hpp"

#include "mousesim/error.hpp"
#include "mousesim/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace mousesim::pairs {

std::vector<Instance> positive_instances(const std::string& user_id, std::size_t n_samples) {
    if (n_samples < 2)
        throw Error(ErrorCode::TooFewSamples,
                    "user '" + user_id + "' has " + std::to_string(n_samples) + " samples, need 2");
    const std::size_t offset = (n_samples + 1) / 2;
    const std::size_t count = n_samples / 2;
    std::vector<Instance> out;
    out.reserve(count);
    for (std::size_t j = 0; j < count; ++j)
        out.push_back(Instance{{user_id, j}, {user_id, j + offset}, Label::same});
    return out;
}

std::vector<Instance> negative_instances(const std::vector<Instance>& positives,
                                         const std::vector<UserSampleCount>& pool, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Instance> out;
    out.reserve(positives.size());
    std::vector<const UserSampleCount*> others;
    for (const Instance& pos : positives) {
        others.clear();
        for (const auto& u : pool) {
            if (u.user_id != pos.a.user_id && u.samples > 0) others.push_back(&u);
        }
        if (others.empty())
            throw Error(ErrorCode::NoOtherUsers, "no other user with samples for '" + pos.a.user_id + "'");
        const UserSampleCount& partner = *others[rng.index(others.size())];
        out.push_back(Instance{pos.a, {partner.user_id, static_cast<std::size_t>(rng.index(partner.samples))},
                               Label::different});
    }
    return out;
}

std::vector<Instance> user_instances(const std::string& user_id, const std::vector<UserSampleCount>& pool,
                                     std::uint64_t seed) {
    std::size_t n = 0;
    for (const auto& u : pool) {
        if (u.user_id == user_id) n = u.samples;
    }
    const auto positives = positive_instances(user_id, n);
    const auto negatives = negative_instances(positives, pool, seed);
    std::vector<Instance> out;
    out.reserve(positives.size() * 2);
    for (std::size_t k = 0; k < positives.size(); ++k) {
        out.push_back(positives[k]);
        out.push_back(negatives[k]);
    }
    return out;
}

std::vector<UserInstances> build_instances(const std::vector<UserSampleCount>& users, std::uint64_t seed) {
    std::vector<UserInstances> out;
    for (const auto& u : users) {
        if (u.samples < 2) continue;
        out.push_back({u.user_id, user_instances(u.user_id, users, derive_seed(seed, "negatives/" + u.user_id))});
    }
    return out;
}

SplitPlan identity_kfold_split(const std::vector<std::string>& user_ids, std::size_t k, std::uint64_t seed) {
    if (k < 2 || user_ids.size() < k)
        throw Error(ErrorCode::TooFewUsers,
                    std::to_string(user_ids.size()) + " users for " + std::to_string(k) + " folds");
    std::vector<std::string> shuffled = user_ids;
    Rng rng(seed);
    rng.shuffle(shuffled);

    SplitPlan plan;
    plan.kind = SplitKind::identity_kfold;
    plan.seed = seed;
    const std::size_t base = shuffled.size() / k;
    const std::size_t extra = shuffled.size() % k;
    std::size_t begin = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t end = begin + base + (f < extra ? 1 : 0);
        Fold fold;
        for (std::size_t i = 0; i < shuffled.size(); ++i) {
            if (i >= begin && i < end) fold.test_users.push_back(shuffled[i]);
            else fold.train_users.push_back(shuffled[i]);
        }
        plan.folds.push_back(std::move(fold));
        begin = end;
    }
    return plan;
}

std::size_t train_count_for(std::size_t n, double train_fraction) {
    // Guard against 0.8 * 10 landing a hair above 8 in binary.
    return static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
}

SplitPlan auth_temporal_split(const std::vector<UserInstances>& per_user, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error(ErrorCode::InvalidConfig, "train_fraction must lie in (0, 1)");
    SplitPlan plan;
    plan.kind = SplitKind::auth_temporal;
    for (const auto& u : per_user) {
        const std::size_t n = u.instances.size();
        if (n < 5)
            throw Error(ErrorCode::TooFewInstances,
                        "user '" + u.user_id + "' has " + std::to_string(n) + " instances, need 5");
        plan.boundaries.push_back({u.user_id, n, train_count_for(n, train_fraction)});
    }
    return plan;
}

namespace {

std::string_view label_name(Label l) { return l == Label::same ? "same" : "different"; }

}  // namespace

void write_instances_jsonl(std::ostream& out, const std::vector<Instance>& instances) {
    for (const auto& inst : instances) {
        nlohmann::json j;
        j["a"] = {inst.a.user_id, inst.a.index};
        j["b"] = {inst.b.user_id, inst.b.index};
        j["label"] = label_name(inst.label);
        out << j.dump() << '\n';
    }
}

std::vector<Instance> read_instances_jsonl(std::istream& in) {
    std::vector<Instance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Instance inst;
            inst.a = {j.at("a").at(0).get<std::string>(), j.at("a").at(1).get<std::size_t>()};
            inst.b = {j.at("b").at(0).get<std::string>(), j.at("b").at(1).get<std::size_t>()};
            const auto label = j.at("label").get<std::string>();
            if (label == "same") inst.label = Label::same;
            else if (label == "different") inst.label = Label::different;
            else throw Error(ErrorCode::InvalidConfig, "bad label '" + label + "'");
            out.push_back(std::move(inst));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, "instance line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_instances(const std::filesystem::path& path, const std::vector<Instance>& instances) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    write_instances_jsonl(out, instances);
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::vector<Instance> load_instances(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    return read_instances_jsonl(in);
}

std::vector<Instance> flatten(const std::vector<UserInstances>& per_user) {
    std::vector<Instance> out;
    for (const auto& u : per_user) out.insert(out.end(), u.instances.begin(), u.instances.end());
    return out;
}

}  // namespace mousesim::pairs
