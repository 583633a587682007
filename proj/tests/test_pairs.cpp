#include "mousesim/error.hpp"
#include "mousesim/pairs.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace mousesim;
using namespace mousesim::pairs;

namespace {

std::vector<std::pair<std::size_t, std::size_t>> index_pairs(const std::vector<Instance>& inst) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& i : inst) out.emplace_back(i.a.index, i.b.index);
    return out;
}

std::vector<UserSampleCount> pool(std::initializer_list<std::pair<const char*, std::size_t>> users) {
    std::vector<UserSampleCount> out;
    for (const auto& [u, n] : users) out.push_back({u, n});
    return out;
}

}  // namespace

TEST_CASE("positive instances follow the half-offset set") {
    using P = std::vector<std::pair<std::size_t, std::size_t>>;
    CHECK(index_pairs(positive_instances("A", 6)) == P{{0, 3}, {1, 4}, {2, 5}});
    CHECK(index_pairs(positive_instances("A", 2)) == P{{0, 1}});
    CHECK(index_pairs(positive_instances("A", 7)) == P{{0, 4}, {1, 5}, {2, 6}});
    for (const auto& i : positive_instances("A", 6)) {
        CHECK(i.label == Label::same);
        CHECK(i.a.user_id == "A");
        CHECK(i.b.user_id == "A");
    }
    CHECK_THROWS_AS(positive_instances("A", 1), Error);
}

TEST_CASE("positive pairs never overlap in window start") {
    for (std::size_t n = 2; n <= 60; ++n)
        for (const auto& i : positive_instances("A", n)) {
            CHECK(i.b.index - i.a.index >= (n + 1) / 2);
            CHECK(i.b.index < n);
        }
}

TEST_CASE("negatives: one per positive, from other users") {
    const auto pos = positive_instances("A", 6);
    const auto neg = negative_instances(pos, pool({{"A", 6}, {"B", 4}, {"C", 9}}), 17);
    REQUIRE(neg.size() == 3);
    for (std::size_t k = 0; k < neg.size(); ++k) {
        CHECK(neg[k].label == Label::different);
        CHECK(neg[k].a == pos[k].a);
        CHECK(neg[k].b.user_id != "A");
    }
    CHECK(negative_instances(pos, pool({{"B", 4}, {"C", 9}}), 17) == neg);

    const auto forced = negative_instances(pos, pool({{"B", 4}}), 3);
    for (const auto& i : forced) {
        CHECK(i.b.user_id == "B");
        CHECK(i.b.index < 4);
    }
    CHECK_THROWS_AS(negative_instances(pos, pool({{"A", 6}}), 1), Error);
    CHECK_THROWS_AS(negative_instances(pos, pool({{"B", 0}}), 1), Error);
}

TEST_CASE("two-stage draw is uniform over users, not samples") {
    const auto pos = positive_instances("A", 4000);
    const auto neg = negative_instances(pos, pool({{"B", 1}, {"C", 1000}}), 5);
    const auto b = std::count_if(neg.begin(), neg.end(), [](const Instance& i) { return i.b.user_id == "B"; });
    CHECK(b > 850);
    CHECK(b < 1150);
}

TEST_CASE("user instances interleave and stay balanced") {
    const auto inst = user_instances("A", pool({{"A", 10}, {"B", 10}}), 1);
    REQUIRE(inst.size() == 10);
    for (std::size_t k = 0; k < inst.size(); ++k) CHECK(inst[k].label == (k % 2 == 0 ? Label::same : Label::different));
    const auto all = build_instances(pool({{"A", 10}, {"B", 7}, {"C", 1}}), 9);
    REQUIRE(all.size() == 2);
    std::size_t same = 0, diff = 0;
    for (const auto& u : all)
        for (const auto& i : u.instances) {
            (i.label == Label::same ? same : diff) += 1;
            CHECK_FALSE(i.a == i.b);
        }
    CHECK(same == diff);
    CHECK(build_instances(pool({{"A", 10}, {"B", 7}, {"C", 1}}), 9).front().instances == all.front().instances);
}

TEST_CASE("identity k-fold split") {
    std::vector<std::string> users;
    for (int i = 0; i < 10; ++i) users.push_back("u" + std::to_string(i));
    const auto plan = identity_kfold_split(users, 5, 42);
    REQUIRE(plan.folds.size() == 5);
    std::multiset<std::string> tested;
    for (const auto& f : plan.folds) {
        CHECK(f.test_users.size() == 2);
        CHECK(f.train_users.size() == 8);
        for (const auto& t : f.test_users) {
            CHECK(std::find(f.train_users.begin(), f.train_users.end(), t) == f.train_users.end());
            tested.insert(t);
        }
    }
    CHECK(tested == std::multiset<std::string>(users.begin(), users.end()));
    CHECK(identity_kfold_split(users, 5, 42).folds[3].test_users == plan.folds[3].test_users);

    std::vector<std::string> many;
    for (int i = 0; i < 130; ++i) many.push_back("u" + std::to_string(i));
    for (const auto& f : identity_kfold_split(many, 5, 1).folds) CHECK(f.test_users.size() == 26);
    CHECK_THROWS_AS(identity_kfold_split({"a", "b"}, 5, 1), Error);
}

TEST_CASE("temporal split") {
    CHECK(train_count_for(10, 0.8) == 8);
    CHECK(train_count_for(5, 0.8) == 4);
    CHECK(train_count_for(7, 0.8) == 6);

    const auto per_user = build_instances(pool({{"A", 20}, {"B", 10}}), 3);
    const auto plan = auth_temporal_split(per_user);
    REQUIRE(plan.boundaries.size() == 2);
    CHECK(plan.boundaries[0].n_instances == 20);
    CHECK(plan.boundaries[0].train_count == 16);
    CHECK(plan.boundaries[1].train_count == 8);

    std::vector<UserInstances> small{{"A", std::vector<Instance>(4)}};
    CHECK_THROWS_AS(auth_temporal_split(small), Error);
}

TEST_CASE("instance JSON lines round trip") {
    const auto inst = flatten(build_instances(pool({{"A", 6}, {"B", 6}}), 2));
    std::stringstream ss;
    write_instances_jsonl(ss, inst);
    CHECK(ss.str().substr(0, ss.str().find('\n')) == R"({"a":["A",0],"b":["A",3],"label":"same"})");
    CHECK(read_instances_jsonl(ss) == inst);
}
