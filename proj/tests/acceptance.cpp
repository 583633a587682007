// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if any criterion fails. Pass criterion numbers as arguments to run a
// subset, e.g. `acceptance 1 4`.

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include "mousesim/authn.hpp"
#include "mousesim/error.hpp"
#include "mousesim/eval.hpp"
#include "mousesim/experiment.hpp"
#include "mousesim/ingest.hpp"
#include "mousesim/pairs.hpp"
#include "mousesim/preprocess.hpp"
#include "mousesim/sample_store.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace mousesim;

namespace {

enum class Outcome { pass, fail, skip };

struct Verdict {
    Outcome outcome = Outcome::fail;
    std::string detail;
};

Verdict pass(std::string d) { return {Outcome::pass, std::move(d)}; }
Verdict fail(std::string d) { return {Outcome::fail, std::move(d)}; }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Preprocessing matches the straight-line reference on 200 sessions.
Verdict preprocessing_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240601);
    std::size_t samples = 0, segments = 0;
    for (int trial = 0; trial < 200; ++trial) {
        preprocess::PreprocessConfig cfg;
        cfg.literal_filter = trial % 10 == 9;
        const auto session = fixtures::synth_session(rng.next_u64(), rng.uniform(20.0, 120.0), fixtures::random_params(rng));
        const auto ref = oracle::reference_preprocess(session, cfg);

        const auto raw = preprocess::segment_session(session, cfg);
        if (raw.size() != ref.raw_segments.size()) return fail("segment count differs in session " + std::to_string(trial));
        for (std::size_t s = 0; s < raw.size(); ++s)
            if (raw[s].start_index != ref.raw_segments[s].start || raw[s].events.size() != ref.raw_segments[s].count)
                return fail("segment boundary differs in session " + std::to_string(trial));
        const auto kept = preprocess::filter_segments(raw, cfg);
        if (kept.size() != ref.kept_segments.size()) return fail("kept segments differ in session " + std::to_string(trial));
        for (std::size_t s = 0; s < kept.size(); ++s)
            if (kept[s].start_index != ref.kept_segments[s].start)
                return fail("kept segment differs in session " + std::to_string(trial));

        const auto got = preprocess::preprocess_session(session, cfg, "u", 0);
        if (got.size() != ref.samples.size()) return fail("sample count differs in session " + std::to_string(trial));
        for (std::size_t i = 0; i < got.size(); ++i) {
            if (got[i].rows != ref.samples[i].rows || got[i].segment_ids != ref.samples[i].segment_ids ||
                got[i].true_len != ref.samples[i].true_len)
                return fail("sample matrix differs in session " + std::to_string(trial));
        }
        samples += got.size();
        segments += raw.size();
    }
    const double t = seconds_since(t0);
    if (t >= 60.0) return fail(fmt("took %.1f s", t));
    return pass(fmt("200 sessions, %.0f segments, %.0f samples identical", static_cast<double>(segments),
                    static_cast<double>(samples)));
}

// 2. Positive pairs follow the displayed set; odd counts stay in range.
Verdict pair_formula() {
    for (std::size_t n : {2, 4, 6, 100}) {
        std::vector<pairs::Instance> expected;
        for (std::size_t j = 0; j < n / 2; ++j)
            expected.push_back({{"u", j}, {"u", j + n / 2}, pairs::Label::same});
        if (pairs::positive_instances("u", n) != expected) return fail("n_s=" + std::to_string(n));
    }
    for (std::size_t n = 3; n <= 51; n += 2) {
        const auto inst = pairs::positive_instances("u", n);
        if (inst.size() != n / 2) return fail("count for n_s=" + std::to_string(n));
        std::set<std::size_t> used;
        for (const auto& i : inst) {
            if (i.a.index >= n || i.b.index >= n) return fail("out of range for n_s=" + std::to_string(n));
            used.insert(i.a.index);
            used.insert(i.b.index);
        }
        if (used.size() != 2 * inst.size()) return fail("reused sample for n_s=" + std::to_string(n));
    }
    return pass("n_s in {2,4,6,100} exact; odd 3..51 in range");
}

// 3. AUC matches all-pairs counting; curves are monotone.
Verdict metric_oracle() {
    Rng rng(31337);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        eval::ScoredSet set;
        std::vector<double> g, im;
        const std::size_t n = 2 + rng.index(99);
        const bool coarse = trial % 3 == 0;
        for (std::size_t i = 0; i < n; ++i) {
            double v = rng.uniform();
            if (coarse) v = std::round(v * 8.0) / 8.0;
            const bool genuine = i == 0 || (i != 1 && rng.index(2) == 0);
            set.add(v, genuine ? eval::ItemLabel::genuine : eval::ItemLabel::impostor);
            (genuine ? g : im).push_back(v);
        }
        worst = std::max(worst, std::abs(eval::roc_auc(set) - oracle::brute_auc(g, im)));
        const auto curve = eval::frr_far_curve(set);
        if (curve.size() != 21) return fail("curve size");
        for (std::size_t k = 1; k < curve.size(); ++k)
            if (curve[k].far > curve[k - 1].far || curve[k].frr < curve[k - 1].frr)
                return fail("curve not monotone in set " + std::to_string(trial));
    }
    if (worst > 1e-9) return fail(fmt("max |auc - oracle| = %.3g", worst));
    return pass(fmt("500 sets, max |auc - oracle| = %.3g, curves monotone", worst));
}

// 4. Analytic gradients match central differences.
Verdict gradient_check() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t params = 0;
    for (std::uint64_t seed : {42, 1, 2, 3, 4}) {
        const auto r = gradcheck::run(gradcheck::tiny_config(), seed);
        params = r.n_params;
        if (r.worst > 1e-4)
            return fail(fmt("seed %.0f: param %.0f relative error %.3g", static_cast<double>(seed),
                            static_cast<double>(r.worst_index), r.worst));
        worst = std::max(worst, r.worst);
    }
    const double t = seconds_since(t0);
    if (t >= 120.0) return fail(fmt("took %.1f s", t));
    return pass(fmt("%.0f params x 5 seeds, worst relative error %.3g", static_cast<double>(params), worst));
}

// 5. Base selection agrees with exhaustive evaluation of the loss.
Verdict base_selection_oracle() {
    using fixtures::index_of;
    using fixtures::user_of;
    Rng rng(5150);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t users = 2 + rng.index(5);
        std::vector<std::vector<preprocess::Sample>> train(users), val(users);
        std::vector<authn::UserSamples> tl, vl;
        for (std::size_t u = 0; u < users; ++u) {
            const std::size_t nt = 1 + rng.index(12), nv = 1 + rng.index(35);
            for (std::size_t j = 0; j < nt; ++j) train[u].push_back(fixtures::tagged_sample(u, j));
            for (std::size_t j = 0; j < nv; ++j) val[u].push_back(fixtures::tagged_sample(u, 500 + j));
        }
        for (std::size_t u = 0; u < users; ++u) {
            tl.push_back({"u" + std::to_string(u), {}});
            vl.push_back({"u" + std::to_string(u), {}});
            for (const auto& s : train[u]) tl.back().samples.push_back(&s);
            for (const auto& s : val[u]) vl.back().samples.push_back(&s);
        }
        const auto salt = rng.next_u64();
        auto f = [salt](const preprocess::Sample& a, const preprocess::Sample& b) {
            const auto h = splitmix64(salt ^ splitmix64(user_of(a) * 1009 + index_of(a)) ^
                                      (splitmix64(user_of(b) * 7919 + index_of(b)) << 1));
            // Coarse levels so ties between candidates actually occur.
            return 0.05 + 0.9 * static_cast<double>(h % 7) / 6.0;
        };
        const std::uint64_t seed = rng.next_u64();
        const auto bases = authn::select_base_samples(fixtures::FnScorer(f), tl, vl, seed);
        for (std::size_t u = 0; u < users; ++u) {
            const auto probes = authn::draw_selection_probes(vl, u, seed);
            std::vector<double> losses;
            for (const auto* c : tl[u].samples)
                losses.push_back(oracle::brute_selection_loss(
                    [&](std::size_t n, bool positive) {
                        const auto* other = positive ? vl[u].samples[probes.positives[n]]
                                                     : vl[probes.negatives[n].first].samples[probes.negatives[n].second];
                        return f(*c, *other);
                    },
                    probes.positives.size()));
            const auto best = oracle::brute_argmin(losses);
            const auto& top = bases.top(tl[u].user_id);
            if (top.index != best || std::abs(top.loss - losses[best]) > 1e-12)
                return fail("case " + std::to_string(trial) + " user " + std::to_string(u) + ": got " +
                            std::to_string(top.index) + ", oracle " + std::to_string(best));
        }
    }
    return pass("50 stub cases, argmin and loss match");
}

model::ModelConfig desk_model(std::uint64_t seed) {
    auto m = model::ModelConfig::fast();
    m.seed = seed;
    return m;
}

// 6. Unseen-user identity experiment on synthetic users.
Verdict identity_experiment() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto store = fixtures::synth_store(12, 7, 360.0);
    experiment::ExperimentConfig cfg;
    cfg.protocol = experiment::Protocol::identity_kfold;
    cfg.k = 3;
    cfg.seed = 1;
    cfg.validate_each_epoch = false;
    cfg.model = desk_model(1);
    const auto result = experiment::run_experiment(store, cfg);
    const double t = seconds_since(t0);
    std::string folds;
    for (const auto& r : result.reports) folds += fmt(" %.3f", r.auc);
    const std::string detail = fmt("12 users, 3-fold, fast preset: mean AUC %.4f in %.0f s; folds", result.aggregate.auc, t) + folds;
    if (result.aggregate.auc < 0.85 || t > 900.0) return fail(detail);
    return pass(detail);
}

experiment::ExperimentConfig auth_config() {
    experiment::ExperimentConfig cfg;
    cfg.protocol = experiment::Protocol::auth_temporal;
    cfg.samp_n_sweep = {1, 3};
    cfg.seed = 11;
    cfg.validate_each_epoch = false;
    cfg.model = desk_model(11);
    return cfg;
}

const SampleStore& auth_store() {
    static const SampleStore store = fixtures::synth_store(8, 23, 300.0);
    return store;
}

std::vector<std::string> dump_reports(const experiment::ExperimentResult& r) {
    std::vector<std::string> out;
    for (const auto& rep : r.reports) out.push_back(nlohmann::json(rep).dump(2));
    out.push_back(nlohmann::json(r.aggregate).dump(2));
    return out;
}

std::vector<std::string> first_auth_run;

// 7. More expanded samples do not hurt authentication.
Verdict auth_trend() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = experiment::run_experiment(auth_store(), auth_config());
    first_auth_run = dump_reports(result);
    double auc1 = -1, auc3 = -1;
    for (const auto& r : result.reports) {
        const auto it = r.tags.find("samp_n");
        if (it == r.tags.end()) continue;
        if (it->second == "1") auc1 = r.auc;
        if (it->second == "3") auc3 = r.auc;
    }
    if (auc1 < 0 || auc3 < 0) return fail("sweep reports missing");
    const std::string detail = fmt("AUC samp_n=1 %.4f, samp_n=3 %.4f (%.0f s)", auc1, auc3, seconds_since(t0));
    if (auc3 < auc1 - 0.01) return fail(detail);
    return pass(detail);
}

// 8. Reruns with the same root seed give byte-identical reports.
Verdict determinism() {
    if (first_auth_run.empty()) first_auth_run = dump_reports(experiment::run_experiment(auth_store(), auth_config()));
    const auto again = dump_reports(experiment::run_experiment(auth_store(), auth_config()));
    if (again != first_auth_run) return fail("authentication reports differ between runs");

    const auto store = fixtures::synth_store(4, 3, 120.0);
    experiment::ExperimentConfig cfg;
    cfg.k = 2;
    cfg.seed = 5;
    cfg.model = desk_model(5);
    cfg.model.epochs = 3;
    const auto a = dump_reports(experiment::run_experiment(store, cfg));
    const auto b = dump_reports(experiment::run_experiment(store, cfg));
    if (a != b) return fail("identity reports differ between runs");
    return pass(fmt("%.0f authentication and %.0f identity report files identical", static_cast<double>(again.size()),
                    static_cast<double>(a.size())));
}

// 9. Real datasets, when a manifest is supplied.
Verdict real_datasets() {
    const char* manifest = std::getenv("MOUSESIM_DATASET_MANIFEST");
    if (!manifest || !*manifest) return {Outcome::skip, "set MOUSESIM_DATASET_MANIFEST to run on real logs"};
    const auto users = ingest::load_dataset(manifest);
    const preprocess::PreprocessConfig pcfg;
    SampleStore store(pcfg.max_rows);
    double duration = 0.0;
    std::size_t n = 0;
    for (const auto& u : users)
        for (auto& s : preprocess::preprocess_user(u, pcfg)) {
            duration += s.effective_duration;
            ++n;
            store.add(std::move(s));
        }
    if (n == 0) return fail("no samples");
    const double mean_dur = duration / static_cast<double>(n);

    experiment::ExperimentConfig id;
    id.k = 5;
    id.seed = 1;
    id.model = model::ModelConfig::full();
    id.model.seed = 1;
    const double id_auc = experiment::run_experiment(store, id).aggregate.auc;

    experiment::ExperimentConfig au = id;
    au.protocol = experiment::Protocol::auth_temporal;
    au.samp_n_sweep = {7};
    const double au_auc = experiment::run_experiment(store, au).aggregate.auc;

    const bool ok = std::abs(id_auc - 0.943) <= 0.03 && std::abs(au_auc - 0.977) <= 0.03 &&
                    std::abs(mean_dur - 18.5) <= 0.2 * 18.5;
    const std::string detail = fmt("identity AUC %.4f, auth AUC %.4f, mean sample movement %.2f s", id_auc, au_auc, mean_dur);
    return ok ? pass(detail) : fail(detail);
}

struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "preprocessing oracle", preprocessing_oracle},
        {2, "pair formula", pair_formula},
        {3, "metric oracle", metric_oracle},
        {4, "gradient check", gradient_check},
        {5, "base-selection oracle", base_selection_oracle},
        {6, "synthetic identity experiment", identity_experiment},
        {7, "dynamic authentication trend", auth_trend},
        {8, "determinism", determinism},
        {9, "real datasets", real_datasets},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = fail(std::string("exception: ") + e.what());
        }
        const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
        std::printf("[%s] %d %s: %s (%.1f s)\n", tag, c.id, c.name, v.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        if (v.outcome == Outcome::fail) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
