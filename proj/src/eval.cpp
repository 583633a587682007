#include "mousesim/eval.hpp"

#include "mousesim/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace mousesim::eval {

void ScoredSet::add(double score, ItemLabel label, ItemMeta m) {
    scores.push_back(score);
    labels.push_back(label);
    meta.push_back(std::move(m));
}

std::size_t ScoredSet::count(ItemLabel label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

namespace {

void require_both_classes(std::size_t genuine, std::size_t impostor) {
    if (genuine == 0 || impostor == 0)
        throw Error(ErrorCode::OneClassOnly, std::to_string(genuine) + " genuine, " + std::to_string(impostor) +
                                                 " impostor items");
}

void check_lengths(const ScoredSet& set) {
    if (set.scores.size() != set.labels.size())
        throw Error(ErrorCode::InvalidConfig, "scores and labels differ in length");
}

double auc_of(std::vector<double> genuine, std::vector<double> impostor) {
    require_both_classes(genuine.size(), impostor.size());
    std::sort(impostor.begin(), impostor.end());
    // Count in half-units so the sum stays an exact integer.
    std::uint64_t half_wins = 0;
    for (double g : genuine) {
        const auto lo = std::lower_bound(impostor.begin(), impostor.end(), g);
        const auto hi = std::upper_bound(lo, impostor.end(), g);
        half_wins += 2 * static_cast<std::uint64_t>(lo - impostor.begin()) + static_cast<std::uint64_t>(hi - lo);
    }
    return static_cast<double>(half_wins) /
           (2.0 * static_cast<double>(genuine.size()) * static_cast<double>(impostor.size()));
}

}  // namespace

Rates far_frr(const ScoredSet& set, double threshold) {
    check_lengths(set);
    std::size_t genuine = 0, impostor = 0, rejected_genuine = 0, accepted_impostor = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const bool accept = set.scores[i] >= threshold;
        if (set.labels[i] == ItemLabel::genuine) {
            ++genuine;
            if (!accept) ++rejected_genuine;
        } else {
            ++impostor;
            if (accept) ++accepted_impostor;
        }
    }
    require_both_classes(genuine, impostor);
    return {static_cast<double>(accepted_impostor) / static_cast<double>(impostor),
            static_cast<double>(rejected_genuine) / static_cast<double>(genuine)};
}

double roc_auc(const ScoredSet& set) {
    check_lengths(set);
    std::vector<double> genuine, impostor;
    for (std::size_t i = 0; i < set.size(); ++i)
        (set.labels[i] == ItemLabel::genuine ? genuine : impostor).push_back(set.scores[i]);
    return auc_of(std::move(genuine), std::move(impostor));
}

std::vector<CurvePoint> frr_far_curve(const ScoredSet& set) {
    std::vector<CurvePoint> curve;
    curve.reserve(kCurvePoints);
    for (std::size_t k = 0; k < kCurvePoints; ++k) {
        const double threshold = static_cast<double>(k) / 20.0;
        const Rates r = far_frr(set, threshold);
        curve.push_back({threshold, r.far, r.frr});
    }
    return curve;
}

std::map<std::string, double> per_user_auc(const ScoredSet& set, Role role) {
    check_lengths(set);
    if (set.meta.size() != set.size()) throw Error(ErrorCode::InvalidConfig, "scored set lacks per-item metadata");
    std::set<std::string> users;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (role == Role::as_target) users.insert(set.meta[i].target_user);
        else if (set.labels[i] == ItemLabel::impostor) users.insert(set.meta[i].source_user);
    }
    std::map<std::string, double> out;
    for (const auto& u : users) {
        std::vector<double> genuine, impostor;
        if (role == Role::as_target) {
            for (std::size_t i = 0; i < set.size(); ++i) {
                if (set.meta[i].target_user != u) continue;
                (set.labels[i] == ItemLabel::genuine ? genuine : impostor).push_back(set.scores[i]);
            }
        } else {
            std::set<std::string> targets;
            for (std::size_t i = 0; i < set.size(); ++i) {
                if (set.labels[i] == ItemLabel::impostor && set.meta[i].source_user == u) {
                    impostor.push_back(set.scores[i]);
                    targets.insert(set.meta[i].target_user);
                }
            }
            for (std::size_t i = 0; i < set.size(); ++i) {
                if (set.labels[i] == ItemLabel::genuine && targets.count(set.meta[i].target_user))
                    genuine.push_back(set.scores[i]);
            }
        }
        if (genuine.empty() || impostor.empty()) continue;
        out[u] = auc_of(std::move(genuine), std::move(impostor));
    }
    return out;
}

EvalReport evaluate(const ScoredSet& set, double threshold, Role role, std::string name) {
    EvalReport r;
    r.name = std::move(name);
    r.threshold = threshold;
    r.auc = roc_auc(set);
    const Rates rates = far_frr(set, threshold);
    r.far = rates.far;
    r.frr = rates.frr;
    r.curve = frr_far_curve(set);
    r.per_user_role = role == Role::as_attacker ? "as_attacker" : "as_target";
    r.per_user_auc = per_user_auc(set, role);
    r.n_genuine = set.count(ItemLabel::genuine);
    r.n_impostor = set.count(ItemLabel::impostor);
    return r;
}

EvalReport mean_report(const std::vector<EvalReport>& reports, std::string name) {
    if (reports.empty()) throw Error(ErrorCode::EmptyDataset, "no reports to average");
    EvalReport m;
    m.name = std::move(name);
    m.threshold = reports.front().threshold;
    m.per_user_role = reports.front().per_user_role;
    m.config_hash = reports.front().config_hash;
    m.curve = reports.front().curve;
    for (auto& p : m.curve) p.far = p.frr = 0.0;
    const double n = static_cast<double>(reports.size());
    std::map<std::string, std::pair<double, int>> users;
    bool timed = true;
    double train_time = 0.0;
    for (const auto& r : reports) {
        m.auc += r.auc / n;
        m.far += r.far / n;
        m.frr += r.frr / n;
        m.auth_time_s += r.auth_time_s / n;
        m.n_genuine += r.n_genuine;
        m.n_impostor += r.n_impostor;
        m.excluded += r.excluded;
        for (std::size_t k = 0; k < m.curve.size() && k < r.curve.size(); ++k) {
            m.curve[k].far += r.curve[k].far / n;
            m.curve[k].frr += r.curve[k].frr / n;
        }
        for (const auto& [u, auc] : r.per_user_auc) {
            users[u].first += auc;
            users[u].second += 1;
        }
        if (r.train_time_s) train_time += *r.train_time_s / n;
        else timed = false;
    }
    for (const auto& [u, acc] : users) m.per_user_auc[u] = acc.first / acc.second;
    if (timed) m.train_time_s = train_time;
    return m;
}

void to_json(nlohmann::json& j, const EvalReport& r) {
    j = nlohmann::json::object();
    j["format"] = "mousesim-report";
    j["version"] = 1;
    j["name"] = r.name;
    j["tags"] = r.tags;
    j["threshold"] = r.threshold;
    j["auc"] = r.auc;
    j["far"] = r.far;
    j["frr"] = r.frr;
    auto& curve = j["curve"] = nlohmann::json::array();
    for (const auto& p : r.curve) curve.push_back({{"threshold", p.threshold}, {"far", p.far}, {"frr", p.frr}});
    j["per_user_role"] = r.per_user_role;
    j["per_user_auc"] = r.per_user_auc;
    j["train_time_s"] = r.train_time_s ? nlohmann::json(*r.train_time_s) : nlohmann::json(nullptr);
    j["auth_time_s"] = r.auth_time_s;
    j["n_genuine"] = r.n_genuine;
    j["n_impostor"] = r.n_impostor;
    j["excluded"] = r.excluded;
    j["config_hash"] = r.config_hash;
}

void from_json(const nlohmann::json& j, EvalReport& r) {
    r.name = j.value("name", "");
    r.tags = j.value("tags", std::map<std::string, std::string>{});
    r.threshold = j.at("threshold").get<double>();
    r.auc = j.at("auc").get<double>();
    r.far = j.at("far").get<double>();
    r.frr = j.at("frr").get<double>();
    r.curve.clear();
    for (const auto& p : j.at("curve"))
        r.curve.push_back({p.at("threshold").get<double>(), p.at("far").get<double>(), p.at("frr").get<double>()});
    r.per_user_role = j.value("per_user_role", "as_attacker");
    r.per_user_auc = j.value("per_user_auc", std::map<std::string, double>{});
    if (j.contains("train_time_s") && !j["train_time_s"].is_null()) r.train_time_s = j["train_time_s"].get<double>();
    else r.train_time_s.reset();
    r.auth_time_s = j.value("auth_time_s", 0.0);
    r.n_genuine = j.value("n_genuine", std::size_t{0});
    r.n_impostor = j.value("n_impostor", std::size_t{0});
    r.excluded = j.value("excluded", std::size_t{0});
    r.config_hash = j.value("config_hash", "");
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    throw Error(ErrorCode::InvalidConfig, "unknown report format '" + name + "'");
}

void export_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    if (format == ReportFormat::json) {
        out << nlohmann::json(report).dump(2) << '\n';
    } else {
        char buf[160];
        out << "section,user_id,threshold,far,frr,auc\n";
        for (const auto& p : report.curve) {
            std::snprintf(buf, sizeof buf, "curve,,%.9g,%.9g,%.9g,\n", p.threshold, p.far, p.frr);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "summary,,%.9g,%.9g,%.9g,%.9g\n", report.threshold, report.far, report.frr,
                      report.auc);
        out << buf;
        for (const auto& [user, auc] : report.per_user_auc) {
            std::snprintf(buf, sizeof buf, ",,,%.9g\n", auc);
            out << "user," << user << buf;
        }
    }
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

EvalReport import_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    try {
        return nlohmann::json::parse(in).get<EvalReport>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoFailure, path.string() + ": " + e.what());
    }
}

void export_curve_svg(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    constexpr double W = 420, H = 320, M = 40;
    auto px = [&](double t) { return M + t * (W - 2 * M); };
    auto py = [&](double v) { return H - M - v * (H - 2 * M); };
    auto polyline = [&](bool far, const char* color) {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& p : report.curve) out << px(p.threshold) << ',' << py(far ? p.far : p.frr) << ' ';
        out << "\"/>\n";
    };
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    out << "<rect x=\"" << M << "\" y=\"" << M << "\" width=\"" << W - 2 * M << "\" height=\"" << H - 2 * M
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    polyline(true, "#c0392b");
    polyline(false, "#2471a3");
    out << "<text x=\"" << M << "\" y=\"" << M - 10 << "\" font-size=\"12\">" << report.name
        << " FAR (red) / FRR (blue) vs threshold, AUC=" << report.auc << "</text>\n";
    out << "</svg>\n";
}

}  // namespace mousesim::eval
