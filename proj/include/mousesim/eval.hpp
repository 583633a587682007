#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mousesim::eval {

enum class ItemLabel { genuine, impostor };

struct ItemMeta {
    std::string target_user;  // claimed identity (first record's owner)
    std::string source_user;  // who actually produced the probe
    std::size_t fold = 0;
    std::string condition;
};

struct ScoredSet {
    std::vector<double> scores;
    std::vector<ItemLabel> labels;
    std::vector<ItemMeta> meta;

    void add(double score, ItemLabel label, ItemMeta m = {});
    std::size_t size() const { return scores.size(); }
    std::size_t count(ItemLabel label) const;
};

struct Rates {
    double far = 0.0;
    double frr = 0.0;
};

// Accept iff score >= threshold.
Rates far_frr(const ScoredSet& set, double threshold);

// Mann-Whitney AUC: P(genuine > impostor) with ties worth one half.
double roc_auc(const ScoredSet& set);

struct CurvePoint {
    double threshold = 0.0;
    double far = 0.0;
    double frr = 0.0;

    bool operator==(const CurvePoint&) const = default;
};

inline constexpr std::size_t kCurvePoints = 21;

// FAR/FRR at thresholds 0, 0.05, ..., 1.
std::vector<CurvePoint> frr_far_curve(const ScoredSet& set);

enum class Role { as_attacker, as_target };

// AUC restricted to each user's role. Users for whom one class is missing are
// left out of the map.
std::map<std::string, double> per_user_auc(const ScoredSet& set, Role role);

struct EvalReport {
    std::string name;
    std::map<std::string, std::string> tags;
    double threshold = 0.5;
    double auc = 0.0;
    double far = 0.0;
    double frr = 0.0;
    std::vector<CurvePoint> curve;
    std::string per_user_role = "as_attacker";
    std::map<std::string, double> per_user_auc;
    std::optional<double> train_time_s;
    double auth_time_s = 0.0;
    std::size_t n_genuine = 0;
    std::size_t n_impostor = 0;
    std::size_t excluded = 0;
    std::string config_hash;

    bool operator==(const EvalReport&) const = default;
};

EvalReport evaluate(const ScoredSet& set, double threshold, Role role, std::string name = {});

// Pointwise mean of fold reports; per-user maps are merged (averaging users
// that appear in more than one report).
EvalReport mean_report(const std::vector<EvalReport>& reports, std::string name = "mean");

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

enum class ReportFormat { json, csv };

ReportFormat parse_report_format(const std::string& name);

// CSV layout (version 1), columns section,user_id,threshold,far,frr,auc:
// 21 "curve" rows, one "summary" row, then one "user" row per user.
void export_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format);
EvalReport import_report(const std::filesystem::path& path);

// Writes the FRR-FAR curve as a small standalone SVG line chart.
void export_curve_svg(const EvalReport& report, const std::filesystem::path& path);

}  // namespace mousesim::eval
