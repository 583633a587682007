#pragma once

// Independent reference implementations used as test oracles. They are kept
// deliberately naive: straight loops over the definitions, no shared code with
// the library beyond plain data types.

#include "mousesim/authn.hpp"
#include "mousesim/ingest.hpp"
#include "mousesim/preprocess.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

struct RefSegment {
    std::size_t start = 0;  // first event index in the session
    std::size_t count = 0;  // number of events
};

struct RefSample {
    std::vector<float> rows;
    std::size_t true_len = 0;
    std::vector<std::size_t> segment_ids;
    double effective_duration = 0.0;
};

struct RefResult {
    std::vector<RefSegment> raw_segments;
    std::vector<RefSegment> kept_segments;
    std::vector<RefSample> samples;
};

// Cut wherever the held state flips or the gap exceeds gap_cut, drop short and
// still segments, then slide a one-segment-stride window that accepts only
// whole segments.
inline RefResult reference_preprocess(const std::vector<mousesim::ingest::NormEvent>& ev,
                                      const mousesim::preprocess::PreprocessConfig& cfg) {
    RefResult out;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        bool cut = i == 0;
        if (i > 0 && ev[i].button_down != ev[i - 1].button_down) cut = true;
        if (i > 0 && ev[i].t - ev[i - 1].t > cfg.gap_cut) cut = true;
        if (cut)
            out.raw_segments.push_back({i, 1});
        else
            out.raw_segments.back().count += 1;
    }

    for (const auto& s : out.raw_segments) {
        if (s.count < cfg.min_seg_points) continue;
        double xmin = ev[s.start].x, xmax = xmin, ymin = ev[s.start].y, ymax = ymin;
        for (std::size_t i = s.start; i < s.start + s.count; ++i) {
            xmin = std::min(xmin, ev[i].x);
            xmax = std::max(xmax, ev[i].x);
            ymin = std::min(ymin, ev[i].y);
            ymax = std::max(ymax, ev[i].y);
        }
        const double xr = xmax - xmin, yr = ymax - ymin;
        bool drop;
        if (cfg.literal_filter)
            drop = xr > cfg.min_move_frac || yr > cfg.min_move_frac;
        else
            drop = xr < cfg.min_move_frac && yr < cfg.min_move_frac;
        if (!drop) out.kept_segments.push_back(s);
    }

    const auto& kept = out.kept_segments;
    for (std::size_t s = 0; s < kept.size(); ++s) {
        std::size_t rows = 0;
        std::vector<std::size_t> ids;
        for (std::size_t t = s; t < kept.size(); ++t) {
            const std::size_t r = kept[t].count - 1;
            if (rows + r > cfg.max_rows) break;
            rows += r;
            ids.push_back(t);
        }
        if (rows < cfg.min_sample_rows) continue;
        RefSample smp;
        smp.rows.assign(cfg.max_rows * 4, 0.0f);
        smp.true_len = rows;
        smp.segment_ids = ids;
        std::size_t row = 0;
        for (std::size_t t : ids) {
            const std::size_t a = kept[t].start, n = kept[t].count;
            for (std::size_t i = a; i + 1 < a + n; ++i) {
                const double dx = ev[i + 1].x - ev[i].x;
                const double dy = ev[i + 1].y - ev[i].y;
                const double dt = ev[i + 1].t - ev[i].t;
                smp.rows[row * 4 + 0] = static_cast<float>(dx);
                smp.rows[row * 4 + 1] = static_cast<float>(dy);
                smp.rows[row * 4 + 2] = static_cast<float>(dx / dt);
                smp.rows[row * 4 + 3] = static_cast<float>(dy / dt);
                ++row;
            }
            smp.effective_duration += ev[a + n - 1].t - ev[a].t;
        }
        out.samples.push_back(std::move(smp));
    }
    return out;
}

// P(genuine > impostor) + 0.5 P(tie) by comparing every pair.
inline double brute_auc(const std::vector<double>& genuine, const std::vector<double>& impostor) {
    double wins = 0.0;
    for (double g : genuine)
        for (double i : impostor) wins += g > i ? 1.0 : (g == i ? 0.5 : 0.0);
    return wins / (static_cast<double>(genuine.size()) * static_cast<double>(impostor.size()));
}

// The base-selection loss evaluated directly from its definition:
// (1/40) sum_{n<20} -[log f(S_j, P_n) + log(1 - f(S_j, N_n))], generalized to
// m probes with divisor 2m.
inline double brute_selection_loss(const std::function<double(std::size_t n, bool positive)>& f, std::size_t m) {
    double total = 0.0;
    for (std::size_t n = 0; n < m; ++n) {
        total += -std::log(f(n, true));
        total += -std::log(1.0 - f(n, false));
    }
    return total / static_cast<double>(2 * m);
}

// Smallest loss, lowest index on ties.
inline std::size_t brute_argmin(const std::vector<double>& losses) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < losses.size(); ++j)
        if (losses[j] < losses[best]) best = j;
    return best;
}

}  // namespace oracle
