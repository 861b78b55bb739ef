#pragma once

#include "fosst/fosst.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace fosst::eval {

/// Samples where truth component `index` is active and every other active
/// truth component lies more than 2 * delta_hz away.
inline std::vector<bool> separated_samples(std::span<const TruthComponent> truth, std::size_t index, double delta_hz) {
    const auto& f = truth[index].inst_freq;
    std::vector<bool> out(f.size(), false);
    for (std::size_t m = 0; m < f.size(); ++m) {
        if (std::isnan(f[m])) continue;
        bool ok = true;
        for (std::size_t j = 0; j < truth.size() && ok; ++j) {
            const double g = truth[j].inst_freq[m];
            if (j != index && !std::isnan(g) && !(std::abs(g - f[m]) > 2.0 * delta_hz)) ok = false;
        }
        out[m] = ok;
    }
    return out;
}

inline std::vector<bool> active_samples(const TruthComponent& c) {
    std::vector<bool> out(c.inst_freq.size());
    for (std::size_t m = 0; m < out.size(); ++m) out[m] = !std::isnan(c.inst_freq[m]);
    return out;
}

struct Match {
    std::size_t ridge = 0;
    double mae_bins = 0.0;
    double coverage = 0.0;  ///< fraction of the scored samples the ridge covers
};

/// The ridge with the lowest mean absolute frequency error (in bins) against
/// the truth IF over the scored samples it covers, among ridges covering at
/// least min_coverage of them.
inline std::optional<Match> match_truth(std::span<const Ridge> ridges, const TruthComponent& c,
                                        const std::vector<bool>& scored, const RidgeAxes& ax,
                                        double min_coverage = 0.5) {
    std::size_t total = 0;
    for (bool b : scored) total += b;
    if (total == 0) return std::nullopt;
    std::optional<Match> best;
    for (std::size_t h = 0; h < ridges.size(); ++h) {
        const auto& r = ridges[h];
        double err = 0.0;
        std::size_t n = 0;
        for (std::size_t m = r.m_start; m <= r.m_end() && m < scored.size(); ++m) {
            if (!scored[m]) continue;
            err += std::abs(r.bin_at(m) * ax.bin_width() - c.inst_freq[m]) / ax.bin_width();
            ++n;
        }
        const double coverage = static_cast<double>(n) / static_cast<double>(total);
        if (n == 0 || coverage < min_coverage) continue;
        const Match cand{h, err / static_cast<double>(n), coverage};
        if (!best || cand.mae_bins < best->mae_bins) best = cand;
    }
    return best;
}

}  // namespace fosst::eval
