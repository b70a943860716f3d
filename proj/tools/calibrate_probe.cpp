// Scratch probe: per-building class shares across the PGA grid under
// config overrides, for calibrating campaign defaults. Not installed.
#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "driftadapt/config.hpp"
#include "driftadapt/labels.hpp"
#include "driftadapt/rng.hpp"
#include "driftadapt/simulator.hpp"

using namespace driftadapt;

int main(int argc, char** argv) {
    std::size_t n_motions = 12;
    std::vector<std::string> overrides;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.find('=') == std::string::npos) {
            n_motions = static_cast<std::size_t>(std::atoi(argv[i]));
        } else {
            overrides.push_back(arg);
        }
    }
    const auto cfg = PipelineConfig::load(std::nullopt, overrides, std::nullopt);
    const auto campaign = cfg.campaign();
    const auto source = cfg.source_building();
    const auto target = cfg.target_building();

    struct Stats {
        std::array<std::array<int, 3>, 5> counts{};
    };
    Stats s_src, s_tgt;

    for (std::size_t m = 0; m < n_motions; ++m) {
        const auto seed = derive_seed(cfg.seed(), "motion", m);
        GroundMotion base = synthesize_motion(seed, campaign.duration, campaign.dt, campaign.spectral);
        const double pga = base.peak_ground_acceleration();
        for (std::size_t level = 0; level < campaign.target_pga.size(); ++level) {
            GroundMotion scaled = scale_motion(base, campaign.target_pga[level] / pga);
            const auto rec_s = simulate_response(source, scaled);
            const auto rec_t = simulate_response(target, scaled);
            for (std::size_t st = 1; st <= source.n_stories; ++st) {
                const auto r = peak_drift_ratio(rec_s, st, source.height[st - 1]);
                s_src.counts[st - 1][classify_drift(r.drift_ratio) - 1]++;
            }
            for (std::size_t st = 1; st <= target.n_stories; ++st) {
                const auto r = peak_drift_ratio(rec_t, st, target.height[st - 1]);
                s_tgt.counts[st - 1][classify_drift(r.drift_ratio) - 1]++;
            }
        }
    }

    auto dump = [&](const char* name, const Stats& st, std::size_t n_stories) {
        int tot[3] = {0, 0, 0};
        for (std::size_t i = 0; i < n_stories; ++i) {
            for (int k = 0; k < 3; ++k) tot[k] += st.counts[i][k];
        }
        const double n = tot[0] + tot[1] + tot[2];
        printf("%s pooled: %.3f / %.3f / %.3f | per story:", name, tot[0] / n, tot[1] / n,
               tot[2] / n);
        for (std::size_t i = 0; i < n_stories; ++i) {
            const double sn = st.counts[i][0] + st.counts[i][1] + st.counts[i][2];
            printf("  [%zu] %.2f/%.2f/%.2f", i + 1, st.counts[i][0] / sn, st.counts[i][1] / sn,
                   st.counts[i][2] / sn);
        }
        printf("\n");
    };
    dump("source", s_src, source.n_stories);
    dump("target", s_tgt, target.n_stories);
    return 0;
}
