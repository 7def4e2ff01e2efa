#include "nplcm/harness.hpp"

#include <atomic>
#include <thread>

namespace nplcm {

std::vector<TargetSummary> fit_and_score(const SimOutput& sim, const ModelConfig& fit,
                                         const ChainConfig& chains, bool overall_targets,
                                         bool stratum_targets) {
    const BoundModel bm = bind_model(sim.dataset, fit.model, fit.priors);
    const DrawsStore draws = run_chains(bm, sim.dataset, chains);

    const auto& labels = fit.model.cause_spec.labels;
    std::vector<TargetSummary> targets;

    if (overall_targets) {
        const OverallPef op = overall_pef(draws, bm, sim.dataset);
        const auto pmse = pmse_per_cause(draws, bm, sim.dataset, sim.truth);
        for (int l = 0; l < bm.n_causes; ++l) {
            TargetSummary t;
            t.name = "overall." + labels[l];
            t.post_mean = op.mean[l];
            t.lo = op.lo[l];
            t.hi = op.hi[l];
            t.truth = sim.truth.pi_star0[l];
            t.pmse = pmse[l];
            targets.push_back(std::move(t));
        }
    }

    if (stratum_targets) {
        const int n_strata = sim.truth.pi_stratum0.rows;
        const int n_cov = sim.dataset.x_design.cols;
        Matrix grid(n_strata, n_cov);
        for (int s = 0; s < n_strata; ++s)
            for (int c = 0; c + 1 < n_strata && c < n_cov; ++c) grid(s, c) = (s == c + 1) ? 1.0 : 0.0;
        const auto per_row = pef_draws_at(draws, bm, grid);
        for (int s = 0; s < n_strata; ++s) {
            for (int l = 0; l < bm.n_causes; ++l) {
                auto col = per_row[s].col(l);
                TargetSummary t;
                t.name = "site" + std::to_string(s + 1) + "." + labels[l];
                double sum = 0.0, sq = 0.0;
                const double truth = sim.truth.pi_stratum0(s, l);
                for (double v : col) {
                    sum += v;
                    sq += (v - truth) * (v - truth);
                }
                t.post_mean = sum / static_cast<double>(col.size());
                t.pmse = sq / static_cast<double>(col.size());
                t.lo = quantile_type7(col, 0.025);
                t.hi = quantile_type7(std::move(col), 0.975);
                t.truth = truth;
                targets.push_back(std::move(t));
            }
        }
    }
    return targets;
}

ReplicateResult run_replication_study(const ReplicateOptions& opt,
                                      const std::function<void(int rep)>& on_rep_done) {
    require(opt.reps >= 1, "replicate: need at least one replication");
    ReplicateResult result;
    result.per_rep.resize(opt.reps);

    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(opt.reps);
    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= opt.reps) return;
            try {
                TruthConfig truth = opt.truth;
                truth.seed = derive_seed(opt.seed, 2 * static_cast<uint64_t>(r));
                const SimOutput sim = generate(truth);
                ChainConfig chains = opt.chains;
                chains.seed = derive_seed(opt.seed, 2 * static_cast<uint64_t>(r) + 1);
                chains.store_latents = false;
                result.per_rep[r] =
                    fit_and_score(sim, opt.fit, chains, opt.overall_targets, opt.stratum_targets);
                if (on_rep_done) on_rep_done(r);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };

    const int n_workers = std::max(1, opt.parallel);
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    result.metrics = replication_metrics(result.per_rep);
    return result;
}

}  // namespace nplcm
