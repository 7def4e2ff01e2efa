// Command-line pipeline: simulate -> fit -> diagnose -> summarize -> replicate.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nplcm/diagnostics.hpp"
#include "nplcm/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nplcm;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string file_hash(const std::string& path) {
    const std::string bytes = read_file(path);
    char buf[24];
    snprintf(buf, sizeof(buf), "%016llx",
             static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
    return buf;
}

// Every output directory carries a manifest sufficient to re-run the command.
void write_manifest(const std::string& dir, const std::string& command, const json& args,
                    const std::vector<std::string>& input_files) {
    json m;
    m["schema_version"] = 1;
    m["tool_version"] = kVersion;
    m["command"] = command;
    m["args"] = args;
    json inputs = json::object();
    for (const auto& f : input_files) inputs[f] = file_hash(f);
    m["inputs"] = inputs;
    write_file(dir + "/manifest.json", m.dump(2) + "\n");
}

ChainConfig chain_config_from_flags(int chains, int burnin, int keep, int thin, uint64_t seed) {
    ChainConfig cfg;
    cfg.n_chains = chains;
    cfg.n_burnin = burnin;
    cfg.n_keep = keep;
    cfg.thin = thin;
    cfg.seed = seed;
    return cfg;
}

Matrix load_grid(const std::string& path, const std::vector<std::string>& columns) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid file " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty grid file");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) header.push_back(f);
    }
    std::vector<int> idx;
    for (const auto& c : columns) {
        const auto it = std::find(header.begin(), header.end(), c);
        if (it == header.end()) throw std::runtime_error("grid file missing column " + c);
        idx.push_back(static_cast<int>(it - header.begin()));
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        std::vector<double> row;
        for (int i : idx) row.push_back(std::stod(fields.at(i)));
        rows.push_back(std::move(row));
    }
    Matrix out(static_cast<int>(rows.size()), static_cast<int>(columns.size()));
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < columns.size(); ++c) out(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    return out;
}

int cmd_simulate(const std::string& scenario, const std::string& truth_file, int grid, uint64_t seed,
                 const std::string& out_dir) {
    TruthConfig truth;
    if (!truth_file.empty()) {
        truth = truth_config_from_json(read_file(truth_file));
    } else {
        truth = scenario_by_name(scenario, grid);
    }
    truth.seed = seed;

    fs::create_directories(out_dir);
    const SimOutput sim = generate(truth);
    store_dataset(sim.dataset, out_dir + "/data.csv");
    store_truth_record(sim.truth, sim.dataset, out_dir + "/truth_record.csv");
    write_file(out_dir + "/truth_config.json", truth_config_to_json(truth) + "\n");
    store_model_config(default_fit_config(truth), out_dir + "/model.json");
    store_model_config(nocov_fit_config(truth), out_dir + "/model_nocov.json");

    json summary;
    summary["n_subjects"] = sim.dataset.n_subjects;
    summary["n_cases"] = sim.dataset.n_cases();
    summary["n_controls"] = sim.dataset.n_controls();
    summary["pi_star0"] = sim.truth.pi_star0;
    summary["pi_stratum0"] = sim.truth.pi_stratum0.v;
    summary["n_strata"] = truth.n_strata;
    write_file(out_dir + "/truth_summary.json", summary.dump(2) + "\n");

    json args;
    args["scenario"] = scenario;
    args["grid"] = grid;
    args["seed"] = seed;
    write_manifest(out_dir, "simulate", args, truth_file.empty()
                                                  ? std::vector<std::string>{}
                                                  : std::vector<std::string>{truth_file});
    std::cout << "simulated " << sim.dataset.n_subjects << " subjects (" << sim.dataset.n_cases()
              << " cases / " << sim.dataset.n_controls() << " controls) -> " << out_dir << "\n";
    return 0;
}

int cmd_fit(const std::string& data_file, const std::string& model_file,
            const std::string& priors_file, int chains, int burnin, int keep, int thin,
            uint64_t seed, int checkpoint_every, bool resume, const std::string& out_dir) {
    ModelConfig cfg = load_model_config(model_file);
    if (!priors_file.empty()) {
        const json pj = json::parse(read_file(priors_file));
        json merged = json::parse(model_config_to_json(cfg));
        merged["priors"] = pj.contains("priors") ? pj["priors"] : pj;
        cfg = model_config_from_json(merged.dump());
    }
    const Dataset ds = load_dataset(data_file, cfg.schema);
    std::cout << "data: " << ds.n_subjects << " subjects, " << ds.n_cases() << " cases, "
              << ds.n_controls() << " controls, " << ds.n_pathogens << " pathogens\n";

    const BoundModel bm = bind_model(ds, cfg.model, cfg.priors);

    fs::create_directories(out_dir);
    ChainConfig ccfg = chain_config_from_flags(chains, burnin, keep, thin, seed);
    ccfg.checkpoint_every = checkpoint_every;
    if (checkpoint_every > 0 || resume) ccfg.checkpoint_dir = out_dir + "/checkpoints";
    if (!resume && !ccfg.checkpoint_dir.empty() && fs::exists(ccfg.checkpoint_dir))
        fs::remove_all(ccfg.checkpoint_dir);

    std::mutex io_mutex;
    ccfg.progress = [&](int chain, int iter, int total) {
        if (iter % std::max(1, total / 10) != 0) return;
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << "chain " << chain << ": " << iter << "/" << total << "\n";
    };

    const DrawsStore draws = run_chains(bm, ds, ccfg);
    store_draws(draws, out_dir);

    // fit artifact: the bound model (knots, centering) travels with the draws
    json bound = json::parse(model_config_to_json(cfg));
    json xterms = json::array(), wterms = json::array();
    auto dump_terms = [](const BoundFormula& f) {
        json arr = json::array();
        for (const auto& t : f.terms) {
            json jt;
            jt["kind"] = t.spec.kind == TermSpec::Kind::Intercept ? "intercept"
                         : t.spec.kind == TermSpec::Kind::Linear  ? "linear"
                                                                  : "spline";
            jt["column"] = t.spec.column;
            if (t.spec.kind == TermSpec::Kind::Spline) {
                jt["df"] = t.spec.df;
                jt["mean"] = t.mean;
                jt["scale"] = t.scale;
                jt["knots"] = t.basis.knots;
                jt["col_means"] = t.basis.col_means;
            }
            arr.push_back(jt);
        }
        return arr;
    };
    bound["bound_x_terms"] = dump_terms(bm.x_formula);
    bound["bound_w_terms"] = dump_terms(bm.w_formula);
    write_file(out_dir + "/model.json", bound.dump(2) + "\n");

    json args;
    args["data"] = data_file;
    args["model"] = model_file;
    args["chains"] = chains;
    args["burnin"] = burnin;
    args["keep"] = keep;
    args["thin"] = thin;
    args["seed"] = seed;
    std::vector<std::string> inputs = {data_file, model_file};
    if (!priors_file.empty()) inputs.push_back(priors_file);
    write_manifest(out_dir, "fit", args, inputs);

    std::cout << "chains: " << draws.n_chains() << " x " << draws.n_draws() << " draws, "
              << draws.n_params() << " parameters -> " << out_dir << "\n";
    return 0;
}

// Summarize/diagnose helpers load the fit artifact directory.
struct FitArtifact {
    ModelConfig cfg;
    DrawsStore draws;
    std::string data_path;
};

FitArtifact load_fit(const std::string& dir) {
    FitArtifact fa;
    fa.cfg = model_config_from_json(read_file(dir + "/model.json"));
    fa.draws = load_draws(dir);
    const json m = json::parse(read_file(dir + "/manifest.json"));
    if (m.contains("args") && m["args"].contains("data")) fa.data_path = m["args"]["data"];
    return fa;
}

int cmd_diagnose(const std::string& draws_dir, const std::string& filter,
                 const std::string& out_file) {
    const DrawsStore draws = load_draws(draws_dir);
    const auto report = diagnostics_report(draws, filter);
    const std::string js = diagnostics_to_json(report);
    if (!out_file.empty()) write_file(out_file, js + "\n");
    std::cout << diagnostics_to_table(report);
    int flagged = 0;
    for (const auto& d : report) flagged += d.flagged;
    std::cout << report.size() << " parameters, " << flagged << " flagged\n";
    return 0;
}

int cmd_summarize(const std::string& draws_dir, const std::string& what,
                  const std::string& grid_file, const std::string& data_file,
                  const std::string& cases_arg, const std::string& out_file) {
    FitArtifact fa = load_fit(draws_dir);
    if (!data_file.empty()) fa.data_path = data_file;

    Dataset ds = load_dataset(fa.data_path, fa.cfg.schema);
    const BoundModel bm = bind_model(ds, fa.cfg.model, fa.cfg.priors);
    const auto& labels = fa.cfg.model.cause_spec.labels;

    std::string text;
    if (what == "pef") {
        const Matrix grid = load_grid(grid_file, fa.cfg.schema.x_columns);
        text = bands_to_csv(pef_curve(fa.draws, bm, grid), "cause", labels);
    } else if (what == "overall") {
        const OverallPef op = overall_pef(fa.draws, bm, ds);
        std::ostringstream os;
        os << "cause,mean,lo,hi\n";
        for (int l = 0; l < bm.n_causes; ++l)
            os << labels[l] << "," << op.mean[l] << "," << op.lo[l] << "," << op.hi[l] << "\n";
        text = os.str();
    } else if (what == "rates") {
        const Matrix xg = load_grid(grid_file, fa.cfg.schema.x_columns);
        const Matrix wg = load_grid(grid_file, fa.cfg.schema.w_columns);
        text = rate_bands_to_csv(fitted_positive_rate_curves(fa.draws, bm, xg, wg),
                                 ds.pathogen_names);
    } else if (what == "ief") {
        std::vector<int> case_rows;
        if (cases_arg.empty()) {
            for (int i = 0; i < ds.n_subjects; ++i)
                if (ds.y[i] == 1) case_rows.push_back(i);
        } else {
            std::stringstream ss(cases_arg);
            std::string tok;
            while (std::getline(ss, tok, ',')) case_rows.push_back(std::stoi(tok));
        }
        const Matrix ief = ief_summary(fa.draws, bm, ds, case_rows);
        std::ostringstream os;
        os << "case_row";
        for (const auto& lab : labels) os << "," << lab;
        os << "\n";
        for (int r = 0; r < ief.rows; ++r) {
            os << case_rows[r];
            for (int l = 0; l < ief.cols; ++l) os << "," << ief(r, l);
            os << "\n";
        }
        text = os.str();
    } else {
        throw std::runtime_error("unknown summary kind: " + what);
    }

    if (out_file.empty()) {
        std::cout << text;
    } else {
        write_file(out_file, text);
        std::cout << "wrote " << out_file << "\n";
    }
    return 0;
}

int cmd_replicate(const std::string& scenario, int grid, int reps, int parallel, uint64_t seed,
                  int chains, int burnin, int keep, bool compare_nocov, const std::string& out_dir) {
    const TruthConfig truth = scenario_by_name(scenario, grid);

    ReplicateOptions opt;
    opt.truth = truth;
    opt.fit = default_fit_config(truth);
    opt.chains = chain_config_from_flags(chains, burnin, keep, 1, 0);
    opt.reps = reps;
    opt.parallel = parallel;
    opt.seed = seed;
    opt.overall_targets = true;
    opt.stratum_targets = truth.date_window_days == 0;

    fs::create_directories(out_dir);
    std::mutex io_mutex;
    auto progress = [&](int rep) {
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << "replication " << rep + 1 << "/" << reps << " done\n";
    };

    const ReplicateResult res = run_replication_study(opt, progress);
    write_file(out_dir + "/metrics.json", metrics_to_json(res.metrics) + "\n");
    write_file(out_dir + "/metrics.csv", metrics_to_csv(res.metrics));

    if (compare_nocov) {
        ReplicateOptions nopt = opt;
        nopt.fit = nocov_fit_config(truth);
        const ReplicateResult nres = run_replication_study(nopt, progress);
        write_file(out_dir + "/metrics_nocov.json", metrics_to_json(nres.metrics) + "\n");
        write_file(out_dir + "/metrics_nocov.csv", metrics_to_csv(nres.metrics));
    }

    json args;
    args["scenario"] = scenario;
    args["grid"] = grid;
    args["reps"] = reps;
    args["seed"] = seed;
    args["chains"] = chains;
    args["burnin"] = burnin;
    args["keep"] = keep;
    write_manifest(out_dir, "replicate", args, {});
    std::cout << "replication metrics -> " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian nested partially-latent class models for case-control etiology data"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a dataset from a study design");
    std::string scenario, truth_file, out_dir;
    int grid = 0;
    uint64_t seed = 0;
    sim->add_option("--scenario", scenario,
                    "sim1 | sim2 | sim2_novalidity | seven_sites_strong | seven_sites_weak");
    sim->add_option("--truth", truth_file, "truth config JSON (alternative to --scenario)");
    sim->add_option("--grid", grid, "simulation II grid point (0..47)");
    sim->add_option("--seed", seed, "RNG seed");
    sim->add_option("--out", out_dir, "output directory")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "run the MCMC sampler on a dataset");
    std::string data_file, model_file, priors_file;
    int chains = 3, burnin = 10000, keep = 10000, thin = 1, checkpoint_every = 0;
    bool resume = false;
    fit->add_option("--data", data_file, "dataset CSV")->required();
    fit->add_option("--model", model_file, "model config JSON")->required();
    fit->add_option("--priors", priors_file, "priors JSON (overrides the model config block)");
    fit->add_option("--chains", chains, "number of chains");
    fit->add_option("--burnin", burnin, "burn-in iterations");
    fit->add_option("--keep", keep, "post burn-in iterations kept");
    fit->add_option("--thin", thin, "thinning interval");
    fit->add_option("--seed", seed, "RNG seed");
    fit->add_option("--checkpoint-every", checkpoint_every, "checkpoint interval (iterations)");
    fit->add_flag("--resume", resume, "resume from checkpoints in the output directory");
    fit->add_option("--out", out_dir, "output directory")->required();

    // diagnose
    auto* diag = app.add_subcommand("diagnose", "convergence diagnostics for a fit");
    std::string draws_dir, filter, out_file;
    diag->add_option("--draws", draws_dir, "fit output directory")->required();
    diag->add_option("--filter", filter, "substring filter on parameter names");
    diag->add_option("--out", out_file, "JSON report path");

    // summarize
    auto* summ = app.add_subcommand("summarize", "posterior functionals for a fit");
    std::string what, grid_file, cases_arg, sum_data;
    summ->add_option("--draws", draws_dir, "fit output directory")->required();
    summ->add_option("--what", what, "pef | overall | rates | ief")->required();
    summ->add_option("--grid", grid_file, "prediction grid CSV (pef, rates)");
    summ->add_option("--data", sum_data, "dataset CSV (defaults to the fit manifest entry)");
    summ->add_option("--cases", cases_arg, "comma-separated case rows (ief)");
    summ->add_option("--out", out_file, "output CSV path");

    // replicate
    auto* rep = app.add_subcommand("replicate", "seeded replication study with metrics");
    int reps = 30, parallel = 1;
    int rchains = 3, rburnin = 1500, rkeep = 1500;
    bool compare_nocov = false;
    rep->add_option("--scenario", scenario, "study design name")->required();
    rep->add_option("--grid", grid, "simulation II grid point");
    rep->add_option("--reps", reps, "number of replications");
    rep->add_option("--parallel", parallel, "concurrent replications");
    rep->add_option("--seed", seed, "base seed");
    rep->add_option("--chains", rchains, "chains per fit");
    rep->add_option("--burnin", rburnin, "burn-in per fit");
    rep->add_option("--keep", rkeep, "kept iterations per fit");
    rep->add_flag("--compare-nocov", compare_nocov, "also fit the covariate-free comparator");
    rep->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            if (scenario.empty() && truth_file.empty())
                throw std::runtime_error("simulate: need --scenario or --truth");
            return cmd_simulate(scenario, truth_file, grid, seed, out_dir);
        }
        if (fit->parsed())
            return cmd_fit(data_file, model_file, priors_file, chains, burnin, keep, thin, seed,
                           checkpoint_every, resume, out_dir);
        if (diag->parsed()) return cmd_diagnose(draws_dir, filter, out_file);
        if (summ->parsed())
            return cmd_summarize(draws_dir, what, grid_file, sum_data, cases_arg, out_file);
        if (rep->parsed())
            return cmd_replicate(scenario, grid, reps, parallel, seed, rchains, rburnin, rkeep,
                                 compare_nocov, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
