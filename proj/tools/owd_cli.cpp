#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "owd/datagen.hpp"
#include "owd/io.hpp"
#include "owd/parallel.hpp"
#include "owd/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) owd::raise(owd::Errc::io_error, "cannot write " + path.string());
    out << text;
}

json report_json(const owd::EvalReport& r) {
    return json{{"purity_cluster_mean", r.purity_cluster_mean},
                {"purity_sample_weighted", r.purity_sample_weighted},
                {"nmi", r.nmi},
                {"pct_clustered", r.pct_clustered},
                {"sources_discovered", r.sources_discovered},
                {"sources_total", r.sources_total},
                {"n_clusters", r.n_clusters}};
}

json iteration_json(const owd::IterationStats& s) {
    json j{{"iteration", s.iteration},
           {"n_clusters", s.n_clusters},
           {"clustered", s.clustered},
           {"total", s.total},
           {"pct_clustered", s.total > 0 ? static_cast<double>(s.clustered) / static_cast<double>(s.total) : 0.0},
           {"injected", s.injected},
           {"first_epoch_loss", s.first_epoch_loss},
           {"last_epoch_loss", s.last_epoch_loss}};
    if (s.metrics_discovered) j["metrics_discovered"] = report_json(*s.metrics_discovered);
    if (s.metrics_all) j["metrics_all"] = report_json(*s.metrics_all);
    return j;
}

// ---- simulate -------------------------------------------------------------

struct SimSpec {
    std::int64_t sources = 0;
    std::int64_t seen = 0;
    std::int64_t samples_per_source = 0;
    std::int64_t labeled_per_source = 0;
    std::int64_t d_content = 48;
    std::int64_t d_fingerprint = 16;
    double content_scale = 1.0;
    double noise_scale = 1.0;
    double margin = 10.0;
};

SimSpec parse_sim_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) owd::raise(owd::Errc::io_error, "cannot open " + path);
    SimSpec spec;
    std::map<std::string, std::function<void(const std::string&)>> keys{
        {"sources", [&](const std::string& v) { spec.sources = std::stoll(v); }},
        {"seen", [&](const std::string& v) { spec.seen = std::stoll(v); }},
        {"samples_per_source", [&](const std::string& v) { spec.samples_per_source = std::stoll(v); }},
        {"labeled_per_source", [&](const std::string& v) { spec.labeled_per_source = std::stoll(v); }},
        {"d_content", [&](const std::string& v) { spec.d_content = std::stoll(v); }},
        {"d_fingerprint", [&](const std::string& v) { spec.d_fingerprint = std::stoll(v); }},
        {"content_scale", [&](const std::string& v) { spec.content_scale = std::stod(v); }},
        {"noise_scale", [&](const std::string& v) { spec.noise_scale = std::stod(v); }},
        {"margin", [&](const std::string& v) { spec.margin = std::stod(v); }},
    };
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string key, eq, value;
        if (!(ls >> key)) continue;
        if (!(ls >> eq >> value) || eq != "=")
            owd::raise(owd::Errc::parse_error, path + " line " + std::to_string(line_no));
        const auto it = keys.find(key);
        if (it == keys.end()) owd::raise(owd::Errc::unknown_key, key);
        try {
            it->second(value);
        } catch (const std::exception&) {
            owd::raise(owd::Errc::type_error, key + " = " + value);
        }
    }
    return spec;
}

int cmd_simulate(const std::string& spec_path, std::uint64_t seed, const std::string& out_dir) {
    const auto spec = parse_sim_spec(spec_path);
    if (spec.sources < 2 || spec.seen < 1 || spec.seen > spec.sources)
        throw UsageError("need at least 2 sources and 1 <= seen <= sources");
    if (spec.samples_per_source < 1 || spec.labeled_per_source < 1)
        throw UsageError("samples_per_source and labeled_per_source must be positive");

    owd::Rng rng(seed);
    const auto specs = owd::make_source_specs(spec.sources, spec.seen,
                                              static_cast<std::int32_t>(spec.d_fingerprint),
                                              spec.margin, spec.content_scale, spec.noise_scale,
                                              spec.samples_per_source, rng);
    owd::GenConfig gc;
    gc.d_content = static_cast<std::int32_t>(spec.d_content);
    gc.margin = spec.margin;
    gc.labeled_per_source = spec.labeled_per_source;
    const auto ds = owd::generate(specs, gc, rng);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    owd::io::write_features((dir / "labeled_features.owft").string(), ds.labeled.features);
    owd::io::write_labels((dir / "labeled_labels.csv").string(), ds.labeled.labels);
    owd::io::write_features((dir / "discovery_features.owft").string(), ds.discovery);
    owd::io::write_labels((dir / "discovery_truth.csv").string(), ds.truth);

    std::ostringstream echo;
    echo << "sources = " << spec.sources << "\nseen = " << spec.seen
         << "\nsamples_per_source = " << spec.samples_per_source
         << "\nlabeled_per_source = " << spec.labeled_per_source
         << "\nd_content = " << spec.d_content << "\nd_fingerprint = " << spec.d_fingerprint
         << "\ncontent_scale = " << spec.content_scale << "\nnoise_scale = " << spec.noise_scale
         << "\nmargin = " << spec.margin << "\nseed = " << seed << "\n";
    write_text(dir / "spec_echo.txt", echo.str());

    std::cout << "wrote " << ds.labeled.features.n << " labeled and " << ds.discovery.n
              << " discovery samples to " << out_dir << "\n";
    return kExitOk;
}

// ---- run / online ---------------------------------------------------------

struct Injection {
    std::string path;
    std::int32_t iteration;  // inject before this iteration runs
};

Injection parse_injection(const std::string& arg) {
    const auto at = arg.rfind('@');
    if (at == std::string::npos) throw UsageError("--inject expects FILE@ITERATION");
    Injection inj;
    inj.path = arg.substr(0, at);
    try {
        inj.iteration = std::stoi(arg.substr(at + 1));
    } catch (const std::exception&) {
        throw UsageError("--inject expects FILE@ITERATION");
    }
    if (inj.iteration < 1) throw UsageError("iterations start at 1");
    return inj;
}

int cmd_run(const std::string& labeled_features, const std::string& labeled_labels,
            const std::string& discovery_features, const std::string& config_path,
            const std::string& out_dir, const std::string& truth_path,
            const std::vector<std::string>& inject_args, std::optional<std::uint64_t> seed,
            std::optional<int> workers) {
    std::vector<Injection> injections;
    for (const auto& arg : inject_args) injections.push_back(parse_injection(arg));

    owd::PipelineConfig cfg;
    if (!config_path.empty()) cfg = owd::io::read_config(config_path);
    if (seed) cfg.run.seed = *seed;
    if (workers) cfg.run.workers = *workers;
    else if (const char* env = std::getenv("OWD_WORKERS")) cfg.run.workers = std::atoi(env);

    owd::LabeledSet labeled;
    labeled.features = owd::io::read_features(labeled_features);
    labeled.labels = owd::io::read_labels(labeled_labels);
    std::int64_t max_class = -1;
    for (const auto l : labeled.labels) max_class = std::max(max_class, l);
    labeled.n_classes = max_class + 1;
    owd::validate(labeled);

    auto discovery = owd::io::read_features(discovery_features);

    std::vector<std::int64_t> truth;
    if (!truth_path.empty()) truth = owd::io::read_labels(truth_path);

    // injected files are loaded up front so format errors surface early
    std::map<std::int32_t, owd::FeatureMatrix> pending;
    std::map<std::int32_t, std::vector<std::int64_t>> pending_truth;
    for (const auto& inj : injections) {
        auto m = owd::io::read_features(inj.path);
        if (!truth_path.empty()) {
            const auto t = owd::io::read_labels(inj.path + ".truth.csv");
            if (static_cast<std::int64_t>(t.size()) != m.n)
                owd::raise(owd::Errc::length_mismatch, "injection truth != rows for " + inj.path);
            auto& bucket = pending_truth[inj.iteration];
            bucket.insert(bucket.end(), t.begin(), t.end());
        }
        auto& slot = pending[inj.iteration];
        if (slot.n == 0) slot = std::move(m);
        else {
            if (slot.d != m.d) owd::raise(owd::Errc::dimension_mismatch, "injection dims differ");
            slot.data.insert(slot.data.end(), m.data.begin(), m.data.end());
            slot.n += m.n;
        }
    }

    // an injection at iteration 1 is simply part of the initial discovery set
    if (const auto first = pending.find(1); first != pending.end()) {
        auto& m = first->second;
        if (m.d != discovery.d) owd::raise(owd::Errc::dimension_mismatch, "injection dims differ");
        discovery.data.insert(discovery.data.end(), m.data.begin(), m.data.end());
        discovery.n += m.n;
        if (!truth_path.empty()) {
            const auto& t = pending_truth[1];
            truth.insert(truth.end(), t.begin(), t.end());
        }
        pending.erase(first);
    }

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_text(dir / "config_effective.txt", owd::io::config_to_text(cfg));

    std::ofstream history(dir / "history.jsonl", std::ios::trunc);
    auto on_iteration = [&](const owd::PipelineState& state) {
        const auto& s = state.history.back();
        history << iteration_json(s).dump() << "\n";
        std::ostringstream name;
        name << "partition_iter_" << std::setw(3) << std::setfill('0') << s.iteration << ".csv";
        owd::io::write_partition((dir / name.str()).string(), state.partition);
        std::cout << "iteration " << s.iteration << ": clusters=" << s.n_clusters
                  << " clustered=" << s.clustered << "/" << s.total << "\n";
    };

    owd::set_workers(cfg.run.workers);
    owd::PipelineState state = owd::init_state(labeled, discovery, cfg);

    auto evaluate_last = [&](owd::PipelineState& st) {
        if (truth.empty()) return;
        if (static_cast<std::int64_t>(truth.size()) != st.discovery.n)
            owd::raise(owd::Errc::length_mismatch, "truth labels != discovery rows");
        auto& s = st.history.back();
        s.metrics_discovered = owd::evaluate(st.partition, truth);
        if (s.n_clusters > 0)
            s.metrics_all = owd::evaluate(
                owd::attribute_leftovers(st.refined, st.codes, st.partition, st.hasher), truth);
    };

    evaluate_last(state);
    on_iteration(state);

    const std::int32_t last_injection =
        pending.empty() ? 0 : pending.rbegin()->first;
    while (state.iteration < cfg.stop.max_iterations ||
           (!pending.empty() && state.iteration < last_injection)) {
        const auto next_iter = state.iteration + 1;
        const auto it = pending.find(next_iter);
        if (it != pending.end()) {
            owd::online_add(state, it->second, cfg);
            if (!truth.empty()) {
                const auto& t = pending_truth[next_iter];
                truth.insert(truth.end(), t.begin(), t.end());
            }
            pending.erase(it);
        } else if (state.discovery.n == 0 ||
                   static_cast<double>(state.undiscovered()) /
                           static_cast<double>(state.discovery.n) <
                       cfg.stop.delta) {
            if (pending.empty()) break;
            // keep iterating toward the next scheduled injection
        }
        owd::run_iteration(state, cfg);
        evaluate_last(state);
        on_iteration(state);
    }

    owd::io::write_partition((dir / "partition_final.csv").string(), state.partition);
    std::ostringstream report;
    report << "iterations = " << state.iteration << "\n";
    report << "n_clusters = " << state.partition.cluster_ids().size() << "\n";
    report << "clustered = " << state.partition.clustered_count() << "\n";
    report << "total = " << state.discovery.n << "\n";
    if (!state.partition.cluster_ids().empty()) {
        const auto full =
            owd::attribute_leftovers(state.refined, state.codes, state.partition, state.hasher);
        owd::io::write_partition((dir / "partition_final_attributed.csv").string(), full);
        if (!truth.empty()) {
            report << "[metrics_discovered]\n" << owd::io::report_kv(owd::evaluate(state.partition, truth));
            report << "[metrics_all]\n" << owd::io::report_kv(owd::evaluate(full, truth));
        }
    }
    write_text(dir / "report.txt", report.str());
    owd::io::write_network((dir / "network.ownt").string(), state.net);
    std::cout << "done: " << state.partition.cluster_ids().size() << " clusters after "
              << state.iteration << " iterations\n";
    return kExitOk;
}

// ---- eval / realfake --------------------------------------------------------

int cmd_eval(const std::string& pred_path, const std::string& truth_path, const std::string& mode) {
    if (mode != "both" && mode != "cluster-mean" && mode != "sample-weighted")
        throw UsageError("--mode must be cluster-mean, sample-weighted or both");
    const auto pred = owd::io::read_partition(pred_path);
    const auto truth = owd::io::read_labels(truth_path);
    if (pred.labels.size() != truth.size())
        owd::raise(owd::Errc::length_mismatch, "pred and truth lengths differ");
    const auto report = owd::evaluate(pred, truth);
    if (mode == "cluster-mean") {
        std::cout << "purity_cluster_mean = " << report.purity_cluster_mean << "\n";
    } else if (mode == "sample-weighted") {
        std::cout << "purity_sample_weighted = " << report.purity_sample_weighted << "\n";
    } else {
        std::cout << owd::io::report_kv(report);
    }
    return kExitOk;
}

int cmd_realfake(const std::string& partition_path, const std::string& preds_path,
                 const std::string& truth_path, const std::string& out_path) {
    const auto partition = owd::io::read_partition(partition_path);
    const auto raw_preds = owd::io::read_labels(preds_path);
    if (raw_preds.size() != partition.labels.size())
        owd::raise(owd::Errc::length_mismatch, "predictions and partition lengths differ");
    std::vector<std::uint8_t> preds(raw_preds.size());
    for (std::size_t i = 0; i < raw_preds.size(); ++i) {
        if (raw_preds[i] != 0 && raw_preds[i] != 1)
            owd::raise(owd::Errc::parse_error, "binary predictions must be 0 or 1");
        preds[i] = static_cast<std::uint8_t>(raw_preds[i]);
    }
    std::optional<std::vector<std::uint8_t>> truth;
    if (!truth_path.empty()) {
        const auto raw_truth = owd::io::read_labels(truth_path);
        if (raw_truth.size() != partition.labels.size())
            owd::raise(owd::Errc::length_mismatch, "truth and partition lengths differ");
        truth.emplace(raw_truth.size());
        for (std::size_t i = 0; i < raw_truth.size(); ++i) {
            if (raw_truth[i] != 0 && raw_truth[i] != 1)
                owd::raise(owd::Errc::parse_error, "truth labels must be 0 or 1");
            (*truth)[i] = static_cast<std::uint8_t>(raw_truth[i]);
        }
    }

    const auto vote = owd::real_fake_vote(partition, preds, truth ? &*truth : nullptr);
    for (std::size_t c = 0; c < vote.cluster_ids.size(); ++c)
        std::cout << "cluster " << vote.cluster_ids[c] << " -> "
                  << (vote.cluster_fake[c] ? "fake" : "real") << "\n";
    if (vote.accuracy) {
        std::int64_t raw_correct = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) raw_correct += (preds[i] == (*truth)[i]);
        std::cout << "raw_accuracy = "
                  << static_cast<double>(raw_correct) / static_cast<double>(preds.size()) << "\n";
        std::cout << "corrected_accuracy = " << *vote.accuracy << "\n";
    }
    if (!out_path.empty()) {
        std::vector<std::int64_t> corrected(vote.corrected.begin(), vote.corrected.end());
        owd::io::write_labels(out_path, corrected);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-world source discovery and attribution over feature vectors"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic source benchmark");
    std::string sim_spec, sim_out;
    std::uint64_t sim_seed = 0;
    sim->add_option("--spec", sim_spec, "Simulation spec file")->required();
    sim->add_option("--seed", sim_seed, "Random seed");
    sim->add_option("--out", sim_out, "Output directory")->required();

    // run / online share flags
    std::string labeled_features, labeled_labels, discovery_features, config_path, out_dir,
        truth_path;
    std::vector<std::string> inject_args;
    std::optional<std::uint64_t> run_seed;
    std::optional<int> run_workers;
    auto add_run_flags = [&](CLI::App* cmd, bool online) {
        cmd->add_option("--labeled-features", labeled_features)->required();
        cmd->add_option("--labeled-labels", labeled_labels)->required();
        cmd->add_option("--discovery-features", discovery_features)->required();
        cmd->add_option("--config", config_path, "Config file (defaults when omitted)");
        cmd->add_option("--out-dir", out_dir)->required();
        cmd->add_option("--truth-labels", truth_path, "Enables truth metrics");
        cmd->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { run_seed = v; });
        cmd->add_option_function<int>("--workers", [&](const int& v) { run_workers = v; });
        if (online)
            cmd->add_option("--inject", inject_args,
                            "FILE@ITERATION, processed by that iteration; with --truth-labels "
                            "a FILE.truth.csv must sit next to each injected file")
                ->expected(-1);
    };
    auto* runc = app.add_subcommand("run", "Run the discovery pipeline");
    add_run_flags(runc, false);
    auto* online = app.add_subcommand("online", "Run with mid-run source injections");
    add_run_flags(online, true);

    // eval
    auto* evalc = app.add_subcommand("eval", "Score a predicted partition against truth labels");
    std::string eval_pred, eval_truth, eval_mode = "both";
    evalc->add_option("--pred", eval_pred)->required();
    evalc->add_option("--truth", eval_truth)->required();
    evalc->add_option("--mode", eval_mode, "cluster-mean | sample-weighted | both");

    // realfake
    auto* rf = app.add_subcommand("realfake", "Cluster-vote per-sample real/fake predictions");
    std::string rf_partition, rf_preds, rf_truth, rf_out;
    rf->add_option("--partition", rf_partition)->required();
    rf->add_option("--binary-preds", rf_preds)->required();
    rf->add_option("--truth", rf_truth);
    rf->add_option("--out", rf_out, "Write corrected per-sample labels here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_spec, sim_seed, sim_out);
        if (runc->parsed() || online->parsed())
            return cmd_run(labeled_features, labeled_labels, discovery_features, config_path,
                           out_dir, truth_path, inject_args, run_seed, run_workers);
        if (evalc->parsed()) return cmd_eval(eval_pred, eval_truth, eval_mode);
        if (rf->parsed()) return cmd_realfake(rf_partition, rf_preds, rf_truth, rf_out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const owd::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
