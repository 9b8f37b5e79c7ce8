#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "semcom/checkpoint.hpp"
#include "semcom/experiment.hpp"
#include "semcom/random.hpp"

using namespace semcom;

namespace {

struct Flags {
    std::string config_file;
    std::string experiment, channel, snr_db, sensing_snr_db, nc, psr_grid, weights, dataset_path, subset, seed, out,
        workers, epochs, snr_mode;
    bool synthetic = false;
    std::vector<std::string> sets;
    std::string model;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config_file, "INI config file; flags override its values")->check(CLI::ExistingFile);
    app->add_option("--experiment", f.experiment,
                    "comma list of task-accuracy-vs-snr, reconstruction-vs-snr, sensing-vs-snr, accuracy-vs-psr");
    app->add_option("--channel", f.channel, "awgn or rayleigh");
    app->add_option("--snr-db", f.snr_db, "channel SNR grid in dB; the first value is the operating point");
    app->add_option("--sensing-snr-db", f.sensing_snr_db, "sensing SNR grid in dB");
    app->add_option("--nc", f.nc, "latent size grid; the first value is the operating point");
    app->add_option("--psr-grid", f.psr_grid, "perturbation-to-signal ratios in dB");
    app->add_option("--weights", f.weights, "w_sem,w_rec,w_sens");
    app->add_option("--dataset-path", f.dataset_path, "CIFAR-10 binary directory (default: $SEMCOM_DATASET)");
    app->add_flag("--synthetic", f.synthetic, "use the synthetic blob dataset");
    app->add_option("--subset", f.subset, "stratified training subset size (0 = all)");
    app->add_option("--seed", f.seed, "master seed");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--workers", f.workers, "worker threads for grid points");
    app->add_option("--epochs", f.epochs, "training epochs per model");
    app->add_option("--snr-mode", f.snr_mode, "matched or randomized");
    app->add_option("--set", f.sets, "extra key=value override, e.g. train.batch_size=32");
}

std::string first_of(const std::string& list) { return list.substr(0, list.find(',')); }

ExperimentConfig resolve(const Flags& f) {
    RawConfig raw;
    if (!f.config_file.empty()) overlay_config_file(f.config_file, raw);
    auto set = [&](const char* key, const std::string& v) {
        if (!v.empty()) raw[key] = v;
    };
    set("experiment", f.experiment);
    set("channel.kind", f.channel);
    if (!f.snr_db.empty()) {
        raw["grid.snr_db"] = f.snr_db;
        raw["channel.snr_db"] = first_of(f.snr_db);
    }
    if (!f.sensing_snr_db.empty()) {
        raw["grid.sensing_snr_db"] = f.sensing_snr_db;
        raw["sensing.snr_db"] = first_of(f.sensing_snr_db);
    }
    if (!f.nc.empty()) {
        raw["grid.n_c"] = f.nc;
        raw["model.n_c"] = first_of(f.nc);
    }
    set("grid.psr_db", f.psr_grid);
    set("train.weights", f.weights);
    set("data.path", f.dataset_path);
    if (f.synthetic) raw["data.synthetic"] = "true";
    set("data.subset", f.subset);
    set("seed", f.seed);
    set("out", f.out);
    set("workers", f.workers);
    set("train.epochs", f.epochs);
    set("train.snr_mode", f.snr_mode);
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        raw[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (raw["data.path"].empty()) {
        if (const char* env = std::getenv("SEMCOM_DATASET")) raw["data.path"] = env;
    }
    return resolve_config(raw);
}

void write_resolved(const ExperimentConfig& config) {
    std::filesystem::create_directories(config.out);
    std::ofstream(config.out / "resolved.cfg", std::ios::binary) << render_config(config);
}

MetricsRow to_row(const MetricsRecord& m, const ExperimentConfig& config, std::size_t n_c) {
    MetricsRow r;
    r.channel = config.train.channel.kind;
    r.snr_db = config.train.channel.snr_db;
    r.n_c = n_c;
    r.task_accuracy = m.task_accuracy;
    r.reconstruction_mse = m.reconstruction_mse;
    r.sensing_accuracy = m.sensing_accuracy;
    r.seed = config.seed();
    r.samples = m.sample_count;
    return r;
}

Checkpoint load_matching(const std::string& path, const ExperimentConfig& config) {
    auto ckpt = load_checkpoint(path);
    if (ckpt.cfg.input_shape != config.train.cfg.input_shape) {
        throw ConfigError("model " + path + " expects input " + shape_string(ckpt.cfg.input_shape) + " but data is " +
                          shape_string(config.train.cfg.input_shape));
    }
    return ckpt;
}

int cmd_train(const Flags& f) {
    const auto config = resolve(f);
    write_resolved(config);
    const auto data = load_datasets(config);
    auto result = train(config.train, data.train, [](std::size_t epoch, const LossBreakdown& l) {
        std::cout << "epoch " << epoch + 1 << " loss " << l.total << " (ce " << l.semantic_ce << ", mse "
                  << l.reconstruction_mse << ", sensing " << l.sensing_ce << ")\n";
    });
    write_history_csv(config.out / "history.csv", result.history);
    save_checkpoint(config.out / "model.json", result.models, config.train.cfg, config.seed());
    std::cout << "wrote " << (config.out / "model.json").string() << "\n";
    return 0;
}

int cmd_evaluate(const Flags& f) {
    const auto config = resolve(f);
    const auto ckpt = load_matching(f.model, config);
    write_resolved(config);
    const auto data = load_datasets(config);
    const auto m = evaluate(ckpt.models, data.test, config.train.channel, config.train.sensing,
                            derive_seed(config.seed(), "eval"), config.eval);
    write_metrics_csv(config.out / "metrics.csv", std::vector<MetricsRow>{to_row(m, config, ckpt.cfg.n_c)}, false);
    std::cout << format_row(to_row(m, config, ckpt.cfg.n_c)) << "\n";
    return 0;
}

int cmd_sweep(const Flags& f) {
    const auto report = run_experiment(resolve(f), std::cout);
    for (const auto& file : report.files) std::cout << "wrote " << file.string() << "\n";
    return report.ok() ? 0 : 1;
}

int cmd_attack(Flags f) {
    if (f.model.empty()) {
        f.experiment = "accuracy-vs-psr";
        return cmd_sweep(f);
    }
    auto config = resolve(f);
    const auto ckpt = load_matching(f.model, config);
    write_resolved(config);
    const auto data = load_datasets(config);
    const std::vector<AttackKind> kinds{AttackKind::FGSM, AttackKind::Gaussian};
    std::vector<MetricsRow> rows;
    for (const auto& p : evaluate_attack(ckpt.models, data.test, config.psr_grid, kinds, config.train.channel,
                                         config.train.sensing, derive_seed(config.seed(), "eval"), config.eval)) {
        auto r = to_row(p.metrics, config, ckpt.cfg.n_c);
        r.reconstruction_mse.reset();
        r.sensing_accuracy.reset();
        r.psr_db = p.psr_db;
        r.attack = p.kind;
        rows.push_back(r);
        std::cout << format_row(r) << "\n";
    }
    write_metrics_csv(config.out / "accuracy_vs_psr.csv", rows, true);
    return 0;
}

int cmd_summarize(const std::vector<std::string>& files) {
    std::vector<std::filesystem::path> paths(files.begin(), files.end());
    bool ok = true;
    for (const auto& v : summarize(paths)) {
        std::cout << (v.pass ? "PASS " : "FAIL ") << v.file << " [" << v.curve << "] " << v.metric
                  << (v.increasing ? " non-decreasing" : " non-increasing") << "\n";
        for (const auto& why : v.violations) std::cout << "  " << why << "\n";
        ok = ok && v.pass;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-task semantic communication experiments"};
    app.require_subcommand(1);
    Flags flags;
    std::vector<std::string> csvs;

    auto* train_cmd = app.add_subcommand("train", "train one model at the operating point and save it");
    auto* eval_cmd = app.add_subcommand("evaluate", "score a saved model on the test split");
    auto* sweep_cmd = app.add_subcommand("sweep", "run experiment sweeps and write CSV and plot data");
    auto* attack_cmd = app.add_subcommand("attack", "accuracy under FGSM and Gaussian perturbations");
    auto* summarize_cmd = app.add_subcommand("summarize", "trend verdicts for metrics CSVs");
    for (auto* c : {train_cmd, eval_cmd, sweep_cmd, attack_cmd}) add_common(c, flags);
    eval_cmd->add_option("--model", flags.model, "checkpoint from `train`")->required()->check(CLI::ExistingFile);
    attack_cmd->add_option("--model", flags.model, "checkpoint to attack (default: train one)")
        ->check(CLI::ExistingFile);
    summarize_cmd->add_option("csv", csvs, "metrics CSV files")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train_cmd) return cmd_train(flags);
        if (*eval_cmd) return cmd_evaluate(flags);
        if (*sweep_cmd) return cmd_sweep(flags);
        if (*attack_cmd) return cmd_attack(flags);
        if (*summarize_cmd) return cmd_summarize(csvs);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
