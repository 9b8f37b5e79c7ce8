#include "semcom/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <boost/program_options.hpp>

#include "semcom/random.hpp"

namespace semcom {

namespace po = boost::program_options;

std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::TaskAccuracyVsSnr: return "task-accuracy-vs-snr";
        case ExperimentKind::ReconstructionVsSnr: return "reconstruction-vs-snr";
        case ExperimentKind::SensingVsSnr: return "sensing-vs-snr";
        case ExperimentKind::AccuracyVsPsr: return "accuracy-vs-psr";
    }
    return "?";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
    for (auto k : {ExperimentKind::TaskAccuracyVsSnr, ExperimentKind::ReconstructionVsSnr, ExperimentKind::SensingVsSnr,
                   ExperimentKind::AccuracyVsPsr}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown experiment '" + std::string(name) +
                                "' (expected task-accuracy-vs-snr|reconstruction-vs-snr|sensing-vs-snr|accuracy-vs-psr)");
}

namespace {

// Shortest text that parses back to the same double.
std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        out.push_back(trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double(const std::string& key, std::string_view text) {
    const auto t = trim(text);
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto* first = t.data();
    if (!t.empty() && t[0] == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size() || std::isnan(v)) {
        throw ConfigError(key + ": '" + t + "' is not a number");
    }
    return v;
}

std::uint64_t parse_unsigned(const std::string& key, std::string_view text) {
    const auto t = trim(text);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        throw ConfigError(key + ": '" + t + "' is not a non-negative integer");
    }
    return v;
}

bool parse_bool(const std::string& key, std::string_view text) {
    const auto t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError(key + ": '" + t + "' is not a boolean");
}

template <class T, class F>
std::vector<T> parse_list(const std::string& key, std::string_view text, F parse_one) {
    if (trim(text).empty()) throw ConfigError(key + ": empty grid");
    std::vector<T> out;
    for (const auto& item : split_list(text)) out.push_back(parse_one(key, item));
    return out;
}

template <class F>
auto rethrow_with_key(const std::string& key, F f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

template <class T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_floating_point_v<T>) {
            out += fmt(values[i]);
        } else {
            out += std::to_string(values[i]);
        }
    }
    return out;
}

}  // namespace

RawConfig default_raw_config() {
    const ExperimentConfig d;
    RawConfig raw;
    raw["experiment"] = std::string(to_string(d.experiments.front()));
    raw["seed"] = std::to_string(d.train.seed);
    raw["out"] = d.out.string();
    raw["workers"] = std::to_string(d.workers);
    raw["grid.snr_db"] = join(d.snr_grid);
    raw["grid.n_c"] = join(d.nc_grid);
    raw["grid.psr_db"] = join(d.psr_grid);
    raw["grid.sensing_snr_db"] = join(d.sensing_snr_grid);
    raw["model.n_c"] = std::to_string(d.train.cfg.n_c);
    raw["channel.kind"] = std::string(to_string(d.train.channel.kind));
    raw["channel.snr_db"] = fmt(d.train.channel.snr_db);
    raw["channel.fading"] = std::string(to_string(d.train.channel.fading));
    raw["channel.h_floor"] = fmt(d.train.channel.h_floor);
    raw["sensing.snr_db"] = fmt(d.train.sensing.snr_db);
    raw["sensing.prior"] = fmt(d.train.sensing.presence_prior);
    raw["train.epochs"] = std::to_string(d.train.epochs);
    raw["train.batch_size"] = std::to_string(d.train.batch_size);
    raw["train.learning_rate"] = fmt(d.train.adam.learning_rate);
    raw["train.beta1"] = fmt(d.train.adam.beta1);
    raw["train.beta2"] = fmt(d.train.adam.beta2);
    raw["train.epsilon"] = fmt(d.train.adam.epsilon);
    const auto& w = d.train.weights;
    raw["train.weights"] = fmt(w.semantic) + "," + fmt(w.reconstruction) + "," + fmt(w.sensing);
    raw["train.snr_mode"] = std::string(to_string(d.train.snr_mode));
    raw["data.path"] = d.data.path;
    raw["data.synthetic"] = d.data.synthetic ? "true" : "false";
    raw["data.subset"] = std::to_string(d.data.subset);
    raw["data.test_subset"] = std::to_string(d.data.test_subset);
    raw["data.synthetic_side"] = std::to_string(d.data.synthetic_side);
    raw["data.synthetic_train"] = std::to_string(d.data.synthetic_train);
    raw["data.synthetic_test"] = std::to_string(d.data.synthetic_test);
    raw["eval.batch_size"] = std::to_string(d.eval.batch_size);
    raw["eval.sensing_draws"] = std::to_string(d.eval.sensing_draws);
    return raw;
}

void overlay_config_text(std::istream& in, RawConfig& raw, const std::string& source) {
    po::options_description desc;
    for (const auto& [key, value] : default_raw_config()) desc.add_options()(key.c_str(), po::value<std::string>());
    po::parsed_options parsed(&desc);
    try {
        parsed = po::parse_config_file(in, desc, false);
    } catch (const po::unknown_option& e) {
        throw ConfigError(source + ": unknown key '" + e.get_option_name() + "'");
    } catch (const po::error& e) {
        throw ConfigError(source + ": " + e.what());
    }
    std::map<std::string, int> seen;
    for (const auto& opt : parsed.options) {
        if (++seen[opt.string_key] > 1) throw ConfigError(source + ": key '" + opt.string_key + "' given twice");
        raw[opt.string_key] = opt.value.empty() ? std::string() : opt.value.front();
    }
}

void overlay_config_file(const std::filesystem::path& path, RawConfig& raw) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    overlay_config_text(in, raw, path.string());
}

void ExperimentConfig::validate() const {
    if (experiments.empty()) throw ConfigError("experiment: no experiment given");
    if (snr_grid.empty()) throw ConfigError("grid.snr_db: empty grid");
    if (nc_grid.empty()) throw ConfigError("grid.n_c: empty grid");
    if (psr_grid.empty()) throw ConfigError("grid.psr_db: empty grid");
    if (sensing_snr_grid.empty()) throw ConfigError("grid.sensing_snr_db: empty grid");
    for (auto n : nc_grid) {
        rethrow_with_key("grid.n_c", [&] {
            ModelConfig c = train.cfg;
            c.n_c = n;
            c.validate();
            return 0;
        });
    }
    rethrow_with_key("model.n_c", [&] { return (train.cfg.validate(), 0); });
    rethrow_with_key("channel", [&] { return (train.channel.validate(), 0); });
    rethrow_with_key("sensing", [&] { return (train.sensing.validate(), 0); });
    rethrow_with_key("train", [&] { return (train.validate(), 0); });
    if (!data.synthetic && data.path.empty()) {
        throw ConfigError("data.path: no dataset directory (set data.synthetic = true or SEMCOM_DATASET)");
    }
    if (data.synthetic && (data.synthetic_side == 0 || data.synthetic_train == 0 || data.synthetic_test == 0)) {
        throw ConfigError("data.synthetic_*: sizes must be positive");
    }
    if (eval.batch_size == 0) throw ConfigError("eval.batch_size: must be positive");
    if (eval.sensing_draws == 0) throw ConfigError("eval.sensing_draws: must be positive");
    if (workers == 0) throw ConfigError("workers: must be positive");
}

ExperimentConfig resolve_config(const RawConfig& raw) {
    const auto defaults = default_raw_config();
    for (const auto& [key, value] : raw) {
        if (!defaults.count(key)) throw ConfigError("unknown key '" + key + "'");
    }
    auto get = [&](const std::string& key) -> std::string {
        auto it = raw.find(key);
        return it != raw.end() ? it->second : defaults.at(key);
    };
    auto num = [&](const std::string& key) { return parse_double(key, get(key)); };
    auto count = [&](const std::string& key) { return static_cast<std::size_t>(parse_unsigned(key, get(key))); };

    ExperimentConfig c;
    c.experiments = parse_list<ExperimentKind>("experiment", get("experiment"), [](const std::string& key, const std::string& s) {
        return rethrow_with_key(key, [&] { return parse_experiment_kind(s); });
    });
    c.train.seed = parse_unsigned("seed", get("seed"));
    c.out = trim(get("out"));
    c.workers = count("workers");
    c.snr_grid = parse_list<double>("grid.snr_db", get("grid.snr_db"), parse_double);
    c.nc_grid = parse_list<std::size_t>("grid.n_c", get("grid.n_c"), [](const std::string& key, const std::string& s) {
        return static_cast<std::size_t>(parse_unsigned(key, s));
    });
    c.psr_grid = parse_list<double>("grid.psr_db", get("grid.psr_db"), parse_double);
    c.sensing_snr_grid = parse_list<double>("grid.sensing_snr_db", get("grid.sensing_snr_db"), parse_double);

    c.train.cfg.n_c = count("model.n_c");
    c.train.channel.kind = rethrow_with_key("channel.kind", [&] { return parse_channel_kind(trim(get("channel.kind"))); });
    c.train.channel.snr_db = num("channel.snr_db");
    c.train.channel.fading = rethrow_with_key("channel.fading", [&] { return parse_fading_mode(trim(get("channel.fading"))); });
    c.train.channel.h_floor = num("channel.h_floor");
    c.train.sensing.snr_db = num("sensing.snr_db");
    c.train.sensing.presence_prior = num("sensing.prior");
    c.train.epochs = count("train.epochs");
    c.train.batch_size = count("train.batch_size");
    c.train.adam.learning_rate = num("train.learning_rate");
    c.train.adam.beta1 = num("train.beta1");
    c.train.adam.beta2 = num("train.beta2");
    c.train.adam.epsilon = num("train.epsilon");
    c.train.weights = rethrow_with_key("train.weights", [&] { return MultiTaskWeights::parse(trim(get("train.weights"))); });
    c.train.snr_mode = rethrow_with_key("train.snr_mode", [&] { return parse_snr_mode(trim(get("train.snr_mode"))); });

    c.data.path = trim(get("data.path"));
    c.data.synthetic = parse_bool("data.synthetic", get("data.synthetic"));
    c.data.subset = count("data.subset");
    c.data.test_subset = count("data.test_subset");
    c.data.synthetic_side = count("data.synthetic_side");
    c.data.synthetic_train = count("data.synthetic_train");
    c.data.synthetic_test = count("data.synthetic_test");
    c.eval.batch_size = count("eval.batch_size");
    c.eval.sensing_draws = count("eval.sensing_draws");

    c.train.cfg = model_config(c, c.train.cfg.n_c);
    c.validate();
    return c;
}

std::string render_config(const ExperimentConfig& c) {
    std::vector<std::string> kinds;
    for (auto k : c.experiments) kinds.emplace_back(to_string(k));
    std::string exp;
    for (std::size_t i = 0; i < kinds.size(); ++i) exp += (i ? "," : "") + kinds[i];
    const auto& t = c.train;
    std::ostringstream out;
    out << "experiment = " << exp << "\n"
        << "seed = " << t.seed << "\n"
        << "out = " << c.out.string() << "\n"
        << "workers = " << c.workers << "\n\n"
        << "[grid]\n"
        << "snr_db = " << join(c.snr_grid) << "\n"
        << "n_c = " << join(c.nc_grid) << "\n"
        << "psr_db = " << join(c.psr_grid) << "\n"
        << "sensing_snr_db = " << join(c.sensing_snr_grid) << "\n\n"
        << "[model]\n"
        << "n_c = " << t.cfg.n_c << "\n\n"
        << "[channel]\n"
        << "kind = " << to_string(t.channel.kind) << "\n"
        << "snr_db = " << fmt(t.channel.snr_db) << "\n"
        << "fading = " << to_string(t.channel.fading) << "\n"
        << "h_floor = " << fmt(t.channel.h_floor) << "\n\n"
        << "[sensing]\n"
        << "snr_db = " << fmt(t.sensing.snr_db) << "\n"
        << "prior = " << fmt(t.sensing.presence_prior) << "\n\n"
        << "[train]\n"
        << "epochs = " << t.epochs << "\n"
        << "batch_size = " << t.batch_size << "\n"
        << "learning_rate = " << fmt(t.adam.learning_rate) << "\n"
        << "beta1 = " << fmt(t.adam.beta1) << "\n"
        << "beta2 = " << fmt(t.adam.beta2) << "\n"
        << "epsilon = " << fmt(t.adam.epsilon) << "\n"
        << "weights = " << fmt(t.weights.semantic) << "," << fmt(t.weights.reconstruction) << ","
        << fmt(t.weights.sensing) << "\n"
        << "snr_mode = " << to_string(t.snr_mode) << "\n\n"
        << "[data]\n"
        << "path = " << c.data.path << "\n"
        << "synthetic = " << (c.data.synthetic ? "true" : "false") << "\n"
        << "subset = " << c.data.subset << "\n"
        << "test_subset = " << c.data.test_subset << "\n"
        << "synthetic_side = " << c.data.synthetic_side << "\n"
        << "synthetic_train = " << c.data.synthetic_train << "\n"
        << "synthetic_test = " << c.data.synthetic_test << "\n\n"
        << "[eval]\n"
        << "batch_size = " << c.eval.batch_size << "\n"
        << "sensing_draws = " << c.eval.sensing_draws << "\n";
    return out.str();
}

ModelConfig model_config(const ExperimentConfig& config, std::size_t n_c) {
    ModelConfig cfg;
    cfg.n_c = n_c;
    cfg.num_classes = 10;
    if (config.data.synthetic) {
        cfg.input_shape = {config.data.synthetic_side, config.data.synthetic_side, 3};
    } else {
        cfg.input_shape = {kCifarSide, kCifarSide, 3};
    }
    return cfg;
}

Datasets load_datasets(const ExperimentConfig& config) {
    const auto seed = config.seed();
    if (config.data.synthetic) {
        SynthOptions opt;
        opt.image_shape = {config.data.synthetic_side, config.data.synthetic_side, 3};
        return {synth_dataset(config.data.synthetic_train, seed, Split::Train, opt),
                synth_dataset(config.data.synthetic_test, seed, Split::Test, opt)};
    }
    auto [train, test] = load_cifar10(config.data.path);
    if (config.data.subset > 0 && config.data.subset < train.size()) {
        train = subset(train, config.data.subset, derive_seed(seed, "train-subset"));
    }
    if (config.data.test_subset > 0 && config.data.test_subset < test.size()) {
        test = subset(test, config.data.test_subset, derive_seed(seed, "test-subset"));
    }
    return {std::move(train), std::move(test)};
}

std::string format_row(const MetricsRow& row) {
    auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
    std::string s = std::string(to_string(row.channel)) + "," + fmt(row.snr_db) + "," + std::to_string(row.n_c) + "," +
                    opt(row.psr_db) + "," + opt(row.task_accuracy) + "," + opt(row.reconstruction_mse) + "," +
                    opt(row.sensing_accuracy) + "," + std::to_string(row.seed) + "," + std::to_string(row.samples);
    if (row.attack) s += "," + std::string(to_string(*row.attack));
    return s;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows, bool with_attack) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << kMetricsHeader << (with_attack ? ",attack" : "") << "\n";
    for (const auto& r : rows) {
        if (with_attack != r.attack.has_value()) throw std::logic_error("attack column mismatch in " + path.string());
        out << format_row(r) << "\n";
    }
}

void write_history_csv(const std::filesystem::path& path, const std::vector<LossBreakdown>& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << kHistoryHeader << "\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
        const auto& h = history[e];
        out << e + 1 << "," << fmt(h.semantic_ce) << "," << fmt(h.reconstruction_mse) << "," << fmt(h.sensing_ce) << ","
            << fmt(h.total) << "\n";
    }
}

namespace {

// Runs tasks on `workers` threads; results land at their task index.
template <class R>
std::vector<std::optional<R>> run_pool(std::size_t workers, const std::vector<std::function<R()>>& tasks,
                                       const std::vector<std::string>& labels, std::vector<std::string>& errors) {
    std::vector<std::optional<R>> results(tasks.size());
    std::vector<std::string> failures(tasks.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
            try {
                results[i] = tasks[i]();
            } catch (const std::exception& e) {
                failures[i] = labels[i] + ": " + e.what();
            }
        }
    };
    const auto n = std::min(workers, tasks.size());
    if (n <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& f : failures) {
        if (!f.empty()) errors.push_back(std::move(f));
    }
    return results;
}

struct Runner {
    const ExperimentConfig& config;
    const Datasets& data;
    std::ostream& log;
    std::mutex log_mutex;
    RunReport report;

    void say(const std::string& line) {
        std::lock_guard lock(log_mutex);
        log << line << std::endl;
    }

    std::uint64_t eval_seed() const { return derive_seed(config.seed(), "eval"); }

    TrainConfig train_config(std::size_t n_c) const {
        TrainConfig t = config.train;
        t.cfg = model_config(config, n_c);
        return t;
    }

    TrainResult fit(const TrainConfig& t, const std::string& tag) {
        auto result = train(t, data.train);
        const auto dir = config.out / "history";
        write_history_csv(dir / (tag + ".csv"), result.history);
        say("trained " + tag + ": final loss " + (result.history.empty() ? "n/a" : fmt(result.history.back().total)));
        return result;
    }

    MetricsRow row(const MetricsRecord& m, double snr_db, std::size_t n_c) const {
        MetricsRow r;
        r.channel = config.train.channel.kind;
        r.snr_db = snr_db;
        r.n_c = n_c;
        r.task_accuracy = m.task_accuracy;
        r.reconstruction_mse = m.reconstruction_mse;
        r.sensing_accuracy = m.sensing_accuracy;
        r.seed = config.seed();
        r.samples = m.sample_count;
        return r;
    }

    void emit(const std::filesystem::path& path, const std::vector<MetricsRow>& rows, bool with_attack) {
        write_metrics_csv(path, rows, with_attack);
        report.files.push_back(path);
    }

    void emit_dat(const std::filesystem::path& path, const std::string& x_name, const std::string& y_name,
                  const std::vector<std::pair<double, double>>& points) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << "# " << x_name << " " << y_name << "\n";
        for (const auto& [x, y] : points) out << fmt(x) << " " << fmt(y) << "\n";
        report.files.push_back(path);
    }

    // Channel-SNR sweep over (n_c, snr): rows in (n_c, snr) grid order.
    std::vector<std::optional<MetricsRow>> channel_sweep() {
        const auto& snrs = config.snr_grid;
        std::vector<std::optional<MetricsRow>> rows(config.nc_grid.size() * snrs.size());
        const auto channel = std::string(to_string(config.train.channel.kind));
        if (config.train.snr_mode == SnrMode::Matched) {
            std::vector<std::function<MetricsRow()>> tasks;
            std::vector<std::string> labels;
            for (auto n_c : config.nc_grid) {
                for (double snr : snrs) {
                    labels.push_back("channel=" + channel + " snr_db=" + fmt(snr) + " n_c=" + std::to_string(n_c));
                    tasks.push_back([this, n_c, snr, channel] {
                        auto t = train_config(n_c);
                        t.channel.snr_db = snr;
                        const auto result = fit(t, "snr_" + channel + "_nc" + std::to_string(n_c) + "_snr" + fmt(snr));
                        return row(evaluate(result.models, data.test, t.channel, t.sensing, eval_seed(), config.eval),
                                   snr, n_c);
                    });
                }
            }
            rows = run_pool(config.workers, tasks, labels, report.errors);
        } else {
            // One model per n_c trained over the whole SNR range, evaluated at each point.
            std::vector<std::function<std::vector<MetricsRow>()>> tasks;
            std::vector<std::string> labels;
            for (auto n_c : config.nc_grid) {
                labels.push_back("channel=" + channel + " snr_db=randomized n_c=" + std::to_string(n_c));
                tasks.push_back([this, n_c, channel, &snrs] {
                    auto t = train_config(n_c);
                    t.snr_min_db = *std::min_element(snrs.begin(), snrs.end());
                    t.snr_max_db = *std::max_element(snrs.begin(), snrs.end());
                    const auto result = fit(t, "snr_" + channel + "_nc" + std::to_string(n_c) + "_randomized");
                    std::vector<MetricsRow> out;
                    for (double snr : snrs) {
                        auto ch = t.channel;
                        ch.snr_db = snr;
                        out.push_back(row(evaluate(result.models, data.test, ch, t.sensing, eval_seed(), config.eval),
                                          snr, n_c));
                    }
                    return out;
                });
            }
            const auto per_model = run_pool(config.workers, tasks, labels, report.errors);
            for (std::size_t m = 0; m < per_model.size(); ++m) {
                if (!per_model[m]) continue;
                for (std::size_t j = 0; j < snrs.size(); ++j) rows[m * snrs.size() + j] = (*per_model[m])[j];
            }
        }
        return rows;
    }

    // Sensing-SNR sweep at the operating n_c; snr_db holds the sensing SNR.
    std::vector<std::optional<MetricsRow>> sensing_sweep() {
        const auto& snrs = config.sensing_snr_grid;
        const auto n_c = config.train.cfg.n_c;
        if (config.train.snr_mode == SnrMode::Matched) {
            std::vector<std::function<MetricsRow()>> tasks;
            std::vector<std::string> labels;
            for (double snr : snrs) {
                labels.push_back("sensing_snr_db=" + fmt(snr) + " n_c=" + std::to_string(n_c));
                tasks.push_back([this, n_c, snr] {
                    auto t = train_config(n_c);
                    t.sensing.snr_db = snr;
                    const auto result = fit(t, "sensing_nc" + std::to_string(n_c) + "_snr" + fmt(snr));
                    return row(evaluate(result.models, data.test, t.channel, t.sensing, eval_seed(), config.eval), snr,
                               n_c);
                });
            }
            return run_pool(config.workers, tasks, labels, report.errors);
        }
        std::vector<std::optional<MetricsRow>> rows(snrs.size());
        try {
            auto t = train_config(n_c);
            t.sensing_snr_min_db = *std::min_element(snrs.begin(), snrs.end());
            t.sensing_snr_max_db = *std::max_element(snrs.begin(), snrs.end());
            const auto result = fit(t, "sensing_nc" + std::to_string(n_c) + "_randomized");
            for (std::size_t j = 0; j < snrs.size(); ++j) {
                auto s = t.sensing;
                s.snr_db = snrs[j];
                rows[j] = row(evaluate(result.models, data.test, t.channel, s, eval_seed(), config.eval), snrs[j], n_c);
            }
        } catch (const std::exception& e) {
            report.errors.push_back("sensing_snr_db=randomized n_c=" + std::to_string(n_c) + ": " + e.what());
        }
        return rows;
    }

    std::vector<MetricsRow> psr_sweep() {
        const auto n_c = config.train.cfg.n_c;
        const auto& ch = config.train.channel;
        std::vector<MetricsRow> rows;
        try {
            const auto t = train_config(n_c);
            const auto result = fit(t, "psr_" + std::string(to_string(ch.kind)) + "_nc" + std::to_string(n_c) +
                                           "_snr" + fmt(ch.snr_db));
            const std::vector<AttackKind> kinds{AttackKind::FGSM, AttackKind::Gaussian};
            for (const auto& p : evaluate_attack(result.models, data.test, config.psr_grid, kinds, ch, t.sensing,
                                                 eval_seed(), config.eval)) {
                auto r = row(p.metrics, ch.snr_db, n_c);
                r.reconstruction_mse.reset();
                r.sensing_accuracy.reset();
                r.psr_db = p.psr_db;
                r.attack = p.kind;
                rows.push_back(r);
            }
        } catch (const std::exception& e) {
            report.errors.push_back("attack channel=" + std::string(to_string(ch.kind)) + " snr_db=" + fmt(ch.snr_db) +
                                    " n_c=" + std::to_string(n_c) + ": " + e.what());
        }
        return rows;
    }
};

// Keeps only the metric an experiment reports.
MetricsRow project(MetricsRow r, ExperimentKind kind) {
    if (kind != ExperimentKind::TaskAccuracyVsSnr && kind != ExperimentKind::AccuracyVsPsr) r.task_accuracy.reset();
    if (kind != ExperimentKind::ReconstructionVsSnr) r.reconstruction_mse.reset();
    if (kind != ExperimentKind::SensingVsSnr) r.sensing_accuracy.reset();
    return r;
}

std::string file_stem(ExperimentKind kind) {
    std::string s(to_string(kind));
    std::replace(s.begin(), s.end(), '-', '_');
    return s;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    std::filesystem::create_directories(config.out / "history");
    {
        std::ofstream cfg(config.out / "resolved.cfg", std::ios::binary);
        cfg << render_config(config);
    }
    const auto data = load_datasets(config);
    Runner run{config, data, log, {}, {}};
    run.report.files.push_back(config.out / "resolved.cfg");
    run.say("data: " + std::to_string(data.train.size()) + " train / " + std::to_string(data.test.size()) + " test " +
            (config.data.synthetic ? "synthetic" : "CIFAR-10") + " samples");

    auto has = [&](ExperimentKind k) {
        return std::find(config.experiments.begin(), config.experiments.end(), k) != config.experiments.end();
    };

    // Task and reconstruction curves come from the same trained sweep.
    if (has(ExperimentKind::TaskAccuracyVsSnr) || has(ExperimentKind::ReconstructionVsSnr)) {
        const auto rows = run.channel_sweep();
        for (auto kind : {ExperimentKind::TaskAccuracyVsSnr, ExperimentKind::ReconstructionVsSnr}) {
            if (!has(kind)) continue;
            std::vector<MetricsRow> kept;
            for (const auto& r : rows) {
                if (r) kept.push_back(project(*r, kind));
            }
            const auto stem = file_stem(kind);
            run.emit(config.out / (stem + ".csv"), kept, false);
            const bool task = kind == ExperimentKind::TaskAccuracyVsSnr;
            for (auto n_c : config.nc_grid) {
                std::vector<std::pair<double, double>> pts;
                for (const auto& r : kept) {
                    const auto& y = task ? r.task_accuracy : r.reconstruction_mse;
                    if (r.n_c == n_c && y) pts.emplace_back(r.snr_db, *y);
                }
                run.emit_dat(config.out / (stem + "_" + std::string(to_string(config.train.channel.kind)) + "_nc" +
                                           std::to_string(n_c) + ".dat"),
                             "snr_db", task ? "task_accuracy" : "reconstruction_mse", pts);
            }
        }
    }
    if (has(ExperimentKind::SensingVsSnr)) {
        std::vector<MetricsRow> kept;
        for (const auto& r : run.sensing_sweep()) {
            if (r) kept.push_back(project(*r, ExperimentKind::SensingVsSnr));
        }
        const auto stem = file_stem(ExperimentKind::SensingVsSnr);
        run.emit(config.out / (stem + ".csv"), kept, false);
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : kept) {
            if (r.sensing_accuracy) pts.emplace_back(r.snr_db, *r.sensing_accuracy);
        }
        run.emit_dat(config.out / (stem + "_nc" + std::to_string(config.train.cfg.n_c) + ".dat"), "sensing_snr_db",
                     "sensing_accuracy", pts);
    }
    if (has(ExperimentKind::AccuracyVsPsr)) {
        const auto rows = run.psr_sweep();
        const auto stem = file_stem(ExperimentKind::AccuracyVsPsr);
        run.emit(config.out / (stem + ".csv"), rows, true);
        for (auto kind : {AttackKind::FGSM, AttackKind::Gaussian}) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& r : rows) {
                if (r.attack == kind && r.task_accuracy) pts.emplace_back(*r.psr_db, *r.task_accuracy);
            }
            run.emit_dat(config.out / (stem + "_" + std::string(to_string(kind)) + ".dat"), "psr_db", "task_accuracy",
                         pts);
        }
    }
    for (const auto& e : run.report.errors) run.say("error: " + e);
    return std::move(run.report);
}

CurveVerdict check_trend(const std::vector<std::pair<double, double>>& points, bool increasing, double tolerance,
                         bool relative) {
    CurveVerdict v;
    v.increasing = increasing;
    auto sorted = points;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::optional<double> best;
    for (const auto& [x, y] : sorted) {
        if (best) {
            double bound = 0.0;
            bool bad = false;
            if (increasing) {
                bound = relative ? *best * (1.0 - tolerance) : *best - tolerance;
                bad = y < bound;
            } else {
                bound = relative ? *best * (1.0 + tolerance) : *best + tolerance;
                bad = y > bound;
            }
            if (bad || !std::isfinite(y)) {
                v.pass = false;
                v.violations.push_back("x=" + fmt(x) + " y=" + fmt(y) + (increasing ? " below " : " above ") +
                                       fmt(bound) + " (running " + (increasing ? "max " : "min ") + fmt(*best) + ")");
            }
            best = increasing ? std::max(*best, y) : std::min(*best, y);
        } else {
            best = y;
        }
    }
    return v;
}

namespace {

struct ParsedRow {
    MetricsRow row;
    std::size_t line = 0;
};

std::vector<ParsedRow> read_metrics_csv(const std::filesystem::path& path, bool& with_attack) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path.string() + ": cannot read");
    std::string header;
    std::getline(in, header);
    if (header == kMetricsHeader) {
        with_attack = false;
    } else if (header == std::string(kMetricsHeader) + ",attack") {
        with_attack = true;
    } else {
        throw SchemaError(path.string() + ": unexpected header '" + header + "'");
    }
    const std::size_t fields = with_attack ? 10 : 9;
    std::vector<ParsedRow> rows;
    std::string line;
    for (std::size_t n = 2; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        const auto cells = split_list(line);
        const auto where = path.string() + ":" + std::to_string(n);
        if (cells.size() != fields) {
            throw SchemaError(where + ": expected " + std::to_string(fields) + " fields, got " +
                              std::to_string(cells.size()));
        }
        try {
            ParsedRow p;
            p.line = n;
            auto& r = p.row;
            r.channel = parse_channel_kind(cells[0]);
            r.snr_db = parse_double("snr_db", cells[1]);
            r.n_c = parse_unsigned("n_c", cells[2]);
            auto opt = [](const char* key, const std::string& s) -> std::optional<double> {
                if (s.empty()) return std::nullopt;
                return parse_double(key, s);
            };
            r.psr_db = opt("psr_db", cells[3]);
            r.task_accuracy = opt("task_accuracy", cells[4]);
            r.reconstruction_mse = opt("reconstruction_mse", cells[5]);
            r.sensing_accuracy = opt("sensing_accuracy", cells[6]);
            r.seed = parse_unsigned("seed", cells[7]);
            r.samples = parse_unsigned("samples", cells[8]);
            if (with_attack) {
                r.attack = parse_attack_kind(cells[9]);
                if (*r.attack != AttackKind::None && !r.psr_db) throw SchemaError("attacked row without psr_db");
            }
            rows.push_back(std::move(p));
        } catch (const std::exception& e) {
            throw SchemaError(where + ": " + e.what());
        }
    }
    return rows;
}

}  // namespace

std::vector<CurveVerdict> summarize(const std::vector<std::filesystem::path>& csv_paths) {
    std::vector<CurveVerdict> verdicts;
    for (const auto& path : csv_paths) {
        bool with_attack = false;
        const auto rows = read_metrics_csv(path, with_attack);
        auto add = [&](CurveVerdict v, std::string curve, std::string metric) {
            v.file = path.string();
            v.curve = std::move(curve);
            v.metric = std::move(metric);
            verdicts.push_back(std::move(v));
        };
        if (with_attack) {
            for (auto kind : {AttackKind::FGSM, AttackKind::Gaussian}) {
                std::vector<std::pair<double, double>> pts;
                for (const auto& p : rows) {
                    if (p.row.attack == kind && p.row.task_accuracy) pts.emplace_back(*p.row.psr_db, *p.row.task_accuracy);
                }
                if (pts.empty()) continue;
                add(check_trend(pts, false, kAccuracyTolerance, false), std::string(to_string(kind)), "task_accuracy");
            }
            continue;
        }
        std::vector<std::pair<ChannelKind, std::size_t>> groups;
        for (const auto& p : rows) {
            const std::pair key{p.row.channel, p.row.n_c};
            if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
        }
        for (const auto& [channel, n_c] : groups) {
            const auto curve = std::string(to_string(channel)) + " n_c=" + std::to_string(n_c);
            struct Column {
                const char* name;
                std::optional<double> MetricsRow::*field;
                bool increasing;
                double tolerance;
                bool relative;
            };
            for (const Column c : {Column{"task_accuracy", &MetricsRow::task_accuracy, true, kAccuracyTolerance, false},
                                   Column{"reconstruction_mse", &MetricsRow::reconstruction_mse, false, kMseTolerance, true},
                                   Column{"sensing_accuracy", &MetricsRow::sensing_accuracy, true, kAccuracyTolerance,
                                          false}}) {
                std::vector<std::pair<double, double>> pts;
                for (const auto& p : rows) {
                    const auto& y = p.row.*c.field;
                    if (p.row.channel == channel && p.row.n_c == n_c && y) pts.emplace_back(p.row.snr_db, *y);
                }
                if (pts.empty()) continue;
                add(check_trend(pts, c.increasing, c.tolerance, c.relative), curve, c.name);
            }
        }
    }
    return verdicts;
}

}  // namespace semcom
