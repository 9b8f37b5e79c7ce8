// End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. `--only 1,2` restricts the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "semcom/attack.hpp"
#include "semcom/experiment.hpp"
#include "semcom/random.hpp"

using namespace semcom;

namespace {

// Pinned tolerances.
constexpr double kGradRelTol = 1e-6;
// Fourth-order differences with a wide step keep both truncation and
// rounding error far below the tolerance for the deep chains.
constexpr int kChainStencil = 4;
constexpr double kChainStep = 1e-3;
constexpr std::size_t kGradSeeds = 100;
constexpr double kGradBudgetSec = 120.0;
constexpr double kSnrTolDb = 0.2;
constexpr double kFadingMomentTol = 0.01;
constexpr double kKsCritical1pct = 1.628;  // sqrt(n) * D at alpha = 0.01
constexpr std::size_t kChannelUses = 100000;
constexpr double kTrendAccTol = 0.02;
constexpr double kTrendMseTol = 0.05;
constexpr double kTaskAccFloor = 0.40;
constexpr double kSynthBudgetSec = 300.0;
constexpr double kSensingChanceTol = 0.03;
constexpr double kSensingHighFloor = 0.90;
constexpr double kOracleGap = 0.05;
constexpr double kAttackGap = 0.05;
constexpr double kGaussianCleanGap = 0.05;
constexpr double kPsrRoundTripDb = 0.1;

// Desk-scale synthetic setup shared by criteria 3-6.
constexpr std::size_t kSide = 8;
constexpr std::size_t kTrainSamples = 2000;
constexpr std::size_t kTestSamples = 1000;
constexpr std::size_t kEpochs = 20;
constexpr std::uint64_t kSeed = 1;
const std::vector<double> kSnrGrid{-5, 0, 5, 10, 15};
const std::vector<double> kSensingGrid{-40, -5, 0, 5, 10, 15};
const std::vector<double> kPsrGrid{-30, -25, -20, -15, -10, -5};

struct Outcome {
    bool pass = true;
    std::vector<std::string> details;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
    void note(const std::string& what) { details.push_back("     " + what); }
};

std::string num(double v, int digits = 4) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
    Tensor t(shape);
    fill_normal(t, rng);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= scale;
    return t;
}

LossSpec probe(const Shape& out_shape, std::size_t batch, Rng& rng) {
    Shape s{batch};
    s.insert(s.end(), out_shape.begin(), out_shape.end());
    return LossSpec{LossKind::Probe, {}, random_tensor(s, rng)};
}

// 1 --------------------------------------------------------------------

Outcome gradient_correctness() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    double worst_layer = 0.0, worst_chain = 0.0;
    std::size_t checked = 0, kinks = 0;
    std::string worst_where;

    auto record = [&](const GradCheckReport& r, const std::string& where, double& worst) {
        checked += r.checked;
        kinks += r.kinks_skipped;
        if (r.checked == 0) {
            out.require(false, where + ": no entries checked");
        }
        if (r.max_relative_error > worst) {
            worst = r.max_relative_error;
            if (worst >= kGradRelTol) worst_where = where + ": " + r.worst;
        }
    };

    for (std::uint64_t seed = 0; seed < kGradSeeds; ++seed) {
        Rng rng(seed);
        const std::vector<std::pair<std::string, Model>> layers = {
            {"conv", Model(Role::Custom, {5, 5, 2}, {Layer::conv2d(3, 3, ActivationKind::ReLU)})},
            {"pool", Model(Role::Custom, {4, 4, 2}, {Layer::max_pool(2)})},
            {"dropout", Model(Role::Custom, {6}, {Layer::dropout(0.25)})},
            {"flatten", Model(Role::Custom, {2, 3, 2}, {Layer::flatten()})},
            {"dense", Model(Role::Custom, {5}, {Layer::dense(4, ActivationKind::Linear)})},
            {"reshape", Model(Role::Custom, {12}, {Layer::reshape({2, 3, 2})})},
            {"relu", Model(Role::Custom, {7}, {Layer::activation_layer(ActivationKind::ReLU)})},
            {"softmax", Model(Role::Custom, {7}, {Layer::activation_layer(ActivationKind::Softmax)})},
        };
        for (auto [name, model] : layers) {
            model.initialize(seed * 31 + 7);
            Shape in{2};
            in.insert(in.end(), model.input_shape().begin(), model.input_shape().end());
            const auto x = random_tensor(in, rng);
            GradCheckOptions opts;
            opts.mode = name == "dropout" ? Tape::Mode::Training : Tape::Mode::Inference;
            opts.dropout_seed = seed;
            record(grad_check(Chain{{Chain::ModelStage{&model}}, probe(model.output_shape(), 2, rng)}, x, opts),
                   name + " seed " + std::to_string(seed), worst_layer);
        }

        // Full encoder + decoder chains at 8x8x3 through a frozen channel.
        ModelConfig cfg;
        cfg.input_shape = {kSide, kSide, 3};
        const auto models = build_models(cfg, seed);
        const auto x = random_tensor({2, kSide, kSide, 3}, rng, 0.3);
        const ChannelParams ch{seed % 2 ? ChannelKind::Rayleigh : ChannelKind::AWGN, 5.0};
        const auto draw = draw_channel({2, cfg.n_c}, ch, rng);
        GradCheckOptions opts;
        opts.max_entries_per_tensor = 4;
        opts.sample_seed = seed;
        opts.mode = seed % 3 == 0 ? Tape::Mode::Training : Tape::Mode::Inference;
        opts.dropout_seed = seed;
        opts.stencil = kChainStencil;
        opts.fd_step = kChainStep;

        Chain sem{{Chain::ModelStage{&models.encoder}}, LossSpec{LossKind::CrossEntropy, {1, 7}, {}}};
        append_channel_stages(sem, draw, ch);
        sem.stages.push_back(Chain::ModelStage{&*models.semantic});
        record(grad_check(sem, x, opts), "semantic chain seed " + std::to_string(seed), worst_chain);

        Chain rec{{Chain::ModelStage{&models.encoder}}, LossSpec{LossKind::MeanSquared, {}, random_tensor(x.shape(), rng)}};
        append_channel_stages(rec, draw, ch);
        rec.stages.push_back(Chain::ModelStage{&*models.reconstruction});
        record(grad_check(rec, x, opts), "reconstruction chain seed " + std::to_string(seed), worst_chain);

        const auto echo = draw_sensing({2, cfg.n_c}, SensingScenario{true, 5.0, 0.5}, rng);
        Chain sens{{Chain::ModelStage{&models.encoder}, Chain::NormalizeStage{}, Chain::MultiplyStage{echo.gain},
                    Chain::AddStage{echo.noise}, Chain::ModelStage{&*models.sensing}},
                   LossSpec{LossKind::CrossEntropy, echo.labels, {}}};
        record(grad_check(sens, x, opts), "sensing chain seed " + std::to_string(seed), worst_chain);
    }
    const double elapsed = seconds_since(t0);
    out.require(worst_layer < kGradRelTol, "every layer kind, " + std::to_string(kGradSeeds) +
                                               " seeds: max rel err " + num(worst_layer, 3) + " < " + num(kGradRelTol));
    out.require(worst_chain < kGradRelTol,
                "encoder+decoder chains at 8x8x3: max rel err " + num(worst_chain, 3) + " < " + num(kGradRelTol));
    if (!worst_where.empty()) out.note("worst: " + worst_where);
    out.note(std::to_string(checked) + " entries checked, " + std::to_string(kinks) + " kink probes skipped");
    out.require(elapsed < kGradBudgetSec, "runtime " + num(elapsed, 3) + " s < " + num(kGradBudgetSec) + " s");
    return out;
}

// 2 --------------------------------------------------------------------

double ks_rayleigh(std::vector<double> sample) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = 1.0 - std::exp(-sample[i] * sample[i]);
        d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    return d;
}

Outcome channel_fidelity() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t rows = 1000, n_c = kChannelUses / rows;
    for (auto kind : {ChannelKind::AWGN, ChannelKind::Rayleigh}) {
        for (double snr : {-5.0, 0.0, 10.0, 20.0}) {
            Rng rng(derive_seed(kSeed, "fidelity") + static_cast<std::uint64_t>(snr + 100));
            Tensor x({rows, n_c});
            fill_normal(x, rng);
            x = normalize_power(x).z;
            Channel channel({kind, snr}, derive_seed(kSeed, "fidelity-channel"));
            const auto draw = channel.draw(x.shape());
            Tensor signal = x;
            if (draw.fading) {
                for (std::size_t i = 0; i < x.size(); ++i) signal[i] *= draw.fading->h[i];
            }
            const double measured = empirical_snr_db(signal, draw.noise);
            out.require(std::abs(measured - snr) <= kSnrTolDb, std::string(to_string(kind)) + " " + num(snr) +
                                                                   " dB: measured " + num(measured, 5) + " dB");
        }
    }
    Rng rng(derive_seed(kSeed, "fading-law"));
    const auto h = draw_rayleigh({kChannelUses}, rng);
    double m2 = 0.0;
    for (double v : h.values()) m2 += v * v;
    m2 /= static_cast<double>(kChannelUses);
    out.require(std::abs(m2 - 1.0) <= kFadingMomentTol, "Rayleigh E[h^2] = " + num(m2, 5));
    const double d = ks_rayleigh({h.values().begin(), h.values().end()});
    const double crit = kKsCritical1pct / std::sqrt(static_cast<double>(kChannelUses));
    out.require(d < crit, "KS statistic " + num(d, 4) + " < " + num(crit, 4) + " (1% level)");
    out.note("runtime " + num(seconds_since(t0), 3) + " s");
    return out;
}

// Shared desk-scale models ---------------------------------------------

struct Desk {
    Datasets data;
    std::map<std::pair<std::size_t, double>, TrainResult> channel_models;  // (n_c, channel snr)
    std::map<double, TrainResult> sensing_models;                          // sensing snr
    double channel_sweep_seconds = 0.0;

    Desk() {
        ExperimentConfig c;
        c.data.synthetic = true;
        c.data.synthetic_side = kSide;
        c.data.synthetic_train = kTrainSamples;
        c.data.synthetic_test = kTestSamples;
        c.train.seed = kSeed;
        data = load_datasets(c);
    }

    TrainConfig base(std::size_t n_c) const {
        TrainConfig t;
        t.cfg.input_shape = {kSide, kSide, 3};
        t.cfg.n_c = n_c;
        t.epochs = kEpochs;
        t.seed = kSeed;
        return t;
    }

    const TrainResult& channel_model(std::size_t n_c, double snr) {
        auto key = std::pair{n_c, snr};
        auto it = channel_models.find(key);
        if (it == channel_models.end()) {
            auto t = base(n_c);
            t.channel.snr_db = snr;
            const auto t0 = std::chrono::steady_clock::now();
            it = channel_models.emplace(key, train(t, data.train)).first;
            if (n_c == 20) channel_sweep_seconds += seconds_since(t0);
        }
        return it->second;
    }

    MetricsRecord channel_eval(std::size_t n_c, double snr) {
        auto t = base(n_c);
        t.channel.snr_db = snr;
        return evaluate(channel_model(n_c, snr).models, data.test, t.channel, t.sensing, derive_seed(kSeed, "eval"));
    }

    MetricsRecord sensing_eval(double snr) {
        auto t = base(20);
        t.sensing.snr_db = snr;
        auto it = sensing_models.find(snr);
        if (it == sensing_models.end()) it = sensing_models.emplace(snr, train(t, data.train)).first;
        return evaluate(it->second.models, data.test, t.channel, t.sensing, derive_seed(kSeed, "eval"));
    }
};

Desk& desk() {
    static Desk d;
    return d;
}

std::string curve_text(const std::vector<std::pair<double, double>>& pts) {
    std::string s;
    for (const auto& [x, y] : pts) s += (s.empty() ? "" : "  ") + num(x) + ":" + num(y, 4);
    return s;
}

void require_trend(Outcome& out, const std::string& what, const std::vector<std::pair<double, double>>& pts,
                   bool increasing, double tol, bool relative) {
    const auto v = check_trend(pts, increasing, tol, relative);
    out.require(v.pass, what + " [" + curve_text(pts) + "]");
    for (const auto& why : v.violations) out.note(why);
}

// 3 --------------------------------------------------------------------

Outcome task_accuracy_trend() {
    Outcome out;
    auto& d = desk();
    std::vector<std::pair<double, double>> pts;
    for (double snr : kSnrGrid) pts.emplace_back(snr, *d.channel_eval(20, snr).task_accuracy);
    require_trend(out, "synthetic task accuracy non-decreasing in SNR (2 pp)", pts, true, kTrendAccTol, false);
    const double at10 = pts[3].second;
    out.require(at10 > kTaskAccFloor, "accuracy at 10 dB " + num(at10) + " > " + num(kTaskAccFloor));
    out.require(d.channel_sweep_seconds < kSynthBudgetSec,
                "synthetic sweep " + num(d.channel_sweep_seconds, 3) + " s < " + num(kSynthBudgetSec) + " s");

    const char* cifar = std::getenv("SEMCOM_DATASET");
    if (!cifar || !*cifar) {
        out.note("CIFAR-10 variant: SKIP (SEMCOM_DATASET not set)");
        return out;
    }
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig c;
    c.data.path = cifar;
    c.data.subset = 5000;
    c.train.seed = kSeed;
    const auto data = load_datasets(c);
    std::vector<std::pair<double, double>> cpts;
    for (double snr : kSnrGrid) {
        auto t = c.train;
        t.cfg = model_config(c, 20);
        t.channel.snr_db = snr;
        const auto r = train(t, data.train);
        cpts.emplace_back(snr, *evaluate(r.models, data.test, t.channel, t.sensing, derive_seed(kSeed, "eval")).task_accuracy);
    }
    require_trend(out, "CIFAR-10 task accuracy non-decreasing in SNR (2 pp)", cpts, true, kTrendAccTol, false);
    out.require(cpts[3].second > kTaskAccFloor, "CIFAR-10 accuracy at 10 dB " + num(cpts[3].second) + " > 0.4");
    out.note("CIFAR-10 runtime " + num(seconds_since(t0), 4) + " s");
    return out;
}

// 4 --------------------------------------------------------------------

Outcome reconstruction_trend() {
    Outcome out;
    auto& d = desk();
    std::vector<std::pair<double, double>> pts;
    for (double snr : kSnrGrid) pts.emplace_back(snr, *d.channel_eval(20, snr).reconstruction_mse);
    require_trend(out, "reconstruction MSE non-increasing in SNR (5%)", pts, false, kTrendMseTol, true);
    const double mse10 = *d.channel_eval(10, 10.0).reconstruction_mse;
    const double mse40 = *d.channel_eval(40, 10.0).reconstruction_mse;
    out.require(mse40 <= mse10, "MSE(n_c=40) " + num(mse40) + " <= MSE(n_c=10) " + num(mse10) + " at 10 dB");
    return out;
}

// 5 --------------------------------------------------------------------

Outcome sensing_trend() {
    Outcome out;
    auto& d = desk();
    std::vector<std::pair<double, double>> pts;
    bool near_oracle = true;
    std::string oracle_text;
    for (double snr : kSensingGrid) {
        const double acc = *d.sensing_eval(snr).sensing_accuracy;
        const double oracle = energy_detector_accuracy(20, snr, 0.5, 100000, derive_seed(kSeed, "oracle"));
        pts.emplace_back(snr, acc);
        near_oracle = near_oracle && acc >= oracle - kOracleGap;
        oracle_text += (oracle_text.empty() ? "" : "  ") + num(snr) + ":" + num(acc, 3) + "/" + num(oracle, 3);
    }
    require_trend(out, "sensing accuracy non-decreasing in sensing SNR (2 pp)", pts, true, kTrendAccTol, false);
    out.require(std::abs(pts.front().second - 0.5) <= kSensingChanceTol, "-40 dB accuracy " + num(pts.front().second) +
                                                                             " within 0.5 +- " + num(kSensingChanceTol));
    out.require(pts.back().second >= kSensingHighFloor, "15 dB accuracy " + num(pts.back().second) + " >= 0.9");
    out.require(near_oracle, "learned >= energy detector - 5 pp everywhere [snr:learned/oracle " + oracle_text + "]");
    return out;
}

// 6 --------------------------------------------------------------------

Outcome attack_trends() {
    Outcome out;
    auto& d = desk();
    const auto& models = d.channel_model(20, 10.0).models;
    auto t = d.base(20);
    t.channel.snr_db = 10.0;
    const std::vector<AttackKind> kinds{AttackKind::FGSM, AttackKind::Gaussian};
    const auto points =
        evaluate_attack(models, d.data.test, kPsrGrid, kinds, t.channel, t.sensing, derive_seed(kSeed, "eval"));
    const double clean = *points.front().metrics.task_accuracy;
    std::map<std::pair<AttackKind, double>, double> acc;
    std::vector<std::pair<double, double>> fgsm_pts, gauss_pts;
    for (const auto& p : points) {
        if (p.kind == AttackKind::None) continue;
        acc[{p.kind, p.psr_db}] = *p.metrics.task_accuracy;
        (p.kind == AttackKind::FGSM ? fgsm_pts : gauss_pts).emplace_back(p.psr_db, *p.metrics.task_accuracy);
    }
    out.note("clean accuracy " + num(clean) + "; gaussian [" + curve_text(gauss_pts) + "]");
    require_trend(out, "FGSM accuracy non-increasing in PSR (2 pp)", fgsm_pts, false, kTrendAccTol, false);
    const double f10 = acc[{AttackKind::FGSM, -10.0}], g10 = acc[{AttackKind::Gaussian, -10.0}];
    out.require(f10 <= g10 - kAttackGap, "at -10 dB FGSM " + num(f10) + " <= Gaussian " + num(g10) + " - 5 pp");
    const double g20 = acc[{AttackKind::Gaussian, -20.0}];
    out.require(std::abs(g20 - clean) <= kGaussianCleanGap, "Gaussian at -20 dB " + num(g20) + " within 5 pp of clean");

    // PSR round trip over both perturbations.
    const auto batch = slice(d.data.test, 0, 64);
    const auto draw = draw_channel({64, 20}, t.channel, *std::make_unique<Rng>(derive_seed(kSeed, "roundtrip")));
    const auto chain = semantic_attack_chain(models, draw, t.channel, batch.labels);
    double worst = 0.0;
    const std::size_t d_in = batch.images.size() / 64;
    for (double psr : kPsrGrid) {
        std::vector<double> eps(64);
        for (std::size_t i = 0; i < 64; ++i) {
            eps[i] = psr_to_epsilon(psr, std::span<const double>(batch.images.data() + i * d_in, d_in));
        }
        Rng rng(derive_seed(kSeed, "roundtrip-noise"));
        const auto adv = fgsm(chain, batch.images, eps);
        const auto noisy = gaussian_perturb(batch.images, psr, rng);
        for (std::size_t i = 0; i < 64; ++i) {
            const std::span<const double> x(batch.images.data() + i * d_in, d_in);
            worst = std::max(worst, std::abs(realized_psr_db(x, {adv.data() + i * d_in, d_in}) - psr));
            worst = std::max(worst, std::abs(realized_psr_db(x, {noisy.data() + i * d_in, d_in}) - psr));
        }
    }
    out.require(worst <= kPsrRoundTripDb, "PSR round trip worst error " + num(worst, 3) + " dB <= 0.1 dB");
    return out;
}

// 7 --------------------------------------------------------------------

Outcome multitask_consistency() {
    Outcome out;
    auto& d = desk();
    auto t = d.base(20);
    t.weights = {1.0, 0.0, 0.0};
    const auto data = slice(d.data.train, 0, 640);

    Models joint = build_models(t.cfg, kSeed);
    Models alone = joint;
    alone.reconstruction.reset();
    alone.sensing.reset();
    Trainer a(t, joint), b(t, alone);

    auto w = t;
    w.weights = {1.0, 0.7, 0.3};
    Models weighted = build_models(w.cfg, kSeed);
    Trainer c(w, weighted);

    bool same = true, identity = true;
    std::size_t steps = 0;
    for (std::size_t epoch = 0; epoch < 3; ++epoch) {
        for (std::size_t s = 0; s + t.batch_size <= data.size(); s += t.batch_size) {
            const auto batch = slice(data, s, s + t.batch_size);
            const auto la = a.step(batch.images, batch.labels);
            const auto lb = b.step(batch.images, batch.labels);
            const auto lc = c.step(batch.images, batch.labels);
            same = same && joint.encoder == alone.encoder && *joint.semantic == *alone.semantic &&
                   la.semantic_ce == lb.semantic_ce;
            for (const auto& [cfg, l] : {std::pair{&t, la}, std::pair{&t, lb}, std::pair{&w, lc}}) {
                identity = identity && l.total == combine(cfg->weights, l.semantic_ce, l.reconstruction_mse, l.sensing_ce);
            }
            ++steps;
        }
    }
    out.require(same, "(1,0,0) joint training matches task-only training bit-exactly over " + std::to_string(steps) +
                          " steps");
    out.require(identity, "loss breakdown total == weighted sum on every step");
    return out;
}

// 8 --------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism_and_io() {
    Outcome out;
    const auto root = std::filesystem::temp_directory_path() / "semcom_acceptance";
    std::filesystem::remove_all(root);

    ExperimentConfig c;
    c.experiments = {ExperimentKind::TaskAccuracyVsSnr, ExperimentKind::ReconstructionVsSnr, ExperimentKind::SensingVsSnr,
                     ExperimentKind::AccuracyVsPsr};
    c.snr_grid = {0, 10};
    c.nc_grid = {20};
    c.sensing_snr_grid = {0, 10};
    c.psr_grid = {-20, -10};
    c.data.synthetic = true;
    c.data.synthetic_train = 300;
    c.data.synthetic_test = 100;
    c.train.cfg.input_shape = {kSide, kSide, 3};
    c.train.epochs = 2;
    c.train.seed = 7;
    std::ostringstream log;
    bool ran = true;
    for (const char* run : {"a", "b"}) {
        c.out = root / run;
        ran = ran && run_experiment(c, log).ok();
    }
    bool identical = ran;
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root / "a")) {
        if (!entry.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(entry.path(), root / "a");
        if (rel == "resolved.cfg") continue;  // differs only in `out`
        identical = identical && slurp(entry.path()) == slurp(root / "b" / rel);
        ++files;
    }
    out.require(identical, "two runs of one (config, seed): " + std::to_string(files) + " output files byte-identical");

    // CIFAR-10 batch files: bytes -> dataset -> bytes.
    const auto cifar = root / "cifar";
    std::filesystem::create_directories(cifar);
    Rng rng(derive_seed(kSeed, "cifar-bytes"));
    std::uniform_int_distribution<int> byte(0, 255), label(0, 9);
    bool round_trip = true;
    auto make_file = [&](const std::string& name, std::size_t records) {
        std::vector<std::uint8_t> bytes(records * kCifarRecord);
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            bytes[i] = static_cast<std::uint8_t>(i % kCifarRecord == 0 ? label(rng) : byte(rng));
        }
        std::ofstream(cifar / name, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                             static_cast<std::streamsize>(bytes.size()));
        return bytes;
    };
    std::vector<std::vector<std::uint8_t>> originals;
    for (int i = 1; i <= 5; ++i) originals.push_back(make_file("data_batch_" + std::to_string(i) + ".bin", 20));
    originals.push_back(make_file("test_batch.bin", 30));
    const auto [train, test] = load_cifar10(cifar);
    const auto train_bytes = serialize_cifar10(train);
    std::vector<std::uint8_t> expected;
    for (int i = 0; i < 5; ++i) expected.insert(expected.end(), originals[i].begin(), originals[i].end());
    round_trip = train_bytes == expected && serialize_cifar10(test) == originals[5];
    out.require(round_trip, "CIFAR-10 batch files round-trip bit-exactly (" + std::to_string(train.size()) + " + " +
                                std::to_string(test.size()) + " records)");

    if (const char* real = std::getenv("SEMCOM_DATASET"); real && *real) {
        const auto file = std::filesystem::path(real) / "test_batch.bin";
        const auto bytes = slurp(file);
        const auto parsed = load_cifar10_file(file, Split::Test);
        const auto back = serialize_cifar10(parsed);
        out.require(std::equal(back.begin(), back.end(), bytes.begin(), bytes.end(),
                               [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); }),
                    "real test_batch.bin round-trips bit-exactly");
    }

    auto truncated = originals[0];
    truncated.resize(truncated.size() - 100);
    std::ofstream(cifar / "cut.bin", std::ios::binary)
        .write(reinterpret_cast<const char*>(truncated.data()), static_cast<std::streamsize>(truncated.size()));
    bool rejected = false;
    try {
        load_cifar10_file(cifar / "cut.bin", Split::Train);
    } catch (const DataError& e) {
        rejected = std::string(e.what()).find("truncated") != std::string::npos;
    }
    out.require(rejected, "truncated batch file rejected");
    std::filesystem::remove_all(root);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance gate"};
    std::vector<int> only;
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient correctness", gradient_correctness},
        {"channel fidelity", channel_fidelity},
        {"task accuracy rises with SNR", task_accuracy_trend},
        {"reconstruction loss falls with SNR and n_c", reconstruction_trend},
        {"sensing accuracy rises with sensing SNR", sensing_trend},
        {"adversarial accuracy vs PSR", attack_trends},
        {"multi-task consistency", multitask_consistency},
        {"determinism and CIFAR-10 I/O", determinism_and_io},
    };
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        all = all && o.pass;
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << " ("
                  << num(seconds_since(t0), 3) << " s)\n";
        for (const auto& line : o.details) std::cout << "    " << line << "\n";
        std::cout.flush();
    }
    return all ? 0 : 1;
}
