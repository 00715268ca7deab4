// Batch front-end: dataset generation, training, sampling rollouts, NFE
// benchmarks and schedule dumps.
//
// Exit codes: 0 success, 2 config validation failure, 3 runtime failure.
// Errors are emitted as a JSON object on stderr.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowvid/nfe.hpp"
#include "flowvid/predictor.hpp"
#include "flowvid/rollout.hpp"
#include "flowvid/samplers.hpp"
#include "flowvid/synthetic.hpp"
#include "flowvid/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flowvid;

namespace {

json g_config_file; // values from --config; CLI flags take precedence

template <typename T>
T jget(const std::string& key, T fallback) {
    if (g_config_file.contains(key))
        return g_config_file.at(key).get<T>();
    return fallback;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path.string());
    out << text;
    if (!out)
        throw std::runtime_error("write failed for " + path.string());
}

void echo_config(const fs::path& out_dir, const json& resolved) {
    write_text(out_dir / "config.json", resolved.dump(2) + "\n");
}

std::string zero_pad(std::size_t value, int width) {
    std::ostringstream s;
    s.width(width);
    s.fill('0');
    s << value;
    return s.str();
}

// --- shared option blocks ----------------------------------------------------

struct ProcessOpts {
    std::size_t data_ids = 3;
    std::size_t tokens = 2; // N
    std::string dynamics = "shift";
    double noise = 0.0;
    std::uint64_t perm_seed = 7;

    void attach(CLI::App& app) {
        app.add_option("--data-ids", data_ids, "data token ids (vocab is this + mask)")
            ->default_val(jget<std::size_t>("data_ids", data_ids));
        app.add_option("--N", tokens, "tokens per frame")
            ->default_val(jget<std::size_t>("N", tokens));
        app.add_option("--dynamics", dynamics, "shift|perm")
            ->default_val(jget<std::string>("dynamics", dynamics))
            ->check(CLI::IsMember({"shift", "perm"}));
        app.add_option("--noise", noise, "process noise in [0,1)")
            ->default_val(jget<double>("noise", noise));
        app.add_option("--perm-seed", perm_seed, "permutation seed (perm dynamics)")
            ->default_val(jget<std::uint64_t>("perm_seed", perm_seed));
    }

    SyntheticProcess build() const {
        if (dynamics == "shift")
            return SyntheticProcess::cyclic_shift(
                static_cast<std::uint32_t>(data_ids), tokens, noise);
        return SyntheticProcess::permutation_walk(
            static_cast<std::uint32_t>(data_ids), tokens, noise, perm_seed);
    }

    json resolved() const {
        return {{"data_ids", data_ids}, {"N", tokens}, {"dynamics", dynamics},
                {"noise", noise},       {"perm_seed", perm_seed}};
    }
};

struct SamplerOpts {
    std::string sampler = "mgm";
    std::size_t steps = 0; // 0 = per-mode default
    double guidance = 0.0;
    double partial_ratio = 0.5;
    bool timestep_independent = false;
    bool argmax = false;

    void attach(CLI::App& app) {
        app.add_option("--sampler", sampler, "fm|mgm|df|rolling")
            ->default_val(jget<std::string>("sampler", sampler))
            ->check(CLI::IsMember({"fm", "mgm", "df", "rolling"}));
        app.add_option("--steps", steps, "sampling steps T (0 = mode default)")
            ->default_val(jget<std::size_t>("steps", steps));
        app.add_option("--guidance", guidance, "partial context guidance scale")
            ->default_val(jget<double>("guidance", guidance));
        app.add_option("--partial-ratio", partial_ratio,
                       "context corruption ratio for guided passes")
            ->default_val(jget<double>("partial_ratio", partial_ratio));
        app.add_flag("--timestep-independent", timestep_independent,
                     "pass t = 0 to the predictor (MGM)");
        app.add_flag("--argmax", argmax, "deterministic value choice");
    }

    SamplerConfig build() const {
        SamplerConfig cfg;
        if (sampler == "fm")
            cfg = SamplerConfig::fm(steps ? steps : 250);
        else if (sampler == "mgm")
            cfg = SamplerConfig::mgm(steps ? steps : 20);
        else if (sampler == "df")
            cfg = SamplerConfig::df_pyramid(steps ? steps : 250);
        else
            cfg = SamplerConfig::rolling(steps ? steps : 250);
        cfg.guidance_scale = guidance;
        cfg.partial_ratio = partial_ratio;
        cfg.timestep_independent = timestep_independent ||
                                   jget<bool>("timestep_independent", false);
        cfg.argmax = argmax || jget<bool>("argmax", false);
        cfg.validate();
        return cfg;
    }

    json resolved(const SamplerConfig& cfg) const {
        return {{"sampler", sampler},
                {"steps", cfg.steps},
                {"guidance", cfg.guidance_scale},
                {"partial_ratio", cfg.partial_ratio},
                {"timestep_independent", cfg.timestep_independent},
                {"argmax", cfg.argmax}};
    }
};

// --- gen ---------------------------------------------------------------------

struct GenCmd {
    ProcessOpts process;
    std::size_t count = 16;
    std::size_t frames = 32;
    std::uint64_t seed = 0;
    std::string out = "out/gen";

    void attach(CLI::App& app) {
        process.attach(app);
        app.add_option("--count", count, "number of videos")
            ->default_val(jget<std::size_t>("count", count));
        app.add_option("--frames", frames, "frames per video (L)")
            ->default_val(jget<std::size_t>("frames", frames));
        app.add_option("--seed", seed)->default_val(jget<std::uint64_t>("seed", seed));
        app.add_option("--out", out, "output directory")
            ->default_val(jget<std::string>("out", out));
    }

    int run() const {
        const SyntheticProcess proc = process.build();
        fs::create_directories(out);
        json manifest;
        manifest["count"] = count;
        manifest["frames"] = frames;
        manifest["files"] = json::array();
        for (std::size_t i = 0; i < count; ++i) {
            Rng rng(seed + i);
            const TokenVideo video = gen_video(proc, frames, rng);
            const std::string name = "video_" + zero_pad(i, 4) + ".mftv";
            save_video((fs::path(out) / name).string(), video, proc.vocab);
            manifest["files"].push_back(name);
        }
        write_text(fs::path(out) / "manifest.json", manifest.dump(2) + "\n");
        json resolved = process.resolved();
        resolved["count"] = count;
        resolved["frames"] = frames;
        resolved["seed"] = seed;
        resolved["out"] = out;
        echo_config(out, resolved);
        return 0;
    }
};

std::pair<std::vector<TokenVideo>, Vocabulary> load_dataset(const std::string& dir) {
    const json manifest = json::parse(std::ifstream(fs::path(dir) / "manifest.json"));
    std::vector<TokenVideo> corpus;
    Vocabulary vocab;
    for (const auto& name : manifest.at("files")) {
        auto [video, v] = load_video((fs::path(dir) / name.get<std::string>()).string());
        vocab = v;
        corpus.push_back(std::move(video));
    }
    if (corpus.empty())
        throw std::invalid_argument("dataset " + dir + " is empty");
    return {std::move(corpus), vocab};
}

// --- train -------------------------------------------------------------------

struct TrainCmd {
    std::string data;
    std::string model = "tabular";
    std::string mode = "frame";
    std::string schedule = "linear";
    double sigmoid_a = 6.0;
    std::size_t k = 4;
    std::size_t steps = 2000;
    std::size_t batch = 8;
    std::size_t hidden = 32;
    double lr = 0.0; // 0 = per-model default
    double snr_decay = 0.9;
    double snr_clamp = 5.0;
    std::uint64_t seed = 0;
    std::string out = "out/train";

    void attach(CLI::App& app) {
        app.add_option("--data", data, "dataset directory from `gen`")
            ->default_val(jget<std::string>("data", data));
        app.add_option("--model", model, "tabular|mlp")
            ->default_val(jget<std::string>("model", model))
            ->check(CLI::IsMember({"tabular", "mlp"}));
        app.add_option("--mode", mode, "frame|constant masking level draw")
            ->default_val(jget<std::string>("mode", mode))
            ->check(CLI::IsMember({"frame", "constant"}));
        app.add_option("--schedule", schedule, "linear|sigmoid")
            ->default_val(jget<std::string>("schedule", schedule))
            ->check(CLI::IsMember({"linear", "sigmoid"}));
        app.add_option("--sigmoid-a", sigmoid_a)
            ->default_val(jget<double>("sigmoid_a", sigmoid_a));
        app.add_option("--k", k, "training window length")
            ->default_val(jget<std::size_t>("k", k));
        app.add_option("--train-steps", steps)
            ->default_val(jget<std::size_t>("train_steps", steps));
        app.add_option("--batch", batch)->default_val(jget<std::size_t>("batch", batch));
        app.add_option("--hidden", hidden, "mlp hidden units")
            ->default_val(jget<std::size_t>("hidden", hidden));
        app.add_option("--lr", lr, "learning rate (0 = model default)")
            ->default_val(jget<double>("lr", lr));
        app.add_option("--snr-decay", snr_decay)
            ->default_val(jget<double>("snr_decay", snr_decay));
        app.add_option("--snr-clamp", snr_clamp)
            ->default_val(jget<double>("snr_clamp", snr_clamp));
        app.add_option("--seed", seed)->default_val(jget<std::uint64_t>("seed", seed));
        app.add_option("--out", out)->default_val(jget<std::string>("out", out));
    }

    int run() const {
        if (data.empty())
            throw std::invalid_argument("train: --data is required");
        auto [corpus, vocab] = load_dataset(data);

        std::unique_ptr<TrainablePredictor> net;
        if (model == "tabular")
            net = std::make_unique<TabularPredictor>(vocab, k);
        else
            net = std::make_unique<MlpPredictor>(vocab, k, hidden, seed);

        TrainConfig cfg;
        cfg.learning_rate = lr > 0.0 ? lr : (model == "tabular" ? 0.05 : 0.01);
        cfg.steps = steps;
        cfg.batch_size = batch;
        cfg.mode = mode == "frame" ? TrainMode::FrameLevel : TrainMode::ConstantLevel;
        cfg.schedule = schedule == "linear" ? MaskSchedule::linear()
                                            : MaskSchedule::sigmoid(sigmoid_a);
        cfg.snr_decay = snr_decay;
        cfg.snr_clamp = snr_clamp;
        cfg.seed = seed;

        const TrainLog log = train(*net, corpus, cfg);

        fs::create_directories(out);
        save_checkpoint((fs::path(out) / "checkpoint.bin").string(), *net,
                        {{"mode", mode},
                         {"schedule", schedule},
                         {"data", data},
                         {"seed", std::to_string(seed)}});
        std::ostringstream csv;
        csv << "step,loss,masked_accuracy\n";
        for (std::size_t i = 0; i < log.loss.size(); ++i)
            csv << i << ',' << log.loss[i] << ',' << log.masked_accuracy[i] << '\n';
        write_text(fs::path(out) / "loss.csv", csv.str());
        echo_config(out, {{"data", data}, {"model", model}, {"mode", mode},
                          {"schedule", schedule}, {"sigmoid_a", sigmoid_a},
                          {"k", k}, {"train_steps", steps}, {"batch", batch},
                          {"hidden", hidden}, {"lr", cfg.learning_rate},
                          {"snr_decay", snr_decay}, {"snr_clamp", snr_clamp},
                          {"seed", seed}, {"out", out}});
        if (!log.loss.empty())
            std::cout << "final loss " << log.loss.back() << ", trailing accuracy "
                      << log.trailing_mean_accuracy(200) << "\n";
        return 0;
    }
};

// --- rollout -----------------------------------------------------------------

struct RolloutCmd {
    ProcessOpts process;
    SamplerOpts sampler;
    std::string ckpt;
    bool oracle = false;
    std::size_t total_length = 40; // L
    std::size_t k = 4;
    std::size_t context = 1; // m
    std::size_t stride = 0;  // 0 = k - m
    std::size_t count = 1;
    std::size_t jobs = 1;
    std::uint64_t seed = 0;
    std::string context_file;
    std::string out = "out/rollout";

    void attach(CLI::App& app) {
        process.attach(app);
        sampler.attach(app);
        app.add_option("--ckpt", ckpt, "checkpoint from `train`")
            ->default_val(jget<std::string>("ckpt", ckpt));
        app.add_flag("--oracle", oracle, "use the exact-posterior oracle predictor");
        app.add_option("--L", total_length, "frames to generate")
            ->default_val(jget<std::size_t>("L", total_length));
        app.add_option("--k", k, "chunk length")
            ->default_val(jget<std::size_t>("k", k));
        app.add_option("--m", context, "context frames")
            ->default_val(jget<std::size_t>("m", context));
        app.add_option("--stride", stride, "chunk stride s (0 = k - m)")
            ->default_val(jget<std::size_t>("stride", stride));
        app.add_option("--count", count, "independent videos")
            ->default_val(jget<std::size_t>("count", count));
        app.add_option("--jobs", jobs, "parallel workers across videos")
            ->default_val(jget<std::size_t>("jobs", jobs));
        app.add_option("--seed", seed)->default_val(jget<std::uint64_t>("seed", seed));
        app.add_option("--context-from", context_file,
                       "video file supplying the initial context frames")
            ->default_val(jget<std::string>("context_from", context_file));
        app.add_option("--out", out)->default_val(jget<std::string>("out", out));
    }

    int run() const {
        if (!oracle && ckpt.empty())
            throw std::invalid_argument("rollout: need --ckpt or --oracle");
        const SamplerConfig cfg = sampler.build();
        const std::size_t s = stride ? stride : k - context;

        SyntheticProcess proc = process.build();
        std::unique_ptr<Predictor> model;
        std::unique_ptr<LoadedCheckpoint> loaded;
        Vocabulary vocab;
        if (oracle) {
            vocab = proc.vocab;
            model = std::make_unique<OraclePredictor>(proc);
        } else {
            loaded = std::make_unique<LoadedCheckpoint>(load_checkpoint(ckpt));
            vocab = loaded->model->vocab();
            model = nullptr;
        }
        Predictor& predictor = oracle ? *model : *loaded->model;

        fs::create_directories(out);
        std::vector<NfeReport> reports(count);
        std::vector<std::string> names(count);

        auto run_one = [&](std::size_t index) {
            Rng rng(seed + index);
            std::vector<TokenFrame> ctx;
            if (!context_file.empty()) {
                auto [video, file_vocab] = load_video(context_file);
                if (file_vocab.size != vocab.size)
                    throw std::invalid_argument("rollout: context vocabulary mismatch");
                if (video.length() < context)
                    throw std::invalid_argument("rollout: context file too short");
                ctx.assign(video.frames.begin(),
                           video.frames.begin() + static_cast<std::ptrdiff_t>(context));
            } else {
                const TokenVideo truth = gen_video(proc, context, rng);
                ctx = truth.frames;
            }

            CountingPredictor counting(predictor);
            const auto start = std::chrono::steady_clock::now();
            TokenVideo video;
            NfeReport report;
            report.total_length = total_length;
            report.k = k;
            report.context = context;
            report.steps = cfg.steps;
            if (cfg.mode == SamplerMode::Rolling) {
                video = rolling_sample_video(counting, ctx, total_length, k, cfg,
                                             vocab, rng);
                report.method = "rolling";
                report.stride = 0;
                report.predicted_nfe = nfe_rolling(total_length, k, context, cfg.steps);
            } else {
                const ChunkPlan plan = plan_chunks(total_length, k, context, s);
                report.predicted_nfe =
                    planned_nfe(plan, cfg, ctx.front().size());
                video = rollout_video(counting, cfg, ctx, total_length, k, s, vocab,
                                      rng);
                report.stride = s;
                report.method = cfg.mode == SamplerMode::FMStyle   ? "fm"
                                : cfg.mode == SamplerMode::MGMStyle ? "mgm"
                                                                    : "df";
            }
            report.measured_nfe = counting.calls();
            report.wall_clock_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count();
            report.check();

            const std::string name = "gen_" + zero_pad(index, 4) + ".mftv";
            save_video((fs::path(out) / name).string(), video, vocab);
            reports[index] = std::move(report);
            names[index] = name;
        };

        if (jobs <= 1 || count <= 1) {
            for (std::size_t i = 0; i < count; ++i)
                run_one(i);
        } else {
            std::vector<std::thread> workers;
            std::atomic<std::size_t> next{0};
            std::mutex err_mutex;
            std::exception_ptr first_error;
            for (std::size_t w = 0; w < std::min(jobs, count); ++w)
                workers.emplace_back([&] {
                    for (std::size_t i = next.fetch_add(1); i < count;
                         i = next.fetch_add(1)) {
                        try {
                            run_one(i);
                        } catch (...) {
                            std::lock_guard lock(err_mutex);
                            if (!first_error)
                                first_error = std::current_exception();
                        }
                    }
                });
            for (auto& t : workers)
                t.join();
            if (first_error)
                std::rethrow_exception(first_error);
        }

        write_text(fs::path(out) / "nfe_report.csv", nfe_reports_to_csv(reports));
        write_text(fs::path(out) / "nfe_report.json",
                   nfe_reports_to_json(reports) + "\n");
        json resolved = process.resolved();
        resolved.update(sampler.resolved(cfg));
        resolved["ckpt"] = ckpt;
        resolved["oracle"] = oracle;
        resolved["L"] = total_length;
        resolved["k"] = k;
        resolved["m"] = context;
        resolved["stride"] = s;
        resolved["count"] = count;
        resolved["jobs"] = jobs;
        resolved["seed"] = seed;
        resolved["context_from"] = context_file;
        resolved["out"] = out;
        echo_config(out, resolved);
        std::cout << "measured NFE " << reports.front().measured_nfe << " (predicted "
                  << reports.front().predicted_nfe << ")\n";
        return 0;
    }
};

// --- bench -------------------------------------------------------------------

struct BenchCmd {
    ProcessOpts process;
    std::vector<std::string> methods = {"fm", "mgm", "df", "rolling"};
    bool measure = true;
    std::size_t desk_k = 4;
    std::size_t desk_m = 1;
    std::size_t desk_steps = 6;
    std::uint64_t seed = 0;
    std::string out = "out/bench";

    void attach(CLI::App& app) {
        process.attach(app);
        app.add_option("--methods", methods, "subset of fm,mgm,df,rolling")
            ->delimiter(',');
        app.add_flag("!--no-measure", measure, "skip desk-scale measured runs");
        app.add_option("--desk-k", desk_k)->default_val(jget<std::size_t>("desk_k", desk_k));
        app.add_option("--desk-m", desk_m)->default_val(jget<std::size_t>("desk_m", desk_m));
        app.add_option("--desk-steps", desk_steps)
            ->default_val(jget<std::size_t>("desk_steps", desk_steps));
        app.add_option("--seed", seed)->default_val(jget<std::uint64_t>("seed", seed));
        app.add_option("--out", out)->default_val(jget<std::string>("out", out));
    }

    int run() const {
        std::vector<NfeReport> rows;
        const auto has = [&](const std::string& name) {
            return std::find(methods.begin(), methods.end(), name) != methods.end();
        };

        // paper-shaped geometries: (k, m, s) with L = factor * k
        struct Geometry {
            std::string label;
            std::size_t k, m, s;
        };
        const std::vector<Geometry> geometries = {
            {"ffs-full", 16, 2, 14},  {"ffs-ar", 16, 15, 1},
            {"dmlab-full", 36, 12, 24}, {"dmlab-ar", 36, 35, 1}};
        for (const auto& g : geometries) {
            for (const std::size_t factor : {1, 2, 5, 10}) {
                const std::size_t L = factor * g.k;
                auto push = [&](const std::string& method, std::size_t steps,
                                std::size_t predicted) {
                    rows.push_back({g.label + "/" + method, L, g.k, g.m, g.s, steps,
                                    predicted, 0, 0.0});
                };
                if (has("mgm"))
                    push("mgm", 20, nfe_mgm(L, g.k, g.s));
                if (has("fm"))
                    push("fm", 250, nfe_fm(L, g.k, g.s));
                if (has("df"))
                    push("df", 250, nfe_df(L, g.k, g.s));
                if (has("rolling"))
                    push("rolling", 250, nfe_rolling(L, g.k, g.m));
            }
        }

        if (measure) {
            SyntheticProcess proc = process.build();
            OraclePredictor oracle(proc);
            const std::size_t k = desk_k, m = desk_m, s = k - m;
            const std::size_t L = 5 * k;
            const std::size_t T = desk_steps;
            for (const auto& method : std::vector<std::string>{"fm", "mgm", "df",
                                                               "rolling"}) {
                if (!has(method))
                    continue;
                Rng rng(seed);
                const TokenVideo truth = gen_video(proc, m, rng);
                CountingPredictor counting(oracle);
                NfeReport r;
                r.method = "desk/" + method;
                r.total_length = L;
                r.k = k;
                r.context = m;
                r.steps = T;
                const auto start = std::chrono::steady_clock::now();
                if (method == "rolling") {
                    SamplerConfig cfg = SamplerConfig::rolling(T);
                    rolling_sample_video(counting, truth.frames, L, k, cfg,
                                         proc.vocab, rng);
                    r.stride = 0;
                    r.predicted_nfe = nfe_rolling(L, k, m, T);
                } else {
                    SamplerConfig cfg = method == "fm" ? SamplerConfig::fm(T)
                                        : method == "mgm"
                                            ? SamplerConfig::mgm(T)
                                            : SamplerConfig::df_pyramid(T);
                    r.stride = s;
                    r.predicted_nfe = planned_nfe(plan_chunks(L, k, m, s), cfg,
                                                  proc.n);
                    rollout_video(counting, cfg, truth.frames, L, k, s, proc.vocab,
                                  rng);
                }
                r.measured_nfe = counting.calls();
                r.wall_clock_s = std::chrono::duration<double>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();
                r.check();
                rows.push_back(std::move(r));
            }
        }

        const std::string csv = nfe_reports_to_csv(rows);
        std::cout << csv;
        if (!out.empty()) {
            fs::create_directories(out);
            write_text(fs::path(out) / "bench.csv", csv);
            echo_config(out, {{"methods", methods}, {"measure", measure},
                              {"desk_k", desk_k}, {"desk_m", desk_m},
                              {"desk_steps", desk_steps}, {"seed", seed},
                              {"out", out}});
        }
        return 0;
    }
};

// --- schedules ---------------------------------------------------------------

struct SchedulesCmd {
    std::size_t k = 16;
    std::size_t steps = 250;
    std::size_t context = 2;
    std::string out = "out/schedules";

    void attach(CLI::App& app) {
        app.add_option("--k", k)->default_val(jget<std::size_t>("k", k));
        app.add_option("--T", steps)->default_val(jget<std::size_t>("T", steps));
        app.add_option("--m", context)->default_val(jget<std::size_t>("m", context));
        app.add_option("--out", out)->default_val(jget<std::string>("out", out));
    }

    int run() const {
        fs::create_directories(out);
        const ScheduleMatrix mat = pyramid_schedule_matrix(k, steps);
        std::ostringstream pyramid;
        for (const auto& row : mat.rows) {
            for (std::size_t j = 0; j < row.size(); ++j)
                pyramid << (j ? "," : "") << row[j];
            pyramid << '\n';
        }
        write_text(fs::path(out) / "pyramid_matrix.csv", pyramid.str());

        std::ostringstream ramp;
        ramp << "window_position,mask_level\n";
        for (std::size_t j = 0; j < k; ++j) {
            const double level =
                j < context ? 0.0
                            : static_cast<double>(j - context + 1) /
                                  static_cast<double>(k - context);
            ramp << j << ',' << level << '\n';
        }
        write_text(fs::path(out) / "rolling_ramp.csv", ramp.str());
        echo_config(out, {{"k", k}, {"T", steps}, {"m", context}, {"out", out}});
        return 0;
    }
};

// --- eval --------------------------------------------------------------------

struct EvalCmd {
    std::string generated;
    std::string truth;
    std::size_t context = 1;
    std::size_t k = 0;
    std::size_t stride = 0;
    std::string out = "out/eval";

    void attach(CLI::App& app) {
        app.add_option("--generated", generated)->required();
        app.add_option("--truth", truth)->required();
        app.add_option("--m", context)->default_val(jget<std::size_t>("m", context));
        app.add_option("--k", k, "chunk length for the accuracy curve (0 = off)")
            ->default_val(jget<std::size_t>("k", k));
        app.add_option("--stride", stride)
            ->default_val(jget<std::size_t>("stride", stride));
        app.add_option("--out", out)->default_val(jget<std::string>("out", out));
    }

    int run() const {
        auto [gen, gen_vocab] = load_video(generated);
        auto [ref, ref_vocab] = load_video(truth);
        if (gen_vocab.size != ref_vocab.size)
            throw std::invalid_argument("eval: vocabulary mismatch");
        std::vector<std::pair<std::size_t, std::size_t>> segments;
        if (k > 0) {
            const std::size_t s = stride ? stride : k - context;
            segments = plan_chunks(gen.length(), k, context, s).segments();
        }
        const EvalReport report = evaluate_rollout(gen, ref, context, segments);
        fs::create_directories(out);
        write_text(fs::path(out) / "report.json", eval_report_to_json(report) + "\n");
        write_text(fs::path(out) / "report.csv", eval_report_to_csv(report));
        std::cout << eval_report_to_json(report) << "\n";
        return 0;
    }
};

json load_config_file(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config")
            return json::parse(std::ifstream(argv[i + 1]));
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--config=", 0) == 0)
            return json::parse(std::ifstream(arg.substr(9)));
    }
    return json::object();
}

} // namespace

int main(int argc, char** argv) {
    try {
        g_config_file = load_config_file(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", std::string("bad --config file: ") + e.what()}}
                  << "\n";
        return 2;
    }

    CLI::App app{"discrete flow-matching token-video engine"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)");

    GenCmd gen;
    TrainCmd train_cmd;
    RolloutCmd rollout;
    BenchCmd bench;
    SchedulesCmd schedules;
    EvalCmd eval;

    gen.attach(*app.add_subcommand("gen", "generate a synthetic dataset"));
    train_cmd.attach(*app.add_subcommand("train", "train a predictor"));
    rollout.attach(*app.add_subcommand("rollout", "generate long videos"));
    bench.attach(*app.add_subcommand("bench", "NFE formulas and measured runs"));
    schedules.attach(*app.add_subcommand("schedules", "dump sampling schedules"));
    eval.attach(*app.add_subcommand("eval", "compare generated vs ground truth"));

    // subcommands also accept --config so it can appear anywhere
    for (auto* sub : app.get_subcommands({}))
        sub->add_option("--config", config_path);

    try {
        app.parse(argc, argv);
        if (app.get_subcommand("gen")->parsed())
            return gen.run();
        if (app.get_subcommand("train")->parsed())
            return train_cmd.run();
        if (app.get_subcommand("rollout")->parsed())
            return rollout.run();
        if (app.get_subcommand("bench")->parsed())
            return bench.run();
        if (app.get_subcommand("schedules")->parsed())
            return schedules.run();
        if (app.get_subcommand("eval")->parsed())
            return eval.run();
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e); // --help
        std::cerr << json{{"error", e.what()}} << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << json{{"error", e.what()}} << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << json{{"error", e.what()}} << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}} << "\n";
        return 3;
    }
}
