// Command-line front end: dataset generation, denoiser training, assembly
// runs, the direct-optimisation baseline, evaluation and plotting.
//
// stdout carries exactly one JSON summary line; everything else goes to
// stderr. Exit codes: 0 success, 1 total failure, 2 partial failure.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "assembloid/assembler.hpp"
#include "assembloid/baselines.hpp"
#include "assembloid/datagen.hpp"
#include "assembloid/diffusion.hpp"
#include "assembloid/errors.hpp"
#include "assembloid/metrics.hpp"
#include "assembloid/ply_io.hpp"
#include "assembloid/rng.hpp"
#include "assembloid/scene_io.hpp"
#include "assembloid/tiny_denoiser.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace assembloid;

namespace {

// ---------------------------------------------------------------------------
// config plumbing

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
        json j;
        in >> j;
        if (!j.is_object()) throw ConfigError("config root must be a JSON object: " + path);
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (item.key() == a) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + context);
    }
}

template <typename T>
T get_required(const json& j, const char* key, const std::string& context) {
    if (!j.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + context);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + context);
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& context) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + context);
    }
}

// Relative output paths land under ASSEMBLOID_OUT when it is set.
std::string resolve_output(const std::string& path) {
    if (path.empty()) throw ConfigError("empty output path");
    const char* root = std::getenv("ASSEMBLOID_OUT");
    if (!root || *root == '\0' || fs::path(path).is_absolute()) return path;
    return (fs::path(root) / path).string();
}

NoiseSchedule schedule_from_config(const json& cfg) {
    const json j = cfg.value("schedule", json::object());
    check_keys(j, {"steps", "sigma_max"}, "schedule");
    const int steps = get_or<int>(j, "steps", 200, "schedule");
    const double sigma_max = get_or<double>(j, "sigma_max", 0.99, "schedule");
    return linear_schedule(steps, sigma_max);
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<int> snapshot_every;
    std::optional<std::string> denoise_mode;
    std::optional<std::string> align_mode;
    std::optional<std::string> push_trigger;
    std::optional<std::string> level;
};

int workers_or_default(const json& cfg, const Overrides& ov, const std::string& context) {
    int workers = ov.workers.value_or(get_or<int>(cfg, "workers", 0, context));
    if (workers == 0) {
        const unsigned hc = std::thread::hardware_concurrency();
        workers = hc == 0 ? 1 : static_cast<int>(hc);
    }
    if (workers < 1) throw ConfigError("workers must be >= 1");
    return workers;
}

// ---------------------------------------------------------------------------
// shared run helpers

std::vector<std::string> list_scene_dirs(const std::string& dataset) {
    if (!fs::is_directory(dataset)) throw IoError("dataset directory not found: " + dataset);
    std::vector<std::string> dirs;
    for (const auto& entry : fs::directory_iterator(dataset)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
            dirs.push_back(entry.path().string());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw IoError("no scene directories under " + dataset);
    return dirs;
}

void run_parallel(int workers, std::size_t task_count,
                  const std::function<void(std::size_t)>& task) {
    if (workers == 1 || task_count <= 1) {
        for (std::size_t i = 0; i < task_count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const std::size_t n = std::min(static_cast<std::size_t>(workers), task_count);
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < task_count; i = next.fetch_add(1)) task(i);
        });
    }
    for (std::thread& t : pool) t.join();
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::mutex log_mutex;

void log_line(const std::string& line) {
    std::lock_guard<std::mutex> lock(log_mutex);
    std::cerr << line << "\n";
}

int finish(const json& summary, std::size_t failures, std::size_t total) {
    std::cout << summary.dump() << std::endl;
    if (failures == 0) return 0;
    return failures >= total ? 1 : 2;
}

// ---------------------------------------------------------------------------
// SVG output

void write_series_svg(const std::string& path, const std::string& title,
                      const std::string& ylabel, const std::vector<double>& xs,
                      const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.empty()) throw InvalidInput("write_series_svg: bad series");
    const double left = 64, right = 616, top = 40, bottom = 360;
    double ymin = ys[0], ymax = ys[0], xmin = xs[0], xmax = xs[0];
    for (std::size_t i = 0; i < ys.size(); ++i) {
        ymin = std::min(ymin, ys[i]);
        ymax = std::max(ymax, ys[i]);
        xmin = std::min(xmin, xs[i]);
        xmax = std::max(xmax, xs[i]);
    }
    if (ymax - ymin < 1e-12) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;

    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
    auto sy = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 640 400\">\n";
    out << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    out << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
           "font-family=\"sans-serif\">" << title << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
        << bottom << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
        << "\" stroke=\"black\"/>\n";

    char buf[64];
    out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f", sx(xs[i]), sy(ys[i]));
        out << (i ? " " : "") << buf;
    }
    out << "\"/>\n";

    out << "<text x=\"" << left - 6 << "\" y=\"" << bottom + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
        << format_short(ymin) << "</text>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << top + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
        << format_short(ymax) << "</text>\n";
    out << "<text x=\"" << left << "\" y=\"" << bottom + 24
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
        << format_short(xmin) << "</text>\n";
    out << "<text x=\"" << right << "\" y=\"" << bottom + 24
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
        << format_short(xmax) << "</text>\n";
    out << "<text x=\"18\" y=\"200\" transform=\"rotate(-90 18 200)\" text-anchor=\"middle\" "
           "font-size=\"12\" font-family=\"sans-serif\">" << ylabel << "</text>\n";
    out << "<text x=\"" << right << "\" y=\"" << top - 6
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">final "
        << format_short(ys.back()) << "</text>\n";
    out << "</svg>\n";
    if (!out) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// per-trial result rows and aggregates

struct TrialRow {
    std::string scene;
    int trial = 0;
    std::string level;
    SceneMetrics metrics;
    bool failed = false;
    std::string error;
};

void write_aggregate_csv(const std::string& path, const std::vector<TrialRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "scene,trial,level,scd_x1000,pa_pct,rmse_trans_x100,rmse_rot_deg,fpa_pct\n";
    for (const TrialRow& row : rows) {
        if (row.failed) continue;
        out << row.scene << "," << row.trial << "," << row.level << ","
            << format_double(row.metrics.scd * 1000.0) << ","
            << format_double(row.metrics.pa * 100.0) << ","
            << format_double(row.metrics.rmse_translation * 100.0) << ","
            << format_double(row.metrics.rmse_rotation_deg) << ","
            << format_double(row.metrics.fpa * 100.0) << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

json mean_metrics(const std::vector<TrialRow>& rows) {
    double scd = 0, pa = 0, fpa = 0, rt = 0, rr = 0;
    std::size_t n = 0;
    for (const TrialRow& row : rows) {
        if (row.failed) continue;
        scd += row.metrics.scd;
        pa += row.metrics.pa;
        fpa += row.metrics.fpa;
        rt += row.metrics.rmse_translation;
        rr += row.metrics.rmse_rotation_deg;
        ++n;
    }
    if (n == 0) return json::object();
    const double d = static_cast<double>(n);
    return json{{"scd_x1000", scd / d * 1000.0},
                {"pa_pct", pa / d * 100.0},
                {"fpa_pct", fpa / d * 100.0},
                {"rmse_trans_x100", rt / d * 100.0},
                {"rmse_rot_deg", rr / d}};
}

json metrics_to_json(const SceneMetrics& m) {
    return json{{"scd", m.scd},
                {"pa", m.pa},
                {"fpa", m.fpa},
                {"rmse_trans", m.rmse_translation},
                {"rmse_rot_deg", m.rmse_rotation_deg}};
}

std::size_t count_failures(const std::vector<TrialRow>& rows) {
    std::size_t f = 0;
    for (const TrialRow& row : rows) f += row.failed ? 1 : 0;
    return f;
}

// ---------------------------------------------------------------------------
// gen

int cmd_gen(const json& cfg, const Overrides& ov) {
    check_keys(cfg, {"count", "family", "points_per_part", "output", "seed"}, "gen config");
    const int count = get_required<int>(cfg, "count", "gen config");
    if (count < 1) throw ConfigError("gen: count must be >= 1");
    const std::string family = get_or<std::string>(cfg, "family", "chair", "gen config");
    const int ppp = get_or<int>(cfg, "points_per_part", 100, "gen config");
    const std::string output = resolve_output(get_required<std::string>(cfg, "output", "gen config"));
    const std::uint64_t seed = ov.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 0, "gen config"));

    fs::create_directories(output);
    for (int i = 0; i < count; ++i) {
        ShapeSpec spec;
        spec.family = family_from_string(family);
        spec.points_per_part = ppp;
        spec.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        const GeneratedScene generated = generate_scene(spec);
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%04d", i);
        save_scene((fs::path(output) / name).string(), generated.scene, generated.part_names,
                   spec.seed);
    }
    log_line("[gen] wrote " + std::to_string(count) + " scenes to " + output);
    return finish(json{{"command", "gen"},
                       {"count", count},
                       {"family", family},
                       {"points_per_part", ppp},
                       {"seed", seed},
                       {"output", output}},
                  0, 1);
}

// ---------------------------------------------------------------------------
// train-denoiser

int cmd_train(const json& cfg, const Overrides& ov) {
    check_keys(cfg, {"dataset", "output", "seed", "schedule", "arch", "training"}, "train config");
    const std::string dataset = get_required<std::string>(cfg, "dataset", "train config");
    const std::string output =
        resolve_output(get_required<std::string>(cfg, "output", "train config"));
    const std::uint64_t seed =
        ov.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 0, "train config"));
    const NoiseSchedule schedule = schedule_from_config(cfg);

    const json arch_j = cfg.value("arch", json::object());
    check_keys(arch_j, {"hidden1", "hidden2", "step_embed"}, "arch");
    TinyDenoiserConfig arch;
    arch.hidden1 = get_or<int>(arch_j, "hidden1", 32, "arch");
    arch.hidden2 = get_or<int>(arch_j, "hidden2", 32, "arch");
    arch.step_embed = get_or<int>(arch_j, "step_embed", 8, "arch");

    const json train_j = cfg.value("training", json::object());
    check_keys(train_j, {"steps", "learning_rate", "momentum"}, "training");
    TrainingConfig training;
    training.steps = get_or<int>(train_j, "steps", 3000, "training");
    training.learning_rate = get_or<double>(train_j, "learning_rate", 0.02, "training");
    training.momentum = get_or<double>(train_j, "momentum", 0.9, "training");

    std::vector<Scene> scenes;
    for (const std::string& dir : list_scene_dirs(dataset)) scenes.push_back(load_scene(dir).scene);

    Rng rng(derive_seed(seed, 1));
    const TrainingResult result = train_tiny_denoiser(scenes, schedule, arch, training, rng);

    const fs::path out_path(output);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    save_checkpoint(output, result.denoiser);

    std::ofstream losses(output + ".losses.csv");
    if (!losses) throw IoError("cannot write " + output + ".losses.csv");
    losses << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
        losses << i << "," << format_double(result.loss_curve[i]) << "\n";

    auto window_mean = [&](std::size_t begin, std::size_t end) {
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i) acc += result.loss_curve[i];
        return acc / static_cast<double>(end - begin);
    };
    const std::size_t n = result.loss_curve.size();
    const std::size_t w = std::min<std::size_t>(50, n);
    const double initial_loss = n ? window_mean(0, w) : 0.0;
    const double final_loss = n ? window_mean(n - w, n) : 0.0;

    log_line("[train] " + std::to_string(n) + " steps, loss " + format_short(initial_loss) +
             " -> " + format_short(final_loss));
    return finish(json{{"command", "train-denoiser"},
                       {"scenes", scenes.size()},
                       {"steps", n},
                       {"initial_loss", initial_loss},
                       {"final_loss", final_loss},
                       {"diverged", result.diverged},
                       {"parameters", result.denoiser.parameter_count()},
                       {"checkpoint", output}},
                  result.diverged ? 1 : 0, 1);
}

// ---------------------------------------------------------------------------
// assemble

struct DenoiserSpec {
    std::string kind;  // memorized | gmm | checkpoint
    double variance = 0.25;
    std::shared_ptr<TinyDenoiser> checkpoint;
};

DenoiserSpec denoiser_spec_from_config(const json& cfg) {
    const json j = cfg.value("denoiser", json{{"kind", "memorized"}});
    check_keys(j, {"kind", "variance", "path"}, "denoiser");
    DenoiserSpec spec;
    spec.kind = get_or<std::string>(j, "kind", "memorized", "denoiser");
    if (spec.kind == "gmm") {
        spec.variance = get_or<double>(j, "variance", 0.25, "denoiser");
        if (!(spec.variance > 0.0)) throw ConfigError("denoiser.variance must be positive");
    } else if (spec.kind == "checkpoint") {
        spec.checkpoint = std::make_shared<TinyDenoiser>(
            load_checkpoint(get_required<std::string>(j, "path", "denoiser")));
    } else if (spec.kind != "memorized") {
        throw ConfigError("denoiser.kind must be memorized, gmm or checkpoint");
    }
    return spec;
}

std::unique_ptr<Denoiser> build_denoiser(const DenoiserSpec& spec, const Scene& reference,
                                         const NoiseSchedule& schedule) {
    if (spec.kind == "memorized")
        return std::make_unique<MemorizedShapeDenoiser>(render_scene(reference));
    if (spec.kind == "gmm") {
        std::vector<MixtureComponent> comps(1);
        comps[0].mean = render_scene(reference);
        comps[0].variance = spec.variance;
        comps[0].weight = 1.0;
        return std::make_unique<GaussianMixtureDenoiser>(std::move(comps), schedule);
    }
    return nullptr;  // checkpoint: shared instance used directly
}

AssemblyConfig assembly_from_config(const json& cfg, const Overrides& ov) {
    const json j = cfg.value("assembly", json::object());
    check_keys(j,
               {"iterations", "diffusion_step", "denoise_mode", "align_mode", "collision",
                "icp_max_iterations", "icp_tol", "snapshot_every"},
               "assembly");
    AssemblyConfig a;
    a.iterations = get_or<int>(j, "iterations", 50, "assembly");
    a.diffusion_step = get_or<int>(j, "diffusion_step", 2, "assembly");
    a.denoise_mode = denoise_mode_from_string(
        ov.denoise_mode.value_or(get_or<std::string>(j, "denoise_mode", "literal", "assembly")));
    a.align_mode = align_mode_from_string(
        ov.align_mode.value_or(get_or<std::string>(j, "align_mode", "kabsch", "assembly")));
    a.icp_max_iterations = get_or<int>(j, "icp_max_iterations", 30, "assembly");
    a.icp_tol = get_or<double>(j, "icp_tol", 1e-10, "assembly");

    const json c = j.value("collision", json::object());
    check_keys(c, {"enabled", "radius", "count_threshold", "scale", "trigger", "every"},
               "assembly.collision");
    a.collision.enabled = get_or<bool>(c, "enabled", false, "assembly.collision");
    a.collision.radius = get_or<double>(c, "radius", 0.02, "assembly.collision");
    a.collision.count_threshold = get_or<int>(c, "count_threshold", 10, "assembly.collision");
    a.collision.scale = get_or<double>(c, "scale", 0.5, "assembly.collision");
    a.collision.trigger = push_trigger_from_string(ov.push_trigger.value_or(
        get_or<std::string>(c, "trigger", "above", "assembly.collision")));
    a.collision.every = get_or<int>(c, "every", 1, "assembly.collision");
    return a;
}

int cmd_assemble(const json& cfg, const Overrides& ov) {
    check_keys(cfg,
               {"dataset", "output", "seed", "trials", "level", "workers", "schedule", "denoiser",
                "assembly"},
               "assemble config");
    const std::string dataset = get_required<std::string>(cfg, "dataset", "assemble config");
    const std::string output =
        resolve_output(get_required<std::string>(cfg, "output", "assemble config"));
    const std::uint64_t seed =
        ov.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 0, "assemble config"));
    const int trials = get_or<int>(cfg, "trials", 1, "assemble config");
    if (trials < 1) throw ConfigError("assemble: trials must be >= 1");
    const std::string level_name =
        ov.level.value_or(get_or<std::string>(cfg, "level", "moderate", "assemble config"));
    const PerturbationLevel& level = perturbation_level(level_name);
    const NoiseSchedule schedule = schedule_from_config(cfg);
    const DenoiserSpec dspec = denoiser_spec_from_config(cfg);
    // A net's step embedding is tied to the schedule it was trained on.
    if (dspec.checkpoint && (dspec.checkpoint->schedule_steps() != schedule.steps ||
                             dspec.checkpoint->sigma_max() != schedule.sigma.back()))
        throw ConfigError("assemble: checkpoint was trained on schedule steps=" +
                          std::to_string(dspec.checkpoint->schedule_steps()) +
                          ", this run uses steps=" + std::to_string(schedule.steps));
    const AssemblyConfig acfg = assembly_from_config(cfg, ov);
    const int snapshot_every = ov.snapshot_every.value_or(
        get_or<int>(cfg.value("assembly", json::object()), "snapshot_every", 0, "assembly"));
    const int workers = workers_or_default(cfg, ov, "assemble config");

    const std::vector<std::string> dirs = list_scene_dirs(dataset);
    const std::size_t task_count = dirs.size() * static_cast<std::size_t>(trials);
    std::vector<TrialRow> rows(task_count);

    fs::create_directories(output);

    run_parallel(workers, task_count, [&](std::size_t task) {
        const std::size_t scene_idx = task / static_cast<std::size_t>(trials);
        const int trial = static_cast<int>(task % static_cast<std::size_t>(trials));
        TrialRow& row = rows[task];
        row.scene = fs::path(dirs[scene_idx]).filename().string();
        row.trial = trial;
        row.level = level.name;
        try {
            const LoadedScene gt = load_scene(dirs[scene_idx]);
            Rng rng(derive_seed(seed, scene_idx, static_cast<std::uint64_t>(trial)));
            const Scene initial = perturb(gt.scene, level, rng);

            const std::unique_ptr<Denoiser> own = build_denoiser(dspec, gt.scene, schedule);
            const Denoiser& denoiser = own ? *own : *dspec.checkpoint;

            const AssemblyResult result = assemble(initial, denoiser, schedule, acfg, rng);
            row.metrics = evaluate_scene(result.scene, gt.scene);

            const fs::path trial_dir =
                fs::path(output) / row.scene / ("trial_" + std::to_string(trial));
            fs::create_directories(trial_dir);
            write_trace_jsonl((trial_dir / "trace.jsonl").string(), result.trace, result.scene,
                              &gt.scene);
            write_ply((trial_dir / "final.ply").string(), render_scene(result.scene));

            if (snapshot_every > 0) {
                Scene staged = result.scene;
                auto write_snapshot = [&](int iteration, const std::vector<Pose>& poses) {
                    for (std::size_t i = 0; i < poses.size(); ++i)
                        staged.parts[i].pose = poses[i];
                    char name[32];
                    std::snprintf(name, sizeof(name), "snapshot_%04d.ply", iteration);
                    write_ply((trial_dir / name).string(), render_scene(staged));
                };
                write_snapshot(0, result.trace.initial_poses);
                for (const StepRecord& step : result.trace.steps) {
                    if (step.iteration % snapshot_every == 0 ||
                        step.iteration == acfg.iterations)
                        write_snapshot(step.iteration, step.poses);
                }
            }

            std::size_t fallback_steps = 0, collision_events = 0;
            for (const StepRecord& step : result.trace.steps) {
                for (const PartStepRecord& pr : step.parts)
                    fallback_steps += pr.translation_fallback ? 1 : 0;
                collision_events += step.collisions.size();
            }
            json report{{"scene", row.scene},
                        {"trial", trial},
                        {"level", level.name},
                        {"iterations", acfg.iterations},
                        {"diffusion_step", acfg.diffusion_step},
                        {"denoise_mode", to_string(acfg.denoise_mode)},
                        {"align_mode", to_string(acfg.align_mode)},
                        {"metrics", metrics_to_json(row.metrics)},
                        {"fallback_steps", fallback_steps},
                        {"collision_events", collision_events},
                        {"final_chamfer_to_estimate",
                         result.trace.steps.empty() ? -1.0
                                                    : result.trace.steps.back().chamfer_to_estimate}};
            std::ofstream rep(trial_dir / "report.json");
            if (!rep) throw IoError("cannot write report.json in " + trial_dir.string());
            rep << report.dump(2) << "\n";
            log_line("[assemble] " + row.scene + " trial " + std::to_string(trial) + " scd " +
                     format_short(row.metrics.scd) + " pa " + format_short(row.metrics.pa));
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
            log_line("[assemble] FAILED " + row.scene + " trial " + std::to_string(trial) + ": " +
                     e.what());
        }
    });

    write_aggregate_csv((fs::path(output) / "aggregate.csv").string(), rows);
    const std::size_t failures = count_failures(rows);
    return finish(json{{"command", "assemble"},
                       {"scenes", dirs.size()},
                       {"trials", trials},
                       {"level", level.name},
                       {"failures", failures},
                       {"mean", mean_metrics(rows)},
                       {"output", output}},
                  failures, task_count);
}

// ---------------------------------------------------------------------------
// baseline

int cmd_baseline(const json& cfg, const Overrides& ov) {
    check_keys(cfg,
               {"dataset", "output", "seed", "trials", "level", "workers", "schedule", "optimizer",
                "reference"},
               "baseline config");
    const std::string dataset = get_required<std::string>(cfg, "dataset", "baseline config");
    const std::string output =
        resolve_output(get_required<std::string>(cfg, "output", "baseline config"));
    const std::uint64_t seed =
        ov.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 0, "baseline config"));
    const int trials = get_or<int>(cfg, "trials", 1, "baseline config");
    if (trials < 1) throw ConfigError("baseline: trials must be >= 1");
    const std::string level_name =
        ov.level.value_or(get_or<std::string>(cfg, "level", "moderate", "baseline config"));
    const PerturbationLevel& level = perturbation_level(level_name);
    const std::string reference_kind =
        get_or<std::string>(cfg, "reference", "ground_truth", "baseline config");
    if (reference_kind != "ground_truth" && reference_kind != "sample")
        throw ConfigError("baseline: reference must be ground_truth or sample");
    const NoiseSchedule schedule = schedule_from_config(cfg);

    const json opt_j = cfg.value("optimizer", json::object());
    check_keys(opt_j, {"iterations", "learning_rate", "momentum"}, "optimizer");
    SimpleBaselineConfig base;
    base.iterations = get_or<int>(opt_j, "iterations", 300, "optimizer");
    base.learning_rate = get_or<double>(opt_j, "learning_rate", 0.05, "optimizer");
    base.momentum = get_or<double>(opt_j, "momentum", 0.9, "optimizer");

    const int workers = workers_or_default(cfg, ov, "baseline config");
    const std::vector<std::string> dirs = list_scene_dirs(dataset);
    const std::size_t task_count = dirs.size() * static_cast<std::size_t>(trials);
    std::vector<TrialRow> rows(task_count);
    fs::create_directories(output);

    run_parallel(workers, task_count, [&](std::size_t task) {
        const std::size_t scene_idx = task / static_cast<std::size_t>(trials);
        const int trial = static_cast<int>(task % static_cast<std::size_t>(trials));
        TrialRow& row = rows[task];
        row.scene = fs::path(dirs[scene_idx]).filename().string();
        row.trial = trial;
        row.level = level.name;
        try {
            const LoadedScene gt = load_scene(dirs[scene_idx]);
            Rng rng(derive_seed(seed, scene_idx, static_cast<std::uint64_t>(trial)));
            const Scene initial = perturb(gt.scene, level, rng);

            SimpleBaselineConfig cfg_local = base;
            if (reference_kind == "ground_truth") {
                cfg_local.reference = render_scene(gt.scene);
            } else {
                const MemorizedShapeDenoiser oracle(render_scene(gt.scene));
                cfg_local.reference = sample(oracle, schedule, gt.scene.label,
                                             render_scene(gt.scene).size(), rng);
            }

            const SimpleBaselineResult result = simple_optimize(initial, cfg_local);
            row.metrics = evaluate_scene(result.scene, gt.scene);

            const fs::path trial_dir =
                fs::path(output) / row.scene / ("trial_" + std::to_string(trial));
            fs::create_directories(trial_dir);
            write_ply((trial_dir / "final.ply").string(), render_scene(result.scene));
            std::ofstream losses(trial_dir / "losses.csv");
            if (!losses) throw IoError("cannot write losses.csv in " + trial_dir.string());
            losses << "iteration,loss,best\n";
            for (std::size_t i = 0; i < result.raw_losses.size(); ++i)
                losses << i << "," << format_double(result.raw_losses[i]) << ","
                       << format_double(result.loss_curve[i]) << "\n";

            json report{{"scene", row.scene},
                        {"trial", trial},
                        {"level", level.name},
                        {"iterations", base.iterations},
                        {"reference", reference_kind},
                        {"diverged", result.diverged},
                        {"metrics", metrics_to_json(row.metrics)},
                        {"final_loss",
                         result.loss_curve.empty() ? -1.0 : result.loss_curve.back()}};
            std::ofstream rep(trial_dir / "report.json");
            if (!rep) throw IoError("cannot write report.json in " + trial_dir.string());
            rep << report.dump(2) << "\n";
            log_line("[baseline] " + row.scene + " trial " + std::to_string(trial) + " scd " +
                     format_short(row.metrics.scd) + " fpa " + format_short(row.metrics.fpa));
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
            log_line("[baseline] FAILED " + row.scene + " trial " + std::to_string(trial) + ": " +
                     e.what());
        }
    });

    write_aggregate_csv((fs::path(output) / "aggregate.csv").string(), rows);
    const std::size_t failures = count_failures(rows);
    return finish(json{{"command", "baseline"},
                       {"scenes", dirs.size()},
                       {"trials", trials},
                       {"level", level.name},
                       {"failures", failures},
                       {"mean", mean_metrics(rows)},
                       {"output", output}},
                  failures, task_count);
}

// ---------------------------------------------------------------------------
// evaluate

int cmd_evaluate(const json& cfg, const Overrides& ov) {
    check_keys(cfg, {"predicted", "reference", "output", "workers", "rotation_mode"},
               "evaluate config");
    const std::string pred_dir = get_required<std::string>(cfg, "predicted", "evaluate config");
    const std::string ref_dir = get_required<std::string>(cfg, "reference", "evaluate config");
    const std::string output =
        resolve_output(get_required<std::string>(cfg, "output", "evaluate config"));
    const std::string mode_name =
        get_or<std::string>(cfg, "rotation_mode", "geodesic", "evaluate config");
    RotationErrorMode mode;
    if (mode_name == "geodesic") mode = RotationErrorMode::geodesic;
    else if (mode_name == "euler") mode = RotationErrorMode::euler;
    else throw ConfigError("evaluate: rotation_mode must be geodesic or euler");

    const std::vector<std::string> pred = list_scene_dirs(pred_dir);
    const int workers = workers_or_default(cfg, ov, "evaluate config");

    std::vector<TrialRow> rows(pred.size());
    run_parallel(workers, pred.size(), [&](std::size_t i) {
        TrialRow& row = rows[i];
        row.scene = fs::path(pred[i]).filename().string();
        row.level = "evaluate";
        try {
            const fs::path ref_scene = fs::path(ref_dir) / row.scene;
            if (!fs::exists(ref_scene / "manifest.json"))
                throw IoError("no reference scene for " + row.scene);
            const LoadedScene p = load_scene(pred[i]);
            const LoadedScene r = load_scene(ref_scene.string());
            row.metrics = evaluate_scene(p.scene, r.scene, kPartAccuracyThreshold, mode);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
            log_line("[evaluate] FAILED " + row.scene + ": " + e.what());
        }
    });

    fs::create_directories(output);
    write_aggregate_csv((fs::path(output) / "metrics.csv").string(), rows);
    const std::size_t failures = count_failures(rows);
    json missing = json::array();
    for (const TrialRow& row : rows)
        if (row.failed && row.error.rfind("no reference scene", 0) == 0) missing.push_back(row.scene);
    return finish(json{{"command", "evaluate"},
                       {"scenes", pred.size()},
                       {"failures", failures},
                       {"missing", missing},
                       {"rotation_mode", mode_name},
                       {"mean", mean_metrics(rows)},
                       {"output", output}},
                  failures, pred.size());
}

// ---------------------------------------------------------------------------
// plot

int cmd_plot(const json& cfg, const Overrides&) {
    check_keys(cfg, {"input"}, "plot config");
    const std::string input = get_required<std::string>(cfg, "input", "plot config");
    if (!fs::is_directory(input)) throw IoError("plot: input directory not found: " + input);

    std::vector<std::string> traces;
    for (const auto& entry : fs::recursive_directory_iterator(input)) {
        if (entry.is_regular_file() && entry.path().filename() == "trace.jsonl")
            traces.push_back(entry.path().string());
    }
    std::sort(traces.begin(), traces.end());

    std::size_t svgs = 0, failures = 0;
    for (const std::string& trace_path : traces) {
        try {
            const std::vector<TraceRow> rows = read_trace_jsonl(trace_path);
            const fs::path dir = fs::path(trace_path).parent_path();
            std::vector<double> xs, chamfer_xs;
            std::vector<double> scd, pa, chamfer;
            for (const TraceRow& row : rows) {
                xs.push_back(row.iteration);
                if (row.scd_vs_reference >= 0.0) scd.push_back(row.scd_vs_reference);
                if (row.pa_vs_reference >= 0.0) pa.push_back(row.pa_vs_reference);
                if (row.chamfer_to_estimate >= 0.0) {
                    chamfer.push_back(row.chamfer_to_estimate);
                    chamfer_xs.push_back(row.iteration);
                }
            }
            if (scd.size() == xs.size() && !scd.empty()) {
                write_series_svg((dir / "plot_scd.svg").string(), "scene chamfer distance", "scd",
                                 xs, scd);
                ++svgs;
            }
            if (pa.size() == xs.size() && !pa.empty()) {
                write_series_svg((dir / "plot_pa.svg").string(), "part accuracy", "pa", xs, pa);
                ++svgs;
            }
            if (!chamfer.empty()) {
                write_series_svg((dir / "plot_chamfer.svg").string(),
                                 "chamfer to denoised estimate", "chamfer", chamfer_xs, chamfer);
                ++svgs;
            }
        } catch (const std::exception& e) {
            ++failures;
            log_line("[plot] FAILED " + trace_path + ": " + e.what());
        }
    }

    // Aggregate level plot when the run directory carries a mixed-level CSV.
    const fs::path agg = fs::path(input) / "aggregate.csv";
    if (fs::exists(agg)) {
        std::ifstream in(agg);
        std::string line;
        std::getline(in, line);  // header
        std::map<std::string, std::pair<double, std::size_t>> scd_by_level, pa_by_level;
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            std::string scene, trial, level, scd_s, pa_s;
            std::getline(ls, scene, ',');
            std::getline(ls, trial, ',');
            std::getline(ls, level, ',');
            std::getline(ls, scd_s, ',');
            std::getline(ls, pa_s, ',');
            if (level.empty() || scd_s.empty()) continue;
            scd_by_level[level].first += std::strtod(scd_s.c_str(), nullptr);
            scd_by_level[level].second += 1;
            pa_by_level[level].first += std::strtod(pa_s.c_str(), nullptr);
            pa_by_level[level].second += 1;
        }
        if (scd_by_level.size() >= 2) {
            std::vector<double> xs, scd_means, pa_means;
            std::size_t idx = 0;
            for (const PerturbationLevel& level : all_perturbation_levels()) {
                const auto it = scd_by_level.find(level.name);
                if (it == scd_by_level.end()) continue;
                xs.push_back(static_cast<double>(idx++));
                scd_means.push_back(it->second.first / static_cast<double>(it->second.second));
                const auto& pa_acc = pa_by_level[level.name];
                pa_means.push_back(pa_acc.first / static_cast<double>(pa_acc.second));
            }
            if (xs.size() >= 2) {
                write_series_svg((fs::path(input) / "levels_scd.svg").string(),
                                 "mean scd by level", "scd x1000", xs, scd_means);
                write_series_svg((fs::path(input) / "levels_pa.svg").string(),
                                 "mean pa by level", "pa pct", xs, pa_means);
                svgs += 2;
            }
        }
    }

    return finish(json{{"command", "plot"},
                       {"traces", traces.size()},
                       {"failures", failures},
                       {"svg_files", svgs},
                       {"input", input}},
                  failures, traces.empty() ? 1 : traces.size());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"point-cloud part assembly toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;
    std::uint64_t seed_flag = 0;
    int workers_flag = 0, snapshot_flag = 0;
    std::string denoise_flag, align_flag, trigger_flag, level_flag;

    app.add_option("--config", config_path, "JSON config file");
    auto* seed_opt = app.add_option("--seed", seed_flag, "override the config seed");
    auto* workers_opt = app.add_option("--workers", workers_flag, "worker thread count");
    auto* snap_opt =
        app.add_option("--snapshot-every", snapshot_flag, "write a scene snapshot every N iterations");
    auto* denoise_opt = app.add_option("--denoise-mode", denoise_flag, "literal or ddpm")
                            ->check(CLI::IsMember({"literal", "ddpm"}));
    auto* align_opt = app.add_option("--align-mode", align_flag, "kabsch or icp")
                          ->check(CLI::IsMember({"kabsch", "icp"}));
    auto* trigger_opt = app.add_option("--push-trigger", trigger_flag, "above or below")
                            ->check(CLI::IsMember({"above", "below"}));
    auto* level_opt =
        app.add_option("--level", level_flag, "perturbation level")
            ->check(CLI::IsMember({"slight", "moderate", "substantial", "excessive"}));

    CLI::App* gen = app.add_subcommand("gen", "generate a dataset of part scenes");
    CLI::App* train = app.add_subcommand("train-denoiser", "train the small noise predictor");
    CLI::App* assemble_cmd = app.add_subcommand("assemble", "run iterative assembly over a dataset");
    CLI::App* baseline = app.add_subcommand("baseline", "run the direct pose optimisation baseline");
    CLI::App* evaluate = app.add_subcommand("evaluate", "compare predicted scenes to references");
    CLI::App* plot = app.add_subcommand("plot", "render metric curves from traces");
    for (CLI::App* sub : {gen, train, assemble_cmd, baseline, evaluate, plot}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    if (config_path.empty()) {
        std::cerr << "error: --config is required\n";
        return 1;
    }
    if (seed_opt->count()) ov.seed = seed_flag;
    if (workers_opt->count()) ov.workers = workers_flag;
    if (snap_opt->count()) ov.snapshot_every = snapshot_flag;
    if (denoise_opt->count()) ov.denoise_mode = denoise_flag;
    if (align_opt->count()) ov.align_mode = align_flag;
    if (trigger_opt->count()) ov.push_trigger = trigger_flag;
    if (level_opt->count()) ov.level = level_flag;

    try {
        const json cfg = load_config(config_path);
        if (gen->parsed()) return cmd_gen(cfg, ov);
        if (train->parsed()) return cmd_train(cfg, ov);
        if (assemble_cmd->parsed()) return cmd_assemble(cfg, ov);
        if (baseline->parsed()) return cmd_baseline(cfg, ov);
        if (evaluate->parsed()) return cmd_evaluate(cfg, ov);
        if (plot->parsed()) return cmd_plot(cfg, ov);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
