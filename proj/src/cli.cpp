#include "holopose/cli.hpp"

#include "holopose/estimator.hpp"
#include "holopose/losses.hpp"
#include "holopose/metrics.hpp"
#include "holopose/render.hpp"
#include "holopose/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace holopose {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

int resolve_threads(int flag_value) {
    if (flag_value > 0)
        return flag_value;
    if (const char *env = std::getenv("HOLOPOSE_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0)
                return n;
        } catch (const std::exception &) {
        }
        throw Error(ErrorCode::invalid_argument, std::string("HOLOPOSE_THREADS must be a positive integer, got '") +
                                                     env + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(long count, int threads, const std::function<void(long)> &fn) {
    if (count <= 0)
        return;
    const int workers = static_cast<int>(std::min<long>(std::max(threads, 1), count));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::atomic<long> next{0};
    auto work = [&] {
        for (long i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(work);
        for (auto &t : pool)
            t.join();
    }
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}

namespace {

// Thrown for usage problems detected after parsing; maps to exit status 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

RobotModel load_robot(const std::string &path) {
    if (!fs::exists(path))
        throw UsageError("robot description not found: " + path);
    return load_robot_description(path);
}

void require_file(const std::string &path, const std::string &what) {
    if (!fs::exists(path))
        throw UsageError(what + " not found: " + path);
}

ojson option_snapshot(const CLI::App &app) {
    ojson snap = ojson::object();
    for (const CLI::Option *opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name.empty())
            continue;
        if (opt->get_expected_max() == 0) {
            snap[name] = opt->count() > 0;
            continue;
        }
        const auto &res = opt->results();
        if (res.empty()) {
            const std::string def = opt->get_default_str();
            snap[name] = def;
        } else if (res.size() == 1) {
            snap[name] = res.front();
        } else {
            snap[name] = res;
        }
    }
    return snap;
}

void write_manifest(const std::string &output, const std::string &command, const CLI::App &sub,
                    const std::vector<std::string> &args, const std::vector<std::string> &inputs,
                    const std::vector<std::string> &outputs, std::uint64_t seed, double seconds) {
    ojson m;
    m["command"] = command;
    m["artifact_version"] = kVersion;
    m["args"] = args;
    m["config"] = option_snapshot(sub);
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["seed"] = seed;
    m["wall_clock_seconds"] = seconds;
    write_file_atomic(output + ".manifest.json", m.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct GenerateArgs {
    std::string robot, out;
    GenConfig cfg;
    bool masks = false;
    int threads = 0;
};

struct FitArgs {
    std::string robot, dataset, out;
    FitConfig cfg;
    bool known_joints = false;
    bool no_root_relative = false;
    double w_px = 1.0, w_mm = 1.0;
    int threads = 0;
};

struct EvalArgs {
    std::string robot, dataset, results, out, strata;
    double max_threshold = 100.0;
    int threads = 0;
};

struct ReportArgs {
    std::string results, dataset, robot, out;
};

struct InspectArgs {
    std::string robot, dataset, results;
};

int cmd_generate(const GenerateArgs &a, const CLI::App &sub, const std::vector<std::string> &args,
                 std::ostream &err) {
    const auto start = std::chrono::steady_clock::now();
    a.cfg.validate();
    if (a.cfg.scenes < 0)
        throw UsageError("--scenes must be non-negative");
    const RobotModel model = load_robot(a.robot);

    std::vector<SceneRecord> records(static_cast<std::size_t>(a.cfg.scenes));
    const std::string mask_dir_name = fs::path(a.out).filename().string() + ".masks";
    const fs::path mask_dir = fs::path(a.out).parent_path() / mask_dir_name;
    if (a.masks && a.cfg.scenes > 0)
        fs::create_directories(mask_dir);

    parallel_for(a.cfg.scenes, resolve_threads(a.threads), [&](long i) {
        SceneRecord r = sample_scene(model, a.cfg, i);
        if (a.masks) {
            char name[32];
            std::snprintf(name, sizeof name, "scene_%06ld.pgm", r.scene_id);
            const BinaryMask m = segmentation_mask(model, r, a.cfg.mask_corruption, a.cfg.seed);
            write_pgm(m, (mask_dir / name).string());
            r.mask_file = mask_dir_name + "/" + name;
        }
        records[i] = std::move(r);
    });
    write_dataset(records, a.out);
    err << "generate: wrote " << records.size() << " scenes to " << a.out << "\n";
    write_manifest(a.out, "generate", sub, args, {a.robot}, {a.out}, a.cfg.seed, seconds_since(start));
    return 0;
}

int cmd_fit(const FitArgs &a, const CLI::App &sub, const std::vector<std::string> &args, std::ostream &err) {
    const auto start = std::chrono::steady_clock::now();
    a.cfg.validate();
    const RobotModel model = load_robot(a.robot);
    require_file(a.dataset, "dataset");
    const auto records = read_dataset(a.dataset, &model);

    ProblemOptions opts;
    opts.use_root_relative = !a.no_root_relative;
    opts.known_joints = a.known_joints;
    opts.weights.px = a.w_px;
    opts.weights.mm = a.w_mm;

    std::vector<FitResult> results(records.size());
    std::atomic<long> done{0};
    std::mutex progress;
    const long total = static_cast<long>(records.size());
    const long every = std::max(1L, total / 10);
    parallel_for(total, resolve_threads(a.threads), [&](long i) {
        const FitProblem problem = problem_from_record(model, records[i], opts);
        results[i] = a.known_joints ? fit_known_joints(problem, a.cfg) : fit(problem, a.cfg);
        const long n = ++done;
        if (n % every == 0 || n == total) {
            std::lock_guard<std::mutex> lock(progress);
            err << "fit: " << n << "/" << total << "\n";
        }
    });
    std::stable_sort(results.begin(), results.end(),
                     [](const FitResult &x, const FitResult &y) { return x.scene_id < y.scene_id; });
    write_results(results, a.out);
    write_manifest(a.out, "fit", sub, args, {a.robot, a.dataset}, {a.out}, a.cfg.seed, seconds_since(start));
    return 0;
}

std::string id_list(const std::vector<long> &ids) {
    std::ostringstream s;
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i)
        s << (i ? ", " : "") << ids[i];
    if (ids.size() > 20)
        s << ", ... (" << ids.size() << " total)";
    return s.str();
}

struct Evaluation {
    std::vector<EvalRecord> records;
    std::vector<double> mask_losses;
};

Evaluation evaluate_all(const RobotModel &model, const std::string &dataset_path, const std::string &results_path,
                        int threads) {
    require_file(dataset_path, "dataset");
    require_file(results_path, "results");
    const auto records = read_dataset(dataset_path, &model);
    const auto results = read_results(results_path);

    std::map<long, const SceneRecord *> by_id;
    for (const auto &r : records)
        by_id[r.scene_id] = &r;
    std::map<long, const FitResult *> fit_by_id;
    for (const auto &r : results)
        fit_by_id[r.scene_id] = &r;

    std::vector<long> missing, unknown;
    for (const auto &[id, _] : by_id)
        if (!fit_by_id.count(id))
            missing.push_back(id);
    for (const auto &[id, _] : fit_by_id)
        if (!by_id.count(id))
            unknown.push_back(id);
    if (missing.size() == by_id.size() && !by_id.empty() && unknown.size() == fit_by_id.size())
        throw Error(ErrorCode::validation, "dataset and results share no scene ids");
    if (!missing.empty() || !unknown.empty()) {
        std::string msg = "scene id mismatch between dataset and results";
        if (!missing.empty())
            msg += "; missing results for ids: " + id_list(missing);
        if (!unknown.empty())
            msg += "; results for unknown ids: " + id_list(unknown);
        throw Error(ErrorCode::validation, msg);
    }
    if (by_id.empty())
        throw Error(ErrorCode::validation, "no scenes to evaluate");

    std::vector<std::pair<const SceneRecord *, const FitResult *>> pairs;
    for (const auto &[id, rec] : by_id)
        pairs.emplace_back(rec, fit_by_id.at(id));

    Evaluation ev;
    ev.records.resize(pairs.size());
    std::vector<std::optional<double>> masks(pairs.size());
    const fs::path base = fs::path(dataset_path).parent_path();
    parallel_for(static_cast<long>(pairs.size()), threads, [&](long i) {
        const auto &[rec, res] = pairs[i];
        ev.records[i] = evaluate_fit(model, *rec, *res);
        if (rec->mask_file) {
            const BinaryMask seg = read_pgm((base / *rec->mask_file).string());
            const auto raster = rasterize_silhouette(pose_capsules(model, res->q, res->pose()), rec->camera);
            masks[i] = mask_consistency(raster.mask, seg).loss;
        }
    });
    for (const auto &m : masks)
        if (m)
            ev.mask_losses.push_back(*m);
    return ev;
}

std::string summary_report(const Evaluation &ev, double max_threshold) {
    MetricsSummary s = summarize(ev.records, max_threshold);
    if (!ev.mask_losses.empty()) {
        s.has_mask_consistency = true;
        s.mean_mask_consistency = mean(ev.mask_losses);
    }
    return metrics_report(s);
}

int cmd_eval(const EvalArgs &a, const CLI::App &sub, const std::vector<std::string> &args, std::ostream &err) {
    const auto start = std::chrono::steady_clock::now();
    if (!(a.max_threshold > 0.0))
        throw UsageError("--max-threshold must be positive");
    const RobotModel model = load_robot(a.robot);
    const Evaluation ev = evaluate_all(model, a.dataset, a.results, resolve_threads(a.threads));
    const std::string strata = a.strata.empty() ? a.out + ".strata.csv" : a.strata;
    write_file_atomic(a.out, summary_report(ev, a.max_threshold));
    write_file_atomic(strata, strata_csv(stratify_by_inframe(ev.records, a.max_threshold)));
    err << "eval: " << ev.records.size() << " scenes, report " << a.out << ", strata " << strata << "\n";
    write_manifest(a.out, "eval", sub, args, {a.robot, a.dataset, a.results}, {a.out, strata}, 0,
                   seconds_since(start));
    return 0;
}

int cmd_report(const ReportArgs &a, std::ostream &out) {
    require_file(a.results, "results");
    const auto results = read_results(a.results);
    std::map<std::string, int> status;
    std::vector<double> residuals, iterations;
    int underconstrained = 0;
    for (const auto &r : results) {
        ++status[to_string(r.status)];
        residuals.push_back(r.residual_norm);
        iterations.push_back(r.iterations);
        underconstrained += r.underconstrained;
    }
    std::ostringstream s;
    s << "results = " << results.size() << "\n";
    for (const char *key : {"converged", "max_iterations", "diverged"})
        s << "status_" << key << " = " << status[key] << "\n";
    s << "underconstrained = " << underconstrained << "\n";
    if (!results.empty()) {
        s << "mean_residual_norm = " << format6(mean(residuals)) << "\n";
        s << "median_residual_norm = " << format6(median(residuals)) << "\n";
        s << "mean_iterations = " << format6(mean(iterations)) << "\n";
    }
    if (!a.dataset.empty()) {
        if (a.robot.empty())
            throw UsageError("--dataset needs --robot");
        const RobotModel model = load_robot(a.robot);
        const Evaluation ev = evaluate_all(model, a.dataset, a.results, 1);
        s << summary_report(ev, 100.0);
        s << strata_csv(stratify_by_inframe(ev.records));
    }
    if (a.out.empty())
        out << s.str();
    else
        write_file_atomic(a.out, s.str());
    return 0;
}

int cmd_inspect(const InspectArgs &a, std::ostream &out) {
    if (a.robot.empty() && a.dataset.empty() && a.results.empty())
        throw UsageError("inspect needs --robot, --dataset or --results");
    std::optional<RobotModel> model;
    if (!a.robot.empty()) {
        model = load_robot(a.robot);
        out << dump_model(*model);
    }
    if (!a.dataset.empty()) {
        require_file(a.dataset, "dataset");
        const auto records = read_dataset(a.dataset, model ? &*model : nullptr);
        std::map<int, int> hist;
        std::set<std::string> robots;
        for (const auto &r : records) {
            ++hist[r.inframe_count];
            robots.insert(r.robot);
        }
        out << "dataset " << a.dataset << " scenes=" << records.size() << " schema_version=" << kDatasetSchemaVersion
            << "\n";
        for (const auto &name : robots)
            out << "robot " << name << "\n";
        for (auto it = hist.rbegin(); it != hist.rend(); ++it)
            out << "inframe " << it->first << " scenes=" << it->second << "\n";
    }
    if (!a.results.empty()) {
        require_file(a.results, "results");
        for (const auto &r : read_results(a.results))
            out << "result " << r.scene_id << " status=" << to_string(r.status) << " iterations=" << r.iterations
                << " residual=" << format6(r.residual_norm) << " start=" << r.best_start << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Holistic robot pose estimation toolkit", "holopose"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    // Config files are read by the top-level app; sections name the subcommand,
    // e.g. [generate] scenes = 10. Fallthrough lets --config follow it.
    app.set_config("--config", "", "TOML or INI file with option defaults, one [section] per subcommand");
    app.fallthrough();

    GenerateArgs gen;
    auto *g = app.add_subcommand("generate", "Sample a synthetic dataset");
    g->add_option("--robot", gen.robot, "Robot description file")->required();
    g->add_option("-o,--out", gen.out, "Dataset output path")->required();
    g->add_option("--scenes", gen.cfg.scenes, "Number of scenes")->capture_default_str();
    g->add_option("--seed", gen.cfg.seed, "Generator seed")->capture_default_str();
    g->add_option("--distance-min", gen.cfg.distance_min, "Camera distance lower bound, mm")->capture_default_str();
    g->add_option("--distance-max", gen.cfg.distance_max, "Camera distance upper bound, mm")->capture_default_str();
    g->add_option("--elevation-min", gen.cfg.elevation_min, "Degrees")->capture_default_str();
    g->add_option("--elevation-max", gen.cfg.elevation_max, "Degrees")->capture_default_str();
    g->add_option("--azimuth-min", gen.cfg.azimuth_min, "Degrees")->capture_default_str();
    g->add_option("--azimuth-max", gen.cfg.azimuth_max, "Degrees")->capture_default_str();
    g->add_option("--roll-min", gen.cfg.roll_min, "Degrees")->capture_default_str();
    g->add_option("--roll-max", gen.cfg.roll_max, "Degrees")->capture_default_str();
    g->add_option("--target-jitter", gen.cfg.target_jitter, "Look-at jitter, mm")->capture_default_str();
    g->add_option("--focal", gen.cfg.focal, "Focal length, px")->capture_default_str();
    g->add_option("--width", gen.cfg.width, "Image width, px")->capture_default_str();
    g->add_option("--height", gen.cfg.height, "Image height, px")->capture_default_str();
    g->add_option("--noise-px", gen.cfg.noise_px, "2D observation noise sigma, px")->capture_default_str();
    g->add_option("--noise-mm", gen.cfg.noise_mm, "3D observation noise sigma, mm")->capture_default_str();
    g->add_option("--truncation-prob", gen.cfg.truncation_prob, "Probability of a truncated view")
        ->capture_default_str();
    g->add_option("--min-inframe", gen.cfg.min_inframe, "Minimum in-frame keypoints of truncated views")
        ->capture_default_str();
    g->add_option("--mask-corruption", gen.cfg.mask_corruption, "Pixel flip probability of masks")
        ->capture_default_str();
    g->add_option("--max-retries", gen.cfg.max_retries, "Camera placement retries")->capture_default_str();
    g->add_flag("--masks", gen.masks, "Write a segmentation mask per scene");
    g->add_option("--threads", gen.threads, "Worker threads (default HOLOPOSE_THREADS or all cores)");

    FitArgs fa;
    auto *f = app.add_subcommand("fit", "Fit joint states and camera pose to every scene");
    f->add_option("--robot", fa.robot, "Robot description file")->required();
    f->add_option("--dataset", fa.dataset, "Dataset path")->required();
    f->add_option("-o,--out", fa.out, "Results output path")->required();
    f->add_flag("--known-joints", fa.known_joints, "Use ground-truth joint states, fit pose only");
    f->add_flag("--no-root-relative", fa.no_root_relative, "Use 2D residuals only");
    f->add_option("--max-iterations", fa.cfg.max_iterations, "LM iterations per start")->capture_default_str();
    f->add_option("--damping-init", fa.cfg.damping_init, "Initial LM damping")->capture_default_str();
    f->add_option("--damping-up", fa.cfg.damping_up, "Damping increase factor")->capture_default_str();
    f->add_option("--damping-down", fa.cfg.damping_down, "Damping decrease factor")->capture_default_str();
    f->add_option("--step-tolerance", fa.cfg.step_tolerance, "Convergence on step norm")->capture_default_str();
    f->add_option("--relative-decrease-tolerance", fa.cfg.relative_decrease_tolerance,
                  "Convergence on relative cost decrease")
        ->capture_default_str();
    f->add_option("--starts", fa.cfg.starts, "Multi-start count")->capture_default_str();
    f->add_option("--seed", fa.cfg.seed, "Seed for random starts")->capture_default_str();
    f->add_option("--bbox-padding", fa.cfg.bbox_padding, "Padding of the depth-seed box, px")->capture_default_str();
    f->add_option("--w-px", fa.w_px, "Weight of 2D residuals")->capture_default_str();
    f->add_option("--w-mm", fa.w_mm, "Weight of 3D residuals")->capture_default_str();
    f->add_option("--threads", fa.threads, "Worker threads (default HOLOPOSE_THREADS or all cores)");

    EvalArgs ea;
    auto *e = app.add_subcommand("eval", "Score results against ground truth");
    e->add_option("--robot", ea.robot, "Robot description file")->required();
    e->add_option("--dataset", ea.dataset, "Dataset path")->required();
    e->add_option("--results", ea.results, "Results path")->required();
    e->add_option("-o,--out", ea.out, "Metrics report path")->required();
    e->add_option("--strata", ea.strata, "Stratified CSV path (default <out>.strata.csv)");
    e->add_option("--max-threshold", ea.max_threshold, "AUC threshold, mm")->capture_default_str();
    e->add_option("--threads", ea.threads, "Worker threads (default HOLOPOSE_THREADS or all cores)");

    ReportArgs ra;
    auto *r = app.add_subcommand("report", "Summarize a results file, optionally with metrics");
    r->add_option("--results", ra.results, "Results path")->required();
    r->add_option("--dataset", ra.dataset, "Dataset path for metrics");
    r->add_option("--robot", ra.robot, "Robot description file");
    r->add_option("-o,--out", ra.out, "Write to a file instead of stdout");

    InspectArgs ia;
    auto *in = app.add_subcommand("inspect", "Print a robot model, dataset or results summary");
    in->add_option("--robot", ia.robot, "Robot description file");
    in->add_option("--dataset", ia.dataset, "Dataset path");
    in->add_option("--results", ia.results, "Results path");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion &) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError &ex) {
        err << "error: " << ex.what() << "\n";
        if (!app.get_subcommands().empty())
            err << "run with --help for usage\n";
        return 2;
    }

    try {
        if (g->parsed())
            return cmd_generate(gen, *g, args, err);
        if (f->parsed())
            return cmd_fit(fa, *f, args, err);
        if (e->parsed())
            return cmd_eval(ea, *e, args, err);
        if (r->parsed())
            return cmd_report(ra, out);
        if (in->parsed())
            return cmd_inspect(ia, out);
    } catch (const UsageError &ex) {
        err << "error: " << ex.what() << "\n";
        return 2;
    } catch (const Error &ex) {
        err << "error: " << ex.what() << "\n";
        switch (ex.code()) {
        case ErrorCode::invalid_argument:
        case ErrorCode::parse:
        case ErrorCode::validation:
            return 2;
        default:
            return 1;
        }
    } catch (const std::exception &ex) {
        err << "error: " << ex.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace holopose
