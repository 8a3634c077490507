// hpgan — synthesize skeleton data, train the adversarial predictor, and
// report on it. Exit codes: 0 success, 1 usage/config error, 2 data/parse
// error, 3 numeric abort.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <hpgan/hpgan.hpp>

namespace fs = std::filesystem;
using namespace hpgan;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(strfmt("cannot open '%s'", path.c_str()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(strfmt("cannot open '%s' for writing", path.c_str()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError(strfmt("write to '%s' failed", path.c_str()));
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw ConfigError(strfmt("cannot create directory '%s': %s", path.c_str(), ec.message().c_str()));
}

std::vector<double> draw_z(Rng& rng, const TrainingConfig& cfg) {
    std::vector<double> z(cfg.z_dim);
    if (cfg.z_dist == "uniform")
        for (double& v : z) v = rng.uniform(-1.0, 1.0);
    else
        for (double& v : z) v = rng.normal();
    return z;
}

bool same_topology(const SkeletonTopology& a, const SkeletonTopology& b) {
    return a.joints == b.joints && a.bones == b.bones;
}

struct SynthArgs {
    std::string out;
    std::size_t sequences = 200, frames = 40, joints = 5;
    std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
    if (a.joints < 2) throw ConfigError("synth: --joints must be at least 2");
    SynthConfig cfg;
    cfg.sequences = a.sequences;
    cfg.frames = a.frames;
    cfg.topology_size = a.joints;
    cfg.seed = a.seed;
    ensure_dir(a.out);
    const std::vector<SkeletonSequence> seqs = synth_generate(cfg);
    for (std::size_t i = 0; i < seqs.size(); ++i)
        write_file(a.out + "/" + strfmt("seq_%04zu.json", i), serialize_canonical_json(seqs[i]));
    std::printf("wrote %zu sequences to %s\n", seqs.size(), a.out.c_str());
    return 0;
}

struct TrainArgs {
    std::string data, config_path, out = ".";
    std::vector<std::string> sets;
    std::string epochs, seed;  // optional convenience overrides
};

int run_train(const TrainArgs& a) {
    TrainingConfig cfg;
    if (!a.config_path.empty()) cfg = parse_config_text(read_file(a.config_path));
    for (const std::string& kv : a.sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == kv.size())
            throw ConfigError(strfmt("--set expects key=value, got '%s'", kv.c_str()));
        apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!a.epochs.empty()) apply_override(cfg, "epochs", a.epochs);
    if (!a.seed.empty()) apply_override(cfg, "seed", a.seed);
    cfg.validate();

    if (!fs::is_directory(a.data)) throw ConfigError(strfmt("data directory '%s' does not exist", a.data.c_str()));
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(a.data))
        if (entry.is_regular_file() && entry.path().extension() == ".json") paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ConfigError(strfmt("no .json sequences in '%s'", a.data.c_str()));

    std::vector<SkeletonSequence> seqs;
    seqs.reserve(paths.size());
    for (const std::string& p : paths) {
        SkeletonSequence seq;
        try {
            seq = parse_canonical_json(read_file(p));
        } catch (const ParseError& e) {
            throw ParseError(strfmt("%s: %s", p.c_str(), e.what()));
        }
        if (!seqs.empty() && !same_topology(seq.topology, seqs.front().topology))
            throw ParseError(strfmt("%s: topology differs from %s", p.c_str(), paths.front().c_str()));
        seqs.push_back(std::move(seq));
    }

    const NormalizationParams bounds = data_bounds(seqs);
    std::vector<TrainingSample> samples;
    for (const SkeletonSequence& seq : seqs) {
        std::vector<TrainingSample> s = prepare_samples(seq, cfg.m, cfg.n, cfg.stride, cfg.frame_step, bounds);
        samples.insert(samples.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    if (samples.empty())
        throw ConfigError(strfmt("no training windows: sequences too short for m=%zu n=%zu frame_step=%zu", cfg.m,
                                 cfg.n, cfg.frame_step));

    ensure_dir(a.out);
    Trainer trainer(seqs.front().topology, cfg);
    const TrainResult result = trainer.train(samples, bounds);
    save_checkpoint(result.best, a.out + "/checkpoint_best.json");
    save_checkpoint(result.last, a.out + "/checkpoint_final.json");
    write_file(a.out + "/losses.csv", losses_csv(result.history));
    write_file(a.out + "/quality.csv", quality_csv(result.quality));
    std::printf("trained %zu steps over %zu epochs on %zu samples\n", result.history.size(), cfg.epochs,
                samples.size());
    std::printf("best epoch %zu: %zu/%zu futures above 0.5 (mean prob %s)\n", result.best.epoch,
                result.best.quality.count_above_half, cfg.quality_n, dtos(result.best.quality.mean_prob).c_str());
    return 0;
}

struct PredictArgs {
    std::string checkpoint, input, out = ".";
    std::size_t num_futures = 5, frames = 0;  // frames 0 = checkpoint default
    std::uint64_t seed = 0;
};

int run_predict(const PredictArgs& a) {
    if (a.num_futures < 1) throw ConfigError("predict: --num-futures must be at least 1");
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const SkeletonSequence input = parse_canonical_json(read_file(a.input));
    if (!same_topology(input.topology, ckpt.topology))
        throw ParseError(strfmt("predict: input topology (%zu joints, %zu bones) does not match checkpoint "
                                "(%zu joints, %zu bones)",
                                input.topology.joints, input.topology.bones.size(), ckpt.topology.joints,
                                ckpt.topology.bones.size()));
    const std::size_t m = ckpt.config.m;
    if (input.frames.size() < m)
        throw ParseError(strfmt("predict: input has %zu frames, the model needs %zu observed frames",
                                input.frames.size(), m));
    const std::size_t n_pred = a.frames > 0 ? a.frames : ckpt.config.n;

    const std::vector<Pose> prior_raw(input.frames.begin(), input.frames.begin() + static_cast<std::ptrdiff_t>(m));
    const NormalizationParams norm = with_center_of_gravity(prior_raw, m, ckpt.bounds);
    std::vector<std::vector<double>> prior_flat;
    prior_flat.reserve(m);
    for (const Pose& p : prior_raw) prior_flat.push_back(pose_flat(normalize_pose(p, norm)));

    ensure_dir(a.out);
    Rng rng(a.seed);
    for (std::size_t f = 0; f < a.num_futures; ++f) {
        const std::vector<std::vector<double>> fake = generate_poses(ckpt.gen, prior_flat, draw_z(rng, ckpt.config),
                                                                     n_pred);
        SkeletonSequence out_seq;
        out_seq.topology = ckpt.topology;
        out_seq.frame_step = input.frame_step;
        out_seq.frames = prior_raw;
        for (const std::vector<double>& pose : fake)
            out_seq.frames.push_back(denormalize_pose(pose_from_flat(pose), norm));
        write_file(a.out + "/" + strfmt("prediction_%02zu.json", f), serialize_canonical_json(out_seq));
        write_file(a.out + "/" + strfmt("prediction_%02zu.svg", f),
                   skeleton_strip_svg(ckpt.topology, out_seq.frames, m));
    }
    std::printf("wrote %zu futures to %s\n", a.num_futures, a.out.c_str());
    return 0;
}

struct ScoreArgs {
    std::string checkpoint, input;
};

int run_score(const ScoreArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const SkeletonSequence input = parse_canonical_json(read_file(a.input));
    if (!same_topology(input.topology, ckpt.topology))
        throw ParseError(strfmt("score: input topology (%zu joints) does not match checkpoint (%zu joints)",
                                input.topology.joints, ckpt.topology.joints));
    const std::size_t m = ckpt.config.m, n = ckpt.config.n;
    if (input.frames.size() != m + n)
        throw ParseError(strfmt("score: input has %zu frames, the model scores exactly %zu (%zu observed + %zu "
                                "predicted)",
                                input.frames.size(), m + n, m, n));
    const NormalizationParams norm = with_center_of_gravity(input.frames, m, ckpt.bounds);
    std::vector<std::vector<double>> prior, future;
    for (std::size_t t = 0; t < m + n; ++t) {
        std::vector<double> flat = pose_flat(normalize_pose(input.frames[t], norm));
        (t < m ? prior : future).push_back(std::move(flat));
    }
    std::printf("%s\n", dtos(discriminator_prob_value(ckpt.disc, prior, future)).c_str());
    return 0;
}

struct PlotArgs {
    std::string losses, out;
};

int run_plot(const PlotArgs& a) {
    const std::vector<LossRow> rows = parse_losses_csv(read_file(a.losses));
    write_file(a.out, loss_chart_svg(rows));
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"probabilistic skeleton motion prediction (adversarial GRU)"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "write synthetic kinematic-chain sequences");
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_option("--sequences", synth_args.sequences, "number of sequences");
    synth->add_option("--frames", synth_args.frames, "frames per sequence");
    synth->add_option("--joints", synth_args.joints, "joints in the chain");
    synth->add_option("--seed", synth_args.seed, "random seed");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train on a directory of canonical JSON sequences");
    train->add_option("--data", train_args.data, "directory of .json sequences")->required();
    train->add_option("--config", train_args.config_path, "key=value config file");
    train->add_option("--out", train_args.out, "output directory");
    train->add_option("--set", train_args.sets, "config override key=value (repeatable)");
    train->add_option("--epochs", train_args.epochs, "override epoch count");
    train->add_option("--seed", train_args.seed, "override random seed");

    PredictArgs predict_args;
    CLI::App* predict = app.add_subcommand("predict", "sample futures from an observed prior");
    predict->add_option("--checkpoint", predict_args.checkpoint, "checkpoint file")->required();
    predict->add_option("--input", predict_args.input, "canonical JSON sequence")->required();
    predict->add_option("--num-futures", predict_args.num_futures, "futures to sample");
    predict->add_option("--frames", predict_args.frames, "frames to predict (default: checkpoint n)");
    predict->add_option("--seed", predict_args.seed, "random seed");
    predict->add_option("--out", predict_args.out, "output directory");

    ScoreArgs score_args;
    CLI::App* score = app.add_subcommand("score", "print the discriminator probability of a sequence");
    score->add_option("--checkpoint", score_args.checkpoint, "checkpoint file")->required();
    score->add_option("--input", score_args.input, "canonical JSON sequence of exactly m+n frames")->required();

    PlotArgs plot_args;
    CLI::App* plot = app.add_subcommand("plot", "render losses.csv as an SVG chart");
    plot->add_option("--losses", plot_args.losses, "losses.csv from training")->required();
    plot->add_option("--out", plot_args.out, "output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return run_synth(synth_args);
        if (train->parsed()) return run_train(train_args);
        if (predict->parsed()) return run_predict(predict_args);
        if (score->parsed()) return run_score(score_args);
        if (plot->parsed()) return run_plot(plot_args);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
