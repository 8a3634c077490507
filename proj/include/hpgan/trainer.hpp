#pragma once

// Alternating adversarial optimization: k critic updates, then one
// generator and one discriminator update per batch. Adam with bias
// correction, per-epoch quality probes, best-checkpoint tracking after a
// warmup window, and JSON checkpoint / CSV log serialization.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hpgan/autodiff.hpp"
#include "hpgan/losses.hpp"
#include "hpgan/models.hpp"
#include "hpgan/skeleton.hpp"

namespace hpgan {

struct TrainingConfig {
    std::size_t m = 10, n = 30;       // observed / predicted frame counts
    std::size_t z_dim = 128;
    std::size_t k_critic = 10;
    double lr_critic = 5e-5;
    double lr_generator = 5e-5;
    double lr_discriminator = 2.5e-5;  // half of the critic's
    double beta1 = 0.5, beta2 = 0.9, adam_eps = 1e-8;
    std::size_t batch_size = 16;
    std::size_t epochs = 10;
    double warmup_fraction = 0.25;     // best-model tracking starts after this
    std::size_t quality_n = 64;
    LossWeights weights;
    std::uint64_t seed = 0;
    std::size_t hidden_dim = 1024, layers = 2;
    std::size_t critic_h1 = 1024, critic_h2 = 512;
    std::size_t stride = 1, frame_step = 1;  // windowing
    std::string z_dist = "uniform";          // "uniform" [-1,1] or "normal"

    void validate() const {
        if (m < 1 || n < 1) throw ConfigError("config: m and n must be at least 1");
        if (z_dim < 1 || hidden_dim < 1 || layers < 1 || critic_h1 < 1 || critic_h2 < 1)
            throw ConfigError("config: network sizes must be at least 1");
        if (k_critic < 1) throw ConfigError("config: k_critic must be at least 1");
        if (lr_critic <= 0 || lr_generator <= 0 || lr_discriminator <= 0)
            throw ConfigError("config: learning rates must be positive");
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw ConfigError("config: betas must be in [0,1)");
        if (adam_eps <= 0) throw ConfigError("config: adam_eps must be positive");
        if (batch_size < 1) throw ConfigError("config: batch_size must be at least 1");
        if (epochs < 1) throw ConfigError("config: epochs must be at least 1");
        if (warmup_fraction < 0 || warmup_fraction >= 1) throw ConfigError("config: warmup_fraction must be in [0,1)");
        if (quality_n < 1) throw ConfigError("config: quality_n must be at least 1");
        if (stride < 1 || frame_step < 1) throw ConfigError("config: stride and frame_step must be at least 1");
        if (z_dist != "uniform" && z_dist != "normal")
            throw ConfigError(strfmt("config: unknown z distribution '%s'", z_dist.c_str()));
        weights.validate();
    }
};

// ---- key=value config parsing ----

namespace detail {

inline double config_number(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(strfmt("config key '%s': '%s' is not a number", key.c_str(), value.c_str()));
    }
}

inline std::size_t config_count(const std::string& key, const std::string& value) {
    const double v = config_number(key, value);
    if (v < 0 || v != std::floor(v))
        throw ConfigError(strfmt("config key '%s': '%s' is not a non-negative integer", key.c_str(), value.c_str()));
    return static_cast<std::size_t>(v);
}

inline bool config_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(strfmt("config key '%s': '%s' is not a boolean", key.c_str(), value.c_str()));
}

}  // namespace detail

// Applies one dotted-key override. "desk=true" is shorthand for the
// desk-scale network sizes and applies at its position in the key order.
inline void apply_override(TrainingConfig& cfg, const std::string& key, const std::string& value) {
    using detail::config_bool;
    using detail::config_count;
    using detail::config_number;
    if (key == "m") cfg.m = config_count(key, value);
    else if (key == "n") cfg.n = config_count(key, value);
    else if (key == "z_dim") cfg.z_dim = config_count(key, value);
    else if (key == "k_critic") cfg.k_critic = config_count(key, value);
    else if (key == "lr_critic") cfg.lr_critic = config_number(key, value);
    else if (key == "lr_generator") cfg.lr_generator = config_number(key, value);
    else if (key == "lr_discriminator") cfg.lr_discriminator = config_number(key, value);
    else if (key == "beta1") cfg.beta1 = config_number(key, value);
    else if (key == "beta2") cfg.beta2 = config_number(key, value);
    else if (key == "adam_eps") cfg.adam_eps = config_number(key, value);
    else if (key == "batch_size") cfg.batch_size = config_count(key, value);
    else if (key == "epochs") cfg.epochs = config_count(key, value);
    else if (key == "warmup_fraction") cfg.warmup_fraction = config_number(key, value);
    else if (key == "quality_n") cfg.quality_n = config_count(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(config_count(key, value));
    else if (key == "hidden_dim") cfg.hidden_dim = config_count(key, value);
    else if (key == "layers") cfg.layers = config_count(key, value);
    else if (key == "critic_h1") cfg.critic_h1 = config_count(key, value);
    else if (key == "critic_h2") cfg.critic_h2 = config_count(key, value);
    else if (key == "stride") cfg.stride = config_count(key, value);
    else if (key == "frame_step") cfg.frame_step = config_count(key, value);
    else if (key == "z_dist") cfg.z_dist = value;
    else if (key == "weights.lambda_gp") cfg.weights.lambda_gp = config_number(key, value);
    else if (key == "weights.alpha_l2") cfg.weights.alpha_l2 = config_number(key, value);
    else if (key == "weights.alpha_pg") cfg.weights.alpha_pg = config_number(key, value);
    else if (key == "weights.beta_bone") cfg.weights.beta_bone = config_number(key, value);
    else if (key == "weights.pg_floor_c") cfg.weights.pg_floor_c = config_number(key, value);
    else if (key == "weights.p") cfg.weights.p = config_number(key, value);
    else if (key == "desk") {
        if (config_bool(key, value)) {
            cfg.hidden_dim = 64;
            cfg.critic_h1 = 128;
            cfg.critic_h2 = 64;
        }
    } else {
        throw ConfigError(strfmt("unknown config key '%s'", key.c_str()));
    }
}

// Flat key=value text; '#' starts a comment, blank lines skipped.
inline TrainingConfig parse_config_text(const std::string& text, TrainingConfig base = {}) {
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t\r");
        const std::string body = line.substr(a, b - a + 1);
        const std::size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError(strfmt("config line %d: expected key=value, got '%s'", line_no, body.c_str()));
        auto trim = [](std::string s) {
            const std::size_t x = s.find_first_not_of(" \t");
            const std::size_t y = s.find_last_not_of(" \t");
            return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
        };
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(strfmt("config line %d: empty key or value", line_no));
        apply_override(base, key, value);
    }
    return base;
}

// ---- Adam ----

struct AdamSlot {
    Tensor m, v;
};

struct AdamState {
    std::map<std::string, AdamSlot> slots;
    std::size_t step = 0;
};

namespace detail {

inline void adam_update_tensor(Tensor& theta, const Tensor& g, AdamSlot& slot, std::size_t t, double lr, double b1,
                               double b2, double eps, const std::string& name) {
    if (!theta.same_shape(g))
        throw ShapeError(strfmt("adam: gradient for '%s' has shape %s, parameter has %s", name.c_str(),
                                shape_str(g.shape()).c_str(), shape_str(theta.shape()).c_str()));
    if (!g.all_finite()) throw NumericError(strfmt("adam: non-finite gradient for '%s'", name.c_str()));
    if (!slot.m.same_shape(theta)) {
        slot.m = Tensor::zeros(theta.shape());
        slot.v = Tensor::zeros(theta.shape());
    }
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < theta.numel(); ++i) {
        slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * g[i];
        slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = slot.m[i] / c1;
        const double vhat = slot.v[i] / c2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace detail

// One Adam step over every tensor of a parameter struct. Gradients are
// looked up by visit name; a missing gradient is a hard error.
template <typename P>
void adam_step(P& params, const std::string& prefix, const GradientMap& grads, AdamState& state, double lr, double b1,
               double b2, double eps) {
    ++state.step;
    params.visit(prefix, [&](const std::string& name, Tensor& t) {
        const auto it = grads.find(name);
        if (it == grads.end()) throw ShapeError(strfmt("adam: no gradient for parameter '%s'", name.c_str()));
        detail::adam_update_tensor(t, it->second, state.slots[name], state.step, lr, b1, b2, eps, name);
    });
}

// ---- reports, history, checkpoints ----

struct QualityReport {
    std::size_t epoch = 0;
    std::size_t count_above_half = 0;
    double mean_prob = 0.0;
    std::vector<double> probabilities;
};

struct LossRow {
    std::size_t step = 0;
    double critic = 0.0, generator = 0.0, discriminator = 0.0;
};

struct Checkpoint {
    TrainingConfig config;
    SkeletonTopology topology;
    NormalizationParams bounds;  // affine bounds the training data used
    GeneratorParams<Tensor> gen;
    MlpParams<Tensor> critic;
    MlpParams<Tensor> disc;
    AdamState adam_gen, adam_critic, adam_disc;
    std::size_t epoch = 0;
    QualityReport quality;
};

struct TrainResult {
    Checkpoint best;
    Checkpoint last;
    std::vector<LossRow> history;
    std::vector<QualityReport> quality;
};

// ---- trainer ----

class Trainer {
public:
    Trainer(SkeletonTopology topology, TrainingConfig cfg)
        : topology_(std::move(topology)), cfg_(std::move(cfg)), rng_(cfg_.seed) {
        cfg_.validate();
        topology_.validate();
        const std::size_t pose_dim = topology_.joints * 3;
        Rng init_rng(cfg_.seed ^ 0x9e3779b97f4a7c15ull);
        gen_ = init_generator(pose_dim, cfg_.hidden_dim, cfg_.z_dim, cfg_.layers, init_rng);
        const std::size_t critic_in = (cfg_.m + cfg_.n) * pose_dim;
        critic_ = init_mlp(critic_in, cfg_.critic_h1, cfg_.critic_h2, init_rng);
        disc_ = init_mlp(critic_in, cfg_.critic_h1, cfg_.critic_h2, init_rng);
    }

    const TrainingConfig& config() const { return cfg_; }
    GeneratorParams<Tensor>& gen() { return gen_; }
    MlpParams<Tensor>& critic() { return critic_; }
    MlpParams<Tensor>& disc() { return disc_; }

    std::vector<double> draw_z() {
        std::vector<double> z(cfg_.z_dim);
        if (cfg_.z_dist == "uniform")
            for (double& v : z) v = rng_.uniform(-1.0, 1.0);
        else
            for (double& v : z) v = rng_.normal();
        return z;
    }

    // k_critic Adam updates of the critic; each iteration draws fresh z and
    // ε per sample. Returns the pre-update loss of every iteration.
    std::vector<double> critic_phase(const std::vector<TrainingSample>& batch) {
        std::vector<double> trace;
        trace.reserve(cfg_.k_critic);
        for (std::size_t it = 0; it < cfg_.k_critic; ++it) {
            const std::vector<LossSample> ls = to_loss_samples(batch, true);
            const MlpParams<Value> cv = lift(critic_, true, "c");
            const Value loss = critic_total_loss(ls, cv, gen_, cfg_.weights);
            check_finite(loss, "critic");
            trace.push_back(loss.item());
            const GradientMap grads = backward(loss, param_values(cv, "c"));
            adam_step(critic_, "c", grads, adam_critic_, cfg_.lr_critic, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
        }
        return trace;
    }

    // One Adam update of the generator; returns the pre-update loss.
    double generator_phase(const std::vector<TrainingSample>& batch) {
        const std::vector<LossSample> ls = to_loss_samples(batch, false);
        const GeneratorParams<Value> gv = lift(gen_, true);
        const Value loss = generator_total_loss(ls, gv, critic_, cfg_.weights, topology_);
        check_finite(loss, "generator");
        const double v = loss.item();
        const GradientMap grads = backward(loss, param_values(gv, "g"));
        adam_step(gen_, "g", grads, adam_gen_, cfg_.lr_generator, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
        return v;
    }

    // One Adam update of the discriminator; returns the pre-update loss.
    double discriminator_phase(const std::vector<TrainingSample>& batch) {
        const std::vector<LossSample> ls = to_loss_samples(batch, false);
        const MlpParams<Value> dv = lift(disc_, true, "d");
        const Value loss = discriminator_total_loss(ls, dv, gen_, cfg_.weights.alpha_l2);
        check_finite(loss, "discriminator");
        const double v = loss.item();
        const GradientMap grads = backward(loss, param_values(dv, "d"));
        adam_step(disc_, "d", grads, adam_disc_, cfg_.lr_discriminator, cfg_.beta1, cfg_.beta2, cfg_.adam_eps);
        return v;
    }

    // N z-draws from one probe prior; counts futures the discriminator
    // scores strictly above one half.
    QualityReport quality_evaluate(const TrainingSample& probe, std::size_t n_draws) {
        if (n_draws < 1) throw ConfigError("quality_evaluate: needs at least one draw");
        QualityReport report;
        report.probabilities.reserve(n_draws);
        std::vector<std::vector<double>> prior;
        prior.reserve(probe.prior.size());
        for (const Pose& p : probe.prior) prior.push_back(pose_flat(p));
        double sum = 0.0;
        for (std::size_t i = 0; i < n_draws; ++i) {
            const std::vector<std::vector<double>> fake = generate_poses(gen_, prior, draw_z(), cfg_.n);
            const double prob = discriminator_prob_value(disc_, prior, fake);
            report.probabilities.push_back(prob);
            sum += prob;
            if (prob > 0.5) ++report.count_above_half;
        }
        report.mean_prob = sum / static_cast<double>(n_draws);
        return report;
    }

    // Full loop: per batch, k critic updates then one generator and one
    // discriminator update; per epoch, a quality probe; after the warmup
    // window, keeps the checkpoint with the highest count_above_half.
    TrainResult train(const std::vector<TrainingSample>& dataset, const NormalizationParams& bounds) {
        if (dataset.empty()) throw ConfigError("train: empty dataset");
        for (const TrainingSample& s : dataset)
            if (s.prior.size() != cfg_.m || s.future.size() != cfg_.n)
                throw ConfigError(strfmt("train: sample with %zu prior/%zu future frames, config wants %zu/%zu",
                                         s.prior.size(), s.future.size(), cfg_.m, cfg_.n));
        TrainResult result;
        const TrainingSample probe = dataset.front();
        const std::size_t warmup_epochs =
            static_cast<std::size_t>(cfg_.warmup_fraction * static_cast<double>(cfg_.epochs));
        std::size_t step = 0;
        bool have_best = false;
        for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
            std::vector<std::size_t> order(dataset.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            rng_.shuffle(order);
            for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
                std::vector<TrainingSample> batch;
                for (std::size_t i = start; i < std::min(order.size(), start + cfg_.batch_size); ++i)
                    batch.push_back(dataset[order[i]]);
                ++step;
                LossRow row;
                row.step = step;
                const std::vector<double> trace = critic_phase(batch);
                row.critic = trace.back();
                row.generator = generator_phase(batch);
                row.discriminator = discriminator_phase(batch);
                result.history.push_back(row);
            }
            QualityReport q = quality_evaluate(probe, cfg_.quality_n);
            q.epoch = epoch;
            result.quality.push_back(q);
            if (epoch > warmup_epochs && (!have_best || q.count_above_half > result.best.quality.count_above_half)) {
                result.best = snapshot(bounds, epoch, q);
                have_best = true;
            }
        }
        result.last = snapshot(bounds, cfg_.epochs, result.quality.back());
        if (!have_best) result.best = result.last;
        return result;
    }

    Checkpoint snapshot(const NormalizationParams& bounds, std::size_t epoch, const QualityReport& q) const {
        Checkpoint c;
        c.config = cfg_;
        c.topology = topology_;
        c.bounds = bounds;
        c.gen = gen_;
        c.critic = critic_;
        c.disc = disc_;
        c.adam_gen = adam_gen_;
        c.adam_critic = adam_critic_;
        c.adam_disc = adam_disc_;
        c.epoch = epoch;
        c.quality = q;
        return c;
    }

private:
    std::vector<LossSample> to_loss_samples(const std::vector<TrainingSample>& batch, bool fresh_epsilon) {
        std::vector<LossSample> out;
        out.reserve(batch.size());
        for (const TrainingSample& s : batch) {
            LossSample ls;
            ls.prior.reserve(s.prior.size());
            ls.future.reserve(s.future.size());
            for (const Pose& p : s.prior) ls.prior.push_back(pose_flat(p));
            for (const Pose& p : s.future) ls.future.push_back(pose_flat(p));
            ls.z = draw_z();
            ls.epsilon = fresh_epsilon ? rng_.uniform01() : 0.5;
            out.push_back(std::move(ls));
        }
        return out;
    }

    void check_finite(const Value& loss, const char* phase) const {
        if (std::isfinite(loss.item())) return;
        const std::string where = first_nonfinite(loss);
        throw NumericError(strfmt("%s loss is non-finite (first bad node: %s)", phase, where.c_str()));
    }

    SkeletonTopology topology_;
    TrainingConfig cfg_;
    Rng rng_;
    GeneratorParams<Tensor> gen_;
    MlpParams<Tensor> critic_;
    MlpParams<Tensor> disc_;
    AdamState adam_gen_, adam_critic_, adam_disc_;
};

// ---- CSV logs ----

inline std::string losses_csv(const std::vector<LossRow>& history) {
    std::string out = "step,critic_loss,generator_loss,discriminator_loss\n";
    for (const LossRow& r : history)
        out += strfmt("%zu,%s,%s,%s\n", r.step, dtos(r.critic).c_str(), dtos(r.generator).c_str(),
                      dtos(r.discriminator).c_str());
    return out;
}

inline std::vector<LossRow> parse_losses_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    auto chomp = [](std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    };
    if (!std::getline(is, line)) throw ParseError("losses csv: empty file");
    chomp(line);
    if (line != "step,critic_loss,generator_loss,discriminator_loss")
        throw ParseError(strfmt("losses csv: bad header '%s'", line.c_str()));
    std::vector<LossRow> rows;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        chomp(line);
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i)
            if (i == line.size() || line[i] == ',') {
                fields.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        if (fields.size() != 4)
            throw ParseError(strfmt("losses csv line %d: expected 4 columns, got %zu", line_no, fields.size()));
        LossRow r;
        try {
            std::size_t used = 0;
            r.step = static_cast<std::size_t>(std::stoull(fields[0], &used));
            if (used != fields[0].size()) throw std::invalid_argument(fields[0]);
            for (int c = 1; c <= 3; ++c) {
                const double v = std::stod(fields[c], &used);
                if (used != fields[c].size()) throw std::invalid_argument(fields[c]);
                (c == 1 ? r.critic : c == 2 ? r.generator : r.discriminator) = v;
            }
        } catch (const std::exception&) {
            throw ParseError(strfmt("losses csv line %d: malformed number", line_no));
        }
        rows.push_back(r);
    }
    if (rows.empty()) throw ParseError("losses csv: no data rows");
    return rows;
}

inline std::string quality_csv(const std::vector<QualityReport>& reports) {
    std::string out = "epoch,count_above_half,mean_prob\n";
    for (const QualityReport& q : reports)
        out += strfmt("%zu,%zu,%s\n", q.epoch, q.count_above_half, dtos(q.mean_prob).c_str());
    return out;
}

// ---- checkpoint serialization ----

namespace detail {

inline nlohmann::json tensor_to_json(const Tensor& t) {
    nlohmann::json j;
    j["shape"] = t.shape();
    j["values"] = t.data();
    return j;
}

inline Tensor tensor_from_json(const nlohmann::json& j) {
    const Shape shape = j.at("shape").get<Shape>();
    std::vector<double> values = j.at("values").get<std::vector<double>>();
    return Tensor(shape, std::move(values));
}

template <typename P>
nlohmann::json params_to_json(P params, const std::string& prefix) {
    nlohmann::json j;
    params.visit(prefix, [&](const std::string& name, Tensor& t) { j[name] = tensor_to_json(t); });
    return j;
}

template <typename P>
void params_from_json(P& params, const std::string& prefix, const nlohmann::json& j) {
    params.visit(prefix, [&](const std::string& name, Tensor& t) {
        if (!j.contains(name)) throw ParseError(strfmt("checkpoint: missing parameter '%s'", name.c_str()));
        t = tensor_from_json(j.at(name));
    });
}

inline nlohmann::json adam_to_json(const AdamState& s) {
    nlohmann::json slots;
    for (const auto& [name, slot] : s.slots) {
        slots[name] = {{"m", tensor_to_json(slot.m)}, {"v", tensor_to_json(slot.v)}};
    }
    return {{"step", s.step}, {"slots", std::move(slots)}};
}

inline AdamState adam_from_json(const nlohmann::json& j) {
    AdamState s;
    s.step = j.at("step").get<std::size_t>();
    for (const auto& [name, slot] : j.at("slots").items()) {
        AdamSlot a;
        a.m = tensor_from_json(slot.at("m"));
        a.v = tensor_from_json(slot.at("v"));
        s.slots.emplace(name, std::move(a));
    }
    return s;
}

inline nlohmann::json config_to_json(const TrainingConfig& c) {
    nlohmann::json j;
    j["m"] = c.m;
    j["n"] = c.n;
    j["z_dim"] = c.z_dim;
    j["k_critic"] = c.k_critic;
    j["lr_critic"] = c.lr_critic;
    j["lr_generator"] = c.lr_generator;
    j["lr_discriminator"] = c.lr_discriminator;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["adam_eps"] = c.adam_eps;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["warmup_fraction"] = c.warmup_fraction;
    j["quality_n"] = c.quality_n;
    j["seed"] = c.seed;
    j["hidden_dim"] = c.hidden_dim;
    j["layers"] = c.layers;
    j["critic_h1"] = c.critic_h1;
    j["critic_h2"] = c.critic_h2;
    j["stride"] = c.stride;
    j["frame_step"] = c.frame_step;
    j["z_dist"] = c.z_dist;
    j["weights"] = {{"lambda_gp", c.weights.lambda_gp},   {"alpha_l2", c.weights.alpha_l2},
                    {"alpha_pg", c.weights.alpha_pg},     {"beta_bone", c.weights.beta_bone},
                    {"pg_floor_c", c.weights.pg_floor_c}, {"p", c.weights.p}};
    return j;
}

inline TrainingConfig config_from_json(const nlohmann::json& j) {
    TrainingConfig c;
    c.m = j.at("m").get<std::size_t>();
    c.n = j.at("n").get<std::size_t>();
    c.z_dim = j.at("z_dim").get<std::size_t>();
    c.k_critic = j.at("k_critic").get<std::size_t>();
    c.lr_critic = j.at("lr_critic").get<double>();
    c.lr_generator = j.at("lr_generator").get<double>();
    c.lr_discriminator = j.at("lr_discriminator").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.warmup_fraction = j.at("warmup_fraction").get<double>();
    c.quality_n = j.at("quality_n").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.critic_h1 = j.at("critic_h1").get<std::size_t>();
    c.critic_h2 = j.at("critic_h2").get<std::size_t>();
    c.stride = j.at("stride").get<std::size_t>();
    c.frame_step = j.at("frame_step").get<std::size_t>();
    c.z_dist = j.at("z_dist").get<std::string>();
    const auto& w = j.at("weights");
    c.weights.lambda_gp = w.at("lambda_gp").get<double>();
    c.weights.alpha_l2 = w.at("alpha_l2").get<double>();
    c.weights.alpha_pg = w.at("alpha_pg").get<double>();
    c.weights.beta_bone = w.at("beta_bone").get<double>();
    c.weights.pg_floor_c = w.at("pg_floor_c").get<double>();
    c.weights.p = w.at("p").get<double>();
    return c;
}

}  // namespace detail

inline constexpr int kCheckpointVersion = 1;

inline std::string serialize_checkpoint(const Checkpoint& c) {
    nlohmann::json j;
    j["format"] = "hpgan-checkpoint";
    j["version"] = kCheckpointVersion;
    j["epoch"] = c.epoch;
    j["config"] = detail::config_to_json(c.config);
    nlohmann::json topo;
    topo["joints"] = c.topology.joints;
    topo["name"] = c.topology.name;
    auto bones = nlohmann::json::array();
    for (const auto& [p, ch] : c.topology.bones) bones.push_back({p, ch});
    topo["bones"] = std::move(bones);
    j["topology"] = std::move(topo);
    j["bounds"] = {{"axis_min", c.bounds.axis_min},
                   {"axis_max", c.bounds.axis_max},
                   {"center_of_gravity", c.bounds.center_of_gravity}};
    j["quality"] = {{"epoch", c.quality.epoch},
                    {"count_above_half", c.quality.count_above_half},
                    {"mean_prob", c.quality.mean_prob},
                    {"probabilities", c.quality.probabilities}};
    j["gen_dims"] = {{"pose_dim", c.gen.pose_dim},
                     {"hidden_dim", c.gen.hidden_dim},
                     {"z_dim", c.gen.z_dim},
                     {"layers", c.gen.layers()}};
    j["critic_dims"] = {{"input_dim", c.critic.input_dim}, {"h1", c.critic.h1}, {"h2", c.critic.h2}};
    j["disc_dims"] = {{"input_dim", c.disc.input_dim}, {"h1", c.disc.h1}, {"h2", c.disc.h2}};
    j["params"] = {{"g", detail::params_to_json(c.gen, "g")},
                   {"c", detail::params_to_json(c.critic, "c")},
                   {"d", detail::params_to_json(c.disc, "d")}};
    j["adam"] = {{"g", detail::adam_to_json(c.adam_gen)},
                 {"c", detail::adam_to_json(c.adam_critic)},
                 {"d", detail::adam_to_json(c.adam_disc)}};
    return j.dump();
}

inline Checkpoint deserialize_checkpoint(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(strfmt("checkpoint: corrupt file: %s", e.what()));
    }
    try {
        if (j.value("format", std::string()) != "hpgan-checkpoint")
            throw ParseError("checkpoint: not an hpgan checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw ParseError(strfmt("checkpoint: unsupported version %d (expected %d)", j.at("version").get<int>(),
                                    kCheckpointVersion));
        Checkpoint c;
        c.epoch = j.at("epoch").get<std::size_t>();
        c.config = detail::config_from_json(j.at("config"));
        const auto& topo = j.at("topology");
        c.topology.joints = topo.at("joints").get<std::size_t>();
        c.topology.name = topo.at("name").get<std::string>();
        for (const auto& bone : topo.at("bones"))
            c.topology.bones.emplace_back(bone[0].get<std::size_t>(), bone[1].get<std::size_t>());
        c.topology.validate();
        const auto& b = j.at("bounds");
        c.bounds.axis_min = b.at("axis_min").get<std::array<double, 3>>();
        c.bounds.axis_max = b.at("axis_max").get<std::array<double, 3>>();
        c.bounds.center_of_gravity = b.at("center_of_gravity").get<std::array<double, 3>>();
        const auto& q = j.at("quality");
        c.quality.epoch = q.at("epoch").get<std::size_t>();
        c.quality.count_above_half = q.at("count_above_half").get<std::size_t>();
        c.quality.mean_prob = q.at("mean_prob").get<double>();
        c.quality.probabilities = q.at("probabilities").get<std::vector<double>>();

        const auto& gd = j.at("gen_dims");
        Rng scratch(0);
        c.gen = init_generator(gd.at("pose_dim").get<std::size_t>(), gd.at("hidden_dim").get<std::size_t>(),
                               gd.at("z_dim").get<std::size_t>(), gd.at("layers").get<std::size_t>(), scratch);
        detail::params_from_json(c.gen, "g", j.at("params").at("g"));
        validate(c.gen);
        const auto& cd = j.at("critic_dims");
        c.critic = init_mlp(cd.at("input_dim").get<std::size_t>(), cd.at("h1").get<std::size_t>(),
                            cd.at("h2").get<std::size_t>(), scratch);
        detail::params_from_json(c.critic, "c", j.at("params").at("c"));
        validate(c.critic, "critic");
        const auto& dd = j.at("disc_dims");
        c.disc = init_mlp(dd.at("input_dim").get<std::size_t>(), dd.at("h1").get<std::size_t>(),
                          dd.at("h2").get<std::size_t>(), scratch);
        detail::params_from_json(c.disc, "d", j.at("params").at("d"));
        validate(c.disc, "disc");
        c.adam_gen = detail::adam_from_json(j.at("adam").at("g"));
        c.adam_critic = detail::adam_from_json(j.at("adam").at("c"));
        c.adam_disc = detail::adam_from_json(j.at("adam").at("d"));
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(strfmt("checkpoint: corrupt file: %s", e.what()));
    }
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(strfmt("checkpoint: cannot open '%s' for writing", path.c_str()));
    const std::string text = serialize_checkpoint(c);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw ConfigError(strfmt("checkpoint: write to '%s' failed", path.c_str()));
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(strfmt("checkpoint: cannot open '%s'", path.c_str()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str());
}

}  // namespace hpgan
