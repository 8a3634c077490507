#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "hpgan/trainer.hpp"

using namespace hpgan;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

TrainingConfig tiny_config() {
    TrainingConfig cfg;
    cfg.m = 2;
    cfg.n = 2;
    cfg.z_dim = 4;
    cfg.k_critic = 3;
    cfg.hidden_dim = 8;
    cfg.critic_h1 = 8;
    cfg.critic_h2 = 8;
    cfg.batch_size = 2;
    cfg.epochs = 4;
    cfg.quality_n = 4;
    cfg.seed = 7;
    return cfg;
}

TrainingSample make_sample(Rng& rng, std::size_t m, std::size_t n, std::size_t joints) {
    TrainingSample s;
    auto frame = [&] {
        Pose p;
        for (std::size_t j = 0; j < joints; ++j)
            p.joints.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
        return p;
    };
    for (std::size_t i = 0; i < m; ++i) s.prior.push_back(frame());
    for (std::size_t i = 0; i < n; ++i) s.future.push_back(frame());
    return s;
}

std::vector<TrainingSample> make_dataset(std::uint64_t seed, std::size_t count, const TrainingConfig& cfg,
                                         std::size_t joints) {
    Rng rng(seed);
    std::vector<TrainingSample> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(make_sample(rng, cfg.m, cfg.n, joints));
    return out;
}

template <typename P>
std::vector<Tensor> tensors_of(P params, const std::string& prefix) {
    std::vector<Tensor> out;
    params.visit(prefix, [&](const std::string&, Tensor& t) { out.push_back(t); });
    return out;
}

template <typename P>
bool params_identical(P a, P b, const std::string& prefix) {
    const std::vector<Tensor> ta = tensors_of(a, prefix);
    const std::vector<Tensor> tb = tensors_of(b, prefix);
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i)
        if (!(ta[i] == tb[i])) return false;
    return true;
}

template <typename P>
void zero_params(P& params, const std::string& prefix) {
    params.visit(prefix, [](const std::string&, Tensor& t) { t = Tensor::zeros(t.shape()); });
}

struct OneParam {
    Tensor t = Tensor::zeros({1});
    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".t", t);
    }
};

}  // namespace

TEST_CASE("training config defaults and validation") {
    TrainingConfig cfg;
    CHECK(cfg.m == 10);
    CHECK(cfg.n == 30);
    CHECK(cfg.z_dim == 128);
    CHECK(cfg.k_critic == 10);
    CHECK(cfg.lr_critic == 5e-5);
    CHECK(cfg.lr_generator == 5e-5);
    CHECK(cfg.lr_discriminator == 2.5e-5);
    CHECK(cfg.lr_discriminator == Approx(cfg.lr_critic / 2));
    CHECK(cfg.beta1 == 0.5);
    CHECK(cfg.beta2 == 0.9);
    CHECK(cfg.adam_eps == 1e-8);
    CHECK(cfg.batch_size == 16);
    CHECK(cfg.warmup_fraction == 0.25);
    CHECK(cfg.quality_n == 64);
    CHECK(cfg.weights.lambda_gp == 10.0);
    CHECK(cfg.weights.alpha_l2 == 0.001);
    CHECK(cfg.z_dist == "uniform");
    REQUIRE_NOTHROW(cfg.validate());

    TrainingConfig bad = cfg;
    bad.k_critic = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.lr_critic = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.warmup_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.m = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.z_dist = "cauchy";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config overrides parse, type-check, and reject unknown keys") {
    TrainingConfig cfg;
    apply_override(cfg, "k_critic", "1");
    CHECK(cfg.k_critic == 1);
    apply_override(cfg, "lr_critic", "1e-3");
    CHECK(cfg.lr_critic == 1e-3);
    apply_override(cfg, "weights.lambda_gp", "5");
    CHECK(cfg.weights.lambda_gp == 5.0);
    apply_override(cfg, "z_dist", "normal");
    CHECK(cfg.z_dist == "normal");

    CHECK_THROWS_AS(apply_override(cfg, "bogus_key", "1"), ConfigError);
    CHECK_THROWS_WITH(apply_override(cfg, "bogus_key", "1"), ContainsSubstring("bogus_key"));
    CHECK_THROWS_AS(apply_override(cfg, "epochs", "soon"), ConfigError);
    CHECK_THROWS_WITH(apply_override(cfg, "epochs", "soon"), ContainsSubstring("soon"));
    CHECK_THROWS_AS(apply_override(cfg, "m", "2.5"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "m", "-3"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "desk", "maybe"), ConfigError);

    // desk=true is shorthand for the small network sizes.
    TrainingConfig desk;
    apply_override(desk, "desk", "true");
    CHECK(desk.hidden_dim == 64);
    CHECK(desk.critic_h1 == 128);
    CHECK(desk.critic_h2 == 64);
    CHECK(desk.z_dim == 128);  // untouched

    const std::string text =
        "# comment line\n"
        "\n"
        "m = 4\n"
        "n=6  # trailing comment\n"
        "weights.beta_bone = 0.5\n"
        "seed=99\n";
    const TrainingConfig parsed = parse_config_text(text);
    CHECK(parsed.m == 4);
    CHECK(parsed.n == 6);
    CHECK(parsed.weights.beta_bone == 0.5);
    CHECK(parsed.seed == 99);

    CHECK_THROWS_AS(parse_config_text("m 4\n"), ConfigError);
    CHECK_THROWS_WITH(parse_config_text("m 4\n"), ContainsSubstring("key=value"));
    CHECK_THROWS_AS(parse_config_text("m=\n"), ConfigError);
}

TEST_CASE("adam step matches the hand recurrence") {
    const double lr = 1e-3, b1 = 0.5, b2 = 0.9, eps = 1e-8;

    SECTION("first step with unit gradient moves by about -lr") {
        OneParam p;
        AdamState st;
        GradientMap g;
        g.emplace("w.t", Tensor::ones({1}));
        adam_step(p, "w", g, st, lr, b1, b2, eps);
        CHECK(st.step == 1);
        // mhat = vhat = 1 exactly on the first step, so θ = -lr/(1+eps).
        CHECK(p.t[0] == Approx(-lr).epsilon(1e-6));
    }

    SECTION("zero gradient leaves the parameter bitwise unchanged") {
        OneParam p;
        p.t[0] = 0.75;
        AdamState st;
        GradientMap g;
        g.emplace("w.t", Tensor::zeros({1}));
        adam_step(p, "w", g, st, lr, b1, b2, eps);
        adam_step(p, "w", g, st, lr, b1, b2, eps);
        CHECK(p.t[0] == 0.75);
    }

    SECTION("two steps with constant gradient match the scalar recurrence") {
        OneParam p;
        AdamState st;
        GradientMap g;
        g.emplace("w.t", Tensor::ones({1}));
        adam_step(p, "w", g, st, lr, b1, b2, eps);
        adam_step(p, "w", g, st, lr, b1, b2, eps);

        double theta = 0.0, m = 0.0, v = 0.0;
        for (int t = 1; t <= 2; ++t) {
            m = b1 * m + (1.0 - b1) * 1.0;
            v = b2 * v + (1.0 - b2) * 1.0;
            const double mhat = m / (1.0 - std::pow(b1, t));
            const double vhat = v / (1.0 - std::pow(b2, t));
            theta -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        CHECK(p.t[0] == theta);
        CHECK(st.step == 2);
    }

    SECTION("errors: missing, non-finite, and mis-shaped gradients") {
        OneParam p;
        AdamState st;
        GradientMap empty;
        CHECK_THROWS_AS(adam_step(p, "w", empty, st, lr, b1, b2, eps), ShapeError);
        CHECK_THROWS_WITH(adam_step(p, "w", empty, st, lr, b1, b2, eps), ContainsSubstring("w.t"));

        GradientMap bad;
        bad.emplace("w.t", Tensor::full({1}, std::nan("")));
        CHECK_THROWS_AS(adam_step(p, "w", bad, st, lr, b1, b2, eps), NumericError);

        GradientMap wrong;
        wrong.emplace("w.t", Tensor::ones({2}));
        CHECK_THROWS_AS(adam_step(p, "w", wrong, st, lr, b1, b2, eps), ShapeError);
    }
}

TEST_CASE("critic phase trains only the critic") {
    const TrainingConfig cfg = tiny_config();
    Trainer tr(chain_topology(3), cfg);
    const auto dataset = make_dataset(11, 2, cfg, 3);

    const GeneratorParams<Tensor> gen_before = tr.gen();
    const MlpParams<Tensor> critic_before = tr.critic();
    const MlpParams<Tensor> disc_before = tr.disc();

    const std::vector<double> trace = tr.critic_phase(dataset);
    REQUIRE(trace.size() == cfg.k_critic);
    for (const double v : trace) CHECK(std::isfinite(v));

    CHECK(params_identical(tr.gen(), gen_before, "g"));
    CHECK(params_identical(tr.disc(), disc_before, "d"));
    CHECK_FALSE(params_identical(tr.critic(), critic_before, "c"));

    SECTION("a zero critic with all weights off reports a zero loss") {
        TrainingConfig flat = cfg;
        flat.k_critic = 1;
        flat.weights.lambda_gp = 0.0;
        flat.weights.alpha_l2 = 0.0;
        Trainer still(chain_topology(3), flat);
        zero_params(still.critic(), "c");
        const std::vector<double> t = still.critic_phase(dataset);
        REQUIRE(t.size() == 1);
        CHECK(t.front() == 0.0);  // fake and real both score zero
    }

    SECTION("identical seeds give identical traces") {
        Trainer a(chain_topology(3), cfg), b(chain_topology(3), cfg);
        const std::vector<double> ta = a.critic_phase(dataset);
        const std::vector<double> tb = b.critic_phase(dataset);
        REQUIRE(ta.size() == tb.size());
        for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta[i] == tb[i]);
        // z and ε are redrawn per iteration, so a second phase on the same
        // batch starts from a different sample of the losses.
        const std::vector<double> ta2 = a.critic_phase(dataset);
        CHECK(ta2.front() != ta.front());
    }
}

TEST_CASE("generator phase trains only the generator") {
    const TrainingConfig cfg = tiny_config();
    Trainer tr(chain_topology(3), cfg);
    const auto dataset = make_dataset(12, 2, cfg, 3);

    const MlpParams<Tensor> critic_before = tr.critic();
    const MlpParams<Tensor> disc_before = tr.disc();
    const GeneratorParams<Tensor> gen_before = tr.gen();

    const double loss = tr.generator_phase(dataset);
    CHECK(std::isfinite(loss));
    CHECK(params_identical(tr.critic(), critic_before, "c"));
    CHECK(params_identical(tr.disc(), disc_before, "d"));
    CHECK_FALSE(params_identical(tr.gen(), gen_before, "g"));

    SECTION("zero critic with no skeleton terms leaves the generator unchanged") {
        TrainingConfig flat = cfg;
        flat.weights.alpha_pg = 0.0;
        flat.weights.beta_bone = 0.0;
        Trainer still(chain_topology(3), flat);
        zero_params(still.critic(), "c");
        const GeneratorParams<Tensor> before = still.gen();
        const double l = still.generator_phase(dataset);
        CHECK(l == 0.0);
        CHECK(params_identical(still.gen(), before, "g"));
    }
}

TEST_CASE("discriminator phase trains only the discriminator") {
    const TrainingConfig cfg = tiny_config();
    const auto dataset = make_dataset(13, 2, cfg, 3);
    const double two_ln2 = 2.0 * std::log(2.0);

    SECTION("zero discriminator with no regularizer reports the equilibrium loss") {
        TrainingConfig flat = cfg;
        flat.weights.alpha_l2 = 0.0;
        Trainer tr(chain_topology(3), flat);
        zero_params(tr.disc(), "d");
        const GeneratorParams<Tensor> gen_before = tr.gen();
        const MlpParams<Tensor> critic_before = tr.critic();
        const double loss = tr.discriminator_phase(dataset);
        CHECK(loss == Approx(two_ln2).margin(1e-12));
        CHECK(params_identical(tr.gen(), gen_before, "g"));
        CHECK(params_identical(tr.critic(), critic_before, "c"));
    }

    SECTION("repeated steps on a fixed batch push the loss below the equilibrium") {
        TrainingConfig flat = cfg;
        flat.weights.alpha_l2 = 0.0;
        Trainer tr(chain_topology(3), flat);
        // Zero only the output layer: the loss starts exactly at 2·ln2 while
        // the random hidden features still give a separating gradient.
        tr.disc().w3 = Tensor::zeros(tr.disc().w3.shape());
        tr.disc().b3 = Tensor::zeros(tr.disc().b3.shape());
        double first = tr.discriminator_phase(dataset);
        CHECK(first == Approx(two_ln2).margin(1e-12));
        double last = first;
        for (int i = 0; i < 99; ++i) last = tr.discriminator_phase(dataset);
        CHECK(last < two_ln2);
    }
}

TEST_CASE("quality report counts strictly above one half") {
    const TrainingConfig cfg = tiny_config();
    const auto dataset = make_dataset(14, 1, cfg, 3);

    SECTION("zero discriminator scores exactly one half everywhere") {
        Trainer tr(chain_topology(3), cfg);
        zero_params(tr.disc(), "d");
        const QualityReport q = tr.quality_evaluate(dataset.front(), 6);
        REQUIRE(q.probabilities.size() == 6);
        for (const double p : q.probabilities) CHECK(p == 0.5);
        CHECK(q.count_above_half == 0);  // strict inequality
        CHECK(q.mean_prob == 0.5);
    }

    SECTION("positive output bias scores every draw above one half") {
        Trainer tr(chain_topology(3), cfg);
        zero_params(tr.disc(), "d");
        tr.disc().b3[0] = 3.0;
        const QualityReport q = tr.quality_evaluate(dataset.front(), 5);
        CHECK(q.count_above_half == 5);
        CHECK(q.mean_prob == Approx(1.0 / (1.0 + std::exp(-3.0))).margin(1e-15));
    }

    SECTION("a single draw yields a single probability") {
        Trainer tr(chain_topology(3), cfg);
        const QualityReport q = tr.quality_evaluate(dataset.front(), 1);
        REQUIRE(q.probabilities.size() == 1);
        CHECK(q.mean_prob == q.probabilities.front());
    }

    SECTION("draw count must be positive") {
        Trainer tr(chain_topology(3), cfg);
        CHECK_THROWS_AS(tr.quality_evaluate(dataset.front(), 0), ConfigError);
    }
}

TEST_CASE("training loop bookkeeping, best tracking, and determinism") {
    TrainingConfig cfg = tiny_config();
    cfg.k_critic = 2;
    cfg.epochs = 4;
    const auto dataset = make_dataset(15, 5, cfg, 3);
    const NormalizationParams bounds;

    Trainer tr(chain_topology(3), cfg);
    const TrainResult result = tr.train(dataset, bounds);

    const std::size_t batches_per_epoch = (dataset.size() + cfg.batch_size - 1) / cfg.batch_size;
    REQUIRE(result.history.size() == cfg.epochs * batches_per_epoch);
    for (std::size_t i = 0; i < result.history.size(); ++i) {
        CHECK(result.history[i].step == i + 1);
        CHECK(std::isfinite(result.history[i].critic));
        CHECK(std::isfinite(result.history[i].generator));
        CHECK(std::isfinite(result.history[i].discriminator));
    }
    REQUIRE(result.quality.size() == cfg.epochs);
    for (std::size_t e = 0; e < cfg.epochs; ++e) CHECK(result.quality[e].epoch == e + 1);

    // warmup_fraction 0.25 of 4 epochs → tracking starts at epoch 2
    const std::size_t warmup = static_cast<std::size_t>(cfg.warmup_fraction * static_cast<double>(cfg.epochs));
    for (std::size_t e = warmup; e < cfg.epochs; ++e)
        CHECK(result.best.quality.count_above_half >= result.quality[e].count_above_half);
    CHECK(result.best.epoch > warmup);
    CHECK(result.last.epoch == cfg.epochs);
    CHECK(result.last.config.k_critic == cfg.k_critic);

    SECTION("identical seeds reproduce the loss history bitwise") {
        Trainer a(chain_topology(3), cfg), b(chain_topology(3), cfg);
        const TrainResult ra = a.train(dataset, bounds);
        const TrainResult rb = b.train(dataset, bounds);
        CHECK(losses_csv(ra.history) == losses_csv(rb.history));
        CHECK(quality_csv(ra.quality) == quality_csv(rb.quality));
        CHECK(params_identical(ra.last.gen, rb.last.gen, "g"));
    }

    SECTION("input validation") {
        Trainer t2(chain_topology(3), cfg);
        CHECK_THROWS_AS(t2.train({}, bounds), ConfigError);
        TrainingConfig other = cfg;
        other.m = 3;
        Trainer t3(chain_topology(3), other);
        CHECK_THROWS_AS(t3.train(dataset, bounds), ConfigError);
        CHECK_THROWS_WITH(t3.train(dataset, bounds), ContainsSubstring("prior"));
    }
}

TEST_CASE("csv logs use the pinned headers") {
    std::vector<LossRow> rows(1);
    rows[0].step = 1;
    rows[0].critic = 0.5;
    rows[0].generator = -2.0;
    rows[0].discriminator = 1.25;
    CHECK(losses_csv(rows) == "step,critic_loss,generator_loss,discriminator_loss\n1,0.5,-2,1.25\n");

    std::vector<QualityReport> reports(1);
    reports[0].epoch = 3;
    reports[0].count_above_half = 40;
    reports[0].mean_prob = 0.625;
    CHECK(quality_csv(reports) == "epoch,count_above_half,mean_prob\n3,40,0.625\n");
}

TEST_CASE("checkpoints round-trip bitwise") {
    TrainingConfig cfg = tiny_config();
    cfg.epochs = 1;
    const auto dataset = make_dataset(16, 3, cfg, 3);
    Trainer tr(chain_topology(3), cfg);
    tr.critic_phase(dataset);
    tr.generator_phase(dataset);
    tr.discriminator_phase(dataset);
    QualityReport q = tr.quality_evaluate(dataset.front(), 3);
    q.epoch = 1;
    NormalizationParams bounds = ntu_bounds();
    const Checkpoint ckpt = tr.snapshot(bounds, 1, q);

    const std::string text = serialize_checkpoint(ckpt);
    const Checkpoint back = deserialize_checkpoint(text);
    CHECK(serialize_checkpoint(back) == text);
    CHECK(params_identical(back.gen, ckpt.gen, "g"));
    CHECK(params_identical(back.critic, ckpt.critic, "c"));
    CHECK(params_identical(back.disc, ckpt.disc, "d"));
    CHECK(back.epoch == ckpt.epoch);
    CHECK(back.config.seed == cfg.seed);
    CHECK(back.topology.joints == 3);
    CHECK(back.bounds.axis_max == bounds.axis_max);
    CHECK(back.quality.count_above_half == q.count_above_half);
    CHECK(back.adam_critic.step == ckpt.adam_critic.step);
    REQUIRE(back.adam_critic.slots.count("c.l1.w") == 1);
    CHECK(back.adam_critic.slots.at("c.l1.w").m == ckpt.adam_critic.slots.at("c.l1.w").m);

    SECTION("file round-trip") {
        const std::string path = "ckpt_roundtrip_test.json";
        save_checkpoint(ckpt, path);
        const Checkpoint loaded = load_checkpoint(path);
        CHECK(serialize_checkpoint(loaded) == text);
        std::remove(path.c_str());
    }

    SECTION("corrupt and mismatched files are rejected") {
        CHECK_THROWS_AS(deserialize_checkpoint(text.substr(0, text.size() / 2)), ParseError);
        CHECK_THROWS_AS(deserialize_checkpoint("{}"), ParseError);

        nlohmann::json j = nlohmann::json::parse(text);
        j["version"] = 999;
        CHECK_THROWS_AS(deserialize_checkpoint(j.dump()), ParseError);
        CHECK_THROWS_WITH(deserialize_checkpoint(j.dump()), ContainsSubstring("version"));

        j = nlohmann::json::parse(text);
        j["format"] = "something-else";
        CHECK_THROWS_AS(deserialize_checkpoint(j.dump()), ParseError);

        j = nlohmann::json::parse(text);
        j["params"]["g"].erase("g.out.b");
        CHECK_THROWS_AS(deserialize_checkpoint(j.dump()), ParseError);
        CHECK_THROWS_WITH(deserialize_checkpoint(j.dump()), ContainsSubstring("g.out.b"));

        CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint_file.json"), ConfigError);
    }
}
