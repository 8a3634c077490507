#pragma once

// Loss terms for the critic, generator and discriminator, plus a test-only
// reconstruction loss. Batched variants take pre-drawn latent vectors and
// interpolation draws so they are deterministic functions of their inputs.
//
// Stop-gradients are structural: whenever a network must act as a constant
// (the generator inside the critic/discriminator losses, the critic inside
// the generator loss), the callee receives plain-tensor parameters and any
// forward pass through them never enters the graph.

#include <cstddef>
#include <vector>

#include "hpgan/autodiff.hpp"
#include "hpgan/models.hpp"
#include "hpgan/skeleton.hpp"

namespace hpgan {

struct LossWeights {
    double lambda_gp = 10.0;   // gradient-penalty weight
    double alpha_l2 = 0.001;   // weight-norm regularizer
    double alpha_pg = 0.01;    // pose-gradient (consistency) weight
    double beta_bone = 0.01;   // bone-length weight
    double pg_floor_c = 0.01;  // minimum pose-gradient loss
    double p = 2.0;            // pose-gradient norm order

    void validate() const {
        if (lambda_gp < 0 || alpha_l2 < 0 || alpha_pg < 0 || beta_bone < 0)
            throw ConfigError("loss weights: negative weight");
        if (pg_floor_c < 0) throw ConfigError("loss weights: pose-gradient floor must be non-negative");
        if (p < 1.0) throw ConfigError("loss weights: norm order p must be at least 1");
    }
};

// One training example with its pre-drawn randomness. Poses are flattened
// (joint-major x,y,z) normalized vectors.
struct LossSample {
    std::vector<std::vector<double>> prior;
    std::vector<std::vector<double>> future;
    std::vector<double> z;
    double epsilon = 0.5;
};

namespace detail {

inline Value batch_mean(const std::vector<Value>& terms) {
    Value acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return scale(acc, 1.0 / static_cast<double>(terms.size()));
}

inline std::vector<double> concat_flat(const std::vector<std::vector<double>>& a,
                                       const std::vector<std::vector<double>>& b) {
    std::vector<double> out;
    for (const auto& v : a) out.insert(out.end(), v.begin(), v.end());
    for (const auto& v : b) out.insert(out.end(), v.begin(), v.end());
    return out;
}

}  // namespace detail

// ---- critic-side terms ----

// D(x‖G(x,z)) − D(x‖y)
inline Value wgan_critic_term(const Value& score_fake, const Value& score_real) { return sub(score_fake, score_real); }

// (‖∇_{x̂} D(x̂)‖₂ − 1)² at x̂ = ε(x‖y) + (1−ε)(x‖G(x,z)). The result stays
// differentiable with respect to the critic weights because the gradient is
// computed as graph nodes inside a second-order scope.
inline Value gradient_penalty(const MlpParams<Value>& critic, const std::vector<std::vector<double>>& prior,
                              const std::vector<std::vector<double>>& future_real,
                              const std::vector<std::vector<double>>& future_fake, double epsilon) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw ConfigError(strfmt("gradient penalty: epsilon %g outside [0,1]", epsilon));
    const std::vector<double> real_cat = detail::concat_flat(prior, future_real);
    const std::vector<double> fake_cat = detail::concat_flat(prior, future_fake);
    if (real_cat.size() != fake_cat.size())
        throw ShapeError(strfmt("gradient penalty: real sequence has %zu values, fake has %zu", real_cat.size(),
                                fake_cat.size()));
    std::vector<double> mix(real_cat.size());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = epsilon * real_cat[i] + (1.0 - epsilon) * fake_cat[i];

    SecondOrderScope scope;
    const Value x_hat = leaf(Tensor::vector(mix), true, "x_hat");
    const Value score = mlp_forward(critic, x_hat);
    const Value g = input_gradient(score, x_hat);
    const Value dev = sub(norm(g), constant(Tensor::ones({1})));
    return square(dev);
}

// ‖θ‖₂ over the concatenation of all parameter tensors.
inline Value l2_regularizer(const std::vector<Value>& params) {
    if (params.empty()) throw ShapeError("l2 regularizer: no parameters");
    std::vector<Value> flat;
    flat.reserve(params.size());
    for (const Value& p : params) flat.push_back(flatten(p));
    return norm(concat_sequence(flat));
}

// L_c = mean L_wgan + λ · mean L_gp + α · L₂. The generator is a constant:
// fakes are produced outside the graph.
inline Value critic_total_loss(const std::vector<LossSample>& batch, const MlpParams<Value>& critic,
                               const GeneratorParams<Tensor>& gen, const LossWeights& w) {
    if (batch.empty()) throw ConfigError("critic loss: empty batch");
    w.validate();
    std::vector<Value> wgan_terms, gp_terms;
    for (const LossSample& s : batch) {
        const std::vector<std::vector<double>> fake = generate_poses(gen, s.prior, s.z, s.future.size());
        const std::vector<Value> prior_v = as_constants(s.prior);
        const Value score_fake = critic_score(critic, prior_v, as_constants(fake));
        const Value score_real = critic_score(critic, prior_v, as_constants(s.future));
        wgan_terms.push_back(wgan_critic_term(score_fake, score_real));
        gp_terms.push_back(gradient_penalty(critic, s.prior, s.future, fake, s.epsilon));
    }
    Value total = detail::batch_mean(wgan_terms);
    if (w.lambda_gp != 0.0) total = add(total, scale(detail::batch_mean(gp_terms), w.lambda_gp));
    if (w.alpha_l2 != 0.0) total = add(total, scale(l2_regularizer(param_values(critic, "c")), w.alpha_l2));
    return total;
}

// ---- generator-side terms ----

// −D(x‖G(x,z)) for one sample; gradient reaches θ_g through the fake poses.
inline Value adversarial_loss(const MlpParams<Value>& critic, const std::vector<Value>& prior,
                              const std::vector<Value>& future_fake) {
    return scale(critic_score(critic, prior, future_fake), -1.0);
}

namespace detail {

// |x|^p elementwise for arbitrary p ≥ 1, with zero entries mapped to zero
// and zero gradient (the max guard's mask kills the log's pole).
inline Value abs_pow(const Value& x, double p) {
    return vexp(scale(vlog(max_const(vabs(x), 1e-300)), p));
}

}  // namespace detail

// max(C, [Σ_t Σ_coords |y_t − y_{t−1}|^p]^{1/p}) with y_0 the last observed
// pose.
inline Value pose_gradient_loss(const Value& last_input_pose, const std::vector<Value>& predicted, double p,
                                double floor_c) {
    if (predicted.empty()) throw ShapeError("pose gradient loss: no predicted poses");
    if (p < 1.0) throw ConfigError(strfmt("pose gradient loss: norm order %g must be at least 1", p));
    if (floor_c < 0.0) throw ConfigError(strfmt("pose gradient loss: floor %g must be non-negative", floor_c));
    std::vector<Value> diffs;
    diffs.reserve(predicted.size());
    Value prev = last_input_pose;
    for (const Value& y : predicted) {
        diffs.push_back(sub(y, prev));
        prev = y;
    }
    const Value d = concat_sequence(diffs);
    Value raw;
    if (p == 2.0) {
        raw = norm(d);
    } else if (p == 1.0) {
        raw = sum(vabs(d));
    } else {
        const Value s = sum(detail::abs_pow(d, p));
        raw = vexp(scale(vlog(max_const(s, 1e-300)), 1.0 / p));
    }
    return max_const(raw, floor_c);
}

// Differentiable bone lengths of one flattened pose.
inline Value bone_lengths_value(const Value& flat_pose, const SkeletonTopology& topology) {
    if (flat_pose.numel() != topology.joints * 3)
        throw ShapeError(strfmt("bone lengths: pose has %zu values, topology needs %zu", flat_pose.numel(),
                                topology.joints * 3));
    std::vector<Value> lens;
    lens.reserve(topology.bones.size());
    for (const auto& [p, c] : topology.bones)
        lens.push_back(norm(sub(slice(flat_pose, 3 * p, 3), slice(flat_pose, 3 * c, 3))));
    return concat_sequence(lens);
}

// Σ_t ‖b_t − b_gt‖₂ over predicted frames.
inline Value bone_loss(const std::vector<Value>& predicted, const std::vector<double>& gt_bone_lengths,
                       const SkeletonTopology& topology) {
    if (predicted.empty()) throw ShapeError("bone loss: no predicted poses");
    if (gt_bone_lengths.size() != topology.bones.size())
        throw ShapeError(strfmt("bone loss: %zu ground-truth lengths for %zu bones", gt_bone_lengths.size(),
                                topology.bones.size()));
    const Value gt = constant(Tensor::vector(gt_bone_lengths));
    Value total;
    for (const Value& pose : predicted) {
        const Value term = norm(sub(bone_lengths_value(pose, topology), gt));
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

// Ground-truth bone lengths for a sample: per-bone mean over its real
// (prior + future) frames.
inline std::vector<double> mean_bone_lengths(const std::vector<std::vector<double>>& flat_poses,
                                             const SkeletonTopology& topology) {
    if (flat_poses.empty()) throw ShapeError("mean bone lengths: no frames");
    std::vector<double> acc(topology.bones.size(), 0.0);
    for (const auto& flat : flat_poses) {
        const std::vector<double> lens = bone_lengths(pose_from_flat(flat), topology);
        for (std::size_t b = 0; b < lens.size(); ++b) acc[b] += lens[b];
    }
    for (double& v : acc) v /= static_cast<double>(flat_poses.size());
    return acc;
}

// L_g = mean L_adv + α_pg · mean L_pg + β · mean L_b. The critic is a
// constant here: its weights are lifted without gradient tracking.
inline Value generator_total_loss(const std::vector<LossSample>& batch, const GeneratorParams<Value>& gen,
                                  const MlpParams<Tensor>& critic, const LossWeights& w,
                                  const SkeletonTopology& topology) {
    if (batch.empty()) throw ConfigError("generator loss: empty batch");
    w.validate();
    const MlpParams<Value> critic_v = lift(critic, false, "c");
    std::vector<Value> adv_terms, pg_terms, bone_terms;
    for (const LossSample& s : batch) {
        const std::vector<Value> prior_v = as_constants(s.prior);
        const std::vector<Value> fake = generate(gen, prior_v, constant(Tensor::vector(s.z)), s.future.size());
        adv_terms.push_back(adversarial_loss(critic_v, prior_v, fake));
        if (w.alpha_pg != 0.0) pg_terms.push_back(pose_gradient_loss(prior_v.back(), fake, w.p, w.pg_floor_c));
        if (w.beta_bone != 0.0) {
            std::vector<std::vector<double>> real = s.prior;
            real.insert(real.end(), s.future.begin(), s.future.end());
            bone_terms.push_back(bone_loss(fake, mean_bone_lengths(real, topology), topology));
        }
    }
    Value total = detail::batch_mean(adv_terms);
    if (!pg_terms.empty()) total = add(total, scale(detail::batch_mean(pg_terms), w.alpha_pg));
    if (!bone_terms.empty()) total = add(total, scale(detail::batch_mean(bone_terms), w.beta_bone));
    return total;
}

// ---- discriminator terms ----

// −[log p_real + log(1 − p_fake)], probabilities clamped to [1e-7, 1−1e-7].
inline Value gan_discriminator_loss(const Value& prob_real, const Value& prob_fake) {
    const Value pr = clamp(prob_real, 1e-7, 1.0 - 1e-7);
    const Value pf = clamp(prob_fake, 1e-7, 1.0 - 1e-7);
    const Value one = constant(Tensor::ones({1}));
    return scale(add(vlog(pr), vlog(sub(one, pf))), -1.0);
}

inline Value gan_discriminator_loss(const Value& prob_real, const Value& prob_fake,
                                    const std::vector<Value>& disc_params, double alpha_l2) {
    Value out = gan_discriminator_loss(prob_real, prob_fake);
    if (alpha_l2 != 0.0) out = add(out, scale(l2_regularizer(disc_params), alpha_l2));
    return out;
}

// Batched discriminator loss; the generator is a constant, as in the critic
// loss.
inline Value discriminator_total_loss(const std::vector<LossSample>& batch, const MlpParams<Value>& disc,
                                      const GeneratorParams<Tensor>& gen, double alpha_l2) {
    if (batch.empty()) throw ConfigError("discriminator loss: empty batch");
    std::vector<Value> terms;
    for (const LossSample& s : batch) {
        const std::vector<std::vector<double>> fake = generate_poses(gen, s.prior, s.z, s.future.size());
        const std::vector<Value> prior_v = as_constants(s.prior);
        const Value pr = discriminator_prob(disc, prior_v, as_constants(s.future));
        const Value pf = discriminator_prob(disc, prior_v, as_constants(fake));
        terms.push_back(gan_discriminator_loss(pr, pf));
    }
    Value total = detail::batch_mean(terms);
    if (alpha_l2 != 0.0) total = add(total, scale(l2_regularizer(param_values(disc, "d")), alpha_l2));
    return total;
}

// ---- plumbing-only loss ----

// Mean squared error over all coordinates; used by the overfit smoke tests,
// not by adversarial training.
inline Value reconstruction_mse(const std::vector<Value>& predicted,
                                const std::vector<std::vector<double>>& ground_truth) {
    if (predicted.empty() || predicted.size() != ground_truth.size())
        throw ShapeError(strfmt("reconstruction mse: %zu predicted frames vs %zu ground truth", predicted.size(),
                                ground_truth.size()));
    const Value pred = concat_sequence(predicted);
    const Value gt = concat_sequence(as_constants(ground_truth));
    return mean(square(sub(pred, gt)));
}

}  // namespace hpgan
