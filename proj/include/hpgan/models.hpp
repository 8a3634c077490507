#pragma once

// The three networks: a stacked-GRU sequence-to-sequence generator with
// latent injection into the decoder's initial states, and two three-layer
// MLPs over the flattened (m+n)-frame sequence — an unbounded critic and a
// sigmoid discriminator.
//
// Parameter structs are templated on storage: P<Tensor> holds plain weights
// (checkpoints, optimizer state), P<Value> holds graph leaves for
// differentiation. lift() converts the former into the latter, and visit()
// walks (name, field) pairs in a fixed order shared by both.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "hpgan/autodiff.hpp"
#include "hpgan/common.hpp"
#include "hpgan/tensor.hpp"

namespace hpgan {

// ---- parameter structs ----

template <typename T>
struct GruCellParams {
    std::size_t input_dim = 0, hidden_dim = 0;
    T w_u, u_u, b_u;  // update gate
    T w_r, u_r, b_r;  // reset gate
    T w_h, u_h, b_h;  // candidate

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".w_u", w_u);
        f(prefix + ".u_u", u_u);
        f(prefix + ".b_u", b_u);
        f(prefix + ".w_r", w_r);
        f(prefix + ".u_r", u_r);
        f(prefix + ".b_r", b_r);
        f(prefix + ".w_h", w_h);
        f(prefix + ".u_h", u_h);
        f(prefix + ".b_h", b_h);
    }
};

template <typename T>
struct GeneratorParams {
    std::size_t pose_dim = 0, hidden_dim = 0, z_dim = 0;
    std::vector<GruCellParams<T>> encoder;  // layer 0 consumes poses
    std::vector<GruCellParams<T>> decoder;
    std::vector<T> z_map_w;  // per layer: hidden_dim x z_dim
    std::vector<T> z_map_b;  // per layer: hidden_dim
    T out_w, out_b;          // hidden_dim -> pose_dim

    std::size_t layers() const { return encoder.size(); }

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        for (std::size_t l = 0; l < encoder.size(); ++l) encoder[l].visit(strfmt("%s.enc.%zu", prefix.c_str(), l), f);
        for (std::size_t l = 0; l < decoder.size(); ++l) decoder[l].visit(strfmt("%s.dec.%zu", prefix.c_str(), l), f);
        for (std::size_t l = 0; l < z_map_w.size(); ++l) {
            f(strfmt("%s.zmap.%zu.w", prefix.c_str(), l), z_map_w[l]);
            f(strfmt("%s.zmap.%zu.b", prefix.c_str(), l), z_map_b[l]);
        }
        f(prefix + ".out.w", out_w);
        f(prefix + ".out.b", out_b);
    }
};

// Three affine layers with leaky-relu(0.2) after the first two. The critic
// reads the final affine output raw; the discriminator applies a sigmoid.
template <typename T>
struct MlpParams {
    std::size_t input_dim = 0, h1 = 0, h2 = 0;
    T w1, b1, w2, b2, w3, b3;

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".l1.w", w1);
        f(prefix + ".l1.b", b1);
        f(prefix + ".l2.w", w2);
        f(prefix + ".l2.b", b2);
        f(prefix + ".l3.w", w3);
        f(prefix + ".l3.b", b3);
    }
};

template <typename T>
using CriticParams = MlpParams<T>;
template <typename T>
using DiscriminatorParams = MlpParams<T>;

// ---- validation ----

namespace detail {

inline void check_shape(const Tensor& t, const Shape& want, const std::string& name) {
    if (t.shape() != want)
        throw ShapeError(strfmt("%s: has shape %s, expected %s", name.c_str(), shape_str(t.shape()).c_str(),
                                shape_str(want).c_str()));
    if (!t.all_finite()) throw NumericError(strfmt("%s: contains non-finite values", name.c_str()));
}

}  // namespace detail

inline void validate(GruCellParams<Tensor>& p, const std::string& prefix) {
    const Shape wi{p.hidden_dim, p.input_dim}, wh{p.hidden_dim, p.hidden_dim}, bv{p.hidden_dim};
    detail::check_shape(p.w_u, wi, prefix + ".w_u");
    detail::check_shape(p.u_u, wh, prefix + ".u_u");
    detail::check_shape(p.b_u, bv, prefix + ".b_u");
    detail::check_shape(p.w_r, wi, prefix + ".w_r");
    detail::check_shape(p.u_r, wh, prefix + ".u_r");
    detail::check_shape(p.b_r, bv, prefix + ".b_r");
    detail::check_shape(p.w_h, wi, prefix + ".w_h");
    detail::check_shape(p.u_h, wh, prefix + ".u_h");
    detail::check_shape(p.b_h, bv, prefix + ".b_h");
}

inline void validate(GeneratorParams<Tensor>& g) {
    if (g.encoder.empty() || g.encoder.size() != g.decoder.size() || g.z_map_w.size() != g.encoder.size() ||
        g.z_map_b.size() != g.encoder.size())
        throw ShapeError(strfmt("generator: %zu encoder, %zu decoder, %zu z-map layers must all match", g.encoder.size(),
                                g.decoder.size(), g.z_map_w.size()));
    for (std::size_t l = 0; l < g.layers(); ++l) {
        const std::size_t in = l == 0 ? g.pose_dim : g.hidden_dim;
        if (g.encoder[l].input_dim != in || g.decoder[l].input_dim != in || g.encoder[l].hidden_dim != g.hidden_dim ||
            g.decoder[l].hidden_dim != g.hidden_dim)
            throw ShapeError(strfmt("generator: layer %zu dims inconsistent", l));
        validate(g.encoder[l], strfmt("enc.%zu", l));
        validate(g.decoder[l], strfmt("dec.%zu", l));
        detail::check_shape(g.z_map_w[l], {g.hidden_dim, g.z_dim}, strfmt("zmap.%zu.w", l));
        detail::check_shape(g.z_map_b[l], {g.hidden_dim}, strfmt("zmap.%zu.b", l));
    }
    detail::check_shape(g.out_w, {g.pose_dim, g.hidden_dim}, "out.w");
    detail::check_shape(g.out_b, {g.pose_dim}, "out.b");
}

inline void validate(MlpParams<Tensor>& p, const std::string& what = "mlp") {
    detail::check_shape(p.w1, {p.h1, p.input_dim}, what + ".l1.w");
    detail::check_shape(p.b1, {p.h1}, what + ".l1.b");
    detail::check_shape(p.w2, {p.h2, p.h1}, what + ".l2.w");
    detail::check_shape(p.b2, {p.h2}, what + ".l2.b");
    detail::check_shape(p.w3, {1, p.h2}, what + ".l3.w");
    detail::check_shape(p.b3, {1}, what + ".l3.b");
}

// ---- initialization ----

namespace detail {

inline Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng.uniform(-s, s);
    return Tensor({rows, cols}, std::move(v));
}

inline GruCellParams<Tensor> init_gru_cell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    GruCellParams<Tensor> p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.w_u = glorot(hidden_dim, input_dim, rng);
    p.u_u = glorot(hidden_dim, hidden_dim, rng);
    p.b_u = Tensor::zeros({hidden_dim});
    p.w_r = glorot(hidden_dim, input_dim, rng);
    p.u_r = glorot(hidden_dim, hidden_dim, rng);
    p.b_r = Tensor::zeros({hidden_dim});
    p.w_h = glorot(hidden_dim, input_dim, rng);
    p.u_h = glorot(hidden_dim, hidden_dim, rng);
    p.b_h = Tensor::zeros({hidden_dim});
    return p;
}

}  // namespace detail

inline GeneratorParams<Tensor> init_generator(std::size_t pose_dim, std::size_t hidden_dim, std::size_t z_dim,
                                              std::size_t layers, Rng& rng) {
    if (layers < 1) throw ConfigError("generator: needs at least one layer");
    GeneratorParams<Tensor> g;
    g.pose_dim = pose_dim;
    g.hidden_dim = hidden_dim;
    g.z_dim = z_dim;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = l == 0 ? pose_dim : hidden_dim;
        g.encoder.push_back(detail::init_gru_cell(in, hidden_dim, rng));
        g.decoder.push_back(detail::init_gru_cell(in, hidden_dim, rng));
        // Noise-injection maps start at a tenth of the glorot scale so the
        // observed prior dominates early predictions; z influence can grow
        // during training.
        Tensor zw = detail::glorot(hidden_dim, z_dim, rng);
        for (double& v : zw.data()) v *= 0.1;
        g.z_map_w.push_back(std::move(zw));
        g.z_map_b.push_back(Tensor::zeros({hidden_dim}));
    }
    g.out_w = detail::glorot(pose_dim, hidden_dim, rng);
    g.out_b = Tensor::zeros({pose_dim});
    validate(g);
    return g;
}

inline MlpParams<Tensor> init_mlp(std::size_t input_dim, std::size_t h1, std::size_t h2, Rng& rng) {
    MlpParams<Tensor> p;
    p.input_dim = input_dim;
    p.h1 = h1;
    p.h2 = h2;
    p.w1 = detail::glorot(h1, input_dim, rng);
    p.b1 = Tensor::zeros({h1});
    p.w2 = detail::glorot(h2, h1, rng);
    p.b2 = Tensor::zeros({h2});
    p.w3 = detail::glorot(1, h2, rng);
    p.b3 = Tensor::zeros({1});
    validate(p);
    return p;
}

// ---- lifting Tensor params into graph leaves ----

inline GruCellParams<Value> lift(const GruCellParams<Tensor>& p, bool requires_grad, const std::string& prefix) {
    GruCellParams<Value> out;
    out.input_dim = p.input_dim;
    out.hidden_dim = p.hidden_dim;
    GruCellParams<Tensor> src = p;
    std::vector<Tensor*> from;
    src.visit(prefix, [&](const std::string&, Tensor& t) { from.push_back(&t); });
    std::size_t i = 0;
    out.visit(prefix, [&](const std::string& name, Value& v) { v = leaf(*from[i++], requires_grad, name); });
    return out;
}

inline GeneratorParams<Value> lift(const GeneratorParams<Tensor>& g, bool requires_grad,
                                   const std::string& prefix = "g") {
    GeneratorParams<Value> out;
    out.pose_dim = g.pose_dim;
    out.hidden_dim = g.hidden_dim;
    out.z_dim = g.z_dim;
    for (std::size_t l = 0; l < g.layers(); ++l) {
        out.encoder.push_back(lift(g.encoder[l], requires_grad, strfmt("%s.enc.%zu", prefix.c_str(), l)));
        out.decoder.push_back(lift(g.decoder[l], requires_grad, strfmt("%s.dec.%zu", prefix.c_str(), l)));
        out.z_map_w.push_back(leaf(g.z_map_w[l], requires_grad, strfmt("%s.zmap.%zu.w", prefix.c_str(), l)));
        out.z_map_b.push_back(leaf(g.z_map_b[l], requires_grad, strfmt("%s.zmap.%zu.b", prefix.c_str(), l)));
    }
    out.out_w = leaf(g.out_w, requires_grad, prefix + ".out.w");
    out.out_b = leaf(g.out_b, requires_grad, prefix + ".out.b");
    return out;
}

inline MlpParams<Value> lift(const MlpParams<Tensor>& p, bool requires_grad, const std::string& prefix = "d") {
    MlpParams<Value> out;
    out.input_dim = p.input_dim;
    out.h1 = p.h1;
    out.h2 = p.h2;
    MlpParams<Tensor> src = p;
    std::vector<Tensor*> from;
    src.visit(prefix, [&](const std::string&, Tensor& t) { from.push_back(&t); });
    std::size_t i = 0;
    out.visit(prefix, [&](const std::string& name, Value& v) { v = leaf(*from[i++], requires_grad, name); });
    return out;
}

// By value: copying a Value-storage struct only copies node handles.
template <typename P>
std::vector<Value> param_values(P lifted, const std::string& prefix) {
    std::vector<Value> out;
    lifted.visit(prefix, [&](const std::string&, Value& v) { out.push_back(v); });
    return out;
}

// ---- forward passes (graph-building) ----

// u = σ(W_u x + U_u h + b_u); r = σ(W_r x + U_r h + b_r);
// h̃ = tanh(W_h x + U_h (r⊙h) + b_h); h_t = (1−u)⊙h_prev + u⊙h̃
inline Value gru_cell_step(const GruCellParams<Value>& p, const Value& x_t, const Value& h_prev) {
    if (x_t.numel() != p.input_dim)
        throw ShapeError(strfmt("gru_cell_step: input has %zu values, cell expects %zu", x_t.numel(), p.input_dim));
    if (h_prev.numel() != p.hidden_dim)
        throw ShapeError(strfmt("gru_cell_step: hidden state has %zu values, cell expects %zu", h_prev.numel(),
                                p.hidden_dim));
    const Value u = sigmoid(matvec(p.w_u, x_t) + matvec(p.u_u, h_prev) + p.b_u);
    const Value r = sigmoid(matvec(p.w_r, x_t) + matvec(p.u_r, h_prev) + p.b_r);
    const Value cand = vtanh(matvec(p.w_h, x_t) + matvec(p.u_h, mul(r, h_prev)) + p.b_h);
    const Value one = constant(Tensor::ones({p.hidden_dim}));
    return mul(one - u, h_prev) + mul(u, cand);
}

// Runs the stacked encoder over the prior poses; returns each layer's final
// hidden state (initial states are zero).
inline std::vector<Value> encode(const GeneratorParams<Value>& gen, const std::vector<Value>& prior) {
    if (prior.empty()) throw ShapeError("encode: prior is empty");
    std::vector<Value> h;
    for (std::size_t l = 0; l < gen.layers(); ++l) h.push_back(constant(Tensor::zeros({gen.hidden_dim})));
    for (const Value& pose : prior) {
        Value x = pose;
        for (std::size_t l = 0; l < gen.layers(); ++l) {
            h[l] = gru_cell_step(gen.encoder[l], x, h[l]);
            x = h[l];
        }
    }
    return h;
}

// Decoder layer l starts from encoder state l plus its affine z image.
inline std::vector<Value> inject_z(const std::vector<Value>& states, const Value& z,
                                   const GeneratorParams<Value>& gen) {
    if (z.numel() != gen.z_dim)
        throw ShapeError(strfmt("inject_z: z has %zu values, generator expects %zu", z.numel(), gen.z_dim));
    if (states.size() != gen.layers())
        throw ShapeError(strfmt("inject_z: %zu states for %zu layers", states.size(), gen.layers()));
    std::vector<Value> out;
    out.reserve(states.size());
    for (std::size_t l = 0; l < states.size(); ++l)
        out.push_back(states[l] + matvec(gen.z_map_w[l], z) + gen.z_map_b[l]);
    return out;
}

// Autoregressive rollout: the first decoder input is the last observed
// pose; afterwards each step consumes its predecessor's predicted pose.
inline std::vector<Value> decode(const GeneratorParams<Value>& gen, const std::vector<Value>& init_states,
                                 const Value& first_input_pose, std::size_t n) {
    if (n == 0) throw ShapeError("decode: n must be at least 1");
    if (init_states.size() != gen.layers())
        throw ShapeError(strfmt("decode: %zu states for %zu layers", init_states.size(), gen.layers()));
    std::vector<Value> h = init_states;
    std::vector<Value> out;
    out.reserve(n);
    Value x = first_input_pose;
    for (std::size_t t = 0; t < n; ++t) {
        Value layer_in = x;
        for (std::size_t l = 0; l < gen.layers(); ++l) {
            h[l] = gru_cell_step(gen.decoder[l], layer_in, h[l]);
            layer_in = h[l];
        }
        x = matvec(gen.out_w, h.back()) + gen.out_b;
        out.push_back(x);
    }
    return out;
}

// y = G(x, z; θ_g)
inline std::vector<Value> generate(const GeneratorParams<Value>& gen, const std::vector<Value>& prior, const Value& z,
                                   std::size_t n) {
    const std::vector<Value> enc = encode(gen, prior);
    const std::vector<Value> init = inject_z(enc, z, gen);
    return decode(gen, init, prior.back(), n);
}

// Flattens a frame list into one vector, row-major (time, joint, axis).
inline Value concat_sequence(const std::vector<Value>& frames) {
    if (frames.empty()) throw ShapeError("concat_sequence: no frames");
    if (frames.size() == 1) return frames[0];
    return concat(frames);
}

// Pre-sigmoid three-layer MLP on an already-flattened sequence.
inline Value mlp_forward(const MlpParams<Value>& p, const Value& flat) {
    if (flat.numel() != p.input_dim)
        throw ShapeError(strfmt("mlp: sequence flattens to %zu values, network expects %zu", flat.numel(),
                                p.input_dim));
    const Value a1 = leaky_relu(matvec(p.w1, flat) + p.b1);
    const Value a2 = leaky_relu(matvec(p.w2, a1) + p.b2);
    return matvec(p.w3, a2) + p.b3;
}

// D(x‖y): unbounded realism score of the concatenated sequence.
inline Value critic_score(const MlpParams<Value>& critic, const std::vector<Value>& prior,
                          const std::vector<Value>& future) {
    std::vector<Value> all = prior;
    all.insert(all.end(), future.begin(), future.end());
    return mlp_forward(critic, concat_sequence(all));
}

inline Value discriminator_prob(const MlpParams<Value>& disc, const std::vector<Value>& prior,
                                const std::vector<Value>& future) {
    return sigmoid(critic_score(disc, prior, future));
}

// ---- plain-tensor conveniences (no gradients kept) ----

inline std::vector<Value> as_constants(const std::vector<std::vector<double>>& poses) {
    std::vector<Value> out;
    out.reserve(poses.size());
    for (const auto& p : poses) out.push_back(constant(Tensor::vector(p)));
    return out;
}

namespace detail {

// Plain-double twins of the graph kernels. Operation order matches the
// Value-based forward pass exactly, so results are bitwise identical.
inline double stable_sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline std::vector<double> matvec_plain(const Tensor& w, const std::vector<double>& x) {
    const std::size_t r = w.rows(), c = w.cols();
    std::vector<double> out(r, 0.0);
    const auto& wv = w.data();
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += wv[i * c + j] * x[j];
        out[i] = s;
    }
    return out;
}

inline void gru_cell_plain(const GruCellParams<Tensor>& p, const std::vector<double>& x, std::vector<double>& h) {
    const std::size_t hd = p.hidden_dim;
    const std::vector<double> wux = matvec_plain(p.w_u, x), uuh = matvec_plain(p.u_u, h);
    const std::vector<double> wrx = matvec_plain(p.w_r, x), urh = matvec_plain(p.u_r, h);
    std::vector<double> u(hd), r(hd);
    for (std::size_t i = 0; i < hd; ++i) {
        u[i] = stable_sigmoid((wux[i] + uuh[i]) + p.b_u[i]);
        r[i] = stable_sigmoid((wrx[i] + urh[i]) + p.b_r[i]);
    }
    std::vector<double> rh(hd);
    for (std::size_t i = 0; i < hd; ++i) rh[i] = r[i] * h[i];
    const std::vector<double> whx = matvec_plain(p.w_h, x), uhr = matvec_plain(p.u_h, rh);
    for (std::size_t i = 0; i < hd; ++i) {
        const double cand = std::tanh((whx[i] + uhr[i]) + p.b_h[i]);
        h[i] = (1.0 - u[i]) * h[i] + u[i] * cand;
    }
}

}  // namespace detail

inline std::vector<std::vector<double>> generate_poses(const GeneratorParams<Tensor>& gen,
                                                       const std::vector<std::vector<double>>& prior,
                                                       const std::vector<double>& z, std::size_t n) {
    if (prior.empty()) throw ShapeError("encode: prior is empty");
    for (const auto& pose : prior)
        if (pose.size() != gen.pose_dim)
            throw ShapeError(strfmt("gru_cell_step: input has %zu values, cell expects %zu", pose.size(),
                                    gen.pose_dim));
    if (z.size() != gen.z_dim)
        throw ShapeError(strfmt("inject_z: z has %zu values, generator expects %zu", z.size(), gen.z_dim));
    if (n == 0) throw ShapeError("decode: n must be at least 1");

    const std::size_t layers = gen.layers();
    std::vector<std::vector<double>> h(layers, std::vector<double>(gen.hidden_dim, 0.0));
    for (const auto& pose : prior) {
        const std::vector<double>* x = &pose;
        for (std::size_t l = 0; l < layers; ++l) {
            detail::gru_cell_plain(gen.encoder[l], *x, h[l]);
            x = &h[l];
        }
    }
    for (std::size_t l = 0; l < layers; ++l) {
        const std::vector<double> az = detail::matvec_plain(gen.z_map_w[l], z);
        for (std::size_t i = 0; i < gen.hidden_dim; ++i) h[l][i] = (h[l][i] + az[i]) + gen.z_map_b[l][i];
    }
    std::vector<std::vector<double>> out;
    out.reserve(n);
    std::vector<double> x = prior.back();
    for (std::size_t t = 0; t < n; ++t) {
        const std::vector<double>* layer_in = &x;
        for (std::size_t l = 0; l < layers; ++l) {
            detail::gru_cell_plain(gen.decoder[l], *layer_in, h[l]);
            layer_in = &h[l];
        }
        std::vector<double> y = detail::matvec_plain(gen.out_w, h.back());
        for (std::size_t i = 0; i < gen.pose_dim; ++i) y[i] = y[i] + gen.out_b[i];
        x = y;
        out.push_back(std::move(y));
    }
    return out;
}

inline double critic_score_value(const MlpParams<Tensor>& critic, const std::vector<std::vector<double>>& prior,
                                 const std::vector<std::vector<double>>& future) {
    const MlpParams<Value> c = lift(critic, false, "c");
    return critic_score(c, as_constants(prior), as_constants(future)).item();
}

inline double discriminator_prob_value(const MlpParams<Tensor>& disc, const std::vector<std::vector<double>>& prior,
                                       const std::vector<std::vector<double>>& future) {
    const MlpParams<Value> d = lift(disc, false, "d");
    return discriminator_prob(d, as_constants(prior), as_constants(future)).item();
}

}  // namespace hpgan
