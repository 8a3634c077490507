#pragma once

// Skeleton data model and dataset plumbing: NTU skeleton text ingestion,
// canonical JSON interchange, [-1,1] normalization with center-of-gravity
// subtraction, clip windowing, bone lengths, and a procedural synthetic
// motion generator for desk-scale training.

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hpgan/common.hpp"

namespace hpgan {

struct SkeletonTopology {
    std::size_t joints = 0;
    std::vector<std::pair<std::size_t, std::size_t>> bones;  // (parent, child)
    std::string name;

    // Bones must form a tree over the joints: J-1 edges, no self loops,
    // no cycles (which together with the edge count implies connectivity).
    void validate() const {
        if (joints < 2) throw ParseError("topology: needs at least 2 joints");
        if (bones.empty()) throw ParseError("topology: bone list is empty");
        if (bones.size() != joints - 1)
            throw ParseError(strfmt("topology: %zu bones for %zu joints, expected %zu", bones.size(), joints,
                                    joints - 1));
        std::vector<std::size_t> parent(joints);
        for (std::size_t i = 0; i < joints; ++i) parent[i] = i;
        auto find = [&](std::size_t a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (const auto& [p, c] : bones) {
            if (p >= joints || c >= joints)
                throw ParseError(strfmt("topology: bone (%zu,%zu) out of range for %zu joints", p, c, joints));
            if (p == c) throw ParseError(strfmt("topology: bone (%zu,%zu) connects a joint to itself", p, c));
            const std::size_t rp = find(p), rc = find(c);
            if (rp == rc) throw ParseError(strfmt("topology: bones contain a cycle through joint %zu", c));
            parent[rp] = rc;
        }
    }
};

struct Pose {
    std::vector<std::array<double, 3>> joints;

    std::size_t joint_count() const { return joints.size(); }
};

struct SkeletonSequence {
    SkeletonTopology topology;
    std::vector<Pose> frames;
    int frame_step = 1;  // subsampling stride already applied to frames
    std::string source;

    std::size_t frame_count() const { return frames.size(); }

    void validate() const {
        topology.validate();
        if (frames.empty()) throw ParseError("sequence: needs at least one frame");
        for (std::size_t t = 0; t < frames.size(); ++t)
            if (frames[t].joint_count() != topology.joints)
                throw ParseError(strfmt("sequence: frame %zu has %zu joints, topology has %zu", t,
                                        frames[t].joint_count(), topology.joints));
    }
};

// Affine per-axis map to [-1,1] plus the center of gravity subtracted after
// the map. denormalize() inverts both exactly.
struct NormalizationParams {
    std::array<double, 3> axis_min{-1.0, -1.0, -1.0};
    std::array<double, 3> axis_max{1.0, 1.0, 1.0};
    std::array<double, 3> center_of_gravity{0.0, 0.0, 0.0};

    static NormalizationParams identity() { return {}; }

    void validate() const {
        for (int a = 0; a < 3; ++a)
            if (!(axis_max[a] > axis_min[a]))
                throw NumericError(strfmt("normalization: degenerate bounds on axis %d: [%g, %g]", a, axis_min[a],
                                          axis_max[a]));
    }
};

struct TrainingSample {
    std::vector<Pose> prior;
    std::vector<Pose> future;
    NormalizationParams normalization;
};

// ---- built-in topologies ----

// Kinect v2 25-joint body, bones as (parent, child) pairs rooted at the
// spine base.
inline SkeletonTopology ntu_topology() {
    SkeletonTopology t;
    t.joints = 25;
    t.name = "ntu-kinect-v2";
    t.bones = {{0, 1},   {1, 20},  {20, 2},  {2, 3},   {20, 4},  {4, 5},   {5, 6},   {6, 7},
               {20, 8},  {8, 9},   {9, 10},  {10, 11}, {0, 12},  {12, 13}, {13, 14}, {14, 15},
               {0, 16},  {16, 17}, {17, 18}, {18, 19}, {7, 21},  {7, 22},  {11, 23}, {11, 24}};
    return t;
}

// Simple kinematic chain of k joints.
inline SkeletonTopology chain_topology(std::size_t k) {
    if (k < 2) throw ConfigError("chain topology: needs at least 2 joints");
    SkeletonTopology t;
    t.joints = k;
    t.name = strfmt("chain-%zu", k);
    for (std::size_t i = 1; i < k; ++i) t.bones.emplace_back(i - 1, i);
    return t;
}

// Kinect v2 frustum extents at its 5 m maximum depth (70x60 degree field of
// view): x in [-3.50, 3.50], y in [-2.89, 2.89], z in [0, 5].
inline NormalizationParams ntu_bounds() {
    NormalizationParams p;
    p.axis_min = {-3.50, -2.89, 0.0};
    p.axis_max = {3.50, 2.89, 5.0};
    return p;
}

// ---- NTU skeleton text format ----

namespace detail {

class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    // next non-empty line; returns false at end of input
    bool next(std::vector<std::string_view>& fields) {
        while (pos_ < text_.size()) {
            std::size_t end = text_.find('\n', pos_);
            if (end == std::string_view::npos) end = text_.size();
            std::string_view line = text_.substr(pos_, end - pos_);
            pos_ = end + 1;
            ++line_no_;
            fields.clear();
            std::size_t i = 0;
            while (i < line.size()) {
                while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
                std::size_t start = i;
                while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
                if (i > start) fields.push_back(line.substr(start, i - start));
            }
            if (!fields.empty()) return true;
        }
        return false;
    }

    int line_no() const { return line_no_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_no_ = 0;
};

inline double parse_number(std::string_view tok, int line_no, const char* what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(strfmt("line %d: %s '%.*s' is not a number", line_no, what, (int)tok.size(), tok.data()));
    return v;
}

inline long parse_count(std::string_view tok, int line_no, const char* what) {
    const double v = parse_number(tok, line_no, what);
    if (v < 0 || v != std::floor(v))
        throw ParseError(strfmt("line %d: %s '%.*s' is not a non-negative integer", line_no, what, (int)tok.size(),
                                tok.data()));
    return static_cast<long>(v);
}

}  // namespace detail

// Parses the NTU skeleton text layout: line 1 is the frame count; per frame
// a body count; per body a 10-field body-info line (first field is the body
// id), a joint-count line, then one 12-field line per joint whose first
// three fields are x y z in meters. Returns one sequence per contiguous run
// of each tracked body; a body that disappears mid-clip truncates its run.
inline std::vector<SkeletonSequence> parse_ntu_skeleton(const std::string& text,
                                                        const SkeletonTopology& topology = ntu_topology()) {
    detail::LineReader rd(text);
    std::vector<std::string_view> f;

    auto need_line = [&](std::size_t nfields, const char* what) {
        if (!rd.next(f)) throw ParseError(strfmt("line %d: truncated file, expected %s", rd.line_no() + 1, what));
        if (f.size() != nfields)
            throw ParseError(strfmt("line %d: expected %zu fields for %s, got %zu", rd.line_no(), nfields, what,
                                    f.size()));
    };

    need_line(1, "frame count");
    const long frame_count = detail::parse_count(f[0], rd.line_no(), "frame count");

    std::vector<SkeletonSequence> out;
    std::map<std::string, std::size_t> open_runs;  // body id -> index into out

    for (long frame = 0; frame < frame_count; ++frame) {
        need_line(1, "body count");
        const long body_count = detail::parse_count(f[0], rd.line_no(), "body count");
        std::map<std::string, std::size_t> seen;
        for (long b = 0; b < body_count; ++b) {
            need_line(10, "body info");
            const std::string body_id(f[0]);
            for (std::size_t i = 0; i < 10; ++i) detail::parse_number(f[i], rd.line_no(), "body info field");
            need_line(1, "joint count");
            const long joint_count = detail::parse_count(f[0], rd.line_no(), "joint count");
            if (joint_count != static_cast<long>(topology.joints))
                throw ParseError(strfmt("line %d: joint count %ld does not match topology (%zu joints)", rd.line_no(),
                                        joint_count, topology.joints));
            Pose pose;
            pose.joints.reserve(topology.joints);
            for (long j = 0; j < joint_count; ++j) {
                need_line(12, "joint");
                std::array<double, 3> xyz{};
                for (int a = 0; a < 3; ++a) xyz[a] = detail::parse_number(f[a], rd.line_no(), "joint coordinate");
                for (std::size_t i = 3; i < 12; ++i) detail::parse_number(f[i], rd.line_no(), "joint field");
                pose.joints.push_back(xyz);
            }
            auto run = open_runs.find(body_id);
            if (run == open_runs.end()) {
                SkeletonSequence seq;
                seq.topology = topology;
                seq.source = strfmt("ntu-body-%s", body_id.c_str());
                out.push_back(std::move(seq));
                run = open_runs.emplace(body_id, out.size() - 1).first;
            }
            out[run->second].frames.push_back(std::move(pose));
            seen.emplace(body_id, run->second);
        }
        // bodies that vanished this frame end their run
        for (auto it = open_runs.begin(); it != open_runs.end();)
            it = seen.count(it->first) ? std::next(it) : open_runs.erase(it);
    }
    return out;
}

// ---- canonical JSON interchange ----
//
// {"topology": {"joints": J, "bones": [[p,c],...], "name": s},
//  "frame_step": k, "frames": [[[x,y,z] x J] x T]}

inline SkeletonSequence parse_canonical_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(strfmt("canonical json: %s", e.what()));
    }
    try {
        SkeletonSequence seq;
        const auto& topo = doc.at("topology");
        seq.topology.joints = topo.at("joints").get<std::size_t>();
        seq.topology.name = topo.at("name").get<std::string>();
        for (const auto& bone : topo.at("bones")) {
            if (!bone.is_array() || bone.size() != 2) throw ParseError("canonical json: bone must be a [parent,child] pair");
            seq.topology.bones.emplace_back(bone[0].get<std::size_t>(), bone[1].get<std::size_t>());
        }
        seq.frame_step = doc.at("frame_step").get<int>();
        for (const auto& frame : doc.at("frames")) {
            Pose pose;
            for (const auto& joint : frame) {
                if (!joint.is_array() || joint.size() != 3)
                    throw ParseError("canonical json: joint must be an [x,y,z] triple");
                pose.joints.push_back({joint[0].get<double>(), joint[1].get<double>(), joint[2].get<double>()});
            }
            if (pose.joint_count() != seq.topology.joints)
                throw ParseError(strfmt("canonical json: ragged frame with %zu joints, topology has %zu",
                                        pose.joint_count(), seq.topology.joints));
            seq.frames.push_back(std::move(pose));
        }
        seq.validate();
        return seq;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(strfmt("canonical json: %s", e.what()));
    }
}

inline std::string serialize_canonical_json(const SkeletonSequence& seq) {
    nlohmann::json topo;
    topo["joints"] = seq.topology.joints;
    topo["name"] = seq.topology.name;
    auto bones = nlohmann::json::array();
    for (const auto& [p, c] : seq.topology.bones) bones.push_back({p, c});
    topo["bones"] = std::move(bones);

    auto frames = nlohmann::json::array();
    for (const Pose& pose : seq.frames) {
        auto frame = nlohmann::json::array();
        for (const auto& j : pose.joints) frame.push_back({j[0], j[1], j[2]});
        frames.push_back(std::move(frame));
    }
    nlohmann::json doc;
    doc["topology"] = std::move(topo);
    doc["frame_step"] = seq.frame_step;
    doc["frames"] = std::move(frames);
    return doc.dump();
}

// ---- normalization ----

inline Pose normalize_pose(const Pose& pose, const NormalizationParams& p) {
    Pose out = pose;
    for (auto& j : out.joints)
        for (int a = 0; a < 3; ++a)
            j[a] = 2.0 * (j[a] - p.axis_min[a]) / (p.axis_max[a] - p.axis_min[a]) - 1.0 - p.center_of_gravity[a];
    return out;
}

inline Pose denormalize_pose(const Pose& pose, const NormalizationParams& p) {
    Pose out = pose;
    for (auto& j : out.joints)
        for (int a = 0; a < 3; ++a)
            j[a] = (j[a] + p.center_of_gravity[a] + 1.0) * 0.5 * (p.axis_max[a] - p.axis_min[a]) + p.axis_min[a];
    return out;
}

inline SkeletonSequence normalize(const SkeletonSequence& seq, const NormalizationParams& p) {
    p.validate();
    SkeletonSequence out = seq;
    for (Pose& pose : out.frames) pose = normalize_pose(pose, p);
    return out;
}

inline SkeletonSequence denormalize(const SkeletonSequence& seq, const NormalizationParams& p) {
    p.validate();
    SkeletonSequence out = seq;
    for (Pose& pose : out.frames) pose = denormalize_pose(pose, p);
    return out;
}

// Center of gravity of the first prior_count frames, measured after the
// affine map. Only observed frames contribute, so inference sees no future
// information.
inline NormalizationParams with_center_of_gravity(const std::vector<Pose>& frames, std::size_t prior_count,
                                                  NormalizationParams p) {
    p.validate();
    if (prior_count == 0 || prior_count > frames.size())
        throw NumericError(strfmt("center of gravity: prior count %zu out of range for %zu frames", prior_count,
                                  frames.size()));
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    std::size_t n = 0;
    for (std::size_t t = 0; t < prior_count; ++t)
        for (const auto& j : frames[t].joints) {
            for (int a = 0; a < 3; ++a)
                sum[a] += 2.0 * (j[a] - p.axis_min[a]) / (p.axis_max[a] - p.axis_min[a]) - 1.0;
            ++n;
        }
    for (int a = 0; a < 3; ++a) p.center_of_gravity[a] = sum[a] / static_cast<double>(n);
    return p;
}

// Per-axis min/max over a set of sequences, then widened so every axis
// shares the global minimum and maximum ("H3.6M-style" shared bounds).
inline NormalizationParams data_bounds(const std::vector<SkeletonSequence>& seqs, bool share_across_axes = true) {
    if (seqs.empty()) throw ConfigError("data bounds: no sequences");
    std::array<double, 3> lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& seq : seqs)
        for (const Pose& pose : seq.frames)
            for (const auto& j : pose.joints)
                for (int a = 0; a < 3; ++a) {
                    lo[a] = std::min(lo[a], j[a]);
                    hi[a] = std::max(hi[a], j[a]);
                }
    NormalizationParams p;
    if (share_across_axes) {
        const double glo = std::min({lo[0], lo[1], lo[2]});
        const double ghi = std::max({hi[0], hi[1], hi[2]});
        p.axis_min = {glo, glo, glo};
        p.axis_max = {ghi, ghi, ghi};
    } else {
        p.axis_min = lo;
        p.axis_max = hi;
    }
    p.validate();
    return p;
}

// ---- windowing ----

// Subsample by frame_step, then slide a window of m+n frames with the given
// stride. Prior = first m frames of the window, future = last n. Sequences
// too short after subsampling yield an empty list.
inline std::vector<TrainingSample> window_samples(const SkeletonSequence& seq, std::size_t m, std::size_t n,
                                                  std::size_t stride, std::size_t frame_step) {
    if (m < 1 || n < 1 || stride < 1 || frame_step < 1)
        throw ConfigError("window_samples: m, n, stride and frame_step must all be at least 1");
    std::vector<const Pose*> sub;
    for (std::size_t t = 0; t < seq.frames.size(); t += frame_step) sub.push_back(&seq.frames[t]);
    std::vector<TrainingSample> out;
    if (sub.size() < m + n) return out;
    for (std::size_t s = 0; s + m + n <= sub.size(); s += stride) {
        TrainingSample sample;
        sample.prior.reserve(m);
        sample.future.reserve(n);
        for (std::size_t t = 0; t < m; ++t) sample.prior.push_back(*sub[s + t]);
        for (std::size_t t = 0; t < n; ++t) sample.future.push_back(*sub[s + m + t]);
        sample.normalization = NormalizationParams::identity();
        out.push_back(std::move(sample));
    }
    return out;
}

// Full ingestion pipeline: window the raw sequence, then normalize each
// sample with the shared affine bounds and its own prior-frame center of
// gravity.
inline std::vector<TrainingSample> prepare_samples(const SkeletonSequence& seq, std::size_t m, std::size_t n,
                                                   std::size_t stride, std::size_t frame_step,
                                                   const NormalizationParams& bounds) {
    std::vector<TrainingSample> samples = window_samples(seq, m, n, stride, frame_step);
    for (TrainingSample& s : samples) {
        std::vector<Pose> all = s.prior;
        all.insert(all.end(), s.future.begin(), s.future.end());
        const NormalizationParams p = with_center_of_gravity(all, s.prior.size(), bounds);
        for (Pose& pose : s.prior) pose = normalize_pose(pose, p);
        for (Pose& pose : s.future) pose = normalize_pose(pose, p);
        s.normalization = p;
    }
    return samples;
}

// ---- bone lengths ----

inline std::vector<double> bone_lengths(const Pose& pose, const SkeletonTopology& topology) {
    if (pose.joint_count() != topology.joints)
        throw ShapeError(strfmt("bone_lengths: pose has %zu joints, topology has %zu", pose.joint_count(),
                                topology.joints));
    std::vector<double> out;
    out.reserve(topology.bones.size());
    for (const auto& [p, c] : topology.bones) {
        const auto& a = pose.joints[p];
        const auto& b = pose.joints[c];
        const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
        out.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    return out;
}

// ---- synthetic motion ----

struct SynthConfig {
    std::size_t sequences = 200;
    std::size_t frames = 40;
    std::size_t topology_size = 5;
    std::uint64_t seed = 0;
};

// Deterministic kinematic chains: the root follows a slow sinusoidal
// trajectory, each child orbits its parent at fixed bone length with
// per-sequence random frequency, phase and amplitude. Bone lengths are
// constant across frames by construction.
inline std::vector<SkeletonSequence> synth_generate(const SynthConfig& cfg) {
    const SkeletonTopology topo = chain_topology(cfg.topology_size);
    Rng rng(cfg.seed);
    const double two_pi = 6.283185307179586476925286766559;
    std::vector<SkeletonSequence> out;
    out.reserve(cfg.sequences);
    for (std::size_t s = 0; s < cfg.sequences; ++s) {
        struct JointOrbit {
            double bone_len;
            double theta0, theta_amp, theta_freq, theta_phase;
            double psi0, psi_amp, psi_freq, psi_phase;
        };
        const double root_ax = rng.uniform(0.2, 0.5), root_fx = rng.uniform(0.5, 1.5), root_px = rng.uniform(0, two_pi);
        const double root_ay = rng.uniform(0.2, 0.5), root_fy = rng.uniform(0.5, 1.5), root_py = rng.uniform(0, two_pi);
        const double root_az = rng.uniform(0.1, 0.3), root_fz = rng.uniform(0.5, 1.5), root_pz = rng.uniform(0, two_pi);
        std::vector<JointOrbit> orbits;
        for (std::size_t j = 1; j < cfg.topology_size; ++j) {
            JointOrbit o;
            o.bone_len = rng.uniform(0.2, 0.4);
            o.theta0 = rng.uniform(0.6, 2.5);
            o.theta_amp = rng.uniform(0.2, 0.6);
            o.theta_freq = rng.uniform(0.5, 2.0);
            o.theta_phase = rng.uniform(0, two_pi);
            o.psi0 = rng.uniform(0, two_pi);
            o.psi_amp = rng.uniform(0.2, 0.6);
            o.psi_freq = rng.uniform(0.5, 2.0);
            o.psi_phase = rng.uniform(0, two_pi);
            orbits.push_back(o);
        }
        SkeletonSequence seq;
        seq.topology = topo;
        seq.source = strfmt("synth-%zu", s);
        for (std::size_t t = 0; t < cfg.frames; ++t) {
            const double u = static_cast<double>(t) / static_cast<double>(cfg.frames);
            Pose pose;
            pose.joints.resize(cfg.topology_size);
            pose.joints[0] = {root_ax * std::sin(two_pi * root_fx * u + root_px),
                              root_ay * std::sin(two_pi * root_fy * u + root_py),
                              2.5 + root_az * std::sin(two_pi * root_fz * u + root_pz)};
            for (std::size_t j = 1; j < cfg.topology_size; ++j) {
                const JointOrbit& o = orbits[j - 1];
                const double theta = o.theta0 + o.theta_amp * std::sin(two_pi * o.theta_freq * u + o.theta_phase);
                const double psi = o.psi0 + o.psi_amp * std::sin(two_pi * o.psi_freq * u + o.psi_phase);
                const auto& parent = pose.joints[j - 1];
                pose.joints[j] = {parent[0] + o.bone_len * std::sin(theta) * std::cos(psi),
                                  parent[1] + o.bone_len * std::sin(theta) * std::sin(psi),
                                  parent[2] + o.bone_len * std::cos(theta)};
            }
            seq.frames.push_back(std::move(pose));
        }
        out.push_back(std::move(seq));
    }
    return out;
}

// ---- flattening helpers shared with the networks ----

inline std::vector<double> pose_flat(const Pose& pose) {
    std::vector<double> v;
    v.reserve(pose.joint_count() * 3);
    for (const auto& j : pose.joints) {
        v.push_back(j[0]);
        v.push_back(j[1]);
        v.push_back(j[2]);
    }
    return v;
}

inline Pose pose_from_flat(const std::vector<double>& v) {
    if (v.size() % 3 != 0) throw ShapeError(strfmt("pose: %zu values is not a multiple of 3", v.size()));
    Pose pose;
    pose.joints.reserve(v.size() / 3);
    for (std::size_t i = 0; i < v.size(); i += 3) pose.joints.push_back({v[i], v[i + 1], v[i + 2]});
    return pose;
}

}  // namespace hpgan
