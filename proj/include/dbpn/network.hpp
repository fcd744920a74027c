// SPDX-License-Identifier: Apache-2.0
#pragma once

// Network assembly: initial feature extraction (3x3 conv to n0, 1x1 conv to
// nR), alternating up/down projection stages, and reconstruction from the
// channel-concatenation of the collected HR feature maps.  Variants:
//   - plain feed-forward alternation (T up units, T-1 down units)
//   - dense connections: every later unit sees all previous same-resolution
//     outputs through a 1x1 bottleneck
//   - shared-unit recurrence: one up + one down unit iterated k times
//   - multi-stage recurrence: the dense T=7 block iterated, collecting the
//     final up unit's output per iteration
//   - residual: bicubic-upscaled input added to the reconstruction

#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "dbpn/projection.hpp"
#include "dbpn/resample.hpp"

namespace dbpn {

enum class ColorMode { Y, RGB };
enum class RecurrentMode { None, SharedUnit, Transition };

struct NetworkConfig {
    int scale = 4;
    int n0 = 256;
    int nR = 64;
    int T = 7;
    ColorMode color = ColorMode::RGB;
    bool dense = true;
    bool error_feedback = true;
    RecurrentMode recurrent = RecurrentMode::None;
    int iterations = 1;  // recurrence count (SharedUnit / Transition)
    bool residual_skip = false;

    int in_channels() const { return color == ColorMode::Y ? 1 : 3; }

    void validate() const {
        scale_preset(scale);  // throws on bad scale
        DBPN_CHECK(T >= 1, "config: T must be >= 1, got ", T);
        DBPN_CHECK(n0 >= nR && nR >= 1, "config: need n0 >= nR >= 1, got n0=", n0,
                   " nR=", nR);
        if (recurrent != RecurrentMode::None)
            DBPN_CHECK(iterations >= 1, "config: recurrent iterations must be >= 1");
    }
};

// Published configurations.  Scale is a free parameter for every preset;
// the recurrent/multi-stage variants keep their published channel widths.
inline NetworkConfig preset(const std::string& name, int scale) {
    auto lower = [](std::string s) {
        for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        return s;
    };
    const std::string n = lower(name);
    NetworkConfig c;
    c.scale = scale;
    c.recurrent = RecurrentMode::None;
    c.iterations = 1;
    c.residual_skip = false;
    if (n == "dbpn-ss") {
        c.n0 = 64; c.nR = 18; c.T = 2; c.color = ColorMode::Y; c.dense = false;
    } else if (n == "dbpn-s") {
        c.n0 = 128; c.nR = 32; c.T = 2; c.color = ColorMode::Y; c.dense = false;
    } else if (n == "dbpn-m") {
        c.n0 = 128; c.nR = 32; c.T = 4; c.color = ColorMode::Y; c.dense = false;
    } else if (n == "dbpn-l") {
        c.n0 = 128; c.nR = 32; c.T = 6; c.color = ColorMode::Y; c.dense = false;
    } else if (n == "d-dbpn-l") {
        c.n0 = 128; c.nR = 32; c.T = 6; c.color = ColorMode::Y; c.dense = true;
    } else if (n == "d-dbpn") {
        c.n0 = 256; c.nR = 64; c.T = 7; c.color = ColorMode::RGB; c.dense = true;
    } else if (n == "dbpn") {
        c.n0 = 256; c.nR = 64; c.T = 10; c.color = ColorMode::RGB; c.dense = true;
    } else if (n == "dbpn-r64-10" || n == "dbpn-r128-5") {
        c.n0 = 256; c.nR = n == "dbpn-r64-10" ? 64 : 128; c.T = 1;
        c.color = ColorMode::RGB; c.dense = false;
        c.recurrent = RecurrentMode::SharedUnit;
        c.iterations = n == "dbpn-r64-10" ? 10 : 5;
    } else if (n == "dbpn-mr64-3" || n == "dbpn-res-mr64-3") {
        c.n0 = 256; c.nR = 64; c.T = 7; c.color = ColorMode::RGB; c.dense = true;
        c.recurrent = RecurrentMode::Transition;
        c.iterations = 3;
        c.residual_skip = n == "dbpn-res-mr64-3";
    } else {
        throw DimError("unknown preset '" + name +
                       "' (expected one of: dbpn-ss dbpn-s dbpn-m dbpn-l d-dbpn-l "
                       "d-dbpn dbpn dbpn-r64-10 dbpn-r128-5 dbpn-mr64-3 dbpn-res-mr64-3)");
    }
    c.validate();
    return c;
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {
        "dbpn-ss", "dbpn-s", "dbpn-m", "dbpn-l", "d-dbpn-l", "d-dbpn", "dbpn",
        "dbpn-r64-10", "dbpn-r128-5", "dbpn-mr64-3", "dbpn-res-mr64-3"};
    return names;
}

template <class S>
struct DbpnNetwork {
    NetworkConfig cfg;
    ConvParams<S> feat0, feat1;
    Tensor4<S> feat0_slope, feat1_slope;
    std::vector<ProjectionUnit<S>> units;  // see unit_label() for the layout
    ConvParams<S> recon;

    // Number of HR maps the reconstruction concatenates.
    int collected_maps() const {
        return cfg.recurrent == RecurrentMode::None ? cfg.T : cfg.iterations;
    }
};

// Storage layout of `units`:
//   feed-forward / Transition: up1, down1, up2, down2, ..., upT  (2T-1)
//   SharedUnit:                up1, down1                        (shared)
template <class S>
std::string unit_label(const DbpnNetwork<S>& net, std::size_t idx) {
    if (net.cfg.recurrent == RecurrentMode::SharedUnit)
        return idx == 0 ? "up1" : "down1";
    const std::size_t t = idx / 2 + 1;
    return msg_cat(idx % 2 == 0 ? "up" : "down", t);
}

template <class S>
DbpnNetwork<S> build(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    DbpnNetwork<S> net;
    net.cfg = cfg;
    const int in_c = cfg.in_channels();
    const int nR = cfg.nR;

    net.feat0 = make_conv<S>(cfg.n0, in_c, 3, 1, 1);
    he_init(net.feat0, rng);
    net.feat0_slope = make_slopes<S>(cfg.n0);
    net.feat1 = make_conv<S>(nR, cfg.n0, 1, 1, 0);
    he_init(net.feat1, rng);
    net.feat1_slope = make_slopes<S>(nR);

    auto unit = [&](bool up, int bottleneck_in) {
        return make_projection_unit<S>(up, nR, cfg.scale, rng, cfg.error_feedback,
                                       bottleneck_in);
    };
    if (cfg.recurrent == RecurrentMode::SharedUnit) {
        net.units.push_back(unit(true, 0));
        net.units.push_back(unit(false, 0));
    } else {
        // Dense widths: up_t sees [L1..L_{t-1}], down_t sees [H1..Ht]; the
        // first three units in flow order (up1, down1, up2) stay at nR.
        for (int t = 1; t <= cfg.T; ++t) {
            const int up_in = (cfg.dense && t >= 3) ? (t - 1) * nR : 0;
            net.units.push_back(unit(true, up_in));
            if (t < cfg.T) {
                const int down_in = (cfg.dense && t >= 2) ? t * nR : 0;
                net.units.push_back(unit(false, down_in));
            }
        }
    }

    const int rec_in = net.collected_maps() * nR;
    net.recon = cfg.color == ColorMode::Y ? make_conv<S>(1, rec_in, 1, 1, 0)
                                          : make_conv<S>(3, rec_in, 3, 1, 1);
    he_init(net.recon, rng);
    return net;
}

// Bicubic-upscale each (batch, channel) plane of a tensor; used by the
// residual skip.  Not differentiated (the skip carries input data only).
template <class S>
Tensor4<S> upscale_tensor_bicubic(const Tensor4<S>& x, int s) {
    Tensor4<S> y(x.shape.n, x.shape.c, x.shape.h * s, x.shape.w * s);
    for (int n = 0; n < x.shape.n; ++n)
        for (int c = 0; c < x.shape.c; ++c) {
            ImagePlane p(x.shape.h, x.shape.w, 1, Colorspace::Y);
            const S* src = x.ptr() + (static_cast<std::size_t>(n) * x.shape.c + c) *
                                         x.shape.h * x.shape.w;
            for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = static_cast<float>(src[i]);
            ImagePlane up = resize_bicubic(p, s, false);
            S* dst = y.ptr() + (static_cast<std::size_t>(n) * y.shape.c + c) *
                                   y.shape.h * y.shape.w;
            for (std::size_t i = 0; i < up.v.size(); ++i) dst[i] = static_cast<S>(up.v[i]);
        }
    return y;
}

template <class S>
Tensor4<S> forward(DbpnNetwork<S>& net, const Tensor4<S>& lr) {
    const NetworkConfig& cfg = net.cfg;
    DBPN_CHECK(lr.shape.c == cfg.in_channels(), "forward: input has ", lr.shape.c,
               " channels but the network is ",
               cfg.color == ColorMode::Y ? "luminance (1)" : "RGB (3)");
    DBPN_CHECK(lr.shape.h >= 1 && lr.shape.w >= 1, "forward: empty input ",
               to_string(lr.shape));

    Tensor4<S> f0 = prelu(conv2d(lr, net.feat0), net.feat0_slope);
    Tensor4<S> x = prelu(conv2d(f0, net.feat1), net.feat1_slope);

    std::vector<Tensor4<S>> collected;  // HR maps feeding the reconstruction
    if (cfg.recurrent == RecurrentMode::SharedUnit) {
        ProjectionUnit<S>& up = net.units[0];
        ProjectionUnit<S>& down = net.units[1];
        for (int k = 0; k < cfg.iterations; ++k) {
            Tensor4<S> h = up_project(up, x);
            collected.push_back(h);
            if (k + 1 < cfg.iterations) x = down_project(down, h);
        }
    } else {
        const int outer = cfg.recurrent == RecurrentMode::Transition ? cfg.iterations : 1;
        for (int it = 0; it < outer; ++it) {
            std::vector<Tensor4<S>> Hs, Ls;
            for (int t = 1; t <= cfg.T; ++t) {
                ProjectionUnit<S>& up = net.units[2 * (t - 1)];
                // Dense units consume every earlier same-resolution map;
                // plain units only see the most recent one.
                std::vector<Tensor4<S>> up_in =
                    t == 1 ? std::vector<Tensor4<S>>{x}
                           : cfg.dense ? Ls : std::vector<Tensor4<S>>{Ls.back()};
                Tensor4<S> h = dense_project(up, up_in);
                Hs.push_back(h);
                if (t < cfg.T) {
                    ProjectionUnit<S>& down = net.units[2 * t - 1];
                    std::vector<Tensor4<S>> down_in =
                        cfg.dense ? Hs : std::vector<Tensor4<S>>{Hs.back()};
                    Ls.push_back(dense_project(down, down_in));
                }
            }
            if (cfg.recurrent == RecurrentMode::Transition) {
                collected.push_back(Hs.back());
                if (it + 1 < outer) x = Ls.back();  // transition into next pass
            } else {
                collected = std::move(Hs);
            }
        }
    }

    Tensor4<S> cat = collected.size() == 1 ? collected[0] : concat_channels(collected);
    Tensor4<S> out = conv2d(cat, net.recon);  // reconstruction: no activation
    if (cfg.residual_skip)
        out = add(out, upscale_tensor_bicubic(lr, cfg.scale));
    return out;
}

// Whole-image inference: channel adaptation, forward pass, clamp to [0,1].
// A luminance network fed an RGB image upscales its luma and returns a
// single-channel result.
template <class S>
ImagePlane infer_image(DbpnNetwork<S>& net, const ImagePlane& in) {
    ImagePlane src = in;
    if (net.cfg.color == ColorMode::Y && src.c == 3) src = to_luma(src);
    DBPN_CHECK(src.c == net.cfg.in_channels(), "inference: image has ", src.c,
               " channels after conversion, model expects ", net.cfg.in_channels());
    Tensor4<S> x = to_tensor<S>(src);
    Tensor4<S> y = forward(net, x);
    ImagePlane out = from_tensor<S>(y, src.cs);
    out.clamp01();
    return out;
}

// --- parameter bookkeeping ---------------------------------------------

template <class S>
struct NamedParam {
    std::string name;
    Tensor4<S> tensor;
};

template <class S>
std::vector<NamedParam<S>> named_parameters(DbpnNetwork<S>& net) {
    std::vector<NamedParam<S>> out;
    auto conv = [&](const std::string& base, ConvParams<S>& p) {
        out.push_back({base + ".kernel", p.kernel});
        out.push_back({base + ".bias", p.bias});
    };
    auto slope = [&](const std::string& base, Tensor4<S>& s) {
        out.push_back({base + ".slope", s});
    };
    conv("feat0", net.feat0);
    slope("feat0", net.feat0_slope);
    conv("feat1", net.feat1);
    slope("feat1", net.feat1_slope);
    for (std::size_t i = 0; i < net.units.size(); ++i) {
        auto& u = net.units[i];
        const std::string base = unit_label(net, i);
        if (u.bottleneck) {
            conv(base + ".bottleneck", *u.bottleneck);
            slope(base + ".bottleneck", u.bottleneck_slope);
        }
        conv(base + ".l1", u.l1);
        slope(base + ".l1", u.s1);
        if (u.error_feedback) {
            conv(base + ".l2", u.l2);
            slope(base + ".l2", u.s2);
            conv(base + ".l3", u.l3);
            slope(base + ".l3", u.s3);
        }
    }
    conv("recon", net.recon);
    return out;
}

template <class S>
std::vector<Tensor4<S>> parameter_tensors(DbpnNetwork<S>& net) {
    std::vector<Tensor4<S>> out;
    for (auto& np : named_parameters(net)) out.push_back(np.tensor);
    return out;
}

// Total trainable scalars, PReLU slopes included.
template <class S>
std::size_t count_params(DbpnNetwork<S>& net) {
    std::size_t n = 0;
    for (auto& np : named_parameters(net)) n += np.tensor.numel();
    return n;
}

// Slope-only subtotal (the published comparison tables count kernels and
// biases; slopes are reported separately).
template <class S>
std::size_t count_slopes(DbpnNetwork<S>& net) {
    std::size_t n = 0;
    for (auto& np : named_parameters(net))
        if (np.name.size() >= 6 && np.name.compare(np.name.size() - 6, 6, ".slope") == 0)
            n += np.tensor.numel();
    return n;
}

template <class S>
std::string describe(DbpnNetwork<S>& net) {
    const NetworkConfig& c = net.cfg;
    std::ostringstream os;
    os << "scale x" << c.scale << "  color " << (c.color == ColorMode::Y ? "Y" : "RGB")
       << "  T=" << c.T << "  n0=" << c.n0 << "  nR=" << c.nR
       << "  dense=" << (c.dense ? "yes" : "no")
       << "  error-feedback=" << (c.error_feedback ? "on" : "off");
    switch (c.recurrent) {
        case RecurrentMode::None: os << "  mode=feed-forward"; break;
        case RecurrentMode::SharedUnit:
            os << "  mode=recurrent  iterations=" << c.iterations;
            break;
        case RecurrentMode::Transition:
            os << "  mode=multi-stage  iterations=" << c.iterations;
            break;
    }
    if (c.residual_skip) os << "  residual-skip";
    os << "\n";

    std::size_t weighted = 0, bottlenecks = 0, weights = 0;
    auto row = [&](const std::string& name, const char* kind, const ConvParams<S>& p,
                   std::size_t slopes) {
        const Shape4 k = p.kernel.shape;
        const int in_c = kind[0] == 'd' ? k.n : k.c;   // deconv maps dim0 -> dim1
        const int out_c = kind[0] == 'd' ? k.c : k.n;
        os << "  " << name;
        for (std::size_t pad = name.size(); pad < 24; ++pad) os << ' ';
        os << kind << "  " << k.h << "x" << k.w << " s" << p.stride << " p" << p.pad
           << "  " << in_c << "->" << out_c << "  " << p.param_count();
        if (slopes) os << " (+" << slopes << " slopes)";
        os << "\n";
        ++weighted;
        weights += p.param_count();
    };
    row("feat0", "conv  ", net.feat0, net.feat0_slope.numel());
    row("feat1", "conv  ", net.feat1, net.feat1_slope.numel());
    for (std::size_t i = 0; i < net.units.size(); ++i) {
        auto& u = net.units[i];
        const std::string base = unit_label(net, i);
        if (u.bottleneck) {
            row(base + ".bottleneck", "conv  ", *u.bottleneck, u.bottleneck_slope.numel());
            ++bottlenecks;
        }
        const char* k1 = u.up ? "deconv" : "conv  ";
        const char* k2 = u.up ? "conv  " : "deconv";
        row(base + ".l1", k1, u.l1, u.s1.numel());
        if (u.error_feedback) {
            row(base + ".l2", k2, u.l2, u.s2.numel());
            row(base + ".l3", k1, u.l3, u.s3.numel());
        }
    }
    row("recon", "conv  ", net.recon, 0);

    const std::size_t total = count_params(net);
    const std::size_t slopes = count_slopes(net);
    os << "weighted layers: " << weighted;
    if (bottlenecks) os << " (" << bottlenecks << " bottlenecks)";
    os << "\n";
    os << "parameters: " << (total - slopes) << " kernels+biases, " << slopes
       << " prelu slopes, " << total << " total\n";
    (void)weights;
    return os.str();
}

}  // namespace dbpn
