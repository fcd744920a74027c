// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary model checkpoints.  Layout (little-endian, fixed-width):
//
//   "DBPN"            4-byte magic
//   u32 version       currently 1
//   u32 x10           scale, n0, nR, T, input channels, dense, error_feedback,
//                     recurrent mode (0 none / 1 shared / 2 multi-stage),
//                     iterations, residual_skip
//   u64               trained iterations
//   u32 has_optimizer
//   [if set] u64 t, f64 beta1, f64 beta2, f64 eps
//   u32 num_blocks
//   blocks:           u32 name_len, name bytes, u32 rank, u32 dims[rank],
//                     f32 values (row-major)
//
// Parameter blocks are named after named_parameters(); optimizer moments are
// stored as "adam.m:<name>" / "adam.v:<name>".  Values are stored as f32, so
// a float-precision training run resumes bit-exactly.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dbpn/network.hpp"
#include "dbpn/optim.hpp"

namespace dbpn {

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw IoError("checkpoint: truncated file");
    return v;
}
inline std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw IoError("checkpoint: truncated file");
    return v;
}
inline double get_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw IoError("checkpoint: truncated file");
    return v;
}

inline void put_block_f32(std::ostream& os, const std::string& name,
                          const std::vector<std::uint32_t>& dims,
                          const float* data, std::size_t n) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) put_u32(os, d);
    os.write(reinterpret_cast<const char*>(data),
             static_cast<std::streamsize>(n * sizeof(float)));
}

struct RawBlock {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

inline RawBlock get_block(std::istream& is) {
    RawBlock b;
    const std::uint32_t len = get_u32(is);
    if (len > 4096) throw IoError("checkpoint: implausible block name length ", len);
    b.name.resize(len);
    is.read(b.name.data(), len);
    const std::uint32_t rank = get_u32(is);
    if (rank > 8) throw IoError("checkpoint: implausible block rank ", rank);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        b.dims.push_back(get_u32(is));
        n *= b.dims.back();
    }
    b.data.resize(n);
    is.read(reinterpret_cast<char*>(b.data.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!is) throw IoError("checkpoint: truncated block '", b.name, "'");
    return b;
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class S>
void save_checkpoint(const std::string& path, DbpnNetwork<S>& net,
                     std::uint64_t trained_iterations,
                     const AdamState<S>* opt = nullptr) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '", path, "' for writing");
    os.write("DBPN", 4);
    detail::put_u32(os, kCheckpointVersion);
    const NetworkConfig& c = net.cfg;
    detail::put_u32(os, static_cast<std::uint32_t>(c.scale));
    detail::put_u32(os, static_cast<std::uint32_t>(c.n0));
    detail::put_u32(os, static_cast<std::uint32_t>(c.nR));
    detail::put_u32(os, static_cast<std::uint32_t>(c.T));
    detail::put_u32(os, static_cast<std::uint32_t>(c.in_channels()));
    detail::put_u32(os, c.dense ? 1 : 0);
    detail::put_u32(os, c.error_feedback ? 1 : 0);
    detail::put_u32(os, static_cast<std::uint32_t>(c.recurrent));
    detail::put_u32(os, static_cast<std::uint32_t>(c.iterations));
    detail::put_u32(os, c.residual_skip ? 1 : 0);
    detail::put_u64(os, trained_iterations);
    detail::put_u32(os, opt ? 1 : 0);
    if (opt) {
        detail::put_u64(os, static_cast<std::uint64_t>(opt->t));
        detail::put_f64(os, opt->beta1);
        detail::put_f64(os, opt->beta2);
        detail::put_f64(os, opt->eps);
    }

    auto params = named_parameters(net);
    std::uint32_t blocks = static_cast<std::uint32_t>(params.size());
    if (opt) blocks *= 3;  // tensor + m + v
    detail::put_u32(os, blocks);

    std::vector<float> scratch;
    auto write_values = [&](const std::string& name,
                            const std::vector<std::uint32_t>& dims, const S* src,
                            std::size_t n) {
        scratch.resize(n);
        for (std::size_t i = 0; i < n; ++i) scratch[i] = static_cast<float>(src[i]);
        detail::put_block_f32(os, name, dims, scratch.data(), n);
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Shape4 s = params[i].tensor.shape;
        const std::vector<std::uint32_t> dims = {
            static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
            static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
        write_values(params[i].name, dims, params[i].tensor.ptr(), s.numel());
        if (opt) {
            DBPN_CHECK(opt->m.size() == params.size() && opt->v.size() == params.size(),
                       "optimizer state holds ", opt->m.size(), " slots for ",
                       params.size(), " parameters");
            const std::vector<std::uint32_t> flat = {
                static_cast<std::uint32_t>(opt->m[i].size())};
            write_values("adam.m:" + params[i].name, flat, opt->m[i].data(),
                         opt->m[i].size());
            write_values("adam.v:" + params[i].name, flat, opt->v[i].data(),
                         opt->v[i].size());
        }
    }
    os.flush();
    if (!os) throw IoError("failed while writing '", path, "'");
}

template <class S>
struct LoadedCheckpoint {
    DbpnNetwork<S> net;
    std::uint64_t trained_iterations = 0;
    bool has_optimizer = false;
    AdamState<S> opt;
};

template <class S>
LoadedCheckpoint<S> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '", path, "'");
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DBPN", 4) != 0)
        throw IoError("'", path, "' is not a model checkpoint (bad magic)");
    const std::uint32_t version = detail::get_u32(is);
    if (version != kCheckpointVersion)
        throw IoError("checkpoint version ", version, " not supported (expected ",
                      kCheckpointVersion, ")");

    NetworkConfig c;
    c.scale = static_cast<int>(detail::get_u32(is));
    c.n0 = static_cast<int>(detail::get_u32(is));
    c.nR = static_cast<int>(detail::get_u32(is));
    c.T = static_cast<int>(detail::get_u32(is));
    const std::uint32_t in_c = detail::get_u32(is);
    if (in_c != 1 && in_c != 3)
        throw IoError("checkpoint: unsupported channel count ", in_c);
    c.color = in_c == 1 ? ColorMode::Y : ColorMode::RGB;
    c.dense = detail::get_u32(is) != 0;
    c.error_feedback = detail::get_u32(is) != 0;
    const std::uint32_t rec = detail::get_u32(is);
    if (rec > 2) throw IoError("checkpoint: unknown recurrence tag ", rec);
    c.recurrent = static_cast<RecurrentMode>(rec);
    c.iterations = static_cast<int>(detail::get_u32(is));
    c.residual_skip = detail::get_u32(is) != 0;
    c.validate();

    LoadedCheckpoint<S> out;
    out.trained_iterations = detail::get_u64(is);
    out.has_optimizer = detail::get_u32(is) != 0;
    std::uint64_t adam_t = 0;
    double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (out.has_optimizer) {
        adam_t = detail::get_u64(is);
        b1 = detail::get_f64(is);
        b2 = detail::get_f64(is);
        eps = detail::get_f64(is);
    }

    out.net = build<S>(c, /*seed=*/0);  // values are overwritten below
    auto params = named_parameters(out.net);
    if (out.has_optimizer) {
        out.opt.reset(parameter_tensors(out.net));
        out.opt.t = static_cast<std::int64_t>(adam_t);
        out.opt.beta1 = b1;
        out.opt.beta2 = b2;
        out.opt.eps = eps;
    }

    const std::uint32_t blocks = detail::get_u32(is);
    std::size_t filled = 0;
    for (std::uint32_t bi = 0; bi < blocks; ++bi) {
        detail::RawBlock b = detail::get_block(is);
        std::string target = b.name;
        int moment = 0;  // 0 = tensor, 1 = adam.m, 2 = adam.v
        if (target.rfind("adam.m:", 0) == 0) { moment = 1; target = target.substr(7); }
        else if (target.rfind("adam.v:", 0) == 0) { moment = 2; target = target.substr(7); }
        std::size_t idx = params.size();
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params[i].name == target) { idx = i; break; }
        if (idx == params.size())
            throw IoError("checkpoint: unknown parameter block '", b.name, "'");
        if (moment == 0) {
            const Shape4 s = params[idx].tensor.shape;
            if (b.dims.size() != 4 || b.data.size() != s.numel())
                throw IoError("checkpoint: block '", b.name, "' has ", b.data.size(),
                              " values, model expects ", s.numel());
            S* dst = params[idx].tensor.ptr();
            for (std::size_t i = 0; i < b.data.size(); ++i)
                dst[i] = static_cast<S>(b.data[i]);
            ++filled;
        } else {
            if (!out.has_optimizer)
                throw IoError("checkpoint: optimizer block '", b.name,
                              "' in a file with no optimizer header");
            auto& slot = moment == 1 ? out.opt.m[idx] : out.opt.v[idx];
            if (b.data.size() != slot.size())
                throw IoError("checkpoint: moment block '", b.name, "' size mismatch");
            for (std::size_t i = 0; i < b.data.size(); ++i)
                slot[i] = static_cast<S>(b.data[i]);
        }
    }
    if (filled != params.size())
        throw IoError("checkpoint: ", filled, " of ", params.size(),
                      " parameter tensors present");
    return out;
}

}  // namespace dbpn
