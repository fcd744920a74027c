// SPDX-License-Identifier: Apache-2.0
#pragma once

// Desk-scale training loop: aligned LR/HR patch sampling with flip/rotation
// augmentation, L1 (or MSE) objective, Adam with step decay, periodic
// checkpoints, and CSV logging.  Determinism: iteration i draws all its
// randomness from Rng(mix_seed(seed, i)), so a resumed run replays the exact
// batch sequence of an unbroken one.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dbpn/checkpoint.hpp"
#include "dbpn/image_io.hpp"
#include "dbpn/metrics.hpp"
#include "dbpn/network.hpp"
#include "dbpn/optim.hpp"
#include "dbpn/resample.hpp"

namespace dbpn {

enum class Loss { L1, MSE };

struct TrainConfig {
    std::string data;              // training images (dir, optionally HR/+LR/)
    std::string val;               // optional validation set ("" = none)
    std::string out = "train-out"; // checkpoints + log land here
    std::string preset_name = "dbpn-ss";
    std::string resume;            // checkpoint to continue from ("" = fresh)
    int scale = 4;
    int batch = 16;
    int patch = 40;                // LR patch edge; HR patches are scale x that
    std::int64_t iterations = 2000;
    double lr0 = 1e-4;
    double decay_factor = 10.0;
    std::int64_t decay_interval = 0;    // 0 = constant learning rate
    std::uint64_t seed = 0;
    std::int64_t checkpoint_interval = 0;  // 0 = final checkpoint only
    std::int64_t log_interval = 100;
    Loss loss = Loss::L1;
    bool augment = true;
    bool scale_jitter = false;     // resample HR crops by a random factor
    double jitter_min = 0.5;
    double jitter_max = 1.0;
    int threads = 1;

    void validate() const {
        DBPN_CHECK(!data.empty(), "train config: no dataset path");
        DBPN_CHECK(batch >= 1 && patch >= 1, "train config: batch=", batch,
                   " patch=", patch);
        DBPN_CHECK(iterations >= 0, "train config: negative iteration count");
        DBPN_CHECK(lr0 > 0.0, "train config: learning rate must be positive");
        DBPN_CHECK(decay_interval == 0 || decay_interval <= iterations,
                   "train config: decay interval ", decay_interval,
                   " exceeds total iterations ", iterations, " (use 0 to disable)");
        if (scale_jitter)
            DBPN_CHECK(0.0 < jitter_min && jitter_min <= jitter_max,
                       "train config: jitter range [", jitter_min, ", ", jitter_max, "]");
    }
};

// Key=value assignment shared by config files and CLI flags.  Returns false
// for unknown keys so the caller can report the source line.
inline bool apply_kv(TrainConfig& c, std::string key, const std::string& val) {
    for (auto& ch : key)
        if (ch == '-') ch = '_';
    auto as_i64 = [&] { return static_cast<std::int64_t>(std::stoll(val)); };
    auto as_int = [&] { return std::stoi(val); };
    auto as_f64 = [&] { return std::stod(val); };
    auto as_bool = [&] {
        if (val == "1" || val == "true" || val == "on" || val == "yes") return true;
        if (val == "0" || val == "false" || val == "off" || val == "no") return false;
        throw DimError("config: boolean key '", key, "' got '", val, "'");
    };
    if (key == "data") c.data = val;
    else if (key == "val") c.val = val;
    else if (key == "out") c.out = val;
    else if (key == "preset") c.preset_name = val;
    else if (key == "resume") c.resume = val;
    else if (key == "scale") c.scale = as_int();
    else if (key == "batch") c.batch = as_int();
    else if (key == "patch") c.patch = as_int();
    else if (key == "iterations") c.iterations = as_i64();
    else if (key == "lr") c.lr0 = as_f64();
    else if (key == "decay_factor") c.decay_factor = as_f64();
    else if (key == "decay_interval") c.decay_interval = as_i64();
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(std::stoull(val));
    else if (key == "checkpoint_interval") c.checkpoint_interval = as_i64();
    else if (key == "log_interval") c.log_interval = as_i64();
    else if (key == "loss") {
        if (val == "l1" || val == "L1") c.loss = Loss::L1;
        else if (val == "mse" || val == "MSE") c.loss = Loss::MSE;
        else throw DimError("config: loss must be l1 or mse, got '", val, "'");
    }
    else if (key == "augment") c.augment = as_bool();
    else if (key == "scale_jitter") c.scale_jitter = as_bool();
    else if (key == "jitter_min") c.jitter_min = as_f64();
    else if (key == "jitter_max") c.jitter_max = as_f64();
    else if (key == "threads") c.threads = as_int();
    else return false;
    return true;
}

// Plain-text config: one key=value per line, '#' comments, blank lines ok.
inline void load_config_file(TrainConfig& c, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file '", path, "'");
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(path, ":", lineno, ": expected key=value, got '", line, "'");
        auto trim = [](std::string s) {
            const auto b2 = s.find_first_not_of(" \t");
            if (b2 == std::string::npos) return std::string();
            const auto e2 = s.find_last_not_of(" \t");
            return s.substr(b2, e2 - b2 + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (!apply_kv(c, key, val))
            throw IoError(path, ":", lineno, ": unknown key '", key, "'");
    }
}

inline double lr_schedule(std::int64_t iteration, const TrainConfig& c) {
    DBPN_CHECK(iteration >= 0, "lr_schedule: negative iteration ", iteration);
    if (c.decay_interval <= 0) return c.lr0;
    const auto steps = iteration / c.decay_interval;
    return c.lr0 * std::pow(c.decay_factor, -static_cast<double>(steps));
}

// --- dataset -----------------------------------------------------------

struct SrPair {
    std::string name;
    ImagePlane hr, lr;  // hr dims are exactly scale x lr dims
};

struct Dataset {
    int scale = 1;
    std::vector<SrPair> items;

    int min_lr_dim() const {
        int m = 1 << 30;
        for (const auto& it : items) m = std::min({m, it.lr.h, it.lr.w});
        return m;
    }
};

namespace detail {
inline bool is_image_file(const std::filesystem::path& p) {
    std::string e = p.extension().string();
    for (auto& ch : e) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return e == ".png" || e == ".ppm" || e == ".pgm";
}

inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}
}  // namespace detail

// Loads a training directory.  Two layouts are accepted:
//   dir/HR/*.png + dir/LR/*.png   (aligned pairs by filename, as `prepare` writes)
//   dir/*.png                     (HR only; LR synthesized by degrade())
// Images are converted to luma up front for single-channel networks.
inline Dataset load_dataset(const std::string& root, int scale, ColorMode color) {
    namespace fs = std::filesystem;
    if (!fs::exists(root)) throw IoError("dataset path '", root, "' does not exist");
    fs::path hr_dir = root, lr_dir;
    if (fs::is_directory(fs::path(root) / "HR")) {
        hr_dir = fs::path(root) / "HR";
        if (fs::is_directory(fs::path(root) / "LR")) lr_dir = fs::path(root) / "LR";
    }
    Dataset ds;
    ds.scale = scale;
    for (const auto& p : detail::list_images(hr_dir)) {
        SrPair pair;
        pair.name = p.filename().string();
        ImagePlane hr = crop_to_multiple(load_image(p.string()), scale);
        if (color == ColorMode::Y) hr = to_luma(hr);
        pair.hr = hr;
        if (!lr_dir.empty()) {
            const fs::path lp = lr_dir / p.filename();
            if (!fs::exists(lp))
                throw IoError("dataset: '", pair.name, "' has no LR counterpart in ",
                              lr_dir.string());
            ImagePlane lr = load_image(lp.string());
            if (color == ColorMode::Y) lr = to_luma(lr);
            DBPN_CHECK(lr.h * scale == hr.h && lr.w * scale == hr.w, "dataset: '",
                       pair.name, "' LR is ", lr.h, "x", lr.w, ", HR is ", hr.h, "x",
                       hr.w, ", scale ", scale);
            pair.lr = lr;
        } else {
            pair.lr = degrade(hr, scale);
        }
        ds.items.push_back(std::move(pair));
    }
    if (ds.items.empty()) throw IoError("dataset '", root, "' contains no images");
    return ds;
}

// --- augmentation ------------------------------------------------------

// Quarter-turn counterclockwise.
inline ImagePlane rot90(const ImagePlane& img) {
    ImagePlane out(img.w, img.h, img.c, img.cs);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                out.at(c, img.w - 1 - x, y) = img.at(c, y, x);
    return out;
}

inline ImagePlane flip_horizontal(const ImagePlane& img) {
    ImagePlane out(img.h, img.w, img.c, img.cs);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                out.at(c, y, img.w - 1 - x) = img.at(c, y, x);
    return out;
}

// Apply `quarter_turns` rotations then an optional horizontal flip; the same
// (turns, flip) applied to an aligned LR/HR pair keeps it aligned.
inline ImagePlane orient(ImagePlane img, int quarter_turns, bool flip) {
    for (int k = 0; k < quarter_turns; ++k) img = rot90(img);
    return flip ? flip_horizontal(img) : img;
}

// --- batch sampling ----------------------------------------------------

// Draws `batch` aligned patch pairs.  Per sample the draw order is fixed
// (image, [jitter factor + HR offsets | LR offsets], turns, flip) so a given
// rng state always produces the same batch.
template <class S>
std::pair<Tensor4<S>, Tensor4<S>> sample_batch(const Dataset& ds, const TrainConfig& cfg,
                                               Rng& rng) {
    DBPN_CHECK(!ds.items.empty(), "sample_batch: empty dataset");
    const int s = ds.scale, p = cfg.patch, P = p * s;
    DBPN_CHECK(ds.min_lr_dim() >= p, "sample_batch: smallest image gives ",
               ds.min_lr_dim(), "px LR, need patch ", p,
               " (shrink patch or drop tiny images)");
    const int C = ds.items[0].hr.c;
    Tensor4<S> lrb(cfg.batch, C, p, p), hrb(cfg.batch, C, P, P);
    for (int b = 0; b < cfg.batch; ++b) {
        const auto& item = ds.items[rng.uniform_below(ds.items.size())];
        ImagePlane hp, lp;
        if (cfg.scale_jitter) {
            const double u = cfg.jitter_min + rng.uniform() * (cfg.jitter_max - cfg.jitter_min);
            int q = static_cast<int>(std::lround(P / u));
            q = std::max(P, std::min({q, item.hr.h, item.hr.w}));
            const int hy = static_cast<int>(rng.uniform_below(item.hr.h - q + 1));
            const int hx = static_cast<int>(rng.uniform_below(item.hr.w - q + 1));
            hp = resize_bicubic_to(crop(item.hr, hy, hx, q, q), P, P, q > P);
            lp = resize_bicubic(hp, 1.0 / s, true);
        } else {
            const int ly = static_cast<int>(rng.uniform_below(item.lr.h - p + 1));
            const int lx = static_cast<int>(rng.uniform_below(item.lr.w - p + 1));
            lp = crop(item.lr, ly, lx, p, p);
            hp = crop(item.hr, ly * s, lx * s, P, P);
        }
        int turns = 0;
        bool flip = false;
        if (cfg.augment) {
            turns = static_cast<int>(rng.uniform_below(4));
            flip = rng.uniform_below(2) != 0;
            lp = orient(std::move(lp), turns, flip);
            hp = orient(std::move(hp), turns, flip);
        }
        S* ld = lrb.ptr() + static_cast<std::size_t>(b) * C * p * p;
        S* hd = hrb.ptr() + static_cast<std::size_t>(b) * C * P * P;
        for (std::size_t i = 0; i < lp.v.size(); ++i) ld[i] = static_cast<S>(lp.v[i]);
        for (std::size_t i = 0; i < hp.v.size(); ++i) hd[i] = static_cast<S>(hp.v[i]);
    }
    return {lrb, hrb};
}

// --- logging -----------------------------------------------------------

struct TrainRecord {
    std::int64_t iteration = 0;
    double lr = 0.0;
    double loss = 0.0;
    double val_psnr = 0.0;
    bool has_val = false;
};

struct TrainLog {
    std::vector<TrainRecord> records;

    void append(TrainRecord r) {
        DBPN_CHECK(records.empty() || r.iteration > records.back().iteration,
                   "train log: iteration ", r.iteration, " not after ",
                   records.back().iteration);
        records.push_back(r);
    }

    std::string csv() const {
        std::ostringstream os;
        os << "iteration,lr,loss,val_psnr\n";
        for (const auto& r : records) {
            os << r.iteration << "," << r.lr << "," << r.loss << ",";
            if (r.has_val) os << r.val_psnr;
            os << "\n";
        }
        return os.str();
    }

    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw IoError("cannot write training log '", path, "'");
        os << csv();
    }
};

// Mean Y-channel PSNR of the model over a dataset (same protocol as
// evaluation: luma, boundary crop of `scale` pixels).
template <class S>
double validation_psnr(DbpnNetwork<S>& net, const Dataset& val) {
    DBPN_CHECK(!val.items.empty(), "validation: empty dataset");
    const EvalProtocol proto = EvalProtocol::for_scale(val.scale, true);
    double acc = 0.0;
    for (const auto& item : val.items) {
        ImagePlane sr = infer_image(net, item.lr);
        acc += psnr(sr, item.hr, proto);
    }
    return acc / static_cast<double>(val.items.size());
}

// --- the loop ----------------------------------------------------------

template <class S = float>
std::pair<DbpnNetwork<S>, TrainLog> train(
    const TrainConfig& cfg,
    const std::function<void(const TrainRecord&)>& on_log = {}) {
    namespace fs = std::filesystem;
    cfg.validate();

    DbpnNetwork<S> net;
    AdamState<S> adam;
    std::int64_t start = 0;
    if (!cfg.resume.empty()) {
        LoadedCheckpoint<S> lc = load_checkpoint<S>(cfg.resume);
        net = std::move(lc.net);
        DBPN_CHECK(net.cfg.scale == cfg.scale, "resume: checkpoint is x",
                   net.cfg.scale, " but config asks for x", cfg.scale);
        start = static_cast<std::int64_t>(lc.trained_iterations);
        if (lc.has_optimizer) {
            adam = std::move(lc.opt);
        } else {
            auto ps = parameter_tensors(net);
            adam.reset(ps);
        }
    } else {
        net = build<S>(preset(cfg.preset_name, cfg.scale), cfg.seed);
        auto ps = parameter_tensors(net);
        adam.reset(ps);
    }
    DBPN_CHECK(start <= cfg.iterations, "resume: checkpoint already at iteration ",
               start, ", config stops at ", cfg.iterations);

    Dataset ds = load_dataset(cfg.data, cfg.scale, net.cfg.color);
    DBPN_CHECK(ds.min_lr_dim() >= cfg.patch, "training images too small: need ",
               cfg.patch * cfg.scale, "px HR for patch size ", cfg.patch, " at x",
               cfg.scale, ", smallest gives ", ds.min_lr_dim(), "px LR");
    Dataset val;
    if (!cfg.val.empty()) val = load_dataset(cfg.val, cfg.scale, net.cfg.color);

    fs::create_directories(cfg.out);
    auto params = parameter_tensors(net);
    TrainLog log;
    Tape<S> tape;

    auto checkpoint_path = [&](std::int64_t it) {
        return (fs::path(cfg.out) / msg_cat("ckpt-", it, ".dbpn")).string();
    };

    double last_loss = 0.0;
    for (std::int64_t it = start; it < cfg.iterations; ++it) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(it)));
        auto [lrb, hrb] = sample_batch<S>(ds, cfg, rng);
        const double lr_t = lr_schedule(it, cfg);

        S loss_v;
        {
            TapeScope<S> scope(tape);
            Tensor4<S> out = forward(net, lrb);
            Tensor4<S> loss =
                cfg.loss == Loss::L1 ? l1_loss(out, hrb) : mse_loss(out, hrb);
            loss_v = loss.item();
            if (!std::isfinite(static_cast<double>(loss_v)))
                throw IoError("training diverged: loss ", loss_v, " at iteration ", it,
                              " (lr ", lr_t, ")");
            tape.backward(loss);
        }
        tape.clear();
        adam_step(params, adam, lr_t);
        zero_grads(params);
        last_loss = static_cast<double>(loss_v);

        const std::int64_t done = it + 1;
        if ((cfg.log_interval > 0 && done % cfg.log_interval == 0) ||
            done == cfg.iterations) {
            TrainRecord r;
            r.iteration = done;
            r.lr = lr_t;
            r.loss = last_loss;
            if (!val.items.empty()) {
                r.val_psnr = validation_psnr(net, val);
                r.has_val = true;
            }
            log.append(r);
            if (on_log) on_log(r);
        }
        if (cfg.checkpoint_interval > 0 && done % cfg.checkpoint_interval == 0 &&
            done != cfg.iterations)
            save_checkpoint(checkpoint_path(done), net,
                            static_cast<std::uint64_t>(done), &adam);
    }

    save_checkpoint((fs::path(cfg.out) / "model.dbpn").string(), net,
                    static_cast<std::uint64_t>(cfg.iterations), &adam);
    log.write_csv((fs::path(cfg.out) / "train_log.csv").string());
    return {std::move(net), std::move(log)};
}

}  // namespace dbpn
