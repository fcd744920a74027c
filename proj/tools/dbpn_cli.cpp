// SPDX-License-Identifier: Apache-2.0
//
// dbpn: super-resolution toolkit binary.  Subcommands:
//   prepare    degrade an HR image folder into aligned LR/HR training pairs
//   train      fit a network on a prepared (or plain) image folder
//   upscale    run a trained model (or classical back-projection) on an image
//   ibp        classical iterative back-projection with residual trace
//   evaluate   PSNR/SSIM of SR results against ground truth
//   params     layer census and parameter totals for a preset
//   gradcheck  finite-difference validation of the analytic gradients

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dbpn/dbpn.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_prepare(const std::string& hr_dir, int scale, const std::string& out_dir) {
    if (!fs::is_directory(hr_dir))
        throw dbpn::IoError("--hr: '", hr_dir, "' is not a directory");
    fs::create_directories(fs::path(out_dir) / "HR");
    fs::create_directories(fs::path(out_dir) / "LR");
    std::size_t written = 0;
    for (const auto& p : dbpn::detail::list_images(hr_dir)) {
        try {
            dbpn::ImagePlane hr = dbpn::crop_to_multiple(dbpn::load_image(p.string()), scale);
            dbpn::ImagePlane lr = dbpn::degrade(hr, scale);
            dbpn::save_image(hr, (fs::path(out_dir) / "HR" / p.filename()).string());
            dbpn::save_image(lr, (fs::path(out_dir) / "LR" / p.filename()).string());
            ++written;
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping " << p.filename().string() << ": " << e.what()
                      << "\n";
        }
    }
    if (written == 0) throw dbpn::IoError("no usable images in '", hr_dir, "'");
    std::cout << "wrote " << written << " LR/HR pair" << (written == 1 ? "" : "s")
              << " to " << out_dir << " (scale x" << scale << ")\n";
    return 0;
}

int cmd_train(const dbpn::TrainConfig& cfg) {
    auto [net, log] = dbpn::train<float>(cfg, [](const dbpn::TrainRecord& r) {
        std::cout << "iter " << r.iteration << "  lr " << r.lr << "  loss " << r.loss;
        if (r.has_val) std::cout << "  val_psnr " << r.val_psnr;
        std::cout << "\n" << std::flush;
    });
    std::cout << "done: " << cfg.iterations << " iterations, model in " << cfg.out
              << "/model.dbpn\n";
    if (!log.records.empty())
        std::cout << "final loss " << log.records.back().loss << "\n";
    return 0;
}

int cmd_upscale(const std::string& model, const std::string& in,
                const std::string& out, int scale) {
    const dbpn::ImagePlane img = dbpn::load_image(in);
    const auto t0 = std::chrono::steady_clock::now();
    dbpn::ImagePlane sr;
    if (!model.empty()) {
        auto lc = dbpn::load_checkpoint<float>(model);
        if (lc.net.cfg.color == dbpn::ColorMode::Y && img.c == 3)
            std::cout << "note: luminance model; output will be single-channel\n";
        sr = dbpn::infer_image(lc.net, img);
    } else if (scale > 0) {
        sr = dbpn::ibp_run(img, dbpn::make_ibp_config(scale)).sr;
    } else {
        throw dbpn::IoError("upscale needs --model, or --scale for the classical fallback");
    }
    const auto t1 = std::chrono::steady_clock::now();
    dbpn::save_image(sr, out);
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    std::cout << out << ": " << sr.w << "x" << sr.h << " (" << sr.c << " channel"
              << (sr.c == 1 ? "" : "s") << "), " << ms << " ms\n";
    return 0;
}

int cmd_ibp(const std::string& in, const std::string& out, int scale, int iters,
            double sigma, double tolerance, const std::string& trace_path) {
    const dbpn::ImagePlane lr = dbpn::load_image(in);
    dbpn::IbpConfig cfg = dbpn::make_ibp_config(scale, sigma, iters, tolerance);
    dbpn::IbpResult res = dbpn::ibp_run(lr, cfg);
    dbpn::save_image(res.sr, out);
    if (!trace_path.empty()) {
        std::ofstream ts(trace_path);
        if (!ts) throw dbpn::IoError("cannot write trace '", trace_path, "'");
        ts << "iteration,residual_l2\n";
        for (std::size_t i = 0; i < res.trace.size(); ++i)
            ts << (i + 1) << "," << res.trace[i] << "\n";
    }
    std::cout << out << ": " << res.sr.w << "x" << res.sr.h << ", "
              << res.trace.size() << " iterations, final residual "
              << (res.trace.empty() ? 0.0 : res.trace.back()) << "\n";
    return 0;
}

struct EvalRow {
    std::string name;
    double psnr_db = 0.0, ssim_v = 0.0;
};

std::string fmt_db(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

int cmd_evaluate(const std::string& sr_path, const std::string& gt_path, int crop,
                 bool rgb, const std::string& csv_path) {
    std::vector<std::pair<std::string, std::pair<std::string, std::string>>> pairs;
    if (fs::is_directory(sr_path) != fs::is_directory(gt_path))
        throw dbpn::IoError("--sr and --gt must both be files or both directories");
    if (fs::is_directory(sr_path)) {
        auto gts = dbpn::detail::list_images(gt_path);
        std::size_t missing = 0;
        for (const auto& sp : dbpn::detail::list_images(sr_path)) {
            const fs::path gp = fs::path(gt_path) / sp.filename();
            bool found = false;
            for (const auto& g : gts) found = found || g.filename() == sp.filename();
            if (!found) {
                std::cerr << "warning: no ground truth for " << sp.filename().string()
                          << ", excluded\n";
                ++missing;
                continue;
            }
            pairs.push_back({sp.filename().string(), {sp.string(), gp.string()}});
        }
        if (pairs.empty())
            throw dbpn::IoError("no filename matches between '", sr_path, "' and '",
                                gt_path, "' (", missing, " unmatched)");
    } else {
        pairs.push_back({fs::path(sr_path).filename().string(), {sr_path, gt_path}});
    }

    const dbpn::EvalProtocol proto{crop, !rgb, 1.0};
    std::vector<EvalRow> rows;
    double sum_p = 0.0, sum_s = 0.0;
    for (const auto& [name, paths] : pairs) {
        dbpn::ImagePlane sr = dbpn::load_image(paths.first);
        dbpn::ImagePlane gt = dbpn::load_image(paths.second);
        // Ground truth may be a few pixels larger (not a multiple of the
        // scale); compare on the common top-left region.
        const int h = std::min(sr.h, gt.h), w = std::min(sr.w, gt.w);
        if (sr.h != h || sr.w != w) sr = dbpn::crop(sr, 0, 0, h, w);
        if (gt.h != h || gt.w != w) gt = dbpn::crop(gt, 0, 0, h, w);
        EvalRow r;
        r.name = name;
        r.psnr_db = dbpn::psnr(sr, gt, proto);
        r.ssim_v = dbpn::ssim(sr, gt, proto);
        sum_p += r.psnr_db;
        sum_s += r.ssim_v;
        rows.push_back(r);
    }

    std::size_t wname = 5;
    for (const auto& r : rows) wname = std::max(wname, r.name.size());
    std::printf("%-*s  %10s  %8s\n", static_cast<int>(wname), "image", "psnr_db", "ssim");
    for (const auto& r : rows)
        std::printf("%-*s  %10s  %8.4f\n", static_cast<int>(wname), r.name.c_str(),
                    fmt_db(r.psnr_db).c_str(), r.ssim_v);
    const double n = static_cast<double>(rows.size());
    std::printf("%-*s  %10s  %8.4f\n", static_cast<int>(wname), "mean",
                fmt_db(sum_p / n).c_str(), sum_s / n);

    if (!csv_path.empty()) {
        std::ofstream cs(csv_path);
        if (!cs) throw dbpn::IoError("cannot write '", csv_path, "'");
        cs << "image,psnr_db,ssim\n";
        for (const auto& r : rows)
            cs << r.name << "," << fmt_db(r.psnr_db) << "," << r.ssim_v << "\n";
    }
    return 0;
}

// Published totals (thousands of parameters, kernels+biases) for the preset/
// scale combinations that have a reference figure.
struct PublishedEntry {
    const char* name;
    int scale;
    int thousands;
};
constexpr PublishedEntry kPublished[] = {
    {"dbpn-ss", 2, 106},   {"dbpn-ss", 4, 188},   {"dbpn-ss", 8, 421},
    {"dbpn-s", 2, 337},    {"dbpn-s", 4, 595},    {"dbpn-s", 8, 1332},
    {"dbpn-m", 2, 779},    {"dbpn-m", 4, 1381},   {"dbpn-m", 8, 3101},
    {"dbpn-l", 2, 1221},   {"dbpn-l", 4, 2168},   {"dbpn-l", 8, 4871},
    {"d-dbpn-l", 2, 1230}, {"d-dbpn-l", 4, 2176}, {"d-dbpn-l", 8, 4879},
    {"d-dbpn", 2, 5819},   {"d-dbpn", 4, 10426},  {"d-dbpn", 8, 23205},
    {"dbpn", 4, 15348},    {"dbpn-r64-10", 4, 1614},
    {"dbpn-r128-5", 4, 6349}, {"dbpn-mr64-3", 4, 10419},
    {"dbpn-res-mr64-3", 4, 10419},
};

int cmd_params(const std::string& name, int scale, bool expect_published) {
    dbpn::NetworkConfig cfg = dbpn::preset(name, scale);
    dbpn::DbpnNetwork<float> net = dbpn::build<float>(cfg, 0);
    std::cout << name << ": " << dbpn::describe(net);
    if (!expect_published) return 0;

    const std::size_t ours = dbpn::count_params(net) - dbpn::count_slopes(net);
    for (const auto& e : kPublished) {
        if (name != e.name || scale != e.scale) continue;
        const double ref = e.thousands * 1000.0;
        const double rel = (static_cast<double>(ours) - ref) / ref;
        std::printf("published ~%dk, ours %zu (%+.2f%%)\n", e.thousands, ours,
                    100.0 * rel);
        return std::abs(rel) <= 0.01 ? 0 : 2;
    }
    std::cerr << "error: no published figure for " << name << " at x" << scale << "\n";
    return 2;
}

// Identity with a deliberately wrong backward (scales the gradient by 1.01);
// lets the harness prove it can detect a broken analytic gradient.
template <class S>
dbpn::Tensor4<S> corrupted_identity(const dbpn::Tensor4<S>& x) {
    dbpn::Tensor4<S> y = x.clone_data();
    dbpn::Tensor4<S> xc = x;
    if (auto* tp = dbpn::detail::prep_record<S>(x.participates(), y, {&xc})) {
        tp->record(y, [xc, y]() mutable {
            const S* dy = y.grad->data();
            S* dx = xc.grad->data();
            for (std::size_t i = 0; i < xc.numel(); ++i) dx[i] += S(1.01) * dy[i];
        });
    }
    return y;
}

int cmd_gradcheck(const std::string& target, std::uint64_t seed, bool corrupt) {
    using T = dbpn::Tensor4<double>;
    dbpn::Rng rng(seed);
    auto randomize = [&](T& t, double s) {
        for (auto& v : *t.data) v = s * rng.normal();
    };
    constexpr double tol = 1e-4;
    bool all_ok = true;

    auto report = [&](const std::string& name, const dbpn::GradCheckReport& rep) {
        const bool ok = rep.ok(tol);
        all_ok = all_ok && ok;
        std::printf("%-18s max rel err %.3e over %zu entries  [%s]\n", name.c_str(),
                    rep.max_rel_err, rep.checked, ok ? "ok" : "FAIL");
        if (!ok)
            std::printf("  worst %s: analytic %.6e vs numeric %.6e\n", rep.worst.c_str(),
                        rep.analytic, rep.numeric);
    };

    if (corrupt) {
        // A sound harness must flag the planted 1% gradient error, i.e. this
        // mode is expected to exit nonzero.
        T x(1, 2, 3, 3), tgt(1, 2, 3, 3);
        randomize(x, 1.0);
        randomize(tgt, 1.0);
        auto rep = dbpn::finite_diff_check<double>(
            [&] { return dbpn::mse_loss(corrupted_identity(x), tgt); }, {&x});
        report("corrupted (hook)", rep);
        return rep.ok(tol) ? 0 : 1;
    }

    if (target == "ops") {
        {
            auto p = dbpn::make_conv<double>(3, 2, 3, 2, 1);
            T x(2, 2, 5, 5), tgt;
            randomize(x, 1.0);
            randomize(p.kernel, 0.5);
            randomize(p.bias, 0.1);
            tgt = T(2, 3, 3, 3);
            randomize(tgt, 1.0);
            report("conv2d", dbpn::finite_diff_check<double>(
                                 [&] { return dbpn::mse_loss(dbpn::conv2d(x, p), tgt); },
                                 {&x, &p.kernel, &p.bias}));
        }
        {
            auto p = dbpn::make_deconv<double>(2, 3, 4, 2, 1);
            T x(2, 2, 3, 3), tgt(2, 3, 6, 6);
            randomize(x, 1.0);
            randomize(p.kernel, 0.5);
            randomize(p.bias, 0.1);
            randomize(tgt, 1.0);
            report("conv_transpose2d",
                   dbpn::finite_diff_check<double>(
                       [&] { return dbpn::mse_loss(dbpn::conv_transpose2d(x, p), tgt); },
                       {&x, &p.kernel, &p.bias}));
        }
        {
            T x(2, 3, 4, 4), tgt(2, 3, 4, 4);
            auto sl = dbpn::make_slopes<double>(3);
            randomize(x, 1.0);
            randomize(tgt, 1.0);
            report("prelu", dbpn::finite_diff_check<double>(
                                [&] { return dbpn::mse_loss(dbpn::prelu(x, sl), tgt); },
                                {&x, &sl}));
        }
        {
            T a(1, 2, 3, 3), b(1, 3, 3, 3), tgt(1, 5, 3, 3);
            randomize(a, 1.0);
            randomize(b, 1.0);
            randomize(tgt, 1.0);
            report("concat_channels",
                   dbpn::finite_diff_check<double>(
                       [&] {
                           return dbpn::mse_loss(dbpn::concat_channels<double>({a, b}), tgt);
                       },
                       {&a, &b}));
        }
        {
            T a(1, 2, 3, 3), b(1, 2, 3, 3), tgt(1, 2, 3, 3);
            randomize(a, 1.0);
            randomize(b, 1.0);
            randomize(tgt, 1.0);
            report("add", dbpn::finite_diff_check<double>(
                              [&] { return dbpn::mse_loss(dbpn::add(a, b), tgt); },
                              {&a, &b}));
            report("sub", dbpn::finite_diff_check<double>(
                              [&] { return dbpn::mse_loss(dbpn::sub(a, b), tgt); },
                              {&a, &b}));
        }
        {
            T p(1, 2, 4, 4), t(1, 2, 4, 4);
            randomize(p, 1.0);
            randomize(t, 1.0);
            report("l1_loss", dbpn::finite_diff_check<double>(
                                  [&] { return dbpn::l1_loss(p, t); }, {&p}));
            report("mse_loss", dbpn::finite_diff_check<double>(
                                   [&] { return dbpn::mse_loss(p, t); }, {&p}));
            report("sum_all", dbpn::finite_diff_check<double>(
                                  [&] { return dbpn::sum_all(p); }, {&p}));
        }
    } else if (target == "unit") {
        for (bool up : {true, false}) {
            auto u = dbpn::make_projection_unit<double>(up, 4, 2, rng);
            T x = up ? T(1, 4, 6, 6) : T(1, 4, 12, 12);
            T tgt = up ? T(1, 4, 12, 12) : T(1, 4, 6, 6);
            randomize(x, 0.5);
            randomize(tgt, 0.5);
            std::vector<T*> probes = {&x,      &u.l1.kernel, &u.l1.bias, &u.s1,
                                      &u.l2.kernel, &u.l2.bias, &u.s2,
                                      &u.l3.kernel, &u.l3.bias, &u.s3};
            auto fwd = [&] {
                return dbpn::mse_loss(up ? dbpn::up_project(u, x) : dbpn::down_project(u, x),
                                      tgt);
            };
            report(up ? "up_project" : "down_project",
                   dbpn::finite_diff_check<double>(fwd, probes));
        }
    } else if (target == "network") {
        dbpn::NetworkConfig cfg;
        cfg.scale = 2;
        cfg.n0 = 6;
        cfg.nR = 4;
        cfg.T = 3;
        cfg.color = dbpn::ColorMode::Y;
        cfg.dense = true;
        auto net = dbpn::build<double>(cfg, seed);
        T x(1, 1, 6, 6), tgt(1, 1, 12, 12);
        randomize(x, 0.3);
        randomize(tgt, 0.3);
        std::vector<T*> probes;
        auto named = dbpn::named_parameters(net);
        for (auto& np : named) probes.push_back(&np.tensor);
        report("network", dbpn::finite_diff_check<double>(
                              [&] { return dbpn::mse_loss(dbpn::forward(net, x), tgt); },
                              probes));
    } else {
        throw dbpn::DimError("gradcheck target must be ops, unit or network, got '",
                             target, "'");
    }
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep back-projection single-image super-resolution"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "compute threads (1 = deterministic reference)")
        ->capture_default_str();

    // prepare
    auto* prep = app.add_subcommand("prepare", "degrade HR images into LR/HR pairs");
    std::string prep_hr, prep_out;
    int prep_scale = 4;
    prep->add_option("--hr", prep_hr, "directory of HR images")->required();
    prep->add_option("--scale", prep_scale, "downscale factor")->required()
        ->check(CLI::PositiveNumber);
    prep->add_option("--out", prep_out, "output directory (gets HR/ and LR/)")->required();

    // train
    auto* tr = app.add_subcommand("train", "train a network");
    std::string tr_config;
    tr->add_option("--config", tr_config, "key=value config file");
    std::vector<std::pair<std::string, std::string>> tr_overrides;
    auto kv_opt = [&](const std::string& flag, const std::string& key,
                      const std::string& help) {
        tr->add_option_function<std::string>(
              flag, [&tr_overrides, key](const std::string& v) {
                  tr_overrides.emplace_back(key, v);
              },
              help);
    };
    kv_opt("--data", "data", "training image directory");
    kv_opt("--val", "val", "validation image directory");
    kv_opt("--out", "out", "output directory for checkpoints and log");
    kv_opt("--preset", "preset", "network preset name");
    kv_opt("--resume", "resume", "checkpoint to continue from");
    kv_opt("--scale", "scale", "upscaling factor (2, 4 or 8)");
    kv_opt("--batch", "batch", "minibatch size");
    kv_opt("--patch", "patch", "LR patch edge length");
    kv_opt("--iterations", "iterations", "total training iterations");
    kv_opt("--lr", "lr", "initial learning rate");
    kv_opt("--decay-interval", "decay_interval", "iterations per LR decay (0 = off)");
    kv_opt("--decay-factor", "decay_factor", "LR division factor per decay");
    kv_opt("--seed", "seed", "RNG seed");
    kv_opt("--checkpoint-interval", "checkpoint_interval", "iterations per checkpoint");
    kv_opt("--log-interval", "log_interval", "iterations per log record");
    kv_opt("--loss", "loss", "l1 or mse");
    kv_opt("--augment", "augment", "random flips/rotations (on/off)");
    kv_opt("--scale-jitter", "scale_jitter", "random rescale augmentation (on/off)");
    kv_opt("--jitter-min", "jitter_min", "smallest jitter factor");
    kv_opt("--jitter-max", "jitter_max", "largest jitter factor");
    kv_opt("--threads", "threads", "compute threads for this run");

    // upscale
    auto* up = app.add_subcommand("upscale", "super-resolve one image");
    std::string up_model, up_in, up_out;
    int up_scale = 0;
    up->add_option("--model", up_model, "checkpoint file");
    up->add_option("--in", up_in, "input image")->required();
    up->add_option("--out", up_out, "output image")->required();
    up->add_option("--scale", up_scale,
                   "scale for the classical fallback when no model is given");

    // ibp
    auto* ib = app.add_subcommand("ibp", "classical iterative back-projection");
    std::string ib_in, ib_out, ib_trace;
    int ib_scale = 2, ib_iters = 10;
    double ib_sigma = -1.0, ib_tol = 0.0;
    ib->add_option("in", ib_in, "input LR image")->required();
    ib->add_option("out", ib_out, "output SR image")->required();
    ib->add_option("--scale", ib_scale, "upscaling factor (2, 4 or 8)")->required();
    ib->add_option("--iters", ib_iters, "back-projection iterations")
        ->capture_default_str();
    ib->add_option("--sigma", ib_sigma, "blur sigma (default scale/2)");
    ib->add_option("--tolerance", ib_tol, "early-stop residual (0 = run all)");
    ib->add_option("--trace", ib_trace, "write per-iteration residual CSV here");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "PSNR/SSIM against ground truth");
    std::string ev_sr, ev_gt, ev_csv;
    int ev_scale = 0, ev_crop = -1;
    bool ev_rgb = false;
    ev->add_option("--sr", ev_sr, "SR image or directory")->required();
    ev->add_option("--gt", ev_gt, "ground-truth image or directory")->required();
    ev->add_option("--scale", ev_scale, "scale factor (sets the default crop)")
        ->required();
    ev->add_option("--crop", ev_crop, "boundary crop in pixels (default: scale)");
    ev->add_flag("--rgb", ev_rgb, "compare RGB instead of the luminance channel");
    ev->add_option("--csv", ev_csv, "also write results as CSV here");

    // params
    auto* pa = app.add_subcommand("params", "layer census for a preset");
    std::string pa_name;
    int pa_scale = 4;
    bool pa_expect = false;
    pa->add_option("--preset", pa_name, "preset name")->required();
    pa->add_option("--scale", pa_scale, "scale factor")->capture_default_str();
    pa->add_flag("--expect-table1", pa_expect,
                 "exit nonzero if the total strays >1% from the published figure");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
    std::string gc_target = "ops";
    std::uint64_t gc_seed = 0;
    bool gc_corrupt = false;
    gc->add_option("--target", gc_target, "ops, unit or network")
        ->capture_default_str();
    gc->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();
    gc->add_flag("--corrupt", gc_corrupt,
                 "self-test: plant a wrong gradient and require detection");

    // Let --threads work after the subcommand name too.
    for (auto* s : {prep, tr, up, ib, ev, pa, gc}) s->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        dbpn::set_compute_threads(threads);
        if (prep->parsed()) return cmd_prepare(prep_hr, prep_scale, prep_out);
        if (tr->parsed()) {
            dbpn::TrainConfig cfg;
            if (!tr_config.empty()) dbpn::load_config_file(cfg, tr_config);
            for (const auto& [k, v] : tr_overrides)
                if (!dbpn::apply_kv(cfg, k, v))
                    throw dbpn::DimError("unknown train setting '", k, "'");
            return cmd_train(cfg);
        }
        if (up->parsed()) return cmd_upscale(up_model, up_in, up_out, up_scale);
        if (ib->parsed())
            return cmd_ibp(ib_in, ib_out, ib_scale, ib_iters, ib_sigma, ib_tol, ib_trace);
        if (ev->parsed())
            return cmd_evaluate(ev_sr, ev_gt, ev_crop >= 0 ? ev_crop : ev_scale, ev_rgb,
                                ev_csv);
        if (pa->parsed()) return cmd_params(pa_name, pa_scale, pa_expect);
        if (gc->parsed()) return cmd_gradcheck(gc_target, gc_seed, gc_corrupt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
