#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "morphon/checkpoint.hpp"
#include "morphon/data.hpp"
#include "morphon/metrics.hpp"
#include "morphon/network.hpp"
#include "morphon/parallel.hpp"
#include "morphon/train.hpp"

namespace {

using namespace morphon;

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

NetworkSpec make_spec(const std::string& arch, int se_size, int channels) {
    if (arch == "morphon") return NetworkSpec::morphon(se_size, se_size, channels > 0 ? channels : 4);
    if (arch == "morphon-small")
        return NetworkSpec::morphon_small(se_size, se_size, channels > 0 ? channels : 1);
    throw std::runtime_error("unknown architecture '" + arch + "' (morphon | morphon-small)");
}

std::vector<ImagePair> load_manifest_pairs(const std::string& manifest, int resize) {
    auto pairs = load_pairs(read_manifest(manifest));
    if (resize > 0)
        for (auto& p : pairs) {
            p.rainy = resize_bilinear(p.rainy, resize, resize);
            p.clean = resize_bilinear(p.clean, resize, resize);
        }
    return pairs;
}

void require_writable(const std::string& path) {
    std::ofstream probe(path, std::ios::app);
    if (!probe) throw std::runtime_error("cannot write output file: " + path);
}

// Channel mean as a single displayable map.
Tensor channel_mean(const Tensor& t) {
    Tensor out(1, t.height(), t.width());
    for (int c = 0; c < t.channels(); ++c)
        for (int y = 0; y < t.height(); ++y)
            for (int x = 0; x < t.width(); ++x) out.at(0, y, x) += t.at(c, y, x) / t.channels();
    return out;
}

int cmd_train(const std::string& manifest, const std::string& val_manifest,
              const std::string& out_path, const std::string& log_path, const std::string& arch,
              int se_size, int channels, int epochs, int batch_size, std::uint64_t seed,
              int patch_size, double lambda, double lr, int resize) {
    require_writable(out_path);

    TrainOptions opt;
    opt.spec = make_spec(arch, se_size, channels);
    opt.seed = seed;
    opt.epochs = epochs;
    opt.batch_size = batch_size;
    opt.loss.patch_size = patch_size;
    opt.loss.lambda = lambda;
    opt.lr = lr;

    const auto train_pairs = load_manifest_pairs(manifest, resize);
    std::vector<ImagePair> val_pairs;
    if (!val_manifest.empty()) val_pairs = load_manifest_pairs(val_manifest, resize);

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw std::runtime_error("cannot write log file: " + log_path);
        log << "epoch,train_loss,val_loss,val_ssim,val_psnr\n";
    }
    auto on_epoch = [&](const EpochRecord& rec) {
        std::cout << "epoch " << rec.epoch << " train_loss " << fmt(rec.train_loss)
                  << " val_loss " << fmt(rec.val_loss) << " val_ssim " << fmt(rec.val_ssim)
                  << " val_psnr " << fmt(rec.val_psnr) << "\n";
        if (log)
            log << rec.epoch << "," << fmt(rec.train_loss) << "," << fmt(rec.val_loss) << ","
                << fmt(rec.val_ssim) << "," << fmt(rec.val_psnr) << "\n";
    };

    const TrainResult result =
        train(opt, train_pairs, val_pairs.empty() ? nullptr : &val_pairs, on_epoch);
    save_checkpoint(out_path, result.net, result.adam, result.meta);
    std::cout << "saved checkpoint " << out_path << " (" << result.net.count_parameters()
              << " parameters)\n";
    return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& input_path,
              const std::string& output_path, const std::string& dump_dir) {
    const LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    const Tensor image = load_grayscale(input_path);
    const ForwardTrace trace = ckpt.net.forward(image);
    write_pgm(output_path, trace.output);

    if (!dump_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(dump_dir);
        const auto dump = [&](const std::string& name, const Tensor& t) {
            write_pgm((fs::path(dump_dir) / (name + ".pgm")).string(), channel_mean(t));
        };
        for (int p = 0; p < 2; ++p) {
            const auto& pt = trace.paths[p];
            const auto& path = ckpt.net.path(p);
            char name[64];
            int idx = 0;
            for (std::size_t l = 0; l < pt.morph_outputs.size(); ++l, ++idx) {
                std::snprintf(name, sizeof(name), "path%d_l%02d_%s", p + 1, idx,
                              morph_kind_name(path.morph[l].kind));
                dump(name, pt.morph_outputs[l]);
            }
            for (std::size_t l = 0; l < pt.conv_outputs.size(); ++l, ++idx) {
                std::snprintf(name, sizeof(name), "path%d_l%02d_conv", p + 1, idx);
                dump(name, pt.conv_outputs[l]);
            }
            std::snprintf(name, sizeof(name), "path%d_weight_map", p + 1);
            dump(name, pt.weight_map);
        }
        dump("output", trace.output);
    }
    std::cout << "wrote " << output_path << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& manifest,
             const std::string& out_csv) {
    const LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    const auto pairs = load_manifest_pairs(manifest, 0);
    if (pairs.empty()) throw std::runtime_error("manifest is empty: " + manifest);

    struct Row {
        std::string id;
        double ssim, psnr, input_ssim, input_psnr;
    };
    std::vector<Row> rows(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        const ForwardTrace trace = ckpt.net.forward(pairs[i].rainy);
        rows[i] = {pairs[i].id, eval_ssim(trace.output, pairs[i].clean),
                   psnr(trace.output, pairs[i].clean), eval_ssim(pairs[i].rainy, pairs[i].clean),
                   psnr(pairs[i].rainy, pairs[i].clean)};
    });

    std::ofstream f(out_csv);
    if (!f) throw std::runtime_error("cannot write metrics CSV: " + out_csv);
    f << "id,ssim,psnr,input_ssim,input_psnr\n";
    double s = 0, p = 0, is = 0, ip = 0;
    for (const Row& r : rows) {
        f << r.id << "," << format_metric(r.ssim) << "," << format_metric(r.psnr) << ","
          << format_metric(r.input_ssim) << "," << format_metric(r.input_psnr) << "\n";
        s += r.ssim;
        p += r.psnr;
        is += r.input_ssim;
        ip += r.input_psnr;
    }
    const double n = static_cast<double>(rows.size());
    f << "MEAN," << format_metric(s / n) << "," << format_metric(p / n) << ","
      << format_metric(is / n) << "," << format_metric(ip / n) << "\n";
    std::cout << "mean ssim " << fmt(s / n) << " psnr " << fmt(p / n) << " (input ssim "
              << fmt(is / n) << " psnr " << fmt(ip / n) << ")\n";
    return 0;
}

int cmd_synth(const std::string& out_dir, int n, int size, std::uint64_t seed, bool half,
              int streaks, double streak_length, double streak_width, double intensity,
              double angle_min, double angle_max) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    Rng rng(seed);
    std::vector<ManifestEntry> entries;
    for (int i = 0; i < n; ++i) {
        const Tensor clean = procedural_clean(size, size, rng.next_u64());
        RainConfig cfg;
        cfg.streak_count = streaks;
        cfg.streak_length = streak_length;
        cfg.streak_width = streak_width;
        cfg.intensity = intensity;
        cfg.angle_deg = rng.uniform(angle_min, angle_max);
        cfg.seed = rng.next_u64();
        const ImagePair pair = half ? synthesize_half_degraded(clean, cfg)
                                    : synthesize_rain(clean, cfg);

        char name[32];
        std::snprintf(name, sizeof(name), "clean_%03d.pgm", i);
        const std::string clean_path = (fs::path(out_dir) / name).string();
        std::snprintf(name, sizeof(name), "rainy_%03d.pgm", i);
        const std::string rainy_path = (fs::path(out_dir) / name).string();
        write_pgm(clean_path, pair.clean);
        write_pgm(rainy_path, pair.rainy);
        entries.push_back({rainy_path, clean_path});
    }
    const std::string manifest = (fs::path(out_dir) / "manifest.tsv").string();
    write_manifest(manifest, entries);
    std::cout << "wrote " << n << " pairs and " << manifest << "\n";
    return 0;
}

int cmd_inspect(const std::string& ckpt_path, bool count, const std::string& export_dir) {
    const LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    if (count) std::cout << ckpt.net.count_parameters() << "\n";
    if (!export_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(export_dir);
        int written = 0;
        for (int p = 0; p < 2; ++p) {
            const auto& morph_layers = ckpt.net.path(p).morph;
            for (std::size_t l = 0; l < morph_layers.size(); ++l)
                for (std::size_t c = 0; c < morph_layers[l].ses.size(); ++c) {
                    char name[64];
                    std::snprintf(name, sizeof(name), "path%d_layer%zu_ch%zu.pgm", p + 1, l, c);
                    write_pgm((fs::path(export_dir) / name).string(),
                              export_se_image(morph_layers[l].ses[c]));
                    ++written;
                }
        }
        std::cout << "exported " << written << " structuring elements to " << export_dir << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"morphon: trainable morphological filtering for image de-raining"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a network on a dataset manifest");
    std::string manifest, val_manifest, out_path, log_path, arch = "morphon-small";
    int se_size = 8, channels = 0, epochs = 50, batch_size = 1, patch_size = 100, resize = 0;
    std::uint64_t seed = 1;
    double lambda = 1.0, lr = 0.001;
    train_cmd->add_option("--manifest", manifest, "training manifest (rainy<TAB>clean per line)")
        ->required();
    train_cmd->add_option("--val-manifest", val_manifest, "validation manifest");
    train_cmd->add_option("--out", out_path, "output checkpoint path")->required();
    train_cmd->add_option("--log", log_path, "per-epoch CSV log");
    train_cmd->add_option("--arch", arch, "morphon | morphon-small");
    train_cmd->add_option("--se-size", se_size, "structuring element size");
    train_cmd->add_option("--channels", channels, "morph channels (default per arch)");
    train_cmd->add_option("--epochs", epochs, "training epochs");
    train_cmd->add_option("--batch-size", batch_size, "gradient accumulation batch");
    train_cmd->add_option("--seed", seed, "rng seed");
    train_cmd->add_option("--patch-size", patch_size, "DSSIM patch size");
    train_cmd->add_option("--lambda", lambda, "MAE weight in the total loss");
    train_cmd->add_option("--lr", lr, "Adam learning rate");
    train_cmd->add_option("--resize", resize, "resize images to NxN before training (0 = off)");

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "De-rain one image with a trained checkpoint");
    std::string ckpt_path, input_path, output_path, dump_dir;
    infer_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    infer_cmd->add_option("--input", input_path, "input image (PGM or PNG)")->required();
    infer_cmd->add_option("--output", output_path, "output PGM path")->required();
    infer_cmd->add_option("--dump-intermediates", dump_dir,
                          "directory for per-layer output maps");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint over a manifest");
    std::string eval_ckpt, eval_manifest, eval_csv;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "evaluation manifest")->required();
    eval_cmd->add_option("--out", eval_csv, "metrics CSV path")->required();

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic rain dataset");
    std::string synth_dir;
    int synth_n = 10, synth_size = 64, synth_streaks = 60;
    std::uint64_t synth_seed = 1;
    bool synth_half = false;
    double synth_len = 12.0, synth_width = 1.2, synth_intensity = 0.4;
    double angle_min = -40.0, angle_max = 40.0;
    synth_cmd->add_option("--out-dir", synth_dir, "output directory")->required();
    synth_cmd->add_option("--n", synth_n, "number of image pairs");
    synth_cmd->add_option("--size", synth_size, "image side length");
    synth_cmd->add_option("--seed", synth_seed, "rng seed");
    synth_cmd->add_flag("--half", synth_half, "degrade only the left half");
    synth_cmd->add_option("--streaks", synth_streaks, "streaks per image");
    synth_cmd->add_option("--streak-length", synth_len, "streak length in pixels");
    synth_cmd->add_option("--streak-width", synth_width, "streak width in pixels");
    synth_cmd->add_option("--intensity", synth_intensity, "additive streak brightness");
    synth_cmd->add_option("--angle-min", angle_min, "minimum streak angle from vertical");
    synth_cmd->add_option("--angle-max", angle_max, "maximum streak angle from vertical");

    // inspect
    auto* inspect_cmd = app.add_subcommand("inspect", "Inspect a checkpoint");
    std::string inspect_ckpt, export_dir;
    bool show_count = false;
    inspect_cmd->add_option("--checkpoint", inspect_ckpt, "checkpoint file")->required();
    inspect_cmd->add_flag("--count", show_count, "print the total parameter count");
    inspect_cmd->add_option("--export-se", export_dir,
                            "write each structuring element as a normalized PGM");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed())
            return cmd_train(manifest, val_manifest, out_path, log_path, arch, se_size, channels,
                             epochs, batch_size, seed, patch_size, lambda, lr, resize);
        if (infer_cmd->parsed()) return cmd_infer(ckpt_path, input_path, output_path, dump_dir);
        if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_manifest, eval_csv);
        if (synth_cmd->parsed())
            return cmd_synth(synth_dir, synth_n, synth_size, synth_seed, synth_half, synth_streaks,
                             synth_len, synth_width, synth_intensity, angle_min, angle_max);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_ckpt, show_count, export_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
