// Command-line front end: train transforms, encode/decode frames, run single
// transmissions, sweep rate/SNR grids, plot CSVs, and benchmark throughput.

#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "semcode/semcode.hpp"

namespace {

using namespace semcode;

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::ConfigError:
        case ErrorCode::UnknownColumn:
            return 2;
        case ErrorCode::IoError:
        case ErrorCode::MalformedHeader:
        case ErrorCode::Truncated:
        case ErrorCode::UnsupportedFormat:
        case ErrorCode::NoCorpus:
        case ErrorCode::CorruptFrame:
        case ErrorCode::CorruptBitstream:
            return 3;
        default:
            return 4;
    }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const ConfigMap& cfg) {
    if (flag) return *flag;
    if (cfg.has("seed")) return cfg.get_u64("seed", 0);
    if (const char* env = std::getenv("SEMCODE_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw Error(ErrorCode::ConfigError, "SEMCODE_SEED is not an unsigned integer");
        }
    }
    return 0;
}

ConfigMap load_config(const std::string& path) {
    if (path.empty()) return ConfigMap::parse_string("");
    return ConfigMap::parse_file(path);
}

void print_rate(const RateReport& r) {
    std::printf("m=%" PRIu64 " k_analog=%" PRIu64 " side_info_bits=%" PRIu64 " k_effective=%" PRIu64
                " cbr=%.10g\n",
                r.m, r.k_analog, r.side_info_bits, r.k_effective, r.cbr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semcode - semantic token coding over simulated wireless channels"};
    app.require_subcommand(1);

    std::string config_path, out_path, corpus_dir, transform_path, codebook_path;
    std::string image_path, frame_path, csv_path, x_col = "cbr", y_col = "psnr_db", group_col = "budget";
    std::optional<std::uint64_t> seed_flag;
    std::uint32_t patch_size = 16, token_dim = 32, vq_k = 0, kmeans_iters = 50;
    std::uint32_t threads = 1, merges = 8, iterations = 100, bench_dim = 64, bench_layers = 12;
    bool timing = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat key = value config file");
        cmd->add_option("--seed", seed_flag, "seed override (SEMCODE_SEED is the env fallback)");
        cmd->add_option("--out", out_path, "output path");
    };

    CLI::App* train = app.add_subcommand("train", "learn the analysis transform (and optional codebook)");
    add_common(train);
    train->add_option("--corpus", corpus_dir, "directory of PPM/PGM images")->required();
    train->add_option("--patch-size", patch_size, "patch side length");
    train->add_option("--token-dim", token_dim, "token dimension (PCA components)");
    train->add_option("--vq-k", vq_k, "also train a VQ codebook with K centroids");
    train->add_option("--codebook", codebook_path, "codebook output path");
    train->add_option("--kmeans-iters", kmeans_iters, "k-means iteration cap");

    CLI::App* encode = app.add_subcommand("encode", "encode an image into a frame file");
    add_common(encode);
    encode->add_option("--image", image_path, "input PPM/PGM")->required();
    encode->add_option("--transform", transform_path, "trained transform file")->required();
    encode->add_option("--codebook", codebook_path, "codebook file (vq mode)");

    CLI::App* decode = app.add_subcommand("decode", "decode a frame file back to an image");
    add_common(decode);
    decode->add_option("--frame", frame_path, "frame file")->required();
    decode->add_option("--transform", transform_path, "trained transform file")->required();
    decode->add_option("--codebook", codebook_path, "codebook file (vq mode)");

    CLI::App* transmit = app.add_subcommand("transmit", "encode, pass through the channel, decode, report");
    add_common(transmit);
    transmit->add_option("--image", image_path, "input PPM/PGM")->required();
    transmit->add_option("--transform", transform_path, "trained transform file")->required();
    transmit->add_option("--codebook", codebook_path, "codebook file (vq mode)");

    CLI::App* sweep = app.add_subcommand("sweep", "run the budget x SNR grid and emit a CSV");
    add_common(sweep);
    sweep->add_option("--corpus", corpus_dir, "corpus directory (overrides config)");
    sweep->add_option("--transform", transform_path, "transform file (overrides config)");
    sweep->add_option("--codebook", codebook_path, "codebook file (overrides config)");
    sweep->add_option("--threads", threads, "worker threads");
    sweep->add_flag("--timing", timing, "record wall-clock ms per row (breaks byte reproducibility)");

    CLI::App* plot = app.add_subcommand("plot", "render a grouped line plot from a sweep CSV");
    add_common(plot);
    plot->add_option("--csv", csv_path, "input CSV")->required();
    plot->add_option("--x", x_col, "x column");
    plot->add_option("--y", y_col, "y column");
    plot->add_option("--group-by", group_col, "grouping column");

    CLI::App* bench = app.add_subcommand("bench", "attention forward throughput with and without merging");
    add_common(bench);
    bench->add_option("--corpus", corpus_dir, "corpus directory")->required();
    bench->add_option("--merges", merges, "tokens merged per layer (0 = control run)");
    bench->add_option("--iterations", iterations, "timed iterations per variant");
    bench->add_option("--token-dim", bench_dim, "token dimension for the toy stack");
    bench->add_option("--layers", bench_layers, "transformer layers");

    CLI11_PARSE(app, argc, argv);

    try {
        const ConfigMap cfg = load_config(config_path);
        const std::uint64_t seed = resolve_seed(seed_flag, cfg);

        if (*train) {
            if (out_path.empty()) throw Error(ErrorCode::ConfigError, "train requires --out for the transform");
            if (vq_k > 0 && codebook_path.empty())
                throw Error(ErrorCode::ConfigError, "--vq-k needs --codebook for the output path");
            const TrainSummary s =
                cmd_train(corpus_dir, patch_size, token_dim, out_path, vq_k, codebook_path, seed, kmeans_iters);
            std::printf("trained on %zu images, %zu patches\n", s.n_images, s.n_patches);
            if (s.zero_variance)
                std::printf("warning: corpus has zero variance; transform is valid but degenerate\n");
            std::printf("energy captured by %u components: %.6f\n", token_dim, s.energy_captured);
            if (vq_k > 0)
                std::printf("k-means: %u iterations, final distortion %.8g\n", s.kmeans_iterations,
                            s.kmeans_distortion);
            return 0;
        }

        if (*encode || *decode || *transmit) {
            PipelineConfig pc = pipeline_config_from(cfg);
            pc.seed = seed;
            const AnalysisTransform transform = load_transform(transform_path);
            pc.patch_size = transform.patch_size;
            pc.token_dim = transform.out_dim;
            Codebook cb;
            const bool use_cb = pc.quantization == QuantizationMode::Vq;
            if (use_cb) {
                if (codebook_path.empty()) throw Error(ErrorCode::ConfigError, "vq mode requires --codebook");
                cb = load_codebook(codebook_path);
            }

            if (*encode) {
                if (out_path.empty()) throw Error(ErrorCode::ConfigError, "encode requires --out");
                const ImageBuffer img = load_ppm(image_path);
                const TransmissionFrame f = encode_image(img, pc, transform, use_cb ? &cb : nullptr);
                save_frame(f, out_path);
                print_rate(f.rate);
            } else if (*decode) {
                if (out_path.empty()) throw Error(ErrorCode::ConfigError, "decode requires --out");
                const TransmissionFrame f = load_frame(frame_path, pc.bits_per_symbol);
                const ImageBuffer img = decode_image(f, pc, transform, use_cb ? &cb : nullptr);
                save_ppm(img, out_path);
            } else {
                const ImageBuffer img = load_ppm(image_path);
                const TrialResult res = run_trial(img, pc, transform, use_cb ? &cb : nullptr);
                print_rate(res.rate);
                std::printf("mse=%.6f psnr_db=%.6f ssim=%.6f entropy_bits=%.6f\n", res.quality.mse,
                            res.quality.psnr_db, res.quality.ssim, res.entropy_bits);
                if (!out_path.empty()) save_ppm(res.reconstruction, out_path);
            }
            return 0;
        }

        if (*sweep) {
            ExperimentSpec spec;
            spec.base = pipeline_config_from(cfg);
            spec.base.seed = seed;
            spec.corpus_dir = corpus_dir.empty() ? cfg.get_str("corpus", "") : corpus_dir;
            spec.transform_path = transform_path.empty() ? cfg.get_str("transform", "") : transform_path;
            spec.codebook_path = codebook_path.empty() ? cfg.get_str("codebook", "") : codebook_path;
            spec.threads = threads > 1 ? threads : cfg.get_u32("threads", 1);
            spec.timing = timing || cfg.get_bool("timing", false);
            if (spec.corpus_dir.empty()) throw Error(ErrorCode::ConfigError, "sweep needs a corpus directory");
            if (spec.transform_path.empty()) throw Error(ErrorCode::ConfigError, "sweep needs a transform file");
            for (const std::string& b : cfg.get_list("budgets"))
                spec.budgets.push_back(static_cast<std::uint32_t>(std::stoul(b)));
            for (const std::string& s : cfg.get_list("snrs"))
                spec.snrs.push_back(ConfigMap::parse_double("snrs", s));
            if (spec.budgets.empty()) spec.budgets.push_back(spec.base.token_budget);
            if (spec.snrs.empty()) spec.snrs.push_back(spec.base.channel.snr_db);
            const std::string csv = cmd_sweep(spec, out_path);
            if (out_path.empty()) std::fputs(csv.c_str(), stdout);
            return 0;
        }

        if (*plot) {
            if (out_path.empty()) throw Error(ErrorCode::ConfigError, "plot requires --out");
            cmd_plot(csv_path, x_col, y_col, group_col, out_path);
            return 0;
        }

        if (*bench) {
            const BenchReport r = cmd_bench(corpus_dir, merges, iterations, bench_dim, bench_layers, seed);
            std::printf("token counts per stage:");
            for (Eigen::Index c : r.merged_token_counts) std::printf(" %lld", static_cast<long long>(c));
            std::printf("\nunmerged: %.2f images/sec\nmerged:   %.2f images/sec\nspeedup:  %.3fx\n",
                        r.unmerged_images_per_sec, r.merged_images_per_sec, r.speedup);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
