#pragma once

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "semcode/channel.hpp"
#include "semcode/config.hpp"
#include "semcode/error.hpp"
#include "semcode/image.hpp"
#include "semcode/quantizer.hpp"
#include "semcode/reorganizer.hpp"
#include "semcode/rng.hpp"
#include "semcode/tokenizer.hpp"
#include "semcode/transceiver.hpp"

namespace semcode {

/// Sorted listing of the PPM/PGM files in a corpus directory.
inline std::vector<std::filesystem::path> list_corpus(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(ErrorCode::NoCorpus, "'" + dir + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCode::NoCorpus, "no PPM/PGM files in '" + dir + "'");
    return files;
}

struct TrainSummary {
    std::size_t n_images = 0;
    std::size_t n_patches = 0;
    double energy_captured = 0.0;  // fraction of corpus variance kept
    bool zero_variance = false;
    std::uint32_t kmeans_iterations = 0;
    double kmeans_distortion = 0.0;
};

/// Learns the PCA analysis transform (and optionally a VQ codebook over the
/// resulting tokens) from every conforming image in the corpus.
inline TrainSummary cmd_train(const std::string& corpus_dir, std::uint32_t patch_size,
                              std::uint32_t token_dim, const std::string& transform_out,
                              std::uint32_t vq_k = 0, const std::string& codebook_out = "",
                              std::uint64_t seed = 0, std::uint32_t kmeans_iters = 50) {
    const auto files = list_corpus(corpus_dir);
    std::vector<Eigen::VectorXd> corpus;
    TrainSummary sum;
    for (const auto& f : files) {
        try {
            const ImageBuffer img = load_ppm(f.string());
            auto patches = patchify(img, patch_size);
            corpus.insert(corpus.end(), std::make_move_iterator(patches.begin()),
                          std::make_move_iterator(patches.end()));
            ++sum.n_images;
        } catch (const Error& e) {
            throw Error(e.code(), f.string() + ": " + e.what());
        }
    }
    sum.n_patches = corpus.size();

    const AnalysisTransform t = learn_analysis_transform(corpus, token_dim, patch_size);
    const double total_energy = t.eigenvalues.sum();
    if (total_energy <= 0.0) {
        sum.zero_variance = true;
        sum.energy_captured = 1.0;
    } else {
        sum.energy_captured = t.eigenvalues.head(token_dim).sum() / total_energy;
    }
    save_transform(t, transform_out);

    if (vq_k > 0) {
        if (codebook_out.empty()) throw Error(ErrorCode::ConfigError, "codebook output path required");
        const TokenSequence ts = analyze(corpus, t);
        const Codebook cb = train_codebook(ts.tokens, vq_k, kmeans_iters, mix64(seed, 3));
        save_codebook(cb, codebook_out);
        sum.kmeans_iterations = cb.iterations;
        sum.kmeans_distortion = cb.final_distortion;
    }
    return sum;
}

struct ExperimentSpec {
    std::string corpus_dir;
    std::vector<std::uint32_t> budgets;
    std::vector<double> snrs;
    PipelineConfig base;
    std::string transform_path;
    std::string codebook_path;  // required for vq mode
    std::uint32_t threads = 1;
    bool timing = false;
};

struct SweepRow {
    std::string image;
    std::uint32_t budget = 0;
    double snr_db = 0.0;
    bool failed = false;
    double cbr = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double entropy_bits = 0.0;
    std::uint64_t side_info_bits = 0;
    std::int64_t wall_ms = 0;
};

inline constexpr const char* kCsvHeader =
    "image,budget,snr_db,cbr,psnr_db,ssim,entropy_bits,side_info_bits,wall_ms";

namespace detail {

inline std::string format_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::uint64_t trial_seed(std::uint64_t base, const std::string& image_id, std::uint32_t budget,
                                double snr_db) {
    std::uint64_t snr_bits;
    static_assert(sizeof snr_bits == sizeof snr_db);
    std::memcpy(&snr_bits, &snr_db, 8);
    return mix64(mix64(mix64(base, fnv1a64(image_id)), budget), snr_bits);
}

}  // namespace detail

/// One row per (image, budget, snr) triple, grid order. Failed trials are
/// flagged and reported as nan metrics; the sweep continues.
inline std::vector<SweepRow> run_sweep(const ExperimentSpec& spec) {
    if (spec.budgets.empty() || spec.snrs.empty())
        throw Error(ErrorCode::ConfigError, "sweep needs at least one budget and one snr");
    const auto files = list_corpus(spec.corpus_dir);
    const AnalysisTransform transform = load_transform(spec.transform_path);
    Codebook codebook;
    const bool use_cb = spec.base.quantization == QuantizationMode::Vq;
    if (use_cb) {
        if (spec.codebook_path.empty()) throw Error(ErrorCode::ConfigError, "vq sweep requires a codebook");
        codebook = load_codebook(spec.codebook_path);
    }

    struct Job {
        std::string path;
        std::string id;
        std::uint32_t budget;
        double snr;
    };
    std::vector<Job> jobs;
    for (const auto& f : files)
        for (std::uint32_t b : spec.budgets)
            for (double s : spec.snrs) jobs.push_back({f.string(), f.stem().string(), b, s});

    std::vector<SweepRow> rows(jobs.size());
    auto worker = [&](std::size_t begin, std::size_t step) {
        for (std::size_t j = begin; j < jobs.size(); j += step) {
            const Job& job = jobs[j];
            SweepRow row;
            row.image = job.id;
            row.budget = job.budget;
            row.snr_db = job.snr;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                PipelineConfig cfg = spec.base;
                cfg.token_budget = job.budget;
                cfg.channel.snr_db = job.snr;
                cfg.channel.rng_seed = 0;
                cfg.seed = detail::trial_seed(spec.base.seed, job.id, job.budget, job.snr);
                const ImageBuffer img = load_ppm(job.path);
                const TrialResult res = run_trial(img, cfg, transform, use_cb ? &codebook : nullptr);
                row.cbr = res.rate.cbr;
                row.psnr_db = res.quality.psnr_db;
                row.ssim = res.quality.ssim;
                row.entropy_bits = res.entropy_bits;
                row.side_info_bits = res.rate.side_info_bits;
            } catch (const Error&) {
                row.failed = true;
                row.cbr = row.psnr_db = row.ssim = row.entropy_bits = std::nan("");
            }
            if (spec.timing) {
                const auto t1 = std::chrono::steady_clock::now();
                row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
            }
            rows[j] = std::move(row);
        }
    };

    if (spec.threads <= 1) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::uint32_t t = 0; t < spec.threads; ++t) pool.emplace_back(worker, t, spec.threads);
        for (auto& th : pool) th.join();
    }
    return rows;
}

inline std::string rows_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = kCsvHeader;
    out += "\n";
    char buf[256];
    for (const auto& r : rows) {
        if (r.failed) {
            std::snprintf(buf, sizeof buf, "%s,%u,%s,nan,nan,nan,nan,0,%" PRId64, r.image.c_str(), r.budget,
                          detail::format_g(r.snr_db).c_str(), r.wall_ms);
        } else {
            std::snprintf(buf, sizeof buf, "%s,%u,%s,%.10g,%.6f,%.6f,%.6f,%" PRIu64 ",%" PRId64,
                          r.image.c_str(), r.budget, detail::format_g(r.snr_db).c_str(), r.cbr, r.psnr_db,
                          r.ssim, r.entropy_bits, r.side_info_bits, r.wall_ms);
        }
        out += buf;
        out += "\n";
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to '" + path + "'");
}

/// Runs the sweep and writes the CSV; returns the CSV text.
inline std::string cmd_sweep(const ExperimentSpec& spec, const std::string& out_csv) {
    const std::string csv = rows_to_csv(run_sweep(spec));
    if (!out_csv.empty()) write_text_file(out_csv, csv);
    return csv;
}

// ---- throughput micro-benchmark ----------------------------------------------

struct BenchReport {
    std::vector<Eigen::Index> merged_token_counts;  // per-stage counts after merging
    double unmerged_images_per_sec = 0.0;
    double merged_images_per_sec = 0.0;
    double speedup = 0.0;
    std::uint32_t iterations = 0;
};

namespace detail {

inline double median_ns(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Measures the toy attention stack forward pass on one corpus image, with
/// merging between the attention and feed-forward halves of each block
/// (r_per_stage tokens per layer) versus the full unmerged pass.
inline BenchReport cmd_bench(const std::string& corpus_dir, std::uint32_t r_per_stage = 8,
                             std::uint32_t iterations = 100, std::uint32_t token_dim = 64,
                             std::uint32_t n_layers = 12, std::uint64_t seed = 7) {
    const auto files = list_corpus(corpus_dir);
    const ImageBuffer img = load_ppm(files.front().string());
    const auto patches = patchify(img, 16);
    const AnalysisTransform transform = learn_analysis_transform(patches, token_dim, 16);
    const TokenSequence base = analyze(patches, transform);

    const std::uint32_t heads = 4;
    const AttentionStage stage = make_attention_stage(n_layers, heads, token_dim / heads, seed);

    auto forward = [&](bool merge, std::vector<Eigen::Index>* counts) {
        Eigen::MatrixXd x = base.tokens;
        std::vector<std::uint32_t> sizes = base.sizes;
        for (std::uint32_t l = 0; l < n_layers; ++l) {
            AttnSublayerResult a = attention_sublayer(x, stage, l);
            x = std::move(a.tokens);
            if (merge && r_per_stage > 0 && x.rows() >= 2 * static_cast<Eigen::Index>(r_per_stage)) {
                const auto pairs =
                    bipartite_soft_matching(mean_over_heads(a.keys, heads), r_per_stage);
                x = detail::merge_rows(x, pairs, sizes);
                std::vector<std::uint32_t> merged_sizes = sizes;
                for (const auto& [src, dst] : pairs) merged_sizes[dst] += merged_sizes[src];
                std::vector<std::uint32_t> next;
                std::vector<bool> removed(sizes.size(), false);
                for (const auto& [src, dst] : pairs) removed[src] = true;
                for (std::size_t i = 0; i < sizes.size(); ++i)
                    if (!removed[i]) next.push_back(merged_sizes[i]);
                sizes = std::move(next);
            }
            x = ffn_sublayer(x, stage, l);
            if (counts) counts->push_back(x.rows());
        }
        return x;
    };

    BenchReport report;
    report.iterations = iterations;
    forward(true, &report.merged_token_counts);

    auto time_loop = [&](bool merge) {
        for (int w = 0; w < 3; ++w) forward(merge, nullptr);  // warmup
        std::vector<double> ns;
        ns.reserve(iterations);
        volatile double sink = 0.0;
        for (std::uint32_t i = 0; i < iterations; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            const Eigen::MatrixXd out = forward(merge, nullptr);
            const auto t1 = std::chrono::steady_clock::now();
            sink = sink + out(0, 0);
            ns.push_back(static_cast<double>(
                std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
        }
        return detail::median_ns(ns);
    };

    const double t_unmerged = time_loop(false);
    const double t_merged = time_loop(true);
    report.unmerged_images_per_sec = 1e9 / t_unmerged;
    report.merged_images_per_sec = 1e9 / t_merged;
    report.speedup = t_unmerged / t_merged;
    return report;
}

}  // namespace semcode
