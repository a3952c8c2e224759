#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "softcca/cli.hpp"
#include "softcca/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"softcca: multi-view representation learning with soft decorrelation"};
    app.require_subcommand(1);

    std::string config_path, out_dir, resume_path, checkpoint_path, mode;
    std::string test_images, test_labels;
    std::int64_t seed = -1;

    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config file");
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
        cmd->add_option("--seed", seed, "training seed (overrides config)");
        cmd->add_option("--resume", resume_path, "resume from a checkpoint");
    };

    CLI::App* train_cca = app.add_subcommand("train-cca", "train a Soft CCA model");
    add_train_flags(train_cca);
    CLI::App* train_fae = app.add_subcommand("train-fae", "train a factorisation autoencoder");
    add_train_flags(train_fae);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--mode", mode,
                     "correlation | crossview_l2r | crossview_r2l | disentanglement");
    eval->add_option("--out", out_dir, "output directory")->required();
    eval->add_option("--test-images", test_images, "override test images path");
    eval->add_option("--test-labels", test_labels, "override test labels path");

    CLI::App* sheet = app.add_subcommand("style-sheet", "write a style-transfer grid (PGM)");
    sheet->add_option("--checkpoint", checkpoint_path, "train-fae checkpoint")->required();
    sheet->add_option("--out", out_dir, "output directory")->required();
    sheet->add_option("--test-images", test_images, "override style-source images path");
    sheet->add_option("--test-labels", test_labels, "override style-source labels path");

    std::vector<std::size_t> k_list{128, 256, 512, 1024, 2048};
    std::size_t bench_m = 64, bench_reps = 20, bench_warmup = 3;
    std::int64_t bench_seed = 7;
    CLI::App* bench = app.add_subcommand("bench-decorr", "time SDL vs exact decorrelation");
    bench->add_option("--k", k_list, "embedding widths (ascending)");
    bench->add_option("--m", bench_m, "batch size");
    bench->add_option("--reps", bench_reps, "timed repetitions per k");
    bench->add_option("--warmup", bench_warmup, "unmeasured warmup runs per k");
    bench->add_option("--seed", bench_seed, "data seed");
    bench->add_option("--out", out_dir, "output directory")->required();

    std::int64_t gc_seed = 42;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->add_option("--seed", gc_seed, "instance seed");

    CLI11_PARSE(app, argc, argv);

    try {
        softcca::CliOverrides ov;
        ov.out_dir = out_dir;
        if (seed >= 0) ov.seed = static_cast<std::uint64_t>(seed);

        if (train_cca->parsed()) {
            if (resume_path.empty() && config_path.empty())
                throw softcca::ConfigError("train-cca: pass --config or --resume");
            softcca::TrainOutput r = resume_path.empty()
                                         ? softcca::run_train_cca(config_path, ov)
                                         : softcca::resume_train_cca(resume_path, ov);
            std::cout << "metrics: " << r.metrics_csv << "\ncheckpoint: " << r.checkpoint
                      << (r.completed ? "" : "\n(stopped early at max_steps)") << "\n";
        } else if (train_fae->parsed()) {
            if (resume_path.empty() && config_path.empty())
                throw softcca::ConfigError("train-fae: pass --config or --resume");
            softcca::TrainOutput r = resume_path.empty()
                                         ? softcca::run_train_fae(config_path, ov)
                                         : softcca::resume_train_fae(resume_path, ov);
            std::cout << "metrics: " << r.metrics_csv << "\ncheckpoint: " << r.checkpoint
                      << (r.completed ? "" : "\n(stopped early at max_steps)") << "\n";
        } else if (eval->parsed()) {
            softcca::EvalDataOverride dov{test_images, test_labels};
            std::cout << "report: " << softcca::run_eval(checkpoint_path, mode, out_dir, dov)
                      << "\n";
        } else if (sheet->parsed()) {
            softcca::EvalDataOverride dov{test_images, test_labels};
            std::cout << "sheet: " << softcca::run_style_sheet(checkpoint_path, out_dir, dov)
                      << "\n";
        } else if (bench->parsed()) {
            softcca::BenchResult r = softcca::run_bench_decorr(
                k_list, bench_m, bench_reps, bench_warmup,
                static_cast<std::uint64_t>(bench_seed), out_dir);
            for (const auto& row : r.rows)
                std::cout << row.method << " k=" << row.k << " median=" << row.median_seconds
                          << "s (inner=" << row.inner << ")\n";
            std::cout << "sdl slope = " << r.sdl_slope << "\nexact slope = " << r.exact_slope
                      << "\n";
        } else if (gradcheck->parsed()) {
            const double worst =
                softcca::run_gradcheck(std::cout, static_cast<std::uint64_t>(gc_seed));
            return worst < 1e-4 ? 0 : 1;
        }
        return 0;
    } catch (const softcca::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
