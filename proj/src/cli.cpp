#include "softcca/cli.hpp"

#include <filesystem>
#include <iomanip>

#include "softcca/checkpoint.hpp"
#include "softcca/csv.hpp"
#include "softcca/gradcheck.hpp"

namespace softcca {

namespace fs = std::filesystem;

namespace {

constexpr double kKindCca = 1.0;
constexpr double kKindFae = 2.0;

struct LoadedCcaData {
    PairedDataset train;
    std::optional<PairedDataset> heldout;
};

LoadedCcaData load_cca_data(const DataSpec& spec) {
    LoadedCcaData out;
    if (spec.kind == "mnist_halves") {
        auto [pixels, labels] = load_idx(spec.images, spec.labels);
        PairedDataset full = split_halves(pixels, labels);
        out.train = spec.subset > 0 ? subset_shuffled(full, spec.subset, spec.subset_seed)
                                    : std::move(full);
        if (!spec.test_images.empty()) {
            auto [tp, tl] = load_idx(spec.test_images, spec.test_labels);
            out.heldout = split_halves(tp, tl);
        }
    } else if (spec.kind == "synth_pair") {
        out.train = synth_correlated(spec.synth).data;
        if (spec.heldout > 0) {
            SynthSpec h = spec.synth;
            h.n = spec.heldout;
            h.seed = mix_seed(spec.synth.seed, 9999);
            out.heldout = synth_correlated(h).data;
        }
    } else {
        throw ConfigError("train-cca expects data.kind = mnist_halves or synth_pair");
    }
    return out;
}

struct LoadedFaeData {
    Matrix train_images;
    std::vector<int> train_labels;
    Matrix test_images;
    std::vector<int> test_labels;
    bool has_test = false;
};

LoadedFaeData load_fae_data(const DataSpec& spec) {
    if (spec.kind != "mnist") throw ConfigError("train-fae expects data.kind = mnist");
    LoadedFaeData out;
    auto [pixels, labels] = load_idx(spec.images, spec.labels);
    if (spec.subset > 0 && spec.subset < pixels.rows()) {
        std::vector<std::uint32_t> order(pixels.rows());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
        Rng rng(spec.subset_seed);
        rng.shuffle(order);
        order.resize(spec.subset);
        out.train_images = gather_rows(pixels, order);
        out.train_labels = gather_labels(labels, order);
    } else {
        out.train_images = std::move(pixels);
        out.train_labels = std::move(labels);
    }
    if (!spec.test_images.empty()) {
        auto [tp, tl] = load_idx(spec.test_images, spec.test_labels);
        out.test_images = std::move(tp);
        out.test_labels = std::move(tl);
        out.has_test = true;
    }
    return out;
}

void store_mlp(TensorStore& ts, MlpModel& m, const std::string& prefix) {
    for (auto& [name, mat] : named_state(m, prefix)) ts.put(name, *mat);
}

void restore_mlp(const TensorStore& ts, MlpModel& m, const std::string& prefix) {
    for (auto& [name, mat] : named_state(m, prefix)) {
        const Matrix& stored = ts.get(name);
        if (!stored.same_shape(*mat))
            throw CompatibilityError("checkpoint tensor '" + name + "' has shape " +
                                     std::to_string(stored.rows()) + "x" +
                                     std::to_string(stored.cols()) + ", model expects " +
                                     std::to_string(mat->rows()) + "x" +
                                     std::to_string(mat->cols()));
        *mat = stored;
    }
}

void store_optimizer(TensorStore& ts, const SgdMomentum& opt) {
    ts.put_scalar("opt/count", static_cast<double>(opt.velocity.size()));
    for (std::size_t i = 0; i < opt.velocity.size(); ++i)
        ts.put("opt/v" + std::to_string(i), opt.velocity[i]);
}

void restore_optimizer(const TensorStore& ts, SgdMomentum& opt) {
    const std::size_t n = static_cast<std::size_t>(ts.scalar("opt/count"));
    opt.velocity.clear();
    opt.velocity.reserve(n);
    for (std::size_t i = 0; i < n; ++i) opt.velocity.push_back(ts.get("opt/v" + std::to_string(i)));
}

void store_sdl(TensorStore& ts, const SdlState& s, const std::string& prefix) {
    ts.put(prefix + "/accum", s.accum);
    ts.put_scalar(prefix + "/norm_factor", s.norm_factor);
    ts.put_scalar(prefix + "/step", static_cast<double>(s.step));
}

void restore_sdl(const TensorStore& ts, SdlState& s, const std::string& prefix) {
    const Matrix& accum = ts.get(prefix + "/accum");
    if (!accum.same_shape(s.accum))
        throw CompatibilityError("checkpoint accumulator '" + prefix + "' dimension mismatch");
    s.accum = accum;
    s.norm_factor = ts.scalar(prefix + "/norm_factor");
    s.step = static_cast<std::uint64_t>(ts.scalar(prefix + "/step"));
}

std::string prepare_out_dir(const std::string& dir) {
    fs::create_directories(dir);
    return dir;
}

// --- Soft CCA training command ---------------------------------------------

Checkpoint snapshot_cca(const std::string& config_text, SoftCcaTrainer& tr, std::size_t d1,
                        std::size_t d2) {
    Checkpoint ck;
    ck.config_text = config_text;
    TensorStore& ts = ck.tensors;
    ts.put_scalar("meta/kind", kKindCca);
    ts.put_scalar("meta/d1", static_cast<double>(d1));
    ts.put_scalar("meta/d2", static_cast<double>(d2));
    store_mlp(ts, tr.model().branch1, "branch1");
    store_mlp(ts, tr.model().branch2, "branch2");
    store_optimizer(ts, tr.optimizer());
    store_sdl(ts, tr.model().sdl1, "sdl1");
    store_sdl(ts, tr.model().sdl2, "sdl2");
    ts.put_scalar("trainer/epoch", static_cast<double>(tr.epoch));
    ts.put_scalar("trainer/step_in_epoch", static_cast<double>(tr.step_in_epoch));
    ts.put_scalar("trainer/global_step", static_cast<double>(tr.global_step));
    ts.put_scalar("trainer/acc_dist", tr.acc_dist);
    ts.put_scalar("trainer/acc_sdl1", tr.acc_sdl1);
    ts.put_scalar("trainer/acc_sdl2", tr.acc_sdl2);
    return ck;
}

void restore_cca(const Checkpoint& ck, SoftCcaTrainer& tr) {
    const TensorStore& ts = ck.tensors;
    restore_mlp(ts, tr.model().branch1, "branch1");
    restore_mlp(ts, tr.model().branch2, "branch2");
    restore_optimizer(ts, tr.optimizer());
    restore_sdl(ts, tr.model().sdl1, "sdl1");
    restore_sdl(ts, tr.model().sdl2, "sdl2");
    tr.epoch = static_cast<std::uint64_t>(ts.scalar("trainer/epoch"));
    tr.step_in_epoch = static_cast<std::uint64_t>(ts.scalar("trainer/step_in_epoch"));
    tr.global_step = static_cast<std::uint64_t>(ts.scalar("trainer/global_step"));
    tr.acc_dist = ts.scalar("trainer/acc_dist");
    tr.acc_sdl1 = ts.scalar("trainer/acc_sdl1");
    tr.acc_sdl2 = ts.scalar("trainer/acc_sdl2");
}

TrainOutput drive_cca(const std::string& config_text, const CliOverrides& ov,
                      const Checkpoint* resume_from) {
    ConfigFile cfg = ConfigFile::parse_string(config_text, "<config>");
    CcaExperiment exp = load_cca_experiment(cfg);
    if (!ov.out_dir.empty()) exp.out_dir = ov.out_dir;
    if (ov.seed) exp.train.seed = *ov.seed;

    LoadedCcaData data = load_cca_data(exp.data);
    const std::size_t d1 = data.train.view1.cols();
    const std::size_t d2 = data.train.view2.cols();

    SoftCcaTrainer trainer(exp.train, d1, d2);
    if (resume_from != nullptr) restore_cca(*resume_from, trainer);

    TrainOutput out;
    prepare_out_dir(exp.out_dir);
    out.metrics_csv = exp.out_dir + "/metrics.csv";
    out.checkpoint = exp.out_dir + "/checkpoint.ckpt";

    CsvWriter csv(out.metrics_csv,
                  {"epoch", "dist_loss", "sdl1", "sdl2", "total", "corr_strength_heldout"},
                  /*append=*/resume_from != nullptr);

    auto emit = [&](const CcaEpochMetrics& m) {
        csv.row({std::to_string(m.epoch), format_double(m.dist_loss), format_double(m.sdl1),
                 format_double(m.sdl2), format_double(m.total),
                 m.heldout_corr ? format_double(*m.heldout_corr) : std::string{}});
    };
    auto checkpoint_now = [&] {
        save_checkpoint(out.checkpoint, snapshot_cca(config_text, trainer, d1, d2));
    };
    std::function<void()> hook;
    if (exp.checkpoint_every > 0)
        hook = [&, every = exp.checkpoint_every] {
            if (trainer.global_step % every == 0) checkpoint_now();
        };

    const PairedDataset* heldout =
        exp.eval_heldout && data.heldout.has_value() ? &*data.heldout : nullptr;
    out.completed = trainer.run(data.train, heldout, emit, hook);
    csv.flush();
    checkpoint_now();
    return out;
}

// --- FAE training command ---------------------------------------------------

Checkpoint snapshot_fae(const std::string& config_text, FaeTrainer& tr, std::size_t input_dim) {
    Checkpoint ck;
    ck.config_text = config_text;
    TensorStore& ts = ck.tensors;
    ts.put_scalar("meta/kind", kKindFae);
    ts.put_scalar("meta/input_dim", static_cast<double>(input_dim));
    store_mlp(ts, tr.model().encoder, "encoder");
    store_mlp(ts, tr.model().decoder, "decoder");
    store_mlp(ts, tr.model().code_norm, "code_norm");
    store_optimizer(ts, tr.optimizer());
    store_sdl(ts, tr.model().sdl, "sdl");
    ts.put_scalar("fae/y_scale", tr.model().y_scale);
    ts.put_scalar("trainer/epoch", static_cast<double>(tr.epoch));
    ts.put_scalar("trainer/step_in_epoch", static_cast<double>(tr.step_in_epoch));
    ts.put_scalar("trainer/global_step", static_cast<double>(tr.global_step));
    ts.put_scalar("trainer/acc_rec", tr.acc_rec);
    ts.put_scalar("trainer/acc_cla", tr.acc_cla);
    ts.put_scalar("trainer/acc_decorr", tr.acc_decorr);
    return ck;
}

void restore_fae(const Checkpoint& ck, FaeTrainer& tr) {
    const TensorStore& ts = ck.tensors;
    restore_mlp(ts, tr.model().encoder, "encoder");
    restore_mlp(ts, tr.model().decoder, "decoder");
    restore_mlp(ts, tr.model().code_norm, "code_norm");
    restore_optimizer(ts, tr.optimizer());
    restore_sdl(ts, tr.model().sdl, "sdl");
    tr.model().y_scale = ts.scalar("fae/y_scale");
    tr.epoch = static_cast<std::uint64_t>(ts.scalar("trainer/epoch"));
    tr.step_in_epoch = static_cast<std::uint64_t>(ts.scalar("trainer/step_in_epoch"));
    tr.global_step = static_cast<std::uint64_t>(ts.scalar("trainer/global_step"));
    tr.acc_rec = ts.scalar("trainer/acc_rec");
    tr.acc_cla = ts.scalar("trainer/acc_cla");
    tr.acc_decorr = ts.scalar("trainer/acc_decorr");
}

TrainOutput drive_fae(const std::string& config_text, const CliOverrides& ov,
                      const Checkpoint* resume_from) {
    ConfigFile cfg = ConfigFile::parse_string(config_text, "<config>");
    FaeExperiment exp = load_fae_experiment(cfg);
    if (!ov.out_dir.empty()) exp.out_dir = ov.out_dir;
    if (ov.seed) exp.train.seed = *ov.seed;

    LoadedFaeData data = load_fae_data(exp.data);
    const std::size_t input_dim = data.train_images.cols();

    FaeTrainer trainer(exp.train, input_dim);
    if (resume_from != nullptr) restore_fae(*resume_from, trainer);

    TrainOutput out;
    prepare_out_dir(exp.out_dir);
    out.metrics_csv = exp.out_dir + "/metrics.csv";
    out.checkpoint = exp.out_dir + "/checkpoint.ckpt";

    CsvWriter csv(out.metrics_csv, {"epoch", "rec_loss", "cla_loss", "decorr_loss", "total"},
                  /*append=*/resume_from != nullptr);
    auto emit = [&](const FaeEpochMetrics& m) {
        csv.row({std::to_string(m.epoch), format_double(m.rec), format_double(m.cla),
                 format_double(m.decorr), format_double(m.total)});
    };
    auto checkpoint_now = [&] {
        save_checkpoint(out.checkpoint, snapshot_fae(config_text, trainer, input_dim));
    };
    std::function<void()> hook;
    if (exp.checkpoint_every > 0)
        hook = [&, every = exp.checkpoint_every] {
            if (trainer.global_step % every == 0) checkpoint_now();
        };

    out.completed = trainer.run(data.train_images, data.train_labels, emit, hook);
    csv.flush();
    checkpoint_now();
    return out;
}

std::string read_file(const std::string& path) {
    ConfigFile parsed = ConfigFile::parse_file(path); // validates syntax early
    return parsed.text();
}

} // namespace

TrainOutput run_train_cca(const std::string& config_path, const CliOverrides& ov) {
    return drive_cca(read_file(config_path), ov, nullptr);
}

TrainOutput run_train_fae(const std::string& config_path, const CliOverrides& ov) {
    return drive_fae(read_file(config_path), ov, nullptr);
}

TrainOutput resume_train_cca(const std::string& checkpoint_path, const CliOverrides& ov) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    if (ck.tensors.scalar("meta/kind") != kKindCca)
        throw CompatibilityError(checkpoint_path + " is not a train-cca checkpoint");
    return drive_cca(ck.config_text, ov, &ck);
}

TrainOutput resume_train_fae(const std::string& checkpoint_path, const CliOverrides& ov) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    if (ck.tensors.scalar("meta/kind") != kKindFae)
        throw CompatibilityError(checkpoint_path + " is not a train-fae checkpoint");
    return drive_fae(ck.config_text, ov, &ck);
}

namespace {

// Rebuilds a trained CCA model (and its experiment description) from a
// checkpoint so eval commands can embed new data.
struct CcaBundle {
    CcaExperiment exp;
    SoftCcaModel model;
};

CcaBundle load_cca_bundle(const Checkpoint& ck) {
    ConfigFile cfg = ConfigFile::parse_string(ck.config_text, "<checkpoint config>");
    CcaBundle b{load_cca_experiment(cfg), SoftCcaModel{}};
    const std::size_t d1 = static_cast<std::size_t>(ck.tensors.scalar("meta/d1"));
    const std::size_t d2 = static_cast<std::size_t>(ck.tensors.scalar("meta/d2"));
    b.model = soft_cca_init(b.exp.train, d1, d2);
    restore_mlp(ck.tensors, b.model.branch1, "branch1");
    restore_mlp(ck.tensors, b.model.branch2, "branch2");
    restore_sdl(ck.tensors, b.model.sdl1, "sdl1");
    restore_sdl(ck.tensors, b.model.sdl2, "sdl2");
    return b;
}

struct FaeBundle {
    FaeExperiment exp;
    FaeModel model;
};

FaeBundle load_fae_bundle(const Checkpoint& ck) {
    ConfigFile cfg = ConfigFile::parse_string(ck.config_text, "<checkpoint config>");
    FaeBundle b{load_fae_experiment(cfg), FaeModel{}};
    const std::size_t input_dim = static_cast<std::size_t>(ck.tensors.scalar("meta/input_dim"));
    FaeTrainer scaffold(b.exp.train, input_dim);
    b.model = std::move(scaffold.model());
    restore_mlp(ck.tensors, b.model.encoder, "encoder");
    restore_mlp(ck.tensors, b.model.decoder, "decoder");
    restore_mlp(ck.tensors, b.model.code_norm, "code_norm");
    restore_sdl(ck.tensors, b.model.sdl, "sdl");
    b.model.y_scale = ck.tensors.scalar("fae/y_scale");
    return b;
}

PairedDataset eval_halves(const CcaBundle& b, const EvalDataOverride& ov) {
    const std::string images = !ov.test_images.empty() ? ov.test_images : b.exp.data.test_images;
    const std::string labels = !ov.test_labels.empty() ? ov.test_labels : b.exp.data.test_labels;
    if (b.exp.data.kind == "synth_pair") {
        SynthSpec h = b.exp.data.synth;
        h.n = b.exp.data.heldout > 0 ? b.exp.data.heldout : h.n;
        h.seed = mix_seed(b.exp.data.synth.seed, 9999);
        return synth_correlated(h).data;
    }
    if (images.empty() || labels.empty())
        throw ConfigError("eval: no test data in the checkpoint config; pass --test-images/--test-labels");
    auto [pixels, lab] = load_idx(images, labels);
    return split_halves(pixels, lab);
}

} // namespace

std::string run_eval(const std::string& checkpoint_path, const std::string& mode,
                     const std::string& out_dir, const EvalDataOverride& data) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    prepare_out_dir(out_dir);
    const double kind = ck.tensors.scalar("meta/kind");

    if (kind == kKindCca) {
        CcaBundle b = load_cca_bundle(ck);
        PairedDataset test = eval_halves(b, data);
        if (test.view1.cols() != b.model.branch1.input_dim() ||
            test.view2.cols() != b.model.branch2.input_dim())
            throw CompatibilityError("eval: data dimensions do not match the checkpointed model");

        const std::function<Matrix(const Matrix&)> embed1 = [&](const Matrix& x) {
            return forward_eval(b.model.branch1, x);
        };
        const std::function<Matrix(const Matrix&)> embed2 = [&](const Matrix& x) {
            return forward_eval(b.model.branch2, x);
        };

        if (mode == "correlation") {
            CorrelationReport rep = correlation_strength(embed1(test.view1), embed2(test.view2));
            const std::string path = out_dir + "/correlation.csv";
            CsvWriter csv(path, {"name", "value"});
            for (std::size_t i = 0; i < rep.per_dim.size(); ++i)
                csv.row({"per_dim[" + std::to_string(i) + "]", format_double(rep.per_dim[i])});
            csv.row({"total", format_double(rep.total)});
            csv.row({"upper_bound", std::to_string(rep.upper_bound)});
            return path;
        }
        if (mode == "crossview_l2r" || mode == "crossview_r2l") {
            if (!test.has_labels()) throw ConfigError("eval: cross-view recognition needs labels");
            const bool l2r = mode == "crossview_l2r";
            FoldAccuracies acc = cross_view_eval(l2r ? embed1 : embed2, l2r ? embed2 : embed1,
                                                 l2r ? test.view1 : test.view2,
                                                 l2r ? test.view2 : test.view1, test.labels, 10,
                                                 5, 20250);
            const std::string path = out_dir + "/" + mode + ".csv";
            CsvWriter csv(path, {"name", "value"});
            for (std::size_t f = 0; f < acc.folds.size(); ++f)
                csv.row({"fold[" + std::to_string(f) + "]", format_double(acc.folds[f])});
            csv.row({"mean", format_double(acc.mean)});
            csv.row({"std", format_double(acc.stddev)});
            return path;
        }
        throw ConfigError("eval: mode must be correlation, crossview_l2r or crossview_r2l");
    }

    if (kind == kKindFae) {
        if (!mode.empty() && mode != "disentanglement")
            throw ConfigError("eval: FAE checkpoints support mode = disentanglement");
        FaeBundle b = load_fae_bundle(ck);
        EvalDataOverride ov = data;
        DataSpec spec = b.exp.data;
        if (!ov.test_images.empty()) spec.test_images = ov.test_images;
        if (!ov.test_labels.empty()) spec.test_labels = ov.test_labels;
        LoadedFaeData d = load_fae_data(spec);
        if (!d.has_test) throw ConfigError("eval: no test data available for disentanglement");
        if (d.test_images.cols() != b.model.encoder.input_dim())
            throw CompatibilityError("eval: data dimensions do not match the checkpointed model");
        DisentanglementScores s = disentanglement_eval(b.model, d.train_images, d.train_labels,
                                                       d.test_images, d.test_labels, 20251);
        const std::string path = out_dir + "/disentanglement.csv";
        CsvWriter csv(path, {"name", "value"});
        csv.row({"acc_y", format_double(s.acc_y)});
        csv.row({"acc_z", format_double(s.acc_z)});
        return path;
    }
    throw FormatError("eval: unrecognized checkpoint kind");
}

std::string run_style_sheet(const std::string& checkpoint_path, const std::string& out_dir,
                            const EvalDataOverride& data) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    if (ck.tensors.scalar("meta/kind") != kKindFae)
        throw CompatibilityError("style-sheet requires a train-fae checkpoint");
    FaeBundle b = load_fae_bundle(ck);
    DataSpec spec = b.exp.data;
    if (!data.test_images.empty()) spec.test_images = data.test_images;
    if (!data.test_labels.empty()) spec.test_labels = data.test_labels;
    LoadedFaeData d = load_fae_data(spec);
    const Matrix& pool = d.has_test ? d.test_images : d.train_images;
    const std::vector<int>& pool_labels = d.has_test ? d.test_labels : d.train_labels;

    // One style source per class: the first occurrence of each digit.
    const std::size_t classes = b.model.class_dim;
    Matrix styles(classes, pool.cols());
    std::vector<bool> found(classes, false);
    std::size_t remaining = classes;
    for (std::size_t i = 0; i < pool.rows() && remaining > 0; ++i) {
        const int c = pool_labels[i];
        if (c >= 0 && static_cast<std::size_t>(c) < classes && !found[c]) {
            for (std::size_t j = 0; j < pool.cols(); ++j) styles(c, j) = pool(i, j);
            found[c] = true;
            --remaining;
        }
    }
    if (remaining > 0) throw DegenerateError("style-sheet: pool is missing some classes");

    prepare_out_dir(out_dir);
    const std::string path = out_dir + "/style_sheet.pgm";
    write_pgm(path, style_sheet(b.model, styles));
    return path;
}

BenchResult run_bench_decorr(const std::vector<std::size_t>& k_list, std::size_t m,
                             std::size_t reps, std::size_t warmup, std::uint64_t seed,
                             const std::string& out_dir) {
    if (k_list.size() < 4) throw ConfigError("bench-decorr: need at least 4 k values");
    for (std::size_t i = 1; i < k_list.size(); ++i)
        if (k_list[i] <= k_list[i - 1]) throw ConfigError("bench-decorr: k list must ascend");
    if (k_list.back() < 8 * k_list.front())
        throw ConfigError("bench-decorr: k list must span at least an 8x range");
    if (reps < 20) throw ConfigError("bench-decorr: need at least 20 reps");

    BenchResult r = bench_decorr(k_list, m, reps, warmup, seed);

    prepare_out_dir(out_dir);
    {
        CsvWriter csv(out_dir + "/timings.csv", {"method", "k", "median_seconds", "reps", "inner"});
        for (const BenchRow& row : r.rows)
            csv.row({row.method, std::to_string(row.k), format_double(row.median_seconds),
                     std::to_string(row.reps), std::to_string(row.inner)});
    }
    {
        CsvWriter csv(out_dir + "/slopes.csv", {"method", "loglog_slope"});
        csv.row({"sdl", format_double(r.sdl_slope)});
        csv.row({"exact", format_double(r.exact_slope)});
    }
    return r;
}

double run_gradcheck(std::ostream& os, std::uint64_t seed) {
    double worst = 0.0;
    for (const GradCheckResult& r : run_gradcheck_suite(seed)) {
        os << std::left << std::setw(28) << r.name << " max_rel_err = " << format_double(r.max_rel_err)
           << "\n";
        worst = std::max(worst, r.max_rel_err);
    }
    os << "worst = " << format_double(worst) << (worst < 1e-4 ? "  [OK]" : "  [FAIL]") << "\n";
    return worst;
}

} // namespace softcca
