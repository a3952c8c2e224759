#include "softcca/fae.hpp"

#include <cmath>
#include <cstdio>

#include "softcca/classifier.hpp"
#include "softcca/data.hpp"

namespace softcca {

DecorrKind decorr_kind_from_string(const std::string& s) {
    if (s == "none") return DecorrKind::none;
    if (s == "sdl") return DecorrKind::sdl;
    if (s == "decov") return DecorrKind::decov;
    if (s == "decov_l1") return DecorrKind::decov_l1;
    if (s == "decov_gc") return DecorrKind::decov_gc;
    if (s == "xcov") return DecorrKind::xcov;
    throw ConfigError("unknown decorrelation variant '" + s + "'");
}

std::string to_string(DecorrKind k) {
    switch (k) {
        case DecorrKind::none: return "none";
        case DecorrKind::sdl: return "sdl";
        case DecorrKind::decov: return "decov";
        case DecorrKind::decov_l1: return "decov_l1";
        case DecorrKind::decov_gc: return "decov_gc";
        case DecorrKind::xcov: return "xcov";
    }
    throw Error("unreachable");
}

namespace {

std::vector<LayerSpec> stack_spec(std::size_t in, const std::vector<std::size_t>& hidden,
                                  std::size_t out) {
    std::vector<LayerSpec> layers;
    std::size_t prev = in;
    for (std::size_t h : hidden) {
        layers.push_back(affine_layer(prev, h));
        layers.push_back(relu_layer(h));
        prev = h;
    }
    layers.push_back(affine_layer(prev, out)); // code/output layers stay linear
    return layers;
}

FaeModel build_fae(const FaeConfig& cfg, std::size_t input_dim) {
    if (cfg.class_dim == 0 || cfg.style_dim == 0)
        throw ConfigError("fae: class_dim and style_dim must be positive");
    FaeModel m;
    Rng enc_rng(mix_seed(cfg.seed, 11));
    Rng dec_rng(mix_seed(cfg.seed, 12));
    Rng bn_rng(mix_seed(cfg.seed, 13));
    const std::size_t code = cfg.class_dim + cfg.style_dim;
    m.encoder = make_mlp(stack_spec(input_dim, cfg.enc_hidden, code), enc_rng);
    m.decoder = make_mlp(stack_spec(code, cfg.dec_hidden, input_dim), dec_rng);
    m.code_norm = make_mlp({batchnorm_layer(code)}, bn_rng);
    m.sdl = SdlState(code, cfg.alpha);
    m.class_dim = cfg.class_dim;
    m.style_dim = cfg.style_dim;
    return m;
}

// Mean per-pixel squared error and its gradient wrt the reconstruction.
LossGrad reconstruction_loss(const Matrix& xhat, const Matrix& x) {
    if (!xhat.same_shape(x)) throw ShapeError("reconstruction_loss: shapes differ");
    LossGrad out;
    out.grad = Matrix(x.rows(), x.cols());
    const double scale = 1.0 / static_cast<double>(x.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = xhat.data()[i] - x.data()[i];
        acc += d * d;
        out.grad.data()[i] = 2.0 * d * scale;
    }
    out.loss = acc * scale;
    return out;
}

} // namespace

FaeTrainer::FaeTrainer(const FaeConfig& cfg, std::size_t input_dim)
    : cfg_(cfg), model_(build_fae(cfg, input_dim)) {
    opt_.lr = cfg.lr;
    opt_.momentum = cfg.momentum;
}

FaeStep fae_loss_grads(FaeModel& model, DecorrKind kind, double lambda1, double lambda2,
                       const Matrix& x, const std::vector<int>& y) {
    const std::size_t m = x.rows();
    const std::size_t p = model.class_dim, q = model.style_dim;

    ForwardTrace enc = forward(model.encoder, x, Mode::train);
    const Matrix& code = enc.output();
    ForwardTrace dec = forward(model.decoder, code, Mode::train);

    LossGrad rec = reconstruction_loss(dec.output(), x);

    Matrix y_logits(m, p);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) y_logits(i, j) = code(i, j);
    LossGrad cla = softmax_cross_entropy(y_logits, y);

    FaeStep step;
    // Decoder pulls gradient back to the code.
    step.dec_grads = backward(model.decoder, dec, rec.grad, /*want_input_grad=*/true);
    Matrix code_grad = std::move(step.dec_grads.input);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) code_grad(i, j) += lambda1 * cla.grad(i, j);

    double decorr_loss = 0.0;
    switch (kind) {
        case DecorrKind::none:
            break;
        case DecorrKind::xcov: {
            Matrix yc(m, p), zc(m, q);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < p; ++j) yc(i, j) = code(i, j);
                for (std::size_t j = 0; j < q; ++j) zc(i, j) = code(i, p + j);
            }
            XcovResult xr = xcov_loss_grad(yc, zc);
            decorr_loss = xr.loss;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < p; ++j)
                    code_grad(i, j) += lambda2 * xr.grad_y(i, j);
                for (std::size_t j = 0; j < q; ++j)
                    code_grad(i, p + j) += lambda2 * xr.grad_z(i, j);
            }
            break;
        }
        default: {
            // sdl / decov / decov_l1 / decov_gc act on the batch-normalized code.
            ForwardTrace bn = forward(model.code_norm, code, Mode::train);
            const Matrix& w = bn.output();
            Matrix w_grad;
            if (kind == DecorrKind::sdl) {
                SdlUpdate u = sdl_update(model.sdl, w);
                decorr_loss = u.loss;
                w_grad = sdl_gradient(model.sdl, u.approx_cov, w);
            } else {
                DecovVariant v = kind == DecorrKind::decov ? DecovVariant::decov
                                 : kind == DecorrKind::decov_l1 ? DecovVariant::decov_l1
                                                                : DecovVariant::decov_gc;
                LossGrad lg = decov_loss_grad(w, v,
                                              v == DecovVariant::decov_gc ? &model.sdl : nullptr);
                decorr_loss = lg.loss;
                w_grad = std::move(lg.grad);
            }
            w_grad *= lambda2;
            step.bn_grads = backward(model.code_norm, bn, w_grad, /*want_input_grad=*/true);
            step.has_bn_grads = true;
            code_grad += step.bn_grads.input;
            break;
        }
    }

    step.enc_grads = backward(model.encoder, enc, code_grad, /*want_input_grad=*/false);
    step.rec = rec.loss;
    step.cla = cla.loss;
    step.decorr = decorr_loss;
    step.total = rec.loss + lambda1 * cla.loss + lambda2 * decorr_loss;
    return step;
}

void FaeTrainer::train_step(const Matrix& x, const std::vector<int>& y) {
    FaeStep step = fae_loss_grads(model_, cfg_.decorr, cfg_.lambda1, cfg_.lambda2, x, y);
    if (!std::isfinite(step.total))
        throw DivergenceError("fae_train: non-finite loss at step " +
                              std::to_string(global_step + 1));

    auto params = trainable_params(model_.encoder);
    auto grads = gradient_list(model_.encoder, step.enc_grads);
    auto dp = trainable_params(model_.decoder);
    auto dg = gradient_list(model_.decoder, step.dec_grads);
    params.insert(params.end(), dp.begin(), dp.end());
    grads.insert(grads.end(), dg.begin(), dg.end());
    if (step.has_bn_grads) {
        auto bp = trainable_params(model_.code_norm);
        auto bg = gradient_list(model_.code_norm, step.bn_grads);
        params.insert(params.end(), bp.begin(), bp.end());
        grads.insert(grads.end(), bg.begin(), bg.end());
    }
    opt_.step(params, grads);

    acc_rec += step.rec;
    acc_cla += step.cla;
    acc_decorr += step.decorr;
    step_in_epoch += 1;
    global_step += 1;
}

bool FaeTrainer::run(const Matrix& images, const std::vector<int>& labels,
                     const std::function<void(const FaeEpochMetrics&)>& emit,
                     const std::function<void()>& step_hook) {
    if (labels.size() != images.rows()) throw ShapeError("fae_train: labels misaligned");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= model_.class_dim)
            throw ConfigError("fae_train: label " + std::to_string(l) + " out of range");
    BatchPlan plan{cfg_.batch_size, cfg_.seed, cfg_.drop_last};

    while (epoch < cfg_.epochs) {
        const auto batches = batch_indices(images.rows(), plan, epoch);
        if (step_in_epoch == 0 && cfg_.sdl_reset_per_epoch) model_.sdl.reset();
        while (step_in_epoch < batches.size()) {
            if (cfg_.max_steps != 0 && global_step >= cfg_.max_steps) return false;
            const auto& idx = batches[step_in_epoch];
            train_step(gather_rows(images, idx), gather_labels(labels, idx));
            if (step_hook) step_hook();
        }

        FaeEpochMetrics m;
        m.epoch = epoch;
        const double steps = static_cast<double>(batches.size());
        m.rec = acc_rec / steps;
        m.cla = acc_cla / steps;
        m.decorr = acc_decorr / steps;
        m.total = m.rec + cfg_.lambda1 * m.cla + cfg_.lambda2 * m.decorr;
        emit(m);

        acc_rec = acc_cla = acc_decorr = 0.0;
        step_in_epoch = 0;
        epoch += 1;
    }
    model_.y_scale = compute_y_scale(model_, images);
    return true;
}

Matrix fae_encode(const FaeModel& m, const Matrix& images) {
    return forward_eval(m.encoder, images);
}

Matrix fae_decode(const FaeModel& m, const Matrix& codes) {
    return forward_eval(m.decoder, codes);
}

double compute_y_scale(const FaeModel& m, const Matrix& images) {
    const Matrix codes = fae_encode(m, images);
    double acc = 0.0;
    for (std::size_t i = 0; i < codes.rows(); ++i) {
        double best = 0.0;
        for (std::size_t j = 0; j < m.class_dim; ++j)
            best = std::max(best, std::fabs(codes(i, j)));
        acc += best;
    }
    return codes.rows() == 0 ? 1.0 : acc / static_cast<double>(codes.rows());
}

DisentanglementScores disentanglement_eval(const FaeModel& m, const Matrix& train_images,
                                           const std::vector<int>& train_labels,
                                           const Matrix& test_images,
                                           const std::vector<int>& test_labels,
                                           std::uint64_t seed) {
    DisentanglementScores s;
    const Matrix test_codes = fae_encode(m, test_images);
    Matrix y_logits(test_codes.rows(), m.class_dim);
    for (std::size_t i = 0; i < test_codes.rows(); ++i)
        for (std::size_t j = 0; j < m.class_dim; ++j) y_logits(i, j) = test_codes(i, j);
    s.acc_y = 100.0 * argmax_accuracy(y_logits, test_labels);

    const Matrix train_codes = fae_encode(m, train_images);
    auto z_part = [&](const Matrix& codes) {
        Matrix z(codes.rows(), m.style_dim);
        for (std::size_t i = 0; i < codes.rows(); ++i)
            for (std::size_t j = 0; j < m.style_dim; ++j) z(i, j) = codes(i, m.class_dim + j);
        return z;
    };
    SoftmaxTrainConfig cfg;
    cfg.seed = mix_seed(seed, 77);
    SoftmaxClassifier probe = train_softmax(z_part(train_codes), train_labels,
                                            static_cast<int>(m.class_dim), cfg);
    s.acc_z = 100.0 * classifier_accuracy(probe, z_part(test_codes), test_labels);
    return s;
}

std::vector<double> style_transfer(const FaeModel& m, std::span<const double> image,
                                   int target_class) {
    if (target_class < 0 || static_cast<std::size_t>(target_class) >= m.class_dim)
        throw ConfigError("style_transfer: class id " + std::to_string(target_class) +
                          " out of range");
    Matrix x(1, image.size());
    std::copy(image.begin(), image.end(), x.data());
    Matrix code = fae_encode(m, x);
    for (std::size_t j = 0; j < m.class_dim; ++j)
        code(0, j) = (static_cast<std::size_t>(target_class) == j) ? m.y_scale : 0.0;
    Matrix out = fae_decode(m, code);
    std::vector<double> pixels(out.data(), out.data() + out.size());
    for (double& v : pixels) v = std::clamp(v, 0.0, 1.0);
    return pixels;
}

Matrix style_sheet(const FaeModel& m, const Matrix& style_images) {
    if (style_images.cols() != 784)
        throw ShapeError("style_sheet: expected 784-pixel images");
    const std::size_t rows = style_images.rows();
    const std::size_t classes = m.class_dim;
    Matrix sheet(rows * 28, classes * 28);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < classes; ++c) {
            const auto pix = style_transfer(m, style_images.row(r), static_cast<int>(c));
            for (std::size_t i = 0; i < 28; ++i)
                for (std::size_t j = 0; j < 28; ++j)
                    sheet(r * 28 + i, c * 28 + j) = pix[i * 28 + j];
        }
    }
    return sheet;
}

void write_pgm(const std::string& path, const Matrix& image01) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("cannot write " + path);
    std::fprintf(f, "P5\n%zu %zu\n255\n", image01.cols(), image01.rows());
    std::vector<std::uint8_t> row(image01.cols());
    for (std::size_t i = 0; i < image01.rows(); ++i) {
        for (std::size_t j = 0; j < image01.cols(); ++j) {
            const double v = std::clamp(image01(i, j), 0.0, 1.0);
            row[j] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
        std::fwrite(row.data(), 1, row.size(), f);
    }
    std::fclose(f);
}

} // namespace softcca
