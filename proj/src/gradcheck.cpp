#include "softcca/gradcheck.hpp"

#include <cmath>

#include "softcca/cca.hpp"
#include "softcca/classifier.hpp"
#include "softcca/decorr.hpp"
#include "softcca/fae.hpp"
#include "softcca/nn.hpp"
#include "softcca/rng.hpp"

namespace softcca {

double fd_max_rel_err(const std::function<double()>& loss,
                      const std::vector<Matrix*>& params,
                      const std::vector<const Matrix*>& grads, double h) {
    if (params.size() != grads.size())
        throw ShapeError("fd_max_rel_err: parameter/gradient count mismatch");
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& x = *params[p];
        const Matrix& g = *grads[p];
        if (!x.same_shape(g)) throw ShapeError("fd_max_rel_err: gradient shape mismatch");
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double orig = x.data()[i];
            x.data()[i] = orig + h;
            const double lp = loss();
            x.data()[i] = orig - h;
            const double lm = loss();
            x.data()[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double ga = g.data()[i];
            const double rel = std::fabs(ga - fd) / std::max(1e-5, std::fabs(ga) + std::fabs(fd));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

// State with one prior batch absorbed so the normalizer and history are
// nontrivial; the check then exercises the stop-gradient convention.
SdlState warmed_state(Rng& rng, std::size_t k, std::size_t m, double alpha) {
    SdlState s(k, alpha);
    Matrix z0 = random_matrix(rng, m, k);
    (void)sdl_update(s, z0);
    return s;
}

// Moves a freshly initialized model to a generic point. Zero biases make
// exactly-zero activations likely (a fully dead hidden row yields an exact
// zero code), parking downstream relus on their kink where central
// differences are meaningless.
void jitter_params(MlpModel& model, Rng& rng, double sd = 0.1) {
    for (Matrix* p : trainable_params(model))
        for (std::size_t i = 0; i < p->size(); ++i) p->data()[i] += sd * rng.normal();
}

double check_sdl(Rng& rng, std::size_t m, std::size_t k) {
    Matrix z = random_matrix(rng, m, k);
    const SdlState base = warmed_state(rng, k, m, 0.7);

    SdlState s = base;
    SdlUpdate u = sdl_update(s, z);
    Matrix grad = sdl_gradient(s, u.approx_cov, z);

    auto loss = [&] {
        SdlState t = base;
        return sdl_update(t, z).loss;
    };
    return fd_max_rel_err(loss, {&z}, {&grad});
}

double check_decov(Rng& rng, std::size_t m, std::size_t k, DecovVariant v) {
    Matrix z = random_matrix(rng, m, k);
    if (v == DecovVariant::decov_gc) {
        const SdlState base = warmed_state(rng, k, m, 0.7);
        SdlState s = base;
        LossGrad lg = decov_loss_grad(z, v, &s);
        auto loss = [&] {
            SdlState t = base;
            return decov_loss_grad(z, v, &t).loss;
        };
        return fd_max_rel_err(loss, {&z}, {&lg.grad});
    }
    LossGrad lg = decov_loss_grad(z, v);
    auto loss = [&] { return decov_loss_grad(z, v).loss; };
    return fd_max_rel_err(loss, {&z}, {&lg.grad});
}

double check_xcov(Rng& rng, std::size_t m, std::size_t p, std::size_t q) {
    Matrix y = random_matrix(rng, m, p);
    Matrix z = random_matrix(rng, m, q);
    XcovResult r = xcov_loss_grad(y, z);
    auto loss = [&] { return xcov_loss_grad(y, z).loss; };
    return fd_max_rel_err(loss, {&y, &z}, {&r.grad_y, &r.grad_z});
}

double check_l2_dist(Rng& rng, std::size_t m, std::size_t k) {
    Matrix a = random_matrix(rng, m, k);
    Matrix b = random_matrix(rng, m, k);
    DistLoss d = l2_dist_loss(a, b);
    auto loss = [&] { return l2_dist_loss(a, b).loss; };
    return fd_max_rel_err(loss, {&a, &b}, {&d.grad_a, &d.grad_b});
}

// Scalarizes an MLP output with a fixed weighting and checks every
// parameter plus the input.
double check_mlp(Rng& rng, std::vector<LayerSpec> layers, std::size_t m) {
    Rng init_rng(rng.next_u64());
    MlpModel model = make_mlp(std::move(layers), init_rng);
    jitter_params(model, rng);
    Matrix x = random_matrix(rng, m, model.input_dim());
    Matrix probe = random_matrix(rng, m, model.output_dim());

    MlpModel work = model;
    ForwardTrace trace = forward(work, x, Mode::train);
    MlpGradients grads = backward(work, trace, probe, /*want_input_grad=*/true);

    std::vector<Matrix*> params = trainable_params(model);
    params.push_back(&x);
    std::vector<const Matrix*> glist = gradient_list(model, grads);
    glist.push_back(&grads.input);

    auto loss = [&] {
        MlpModel tmp = model; // running stats churn stays local
        const Matrix out = forward(tmp, x, Mode::train).output();
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * probe.data()[i];
        return s;
    };
    return fd_max_rel_err(loss, params, glist);
}

double check_softmax_xent(Rng& rng, std::size_t m, std::size_t c) {
    Matrix logits = random_matrix(rng, m, c);
    std::vector<int> labels(m);
    for (std::size_t i = 0; i < m; ++i) labels[i] = static_cast<int>(rng.below(c));
    LossGrad lg = softmax_cross_entropy(logits, labels);
    auto loss = [&] { return softmax_cross_entropy(logits, labels).loss; };
    return fd_max_rel_err(loss, {&logits}, {&lg.grad});
}

double check_soft_cca_objective(Rng& rng, std::size_t m) {
    SoftCcaConfig cfg;
    cfg.hidden = {5};
    cfg.embed_dim = 3;
    cfg.lambda = 0.7;
    cfg.alpha = 0.6;
    cfg.seed = rng.next_u64();
    SoftCcaModel base = soft_cca_init(cfg, 6, 6);
    jitter_params(base.branch1, rng);
    jitter_params(base.branch2, rng);
    // Warm the accumulators so history is a nonzero frozen constant.
    {
        Matrix w1 = random_matrix(rng, m, 3), w2 = random_matrix(rng, m, 3);
        (void)sdl_update(base.sdl1, w1);
        (void)sdl_update(base.sdl2, w2);
    }
    Matrix x1 = random_matrix(rng, m, 6);
    Matrix x2 = random_matrix(rng, m, 6);

    SoftCcaModel work = base;
    SoftCcaStep step = soft_cca_loss_grads(work, x1, x2);

    SoftCcaModel probe = base; // perturbed in place by the FD loop
    std::vector<Matrix*> params = trainable_params(probe.branch1);
    auto p2 = trainable_params(probe.branch2);
    params.insert(params.end(), p2.begin(), p2.end());
    std::vector<const Matrix*> grads = gradient_list(base.branch1, step.grads1);
    auto g2 = gradient_list(base.branch2, step.grads2);
    grads.insert(grads.end(), g2.begin(), g2.end());

    auto loss = [&] {
        SoftCcaModel tmp = probe;
        return soft_cca_loss_grads(tmp, x1, x2).total;
    };
    return fd_max_rel_err(loss, params, grads);
}

double check_fae_objective(Rng& rng, std::size_t m) {
    FaeConfig cfg;
    cfg.class_dim = 2;
    cfg.style_dim = 2;
    cfg.enc_hidden = {6};
    cfg.dec_hidden = {6};
    cfg.lambda1 = 0.8;
    cfg.lambda2 = 0.5;
    cfg.alpha = 0.6;
    cfg.seed = rng.next_u64();
    FaeTrainer scaffold(cfg, 16);
    FaeModel base = scaffold.model();
    jitter_params(base.encoder, rng);
    jitter_params(base.decoder, rng);
    jitter_params(base.code_norm, rng);
    {
        Matrix w = random_matrix(rng, m, 4);
        (void)sdl_update(base.sdl, w);
    }
    Matrix x(m, 16);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform01();
    std::vector<int> y(m);
    for (std::size_t i = 0; i < m; ++i) y[i] = static_cast<int>(rng.below(2));

    FaeModel work = base;
    FaeStep step = fae_loss_grads(work, cfg.decorr, cfg.lambda1, cfg.lambda2, x, y);

    FaeModel probe = base;
    std::vector<Matrix*> params = trainable_params(probe.encoder);
    auto dp = trainable_params(probe.decoder);
    auto bp = trainable_params(probe.code_norm);
    params.insert(params.end(), dp.begin(), dp.end());
    params.insert(params.end(), bp.begin(), bp.end());
    std::vector<const Matrix*> grads = gradient_list(base.encoder, step.enc_grads);
    auto dg = gradient_list(base.decoder, step.dec_grads);
    auto bg = gradient_list(base.code_norm, step.bn_grads);
    grads.insert(grads.end(), dg.begin(), dg.end());
    grads.insert(grads.end(), bg.begin(), bg.end());

    auto loss = [&] {
        FaeModel tmp = probe;
        return fae_loss_grads(tmp, cfg.decorr, cfg.lambda1, cfg.lambda2, x, y).total;
    };
    return fd_max_rel_err(loss, params, grads);
}

} // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckResult> out;
    auto record = [&](const std::string& name, double err) { out.push_back({name, err}); };

    for (std::size_t m : {std::size_t{2}, std::size_t{8}}) {
        const std::string tag = "(m=" + std::to_string(m) + ")";
        record("sdl" + tag, check_sdl(rng, m, 5));
        record("decov" + tag, check_decov(rng, m, 5, DecovVariant::decov));
        record("decov_l1" + tag, check_decov(rng, m, 5, DecovVariant::decov_l1));
        record("decov_gc" + tag, check_decov(rng, m, 5, DecovVariant::decov_gc));
        record("xcov" + tag, check_xcov(rng, m, 3, 4));
        record("l2_dist" + tag, check_l2_dist(rng, m, 6));
        record("softmax_xent" + tag, check_softmax_xent(rng, m, 4));
        record("affine" + tag, check_mlp(rng, {affine_layer(7, 4)}, m));
        record("relu" + tag, check_mlp(rng, {affine_layer(5, 5), relu_layer(5)}, m));
        record("batchnorm" + tag, check_mlp(rng, {batchnorm_layer(6)}, m));
        record("mlp_composed" + tag,
               check_mlp(rng,
                         {affine_layer(8, 6), relu_layer(6), affine_layer(6, 5), relu_layer(5),
                          affine_layer(5, 4), batchnorm_layer(4)},
                         m));
        record("soft_cca_objective" + tag, check_soft_cca_objective(rng, m));
        record("fae_objective" + tag, check_fae_objective(rng, m));
    }
    return out;
}

} // namespace softcca
