#include "softcca/nn.hpp"

#include <cmath>
#include <string>

namespace softcca {

namespace {

void validate_chain(const std::vector<LayerSpec>& layers) {
    if (layers.empty()) throw ConfigError("MlpModel: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        if (l.in == 0 || l.out == 0) throw ConfigError("MlpModel: zero-sized layer");
        if (l.kind != LayerKind::affine && l.in != l.out)
            throw ConfigError("MlpModel: relu/batchnorm layer must preserve dimension");
        if (i > 0 && layers[i - 1].out != l.in)
            throw ConfigError("MlpModel: layer " + std::to_string(i) + " expects input " +
                              std::to_string(l.in) + " but previous layer outputs " +
                              std::to_string(layers[i - 1].out));
    }
}

} // namespace

bool MlpModel::has_batchnorm() const {
    for (const auto& l : layers)
        if (l.kind == LayerKind::batchnorm) return true;
    return false;
}

MlpModel make_mlp(std::vector<LayerSpec> layers, Rng& rng) {
    validate_chain(layers);
    MlpModel m;
    m.layers = std::move(layers);
    for (const LayerSpec& l : m.layers) {
        if (l.kind == LayerKind::affine) {
            AffineParams p;
            p.weight = Matrix(l.in, l.out);
            p.bias = Matrix(1, l.out);
            const double a = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
            for (std::size_t i = 0; i < p.weight.size(); ++i)
                p.weight.data()[i] = rng.uniform(-a, a);
            m.affines.push_back(std::move(p));
        } else if (l.kind == LayerKind::batchnorm) {
            BatchNormParams p;
            p.gamma = Matrix(1, l.out, 1.0);
            p.beta = Matrix(1, l.out, 0.0);
            p.running_mean = Matrix(1, l.out, 0.0);
            p.running_var = Matrix(1, l.out, 1.0);
            m.norms.push_back(std::move(p));
        }
    }
    return m;
}

ForwardTrace forward(MlpModel& model, const Matrix& x, Mode mode) {
    if (x.cols() != model.input_dim())
        throw ShapeError("forward: input has " + std::to_string(x.cols()) +
                         " columns, model expects " + std::to_string(model.input_dim()));
    if (mode == Mode::train && model.has_batchnorm() && x.rows() < 2)
        throw DegenerateError("forward: train-mode batchnorm needs a batch of at least 2 rows");

    const std::size_t m = x.rows();
    ForwardTrace trace;
    trace.mode = mode;
    trace.activations.reserve(model.layers.size() + 1);
    trace.activations.push_back(x);

    std::size_t ai = 0, bi = 0;
    for (const LayerSpec& l : model.layers) {
        const Matrix& in = trace.activations.back();
        switch (l.kind) {
            case LayerKind::affine: {
                const AffineParams& p = model.affines[ai++];
                Matrix out = matmul(in, p.weight);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < l.out; ++c) out(r, c) += p.bias(0, c);
                trace.activations.push_back(std::move(out));
                break;
            }
            case LayerKind::relu: {
                Matrix out = in;
                for (std::size_t i = 0; i < out.size(); ++i)
                    if (out.data()[i] < 0.0) out.data()[i] = 0.0;
                trace.activations.push_back(std::move(out));
                break;
            }
            case LayerKind::batchnorm: {
                BatchNormParams& p = model.norms[bi];
                const std::size_t d = l.out;
                Matrix out(m, d);
                if (mode == Mode::train) {
                    BnBatchStats stats;
                    stats.mean = Matrix(1, d);
                    stats.var = Matrix(1, d);
                    stats.xhat = Matrix(m, d);
                    for (std::size_t c = 0; c < d; ++c) {
                        double mu = 0.0;
                        for (std::size_t r = 0; r < m; ++r) mu += in(r, c);
                        mu /= static_cast<double>(m);
                        double var = 0.0;
                        for (std::size_t r = 0; r < m; ++r) {
                            const double dv = in(r, c) - mu;
                            var += dv * dv;
                        }
                        var /= static_cast<double>(m);
                        stats.mean(0, c) = mu;
                        stats.var(0, c) = var;
                        const double inv = 1.0 / std::sqrt(var + model.bn_eps);
                        for (std::size_t r = 0; r < m; ++r) {
                            const double xh = (in(r, c) - mu) * inv;
                            stats.xhat(r, c) = xh;
                            out(r, c) = p.gamma(0, c) * xh + p.beta(0, c);
                        }
                        p.running_mean(0, c) = model.bn_momentum * p.running_mean(0, c) +
                                               (1.0 - model.bn_momentum) * mu;
                        p.running_var(0, c) = model.bn_momentum * p.running_var(0, c) +
                                              (1.0 - model.bn_momentum) * var;
                    }
                    trace.bn.push_back(std::move(stats));
                } else {
                    for (std::size_t c = 0; c < d; ++c) {
                        const double inv = 1.0 / std::sqrt(p.running_var(0, c) + model.bn_eps);
                        const double mu = p.running_mean(0, c);
                        for (std::size_t r = 0; r < m; ++r)
                            out(r, c) = p.gamma(0, c) * (in(r, c) - mu) * inv + p.beta(0, c);
                    }
                }
                ++bi;
                trace.activations.push_back(std::move(out));
                break;
            }
        }
    }
    return trace;
}

Matrix forward_eval(const MlpModel& model, const Matrix& x) {
    // Eval mode never writes running statistics, so the const_cast is safe.
    return forward(const_cast<MlpModel&>(model), x, Mode::eval).output();
}

MlpGradients backward(const MlpModel& model, const ForwardTrace& trace,
                      const Matrix& grad_out, bool want_input_grad) {
    if (trace.mode != Mode::train)
        throw StateError("backward: trace was not produced in train mode");
    if (!grad_out.same_shape(trace.output()))
        throw ShapeError("backward: grad_out shape does not match the traced output");

    MlpGradients grads;
    grads.affines.resize(model.affines.size());
    grads.bn.resize(model.norms.size());

    Matrix g = grad_out;
    std::size_t ai = model.affines.size();
    std::size_t bi = model.norms.size();
    const std::size_t m = grad_out.rows();

    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const LayerSpec& l = model.layers[li];
        const Matrix& in = trace.activations[li];
        const bool need_g_in = want_input_grad || li > 0;
        switch (l.kind) {
            case LayerKind::affine: {
                --ai;
                const AffineParams& p = model.affines[ai];
                AffineParams& pg = grads.affines[ai];
                pg.weight = matmul_tn(in, g);
                pg.bias = Matrix(1, l.out);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < l.out; ++c) pg.bias(0, c) += g(r, c);
                if (need_g_in) g = matmul_nt(g, p.weight);
                break;
            }
            case LayerKind::relu: {
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (in.data()[i] <= 0.0) g.data()[i] = 0.0;
                break;
            }
            case LayerKind::batchnorm: {
                --bi;
                const BatchNormParams& p = model.norms[bi];
                const BnBatchStats& st = trace.bn[bi];
                const std::size_t d = l.out;
                Matrix dgamma(1, d), dbeta(1, d);
                Matrix gin(m, d);
                const double mf = static_cast<double>(m);
                for (std::size_t c = 0; c < d; ++c) {
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (std::size_t r = 0; r < m; ++r) {
                        sum_g += g(r, c);
                        sum_gx += g(r, c) * st.xhat(r, c);
                    }
                    dbeta(0, c) = sum_g;
                    dgamma(0, c) = sum_gx;
                    const double inv = 1.0 / std::sqrt(st.var(0, c) + model.bn_eps);
                    const double gscale = p.gamma(0, c) * inv;
                    const double mean_dxhat = sum_g / mf;
                    const double mean_dxhat_x = sum_gx / mf;
                    for (std::size_t r = 0; r < m; ++r)
                        gin(r, c) = gscale * (g(r, c) - mean_dxhat - st.xhat(r, c) * mean_dxhat_x);
                }
                grads.bn[bi] = {std::move(dgamma), std::move(dbeta)};
                g = std::move(gin);
                break;
            }
        }
    }
    if (want_input_grad) grads.input = std::move(g);
    return grads;
}

std::vector<Matrix*> trainable_params(MlpModel& model) {
    std::vector<Matrix*> out;
    std::size_t ai = 0, bi = 0;
    for (const LayerSpec& l : model.layers) {
        if (l.kind == LayerKind::affine) {
            out.push_back(&model.affines[ai].weight);
            out.push_back(&model.affines[ai].bias);
            ++ai;
        } else if (l.kind == LayerKind::batchnorm) {
            out.push_back(&model.norms[bi].gamma);
            out.push_back(&model.norms[bi].beta);
            ++bi;
        }
    }
    return out;
}

std::vector<const Matrix*> gradient_list(const MlpModel& model, const MlpGradients& grads) {
    std::vector<const Matrix*> out;
    std::size_t ai = 0, bi = 0;
    for (const LayerSpec& l : model.layers) {
        if (l.kind == LayerKind::affine) {
            out.push_back(&grads.affines[ai].weight);
            out.push_back(&grads.affines[ai].bias);
            ++ai;
        } else if (l.kind == LayerKind::batchnorm) {
            out.push_back(&grads.bn[bi].first);
            out.push_back(&grads.bn[bi].second);
            ++bi;
        }
    }
    return out;
}

std::vector<std::pair<std::string, Matrix*>> named_state(MlpModel& model, const std::string& prefix) {
    std::vector<std::pair<std::string, Matrix*>> out;
    std::size_t ai = 0, bi = 0, li = 0;
    for (const LayerSpec& l : model.layers) {
        const std::string base = prefix + "/layer" + std::to_string(li);
        if (l.kind == LayerKind::affine) {
            out.emplace_back(base + "/weight", &model.affines[ai].weight);
            out.emplace_back(base + "/bias", &model.affines[ai].bias);
            ++ai;
        } else if (l.kind == LayerKind::batchnorm) {
            out.emplace_back(base + "/gamma", &model.norms[bi].gamma);
            out.emplace_back(base + "/beta", &model.norms[bi].beta);
            out.emplace_back(base + "/running_mean", &model.norms[bi].running_mean);
            out.emplace_back(base + "/running_var", &model.norms[bi].running_var);
            ++bi;
        }
        ++li;
    }
    return out;
}

void SgdMomentum::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
    if (params.size() != grads.size())
        throw ShapeError("sgd_step: parameter/gradient count mismatch");
    if (velocity.empty()) {
        velocity.reserve(params.size());
        for (const Matrix* p : params) velocity.emplace_back(p->rows(), p->cols());
    }
    if (velocity.size() != params.size())
        throw ShapeError("sgd_step: optimizer was initialized for a different model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& p = *params[i];
        const Matrix& g = *grads[i];
        Matrix& v = velocity[i];
        if (!p.same_shape(g) || !p.same_shape(v))
            throw ShapeError("sgd_step: shape mismatch at parameter " + std::to_string(i));
        for (std::size_t j = 0; j < p.size(); ++j) {
            v.data()[j] = momentum * v.data()[j] - lr * g.data()[j];
            p.data()[j] += v.data()[j];
        }
    }
}

void sgd_step(SgdMomentum& opt, MlpModel& model, const MlpGradients& grads) {
    opt.step(trainable_params(model), gradient_list(model, grads));
}

} // namespace softcca
