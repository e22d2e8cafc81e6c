#include "divide/mlp.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace divide {
namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw DataError("checkpoint stream truncated");
    return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
    write_u64(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& is) {
    const std::uint64_t n = read_u64(is);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw DataError("checkpoint stream truncated");
    return v;
}

void write_matrix(std::ostream& os, const Matrix& m) {
    write_u64(os, m.rows());
    write_u64(os, m.cols());
    os.write(reinterpret_cast<const char*>(m.data().data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_matrix(std::istream& is) {
    const std::uint64_t r = read_u64(is);
    const std::uint64_t c = read_u64(is);
    Matrix m(r, c);
    is.read(reinterpret_cast<char*>(m.data().data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw DataError("checkpoint stream truncated");
    return m;
}

bool has_batchnorm(const Mlp& net) {
    for (const auto& l : net.layers)
        if (l.kind == LayerKind::batchnorm) return true;
    return false;
}

}  // namespace

std::size_t Mlp::input_dim() const {
    for (const auto& l : layers)
        if (l.kind == LayerKind::linear) return l.w.rows();
    return 0;
}

std::size_t Mlp::output_dim() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
        if (it->kind == LayerKind::linear) return it->w.cols();
    return 0;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::linear) n += l.w.size() + l.b.size();
        if (l.kind == LayerKind::batchnorm) n += l.gamma.size() + l.beta.size();
    }
    return n;
}

std::vector<LayerSpec> Mlp::spec() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::linear)
            out.push_back(LayerSpec::linear(l.w.rows(), l.w.cols()));
        else if (l.kind == LayerKind::batchnorm)
            out.push_back(LayerSpec::batchnorm());
        else
            out.push_back(LayerSpec::relu());
    }
    return out;
}

Mlp build_mlp(const std::vector<LayerSpec>& spec, Rng& rng) {
    Mlp net;
    std::size_t width = 0;  // 0 = not yet pinned by a linear layer
    for (const auto& ls : spec) {
        Layer layer;
        layer.kind = ls.kind;
        switch (ls.kind) {
            case LayerKind::linear: {
                if (ls.in_dim == 0 || ls.out_dim == 0)
                    throw InvalidParameterError("build_mlp: linear layer dims must be positive");
                if (width != 0 && width != ls.in_dim)
                    throw ShapeError("build_mlp: linear in_dim " + std::to_string(ls.in_dim) +
                                     " does not chain from width " + std::to_string(width));
                layer.w = Matrix(ls.in_dim, ls.out_dim);
                const double bound = std::sqrt(6.0 / static_cast<double>(ls.in_dim));
                for (double& x : layer.w.data()) x = rng.uniform(-bound, bound);
                layer.b.assign(ls.out_dim, 0.0);
                width = ls.out_dim;
                break;
            }
            case LayerKind::batchnorm: {
                if (width == 0)
                    throw ShapeError("build_mlp: batchnorm before any linear layer has no width");
                layer.gamma.assign(width, 1.0);
                layer.beta.assign(width, 0.0);
                layer.running_mean.assign(width, 0.0);
                layer.running_var.assign(width, 1.0);
                break;
            }
            case LayerKind::relu:
                break;
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Matrix mlp_forward(Mlp& net, const Matrix& x, Mode mode, ForwardCache* cache) {
    if (net.input_dim() != 0 && x.cols() != net.input_dim())
        throw ShapeError("mlp_forward: input has " + std::to_string(x.cols()) +
                         " columns, net expects " + std::to_string(net.input_dim()));
    if (mode == Mode::train && x.rows() < 2 && has_batchnorm(net))
        throw DataError("mlp_forward: batchnorm needs a batch of at least 2 in train mode");
    if (cache) {
        cache->layers.assign(net.layers.size(), LayerCache{});
        cache->batch = x.rows();
    }
    const std::size_t n = x.rows();
    Matrix cur = x;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        Layer& layer = net.layers[li];
        if (cache && mode == Mode::train) cache->layers[li].input = cur;
        switch (layer.kind) {
            case LayerKind::linear: {
                Matrix out = matmul(cur, layer.w);
                for (std::size_t i = 0; i < out.rows(); ++i) {
                    double* oi = out.row_ptr(i);
                    for (std::size_t j = 0; j < out.cols(); ++j) oi[j] += layer.b[j];
                }
                cur = std::move(out);
                break;
            }
            case LayerKind::batchnorm: {
                const std::size_t d = layer.gamma.size();
                if (cur.cols() != d) throw ShapeError("mlp_forward: batchnorm width mismatch");
                Matrix out(n, d);
                if (mode == Mode::train) {
                    std::vector<double> mean(d, 0.0), var(d, 0.0), inv_std(d, 0.0);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double* ci = cur.row_ptr(i);
                        for (std::size_t j = 0; j < d; ++j) mean[j] += ci[j];
                    }
                    for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double* ci = cur.row_ptr(i);
                        for (std::size_t j = 0; j < d; ++j) {
                            const double c = ci[j] - mean[j];
                            var[j] += c * c;
                        }
                    }
                    for (std::size_t j = 0; j < d; ++j) {
                        var[j] /= static_cast<double>(n);
                        inv_std[j] = 1.0 / std::sqrt(var[j] + net.bn_eps);
                    }
                    Matrix xhat(n, d);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double* ci = cur.row_ptr(i);
                        double* xi = xhat.row_ptr(i);
                        double* oi = out.row_ptr(i);
                        for (std::size_t j = 0; j < d; ++j) {
                            xi[j] = (ci[j] - mean[j]) * inv_std[j];
                            oi[j] = layer.gamma[j] * xi[j] + layer.beta[j];
                        }
                    }
                    // Running stats track the unbiased batch variance.
                    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
                    for (std::size_t j = 0; j < d; ++j) {
                        layer.running_mean[j] =
                            (1.0 - net.bn_momentum) * layer.running_mean[j] + net.bn_momentum * mean[j];
                        layer.running_var[j] = (1.0 - net.bn_momentum) * layer.running_var[j] +
                                               net.bn_momentum * var[j] * unbias;
                    }
                    if (cache) {
                        cache->layers[li].xhat = xhat;
                        cache->layers[li].inv_std = inv_std;
                    }
                } else {
                    for (std::size_t i = 0; i < n; ++i) {
                        const double* ci = cur.row_ptr(i);
                        double* oi = out.row_ptr(i);
                        for (std::size_t j = 0; j < d; ++j) {
                            const double xh =
                                (ci[j] - layer.running_mean[j]) /
                                std::sqrt(layer.running_var[j] + net.bn_eps);
                            oi[j] = layer.gamma[j] * xh + layer.beta[j];
                        }
                    }
                }
                cur = std::move(out);
                break;
            }
            case LayerKind::relu: {
                Matrix out = cur;
                for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
                cur = std::move(out);
                break;
            }
        }
    }
    check_finite(cur, "mlp_forward output");
    return cur;
}

Matrix mlp_forward_const(const Mlp& net, const Matrix& x) {
    Mlp& mut = const_cast<Mlp&>(net);  // eval mode does not touch running stats
    return mlp_forward(mut, x, Mode::eval, nullptr);
}

std::pair<MlpGrads, Matrix> mlp_backward(const Mlp& net, const ForwardCache& cache, const Matrix& dy) {
    if (cache.layers.size() != net.layers.size())
        throw ShapeError("mlp_backward: cache does not match network");
    MlpGrads grads = zero_grads(net);
    Matrix cur = dy;
    const std::size_t n = cache.batch;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Layer& layer = net.layers[li];
        const LayerCache& lc = cache.layers[li];
        switch (layer.kind) {
            case LayerKind::linear: {
                if (cur.cols() != layer.w.cols()) throw ShapeError("mlp_backward: dY width mismatch");
                grads[li].dw = matmul(transpose(lc.input), cur);
                for (std::size_t i = 0; i < cur.rows(); ++i) {
                    const double* ci = cur.row_ptr(i);
                    for (std::size_t j = 0; j < cur.cols(); ++j) grads[li].db[j] += ci[j];
                }
                cur = matmul(cur, transpose(layer.w));
                break;
            }
            case LayerKind::batchnorm: {
                const std::size_t d = layer.gamma.size();
                if (cur.cols() != d) throw ShapeError("mlp_backward: batchnorm width mismatch");
                std::vector<double> sum_dxhat(d, 0.0), sum_dxhat_xhat(d, 0.0);
                Matrix dxhat(n, d);
                for (std::size_t i = 0; i < n; ++i) {
                    const double* ci = cur.row_ptr(i);
                    const double* xi = lc.xhat.row_ptr(i);
                    double* dxi = dxhat.row_ptr(i);
                    for (std::size_t j = 0; j < d; ++j) {
                        grads[li].dgamma[j] += ci[j] * xi[j];
                        grads[li].dbeta[j] += ci[j];
                        dxi[j] = ci[j] * layer.gamma[j];
                        sum_dxhat[j] += dxi[j];
                        sum_dxhat_xhat[j] += dxi[j] * xi[j];
                    }
                }
                // Gradient through the batch statistics.
                Matrix dx(n, d);
                const double inv_n = 1.0 / static_cast<double>(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const double* dxi = dxhat.row_ptr(i);
                    const double* xi = lc.xhat.row_ptr(i);
                    double* oi = dx.row_ptr(i);
                    for (std::size_t j = 0; j < d; ++j) {
                        oi[j] = lc.inv_std[j] * inv_n *
                                (static_cast<double>(n) * dxi[j] - sum_dxhat[j] -
                                 xi[j] * sum_dxhat_xhat[j]);
                    }
                }
                cur = std::move(dx);
                break;
            }
            case LayerKind::relu: {
                Matrix dx = cur;
                for (std::size_t i = 0; i < lc.input.size(); ++i)
                    if (lc.input.data()[i] <= 0.0) dx.data()[i] = 0.0;
                cur = std::move(dx);
                break;
            }
        }
    }
    return {std::move(grads), std::move(cur)};
}

MlpGrads zero_grads(const Mlp& net) {
    MlpGrads grads(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& l = net.layers[i];
        if (l.kind == LayerKind::linear) {
            grads[i].dw = Matrix(l.w.rows(), l.w.cols());
            grads[i].db.assign(l.b.size(), 0.0);
        } else if (l.kind == LayerKind::batchnorm) {
            grads[i].dgamma.assign(l.gamma.size(), 0.0);
            grads[i].dbeta.assign(l.beta.size(), 0.0);
        }
    }
    return grads;
}

void accumulate(MlpGrads& into, const MlpGrads& from) {
    if (into.size() != from.size()) throw ShapeError("accumulate: grad layouts differ");
    for (std::size_t i = 0; i < into.size(); ++i) {
        if (!from[i].dw.empty()) into[i].dw += from[i].dw;
        for (std::size_t j = 0; j < from[i].db.size(); ++j) into[i].db[j] += from[i].db[j];
        for (std::size_t j = 0; j < from[i].dgamma.size(); ++j) into[i].dgamma[j] += from[i].dgamma[j];
        for (std::size_t j = 0; j < from[i].dbeta.size(); ++j) into[i].dbeta[j] += from[i].dbeta[j];
    }
}

AdamState make_adam_state(const Mlp& net) {
    AdamState st;
    st.m = zero_grads(net);
    st.v = zero_grads(net);
    return st;
}

namespace {

void adam_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, const AdamState& st, double lr, double bc1, double bc2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
        v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + st.eps);
    }
}

}  // namespace

void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw InvalidParameterError("adam_step: lr must be positive");
    if (grads.size() != net.layers.size()) throw ShapeError("adam_step: grad layout mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& l = net.layers[i];
        if (l.kind == LayerKind::linear) {
            adam_update(l.w.data(), grads[i].dw.data(), state.m[i].dw.data(), state.v[i].dw.data(),
                        state, lr, bc1, bc2);
            adam_update(l.b, grads[i].db, state.m[i].db, state.v[i].db, state, lr, bc1, bc2);
        } else if (l.kind == LayerKind::batchnorm) {
            adam_update(l.gamma, grads[i].dgamma, state.m[i].dgamma, state.v[i].dgamma, state, lr,
                        bc1, bc2);
            adam_update(l.beta, grads[i].dbeta, state.m[i].dbeta, state.v[i].dbeta, state, lr, bc1,
                        bc2);
        }
    }
}

void ema_update(Mlp& target, const Mlp& online, double m) {
    if (target.layers.size() != online.layers.size())
        throw ShapeError("ema_update: architectures differ");
    for (std::size_t i = 0; i < target.layers.size(); ++i) {
        Layer& t = target.layers[i];
        const Layer& o = online.layers[i];
        if (t.kind != o.kind) throw ShapeError("ema_update: layer kinds differ");
        auto mix_vec = [m](std::vector<double>& tv, const std::vector<double>& ov) {
            if (tv.size() != ov.size()) throw ShapeError("ema_update: parameter sizes differ");
            for (std::size_t j = 0; j < tv.size(); ++j) tv[j] = m * tv[j] + (1.0 - m) * ov[j];
        };
        if (t.kind == LayerKind::linear) {
            if (!t.w.same_shape(o.w)) throw ShapeError("ema_update: weight shapes differ");
            mix_vec(t.w.data(), o.w.data());
            mix_vec(t.b, o.b);
        } else if (t.kind == LayerKind::batchnorm) {
            mix_vec(t.gamma, o.gamma);
            mix_vec(t.beta, o.beta);
            t.running_mean = o.running_mean;
            t.running_var = o.running_var;
        }
    }
}

void write_mlp(std::ostream& os, const Mlp& net) {
    write_u64(os, net.layers.size());
    for (const auto& l : net.layers) {
        write_u64(os, static_cast<std::uint64_t>(l.kind));
        if (l.kind == LayerKind::linear) {
            write_matrix(os, l.w);
            write_doubles(os, l.b);
        } else if (l.kind == LayerKind::batchnorm) {
            write_doubles(os, l.gamma);
            write_doubles(os, l.beta);
            write_doubles(os, l.running_mean);
            write_doubles(os, l.running_var);
        }
    }
}

Mlp read_mlp(std::istream& is) {
    Mlp net;
    const std::uint64_t count = read_u64(is);
    for (std::uint64_t i = 0; i < count; ++i) {
        Layer l;
        const std::uint64_t kind = read_u64(is);
        if (kind > 2) throw DataError("checkpoint: unknown layer kind");
        l.kind = static_cast<LayerKind>(kind);
        if (l.kind == LayerKind::linear) {
            l.w = read_matrix(is);
            l.b = read_doubles(is);
        } else if (l.kind == LayerKind::batchnorm) {
            l.gamma = read_doubles(is);
            l.beta = read_doubles(is);
            l.running_mean = read_doubles(is);
            l.running_var = read_doubles(is);
        }
        net.layers.push_back(std::move(l));
    }
    return net;
}

void write_adam(std::ostream& os, const AdamState& st) {
    write_u64(os, static_cast<std::uint64_t>(st.step));
    auto dump = [&os](const MlpGrads& g) {
        write_u64(os, g.size());
        for (const auto& lg : g) {
            write_matrix(os, lg.dw);
            write_doubles(os, lg.db);
            write_doubles(os, lg.dgamma);
            write_doubles(os, lg.dbeta);
        }
    };
    dump(st.m);
    dump(st.v);
}

AdamState read_adam(std::istream& is, const Mlp& net) {
    AdamState st;
    st.step = static_cast<std::int64_t>(read_u64(is));
    auto slurp = [&is]() {
        MlpGrads g(read_u64(is));
        for (auto& lg : g) {
            lg.dw = read_matrix(is);
            lg.db = read_doubles(is);
            lg.dgamma = read_doubles(is);
            lg.dbeta = read_doubles(is);
        }
        return g;
    };
    st.m = slurp();
    st.v = slurp();
    if (st.m.size() != net.layers.size() || st.v.size() != net.layers.size())
        throw DataError("checkpoint: Adam state does not match network");
    return st;
}

std::vector<LayerSpec> encoder_spec(std::size_t in_dim, std::size_t hidden, std::size_t embed,
                                    std::size_t linear_layers) {
    if (linear_layers == 0) throw InvalidParameterError("encoder_spec: need at least one layer");
    std::vector<LayerSpec> spec;
    std::size_t cur = in_dim;
    for (std::size_t i = 0; i + 1 < linear_layers; ++i) {
        spec.push_back(LayerSpec::linear(cur, hidden));
        spec.push_back(LayerSpec::batchnorm());
        spec.push_back(LayerSpec::relu());
        cur = hidden;
    }
    spec.push_back(LayerSpec::linear(cur, embed));
    spec.push_back(LayerSpec::batchnorm());  // final batchnorm, no activation
    return spec;
}

std::vector<LayerSpec> decoder_spec(std::size_t in_dim, std::size_t hidden, std::size_t out_dim) {
    return {LayerSpec::linear(in_dim, hidden), LayerSpec::relu(),
            LayerSpec::linear(hidden, out_dim)};
}

}  // namespace divide
