#include "w2s/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "w2s/errors.hpp"
#include "w2s/rng.hpp"

namespace w2s {

namespace {

// Logit clamp keeps saturated regimes (heavily perturbed representations)
// finite end to end; the gradient is zero in the clamped region anyway.
constexpr double kLogitCap = 40.0;

double sigmoid(double x) {
    x = std::clamp(x, -kLogitCap, kLogitCap);
    return 1.0 / (1.0 + std::exp(-x));
}

void check_finite(double v, const char* where) {
    if (!std::isfinite(v)) throw NumericOverflow(std::string(where) + ": non-finite value");
}

// y = x * W^T + b, x: n x in, W: out x in.
Matrix affine(const Matrix& x, const Layer& layer) {
    const int n = x.rows, in = x.cols, out = layer.w.rows;
    if (layer.w.cols != in) throw ContractViolation("affine: input dimension mismatch");
    Matrix y(n, out);
    for (int i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double* yi = y.row(i);
        for (int o = 0; o < out; ++o) {
            const double* wr = layer.w.row(o);
            double acc = layer.b[o];
            for (int j = 0; j < in; ++j) acc += wr[j] * xi[j];
            yi[o] = acc;
        }
    }
    return y;
}

void apply_activation(Matrix& m, Activation act) {
    if (act == Activation::Identity) return;
    for (double& v : m.a) v = v > 0.0 ? v : 0.0;
}

struct ForwardTrace {
    std::vector<Matrix> pre;   // z_l per layer
    std::vector<Matrix> post;  // activated outputs (post.back() unused for the last layer)
};

ForwardTrace run_forward(const LayeredNet& net, const Matrix& x) {
    ForwardTrace t;
    t.pre.reserve(net.layers.size());
    t.post.reserve(net.layers.size());
    const Matrix* cur = &x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        t.pre.push_back(affine(*cur, net.layers[l]));
        Matrix act = t.pre.back();
        if (l + 1 < net.layers.size()) apply_activation(act, net.activation);
        t.post.push_back(std::move(act));
        cur = &t.post.back();
    }
    return t;
}

// softmax, clamp to the floor, renormalize; writes the row in place and
// returns the pinned mask and free-mass sum needed by the backward pass.
struct RowProjection {
    std::vector<std::uint8_t> pinned;
    double free_sum = 0.0;  // sum of pre-projection values over free entries
    double scale = 1.0;     // (1 - floor*m) / free_sum
};

RowProjection project_row(std::vector<double>& row, double floor) {
    std::vector<double> pre = row;
    RowProjection pr;
    pr.pinned = clamp_normalize(row, floor);
    double free_sum = 0.0;
    for (std::size_t i = 0; i < pre.size(); ++i) {
        if (!pr.pinned[i]) free_sum += pre[i];
    }
    int m = 0;
    for (auto p : pr.pinned) m += p;
    pr.free_sum = free_sum;
    pr.scale = free_sum > 0.0 ? (1.0 - floor * m) / free_sum : 0.0;
    return pr;
}

// Gradient of the clamped-simplex projection: g is dL/dp, pre holds the
// projection input (unit sum), returns dL/d(pre).
std::vector<double> project_row_backward(const std::vector<double>& g, const std::vector<double>& pre,
                                         const std::vector<double>& post, const RowProjection& pr) {
    const std::size_t k = g.size();
    double cross = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (!pr.pinned[i]) cross += g[i] * post[i];
    }
    std::vector<double> out(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        if (pr.pinned[j]) continue;
        out[j] = pr.scale * g[j] - cross / pr.free_sum;
    }
    (void)pre;
    return out;
}

void softmax_row(const double* z, int k, std::vector<double>& s) {
    s.resize(k);
    double zmax = z[0];
    for (int i = 1; i < k; ++i) zmax = std::max(zmax, z[i]);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        s[i] = std::exp(z[i] - zmax);
        sum += s[i];
    }
    for (int i = 0; i < k; ++i) s[i] /= sum;
}

struct HeadResult {
    Matrix out;                            // head outputs
    std::vector<double> pre_logit;         // final linear outputs (ScalarPositive)
    std::vector<std::vector<double>> pre;  // projection inputs (SoftmaxK)
    std::vector<RowProjection> proj;       // per-row projections (SoftmaxK)
};

HeadResult apply_head(const LayeredNet& net, const Matrix& y) {
    HeadResult h;
    switch (net.head) {
        case OutputHead::None:
            h.out = y;
            return h;
        case OutputHead::ScalarPositive: {
            if (y.cols != 1) throw ContractViolation("scalar-positive head requires 1 output");
            h.pre_logit = y.a;
            h.out = y;
            for (double& v : h.out.a) v = sigmoid(v);
            return h;
        }
        case OutputHead::SoftmaxK: {
            h.out = Matrix(y.rows, y.cols);
            h.pre.resize(y.rows);
            h.proj.resize(y.rows);
            std::vector<double> s;
            for (int i = 0; i < y.rows; ++i) {
                softmax_row(y.row(i), y.cols, s);
                h.pre[i] = s;
                std::vector<double> p = s;
                h.proj[i] = project_row(p, net.head_floor);
                for (int j = 0; j < y.cols; ++j) h.out(i, j) = p[j];
            }
            return h;
        }
    }
    throw ContractViolation("unknown output head");
}

struct LossEval {
    double value = 0.0;
    Matrix d_head;  // dL/d(head output)
};

// Teacher profile for ProfileKL losses, normalized over the sample.
ProbVector profile_of(const Matrix& raw_col, double floor_pre) {
    if (raw_col.cols != 1) throw ContractViolation("profile loss expects scalar outputs");
    const double floor = floor_pre / raw_col.rows;
    return normalize_outputs(std::span<const double>(raw_col.a.data(), raw_col.a.size()), floor, floor_pre);
}

LossEval eval_loss(const Matrix& head_out, const LossSpec& loss, bool want_grad) {
    LossEval e;
    const int n = head_out.rows;
    if (loss.kind == LossKind::PointwiseKL) {
        const int k = head_out.cols;
        if (loss.targets.rows != n || loss.targets.cols != k) {
            throw ContractViolation("loss targets shape mismatch");
        }
        if (want_grad) e.d_head = Matrix(n, k);
        double total = 0.0;
        const double inv_n = 1.0 / n;
        for (int i = 0; i < n; ++i) {
            const double* p = head_out.row(i);
            const double* t = loss.targets.row(i);
            for (int j = 0; j < k; ++j) {
                if (loss.direction == KlDirection::TeacherFirst) {
                    total += t[j] * std::log(t[j] / p[j]);
                    if (want_grad) e.d_head(i, j) = -inv_n * t[j] / p[j];
                } else {
                    const double lr = std::log(p[j] / t[j]);
                    total += p[j] * lr;
                    if (want_grad) e.d_head(i, j) = inv_n * (lr + 1.0);
                }
            }
        }
        e.value = total * inv_n;
        return e;
    }

    // ProfileKL: student outputs are normalized over the sample; the teacher
    // profile is recomputed from raw targets the same way.
    if (head_out.cols != 1) throw ContractViolation("profile loss expects scalar outputs");
    if (loss.targets.rows != n || loss.targets.cols != 1) {
        throw ContractViolation("loss targets shape mismatch");
    }
    const double floor = loss.floor_pre / n;
    std::vector<double> clamped(head_out.a);
    std::vector<std::uint8_t> preclamp_free(clamped.size());
    for (std::size_t i = 0; i < clamped.size(); ++i) {
        preclamp_free[i] = clamped[i] > loss.floor_pre ? 1 : 0;
        clamped[i] = std::max(clamped[i], loss.floor_pre);
    }
    double raw_sum = 0.0;
    for (double v : clamped) raw_sum += v;
    std::vector<double> unit(clamped);
    for (double& v : unit) v /= raw_sum;
    std::vector<double> student = unit;
    RowProjection pr;
    pr.pinned = clamp_normalize(student, floor);
    {
        double free_sum = 0.0;
        int m = 0;
        for (std::size_t i = 0; i < unit.size(); ++i) {
            if (!pr.pinned[i]) free_sum += unit[i];
            m += pr.pinned[i];
        }
        pr.free_sum = free_sum;
        pr.scale = free_sum > 0.0 ? (1.0 - floor * m) / free_sum : 0.0;
    }
    const ProbVector teacher = profile_of(loss.targets, loss.floor_pre);

    double total = 0.0;
    std::vector<double> dp(student.size(), 0.0);
    for (std::size_t i = 0; i < student.size(); ++i) {
        const double s = student[i], t = teacher[i];
        if (loss.direction == KlDirection::TeacherFirst) {
            total += t * std::log(t / s);
            if (want_grad) dp[i] = -t / s;
        } else {
            const double lr = std::log(s / t);
            total += s * lr;
            if (want_grad) dp[i] = lr + 1.0;
        }
    }
    e.value = total;
    if (want_grad) {
        std::vector<double> du = project_row_backward(dp, unit, student, pr);
        double cross = 0.0;
        for (std::size_t i = 0; i < du.size(); ++i) cross += du[i] * unit[i];
        e.d_head = Matrix(n, 1);
        for (int i = 0; i < n; ++i) {
            const double dr = (du[static_cast<std::size_t>(i)] - cross) / raw_sum;
            e.d_head(i, 0) = preclamp_free[static_cast<std::size_t>(i)] ? dr : 0.0;
        }
    }
    return e;
}

// dL/d(final linear output) from dL/d(head output).
Matrix head_backward(const LayeredNet& net, const HeadResult& h, const Matrix& d_head) {
    switch (net.head) {
        case OutputHead::None:
            return d_head;
        case OutputHead::ScalarPositive: {
            Matrix d(d_head.rows, 1);
            for (int i = 0; i < d_head.rows; ++i) {
                const double o = h.out(i, 0);
                const double slope = std::abs(h.pre_logit[static_cast<std::size_t>(i)]) >= kLogitCap
                                         ? 0.0
                                         : o * (1.0 - o);
                d(i, 0) = d_head(i, 0) * slope;
            }
            return d;
        }
        case OutputHead::SoftmaxK: {
            const int n = d_head.rows, k = d_head.cols;
            Matrix d(n, k);
            std::vector<double> g(k), post(k), ds;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < k; ++j) {
                    g[j] = d_head(i, j);
                    post[j] = h.out(i, j);
                }
                ds = project_row_backward(g, h.pre[i], post, h.proj[i]);
                // softmax Jacobian
                const std::vector<double>& s = h.pre[i];
                double dot = 0.0;
                for (int j = 0; j < k; ++j) dot += ds[j] * s[j];
                for (int j = 0; j < k; ++j) d(i, j) = s[j] * (ds[j] - dot);
            }
            return d;
        }
    }
    throw ContractViolation("unknown output head");
}

}  // namespace

std::size_t LayeredNet::parameter_count() const {
    std::size_t c = 0;
    for (const Layer& l : layers) c += l.w.a.size() + l.b.size();
    return c;
}

void LayeredNet::validate() const {
    if (layers.empty()) throw ContractViolation("LayeredNet: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].w.rows <= 0 || layers[l].w.cols <= 0) {
            throw ContractViolation("LayeredNet: non-positive layer dimension");
        }
        if (static_cast<int>(layers[l].b.size()) != layers[l].w.rows) {
            throw ContractViolation("LayeredNet: bias length mismatch");
        }
        if (l > 0 && layers[l].w.cols != layers[l - 1].w.rows) {
            throw ContractViolation("LayeredNet: layer dimensions do not chain");
        }
    }
    if (head == OutputHead::ScalarPositive && out_dim() != 1) {
        throw ContractViolation("LayeredNet: scalar-positive head requires out_dim 1");
    }
    if (head == OutputHead::SoftmaxK) {
        if (out_dim() < 2) throw ContractViolation("LayeredNet: softmax head requires out_dim >= 2");
        if (head_floor * out_dim() > 1.0) {
            throw ContractViolation("LayeredNet: head_floor * k exceeds 1");
        }
    }
}

LayeredNet init_net(const ArchSpec& spec, std::uint64_t seed) {
    if (spec.in_dim <= 0 || spec.out_dim <= 0 || spec.depth < 1) {
        throw ContractViolation("init_net: dimensions must be positive and depth >= 1");
    }
    const int hidden = spec.hidden > 0 ? spec.hidden : spec.out_dim;
    LayeredNet net;
    net.activation = spec.activation;
    net.head = spec.head;
    net.head_floor = spec.head_floor;
    rng::Stream stream(seed);
    for (int l = 0; l < spec.depth; ++l) {
        const int in = l == 0 ? spec.in_dim : hidden;
        const int out = l == spec.depth - 1 ? spec.out_dim : hidden;
        Layer layer;
        layer.w = Matrix(out, in);
        layer.b.assign(out, 0.0);
        const double scale = std::sqrt(2.0 / in);
        for (double& v : layer.w.a) v = scale * stream.normal();
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

LayeredNet perturb_net(const LayeredNet& net, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw ContractViolation("perturb_net: sigma must be >= 0");
    LayeredNet out = net;
    if (sigma == 0.0) return out;
    rng::Stream stream(seed);
    for (Layer& layer : out.layers) {
        for (double& v : layer.w.a) v += sigma * stream.normal();
        for (double& v : layer.b) v += sigma * stream.normal();
    }
    return out;
}

LayeredNet compose(const LayeredNet& rep, const LayeredNet& head) {
    if (rep.head != OutputHead::None) throw ContractViolation("compose: representation must have no head");
    LayeredNet net;
    net.activation = rep.activation;
    net.head = head.head;
    net.head_floor = head.head_floor;
    net.layers = rep.layers;
    net.layers.insert(net.layers.end(), head.layers.begin(), head.layers.end());
    net.validate();
    return net;
}

SampleSet gaussian_sample(int n, int d, std::uint64_t seed, std::string tag) {
    if (n < 2 || d < 1) throw ContractViolation("gaussian_sample: need n >= 2 and d >= 1");
    SampleSet s;
    s.inputs = Matrix(n, d);
    s.source_seed = seed;
    s.distribution_tag = std::move(tag);
    rng::Stream stream(seed);
    for (double& v : s.inputs.a) v = stream.normal();
    return s;
}

Matrix forward_linear(const LayeredNet& net, const Matrix& x) {
    net.validate();
    if (x.cols != net.in_dim()) throw ContractViolation("forward: input dimension mismatch");
    ForwardTrace t = run_forward(net, x);
    return t.pre.back();
}

Matrix rep_features(const LayeredNet& rep, const Matrix& x) {
    Matrix y = forward_linear(rep, x);
    apply_activation(y, rep.activation);
    return y;
}

Matrix forward(const LayeredNet& net, const SampleSet& inputs) {
    Matrix y = forward_linear(net, inputs.inputs);
    HeadResult h = apply_head(net, y);
    return std::move(h.out);
}

double loss_value(const LayeredNet& net, const SampleSet& data, const LossSpec& loss) {
    Matrix y = forward_linear(net, data.inputs);
    HeadResult h = apply_head(net, y);
    LossEval e = eval_loss(h.out, loss, /*want_grad=*/false);
    check_finite(e.value, "loss_value");
    return e.value;
}

GradientRecord backward(const LayeredNet& net, const SampleSet& data, const LossSpec& loss) {
    net.validate();
    if (data.inputs.cols != net.in_dim()) throw ContractViolation("backward: input dimension mismatch");
    const int n = data.size();
    ForwardTrace trace = run_forward(net, data.inputs);
    HeadResult h = apply_head(net, trace.pre.back());
    LossEval e = eval_loss(h.out, loss, /*want_grad=*/true);
    check_finite(e.value, "backward");

    GradientRecord rec;
    rec.loss_value = e.value;
    rec.grads.resize(net.layers.size());

    Matrix delta = head_backward(net, h, e.d_head);
    for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
        const Matrix& input = l == 0 ? data.inputs : trace.post[static_cast<std::size_t>(l) - 1];
        const Layer& layer = net.layers[static_cast<std::size_t>(l)];
        Layer& g = rec.grads[static_cast<std::size_t>(l)];
        g.w = Matrix(layer.w.rows, layer.w.cols);
        g.b.assign(layer.b.size(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double* di = delta.row(i);
            const double* xi = input.row(i);
            for (int o = 0; o < layer.w.rows; ++o) {
                const double d = di[o];
                g.b[o] += d;
                double* gw = g.w.row(o);
                for (int j = 0; j < layer.w.cols; ++j) gw[j] += d * xi[j];
            }
        }
        if (l > 0) {
            Matrix next(n, layer.w.cols);
            for (int i = 0; i < n; ++i) {
                const double* di = delta.row(i);
                double* ni = next.row(i);
                for (int j = 0; j < layer.w.cols; ++j) ni[j] = 0.0;
                for (int o = 0; o < layer.w.rows; ++o) {
                    const double d = di[o];
                    const double* wr = layer.w.row(o);
                    for (int j = 0; j < layer.w.cols; ++j) ni[j] += d * wr[j];
                }
            }
            if (net.activation == Activation::Relu) {
                const Matrix& pre = trace.pre[static_cast<std::size_t>(l) - 1];
                for (std::size_t i = 0; i < next.a.size(); ++i) {
                    if (pre.a[i] <= 0.0) next.a[i] = 0.0;
                }
            }
            delta = std::move(next);
        }
    }
    for (const Layer& g : rec.grads) {
        for (double v : g.w.a) check_finite(v, "backward(grad)");
        for (double v : g.b) check_finite(v, "backward(grad)");
    }
    return rec;
}

FitResult sgd_fit(const LayeredNet& net, const std::vector<std::uint8_t>& trainable_mask,
                  const SampleSet& data, const LossSpec& loss, const OptimSchedule& schedule) {
    if (trainable_mask.size() != net.layers.size()) {
        throw ContractViolation("sgd_fit: trainable mask length mismatch");
    }
    if (schedule.steps < 0 || schedule.lr <= 0.0) {
        throw ContractViolation("sgd_fit: schedule needs steps >= 0 and lr > 0");
    }
    FitResult fit;
    fit.net = net;
    GradientRecord g = backward(fit.net, data, loss);
    fit.initial_loss = g.loss_value;

    auto masked_norm = [&](const GradientRecord& rec) {
        double sq = 0.0;
        for (std::size_t l = 0; l < rec.grads.size(); ++l) {
            if (!trainable_mask[l]) continue;
            for (double v : rec.grads[l].w.a) sq += v * v;
            for (double v : rec.grads[l].b) sq += v * v;
        }
        return std::sqrt(sq);
    };

    // Backtracking line search along the gradient: a step is accepted only
    // under the Armijo sufficient-decrease condition, so the fit is monotone
    // and large nominal rates stay safe on the spiky-curvature KL losses.
    auto apply_step = [&](const LayeredNet& base, double lr) {
        LayeredNet next = base;
        for (std::size_t l = 0; l < next.layers.size(); ++l) {
            if (!trainable_mask[l]) continue;
            Layer& layer = next.layers[l];
            const Layer& gl = g.grads[l];
            for (std::size_t i = 0; i < layer.w.a.size(); ++i) layer.w.a[i] -= lr * gl.w.a[i];
            for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] -= lr * gl.b[i];
        }
        return next;
    };

    double gnorm = masked_norm(g);
    for (int step = 0; step < schedule.steps; ++step) {
        if (gnorm <= schedule.grad_norm_tol) break;
        double lr = schedule.lr;
        bool accepted = false;
        for (int tries = 0; tries < 40; ++tries) {
            LayeredNet candidate = apply_step(fit.net, lr);
            double cand_loss;
            try {
                cand_loss = loss_value(candidate, data, loss);
            } catch (const NumericOverflow&) {
                lr *= 0.5;
                continue;
            }
            if (cand_loss <= g.loss_value - 1e-4 * lr * gnorm * gnorm) {
                fit.net = std::move(candidate);
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (!accepted) break;  // no acceptable descent step at any size
        ++fit.steps_run;
        g = backward(fit.net, data, loss);
        gnorm = masked_norm(g);
    }
    fit.final_loss = g.loss_value;
    fit.final_grad_norm = gnorm;
    fit.converged = gnorm <= schedule.grad_norm_tol;
    fit.monotone_warning = fit.final_loss > fit.initial_loss + 1e-12;
    return fit;
}

std::string serialize_net(const LayeredNet& net) {
    std::ostringstream os;
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    os << "w2slab-net 1\n";
    os << "activation " << (net.activation == Activation::Relu ? "relu" : "identity") << "\n";
    os << "head "
       << (net.head == OutputHead::None ? "none"
                                        : net.head == OutputHead::SoftmaxK ? "softmax-k" : "scalar-positive")
       << "\n";
    os << "head_floor ";
    put(net.head_floor);
    os << "\nlayers " << net.layers.size() << "\n";
    for (const Layer& l : net.layers) {
        os << "layer " << l.w.rows << " " << l.w.cols << "\n";
        for (int r = 0; r < l.w.rows; ++r) {
            os << "w";
            for (int c = 0; c < l.w.cols; ++c) {
                os << " ";
                put(l.w(r, c));
            }
            os << "\n";
        }
        os << "b";
        for (double v : l.b) {
            os << " ";
            put(v);
        }
        os << "\n";
    }
    os << "end\n";
    return os.str();
}

LayeredNet deserialize_net(const std::string& text) {
    std::istringstream is(text);
    std::string tok;
    int version = 0;
    is >> tok >> version;
    if (tok != "w2slab-net" || version != 1) throw ContractViolation("deserialize_net: bad header");
    LayeredNet net;
    std::size_t n_layers = 0;
    is >> tok;
    while (is && tok != "end") {
        if (tok == "activation") {
            is >> tok;
            net.activation = tok == "relu" ? Activation::Relu : Activation::Identity;
        } else if (tok == "head") {
            is >> tok;
            net.head = tok == "none" ? OutputHead::None
                                     : tok == "softmax-k" ? OutputHead::SoftmaxK : OutputHead::ScalarPositive;
        } else if (tok == "head_floor") {
            is >> net.head_floor;
        } else if (tok == "layers") {
            is >> n_layers;
        } else if (tok == "layer") {
            int rows = 0, cols = 0;
            is >> rows >> cols;
            Layer l;
            l.w = Matrix(rows, cols);
            l.b.assign(rows, 0.0);
            for (int r = 0; r < rows; ++r) {
                is >> tok;  // "w"
                for (int c = 0; c < cols; ++c) is >> l.w(r, c);
            }
            is >> tok;  // "b"
            for (int r = 0; r < rows; ++r) is >> l.b[r];
            net.layers.push_back(std::move(l));
        } else {
            throw ContractViolation("deserialize_net: unexpected token '" + tok + "'");
        }
        is >> tok;
    }
    if (net.layers.size() != n_layers) throw ContractViolation("deserialize_net: layer count mismatch");
    net.validate();
    return net;
}

void save_net(const LayeredNet& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw NumericOverflow("save_net: cannot open " + path);
    f << serialize_net(net);
}

LayeredNet load_net(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContractViolation("load_net: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return deserialize_net(os.str());
}

DivergenceValue kl_output_distribution(const LayeredNet& f, const LayeredNet& g,
                                       const SampleSet& sample, double floor, double floor_pre) {
    Matrix fo = forward(f, sample);
    Matrix go = forward(g, sample);
    if (fo.cols != 1 || go.cols != 1) {
        throw ContractViolation("kl_output_distribution: nets must emit scalar outputs");
    }
    const ProbVector fp = normalize_outputs(std::span<const double>(fo.a.data(), fo.a.size()), floor, floor_pre);
    const ProbVector gp = normalize_outputs(std::span<const double>(go.a.data(), go.a.size()), floor, floor_pre);
    DivergenceValue kl = kl_discrete(fp, gp);
    return {kl.value, DivKind::EmpiricalKL};
}

}  // namespace w2s
