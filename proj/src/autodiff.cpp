#include "vcmesh/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "vcmesh/error.hpp"
#include "vcmesh/rng.hpp"

namespace vcmesh {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw InputError(what);
}

}  // namespace

uint64_t Tape::next_serial() {
    static std::atomic<uint64_t> counter{0};
    return ++counter;
}

Value Tape::push(Tensor value, std::vector<int> parents,
                 std::function<void(Tape&, const Tensor&)> pull) {
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(pull), nullptr});
    return Value{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Value v) const {
    require(v.valid() && v.id < static_cast<int>(nodes_.size()), "value does not belong to this tape");
    return nodes_[static_cast<size_t>(v.id)];
}

const Tensor& Tape::value(Value v) const {
    return node(v).value;
}

void Tape::accumulate(int id, const Tensor& g) {
    auto idx = static_cast<size_t>(id);
    if (!has_grad_[idx]) {
        grads_[idx] = g;
        has_grad_[idx] = 1;
        return;
    }
    Tensor& dst = grads_[idx];
    double* d = dst.data();
    const double* s = g.data();
    int64_t n = dst.numel();
    for (int64_t i = 0; i < n; ++i) d[i] += s[i];
}

Tensor Tape::gradient(Value v) const {
    const Node& n = node(v);
    auto idx = static_cast<size_t>(v.id);
    if (idx < grads_.size() && has_grad_[idx]) return grads_[idx];
    return Tensor::zeros(n.value.shape());
}

void Tape::backward(Value loss) {
    const Node& top = node(loss);
    require(top.value.numel() == 1, "backward needs a scalar loss");
    grads_.assign(nodes_.size(), Tensor());
    has_grad_.assign(nodes_.size(), 0);
    accumulate(loss.id, Tensor::full(top.value.shape(), 1.0));
    for (int id = loss.id; id >= 0; --id) {
        auto idx = static_cast<size_t>(id);
        if (!has_grad_[idx]) continue;
        Node& n = nodes_[idx];
        if (n.bound) {
            double* pg = n.bound->grad.data();
            const double* g = grads_[idx].data();
            int64_t cnt = n.bound->grad.numel();
            for (int64_t i = 0; i < cnt; ++i) pg[i] += g[i];
        }
        if (n.pull) n.pull(*this, grads_[idx]);
    }
}

Value Tape::input(Tensor t) {
    return push(std::move(t), {}, nullptr);
}

Value Tape::param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Value{it->second};
    Value v = push(p.value, {}, nullptr);
    nodes_.back().bound = &p;
    param_nodes_.emplace(&p, v.id);
    return v;
}

Value Tape::add(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.same_shape(tb), "add needs matching shapes");
    Tensor out = ta;
    double* o = out.data();
    const double* pb = tb.data();
    int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) o[i] += pb[i];
    return push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a.id, g);
        t.accumulate(b.id, g);
    });
}

Value Tape::sub(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.same_shape(tb), "sub needs matching shapes");
    Tensor out = ta;
    double* o = out.data();
    const double* pb = tb.data();
    int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) o[i] -= pb[i];
    return push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a.id, g);
        Tensor neg = g;
        double* d = neg.data();
        int64_t cnt = neg.numel();
        for (int64_t i = 0; i < cnt; ++i) d[i] = -d[i];
        t.accumulate(b.id, neg);
    });
}

Value Tape::mul(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.same_shape(tb), "mul needs matching shapes");
    Tensor out = ta;
    double* o = out.data();
    const double* pb = tb.data();
    int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) o[i] *= pb[i];
    return push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Tensor& g) {
        const Tensor& va = t.value(a);
        const Tensor& vb = t.value(b);
        Tensor da = g;
        Tensor db = g;
        double* pda = da.data();
        double* pdb = db.data();
        const double* pa = va.data();
        const double* pb2 = vb.data();
        int64_t cnt = g.numel();
        for (int64_t i = 0; i < cnt; ++i) {
            pda[i] *= pb2[i];
            pdb[i] *= pa[i];
        }
        t.accumulate(a.id, da);
        t.accumulate(b.id, db);
    });
}

Value Tape::div(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.same_shape(tb), "div needs matching shapes");
    Tensor out = ta;
    double* o = out.data();
    const double* pb = tb.data();
    int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) o[i] /= pb[i];
    return push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Tensor& g) {
        const Tensor& va = t.value(a);
        const Tensor& vb = t.value(b);
        Tensor da = g;
        Tensor db = g;
        double* pda = da.data();
        double* pdb = db.data();
        const double* pa = va.data();
        const double* pb2 = vb.data();
        int64_t cnt = g.numel();
        for (int64_t i = 0; i < cnt; ++i) {
            pda[i] /= pb2[i];
            pdb[i] *= -pa[i] / (pb2[i] * pb2[i]);
        }
        t.accumulate(a.id, da);
        t.accumulate(b.id, db);
    });
}

Value Tape::scale(Value a, double c) {
    Tensor out = value(a);
    double* o = out.data();
    int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) o[i] *= c;
    return push(std::move(out), {a.id}, [a, c](Tape& t, const Tensor& g) {
        Tensor da = g;
        double* d = da.data();
        int64_t cnt = da.numel();
        for (int64_t i = 0; i < cnt; ++i) d[i] *= c;
        t.accumulate(a.id, da);
    });
}

Value Tape::abs(Value a) {
    Tensor out = value(a);
    double* o = out.data();
    int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) o[i] = std::fabs(o[i]);
    return push(std::move(out), {a.id}, [a](Tape& t, const Tensor& g) {
        const Tensor& va = t.value(a);
        Tensor da = g;
        double* d = da.data();
        const double* pa = va.data();
        int64_t cnt = da.numel();
        for (int64_t i = 0; i < cnt; ++i) {
            double s = pa[i] > 0.0 ? 1.0 : (pa[i] < 0.0 ? -1.0 : 0.0);
            d[i] *= s;
        }
        t.accumulate(a.id, da);
    });
}

Value Tape::elu(Value a) {
    Tensor out = value(a);
    double* o = out.data();
    int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        double x = o[i];
        o[i] = x > 0.0 ? x : std::expm1(x);
    }
    return push(std::move(out), {a.id}, [a](Tape& t, const Tensor& g) {
        const Tensor& va = t.value(a);
        Tensor da = g;
        double* d = da.data();
        const double* pa = va.data();
        int64_t cnt = da.numel();
        for (int64_t i = 0; i < cnt; ++i) {
            double x = pa[i];
            d[i] *= x > 0.0 ? 1.0 : std::exp(x);
        }
        t.accumulate(a.id, da);
    });
}

Value Tape::sum(Value a) {
    const Tensor& ta = value(a);
    const double* pa = ta.data();
    int64_t n = ta.numel();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += pa[i];
    return push(Tensor::scalar(s), {a.id}, [a](Tape& t, const Tensor& g) {
        const Tensor& va = t.value(a);
        t.accumulate(a.id, Tensor::full(va.shape(), g(0)));
    });
}

Value Tape::matmul(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.rank() == 2 && tb.rank() == 2, "matmul needs rank-2 tensors");
    require(ta.dim(1) == tb.dim(0), "matmul inner dimensions disagree");
    int64_t n = ta.dim(0), k = ta.dim(1), m = tb.dim(1);
    Tensor out({n, m});
    {
        const double* pa = ta.data();
        const double* pb = tb.data();
        double* po = out.data();
        for (int64_t i = 0; i < n; ++i) {
            const double* arow = pa + i * k;
            double* orow = po + i * m;
            for (int64_t p = 0; p < k; ++p) {
                double av = arow[p];
                if (av == 0.0) continue;
                const double* brow = pb + p * m;
                for (int64_t j = 0; j < m; ++j) orow[j] += av * brow[j];
            }
        }
    }
    return push(std::move(out), {a.id, b.id}, [a, b, n, k, m](Tape& t, const Tensor& g) {
        const Tensor& va = t.value(a);
        const Tensor& vb = t.value(b);
        Tensor da({n, k});
        Tensor db({k, m});
        const double* pa = va.data();
        const double* pb = vb.data();
        const double* pg = g.data();
        double* pda = da.data();
        double* pdb = db.data();
        for (int64_t i = 0; i < n; ++i) {
            const double* grow = pg + i * m;
            double* darow = pda + i * k;
            for (int64_t p = 0; p < k; ++p) {
                const double* brow = pb + p * m;
                double dot = 0.0;
                for (int64_t j = 0; j < m; ++j) dot += grow[j] * brow[j];
                darow[p] = dot;
            }
            const double* arow = pa + i * k;
            for (int64_t p = 0; p < k; ++p) {
                double av = arow[p];
                if (av == 0.0) continue;
                double* dbrow = pdb + p * m;
                for (int64_t j = 0; j < m; ++j) dbrow[j] += av * grow[j];
            }
        }
        t.accumulate(a.id, da);
        t.accumulate(b.id, db);
    });
}

Value Tape::transpose(Value a) {
    const Tensor& ta = value(a);
    require(ta.rank() == 2, "transpose needs a rank-2 tensor");
    int64_t n = ta.dim(0), m = ta.dim(1);
    Tensor out({m, n});
    const double* pa = ta.data();
    double* po = out.data();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) po[j * n + i] = pa[i * m + j];
    return push(std::move(out), {a.id}, [a, n, m](Tape& t, const Tensor& g) {
        Tensor da({n, m});
        const double* pg = g.data();
        double* pd = da.data();
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < m; ++j) pd[i * m + j] = pg[j * n + i];
        t.accumulate(a.id, da);
    });
}

Value Tape::add_bias(Value rows, Value bias) {
    const Tensor& tr = value(rows);
    const Tensor& tb = value(bias);
    require(tr.rank() >= 1, "add_bias needs a matrix");
    require(tb.numel() == tr.cols(), "bias width disagrees with rows");
    Tensor out = tr;
    int64_t n = tr.rows(), c = tr.cols();
    double* po = out.data();
    const double* pb = tb.data();
    for (int64_t i = 0; i < n; ++i) {
        double* row = po + i * c;
        for (int64_t j = 0; j < c; ++j) row[j] += pb[j];
    }
    return push(std::move(out), {rows.id, bias.id}, [rows, bias, n, c](Tape& t, const Tensor& g) {
        t.accumulate(rows.id, g);
        Tensor db = Tensor::zeros(t.value(bias).shape());
        double* pd = db.data();
        const double* pg = g.data();
        for (int64_t i = 0; i < n; ++i) {
            const double* row = pg + i * c;
            for (int64_t j = 0; j < c; ++j) pd[j] += row[j];
        }
        t.accumulate(bias.id, db);
    });
}

Value Tape::reshape(Value a, std::vector<int64_t> shape) {
    const Tensor& ta = value(a);
    require(Tensor::count(shape) == ta.numel(), "reshape changes element count");
    Tensor out = Tensor::from(std::move(shape), ta.values());
    return push(std::move(out), {a.id}, [a](Tape& t, const Tensor& g) {
        const Tensor& va = t.value(a);
        t.accumulate(a.id, Tensor::from(va.shape(), g.values()));
    });
}

Value Tape::concat_rows(const std::vector<Value>& parts) {
    require(!parts.empty(), "concat_rows needs at least one part");
    int64_t cols = value(parts[0]).cols();
    int64_t rows = 0;
    for (Value p : parts) {
        require(value(p).cols() == cols, "concat_rows needs equal widths");
        rows += value(p).rows();
    }
    std::vector<int64_t> shape = value(parts[0]).shape();
    shape[0] = rows;
    Tensor out(shape);
    int64_t at = 0;
    std::vector<int> ids;
    std::vector<int64_t> extents;
    for (Value p : parts) {
        const Tensor& tp = value(p);
        std::copy(tp.data(), tp.data() + tp.numel(), out.data() + at * cols);
        at += tp.rows();
        ids.push_back(p.id);
        extents.push_back(tp.rows());
    }
    return push(std::move(out), ids, [ids, extents, cols](Tape& t, const Tensor& g) {
        int64_t at = 0;
        for (size_t i = 0; i < ids.size(); ++i) {
            const Tensor& vp = t.value(Value{ids[i]});
            Tensor dp = Tensor::zeros(vp.shape());
            std::copy(g.data() + at * cols, g.data() + (at + extents[i]) * cols, dp.data());
            t.accumulate(ids[i], dp);
            at += extents[i];
        }
    });
}

Value Tape::gather_rows(Value a, std::vector<int> rows) {
    const Tensor& ta = value(a);
    int64_t n = ta.rows(), c = ta.cols();
    for (int r : rows) require(r >= 0 && r < n, "gather_rows index out of range");
    std::vector<int64_t> shape = ta.shape();
    require(!shape.empty(), "gather_rows needs at least rank 1");
    shape[0] = static_cast<int64_t>(rows.size());
    Tensor out(shape);
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy(ta.data() + rows[i] * c, ta.data() + (rows[i] + 1) * c,
                  out.data() + static_cast<int64_t>(i) * c);
    return push(std::move(out), {a.id}, [a, rows = std::move(rows), c](Tape& t, const Tensor& g) {
        const Tensor& va = t.value(a);
        Tensor da = Tensor::zeros(va.shape());
        for (size_t i = 0; i < rows.size(); ++i) {
            const double* src = g.data() + static_cast<int64_t>(i) * c;
            double* dst = da.data() + rows[i] * c;
            for (int64_t j = 0; j < c; ++j) dst[j] += src[j];
        }
        t.accumulate(a.id, da);
    });
}

Value Tape::scatter_rows(Value a, std::vector<int> owners, int out_rows) {
    const Tensor& ta = value(a);
    require(static_cast<int64_t>(owners.size()) == ta.rows(), "one owner per row required");
    for (int o : owners) require(o >= 0 && o < out_rows, "scatter_rows owner out of range");
    int64_t c = ta.cols();
    std::vector<int64_t> shape = ta.shape();
    require(!shape.empty(), "scatter_rows needs at least rank 1");
    shape[0] = out_rows;
    Tensor out(shape);
    for (size_t i = 0; i < owners.size(); ++i) {
        const double* src = ta.data() + static_cast<int64_t>(i) * c;
        double* dst = out.data() + owners[i] * c;
        for (int64_t j = 0; j < c; ++j) dst[j] += src[j];
    }
    return push(std::move(out), {a.id}, [a, owners = std::move(owners), c](Tape& t, const Tensor& g) {
        const Tensor& va = t.value(a);
        Tensor da = Tensor::zeros(va.shape());
        for (size_t i = 0; i < owners.size(); ++i)
            std::copy(g.data() + owners[i] * c, g.data() + (owners[i] + 1) * c,
                      da.data() + static_cast<int64_t>(i) * c);
        t.accumulate(a.id, da);
    });
}

Value Tape::scale_rows(Value a, Value scales) {
    const Tensor& ta = value(a);
    const Tensor& ts = value(scales);
    require(ts.numel() == ta.rows(), "one scale per row required");
    int64_t n = ta.rows(), c = ta.cols();
    Tensor out = ta;
    double* po = out.data();
    const double* ps = ts.data();
    for (int64_t i = 0; i < n; ++i) {
        double s = ps[i];
        double* row = po + i * c;
        for (int64_t j = 0; j < c; ++j) row[j] *= s;
    }
    return push(std::move(out), {a.id, scales.id}, [a, scales, n, c](Tape& t, const Tensor& g) {
        const Tensor& va = t.value(a);
        const Tensor& vs = t.value(scales);
        Tensor da = g;
        Tensor ds = Tensor::zeros(vs.shape());
        double* pda = da.data();
        double* pds = ds.data();
        const double* pa = va.data();
        const double* ps = vs.data();
        const double* pg = g.data();
        for (int64_t i = 0; i < n; ++i) {
            double s = ps[i];
            double dot = 0.0;
            const double* grow = pg + i * c;
            const double* arow = pa + i * c;
            double* darow = pda + i * c;
            for (int64_t j = 0; j < c; ++j) {
                darow[j] *= s;
                dot += grow[j] * arow[j];
            }
            pds[i] = dot;
        }
        t.accumulate(a.id, da);
        t.accumulate(scales.id, ds);
    });
}

Value Tape::slot_matmul(Value w, Value x) {
    const Tensor& tw = value(w);
    const Tensor& tx = value(x);
    require(tw.rank() == 3, "slot_matmul weights need shape {slots, in, out}");
    require(tx.rank() == 2, "slot_matmul features need shape {slots, in}");
    int64_t q = tw.dim(0), in = tw.dim(1), out_c = tw.dim(2);
    require(tx.dim(0) == q && tx.dim(1) == in, "slot_matmul extents disagree");
    Tensor out({q, out_c});
    {
        const double* pw = tw.data();
        const double* px = tx.data();
        double* po = out.data();
        for (int64_t s = 0; s < q; ++s) {
            const double* wrow = pw + s * in * out_c;
            const double* xrow = px + s * in;
            double* orow = po + s * out_c;
            for (int64_t i = 0; i < in; ++i) {
                double xv = xrow[i];
                if (xv == 0.0) continue;
                const double* wline = wrow + i * out_c;
                for (int64_t o = 0; o < out_c; ++o) orow[o] += xv * wline[o];
            }
        }
    }
    return push(std::move(out), {w.id, x.id}, [w, x, q, in, out_c](Tape& t, const Tensor& g) {
        const Tensor& vw = t.value(w);
        const Tensor& vx = t.value(x);
        Tensor dw = Tensor::zeros(vw.shape());
        Tensor dx = Tensor::zeros(vx.shape());
        const double* pw = vw.data();
        const double* px = vx.data();
        const double* pg = g.data();
        double* pdw = dw.data();
        double* pdx = dx.data();
        for (int64_t s = 0; s < q; ++s) {
            const double* grow = pg + s * out_c;
            const double* wrow = pw + s * in * out_c;
            const double* xrow = px + s * in;
            double* dwrow = pdw + s * in * out_c;
            double* dxrow = pdx + s * in;
            for (int64_t i = 0; i < in; ++i) {
                double xv = xrow[i];
                const double* wline = wrow + i * out_c;
                double* dwline = dwrow + i * out_c;
                double dot = 0.0;
                for (int64_t o = 0; o < out_c; ++o) {
                    dwline[o] = grow[o] * xv;
                    dot += grow[o] * wline[o];
                }
                dxrow[i] = dot;
            }
        }
        t.accumulate(w.id, dw);
        t.accumulate(x.id, dx);
    });
}

Value Tape::normalize_rows(Value a, double eps) {
    const Tensor& ta = value(a);
    require(eps > 0.0, "normalize_rows needs a positive eps");
    int64_t n = ta.rows(), c = ta.cols();
    Tensor out = ta;
    std::vector<double> norms(static_cast<size_t>(n));
    double* po = out.data();
    for (int64_t i = 0; i < n; ++i) {
        double* row = po + i * c;
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) s += row[j] * row[j];
        double norm = std::sqrt(s);
        norms[static_cast<size_t>(i)] = norm;
        double d = norm > eps ? norm : eps;
        for (int64_t j = 0; j < c; ++j) row[j] /= d;
    }
    return push(std::move(out), {a.id},
                [a, eps, norms = std::move(norms), n, c](Tape& t, const Tensor& g) {
                    const Tensor& va = t.value(a);
                    Tensor da = Tensor::zeros(va.shape());
                    const double* pa = va.data();
                    const double* pg = g.data();
                    double* pd = da.data();
                    for (int64_t i = 0; i < n; ++i) {
                        double norm = norms[static_cast<size_t>(i)];
                        const double* arow = pa + i * c;
                        const double* grow = pg + i * c;
                        double* drow = pd + i * c;
                        if (norm > eps) {
                            double dot = 0.0;
                            for (int64_t j = 0; j < c; ++j) dot += arow[j] * grow[j];
                            double n3 = norm * norm * norm;
                            for (int64_t j = 0; j < c; ++j)
                                drow[j] = grow[j] / norm - arow[j] * dot / n3;
                        } else {
                            for (int64_t j = 0; j < c; ++j) drow[j] = grow[j] / eps;
                        }
                    }
                    t.accumulate(a.id, da);
                });
}

Value Tape::segment_max(Value a, std::vector<int> owners, int out_rows) {
    const Tensor& ta = value(a);
    require(static_cast<int64_t>(owners.size()) == ta.rows(), "one owner per row required");
    for (int o : owners) require(o >= 0 && o < out_rows, "segment_max owner out of range");
    int64_t c = ta.cols();
    std::vector<int64_t> shape = ta.shape();
    require(!shape.empty(), "segment_max needs at least rank 1");
    shape[0] = out_rows;
    Tensor out(shape);
    std::vector<int> argmax(static_cast<size_t>(out_rows) * static_cast<size_t>(c), -1);
    for (size_t s = 0; s < owners.size(); ++s) {
        int o = owners[s];
        for (int64_t j = 0; j < c; ++j) {
            size_t cell = static_cast<size_t>(o) * static_cast<size_t>(c) + static_cast<size_t>(j);
            double v = ta(static_cast<int64_t>(s), j);
            if (argmax[cell] < 0 || v > out(o, j)) {
                out(o, j) = v;
                argmax[cell] = static_cast<int>(s);
            }
        }
    }
    return push(std::move(out), {a.id},
                [a, argmax = std::move(argmax), c](Tape& t, const Tensor& g) {
                    const Tensor& va = t.value(a);
                    Tensor da = Tensor::zeros(va.shape());
                    int64_t out_rows = g.rows();
                    for (int64_t o = 0; o < out_rows; ++o) {
                        for (int64_t j = 0; j < c; ++j) {
                            int s = argmax[static_cast<size_t>(o) * static_cast<size_t>(c) +
                                           static_cast<size_t>(j)];
                            if (s >= 0) da(s, j) += g(o, j);
                        }
                    }
                    t.accumulate(a.id, da);
                });
}

Value weighted_scatter_add(Tape& tape, Value rows, Value weights, std::vector<int> owners,
                           int out_rows) {
    return tape.scatter_rows(tape.scale_rows(rows, weights), std::move(owners), out_rows);
}

GradCheckReport grad_check(const std::vector<Parameter*>& params,
                           const std::function<Value(Tape&)>& forward, double eps, double tol,
                           int64_t checks_per_param, uint64_t seed) {
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        Value loss = forward(tape);
        if (tape.value(loss).numel() != 1) throw InputError("grad_check needs a scalar loss");
        tape.backward(loss);
    }
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    auto eval = [&]() {
        Tape tape;
        Value loss = forward(tape);
        return tape.value(loss)(0);
    };

    Rng rng(seed);
    GradCheckReport report;
    report.passed = true;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        std::vector<int64_t> picks;
        if (checks_per_param <= 0 || checks_per_param >= p.numel()) {
            picks.resize(static_cast<size_t>(p.numel()));
            for (int64_t i = 0; i < p.numel(); ++i) picks[static_cast<size_t>(i)] = i;
        } else {
            for (int64_t i = 0; i < checks_per_param; ++i) picks.push_back(rng.uniform_int(p.numel()));
            std::sort(picks.begin(), picks.end());
            picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
        }
        for (int64_t i : picks) {
            double saved = p.value(i);
            p.value(i) = saved + eps;
            double up = eval();
            p.value(i) = saved - eps;
            double down = eval();
            p.value(i) = saved;
            double numeric = (up - down) / (2.0 * eps);
            double a = analytic[pi](i);
            double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
            double rel = std::fabs(a - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst = GradCheckEntry{p.name, i, a, numeric, rel};
            }
        }
    }
    report.passed = report.max_rel_error <= tol;
    return report;
}

}  // namespace vcmesh
