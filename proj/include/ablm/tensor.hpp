#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ablm {

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
    os << ")";
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

// Dense row-major tensor of 64-bit floats. Values are treated as immutable
// once a tensor has been handed to a Tape.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;

    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_numel(shape) != data.size())
            throw DimensionError("tensor: shape " + shape_str(shape) + " does not match " +
                                 std::to_string(data.size()) + " values");
    }

    explicit Tensor(Shape s, double fill = 0.0)
        : shape(std::move(s)), data(shape_numel(shape), fill) {}

    static Tensor zeros(Shape s) { return Tensor(std::move(s), 0.0); }
    static Tensor ones(Shape s) { return Tensor(std::move(s), 1.0); }
    static Tensor full(Shape s, double v) { return Tensor(std::move(s), v); }
    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    static Tensor vec(std::initializer_list<double> v) {
        return Tensor(Shape{v.size()}, std::vector<double>(v));
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        std::size_t r = rows.size();
        std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> d;
        d.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("tensor: ragged initializer");
            d.insert(d.end(), row.begin(), row.end());
        }
        return Tensor(Shape{r, c}, std::move(d));
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool is_scalar() const { return data.size() == 1; }

    double& operator()(std::size_t i) { return data.at(check_index(i, 1)); }
    double operator()(std::size_t i) const { return data.at(check_index(i, 1)); }
    double& operator()(std::size_t i, std::size_t j) { return data.at(flat2(i, j)); }
    double operator()(std::size_t i, std::size_t j) const { return data.at(flat2(i, j)); }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) { return data.at(flat3(i, j, k)); }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const { return data.at(flat3(i, j, k)); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t check_index(std::size_t i, std::size_t want_rank) const {
        if (rank() != want_rank)
            throw IndexError("tensor: rank-" + std::to_string(want_rank) +
                             " access on shape " + shape_str(shape));
        if (i >= shape[0]) throw IndexError("tensor: index out of range");
        return i;
    }
    std::size_t flat2(std::size_t i, std::size_t j) const {
        if (rank() != 2 || i >= shape[0] || j >= shape[1])
            throw IndexError("tensor: bad 2-d index on shape " + shape_str(shape));
        return i * shape[1] + j;
    }
    std::size_t flat3(std::size_t i, std::size_t j, std::size_t k) const {
        if (rank() != 3 || i >= shape[0] || j >= shape[1] || k >= shape[2])
            throw IndexError("tensor: bad 3-d index on shape " + shape_str(shape));
        return (i * shape[1] + j) * shape[2] + k;
    }
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape)
        throw DimensionError("max_abs_diff: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

enum class Act { Sigmoid, Tanh, Softmax, Linear };

class Tape;

// Handle to a value recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;
};

// Reverse-mode gradient tape. Operations append nodes in topological order
// (inputs always precede their consumers); backward() replays the tape once,
// in reverse, with additive fan-out accumulation. backward() is const and
// allocates fresh gradient buffers, so repeated calls are bit-identical.
//
// A tape is single-writer: one training step owns one tape. Independent tapes
// may run concurrently.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }

    const Tensor& value(Var v) const {
        check_var(v);
        return nodes_[v.id].value;
    }

    Var leaf(Tensor value) {
        nodes_.push_back(Node{std::move(value), {}, nullptr});
        return Var{this, nodes_.size() - 1};
    }

    // --- recorded operations -------------------------------------------------

    Var matmul(Var av, Var bv) {
        const Tensor& a = value(av);
        const Tensor& b = value(bv);
        if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
            throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape) + " and " +
                                 shape_str(b.shape));
        const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
        Tensor out(Shape{m, n});
        const double* ap = a.data.data();
        const double* bp = b.data.data();
        double* cp = out.data.data();
        for (std::size_t i = 0; i < m; ++i) {
            double* ci = cp + i * n;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double aik = ap[i * k + kk];
                const double* bk = bp + kk * n;
                for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
            }
        }
        return record(std::move(out), {av.id, bv.id},
                      [m, k, n, a_id = av.id, b_id = bv.id](const Tape& t, const std::vector<double>& g,
                                                            Grads& grads) {
                          const double* ap = t.nodes_[a_id].value.data.data();
                          const double* bp = t.nodes_[b_id].value.data.data();
                          auto& da = acc(grads, a_id, m * k);
                          auto& db = acc(grads, b_id, k * n);
                          for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t kk = 0; kk < k; ++kk) {
                                  const double* bk = bp + kk * n;
                                  const double* gi = g.data() + i * n;
                                  double s = 0.0;
                                  for (std::size_t j = 0; j < n; ++j) s += gi[j] * bk[j];
                                  da[i * k + kk] += s;
                              }
                          }
                          for (std::size_t i = 0; i < m; ++i) {
                              const double* gi = g.data() + i * n;
                              for (std::size_t kk = 0; kk < k; ++kk) {
                                  const double aik = ap[i * k + kk];
                                  double* dbk = db.data() + kk * n;
                                  for (std::size_t j = 0; j < n; ++j) dbk[j] += aik * gi[j];
                              }
                          }
                      });
    }

    Var add(Var av, Var bv) {
        const Tensor& a = value(av);
        const Tensor& b = value(bv);
        if (a.shape != b.shape)
            throw DimensionError("add: shape mismatch " + shape_str(a.shape) + " vs " +
                                 shape_str(b.shape));
        Tensor out(a.shape);
        for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
        const std::size_t n = a.numel();
        return record(std::move(out), {av.id, bv.id},
                      [n, a_id = av.id, b_id = bv.id](const Tape&, const std::vector<double>& g,
                                                      Grads& grads) {
                          auto& da = acc(grads, a_id, n);
                          auto& db = acc(grads, b_id, n);
                          for (std::size_t i = 0; i < n; ++i) {
                              da[i] += g[i];
                              db[i] += g[i];
                          }
                      });
    }

    Var elementwise_mul(Var av, Var bv) {
        const Tensor& a = value(av);
        const Tensor& b = value(bv);
        if (a.shape != b.shape)
            throw DimensionError("elementwise_mul: shape mismatch " + shape_str(a.shape) + " vs " +
                                 shape_str(b.shape));
        Tensor out(a.shape);
        for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
        const std::size_t n = a.numel();
        return record(std::move(out), {av.id, bv.id},
                      [n, a_id = av.id, b_id = bv.id](const Tape& t, const std::vector<double>& g,
                                                      Grads& grads) {
                          const double* ap = t.nodes_[a_id].value.data.data();
                          const double* bp = t.nodes_[b_id].value.data.data();
                          auto& da = acc(grads, a_id, n);
                          auto& db = acc(grads, b_id, n);
                          for (std::size_t i = 0; i < n; ++i) {
                              da[i] += g[i] * bp[i];
                              db[i] += g[i] * ap[i];
                          }
                      });
    }

    Var activation(Var xv, Act kind) {
        const Tensor& x = value(xv);
        Tensor out(x.shape);
        const std::size_t n = x.numel();
        switch (kind) {
            case Act::Sigmoid:
                for (std::size_t i = 0; i < n; ++i) out.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
                break;
            case Act::Tanh:
                for (std::size_t i = 0; i < n; ++i) out.data[i] = std::tanh(x.data[i]);
                break;
            case Act::Linear:
                out.data = x.data;
                break;
            case Act::Softmax: {
                // row-wise over the last axis, max-subtracted for stability
                const std::size_t cols = x.rank() ? x.shape.back() : 1;
                const std::size_t rows = cols ? n / cols : 0;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* xi = x.data.data() + r * cols;
                    double* yi = out.data.data() + r * cols;
                    double mx = xi[0];
                    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
                    double sum = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) {
                        yi[j] = std::exp(xi[j] - mx);
                        sum += yi[j];
                    }
                    for (std::size_t j = 0; j < cols; ++j) yi[j] /= sum;
                }
                break;
            }
        }
        const std::size_t out_id = nodes_.size();
        const std::size_t cols = x.rank() ? x.shape.back() : 1;
        return record(std::move(out), {xv.id},
                      [n, cols, kind, x_id = xv.id, out_id](const Tape& t, const std::vector<double>& g,
                                                            Grads& grads) {
                          const double* y = t.nodes_[out_id].value.data.data();
                          auto& dx = acc(grads, x_id, n);
                          switch (kind) {
                              case Act::Sigmoid:
                                  for (std::size_t i = 0; i < n; ++i)
                                      dx[i] += g[i] * y[i] * (1.0 - y[i]);
                                  break;
                              case Act::Tanh:
                                  for (std::size_t i = 0; i < n; ++i)
                                      dx[i] += g[i] * (1.0 - y[i] * y[i]);
                                  break;
                              case Act::Linear:
                                  for (std::size_t i = 0; i < n; ++i) dx[i] += g[i];
                                  break;
                              case Act::Softmax: {
                                  const std::size_t rows = cols ? n / cols : 0;
                                  for (std::size_t r = 0; r < rows; ++r) {
                                      const double* yr = y + r * cols;
                                      const double* gr = g.data() + r * cols;
                                      double dot = 0.0;
                                      for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
                                      double* dr = dx.data() + r * cols;
                                      for (std::size_t j = 0; j < cols; ++j)
                                          dr[j] += yr[j] * (gr[j] - dot);
                                  }
                                  break;
                              }
                          }
                      });
    }

    Var mean_over_axis(Var xv, std::size_t axis) { return reduce_axis(xv, axis, true); }
    Var sum_over_axis(Var xv, std::size_t axis) { return reduce_axis(xv, axis, false); }

    // Replicates x along a new axis inserted at `axis`; every slice along the
    // new axis equals x.
    Var broadcast_over_axis(Var xv, std::size_t axis, std::size_t copies) {
        const Tensor& x = value(xv);
        if (copies < 1) throw ContractError("broadcast_over_axis: copies must be >= 1");
        if (axis > x.rank())
            throw IndexError("broadcast_over_axis: axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(x.shape));
        Shape os = x.shape;
        os.insert(os.begin() + static_cast<std::ptrdiff_t>(axis), copies);
        std::size_t outer = 1;
        for (std::size_t d = 0; d < axis; ++d) outer *= x.shape[d];
        const std::size_t inner = x.numel() / (outer ? outer : 1);
        Tensor out(os);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t c = 0; c < copies; ++c)
                for (std::size_t i = 0; i < inner; ++i)
                    out.data[(o * copies + c) * inner + i] = x.data[o * inner + i];
        return record(std::move(out), {xv.id},
                      [outer, copies, inner, n = x.numel(), x_id = xv.id](
                          const Tape&, const std::vector<double>& g, Grads& grads) {
                          auto& dx = acc(grads, x_id, n);
                          for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t c = 0; c < copies; ++c)
                                  for (std::size_t i = 0; i < inner; ++i)
                                      dx[o * inner + i] += g[(o * copies + c) * inner + i];
                      });
    }

    Var reshape(Var xv, Shape s) {
        const Tensor& x = value(xv);
        if (shape_numel(s) != x.numel())
            throw DimensionError("reshape: cannot view " + shape_str(x.shape) + " as " +
                                 shape_str(s));
        Tensor out(std::move(s), x.data);
        const std::size_t n = x.numel();
        return record(std::move(out), {xv.id},
                      [n, x_id = xv.id](const Tape&, const std::vector<double>& g, Grads& grads) {
                          auto& dx = acc(grads, x_id, n);
                          for (std::size_t i = 0; i < n; ++i) dx[i] += g[i];
                      });
    }

    // [B,T,F] -> [B,F] at time index t
    Var time_slice(Var xv, std::size_t t) {
        const Tensor& x = value(xv);
        if (x.rank() != 3)
            throw DimensionError("time_slice: want rank-3, got " + shape_str(x.shape));
        const std::size_t B = x.shape[0], T = x.shape[1], F = x.shape[2];
        if (t >= T) throw IndexError("time_slice: step " + std::to_string(t) + " out of range");
        Tensor out(Shape{B, F});
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t f = 0; f < F; ++f) out.data[b * F + f] = x.data[(b * T + t) * F + f];
        return record(std::move(out), {xv.id},
                      [B, T, F, t, n = x.numel(), x_id = xv.id](const Tape&,
                                                                const std::vector<double>& g,
                                                                Grads& grads) {
                          auto& dx = acc(grads, x_id, n);
                          for (std::size_t b = 0; b < B; ++b)
                              for (std::size_t f = 0; f < F; ++f)
                                  dx[(b * T + t) * F + f] += g[b * F + f];
                      });
    }

    // T tensors of shape [B,F] -> [B,T,F]
    Var stack_time(std::span<const Var> steps) {
        if (steps.empty()) throw ContractError("stack_time: empty sequence");
        const Tensor& first = value(steps[0]);
        if (first.rank() != 2)
            throw DimensionError("stack_time: want rank-2 steps, got " + shape_str(first.shape));
        const std::size_t B = first.shape[0], F = first.shape[1], T = steps.size();
        std::vector<std::size_t> ids(T);
        Tensor out(Shape{B, T, F});
        for (std::size_t t = 0; t < T; ++t) {
            const Tensor& xt = value(steps[t]);
            if (xt.shape != first.shape)
                throw DimensionError("stack_time: step " + std::to_string(t) + " has shape " +
                                     shape_str(xt.shape) + ", want " + shape_str(first.shape));
            ids[t] = steps[t].id;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t f = 0; f < F; ++f)
                    out.data[(b * T + t) * F + f] = xt.data[b * F + f];
        }
        return record(std::move(out), std::vector<std::size_t>(ids),
                      [B, T, F, ids](const Tape&, const std::vector<double>& g, Grads& grads) {
                          for (std::size_t t = 0; t < T; ++t) {
                              auto& dx = acc(grads, ids[t], B * F);
                              for (std::size_t b = 0; b < B; ++b)
                                  for (std::size_t f = 0; f < F; ++f)
                                      dx[b * F + f] += g[(b * T + t) * F + f];
                          }
                      });
    }

    // concatenation along the last axis; leading axes must agree
    Var concat_features(Var av, Var bv) {
        const Tensor& a = value(av);
        const Tensor& b = value(bv);
        if (a.rank() != b.rank() || a.rank() < 1)
            throw DimensionError("concat_features: rank mismatch " + shape_str(a.shape) + " vs " +
                                 shape_str(b.shape));
        for (std::size_t d = 0; d + 1 < a.rank(); ++d)
            if (a.shape[d] != b.shape[d])
                throw DimensionError("concat_features: leading axes disagree " +
                                     shape_str(a.shape) + " vs " + shape_str(b.shape));
        const std::size_t fa = a.shape.back(), fb = b.shape.back();
        const std::size_t rows = a.numel() / (fa ? fa : 1);
        Shape os = a.shape;
        os.back() = fa + fb;
        Tensor out(os);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < fa; ++j) out.data[r * (fa + fb) + j] = a.data[r * fa + j];
            for (std::size_t j = 0; j < fb; ++j)
                out.data[r * (fa + fb) + fa + j] = b.data[r * fb + j];
        }
        return record(std::move(out), {av.id, bv.id},
                      [rows, fa, fb, a_id = av.id, b_id = bv.id](const Tape&,
                                                                 const std::vector<double>& g,
                                                                 Grads& grads) {
                          auto& da = acc(grads, a_id, rows * fa);
                          auto& db = acc(grads, b_id, rows * fb);
                          for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t j = 0; j < fa; ++j)
                                  da[r * fa + j] += g[r * (fa + fb) + j];
                              for (std::size_t j = 0; j < fb; ++j)
                                  db[r * fb + j] += g[r * (fa + fb) + fa + j];
                          }
                      });
    }

    Var scale(Var xv, double c) {
        const Tensor& x = value(xv);
        Tensor out(x.shape);
        for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = c * x.data[i];
        return record(std::move(out), {xv.id},
                      [c, n = x.numel(), x_id = xv.id](const Tape&, const std::vector<double>& g,
                                                       Grads& grads) {
                          auto& dx = acc(grads, x_id, n);
                          for (std::size_t i = 0; i < n; ++i) dx[i] += c * g[i];
                      });
    }

    // log(max(x, eps)); the clamp keeps cross-entropy away from log(0)
    Var log_clamped(Var xv, double eps) {
        const Tensor& x = value(xv);
        Tensor out(x.shape);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            out.data[i] = std::log(std::max(x.data[i], eps));
        return record(std::move(out), {xv.id},
                      [eps, n = x.numel(), x_id = xv.id](const Tape& t, const std::vector<double>& g,
                                                         Grads& grads) {
                          const double* xp = t.nodes_[x_id].value.data.data();
                          auto& dx = acc(grads, x_id, n);
                          for (std::size_t i = 0; i < n; ++i)
                              if (xp[i] > eps) dx[i] += g[i] / xp[i];
                      });
    }

    // --- backward ------------------------------------------------------------

    // Gradients of a scalar loss with respect to `wrt`, in order. Nodes not on
    // a path to the loss get zero gradients.
    std::vector<Tensor> backward(Var loss, std::span<const Var> wrt) const {
        check_var(loss);
        if (!nodes_[loss.id].value.is_scalar())
            throw ContractError("backward: loss must be scalar, got shape " +
                                 shape_str(nodes_[loss.id].value.shape));
        Grads grads(nodes_.size());
        grads[loss.id].assign(1, 1.0);
        for (std::size_t id = loss.id + 1; id-- > 0;) {
            const Node& node = nodes_[id];
            if (grads[id].empty() || !node.backprop) continue;
            node.backprop(*this, grads[id], grads);
        }
        std::vector<Tensor> out;
        out.reserve(wrt.size());
        for (Var v : wrt) {
            check_var(v);
            const Tensor& val = nodes_[v.id].value;
            if (grads[v.id].empty())
                out.push_back(Tensor::zeros(val.shape));
            else
                out.push_back(Tensor(val.shape, std::move(grads[v.id])));
        }
        return out;
    }

private:
    using Grads = std::vector<std::vector<double>>;

    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        std::function<void(const Tape&, const std::vector<double>&, Grads&)> backprop;
    };

    std::vector<Node> nodes_;

    void check_var(Var v) const {
        if (v.tape != this || v.id >= nodes_.size())
            throw ContractError("var does not belong to this tape");
    }

    static std::vector<double>& acc(Grads& grads, std::size_t id, std::size_t n) {
        auto& g = grads[id];
        if (g.empty()) g.assign(n, 0.0);
        return g;
    }

    template <typename F>
    Var record(Tensor value, std::vector<std::size_t> inputs, F&& backprop) {
        for (std::size_t in : inputs)
            if (in >= nodes_.size()) throw ContractError("tape: input precedes nothing");
        nodes_.push_back(Node{std::move(value), std::move(inputs), std::forward<F>(backprop)});
        return Var{this, nodes_.size() - 1};
    }

    Var reduce_axis(Var xv, std::size_t axis, bool mean) {
        const Tensor& x = value(xv);
        if (axis >= x.rank())
            throw IndexError("reduce over axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(x.shape));
        std::size_t outer = 1, inner = 1;
        for (std::size_t d = 0; d < axis; ++d) outer *= x.shape[d];
        for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape[d];
        const std::size_t len = x.shape[axis];
        Shape os = x.shape;
        os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
        Tensor out(os);
        const double w = mean ? 1.0 / static_cast<double>(len) : 1.0;
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t a = 0; a < len; ++a)
                for (std::size_t i = 0; i < inner; ++i)
                    out.data[o * inner + i] += w * x.data[(o * len + a) * inner + i];
        return record(std::move(out), {xv.id},
                      [outer, len, inner, w, n = x.numel(), x_id = xv.id](
                          const Tape&, const std::vector<double>& g, Grads& grads) {
                          auto& dx = acc(grads, x_id, n);
                          for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t a = 0; a < len; ++a)
                                  for (std::size_t i = 0; i < inner; ++i)
                                      dx[(o * len + a) * inner + i] += w * g[o * inner + i];
                      });
    }
};

// Free-function spellings used by the model code.
inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var add(Var a, Var b) { return a.tape->add(a, b); }
inline Var elementwise_mul(Var a, Var b) { return a.tape->elementwise_mul(a, b); }
inline Var activation(Var x, Act kind) { return x.tape->activation(x, kind); }
inline Var mean_over_axis(Var x, std::size_t axis) { return x.tape->mean_over_axis(x, axis); }
inline Var sum_over_axis(Var x, std::size_t axis) { return x.tape->sum_over_axis(x, axis); }
inline Var broadcast_over_axis(Var x, std::size_t axis, std::size_t copies) {
    return x.tape->broadcast_over_axis(x, axis, copies);
}
inline Var reshape(Var x, Shape s) { return x.tape->reshape(x, std::move(s)); }
inline Var time_slice(Var x, std::size_t t) { return x.tape->time_slice(x, t); }
inline Var stack_time(std::span<const Var> steps) {
    return steps.empty() ? Var{} : steps[0].tape->stack_time(steps);
}
inline Var concat_features(Var a, Var b) { return a.tape->concat_features(a, b); }
inline Var scale(Var x, double c) { return x.tape->scale(x, c); }
inline Var log_clamped(Var x, double eps) { return x.tape->log_clamped(x, eps); }

}  // namespace ablm
