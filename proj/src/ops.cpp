#include "hoiprompt/ops.hpp"

#include <cmath>

namespace hoi {

namespace {

template <typename S>
void require_same_shape(const char* op, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
  }
}

template <typename S>
Node<S>& parent(Node<S>& self, std::size_t i) {
  return *self.parents[i];
}

}  // namespace

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()));
  }
  Matrix<S> out = a.value() * b.value();
  return make_op<S>("matmul", std::move(out), {a, b}, [](Node<S>& self) {
    const S sign = fault_sign<S>("matmul");
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(sign * (self.grad * pb.value.transpose()));
    if (pb.requires_grad) pb.accumulate(sign * (pa.value.transpose() * self.grad));
  });
}

template <typename S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()) + "^T");
  }
  Matrix<S> out = a.value() * b.value().transpose();
  return make_op<S>("matmul_nt", std::move(out), {a, b}, [](Node<S>& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad * pb.value);
    if (pb.requires_grad) pb.accumulate(self.grad.transpose() * pa.value);
  });
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  Matrix<S> out = a.value().transpose();
  return make_op<S>("transpose", std::move(out), {a}, [](Node<S>& self) {
    parent(self, 0).accumulate(self.grad.transpose());
  });
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape("add", a, b);
  Matrix<S> out = a.value() + b.value();
  return make_op<S>("add", std::move(out), {a, b}, [](Node<S>& self) {
    parent(self, 0).accumulate(self.grad);
    parent(self, 1).accumulate(self.grad);
  });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape("sub", a, b);
  Matrix<S> out = a.value() - b.value();
  return make_op<S>("sub", std::move(out), {a, b}, [](Node<S>& self) {
    parent(self, 0).accumulate(self.grad);
    parent(self, 1).accumulate(-self.grad);
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape("mul", a, b);
  Matrix<S> out = a.value().cwiseProduct(b.value());
  return make_op<S>("mul", std::move(out), {a, b}, [](Node<S>& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(self.grad.cwiseProduct(pa.value));
  });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S factor) {
  Matrix<S> out = a.value() * factor;
  return make_op<S>("scale", std::move(out), {a}, [factor](Node<S>& self) {
    parent(self, 0).accumulate(self.grad * factor);
  });
}

template <typename S>
Tensor<S> scale_by(const Tensor<S>& a, const Tensor<S>& s) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw DimensionError("scale_by: factor must be 1x1, got " + shape_string(s.rows(), s.cols()));
  }
  Matrix<S> out = a.value() * s.value()(0, 0);
  return make_op<S>("scale_by", std::move(out), {a, s}, [](Node<S>& self) {
    const S sign = fault_sign<S>("scale_by");
    auto& pa = parent(self, 0);
    auto& ps = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad * ps.value(0, 0));
    if (ps.requires_grad) {
      Matrix<S> g(1, 1);
      g(0, 0) = sign * self.grad.cwiseProduct(pa.value).sum();
      ps.accumulate(g);
    }
  });
}

template <typename S>
Tensor<S> add_bias(const Tensor<S>& a, const Tensor<S>& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionError("add_bias: bias " + shape_string(bias.rows(), bias.cols()) + " does not fit " +
                         shape_string(a.rows(), a.cols()));
  }
  Matrix<S> out = a.value().rowwise() + bias.value().row(0);
  return make_op<S>("add_bias", std::move(out), {a, bias}, [](Node<S>& self) {
    const S sign = fault_sign<S>("add_bias");
    parent(self, 0).accumulate(self.grad);
    auto& pb = parent(self, 1);
    if (pb.requires_grad) pb.accumulate(sign * self.grad.colwise().sum());
  });
}

template <typename S>
Tensor<S> scale_rows(const Tensor<S>& a, const RowVector<S>& weights) {
  if (weights.size() != a.rows()) {
    throw DimensionError("scale_rows: " + std::to_string(weights.size()) + " weights for " +
                         shape_string(a.rows(), a.cols()));
  }
  Matrix<S> out = weights.transpose().asDiagonal() * a.value();
  return make_op<S>("scale_rows", std::move(out), {a}, [weights](Node<S>& self) {
    parent(self, 0).accumulate(weights.transpose().asDiagonal() * self.grad);
  });
}

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Index rows = 0;
  const Index cols = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts.front().rows(), cols) + " vs " +
                           shape_string(p.rows(), p.cols()));
    }
    rows += p.rows();
  }
  Matrix<S> out(rows, cols);
  Index offset = 0;
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return make_op_n<S>("concat_rows", std::move(out), parts, [](Node<S>& self) {
    Index off = 0;
    for (auto& p : self.parents) {
      const Index r = p->value.rows();
      if (p->requires_grad) p->accumulate(self.grad.middleRows(off, r));
      off += r;
    }
  });
}

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Index cols = 0;
  const Index rows = parts.front().rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(rows, parts.front().cols()) + " vs " +
                           shape_string(p.rows(), p.cols()));
    }
    cols += p.cols();
  }
  Matrix<S> out(rows, cols);
  Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return make_op_n<S>("concat_cols", std::move(out), parts, [](Node<S>& self) {
    Index off = 0;
    for (auto& p : self.parents) {
      const Index c = p->value.cols();
      if (p->requires_grad) p->accumulate(self.grad.middleCols(off, c));
      off += c;
    }
  });
}

template <typename S>
Tensor<S> slice_rows(const Tensor<S>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of " + shape_string(a.rows(), a.cols()));
  }
  Matrix<S> out = a.value().middleRows(start, count);
  return make_op<S>("slice_rows", std::move(out), {a}, [start, count](Node<S>& self) {
    auto& pa = parent(self, 0);
    Matrix<S> g = Matrix<S>::Zero(pa.value.rows(), pa.value.cols());
    g.middleRows(start, count) = self.grad;
    pa.accumulate(g);
  });
}

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of " + shape_string(a.rows(), a.cols()));
  }
  Matrix<S> out = a.value().middleCols(start, count);
  return make_op<S>("slice_cols", std::move(out), {a}, [start, count](Node<S>& self) {
    auto& pa = parent(self, 0);
    Matrix<S> g = Matrix<S>::Zero(pa.value.rows(), pa.value.cols());
    g.middleCols(start, count) = self.grad;
    pa.accumulate(g);
  });
}

namespace {

template <typename S>
Matrix<S> softmax_values(const Matrix<S>& x) {
  Matrix<S> y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const S m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

}  // namespace

template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& a) {
  Matrix<S> out = softmax_values(a.value());
  return make_op<S>("softmax", std::move(out), {a}, [](Node<S>& self) {
    const S sign = fault_sign<S>("softmax");
    const Matrix<S>& y = self.value;
    Matrix<S> dot = (self.grad.cwiseProduct(y)).rowwise().sum();
    Matrix<S> g = y.cwiseProduct(self.grad - dot.replicate(1, y.cols()));
    parent(self, 0).accumulate(sign * g);
  });
}

template <typename S>
Tensor<S> log_softmax_rows(const Tensor<S>& a) {
  const Matrix<S>& x = a.value();
  Matrix<S> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const S m = x.row(i).maxCoeff();
    const S lse = m + std::log((x.row(i).array() - m).exp().sum());
    out.row(i) = (x.row(i).array() - lse).matrix();
  }
  return make_op<S>("log_softmax", std::move(out), {a}, [](Node<S>& self) {
    Matrix<S> p = self.value.array().exp().matrix();
    Matrix<S> total = self.grad.rowwise().sum();
    parent(self, 0).accumulate(self.grad - p.cwiseProduct(total.replicate(1, p.cols())));
  });
}

template <typename S>
Tensor<S> masked_log_softmax_rows(const Tensor<S>& a, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& keep) {
  if (keep.rows() != a.rows() || keep.cols() != a.cols()) {
    throw DimensionError("masked_log_softmax_rows: mask " + shape_string(keep.rows(), keep.cols()) + " vs " +
                         shape_string(a.rows(), a.cols()));
  }
  const Matrix<S>& x = a.value();
  Matrix<S> out = Matrix<S>::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    S m = -std::numeric_limits<S>::infinity();
    for (Index j = 0; j < x.cols(); ++j)
      if (keep(i, j)) m = std::max(m, x(i, j));
    if (!std::isfinite(m)) continue;
    S total = 0;
    for (Index j = 0; j < x.cols(); ++j)
      if (keep(i, j)) total += std::exp(x(i, j) - m);
    const S lse = m + std::log(total);
    for (Index j = 0; j < x.cols(); ++j)
      if (keep(i, j)) out(i, j) = x(i, j) - lse;
  }
  return make_op<S>("masked_log_softmax", std::move(out), {a}, [keep](Node<S>& self) {
    const Index r = self.value.rows();
    const Index c = self.value.cols();
    Matrix<S> g = Matrix<S>::Zero(r, c);
    for (Index i = 0; i < r; ++i) {
      S total = 0;
      for (Index j = 0; j < c; ++j)
        if (keep(i, j)) total += self.grad(i, j);
      for (Index j = 0; j < c; ++j)
        if (keep(i, j)) g(i, j) = self.grad(i, j) - std::exp(self.value(i, j)) * total;
    }
    parent(self, 0).accumulate(g);
  });
}

template <typename S>
Tensor<S> layer_norm_rows(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta) {
  const Index n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw DimensionError("layer_norm_rows: gamma/beta must be 1x" + std::to_string(n));
  }
  constexpr S eps = S(1e-5);
  Matrix<S> xhat(x.rows(), n);
  RowVector<S> inv_std(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const S mu = x.value().row(i).mean();
    auto centered = (x.value().row(i).array() - mu);
    const S var = centered.square().mean();
    inv_std(i) = S(1) / std::sqrt(var + eps);
    xhat.row(i) = (centered * inv_std(i)).matrix();
  }
  Matrix<S> out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  return make_op<S>("layer_norm", std::move(out), {x, gamma, beta},
                    [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<S>& self) {
                      const S sign = fault_sign<S>("layer_norm");
                      auto& px = parent(self, 0);
                      auto& pg = parent(self, 1);
                      auto& pb = parent(self, 2);
                      if (pg.requires_grad) pg.accumulate(sign * self.grad.cwiseProduct(xhat).colwise().sum());
                      if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
                      if (px.requires_grad) {
                        const Index cols = xhat.cols();
                        Matrix<S> dxhat = (self.grad.array().rowwise() * pg.value.row(0).array()).matrix();
                        Matrix<S> dx(xhat.rows(), cols);
                        for (Index i = 0; i < xhat.rows(); ++i) {
                          const S m1 = dxhat.row(i).mean();
                          const S m2 = dxhat.row(i).dot(xhat.row(i)) / S(cols);
                          dx.row(i) = ((dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std(i)).matrix();
                        }
                        px.accumulate(dx);
                      }
                    });
}

template <typename S>
Tensor<S> l2_normalize_rows(const Tensor<S>& a) {
  RowVector<S> norms(a.rows());
  Matrix<S> out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    norms(i) = std::max(a.value().row(i).norm(), S(1e-12));
    out.row(i) = a.value().row(i) / norms(i);
  }
  return make_op<S>("l2_normalize", std::move(out), {a}, [norms = std::move(norms)](Node<S>& self) {
    const S sign = fault_sign<S>("l2_normalize");
    const Matrix<S>& y = self.value;
    Matrix<S> g(y.rows(), y.cols());
    for (Index i = 0; i < y.rows(); ++i) {
      const S d = y.row(i).dot(self.grad.row(i));
      g.row(i) = sign * (self.grad.row(i) - d * y.row(i)) / norms(i);
    }
    parent(self, 0).accumulate(g);
  });
}

template <typename S>
Tensor<S> gelu(const Tensor<S>& a) {
  const S c = std::sqrt(S(2) / S(M_PI));
  const auto& x = a.value().array();
  Matrix<S> t = (c * (x + S(0.044715) * x.cube())).tanh().matrix();
  Matrix<S> out = (S(0.5) * x * (S(1) + t.array())).matrix();
  return make_op<S>("gelu", std::move(out), {a}, [t = std::move(t), c](Node<S>& self) {
    const S sign = fault_sign<S>("gelu");
    auto& pa = parent(self, 0);
    const auto& x = pa.value.array();
    auto dt = (S(1) - t.array().square()) * c * (S(1) + S(3) * S(0.044715) * x.square());
    auto d = S(0.5) * (S(1) + t.array()) + S(0.5) * x * dt;
    pa.accumulate(sign * (self.grad.array() * d).matrix());
  });
}

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
  Matrix<S> out = a.value().cwiseMax(S(0));
  return make_op<S>("relu", std::move(out), {a}, [](Node<S>& self) {
    auto& pa = parent(self, 0);
    pa.accumulate((pa.value.array() > S(0)).select(self.grad, S(0)).matrix());
  });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  Matrix<S> out = (S(1) / (S(1) + (-a.value().array()).exp())).matrix();
  return make_op<S>("sigmoid", std::move(out), {a}, [](Node<S>& self) {
    const auto& y = self.value.array();
    parent(self, 0).accumulate((self.grad.array() * y * (S(1) - y)).matrix());
  });
}

template <typename S>
Tensor<S> log(const Tensor<S>& a) {
  Matrix<S> out = a.value().array().log().matrix();
  return make_op<S>("log", std::move(out), {a}, [](Node<S>& self) {
    auto& pa = parent(self, 0);
    pa.accumulate((self.grad.array() / pa.value.array()).matrix());
  });
}

template <typename S>
Tensor<S> exp(const Tensor<S>& a) {
  Matrix<S> out = a.value().array().exp().matrix();
  return make_op<S>("exp", std::move(out), {a}, [](Node<S>& self) {
    parent(self, 0).accumulate(self.grad.cwiseProduct(self.value));
  });
}

template <typename S>
Tensor<S> square(const Tensor<S>& a) {
  Matrix<S> out = a.value().array().square().matrix();
  return make_op<S>("square", std::move(out), {a}, [](Node<S>& self) {
    auto& pa = parent(self, 0);
    pa.accumulate(S(2) * self.grad.cwiseProduct(pa.value));
  });
}

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  Matrix<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return make_op<S>("sum", std::move(out), {a}, [](Node<S>& self) {
    auto& pa = parent(self, 0);
    pa.accumulate(Matrix<S>::Constant(pa.value.rows(), pa.value.cols(), self.grad(0, 0)));
  });
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a) {
  const S n = S(a.value().size());
  Matrix<S> out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return make_op<S>("mean", std::move(out), {a}, [n](Node<S>& self) {
    auto& pa = parent(self, 0);
    pa.accumulate(Matrix<S>::Constant(pa.value.rows(), pa.value.cols(), self.grad(0, 0) / n));
  });
}

template <typename S>
Tensor<S> attention_core(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v, int heads) {
  const Index d = q.cols();
  if (heads <= 0 || d % heads != 0) {
    throw ConfigError("attention: model width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw DimensionError("attention: q " + shape_string(q.rows(), d) + ", k " + shape_string(k.rows(), k.cols()) +
                         ", v " + shape_string(v.rows(), v.cols()));
  }
  if (q.rows() < 1 || k.rows() < 1) throw DimensionError("attention: empty query or key set");
  const Index dh = d / heads;
  const S scale_factor = S(1) / std::sqrt(S(dh));
  std::vector<Matrix<S>> weights(static_cast<std::size_t>(heads));
  Matrix<S> out(q.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Index c0 = h * dh;
    Matrix<S> scores = (q.value().middleCols(c0, dh) * k.value().middleCols(c0, dh).transpose()) * scale_factor;
    weights[h] = softmax_values(scores);
    out.middleCols(c0, dh) = weights[h] * v.value().middleCols(c0, dh);
  }
  return make_op<S>("attention", std::move(out), {q, k, v},
                    [weights = std::move(weights), heads, dh, scale_factor](Node<S>& self) {
                      const S sign = fault_sign<S>("attention");
                      auto& pq = parent(self, 0);
                      auto& pk = parent(self, 1);
                      auto& pv = parent(self, 2);
                      Matrix<S> gq, gk, gv;
                      if (pq.requires_grad) gq = Matrix<S>::Zero(pq.value.rows(), pq.value.cols());
                      if (pk.requires_grad) gk = Matrix<S>::Zero(pk.value.rows(), pk.value.cols());
                      if (pv.requires_grad) gv = Matrix<S>::Zero(pv.value.rows(), pv.value.cols());
                      for (int h = 0; h < heads; ++h) {
                        const Index c0 = h * dh;
                        const Matrix<S>& a = weights[h];
                        auto dout = self.grad.middleCols(c0, dh);
                        if (pv.requires_grad) gv.middleCols(c0, dh) += a.transpose() * dout;
                        if (!pq.requires_grad && !pk.requires_grad) continue;
                        Matrix<S> da = dout * pv.value.middleCols(c0, dh).transpose();
                        Matrix<S> rowdot = da.cwiseProduct(a).rowwise().sum();
                        Matrix<S> ds = a.cwiseProduct(da - rowdot.replicate(1, a.cols())) * scale_factor;
                        if (pq.requires_grad) gq.middleCols(c0, dh) += ds * pk.value.middleCols(c0, dh);
                        if (pk.requires_grad) gk.middleCols(c0, dh) += ds.transpose() * pq.value.middleCols(c0, dh);
                      }
                      if (pq.requires_grad) pq.accumulate(sign * gq);
                      if (pk.requires_grad) pk.accumulate(gk);
                      if (pv.requires_grad) pv.accumulate(gv);
                    });
}

#define HOI_INSTANTIATE_OPS(S)                                                                              \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                                            \
  template Tensor<S> matmul_nt(const Tensor<S>&, const Tensor<S>&);                                         \
  template Tensor<S> transpose(const Tensor<S>&);                                                           \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                               \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                                               \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                               \
  template Tensor<S> scale(const Tensor<S>&, S);                                                            \
  template Tensor<S> scale_by(const Tensor<S>&, const Tensor<S>&);                                          \
  template Tensor<S> add_bias(const Tensor<S>&, const Tensor<S>&);                                          \
  template Tensor<S> scale_rows(const Tensor<S>&, const RowVector<S>&);                                     \
  template Tensor<S> concat_rows(const std::vector<Tensor<S>>&);                                            \
  template Tensor<S> concat_cols(const std::vector<Tensor<S>>&);                                            \
  template Tensor<S> slice_rows(const Tensor<S>&, Index, Index);                                            \
  template Tensor<S> slice_cols(const Tensor<S>&, Index, Index);                                            \
  template Tensor<S> softmax_rows(const Tensor<S>&);                                                        \
  template Tensor<S> log_softmax_rows(const Tensor<S>&);                                                    \
  template Tensor<S> masked_log_softmax_rows(const Tensor<S>&,                                              \
                                             const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>&);    \
  template Tensor<S> layer_norm_rows(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);                 \
  template Tensor<S> l2_normalize_rows(const Tensor<S>&);                                                   \
  template Tensor<S> gelu(const Tensor<S>&);                                                                \
  template Tensor<S> relu(const Tensor<S>&);                                                                \
  template Tensor<S> sigmoid(const Tensor<S>&);                                                             \
  template Tensor<S> log(const Tensor<S>&);                                                                 \
  template Tensor<S> exp(const Tensor<S>&);                                                                 \
  template Tensor<S> square(const Tensor<S>&);                                                              \
  template Tensor<S> sum(const Tensor<S>&);                                                                 \
  template Tensor<S> mean(const Tensor<S>&);                                                                \
  template Tensor<S> attention_core(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, int);

HOI_INSTANTIATE_OPS(float)
HOI_INSTANTIATE_OPS(double)

}  // namespace hoi
