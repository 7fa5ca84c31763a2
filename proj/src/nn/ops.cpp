// SPDX-License-Identifier: Apache-2.0
#include "mvact/nn/ops.hpp"

#include <cmath>
#include <string>

#include "mvact/error.hpp"

namespace mvact::nn {
namespace {

[[noreturn]] void shape_error(OpKind kind, const std::string& detail) {
  throw Error(Errc::shape_mismatch, std::string(to_string(kind)) + ": " + detail);
}

std::string dims(const Tensor& t) { return to_string(t.shape()); }

void require_matrix(OpKind kind, const Tensor& t) {
  if (t.rank() > 2) shape_error(kind, "expects rank <= 2, got " + dims(t));
}

Graph& graph_of(OpKind kind, const std::vector<Var>& vars) {
  if (vars.empty() || !vars.front().valid()) shape_error(kind, "no inputs");
  for (const Var& v : vars) {
    if (v.graph != vars.front().graph) throw Error(Errc::invalid_argument, std::string(to_string(kind)) + ": inputs from different graphs");
  }
  return *vars.front().graph;
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(OpKind::matmul, {a, b});
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  require_matrix(OpKind::matmul, ta);
  require_matrix(OpKind::matmul, tb);
  if (ta.cols() != tb.rows()) shape_error(OpKind::matmul, "inner dims differ " + dims(ta) + " x " + dims(tb));
  Tensor out = Tensor::uninitialized({ta.rows(), tb.cols()});
  out.matrix().noalias() = ta.matrix() * tb.matrix();
  return g.record(OpKind::matmul, std::move(out), {a, b}, [a, b](Graph& gr, const Tensor& go, const Tensor&) {
    if (gr.requires_grad(a)) gr.accumulate(a, go.matrix() * gr.value(b).matrix().transpose());
    if (gr.requires_grad(b)) gr.accumulate(b, gr.value(a).matrix().transpose() * go.matrix());
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(OpKind::add, {a, b});
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.shape() == tb.shape()) {
    Tensor out(ta.shape(), ta.flat() + tb.flat());
    return g.record(OpKind::add, std::move(out), {a, b}, [a, b](Graph& gr, const Tensor& go, const Tensor&) {
      gr.accumulate_flat(a, go.flat());
      gr.accumulate_flat(b, go.flat());
    });
  }
  const bool row = tb.rank() <= 2 && tb.rows() == 1 && tb.cols() == ta.cols() && ta.rank() == 2;
  if (!row) shape_error(OpKind::add, "cannot broadcast " + dims(tb) + " onto " + dims(ta));
  Tensor out = ta;
  out.matrix().rowwise() += tb.matrix().row(0);
  return g.record(OpKind::add, std::move(out), {a, b}, [a, b](Graph& gr, const Tensor& go, const Tensor&) {
    gr.accumulate_flat(a, go.flat());
    if (gr.requires_grad(b)) gr.accumulate_flat(b, go.matrix().colwise().sum().transpose());
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(OpKind::mul, {a, b});
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.shape() != tb.shape()) shape_error(OpKind::mul, "shapes differ " + dims(ta) + " vs " + dims(tb));
  Tensor out(ta.shape(), ta.flat().cwiseProduct(tb.flat()));
  return g.record(OpKind::mul, std::move(out), {a, b}, [a, b](Graph& gr, const Tensor& go, const Tensor&) {
    if (gr.requires_grad(a)) gr.accumulate_flat(a, go.flat().cwiseProduct(gr.value(b).flat()));
    if (gr.requires_grad(b)) gr.accumulate_flat(b, go.flat().cwiseProduct(gr.value(a).flat()));
  });
}

Var scale(Var a, Real factor) {
  Graph& g = graph_of(OpKind::scale, {a});
  Tensor out(a.shape(), a.value().flat() * factor);
  return g.record(OpKind::scale, std::move(out), {a}, [a, factor](Graph& gr, const Tensor& go, const Tensor&) {
    gr.accumulate_flat(a, go.flat() * factor);
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  Graph& g = graph_of(OpKind::concat, parts);
  if (axis != 0 && axis != 1) shape_error(OpKind::concat, "axis must be 0 or 1");
  Index rows = 0;
  Index cols = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& t = parts[i].value();
    require_matrix(OpKind::concat, t);
    if (axis == 0) {
      if (i > 0 && t.cols() != cols) shape_error(OpKind::concat, "column counts differ at input " + std::to_string(i) + ": " + dims(t));
      cols = t.cols();
      rows += t.rows();
    } else {
      if (i > 0 && t.rows() != rows) shape_error(OpKind::concat, "row counts differ at input " + std::to_string(i) + ": " + dims(t));
      rows = t.rows();
      cols += t.cols();
    }
  }
  Tensor out = Tensor::uninitialized({rows, cols});
  std::vector<Index> offsets;
  Index at = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    offsets.push_back(at);
    if (axis == 0) {
      out.matrix().middleRows(at, t.rows()) = t.matrix();
      at += t.rows();
    } else {
      out.matrix().middleCols(at, t.cols()) = t.matrix();
      at += t.cols();
    }
  }
  return g.record(OpKind::concat, std::move(out), parts,
                  [parts, offsets, axis](Graph& gr, const Tensor& go, const Tensor&) {
                    for (std::size_t i = 0; i < parts.size(); ++i) {
                      if (!gr.requires_grad(parts[i])) continue;
                      const Tensor& t = gr.value(parts[i]);
                      if (axis == 0) {
                        gr.accumulate(parts[i], go.matrix().middleRows(offsets[i], t.rows()));
                      } else {
                        gr.accumulate(parts[i], go.matrix().middleCols(offsets[i], t.cols()));
                      }
                    }
                  });
}

Var slice(Var a, int axis, Index begin, Index end) {
  Graph& g = graph_of(OpKind::slice, {a});
  const Tensor& t = a.value();
  require_matrix(OpKind::slice, t);
  if (axis != 0 && axis != 1) shape_error(OpKind::slice, "axis must be 0 or 1");
  const Index extent = axis == 0 ? t.rows() : t.cols();
  if (begin < 0 || end > extent || begin >= end) {
    shape_error(OpKind::slice, "range [" + std::to_string(begin) + "," + std::to_string(end) + ") outside axis " +
                                   std::to_string(axis) + " of " + dims(t));
  }
  const Index n = end - begin;
  Tensor out = axis == 0 ? Tensor::from_matrix(t.matrix().middleRows(begin, n))
                         : Tensor::from_matrix(t.matrix().middleCols(begin, n));
  return g.record(OpKind::slice, std::move(out), {a}, [a, axis, begin, n](Graph& gr, const Tensor& go, const Tensor&) {
    const Tensor& src = gr.value(a);
    RowMatrix full = RowMatrix::Zero(src.rows(), src.cols());
    if (axis == 0) {
      full.middleRows(begin, n) = go.matrix();
    } else {
      full.middleCols(begin, n) = go.matrix();
    }
    gr.accumulate(a, full);
  });
}

Var transpose(Var a) {
  Graph& g = graph_of(OpKind::transpose, {a});
  const Tensor& t = a.value();
  require_matrix(OpKind::transpose, t);
  Tensor out = Tensor::from_matrix(t.matrix().transpose());
  return g.record(OpKind::transpose, std::move(out), {a}, [a](Graph& gr, const Tensor& go, const Tensor&) {
    gr.accumulate(a, go.matrix().transpose());
  });
}

Var softmax(Var a, int axis) {
  Graph& g = graph_of(OpKind::softmax, {a});
  const Tensor& t = a.value();
  require_matrix(OpKind::softmax, t);
  if (axis != 0 && axis != 1) shape_error(OpKind::softmax, "axis must be 0 or 1");
  RowMatrix m = axis == 1 ? RowMatrix(t.matrix()) : RowMatrix(t.matrix().transpose());
  for (Index r = 0; r < m.rows(); ++r) {
    m.row(r).array() -= m.row(r).maxCoeff();
    m.row(r) = m.row(r).array().exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
  Tensor out = Tensor::uninitialized(t.shape());
  if (axis == 1) {
    out.matrix() = m;
  } else {
    out.matrix() = m.transpose();
  }
  return g.record(OpKind::softmax, std::move(out), {a}, [a, axis](Graph& gr, const Tensor& go, const Tensor& y) {
    RowMatrix gy = y.matrix().cwiseProduct(go.matrix());
    if (axis == 1) {
      const Eigen::VectorXd dot = gy.rowwise().sum();
      gy -= (y.matrix().array().colwise() * dot.array()).matrix();
    } else {
      const Eigen::RowVectorXd dot = gy.colwise().sum();
      gy -= (y.matrix().array().rowwise() * dot.array()).matrix();
    }
    gr.accumulate(a, gy);
  });
}

Var layer_norm(Var x, Var gamma, Var beta, Real eps) {
  Graph& g = graph_of(OpKind::layer_norm, {x, gamma, beta});
  const Tensor& tx = x.value();
  require_matrix(OpKind::layer_norm, tx);
  const Index n = tx.cols();
  if (gamma.value().size() != n || beta.value().size() != n) {
    shape_error(OpKind::layer_norm, "gain/bias " + dims(gamma.value()) + "/" + dims(beta.value()) +
                                        " do not match feature dim of " + dims(tx));
  }
  RowMatrix xhat(tx.rows(), n);
  Eigen::VectorXd inv_std(tx.rows());
  for (Index r = 0; r < tx.rows(); ++r) {
    const double mean = tx.matrix().row(r).mean();
    const Eigen::RowVectorXd c = tx.matrix().row(r).array() - mean;
    const double var = c.squaredNorm() / static_cast<double>(n);
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = c * inv_std(r);
  }
  Tensor out = Tensor::uninitialized(tx.shape());
  const auto gv = gamma.value().flat();
  const auto bv = beta.value().flat();
  out.matrix() = (xhat.array().rowwise() * gv.transpose().array()).rowwise() + bv.transpose().array();
  return g.record(OpKind::layer_norm, std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& gr, const Tensor& go,
                                                                                         const Tensor&) {
                    const auto gm = go.matrix();
                    if (gr.requires_grad(gamma)) gr.accumulate_flat(gamma, gm.cwiseProduct(xhat).colwise().sum().transpose());
                    if (gr.requires_grad(beta)) gr.accumulate_flat(beta, gm.colwise().sum().transpose());
                    if (!gr.requires_grad(x)) return;
                    const auto gv = gr.value(gamma).flat();
                    const RowMatrix dxhat = gm.array().rowwise() * gv.transpose().array();
                    const double n = static_cast<double>(xhat.cols());
                    RowMatrix dx(xhat.rows(), xhat.cols());
                    for (Index r = 0; r < xhat.rows(); ++r) {
                      const double m1 = dxhat.row(r).sum() / n;
                      const double m2 = dxhat.row(r).dot(xhat.row(r)) / n;
                      dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
                    }
                    gr.accumulate(x, dx);
                  });
}

Var gelu(Var x) {
  Graph& g = graph_of(OpKind::gelu, {x});
  const auto v = x.value().flat();
  Tensor out(x.shape());
  for (Index i = 0; i < v.size(); ++i) out[i] = 0.5 * v(i) * (1.0 + std::erf(v(i) * M_SQRT1_2));
  return g.record(OpKind::gelu, std::move(out), {x}, [x](Graph& gr, const Tensor& go, const Tensor&) {
    const auto v = gr.value(x).flat();
    Vector d(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(v(i) * M_SQRT1_2));
      const double pdf = std::exp(-0.5 * v(i) * v(i)) * 0.5 * M_2_SQRTPI * M_SQRT1_2;
      d(i) = go[i] * (cdf + v(i) * pdf);
    }
    gr.accumulate_flat(x, d);
  });
}

Var sigmoid(Var x) {
  Graph& g = graph_of(OpKind::sigmoid, {x});
  const auto v = x.value().flat();
  Tensor out(x.shape());
  for (Index i = 0; i < v.size(); ++i) {
    out[i] = v(i) >= 0 ? 1.0 / (1.0 + std::exp(-v(i))) : std::exp(v(i)) / (1.0 + std::exp(v(i)));
  }
  return g.record(OpKind::sigmoid, std::move(out), {x}, [x](Graph& gr, const Tensor& go, const Tensor& y) {
    gr.accumulate_flat(x, go.flat().cwiseProduct(y.flat().cwiseProduct((1.0 - y.flat().array()).matrix())));
  });
}

Var embedding_lookup(Var table, const std::vector<Index>& ids) {
  Graph& g = graph_of(OpKind::embedding_lookup, {table});
  const Tensor& t = table.value();
  if (t.rank() != 2) shape_error(OpKind::embedding_lookup, "table must be rank 2, got " + dims(t));
  if (ids.empty()) shape_error(OpKind::embedding_lookup, "no ids");
  Tensor out = Tensor::uninitialized({static_cast<Index>(ids.size()), t.cols()});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows()) {
      shape_error(OpKind::embedding_lookup, "id " + std::to_string(ids[i]) + " outside table " + dims(t));
    }
    out.matrix().row(static_cast<Index>(i)) = t.matrix().row(ids[i]);
  }
  return g.record(OpKind::embedding_lookup, std::move(out), {table},
                  [table, ids](Graph& gr, const Tensor& go, const Tensor&) {
                    const Tensor& t = gr.value(table);
                    RowMatrix d = RowMatrix::Zero(t.rows(), t.cols());
                    for (std::size_t i = 0; i < ids.size(); ++i) d.row(ids[i]) += go.matrix().row(static_cast<Index>(i));
                    gr.accumulate(table, d);
                  });
}

Var cross_entropy_logits(Var logits, const Tensor& targets, const std::vector<Real>& row_weights) {
  Graph& g = graph_of(OpKind::cross_entropy_logits, {logits});
  const Tensor& z = logits.value();
  require_matrix(OpKind::cross_entropy_logits, z);
  if (targets.rows() != z.rows() || targets.cols() != z.cols() || targets.size() != z.size()) {
    shape_error(OpKind::cross_entropy_logits, "targets " + dims(targets) + " vs logits " + dims(z));
  }
  if (static_cast<Index>(row_weights.size()) != z.rows()) {
    shape_error(OpKind::cross_entropy_logits, std::to_string(row_weights.size()) + " row weights for logits " + dims(z));
  }
  RowMatrix probs(z.rows(), z.cols());
  double loss = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const double w = row_weights[static_cast<std::size_t>(r)];
    const double m = z.matrix().row(r).maxCoeff();
    const Eigen::RowVectorXd e = (z.matrix().row(r).array() - m).exp().matrix();
    const double s = e.sum();
    probs.row(r) = e / s;
    if (w == 0.0) continue;
    const double lse = m + std::log(s);
    loss += w * (targets.matrix().row(r).sum() * lse - targets.matrix().row(r).dot(z.matrix().row(r)));
  }
  return g.record(OpKind::cross_entropy_logits, Tensor::scalar(loss), {logits},
                  [logits, targets, row_weights, probs = std::move(probs)](Graph& gr, const Tensor& go, const Tensor&) {
                    RowMatrix d(probs.rows(), probs.cols());
                    for (Index r = 0; r < probs.rows(); ++r) {
                      const double w = row_weights[static_cast<std::size_t>(r)] * go.item();
                      if (w == 0.0) {
                        d.row(r).setZero();
                        continue;
                      }
                      d.row(r) = w * (targets.matrix().row(r).sum() * probs.row(r) - targets.matrix().row(r));
                    }
                    gr.accumulate(logits, d);
                  });
}

Var cross_entropy_logits(Var logits, const std::vector<Index>& classes, const std::vector<Real>& row_weights) {
  const Tensor& z = logits.value();
  require_matrix(OpKind::cross_entropy_logits, z);
  if (static_cast<Index>(classes.size()) != z.rows()) {
    shape_error(OpKind::cross_entropy_logits, std::to_string(classes.size()) + " classes for logits " + dims(z));
  }
  Tensor t({z.rows(), z.cols()});
  for (std::size_t r = 0; r < classes.size(); ++r) {
    if (classes[r] < 0 || classes[r] >= z.cols()) {
      shape_error(OpKind::cross_entropy_logits, "class " + std::to_string(classes[r]) + " outside " + dims(z));
    }
    t.matrix()(static_cast<Index>(r), classes[r]) = 1.0;
  }
  return cross_entropy_logits(logits, t, row_weights);
}

Var binary_cross_entropy_logits(Var logits, const std::vector<Real>& labels, const std::vector<Real>& weights) {
  Graph& g = graph_of(OpKind::binary_cross_entropy_logits, {logits});
  const Tensor& z = logits.value();
  if (static_cast<Index>(labels.size()) != z.size() || weights.size() != labels.size()) {
    shape_error(OpKind::binary_cross_entropy_logits, std::to_string(labels.size()) + " labels and " +
                                                         std::to_string(weights.size()) + " weights for logits " + dims(z));
  }
  double loss = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double w = weights[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    const double v = z[i];
    loss += w * (std::max(v, 0.0) - v * labels[static_cast<std::size_t>(i)] + std::log1p(std::exp(-std::abs(v))));
  }
  return g.record(OpKind::binary_cross_entropy_logits, Tensor::scalar(loss), {logits},
                  [logits, labels, weights](Graph& gr, const Tensor& go, const Tensor&) {
                    const Tensor& z = gr.value(logits);
                    Vector d(z.size());
                    for (Index i = 0; i < z.size(); ++i) {
                      const auto iu = static_cast<std::size_t>(i);
                      const double v = z[i];
                      const double s = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
                      d(i) = weights[iu] == 0.0 ? 0.0 : weights[iu] * go.item() * (s - labels[iu]);
                    }
                    gr.accumulate_flat(logits, d);
                  });
}

Var sum(Var a) {
  Graph& g = graph_of(OpKind::sum, {a});
  return g.record(OpKind::sum, Tensor::scalar(a.value().flat().sum()), {a},
                  [a](Graph& gr, const Tensor& go, const Tensor&) {
                    gr.accumulate_flat(a, Vector::Constant(gr.value(a).size(), go.item()));
                  });
}

Var reshape(Var a, Shape shape) {
  Graph& g = graph_of(OpKind::reshape, {a});
  if (shape_size(shape) != a.value().size()) {
    shape_error(OpKind::reshape, "cannot reshape " + dims(a.value()) + " to " + to_string(shape));
  }
  Tensor out(std::move(shape), a.value().flat());
  return g.record(OpKind::reshape, std::move(out), {a}, [a](Graph& gr, const Tensor& go, const Tensor&) {
    gr.accumulate_flat(a, go.flat());
  });
}

Var gather(Var a, const std::vector<Index>& indices, Shape shape) {
  Graph& g = graph_of(OpKind::gather, {a});
  const Tensor& t = a.value();
  if (shape_size(shape) != static_cast<Index>(indices.size())) {
    shape_error(OpKind::gather, std::to_string(indices.size()) + " indices for output " + to_string(shape));
  }
  Tensor out = Tensor::uninitialized(std::move(shape));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= t.size()) {
      shape_error(OpKind::gather, "index " + std::to_string(indices[i]) + " outside " + dims(t));
    }
    out[static_cast<Index>(i)] = t[indices[i]];
  }
  return g.record(OpKind::gather, std::move(out), {a}, [a, indices](Graph& gr, const Tensor& go, const Tensor&) {
    Vector d = Vector::Zero(gr.value(a).size());
    for (std::size_t i = 0; i < indices.size(); ++i) d(indices[i]) += go[static_cast<Index>(i)];
    gr.accumulate_flat(a, d);
  });
}

}  // namespace mvact::nn
