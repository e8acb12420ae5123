#include "tsnet/autodiff.hpp"

#include "tsnet/error.hpp"

#include <cmath>
#include <limits>

namespace tsnet::ad {

const Matrix& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Matrix value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(Parameter& p) {
  Node& n = nodes_.emplace_back();
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  ++p.uses;
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape() != this) throw ArgumentError("operand recorded on a different tape");
    needs = needs || requires_grad(v.id());
  }
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw ArgumentError("backward root recorded on a different tape");
  if (root.rows() != 1 || root.cols() != 1) throw ArgumentError("backward root must be 1x1");
  if (!requires_grad(root.id())) return;
  grad(root.id())(0, 0) = 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
  }
  for (Node& n : nodes_) {
    if (n.param != nullptr && n.grad.size() != 0) n.param->grad += n.grad;
  }
}

namespace {

// Accumulates into the gradient of `v` when it is differentiable.
template <typename Expr>
void accumulate(Tape& t, const Var& v, const Expr& e) {
  if (t.requires_grad(v.id())) t.grad(v.id()) += e;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ArgumentError("matmul: inner dimensions differ");
  Matrix v;
  v.noalias() = a.value() * b.value();
  return a.tape()->record(std::move(v), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.grad(a.id()).noalias() += g * t.value(b.id()).transpose();
    if (t.requires_grad(b.id())) t.grad(b.id()).noalias() += t.value(a.id()).transpose() * g;
  });
}

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Matrix v = a.value() + b.value();
  return a.tape()->record(std::move(v), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Matrix v = a.value() - b.value();
  return a.tape()->record(std::move(v), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g);
    if (t.requires_grad(b.id())) t.grad(b.id()) -= g;
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Matrix v = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(v), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g.cwiseProduct(t.value(b.id())));
    accumulate(t, b, g.cwiseProduct(t.value(a.id())));
  });
}

Var scale(Var a, double s) {
  Matrix v = a.value() * s;
  return a.tape()->record(std::move(v), {a}, [a, s](Tape& t, int self) { accumulate(t, a, t.grad(self) * s); });
}

Var add_row(Var a, Var bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw ArgumentError("add_row: bias shape mismatch");
  Matrix v = a.value().rowwise() + bias.value().row(0);
  return a.tape()->record(std::move(v), {a, bias}, [a, bias](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g);
    accumulate(t, bias, g.colwise().sum());
  });
}

Var sigmoid(Var a) {
  Matrix v = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, int self) {
    const Matrix& y = t.value(self);
    accumulate(t, a, (t.grad(self).array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var tanh(Var a) {
  Matrix v = a.value().array().tanh().matrix();
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, int self) {
    const Matrix& y = t.value(self);
    accumulate(t, a, (t.grad(self).array() * (1.0 - y.array().square())).matrix());
  });
}

Var relu(Var a) {
  Matrix v = a.value().cwiseMax(0.0);
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, int self) {
    const Matrix& x = t.value(a.id());
    accumulate(t, a, (x.array() > 0.0).select(t.grad(self), 0.0).matrix());
  });
}

Var exp(Var a) {
  Matrix v = a.value().array().exp().matrix();
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, int self) {
    accumulate(t, a, t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no operands");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ArgumentError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape()->record(std::move(v), parts, [inputs](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index off = 0;
    for (const Var& p : inputs) {
      const Eigen::Index w = t.value(p.id()).cols();
      accumulate(t, p, g.middleCols(off, w));
      off += w;
    }
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index width) {
  if (start < 0 || width < 0 || start + width > a.cols()) throw ArgumentError("slice_cols: out of range");
  Matrix v = a.value().middleCols(start, width);
  return a.tape()->record(std::move(v), {a}, [a, start, width](Tape& t, int self) {
    if (t.requires_grad(a.id())) t.grad(a.id()).middleCols(start, width) += t.grad(self);
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw ArgumentError("reshape: size mismatch");
  Matrix v = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  return a.tape()->record(std::move(v), {a}, [a, r0, c0](Tape& t, int self) {
    accumulate(t, a, Eigen::Map<const Matrix>(t.grad(self).data(), r0, c0));
  });
}

Var repeat_rows(Var a, int times) {
  if (times < 1) throw ArgumentError("repeat_rows: times must be >= 1");
  const Matrix& x = a.value();
  Matrix v(x.rows() * times, x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (int k = 0; k < times; ++k) v.row(r * times + k) = x.row(r);
  }
  return a.tape()->record(std::move(v), {a}, [a, times](Tape& t, int self) {
    if (!t.requires_grad(a.id())) return;
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id());
    for (Eigen::Index r = 0; r < ga.rows(); ++r) {
      for (int k = 0; k < times; ++k) ga.row(r) += g.row(r * times + k);
    }
  });
}

Var gather_rows(Var table, std::vector<int> index) {
  const Matrix& w = table.value();
  Matrix v(static_cast<Eigen::Index>(index.size()), w.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= w.rows()) throw ArgumentError("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(r)) = w.row(index[r]);
  }
  return table.tape()->record(std::move(v), {table}, [table, index = std::move(index)](Tape& t, int self) {
    if (!t.requires_grad(table.id())) return;
    const Matrix& g = t.grad(self);
    Matrix& gw = t.grad(table.id());
    for (std::size_t r = 0; r < index.size(); ++r) gw.row(index[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var select_col_block(Var x, Eigen::Index width, std::vector<int> block) {
  const Matrix& xv = x.value();
  if (static_cast<Eigen::Index>(block.size()) != xv.rows()) throw ArgumentError("select_col_block: one block per row");
  Matrix v(xv.rows(), width);
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const int b = block[static_cast<std::size_t>(r)];
    if (b < 0 || (b + 1) * width > xv.cols()) throw ArgumentError("select_col_block: block out of range");
    v.row(r) = xv.row(r).segment(b * width, width);
  }
  return x.tape()->record(std::move(v), {x}, [x, width, block = std::move(block)](Tape& t, int self) {
    if (!t.requires_grad(x.id())) return;
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(x.id());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      gx.row(r).segment(block[static_cast<std::size_t>(r)] * width, width) += g.row(r);
    }
  });
}

Var sum(Var a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, int self) {
    if (t.requires_grad(a.id())) t.grad(a.id()).array() += t.grad(self)(0, 0);
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ArgumentError("mean: empty operand");
  return scale(sum(a), 1.0 / n);
}

Var gru_cell(Var input_proj, Var hidden, Var hidden_weights, Var hidden_bias) {
  const Matrix& h = hidden.value();
  const Eigen::Index H = h.cols();
  const Eigen::Index B = h.rows();
  if (hidden_weights.rows() != H || hidden_weights.cols() != 3 * H) throw ArgumentError("gru_cell: hidden weight shape");
  if (input_proj.rows() != B || input_proj.cols() != 3 * H) throw ArgumentError("gru_cell: input projection shape");
  if (hidden_bias.rows() != 1 || hidden_bias.cols() != 3 * H) throw ArgumentError("gru_cell: hidden bias shape");

  Matrix hp(B, 3 * H);
  hp.noalias() = h * hidden_weights.value();
  hp.rowwise() += hidden_bias.value().row(0);
  const Matrix& xp = input_proj.value();

  Matrix r = (1.0 + (-(xp.leftCols(H) + hp.leftCols(H)).array()).exp()).inverse().matrix();
  Matrix z = (1.0 + (-(xp.middleCols(H, H) + hp.middleCols(H, H)).array()).exp()).inverse().matrix();
  Matrix hn = hp.rightCols(H);
  Matrix n = (xp.rightCols(H).array() + r.array() * hn.array()).tanh().matrix();
  Matrix out = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();

  return input_proj.tape()->record(
      std::move(out), {input_proj, hidden, hidden_weights, hidden_bias},
      [input_proj, hidden, hidden_weights, hidden_bias, r = std::move(r), z = std::move(z), n = std::move(n),
       hn = std::move(hn), H](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        const Matrix& h = t.value(hidden.id());
        const Eigen::Index B = g.rows();
        auto ga = g.array();
        Matrix dpre(B, 3 * H);
        // n-gate pre-activation
        auto dn_pre = (ga * (1.0 - z.array()) * (1.0 - n.array().square())).eval();
        auto dz_pre = (ga * (h.array() - n.array()) * z.array() * (1.0 - z.array())).eval();
        auto dr_pre = (dn_pre * hn.array() * r.array() * (1.0 - r.array())).eval();
        dpre.leftCols(H) = dr_pre.matrix();
        dpre.middleCols(H, H) = dz_pre.matrix();
        dpre.rightCols(H) = dn_pre.matrix();
        if (t.requires_grad(input_proj.id())) t.grad(input_proj.id()) += dpre;

        // Hidden-path pre-activations share r and z but the n part is scaled by r.
        dpre.rightCols(H).array() *= r.array();
        if (t.requires_grad(hidden_weights.id())) t.grad(hidden_weights.id()).noalias() += h.transpose() * dpre;
        if (t.requires_grad(hidden_bias.id())) t.grad(hidden_bias.id()) += dpre.colwise().sum();
        if (t.requires_grad(hidden.id())) {
          Matrix& gh = t.grad(hidden.id());
          gh += (ga * z.array()).matrix();
          gh.noalias() += dpre * t.value(hidden_weights.id()).transpose();
        }
      });
}

Var attention_softmax(Var q, Var k, int n, int heads, double scale) {
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  if (n < 1 || heads < 1) throw ArgumentError("attention_softmax: n and heads must be >= 1");
  if (Q.rows() != K.rows() || Q.cols() != K.cols()) throw ArgumentError("attention_softmax: Q/K shape mismatch");
  if (Q.rows() % n != 0 || Q.cols() % heads != 0) throw ArgumentError("attention_softmax: shape not divisible");
  if (!Q.allFinite() || !K.allFinite()) throw NumericError("attention_softmax: non-finite features");
  const Eigen::Index groups = Q.rows() / n;
  const Eigen::Index dq = Q.cols() / heads;
  Matrix out(Q.rows(), heads * n);
  for (Eigen::Index g = 0; g < groups; ++g) {
    for (int h = 0; h < heads; ++h) {
      Matrix s = Q.block(g * n, h * dq, n, dq) * K.block(g * n, h * dq, n, dq).transpose() * scale;
      for (int i = 0; i < n; ++i) {
        const double mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp().matrix();
        s.row(i) /= s.row(i).sum();
      }
      out.block(g * n, h * n, n, n) = s;
    }
  }
  return q.tape()->record(std::move(out), {q, k}, [q, k, n, heads, scale, dq, groups](Tape& t, int self) {
    const Matrix& O = t.value(self);
    const Matrix& g = t.grad(self);
    const Matrix& Q = t.value(q.id());
    const Matrix& K = t.value(k.id());
    const bool gq = t.requires_grad(q.id());
    const bool gk = t.requires_grad(k.id());
    for (Eigen::Index grp = 0; grp < groups; ++grp) {
      for (int h = 0; h < heads; ++h) {
        auto o = O.block(grp * n, h * n, n, n);
        auto go = g.block(grp * n, h * n, n, n);
        Matrix ds = o.cwiseProduct(go);
        const RowVector dot = ds.rowwise().sum().transpose();
        for (int i = 0; i < n; ++i) ds.row(i) -= o.row(i) * dot(i);
        ds *= scale;
        if (gq) t.grad(q.id()).block(grp * n, h * dq, n, dq) += ds * K.block(grp * n, h * dq, n, dq);
        if (gk) t.grad(k.id()).block(grp * n, h * dq, n, dq) += ds.transpose() * Q.block(grp * n, h * dq, n, dq);
      }
    }
  });
}

Var fuse_heads(Var scores, Var kernel, Var bias, int n, int heads) {
  const Matrix& R = scores.value();
  if (kernel.rows() != 1 || kernel.cols() != heads) throw ArgumentError("fuse_heads: kernel must have one weight per head");
  if (bias.rows() != 1 || bias.cols() != 1) throw ArgumentError("fuse_heads: bias must be scalar");
  if (R.cols() != static_cast<Eigen::Index>(heads) * n) throw ArgumentError("fuse_heads: head count mismatch");
  Matrix pre = Matrix::Constant(R.rows(), n, bias.value()(0, 0));
  for (int h = 0; h < heads; ++h) pre += kernel.value()(0, h) * R.middleCols(h * n, n);
  Matrix J = (1.0 + (-pre.array()).exp()).inverse().matrix();
  return scores.tape()->record(std::move(J), {scores, kernel, bias}, [scores, kernel, bias, n, heads](Tape& t, int self) {
    const Matrix& J = t.value(self);
    const Matrix dpre = (t.grad(self).array() * J.array() * (1.0 - J.array())).matrix();
    const Matrix& R = t.value(scores.id());
    if (t.requires_grad(kernel.id())) {
      Matrix& gk = t.grad(kernel.id());
      for (int h = 0; h < heads; ++h) gk(0, h) += dpre.cwiseProduct(R.middleCols(h * n, n)).sum();
    }
    if (t.requires_grad(bias.id())) t.grad(bias.id())(0, 0) += dpre.sum();
    if (t.requires_grad(scores.id())) {
      Matrix& gr = t.grad(scores.id());
      for (int h = 0; h < heads; ++h) gr.middleCols(h * n, n) += t.value(kernel.id())(0, h) * dpre;
    }
  });
}

Var threshold(Var scores, double xi) {
  const Matrix& J = scores.value();
  Matrix keep = (J.array() >= xi).cast<double>().matrix();
  Matrix M = J.cwiseProduct(keep);
  return scores.tape()->record(std::move(M), {scores}, [scores, keep = std::move(keep)](Tape& t, int self) {
    accumulate(t, scores, t.grad(self).cwiseProduct(keep));
  });
}

Var mask_softmax(Var features, Var mask, int n, MaskStats* stats) {
  const Matrix& F = features.value();
  const Matrix& M = mask.value();
  if (M.cols() != n || M.rows() != F.rows() || F.rows() % n != 0) throw ArgumentError("mask_softmax: shape mismatch");
  const Eigen::Index groups = F.rows() / n;
  const Eigen::Index d = F.cols();
  // keep(i) = 1/n * sum_j M[i][j]; fallback groups use keep = 1.
  Eigen::VectorXd keep = M.rowwise().sum() / static_cast<double>(n);
  std::vector<char> fallback(static_cast<std::size_t>(groups), 0);
  Matrix out = Matrix::Zero(F.rows(), d);
  for (Eigen::Index g = 0; g < groups; ++g) {
    auto kg = keep.segment(g * n, n);
    if ((kg.array() > 0.0).count() == 0) {
      fallback[static_cast<std::size_t>(g)] = 1;
      if (stats != nullptr) ++stats->degenerate_groups;
    } else if (stats != nullptr) {
      stats->masked_nodes += (kg.array() <= 0.0).count();
    }
    const bool fb = fallback[static_cast<std::size_t>(g)] != 0;
    for (Eigen::Index c = 0; c < d; ++c) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        const double m = fb ? 1.0 : kg(i);
        if (m > 0.0) mx = std::max(mx, m * F(g * n + i, c));
      }
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        const double m = fb ? 1.0 : kg(i);
        if (m > 0.0) {
          const double e = std::exp(m * F(g * n + i, c) - mx);
          out(g * n + i, c) = e;
          total += e;
        }
      }
      for (int i = 0; i < n; ++i) out(g * n + i, c) /= total;
    }
  }
  if (stats != nullptr) stats->groups += groups;
  return features.tape()->record(
      std::move(out), {features, mask},
      [features, mask, n, keep = std::move(keep), fallback = std::move(fallback)](Tape& t, int self) {
        const Matrix& Y = t.value(self);
        const Matrix& G = t.grad(self);
        const Matrix& F = t.value(features.id());
        const Eigen::Index groups = F.rows() / n;
        const bool gf = t.requires_grad(features.id());
        const bool gm = t.requires_grad(mask.id());
        for (Eigen::Index g = 0; g < groups; ++g) {
          const bool fb = fallback[static_cast<std::size_t>(g)] != 0;
          auto y = Y.middleRows(g * n, n);
          auto gy = G.middleRows(g * n, n);
          // dS = Y * (dY - sum_i Y dY) column-wise; excluded nodes have Y = 0.
          const RowVector dot = y.cwiseProduct(gy).colwise().sum();
          Matrix ds = y.cwiseProduct(gy - dot.replicate(n, 1));
          for (int i = 0; i < n; ++i) {
            const double m = fb ? 1.0 : keep(g * n + i);
            if (!(m > 0.0)) continue;
            if (gf) t.grad(features.id()).row(g * n + i) += m * ds.row(i);
            if (gm && !fb) {
              const double dm = ds.row(i).dot(F.row(g * n + i)) / static_cast<double>(n);
              t.grad(mask.id()).row(g * n + i).array() += dm;
            }
          }
        }
      });
}

Var group_propagate(const Matrix& propagation, Var x, int n) {
  const Matrix& X = x.value();
  if (propagation.rows() != X.rows() || propagation.cols() != n || X.rows() % n != 0) {
    throw ArgumentError("group_propagate: shape mismatch");
  }
  const Eigen::Index groups = X.rows() / n;
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    out.middleRows(g * n, n).noalias() = propagation.middleRows(g * n, n) * X.middleRows(g * n, n);
  }
  return x.tape()->record(std::move(out), {x}, [x, propagation, n, groups](Tape& t, int self) {
    if (!t.requires_grad(x.id())) return;
    const Matrix& G = t.grad(self);
    Matrix& gx = t.grad(x.id());
    for (Eigen::Index g = 0; g < groups; ++g) {
      gx.middleRows(g * n, n).noalias() += propagation.middleRows(g * n, n).transpose() * G.middleRows(g * n, n);
    }
  });
}

namespace {

double candidate_distance(const Eigen::Ref<const RowVector>& diff, LossNorm norm, int step_width) {
  if (norm == LossNorm::Flattened) return diff.norm();
  const Eigen::Index steps = diff.size() / step_width;
  double total = 0.0;
  for (Eigen::Index s = 0; s < steps; ++s) total += diff.segment(s * step_width, step_width).norm();
  return total / static_cast<double>(steps);
}

}  // namespace

Var best_of_k_distance(Var pred, Var target, int k, LossNorm norm, int step_width, std::vector<int>* argmin) {
  const Matrix& P = pred.value();
  const Matrix& Y = target.value();
  if (k < 1) throw ArgumentError("best_of_k_distance: empty prediction set");
  if (P.rows() != Y.rows() * k || P.cols() != Y.cols()) throw ArgumentError("best_of_k_distance: shape mismatch");
  if (norm == LossNorm::PerStepMean && (step_width < 1 || Y.cols() % step_width != 0)) {
    throw ArgumentError("best_of_k_distance: step width does not divide the row length");
  }
  const Eigen::Index B = Y.rows();
  Matrix out(B, 1);
  std::vector<int> best(static_cast<std::size_t>(B), 0);
  for (Eigen::Index b = 0; b < B; ++b) {
    double lo = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const RowVector diff = P.row(b * k + c) - Y.row(b);
      const double dist = candidate_distance(diff, norm, step_width);
      if (dist < lo) {
        lo = dist;
        best[static_cast<std::size_t>(b)] = c;
      }
    }
    out(b, 0) = lo;
  }
  if (argmin != nullptr) *argmin = best;
  return pred.tape()->record(std::move(out), {pred, target},
                             [pred, target, k, norm, step_width, best = std::move(best)](Tape& t, int self) {
                               const Matrix& P = t.value(pred.id());
                               const Matrix& Y = t.value(target.id());
                               const Matrix& G = t.grad(self);
                               for (Eigen::Index b = 0; b < Y.rows(); ++b) {
                                 const Eigen::Index row = b * k + best[static_cast<std::size_t>(b)];
                                 const RowVector diff = P.row(row) - Y.row(b);
                                 RowVector d = RowVector::Zero(diff.size());
                                 if (norm == LossNorm::Flattened) {
                                   const double len = diff.norm();
                                   if (len > 0.0) d = diff / len;
                                 } else {
                                   const Eigen::Index steps = diff.size() / step_width;
                                   for (Eigen::Index s = 0; s < steps; ++s) {
                                     const double len = diff.segment(s * step_width, step_width).norm();
                                     if (len > 0.0) {
                                       d.segment(s * step_width, step_width) =
                                           diff.segment(s * step_width, step_width) / (len * static_cast<double>(steps));
                                     }
                                   }
                                 }
                                 d *= G(b, 0);
                                 if (t.requires_grad(pred.id())) t.grad(pred.id()).row(row) += d;
                                 if (t.requires_grad(target.id())) t.grad(target.id()).row(b) -= d;
                               }
                             });
}

Var kl_diagonal(Var mean_a, Var log_std_a, Var mean_b, Var log_std_b) {
  const Matrix& ma = mean_a.value();
  const Matrix& la = log_std_a.value();
  const Matrix& mb = mean_b.value();
  const Matrix& lb = log_std_b.value();
  if (ma.rows() != mb.rows() || ma.cols() != mb.cols() || la.rows() != ma.rows() || la.cols() != ma.cols() ||
      lb.rows() != ma.rows() || lb.cols() != ma.cols()) {
    throw ArgumentError("kl_diagonal: dimension mismatch");
  }
  const Eigen::ArrayXXd var_a = (2.0 * la.array()).exp();
  const Eigen::ArrayXXd var_b = (2.0 * lb.array()).exp();
  const Eigen::ArrayXXd diff = ma.array() - mb.array();
  const Eigen::ArrayXXd terms = lb.array() - la.array() + (var_a + diff.square()) / (2.0 * var_b) - 0.5;
  Matrix out = terms.rowwise().sum().matrix();
  return mean_a.tape()->record(std::move(out), {mean_a, log_std_a, mean_b, log_std_b},
                               [mean_a, log_std_a, mean_b, log_std_b](Tape& t, int self) {
                                 const Eigen::ArrayXXd va = (2.0 * t.value(log_std_a.id()).array()).exp();
                                 const Eigen::ArrayXXd vb = (2.0 * t.value(log_std_b.id()).array()).exp();
                                 const Eigen::ArrayXXd diff =
                                     t.value(mean_a.id()).array() - t.value(mean_b.id()).array();
                                 const Eigen::ArrayXXd g = t.grad(self).col(0).array().replicate(1, diff.cols());
                                 accumulate(t, mean_a, (g * diff / vb).matrix());
                                 accumulate(t, mean_b, (-g * diff / vb).matrix());
                                 accumulate(t, log_std_a, (g * (va / vb - 1.0)).matrix());
                                 accumulate(t, log_std_b, (g * (1.0 - (va + diff.square()) / vb)).matrix());
                               });
}

}  // namespace tsnet::ad
