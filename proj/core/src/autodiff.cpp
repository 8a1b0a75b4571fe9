#include "rankformer/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace rankformer::ad {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double softplus_scalar(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid_scalar(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

std::shared_ptr<const Tape::EdgeList> Tape::make_edge_list(const InteractionGraph& g) {
  auto list = std::make_shared<EdgeList>();
  list->n = g.n;
  list->m = g.m;
  list->u.reserve(static_cast<std::size_t>(g.e));
  list->i.reserve(static_cast<std::size_t>(g.e));
  for (Index u = 0; u < g.n; ++u) {
    for (Index i : g.items_of(u)) {
      list->u.push_back(u);
      list->i.push_back(i);
    }
  }
  return list;
}

Tape::Var Tape::alloc(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat(), nullptr, nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::input(Mat value) { return alloc(std::move(value)); }
Tape::Var Tape::constant(Mat value) { return alloc(std::move(value)); }

void Tape::set_input(Var v, Mat value) {
  require(v.valid() && !nodes_[v.id].fwd, "set_input target must be a leaf");
  nodes_[v.id].value = std::move(value);
}

void Tape::recompute() {
  for (auto& node : nodes_) {
    if (node.fwd) node.fwd();
  }
}

void Tape::backward(Var root) {
  require(root.valid(), "backward: invalid root");
  require(nodes_[root.id].value.size() == 1, "backward root must be scalar");
  for (auto& node : nodes_) {
    node.grad.setZero(node.value.rows(), node.value.cols());
  }
  nodes_[root.id].grad(0, 0) = 1.0;
  for (int id = root.id; id >= 0; --id) {
    if (nodes_[id].bwd) nodes_[id].bwd();
  }
}

const Mat& Tape::value(Var v) const { return nodes_.at(v.id).value; }
const Mat& Tape::grad(Var v) const { return nodes_.at(v.id).grad; }

Tape::Var Tape::add(Var a, Var b) {
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "add: shape mismatch");
  Var out = alloc(val(a) + val(b));
  nodes_[out.id].fwd = [this, out, a, b] { val(out) = val(a) + val(b); };
  nodes_[out.id].bwd = [this, out, a, b] {
    grd(a) += grd(out);
    grd(b) += grd(out);
  };
  return out;
}

Tape::Var Tape::sub(Var a, Var b) {
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "sub: shape mismatch");
  Var out = alloc(val(a) - val(b));
  nodes_[out.id].fwd = [this, out, a, b] { val(out) = val(a) - val(b); };
  nodes_[out.id].bwd = [this, out, a, b] {
    grd(a) += grd(out);
    grd(b) -= grd(out);
  };
  return out;
}

Tape::Var Tape::scale(Var a, double s) {
  Var out = alloc(val(a) * s);
  nodes_[out.id].fwd = [this, out, a, s] { val(out) = val(a) * s; };
  nodes_[out.id].bwd = [this, out, a, s] { grd(a) += grd(out) * s; };
  return out;
}

Tape::Var Tape::add_const(Var a, double c) {
  Var out = alloc(val(a).array() + c);
  nodes_[out.id].fwd = [this, out, a, c] { val(out) = val(a).array() + c; };
  nodes_[out.id].bwd = [this, out, a] { grd(a) += grd(out); };
  return out;
}

Tape::Var Tape::cw_mul(Var a, Var b) {
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "cw_mul: shape mismatch");
  Var out = alloc(val(a).cwiseProduct(val(b)));
  nodes_[out.id].fwd = [this, out, a, b] { val(out) = val(a).cwiseProduct(val(b)); };
  nodes_[out.id].bwd = [this, out, a, b] {
    grd(a) += grd(out).cwiseProduct(val(b));
    grd(b) += grd(out).cwiseProduct(val(a));
  };
  return out;
}

Tape::Var Tape::cw_abs(Var a) {
  Var out = alloc(val(a).cwiseAbs());
  nodes_[out.id].fwd = [this, out, a] { val(out) = val(a).cwiseAbs(); };
  nodes_[out.id].bwd = [this, out, a] {
    grd(a).array() += grd(out).array() * val(a).array().sign();
  };
  return out;
}

Tape::Var Tape::cw_clamp_min(Var a, double floor) {
  Var out = alloc(val(a).cwiseMax(floor));
  nodes_[out.id].fwd = [this, out, a, floor] { val(out) = val(a).cwiseMax(floor); };
  nodes_[out.id].bwd = [this, out, a, floor] {
    grd(a).array() += grd(out).array() * (val(a).array() > floor).cast<double>();
  };
  return out;
}

Tape::Var Tape::cw_inv(Var a) {
  Var out = alloc(val(a).cwiseInverse());
  nodes_[out.id].fwd = [this, out, a] { val(out) = val(a).cwiseInverse(); };
  nodes_[out.id].bwd = [this, out, a] {
    grd(a).array() -= grd(out).array() * val(out).array().square();
  };
  return out;
}

Tape::Var Tape::softplus(Var a) {
  Var out = alloc(val(a).unaryExpr(&softplus_scalar));
  nodes_[out.id].fwd = [this, out, a] { val(out) = val(a).unaryExpr(&softplus_scalar); };
  nodes_[out.id].bwd = [this, out, a] {
    grd(a) += grd(out).cwiseProduct(val(a).unaryExpr(&sigmoid_scalar));
  };
  return out;
}

Tape::Var Tape::rows_scale(Var a, Vec s) {
  require(val(a).rows() == s.size(), "rows_scale: scale length != rows");
  auto apply = [](const Mat& x, const Vec& sc) { return Mat(sc.asDiagonal() * x); };
  Var out = alloc(apply(val(a), s));
  nodes_[out.id].fwd = [this, out, a, s, apply] { val(out) = apply(val(a), s); };
  nodes_[out.id].bwd = [this, out, a, s, apply] { grd(a) += apply(grd(out), s); };
  return out;
}

Tape::Var Tape::rows_scale_var(Var a, Var s) {
  require(val(s).cols() == 1 && val(s).rows() == val(a).rows(), "rows_scale_var: s must be (rows x 1)");
  Var out = alloc(val(s).col(0).asDiagonal() * val(a));
  nodes_[out.id].fwd = [this, out, a, s] { val(out) = val(s).col(0).asDiagonal() * val(a); };
  nodes_[out.id].bwd = [this, out, a, s] {
    grd(a) += val(s).col(0).asDiagonal() * grd(out);
    grd(s).col(0) += grd(out).cwiseProduct(val(a)).rowwise().sum();
  };
  return out;
}

Tape::Var Tape::row_dot(Var a, Var b) {
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(), "row_dot: shape mismatch");
  auto apply = [](const Mat& x, const Mat& y) { return Mat(x.cwiseProduct(y).rowwise().sum()); };
  Var out = alloc(apply(val(a), val(b)));
  nodes_[out.id].fwd = [this, out, a, b, apply] { val(out) = apply(val(a), val(b)); };
  nodes_[out.id].bwd = [this, out, a, b] {
    grd(a) += grd(out).col(0).asDiagonal() * val(b);
    grd(b) += grd(out).col(0).asDiagonal() * val(a);
  };
  return out;
}

Tape::Var Tape::col_sum(Var a) {
  Var out = alloc(val(a).colwise().sum());
  nodes_[out.id].fwd = [this, out, a] { val(out) = val(a).colwise().sum(); };
  nodes_[out.id].bwd = [this, out, a] { grd(a).rowwise() += grd(out).row(0); };
  return out;
}

Tape::Var Tape::repeat_row(Var a, Index rows) {
  require(val(a).rows() == 1, "repeat_row: input must be (1 x d)");
  Var out = alloc(val(a).replicate(rows, 1));
  nodes_[out.id].fwd = [this, out, a, rows] { val(out) = val(a).replicate(rows, 1); };
  nodes_[out.id].bwd = [this, out, a] { grd(a).row(0) += grd(out).colwise().sum(); };
  return out;
}

Tape::Var Tape::sum_all(Var a) {
  Var out = alloc(Mat::Constant(1, 1, val(a).sum()));
  nodes_[out.id].fwd = [this, out, a] { val(out)(0, 0) = val(a).sum(); };
  nodes_[out.id].bwd = [this, out, a] { grd(a).array() += grd(out)(0, 0); };
  return out;
}

Tape::Var Tape::mean_all(Var a) {
  const double inv = 1.0 / static_cast<double>(val(a).size());
  Var out = alloc(Mat::Constant(1, 1, val(a).sum() * inv));
  nodes_[out.id].fwd = [this, out, a, inv] { val(out)(0, 0) = val(a).sum() * inv; };
  nodes_[out.id].bwd = [this, out, a, inv] { grd(a).array() += grd(out)(0, 0) * inv; };
  return out;
}

Tape::Var Tape::slice_rows(Var a, Index begin, Index count) {
  require(begin >= 0 && begin + count <= val(a).rows(), "slice_rows: out of range");
  Var out = alloc(val(a).middleRows(begin, count));
  nodes_[out.id].fwd = [this, out, a, begin, count] { val(out) = val(a).middleRows(begin, count); };
  nodes_[out.id].bwd = [this, out, a, begin, count] {
    grd(a).middleRows(begin, count) += grd(out);
  };
  return out;
}

Tape::Var Tape::gather_rows(Var a, std::vector<Index> idx) {
  Mat gathered(static_cast<Index>(idx.size()), val(a).cols());
  for (std::size_t k = 0; k < idx.size(); ++k) gathered.row(k) = val(a).row(idx[k]);
  Var out = alloc(std::move(gathered));
  nodes_[out.id].fwd = [this, out, a, idx] {
    for (std::size_t k = 0; k < idx.size(); ++k) val(out).row(k) = val(a).row(idx[k]);
  };
  nodes_[out.id].bwd = [this, out, a, idx] {
    for (std::size_t k = 0; k < idx.size(); ++k) grd(a).row(idx[k]) += grd(out).row(k);
  };
  return out;
}

Tape::Var Tape::row_normalize(Var a, double eps) {
  auto apply = [eps](const Mat& x) {
    Mat y = x;
    for (Index r = 0; r < y.rows(); ++r) {
      const double norm = y.row(r).norm();
      if (norm > eps) y.row(r) /= norm;
    }
    return y;
  };
  Var out = alloc(apply(val(a)));
  nodes_[out.id].fwd = [this, out, a, apply] { val(out) = apply(val(a)); };
  nodes_[out.id].bwd = [this, out, a, eps] {
    for (Index r = 0; r < val(a).rows(); ++r) {
      const double norm = val(a).row(r).norm();
      if (norm <= eps) {
        grd(a).row(r) += grd(out).row(r);  // degenerate rows pass through
        continue;
      }
      const auto y = val(out).row(r);
      const auto g = grd(out).row(r);
      grd(a).row(r) += (g - g.dot(y) * y) / norm;
    }
  };
  return out;
}

Tape::Var Tape::matmul(Var a, Var b) {
  require(val(a).cols() == val(b).rows(), "matmul: inner dims mismatch");
  Var out = alloc(val(a) * val(b));
  nodes_[out.id].fwd = [this, out, a, b] { val(out) = val(a) * val(b); };
  nodes_[out.id].bwd = [this, out, a, b] {
    grd(a) += grd(out) * val(b).transpose();
    grd(b) += val(a).transpose() * grd(out);
  };
  return out;
}

Tape::Var Tape::matmul_lc(Mat a, Var b) {
  require(a.cols() == val(b).rows(), "matmul_lc: inner dims mismatch");
  Var out = alloc(a * val(b));
  nodes_[out.id].fwd = [this, out, a, b] { val(out) = a * val(b); };
  nodes_[out.id].bwd = [this, out, a, b] { grd(b) += a.transpose() * grd(out); };
  return out;
}

Tape::Var Tape::matmul_rc(Var a, Mat b) {
  require(val(a).cols() == b.rows(), "matmul_rc: inner dims mismatch");
  Var out = alloc(val(a) * b);
  nodes_[out.id].fwd = [this, out, a, b] { val(out) = val(a) * b; };
  nodes_[out.id].bwd = [this, out, a, b] { grd(a) += grd(out) * b.transpose(); };
  return out;
}

Tape::Var Tape::matmul_tn(Var a, Var b) {
  require(val(a).rows() == val(b).rows(), "matmul_tn: row dims mismatch");
  Var out = alloc(val(a).transpose() * val(b));
  nodes_[out.id].fwd = [this, out, a, b] { val(out) = val(a).transpose() * val(b); };
  nodes_[out.id].bwd = [this, out, a, b] {
    grd(a) += val(b) * grd(out).transpose();
    grd(b) += val(a) * grd(out);
  };
  return out;
}

Tape::Var Tape::matmul_tn_lc(Mat a, Var b) {
  require(a.rows() == val(b).rows(), "matmul_tn_lc: row dims mismatch");
  Var out = alloc(a.transpose() * val(b));
  nodes_[out.id].fwd = [this, out, a, b] { val(out) = a.transpose() * val(b); };
  nodes_[out.id].bwd = [this, out, a, b] { grd(b) += a * grd(out); };
  return out;
}

Tape::Var Tape::edge_dot(Var users, Var items, Edges e) {
  auto apply = [e](const Mat& us, const Mat& is) {
    Mat out(static_cast<Index>(e->size()), 1);
    for (std::size_t k = 0; k < e->size(); ++k) out(k, 0) = us.row(e->u[k]).dot(is.row(e->i[k]));
    return out;
  };
  Var out = alloc(apply(val(users), val(items)));
  nodes_[out.id].fwd = [this, out, users, items, apply] { val(out) = apply(val(users), val(items)); };
  nodes_[out.id].bwd = [this, out, users, items, e] {
    for (std::size_t k = 0; k < e->size(); ++k) {
      const double g = grd(out)(k, 0);
      grd(users).row(e->u[k]) += g * val(items).row(e->i[k]);
      grd(items).row(e->i[k]) += g * val(users).row(e->u[k]);
    }
  };
  return out;
}

Tape::Var Tape::gather_user(Var v, Edges e) {
  require(val(v).cols() == 1 && val(v).rows() == e->n, "gather_user: v must be (n x 1)");
  auto apply = [e](const Mat& x) {
    Mat out(static_cast<Index>(e->size()), 1);
    for (std::size_t k = 0; k < e->size(); ++k) out(k, 0) = x(e->u[k], 0);
    return out;
  };
  Var out = alloc(apply(val(v)));
  nodes_[out.id].fwd = [this, out, v, apply] { val(out) = apply(val(v)); };
  nodes_[out.id].bwd = [this, out, v, e] {
    for (std::size_t k = 0; k < e->size(); ++k) grd(v)(e->u[k], 0) += grd(out)(k, 0);
  };
  return out;
}

Tape::Var Tape::gather_item(Var v, Edges e) {
  require(val(v).cols() == 1 && val(v).rows() == e->m, "gather_item: v must be (m x 1)");
  auto apply = [e](const Mat& x) {
    Mat out(static_cast<Index>(e->size()), 1);
    for (std::size_t k = 0; k < e->size(); ++k) out(k, 0) = x(e->i[k], 0);
    return out;
  };
  Var out = alloc(apply(val(v)));
  nodes_[out.id].fwd = [this, out, v, apply] { val(out) = apply(val(v)); };
  nodes_[out.id].bwd = [this, out, v, e] {
    for (std::size_t k = 0; k < e->size(); ++k) grd(v)(e->i[k], 0) += grd(out)(k, 0);
  };
  return out;
}

Tape::Var Tape::scatter_to_users(Var w, Var items, Edges e) {
  require(val(w).cols() == 1 && val(w).rows() == static_cast<Index>(e->size()),
          "scatter_to_users: w must be (E x 1)");
  auto apply = [e](const Mat& wv, const Mat& is) {
    Mat out = Mat::Zero(e->n, is.cols());
    for (std::size_t k = 0; k < e->size(); ++k) out.row(e->u[k]) += wv(k, 0) * is.row(e->i[k]);
    return out;
  };
  Var out = alloc(apply(val(w), val(items)));
  nodes_[out.id].fwd = [this, out, w, items, apply] { val(out) = apply(val(w), val(items)); };
  nodes_[out.id].bwd = [this, out, w, items, e] {
    for (std::size_t k = 0; k < e->size(); ++k) {
      grd(w)(k, 0) += grd(out).row(e->u[k]).dot(val(items).row(e->i[k]));
      grd(items).row(e->i[k]) += val(w)(k, 0) * grd(out).row(e->u[k]);
    }
  };
  return out;
}

Tape::Var Tape::scatter_to_users_c(Vec w, Var items, Edges e) {
  require(w.size() == static_cast<Index>(e->size()), "scatter_to_users_c: |w| != E");
  auto apply = [e, w](const Mat& is) {
    Mat out = Mat::Zero(e->n, is.cols());
    for (std::size_t k = 0; k < e->size(); ++k) out.row(e->u[k]) += w[k] * is.row(e->i[k]);
    return out;
  };
  Var out = alloc(apply(val(items)));
  nodes_[out.id].fwd = [this, out, items, apply] { val(out) = apply(val(items)); };
  nodes_[out.id].bwd = [this, out, items, e, w] {
    for (std::size_t k = 0; k < e->size(); ++k) {
      grd(items).row(e->i[k]) += w[k] * grd(out).row(e->u[k]);
    }
  };
  return out;
}

Tape::Var Tape::scatter_to_items(Var w, Var users, Edges e) {
  require(val(w).cols() == 1 && val(w).rows() == static_cast<Index>(e->size()),
          "scatter_to_items: w must be (E x 1)");
  auto apply = [e](const Mat& wv, const Mat& us) {
    Mat out = Mat::Zero(e->m, us.cols());
    for (std::size_t k = 0; k < e->size(); ++k) out.row(e->i[k]) += wv(k, 0) * us.row(e->u[k]);
    return out;
  };
  Var out = alloc(apply(val(w), val(users)));
  nodes_[out.id].fwd = [this, out, w, users, apply] { val(out) = apply(val(w), val(users)); };
  nodes_[out.id].bwd = [this, out, w, users, e] {
    for (std::size_t k = 0; k < e->size(); ++k) {
      grd(w)(k, 0) += grd(out).row(e->i[k]).dot(val(users).row(e->u[k]));
      grd(users).row(e->u[k]) += val(w)(k, 0) * grd(out).row(e->i[k]);
    }
  };
  return out;
}

Tape::Var Tape::scatter_to_items_c(Vec w, Var users, Edges e) {
  require(w.size() == static_cast<Index>(e->size()), "scatter_to_items_c: |w| != E");
  auto apply = [e, w](const Mat& us) {
    Mat out = Mat::Zero(e->m, us.cols());
    for (std::size_t k = 0; k < e->size(); ++k) out.row(e->i[k]) += w[k] * us.row(e->u[k]);
    return out;
  };
  Var out = alloc(apply(val(users)));
  nodes_[out.id].fwd = [this, out, users, apply] { val(out) = apply(val(users)); };
  nodes_[out.id].bwd = [this, out, users, e, w] {
    for (std::size_t k = 0; k < e->size(); ++k) {
      grd(users).row(e->u[k]) += w[k] * grd(out).row(e->i[k]);
    }
  };
  return out;
}

Tape::Var Tape::edge_sum_to_users(Var w, Edges e) {
  require(val(w).cols() == 1 && val(w).rows() == static_cast<Index>(e->size()),
          "edge_sum_to_users: w must be (E x 1)");
  auto apply = [e](const Mat& wv) {
    Mat out = Mat::Zero(e->n, 1);
    for (std::size_t k = 0; k < e->size(); ++k) out(e->u[k], 0) += wv(k, 0);
    return out;
  };
  Var out = alloc(apply(val(w)));
  nodes_[out.id].fwd = [this, out, w, apply] { val(out) = apply(val(w)); };
  nodes_[out.id].bwd = [this, out, w, e] {
    for (std::size_t k = 0; k < e->size(); ++k) grd(w)(k, 0) += grd(out)(e->u[k], 0);
  };
  return out;
}

Tape::Var Tape::edge_sum_to_items(Var w, Edges e) {
  require(val(w).cols() == 1 && val(w).rows() == static_cast<Index>(e->size()),
          "edge_sum_to_items: w must be (E x 1)");
  auto apply = [e](const Mat& wv) {
    Mat out = Mat::Zero(e->m, 1);
    for (std::size_t k = 0; k < e->size(); ++k) out(e->i[k], 0) += wv(k, 0);
    return out;
  };
  Var out = alloc(apply(val(w)));
  nodes_[out.id].fwd = [this, out, w, apply] { val(out) = apply(val(w)); };
  nodes_[out.id].bwd = [this, out, w, e] {
    for (std::size_t k = 0; k < e->size(); ++k) grd(w)(k, 0) += grd(out)(e->i[k], 0);
  };
  return out;
}

}  // namespace rankformer::ad
