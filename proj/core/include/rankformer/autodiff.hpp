#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "rankformer/graph.hpp"
#include "rankformer/types.hpp"

namespace rankformer::ad {

// Minimal reverse-mode tape over dense matrices. Values are computed eagerly
// at recording time (so builders can read intermediate numbers), kept for the
// backward sweep, and can be recomputed after set_input() for re-evaluating
// the same expression at a new point. Scalars are 1x1 matrices, column
// vectors (k x 1). Everything is sequential and deterministic.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  // Edge endpoints in user-CSR order; shared between the graph-structured ops.
  struct EdgeList {
    std::vector<Index> u, i;
    Index n = 0, m = 0;
    std::size_t size() const { return u.size(); }
  };
  static std::shared_ptr<const EdgeList> make_edge_list(const InteractionGraph& g);

  Var input(Mat value);
  Var constant(Mat value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var add_const(Var a, double c);
  Var cw_mul(Var a, Var b);
  Var cw_abs(Var a);
  Var cw_clamp_min(Var a, double floor);
  Var cw_inv(Var a);
  Var softplus(Var a);

  Var rows_scale(Var a, Vec s);      // constant per-row scale
  Var rows_scale_var(Var a, Var s);  // s is (rows x 1)
  Var row_dot(Var a, Var b);         // (rows x 1)
  Var col_sum(Var a);                // (1 x cols)
  Var repeat_row(Var a, Index rows);
  Var sum_all(Var a);
  Var mean_all(Var a);
  Var slice_rows(Var a, Index begin, Index count);
  Var gather_rows(Var a, std::vector<Index> idx);
  Var row_normalize(Var a, double eps);

  Var matmul(Var a, Var b);
  Var matmul_lc(Mat a, Var b);     // constant left operand
  Var matmul_rc(Var a, Mat b);     // constant right operand
  Var matmul_tn(Var a, Var b);     // a^T b
  Var matmul_tn_lc(Mat a, Var b);  // a^T b, constant a

  using Edges = std::shared_ptr<const EdgeList>;
  Var edge_dot(Var users, Var items, Edges e);  // (E x 1)
  Var gather_user(Var v, Edges e);              // (n x 1) -> (E x 1)
  Var gather_item(Var v, Edges e);
  Var scatter_to_users(Var w, Var items, Edges e);  // sum_e w_e * items.row(i_e) into row u_e
  Var scatter_to_users_c(Vec w, Var items, Edges e);
  Var scatter_to_items(Var w, Var users, Edges e);
  Var scatter_to_items_c(Vec w, Var users, Edges e);
  Var edge_sum_to_users(Var w, Edges e);  // (E x 1) -> (n x 1)
  Var edge_sum_to_items(Var w, Edges e);

  void set_input(Var v, Mat value);
  void recompute();         // rerun forward closures in recording order
  void backward(Var root);  // root must be 1x1; grads accumulate from zero
  const Mat& value(Var v) const;
  const Mat& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> fwd;
    std::function<void()> bwd;
  };
  std::vector<Node> nodes_;

  Var alloc(Mat value);
  Mat& val(Var v) { return nodes_[v.id].value; }
  Mat& grd(Var v) { return nodes_[v.id].grad; }
};

}  // namespace rankformer::ad
