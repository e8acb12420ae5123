#include "tsnet/gcn.hpp"

#include "tsnet/autodiff.hpp"
#include "tsnet/error.hpp"

#include <cmath>

namespace tsnet {

Matrix add_self_loops(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw ArgumentError("add_self_loops: adjacency must be square");
  return adjacency + Matrix::Identity(adjacency.rows(), adjacency.cols());
}

Matrix degrees(const Matrix& self_looped) {
  if (self_looped.rows() != self_looped.cols()) throw ArgumentError("degrees: adjacency must be square");
  Matrix d = Matrix::Zero(self_looped.rows(), self_looped.cols());
  d.diagonal() = self_looped.rowwise().sum();
  return d;
}

Matrix propagation_operator(const Matrix& self_looped, const Matrix& degree, GcnNormalization norm) {
  if (degree.rows() != self_looped.rows() || degree.cols() != self_looped.cols()) {
    throw ArgumentError("propagation_operator: degree shape mismatch");
  }
  const Eigen::VectorXd d = degree.diagonal();
  if ((d.array() <= 0.0).any()) throw NumericError("propagation_operator: non-positive degree");
  const Eigen::VectorXd left = d.array().rsqrt();
  const Eigen::VectorXd right = norm == GcnNormalization::Symmetric ? left : Eigen::VectorXd(d.array().sqrt());
  return left.asDiagonal() * self_looped * right.asDiagonal();
}

Matrix propagation_from_adjacency(const Matrix& adjacency, GcnNormalization norm) {
  const Matrix a = add_self_loops(adjacency);
  return propagation_operator(a, degrees(a), norm);
}

Matrix gcn_layer(const Matrix& features, const Matrix& self_looped, const Matrix& degree, const Matrix& weights,
                 GcnNormalization norm) {
  if (features.rows() != self_looped.rows()) throw ArgumentError("gcn_layer: node count mismatch");
  if (features.cols() != weights.rows()) throw ArgumentError("gcn_layer: weight rows must equal feature width");
  const Matrix p = propagation_operator(self_looped, degree, norm);
  ad::Tape tape;
  const auto x = ad::group_propagate(p, tape.constant(features), static_cast<int>(features.rows()));
  Matrix out = ad::relu(ad::matmul(x, tape.constant(weights))).value();
  if (!out.allFinite()) throw NumericError("gcn_layer: non-finite output");
  return out;
}

}  // namespace tsnet
