#pragma once

#include "tsnet/tensor.hpp"

namespace tsnet {

enum class GcnNormalization {
  Symmetric,      // D^-1/2 A D^-1/2
  Asymmetric,     // D^-1/2 A D^+1/2, kept for comparison runs
};

/// A + I.
Matrix add_self_loops(const Matrix& adjacency);

/// Diagonal matrix of weighted row sums.
Matrix degrees(const Matrix& self_looped);

/// Propagation operator built from a self-looped adjacency and its degrees.
Matrix propagation_operator(const Matrix& self_looped, const Matrix& degree,
                            GcnNormalization norm = GcnNormalization::Symmetric);

/// Propagation operator straight from a raw label-distance adjacency.
Matrix propagation_from_adjacency(const Matrix& adjacency, GcnNormalization norm = GcnNormalization::Symmetric);

/// One layer: ReLU(P F W). Throws NumericError on non-finite output.
Matrix gcn_layer(const Matrix& features, const Matrix& self_looped, const Matrix& degree, const Matrix& weights,
                 GcnNormalization norm = GcnNormalization::Symmetric);

}  // namespace tsnet
