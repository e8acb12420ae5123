#pragma once

#include "tsnet/data.hpp"
#include "tsnet/tensor.hpp"

#include <vector>

namespace tsnet {

/// One temporal (nodes = timesteps of a category) or category (nodes =
/// categories at a timestep) character graph.
struct CharGraph {
  std::vector<int> node_values;    // raw labels
  std::vector<int> feature_index;  // row of the embedding table hit by each node's one-hot code
  Matrix edge_weights;             // all ones; kept for completeness, never updated
  Matrix adjacency;                // |v_i - v_j|
  Matrix features;                 // empty until embed_features

  std::size_t nodes() const { return node_values.size(); }
};

/// One graph per category, T_obs nodes each.
std::vector<CharGraph> build_temporal_graphs(const CharacterSet& characters);

/// One graph per timestep, N nodes each. Node i's one-hot code indexes the
/// concatenated vocabulary of all categories (offset of category i + label).
std::vector<CharGraph> build_category_graphs(const CharacterSet& characters);

/// Sum of vocabulary sizes, the one-hot width of category-graph nodes.
int concatenated_vocab_size(const CharacterSet& characters);

/// Linear embedding of the one-hot node codes: F = onehot(feature_index) * W.
/// Throws EncodingError when a code is outside W's rows.
CharGraph embed_features(CharGraph graph, const Matrix& weights);

/// Per-category (temporal) and per-timestep (category) embedding weights.
struct EmbeddingParams {
  std::vector<Matrix> temporal;  // N matrices, vocab_n x width
  std::vector<Matrix> category;  // T_obs matrices, sum(vocab) x width
  int width = 64;
};

}  // namespace tsnet
