#include "tsnet/chargraph.hpp"

#include "tsnet/error.hpp"

#include <cstdlib>

namespace tsnet {

namespace {

CharGraph make_graph(std::vector<int> values, std::vector<int> feature_index) {
  const auto n = static_cast<Eigen::Index>(values.size());
  CharGraph g;
  g.edge_weights = Matrix::Ones(n, n);
  g.adjacency.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      g.adjacency(i, j) = std::abs(static_cast<double>(values[static_cast<std::size_t>(i)]) -
                                   static_cast<double>(values[static_cast<std::size_t>(j)]));
    }
  }
  g.node_values = std::move(values);
  g.feature_index = std::move(feature_index);
  return g;
}

}  // namespace

std::vector<CharGraph> build_temporal_graphs(const CharacterSet& characters) {
  characters.validate();
  std::vector<CharGraph> out;
  out.reserve(characters.categories());
  for (const auto& labels : characters.labels) out.push_back(make_graph(labels, labels));
  return out;
}

int concatenated_vocab_size(const CharacterSet& characters) {
  int total = 0;
  for (int v : characters.vocab_sizes) total += v;
  return total;
}

std::vector<CharGraph> build_category_graphs(const CharacterSet& characters) {
  characters.validate();
  std::vector<int> offset(characters.categories(), 0);
  for (std::size_t n = 1; n < offset.size(); ++n) offset[n] = offset[n - 1] + characters.vocab_sizes[n - 1];

  std::vector<CharGraph> out;
  out.reserve(characters.steps());
  for (std::size_t t = 0; t < characters.steps(); ++t) {
    std::vector<int> values, codes;
    for (std::size_t n = 0; n < characters.categories(); ++n) {
      values.push_back(characters.labels[n][t]);
      codes.push_back(offset[n] + characters.labels[n][t]);
    }
    out.push_back(make_graph(std::move(values), std::move(codes)));
  }
  return out;
}

CharGraph embed_features(CharGraph graph, const Matrix& weights) {
  const auto n = static_cast<Eigen::Index>(graph.nodes());
  graph.features.resize(n, weights.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int code = graph.feature_index[static_cast<std::size_t>(i)];
    if (code < 0 || code >= weights.rows()) {
      throw EncodingError("node label code " + std::to_string(code) + " outside embedding vocabulary of size " +
                          std::to_string(weights.rows()));
    }
    graph.features.row(i) = weights.row(code);
  }
  return graph;
}

}  // namespace tsnet
