#include "tsnet/model.hpp"

#include "tsnet/chargraph.hpp"
#include "tsnet/decoder.hpp"
#include "tsnet/error.hpp"
#include "tsnet/gcn.hpp"

#include <cmath>
#include <limits>

namespace tsnet {

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Matrix xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  return uniform(rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

// Runner-up minus best candidate distance, minimized over samples.
double min_tie_margin(const Matrix& pred, const Matrix& target, int k) {
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index b = 0; b < target.rows(); ++b) {
    double best = std::numeric_limits<double>::infinity(), second = best;
    for (int j = 0; j < k; ++j) {
      const double d = (pred.row(b * k + j) - target.row(b)).norm();
      if (d < best) {
        second = best;
        best = d;
      } else if (d < second) {
        second = d;
      }
    }
    margin = std::min(margin, second - best);
  }
  return margin;
}

int vocab_total(const CharacterSchema& s) {
  int v = 0;
  for (int x : s.vocab_sizes) v += x;
  return v;
}

}  // namespace

Matrix stack_rows(std::span<const PreparedSample* const> batch, RowVector PreparedSample::*field) {
  if (batch.empty()) throw ArgumentError("empty batch");
  Matrix out(static_cast<Eigen::Index>(batch.size()), (batch.front()->*field).size());
  for (std::size_t b = 0; b < batch.size(); ++b) out.row(static_cast<Eigen::Index>(b)) = batch[b]->*field;
  return out;
}

Model::Model(Config config) : config_(std::move(config)) {
  config_.validate();
  schema_ = config_.schema();
  init_parameters();
}

Model::Model(Config config, const ParamStore& params) : Model(std::move(config)) {
  for (const Parameter* src : params.all()) {
    if (!params_.contains(src->name)) {
      throw CompatibilityError("checkpoint parameter '" + src->name + "' does not belong to this configuration");
    }
  }
  for (Parameter* dst : params_.all()) {
    if (!params.contains(dst->name)) throw CompatibilityError("checkpoint lacks parameter '" + dst->name + "'");
    const Parameter& src = params.at(dst->name);
    if (src.value.rows() != dst->value.rows() || src.value.cols() != dst->value.cols()) {
      throw CompatibilityError("checkpoint parameter '" + dst->name + "' has shape " +
                               std::to_string(src.value.rows()) + "x" + std::to_string(src.value.cols()) +
                               ", expected " + std::to_string(dst->value.rows()) + "x" +
                               std::to_string(dst->value.cols()));
    }
    dst->value = src.value;
    dst->grad.setZero();
  }
}

void Model::init_parameters() {
  Rng rng(derive_seed(config_.seed, 1));
  const int n = static_cast<int>(schema_.size());
  const int t = config_.t_obs;
  const int df = config_.attention_width;
  const int he = config_.encoder_width;
  const int hd = config_.decoder_width;
  const int dz = config_.latent_dim;
  const int ce = config_.char_embed_width;
  const int ge = config_.goal_embed_width;
  const int gh = config_.goal_hidden_width;

  auto add_stream = [&](const std::string& p, int table_rows, int blocks, int nodes) {
    params_.add(p + ".embed", uniform(table_rows, df, 1.0, rng));
    params_.add(p + ".query", xavier(df, static_cast<Eigen::Index>(blocks) * df, rng));
    params_.add(p + ".key", xavier(df, static_cast<Eigen::Index>(blocks) * df, rng));
    // Centred on uniform attention: an entry at the row average scores
    // sigmoid(0.2), just above 0.5, so xi = 0.5 initially removes the
    // below-average entries.
    constexpr double kFuse = 4.0;
    params_.add(p + ".fuse.kernel", Matrix::Constant(1, config_.heads, kFuse));
    params_.add(p + ".fuse.bias", Matrix::Constant(1, 1, 0.2 - kFuse * config_.heads / nodes));
    for (int l = 0; l < config_.gcn_layers; ++l) params_.add(p + ".gcn." + std::to_string(l), xavier(df, df, rng));
  };
  if (config_.use_st) add_stream("tem", vocab_total(schema_), config_.per_category_attention ? n : 1, t);
  if (config_.use_sc) add_stream("cat", t * vocab_total(schema_), 1, n);

  auto add_gru = [&](const std::string& p, int in, int h) {
    const double b = 1.0 / std::sqrt(static_cast<double>(h));
    params_.add(p + ".wi", uniform(in, 3 * h, b, rng));
    params_.add(p + ".bi", Matrix::Zero(1, 3 * h));
    params_.add(p + ".wh", uniform(h, 3 * h, b, rng));
    params_.add(p + ".bh", Matrix::Zero(1, 3 * h));
  };
  add_gru("enc.past", 4, he);
  add_gru("enc.future", 4, he);
  params_.add("prior.w", xavier(he, 2 * dz, rng));
  params_.add("prior.b", Matrix::Zero(1, 2 * dz));
  params_.add("posterior.w", xavier(2 * he, 2 * dz, rng));
  params_.add("posterior.b", Matrix::Zero(1, 2 * dz));

  if (gh > 0) {
    params_.add("goal.hidden.w", xavier(he + dz, gh, rng));
    params_.add("goal.hidden.b", Matrix::Zero(1, gh));
  }
  const int goal_in = gh > 0 ? gh : he + dz;
  params_.add("goal.out.w", xavier(goal_in, 4, rng));
  params_.add("goal.out.b", Matrix::Zero(1, 4));

  int char_width = 0;
  if (config_.use_st) char_width += n * t * df;
  if (config_.use_sc) char_width += n * t * df;
  if (char_width > 0) {
    params_.add("dec.char_embed.w", xavier(char_width, ce, rng));
    params_.add("dec.char_embed.b", Matrix::Zero(1, ce));
    params_.add("dec.in.char", xavier(ce, 3 * hd, rng));
    params_.add("dec.init.char", xavier(ce, hd, rng));
  }
  params_.add("dec.goal_embed.w", xavier(4, ge, rng));
  params_.add("dec.goal_embed.b", Matrix::Zero(1, ge));
  params_.add("dec.in.past", xavier(he, 3 * hd, rng));
  params_.add("dec.in.goal", xavier(ge, 3 * hd, rng));
  params_.add("dec.in.b", Matrix::Zero(1, 3 * hd));
  params_.add("dec.init.past", xavier(he, hd, rng));
  params_.add("dec.init.goal", xavier(ge, hd, rng));
  params_.add("dec.init.b", Matrix::Zero(1, hd));
  params_.add("dec.gru.wh", uniform(hd, 3 * hd, 1.0 / std::sqrt(static_cast<double>(hd)), rng));
  params_.add("dec.gru.bh", Matrix::Zero(1, 3 * hd));
  // Zero displacements at initialization: every decoded box starts at the last observed box.
  params_.add("dec.out.w", Matrix::Zero(hd, 4));
  params_.add("dec.out.b", Matrix::Zero(1, 4));
}

std::vector<std::string> Model::character_parameters() const {
  std::vector<std::string> out;
  for (const Parameter* p : params_.all()) {
    if (p->name.starts_with("tem.") || p->name.starts_with("cat.") || p->name.starts_with("dec.char_embed") ||
        p->name == "dec.in.char" || p->name == "dec.init.char") {
      out.push_back(p->name);
    }
  }
  return out;
}

PreparedSample Model::prepare(const Sample& sample) const {
  if (sample.observed.size() != static_cast<std::size_t>(config_.t_obs) ||
      sample.future.size() != static_cast<std::size_t>(config_.t_pred)) {
    throw ArgumentError("sample of " + sample.track_id + " does not match T_obs/T_pred");
  }
  PreparedSample p;
  p.track_id = sample.track_id;
  p.window_start = sample.window_start;
  p.normalizer.origin = sample.observed.boxes.back();
  p.normalizer.scale = {config_.image_width, config_.image_height};
  p.observed = p.normalizer.normalize(sample.observed.boxes);
  p.future = p.normalizer.normalize(sample.future.boxes);
  p.observed_px = sample.observed.boxes;
  p.future_px = sample.future.boxes;
  p.characters = sample.characters;
  if (!config_.uses_characters()) return p;

  const CharacterSet& cs = sample.characters;
  if (cs.category_names != schema_.names || cs.vocab_sizes != schema_.vocab_sizes) {
    throw ValidationError("sample " + sample.track_id + ": character categories do not match the configuration");
  }
  if (cs.steps() != static_cast<std::size_t>(config_.t_obs)) {
    throw ValidationError("sample " + sample.track_id + ": characters do not cover the observed window");
  }
  cs.validate();
  const int n = static_cast<int>(cs.categories());
  const int t = config_.t_obs;
  const int vtot = vocab_total(schema_);
  std::vector<int> offset(static_cast<std::size_t>(n), 0);
  for (int i = 1; i < n; ++i) offset[static_cast<std::size_t>(i)] = offset[static_cast<std::size_t>(i - 1)] + cs.vocab_sizes[static_cast<std::size_t>(i - 1)];

  const auto norm = config_.asymmetric_norm ? GcnNormalization::Asymmetric : GcnNormalization::Symmetric;
  if (config_.use_st) {
    const auto graphs = build_temporal_graphs(cs);
    p.temporal_propagation.resize(static_cast<Eigen::Index>(n) * t, t);
    for (int i = 0; i < n; ++i) {
      const auto& g = graphs[static_cast<std::size_t>(i)];
      for (int s = 0; s < t; ++s) p.temporal_codes.push_back(offset[static_cast<std::size_t>(i)] + g.feature_index[static_cast<std::size_t>(s)]);
      p.temporal_propagation.middleRows(static_cast<Eigen::Index>(i) * t, t) = propagation_from_adjacency(g.adjacency, norm);
    }
  }
  if (config_.use_sc) {
    const auto graphs = build_category_graphs(cs);
    p.category_propagation.resize(static_cast<Eigen::Index>(t) * n, n);
    for (int s = 0; s < t; ++s) {
      const auto& g = graphs[static_cast<std::size_t>(s)];
      for (int i = 0; i < n; ++i) p.category_codes.push_back(s * vtot + g.feature_index[static_cast<std::size_t>(i)]);
      p.category_propagation.middleRows(static_cast<Eigen::Index>(s) * n, n) = propagation_from_adjacency(g.adjacency, norm);
    }
  }
  return p;
}

ad::Var Model::place(ad::Tape& tape, const std::string& name) {
  Parameter& p = params_.at(name);
  if (training_) return tape.parameter(p);
  ++p.uses;
  return tape.constant(p.value);
}

ad::Var Model::stream(ad::Tape& tape, const std::string& prefix, std::span<const PreparedSample* const> batch,
                      bool temporal, Matrix& mask_out, ad::MaskStats& stats, double& xi_margin) {
  const int n_cat = static_cast<int>(schema_.size());
  const int t = config_.t_obs;
  const int n = temporal ? t : n_cat;
  const int per_sample = n_cat * t;
  const auto rows = static_cast<Eigen::Index>(batch.size()) * per_sample;

  std::vector<int> codes;
  codes.reserve(static_cast<std::size_t>(rows));
  Matrix prop(rows, n);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = *batch[b];
    const auto& c = temporal ? s.temporal_codes : s.category_codes;
    codes.insert(codes.end(), c.begin(), c.end());
    prop.middleRows(static_cast<Eigen::Index>(b) * per_sample, per_sample) =
        temporal ? s.temporal_propagation : s.category_propagation;
  }

  const auto features = ad::gather_rows(place(tape, prefix + ".embed"), std::move(codes));
  auto q = ad::matmul(features, place(tape, prefix + ".query"));
  auto k = ad::matmul(features, place(tape, prefix + ".key"));
  if (temporal && config_.per_category_attention) {
    std::vector<int> block(static_cast<std::size_t>(rows));
    for (Eigen::Index r = 0; r < rows; ++r) block[static_cast<std::size_t>(r)] = static_cast<int>((r / t) % n_cat);
    q = ad::select_col_block(q, config_.attention_width, block);
    k = ad::select_col_block(k, config_.attention_width, std::move(block));
  }
  const int heads = config_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.attention_width / heads));
  const auto r = ad::attention_softmax(q, k, n, heads, scale);
  const auto j = ad::fuse_heads(r, place(tape, prefix + ".fuse.kernel"), place(tape, prefix + ".fuse.bias"), n, heads);
  const auto m = config_.apply_threshold ? ad::threshold(j, config_.xi) : j;
  if (config_.apply_threshold) xi_margin = std::min(xi_margin, (j.value().array() - config_.xi).abs().minCoeff());
  mask_out = m.value();
  auto x = ad::mask_softmax(features, m, n, &stats);
  for (int l = 0; l < config_.gcn_layers; ++l) {
    x = ad::relu(ad::matmul(ad::group_propagate(prop, x, n), place(tape, prefix + ".gcn." + std::to_string(l))));
  }
  if (!x.value().allFinite()) throw NumericError(prefix + " character stream produced non-finite features");
  return ad::reshape(x, static_cast<Eigen::Index>(batch.size()),
                     static_cast<Eigen::Index>(per_sample) * config_.attention_width);
}

ad::Var Model::characters(ad::Tape& tape, std::span<const PreparedSample* const> batch, MaskTrace& trace) {
  std::vector<ad::Var> parts;
  if (config_.use_st) {
    parts.push_back(stream(tape, "tem", batch, true, trace.temporal, trace.temporal_stats, trace.xi_margin));
  }
  if (config_.use_sc) {
    parts.push_back(stream(tape, "cat", batch, false, trace.category, trace.category_stats, trace.xi_margin));
  }
  if (parts.empty()) return {};
  if (parts.size() == 1) return parts.front();
  return ad::concat_cols(parts);
}

ad::Var Model::encode_past(ad::Tape& tape, std::span<const PreparedSample* const> batch) {
  const GruVars g{place(tape, "enc.past.wi"), place(tape, "enc.past.bi"), place(tape, "enc.past.wh"),
                  place(tape, "enc.past.bh")};
  return gru_encode(tape.constant(stack_rows(batch, &PreparedSample::observed)), 4, g);
}

ad::Var Model::encode_future(ad::Tape& tape, ad::Var future_steps) {
  if (!training_) throw ModeError("the future encoder only exists during training");
  const GruVars g{place(tape, "enc.future.wi"), place(tape, "enc.future.bi"), place(tape, "enc.future.wh"),
                  place(tape, "enc.future.bh")};
  return gru_encode(future_steps, 4, g);
}

ad::Var Model::decode_all(ad::Tape& tape, ad::Var chars, ad::Var past, ad::Var latents, int count, ad::Var* goals) {
  auto linear = [&](const std::string& w, const std::string& b) { return LinearVars{place(tape, w), place(tape, b)}; };
  GoalHeadVars gh;
  if (config_.goal_hidden_width > 0) gh.hidden = linear("goal.hidden.w", "goal.hidden.b");
  gh.output = linear("goal.out.w", "goal.out.b");
  const auto g = predict_goal(gh, ad::repeat_rows(past, count), latents);
  if (!g.value().allFinite()) throw NumericError("goal head produced non-finite goals");
  if (goals != nullptr) *goals = g;

  DecoderVars dv;
  if (chars.valid()) {
    dv.char_embed = linear("dec.char_embed.w", "dec.char_embed.b");
    dv.in_char = place(tape, "dec.in.char");
    dv.init_char = place(tape, "dec.init.char");
  }
  dv.goal_embed = linear("dec.goal_embed.w", "dec.goal_embed.b");
  dv.in_past = place(tape, "dec.in.past");
  dv.in_goal = place(tape, "dec.in.goal");
  dv.in_bias = place(tape, "dec.in.b");
  dv.init_past = place(tape, "dec.init.past");
  dv.init_goal = place(tape, "dec.init.goal");
  dv.init_bias = place(tape, "dec.init.b");
  dv.hidden_weights = place(tape, "dec.gru.wh");
  dv.hidden_bias = place(tape, "dec.gru.bh");
  dv.output = linear("dec.out.w", "dec.out.b");
  const auto traj = decode(dv, chars, past, g, count, config_.t_pred);
  if (!traj.value().allFinite()) throw NumericError("decoder produced non-finite boxes");
  return traj;
}

TrainStep Model::forward_train(ad::Tape& tape, std::span<const PreparedSample* const> batch, Rng& rng) {
  if (!training_) throw ModeError("forward_train requires training mode");
  if (batch.empty()) throw ArgumentError("empty batch");
  const int k = config_.k;
  const int dz = config_.latent_dim;
  const auto bsz = static_cast<Eigen::Index>(batch.size());

  TrainStep out;
  const auto chars = characters(tape, batch, out.masks);
  const auto past = encode_past(tape, batch);
  const auto fut = tape.constant(stack_rows(batch, &PreparedSample::future));
  const auto fut_enc = encode_future(tape, fut);

  const auto prior = ad::add_row(ad::matmul(past, place(tape, "prior.w")), place(tape, "prior.b"));
  const auto post = ad::add_row(ad::matmul(ad::concat_cols({past, fut_enc}), place(tape, "posterior.w")),
                                place(tape, "posterior.b"));
  const auto mu_p = ad::slice_cols(prior, 0, dz), ls_p = ad::slice_cols(prior, dz, dz);
  const auto mu_q = ad::slice_cols(post, 0, dz), ls_q = ad::slice_cols(post, dz, dz);
  if (!prior.value().allFinite() || !post.value().allFinite()) throw NumericError("latent heads produced non-finite values");

  const auto eps = tape.constant(standard_normal(bsz * k, dz, rng));
  const auto z = ad::add(ad::repeat_rows(mu_q, k), ad::mul(ad::repeat_rows(ad::exp(ls_q), k), eps));

  ad::Var goals;
  const auto traj = decode_all(tape, chars, past, z, k, &goals);
  const auto norm = config_.loss_norm == "step_mean" ? ad::LossNorm::PerStepMean : ad::LossNorm::Flattened;
  const auto l_trj = ad::best_of_k_distance(traj, fut, k, norm);
  const auto goal_truth = ad::slice_cols(fut, 4 * (config_.t_pred - 1), 4);
  const auto l_gl = ad::best_of_k_distance(goals, goal_truth, k, norm);
  const auto kld = config_.kld_direction == "p_q" ? ad::kl_diagonal(mu_p, ls_p, mu_q, ls_q)
                                                  : ad::kl_diagonal(mu_q, ls_q, mu_p, ls_p);
  out.loss = ad::scale(ad::sum(ad::add(ad::add(l_trj, l_gl), kld)), 1.0 / static_cast<double>(bsz));
  out.trajectory = l_trj.value().mean();
  out.goal = l_gl.value().mean();
  out.kld = kld.value().mean();
  if (k > 1) {
    out.tie_margin = std::min(min_tie_margin(traj.value(), fut.value(), k),
                              min_tie_margin(goals.value(), goal_truth.value(), k));
  }
  return out;
}

Inference Model::infer(std::span<const PreparedSample* const> batch, int count, std::span<const std::uint64_t> seeds) {
  if (batch.empty()) throw ArgumentError("empty batch");
  if (count < 1) throw ArgumentError("sample count must be >= 1");
  if (seeds.size() != batch.size()) throw ArgumentError("one seed per sample is required");
  const bool was_training = training_;
  training_ = false;
  struct Restore {
    bool& flag;
    bool value;
    ~Restore() { flag = value; }
  } restore{training_, was_training};

  const int dz = config_.latent_dim;
  ad::Tape tape;
  Inference out;
  const auto chars = characters(tape, batch, out.masks);
  const auto past = encode_past(tape, batch);
  const auto prior = ad::add_row(ad::matmul(past, place(tape, "prior.w")), place(tape, "prior.b"));
  if (!prior.value().allFinite()) throw NumericError("prior head produced non-finite values");

  Matrix eps(static_cast<Eigen::Index>(batch.size()) * count, dz);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Rng rng(seeds[b]);
    eps.middleRows(static_cast<Eigen::Index>(b) * count, count) = standard_normal(count, dz, rng);
  }
  const auto mu = ad::slice_cols(prior, 0, dz), ls = ad::slice_cols(prior, dz, dz);
  const auto z = ad::add(ad::repeat_rows(mu, count), ad::mul(ad::repeat_rows(ad::exp(ls), count), tape.constant(eps)));
  ad::Var goals;
  const auto traj = decode_all(tape, chars, past, z, count, &goals);
  out.trajectories = traj.value();
  out.goals = goals.value();
  out.latents = z.value();
  return out;
}

}  // namespace tsnet
