#include "slu/model.hpp"

#include <cmath>
#include <cstdlib>

#include "slu/ctc.hpp"
#include "slu/errors.hpp"

namespace slu {

namespace {

std::span<const double> as_span(const Matrix& column) { return column.data(); }
std::span<double> as_span(Matrix& column) { return column.data(); }

std::string layer_prefix(std::size_t layer) { return "enc.l" + std::to_string(layer); }

void add_to(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Rows [2k, 2k+1] of `in` become row k of the result; an odd trailing row is dropped.
Matrix pair_frames(const Matrix& in) {
  const std::size_t pairs = in.rows() / 2;
  Matrix out(pairs, 2 * in.cols());
  for (std::size_t k = 0; k < pairs; ++k) {
    auto dst = out.row(k);
    const auto a = in.row(2 * k);
    const auto b = in.row(2 * k + 1);
    std::copy(a.begin(), a.end(), dst.begin());
    std::copy(b.begin(), b.end(), dst.begin() + static_cast<std::ptrdiff_t>(in.cols()));
  }
  return out;
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_dim == 0) throw ShapeError("encoder input_dim must be positive");
  if (hidden_dim == 0) throw ShapeError("encoder hidden_dim must be positive");
  if (num_layers == 0) throw ShapeError("encoder needs at least one layer");
  if (pyramid_layers > num_layers) {
    throw ShapeError("pyramid_layers (" + std::to_string(pyramid_layers) +
                     ") exceeds num_layers (" + std::to_string(num_layers) + ")");
  }
}

std::size_t EncoderConfig::output_length(std::size_t input_frames) const {
  std::size_t length = input_frames;
  for (std::size_t i = 0; i < pyramid_layers; ++i) length /= 2;
  return length;
}

std::size_t EncoderConfig::layer_input_dim(std::size_t layer) const {
  const std::size_t below = layer == 0 ? input_dim : hidden_dim;
  return is_pyramid(layer) ? 2 * below : below;
}

void DecoderConfig::validate() const {
  if (label_vocab_size < 2) throw ShapeError("label vocabulary needs blank plus one label");
  if (embed_dim == 0 || hidden_dim == 0 || attention_dim == 0) {
    throw ShapeError("decoder dimensions must be positive");
  }
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::encoder_ctc ? "encoder-ctc" : "encoder-decoder";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "encoder-ctc") return ModelKind::encoder_ctc;
  if (name == "encoder-decoder") return ModelKind::encoder_decoder;
  throw DomainError("unknown model kind '" + name + "'");
}

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
}

LstmState lstm_step(std::span<const double> x, const LstmState& prev, const Matrix& weights,
                    const Matrix& bias, LstmCache* cache) {
  const std::size_t hidden = prev.h.size();
  if (prev.c.size() != hidden || weights.rows() != 4 * hidden || bias.rows() != 4 * hidden ||
      weights.cols() != x.size() + hidden) {
    throw ShapeError("lstm_step: weights " + std::to_string(weights.rows()) + "x" +
                     std::to_string(weights.cols()) + " incompatible with input " +
                     std::to_string(x.size()) + " and hidden " + std::to_string(hidden));
  }
  Vector input = concat(x, prev.h);
  const Vector pre = affine(input, weights, as_span(bias));

  LstmState next = LstmState::zeros(hidden);
  Vector in_gate(hidden), forget_gate(hidden), candidate(hidden), out_gate(hidden), tanh_c(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    in_gate[k] = sigmoid(pre[k]);
    forget_gate[k] = sigmoid(pre[hidden + k]);
    candidate[k] = std::tanh(pre[2 * hidden + k]);
    out_gate[k] = sigmoid(pre[3 * hidden + k]);
    next.c[k] = forget_gate[k] * prev.c[k] + in_gate[k] * candidate[k];
    tanh_c[k] = std::tanh(next.c[k]);
    next.h[k] = out_gate[k] * tanh_c[k];
  }
  if (cache != nullptr) {
    cache->input = std::move(input);
    cache->c_prev = prev.c;
    cache->in_gate = std::move(in_gate);
    cache->forget_gate = std::move(forget_gate);
    cache->cell_candidate = std::move(candidate);
    cache->out_gate = std::move(out_gate);
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

LstmGrads lstm_step_backward(const LstmCache& cache, std::span<const double> dh,
                             std::span<const double> dc, const Matrix& weights,
                             Matrix& dweights, Matrix& dbias) {
  const std::size_t hidden = cache.c_prev.size();
  Vector dpre(4 * hidden);
  LstmGrads grads;
  grads.dc_prev.resize(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    const double i = cache.in_gate[k];
    const double f = cache.forget_gate[k];
    const double g = cache.cell_candidate[k];
    const double o = cache.out_gate[k];
    const double tc = cache.tanh_c[k];
    const double dcell = dc[k] + dh[k] * o * (1.0 - tc * tc);
    dpre[k] = dcell * g * i * (1.0 - i);
    dpre[hidden + k] = dcell * cache.c_prev[k] * f * (1.0 - f);
    dpre[2 * hidden + k] = dcell * i * (1.0 - g * g);
    dpre[3 * hidden + k] = dh[k] * tc * o * (1.0 - o);
    grads.dc_prev[k] = dcell * f;
  }
  outer_acc(dpre, cache.input, dweights);
  add_to(as_span(dbias), dpre);

  Vector dinput(cache.input.size(), 0.0);
  matvec_transpose_acc(weights, dpre, dinput);
  const std::size_t in_dim = dinput.size() - hidden;
  grads.dx.assign(dinput.begin(), dinput.begin() + static_cast<std::ptrdiff_t>(in_dim));
  grads.dh_prev.assign(dinput.begin() + static_cast<std::ptrdiff_t>(in_dim), dinput.end());
  return grads;
}

AttentionResult attend(std::span<const double> query, const Matrix& keys,
                       const AttentionParams& params, std::span<const double> bias,
                       AttentionCache* cache) {
  if (keys.rows() == 0) throw DomainError("attend: no keys to attend over");
  if (!bias.empty() && bias.size() != keys.rows()) throw ShapeError("attend: bias length");
  const std::size_t att_dim = params.query_proj.rows();
  if (params.key_proj.rows() != att_dim || params.score.cols() != att_dim ||
      params.score.rows() != 1) {
    throw ShapeError("attend: inconsistent attention parameter shapes");
  }

  const Vector projected_query = matvec(params.query_proj, query);
  std::vector<Vector> hidden(keys.rows());
  Vector scores(keys.rows());
  const auto v = params.score.row(0);
  for (std::size_t j = 0; j < keys.rows(); ++j) {
    Vector u = matvec(params.key_proj, keys.row(j));
    double score = bias.empty() ? 0.0 : bias[j];
    for (std::size_t a = 0; a < att_dim; ++a) {
      u[a] = std::tanh(u[a] + projected_query[a]);
      score += v[a] * u[a];
    }
    scores[j] = score;
    hidden[j] = std::move(u);
  }

  AttentionResult result;
  result.weights = softmax(scores);
  result.context.assign(keys.cols(), 0.0);
  for (std::size_t j = 0; j < keys.rows(); ++j) {
    const auto key = keys.row(j);
    for (std::size_t d = 0; d < keys.cols(); ++d) result.context[d] += result.weights[j] * key[d];
  }
  if (cache != nullptr) {
    cache->query.assign(query.begin(), query.end());
    cache->keys = keys;
    cache->hidden = std::move(hidden);
    cache->weights = result.weights;
  }
  return result;
}

Vector attend_backward(const AttentionCache& cache, std::span<const double> dcontext,
                       const AttentionParams& params, AttentionGrads grads, Matrix& dkeys,
                       std::span<double> dbias) {
  const std::size_t positions = cache.keys.rows();
  const std::size_t att_dim = params.query_proj.rows();

  // d weights_j = key_j . dcontext, then through the softmax.
  Vector dweights(positions);
  double expected = 0.0;
  for (std::size_t j = 0; j < positions; ++j) {
    const auto key = cache.keys.row(j);
    double dot = 0.0;
    for (std::size_t d = 0; d < key.size(); ++d) dot += key[d] * dcontext[d];
    dweights[j] = dot;
    expected += cache.weights[j] * dot;
  }

  const auto v = params.score.row(0);
  auto dv = grads.score.row(0);
  Vector dprojected_query(att_dim, 0.0);
  Vector dpre(att_dim);
  for (std::size_t j = 0; j < positions; ++j) {
    const double w = cache.weights[j];
    auto dkey = dkeys.row(j);
    for (std::size_t d = 0; d < dkey.size(); ++d) dkey[d] += w * dcontext[d];

    const double dscore = w * (dweights[j] - expected);
    if (!dbias.empty()) dbias[j] += dscore;
    const Vector& u = cache.hidden[j];
    for (std::size_t a = 0; a < att_dim; ++a) {
      dv[a] += dscore * u[a];
      dpre[a] = dscore * v[a] * (1.0 - u[a] * u[a]);
      dprojected_query[a] += dpre[a];
    }
    outer_acc(dpre, cache.keys.row(j), grads.key_proj);
    matvec_transpose_acc(params.key_proj, dpre, dkey);
  }
  outer_acc(dprojected_query, cache.query, grads.query_proj);
  Vector dquery(cache.query.size(), 0.0);
  matvec_transpose_acc(params.query_proj, dprojected_query, dquery);
  return dquery;
}

Matrix encode(const FeatureSequence& features, const EncoderConfig& cfg, const ParamStore& params,
              EncoderTrace* trace) {
  cfg.validate();
  if (features.dim() != cfg.input_dim) {
    throw ShapeError("encode: features have dimension " + std::to_string(features.dim()) +
                     ", encoder expects " + std::to_string(cfg.input_dim));
  }
  if (features.length() < cfg.min_input_frames()) {
    throw InputTooShortError("encode: " + std::to_string(features.length()) +
                             " frames, pyramid needs at least " +
                             std::to_string(cfg.min_input_frames()));
  }
  if (trace != nullptr) *trace = EncoderTrace{};

  Matrix current = features.frames;
  for (std::size_t layer = 0; layer < cfg.num_layers; ++layer) {
    Matrix input = cfg.is_pyramid(layer) ? pair_frames(current) : std::move(current);
    const Matrix& weights = params.value(layer_prefix(layer) + ".W");
    const Matrix& bias = params.value(layer_prefix(layer) + ".b");

    Matrix output(input.rows(), cfg.hidden_dim);
    std::vector<LstmCache> caches(trace != nullptr ? input.rows() : 0);
    LstmState state = LstmState::zeros(cfg.hidden_dim);
    for (std::size_t t = 0; t < input.rows(); ++t) {
      state = lstm_step(input.row(t), state, weights, bias, trace != nullptr ? &caches[t] : nullptr);
      std::copy(state.h.begin(), state.h.end(), output.row(t).begin());
    }
    if (trace != nullptr) {
      trace->layer_inputs.push_back(std::move(input));
      trace->caches.push_back(std::move(caches));
      trace->layer_lengths.push_back(output.rows());
    }
    current = std::move(output);
  }
  return current;
}

void encode_backward(const EncoderTrace& trace, const Matrix& dstates, const EncoderConfig& cfg,
                     ParamStore& store) {
  Matrix upstream = dstates;
  for (std::size_t layer = cfg.num_layers; layer-- > 0;) {
    const std::string prefix = layer_prefix(layer);
    const Matrix& weights = store.value(prefix + ".W");
    Matrix& dweights = store.grad(prefix + ".W");
    Matrix& dbias = store.grad(prefix + ".b");
    const std::size_t steps = trace.layer_lengths[layer];

    Matrix dinput(steps, cfg.layer_input_dim(layer));
    Vector dh_next(cfg.hidden_dim, 0.0);
    Vector dc_next(cfg.hidden_dim, 0.0);
    for (std::size_t t = steps; t-- > 0;) {
      Vector dh(upstream.row(t).begin(), upstream.row(t).end());
      add_to(dh, dh_next);
      LstmGrads g = lstm_step_backward(trace.caches[layer][t], dh, dc_next, weights, dweights, dbias);
      std::copy(g.dx.begin(), g.dx.end(), dinput.row(t).begin());
      dh_next = std::move(g.dh_prev);
      dc_next = std::move(g.dc_prev);
    }
    if (layer == 0) break;

    const std::size_t below_steps = trace.layer_lengths[layer - 1];
    if (cfg.is_pyramid(layer)) {
      Matrix dbelow(below_steps, cfg.hidden_dim);
      for (std::size_t k = 0; k < steps; ++k) {
        const auto row = dinput.row(k);
        std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(cfg.hidden_dim),
                  dbelow.row(2 * k).begin());
        std::copy(row.begin() + static_cast<std::ptrdiff_t>(cfg.hidden_dim), row.end(),
                  dbelow.row(2 * k + 1).begin());
      }
      upstream = std::move(dbelow);
    } else {
      upstream = std::move(dinput);
    }
  }
}

namespace {

AttentionParams att_params(const ParamStore& params, const std::string& prefix) {
  return {params.value(prefix + ".Wq"), params.value(prefix + ".Wk"), params.value(prefix + ".v")};
}

AttentionGrads att_grads(ParamStore& store, const std::string& prefix) {
  return {store.grad(prefix + ".Wq"), store.grad(prefix + ".Wk"), store.grad(prefix + ".v")};
}

}  // namespace

DecodeStepOutput decode_step(std::size_t step, std::span<const double> prev_s,
                             const LstmState& prev_state, const Matrix& enc_states,
                             std::span<const int> history, const DecoderConfig& cfg,
                             const ParamStore& params, DecodeStepCache* cache) {
  if (enc_states.rows() == 0) throw DomainError("decode_step: no encoder states");
  if (history.empty()) throw DomainError("decode_step: history must start with the BOS row");
  if (prev_s.size() != cfg.hidden_dim) throw ShapeError("decode_step: prev_s dimension");

  DecodeStepOutput out;
  const Vector lstm_input = concat(prev_s, prev_state.h);
  out.state = lstm_step(lstm_input, prev_state, params.value("dec.lstm.W"),
                        params.value("dec.lstm.b"), cache != nullptr ? &cache->lstm : nullptr);

  Vector location;
  Vector bias;
  if (cfg.location_aware) {
    const double scale = params.value("dec.att_x.loc")(0, 0);
    location.resize(enc_states.rows());
    bias.resize(enc_states.rows());
    for (std::size_t j = 0; j < enc_states.rows(); ++j) {
      location[j] = -std::abs(static_cast<double>(j) - static_cast<double>(step));
      bias[j] = scale * location[j];
    }
  }
  const AttentionResult ctx_x =
      attend(out.state.h, enc_states, att_params(params, "dec.att_x"), bias,
             cache != nullptr ? &cache->att_x : nullptr);

  const Matrix& embed = params.value("dec.embed");
  Matrix previous(history.size(), cfg.embed_dim);
  for (std::size_t j = 0; j < history.size(); ++j) {
    const auto row = embed.row(static_cast<std::size_t>(history[j]));
    std::copy(row.begin(), row.end(), previous.row(j).begin());
  }
  const AttentionResult ctx_y = attend(out.state.h, previous, att_params(params, "dec.att_y"), {},
                                       cache != nullptr ? &cache->att_y : nullptr);

  Vector merged = concat(ctx_x.context, ctx_y.context);
  out.s = affine(merged, params.value("dec.state.W"), as_span(params.value("dec.state.b")));
  for (double& x : out.s) x = std::tanh(x);
  out.logits = affine(out.s, params.value("dec.out.W"), as_span(params.value("dec.out.b")));

  if (cache != nullptr) {
    cache->prev_s.assign(prev_s.begin(), prev_s.end());
    cache->location = std::move(location);
    cache->merged = std::move(merged);
    cache->s = out.s;
    cache->history.assign(history.begin(), history.end());
  }
  return out;
}

Model::Model(ModelConfig config) : config_(std::move(config)) { config_.validate(); }

bool Model::is_encoder_slot(const std::string& name) { return name.rfind("enc.", 0) == 0; }

ParamStore Model::init_params(Rng& rng) const {
  const auto& enc = config_.encoder;
  const auto& dec = config_.decoder;
  const std::size_t vocab = dec.label_vocab_size;
  ParamStore store;
  for (std::size_t layer = 0; layer < enc.num_layers; ++layer) {
    const std::size_t fan_in = enc.layer_input_dim(layer) + enc.hidden_dim;
    store.add(layer_prefix(layer) + ".W", init_uniform(4 * enc.hidden_dim, fan_in, fan_in, rng));
    store.add(layer_prefix(layer) + ".b", init_uniform(4 * enc.hidden_dim, 1, fan_in, rng));
  }
  if (config_.kind == ModelKind::encoder_ctc) {
    store.add("head.W", init_uniform(vocab, enc.hidden_dim, enc.hidden_dim, rng));
    store.add("head.b", init_uniform(vocab, 1, enc.hidden_dim, rng));
    return store;
  }

  const std::size_t hd = dec.hidden_dim;
  const std::size_t lstm_fan_in = 3 * hd;  // [s ; h] input plus recurrent h
  store.add("dec.embed", init_uniform(vocab + 1, dec.embed_dim, dec.embed_dim, rng));
  store.add("dec.lstm.W", init_uniform(4 * hd, lstm_fan_in, lstm_fan_in, rng));
  store.add("dec.lstm.b", init_uniform(4 * hd, 1, lstm_fan_in, rng));
  store.add("dec.att_x.Wq", init_uniform(dec.attention_dim, hd, hd, rng));
  store.add("dec.att_x.Wk", init_uniform(dec.attention_dim, enc.hidden_dim, enc.hidden_dim, rng));
  store.add("dec.att_x.v", init_uniform(1, dec.attention_dim, dec.attention_dim, rng));
  if (dec.location_aware) store.add("dec.att_x.loc", Matrix(1, 1, 1.0));
  store.add("dec.att_y.Wq", init_uniform(dec.attention_dim, hd, hd, rng));
  store.add("dec.att_y.Wk", init_uniform(dec.attention_dim, dec.embed_dim, dec.embed_dim, rng));
  store.add("dec.att_y.v", init_uniform(1, dec.attention_dim, dec.attention_dim, rng));
  const std::size_t merged = enc.hidden_dim + dec.embed_dim;
  store.add("dec.state.W", init_uniform(hd, merged, merged, rng));
  store.add("dec.state.b", init_uniform(hd, 1, merged, rng));
  store.add("dec.out.W", init_uniform(vocab, hd, hd, rng));
  store.add("dec.out.b", init_uniform(vocab, 1, hd, rng));
  return store;
}

Matrix Model::forward(const FeatureSequence& features, const ParamStore& params,
                      ForwardTrace* trace) const {
  const std::size_t vocab = config_.decoder.label_vocab_size;
  EncoderTrace* enc_trace = trace != nullptr ? &trace->encoder : nullptr;
  Matrix states = encode(features, config_.encoder, params, enc_trace);
  const std::size_t frames = states.rows();
  Matrix logits(frames, vocab);

  if (config_.kind == ModelKind::encoder_ctc) {
    const Matrix& w = params.value("head.W");
    const Matrix& b = params.value("head.b");
    for (std::size_t t = 0; t < frames; ++t) {
      const Vector row = affine(states.row(t), w, as_span(b));
      std::copy(row.begin(), row.end(), logits.row(t).begin());
    }
  } else {
    const auto& dec = config_.decoder;
    if (trace != nullptr) trace->steps.assign(frames, DecodeStepCache{});
    std::vector<int> history{static_cast<int>(bos_row())};
    Vector s(dec.hidden_dim, 0.0);
    LstmState state = LstmState::zeros(dec.hidden_dim);
    for (std::size_t t = 0; t < frames; ++t) {
      DecodeStepOutput out = decode_step(t, s, state, states, history, dec, params,
                                         trace != nullptr ? &trace->steps[t] : nullptr);
      std::copy(out.logits.begin(), out.logits.end(), logits.row(t).begin());
      history.push_back(static_cast<int>(argmax(out.logits)));
      s = std::move(out.s);
      state = std::move(out.state);
    }
  }
  if (trace != nullptr) trace->enc_states = std::move(states);
  return logits;
}

void Model::backward(const ForwardTrace& trace, const Matrix& dlogits, ParamStore& store) const {
  const Matrix& states = trace.enc_states;
  const std::size_t frames = states.rows();
  if (dlogits.rows() != frames || dlogits.cols() != config_.decoder.label_vocab_size) {
    throw ShapeError("backward: dlogits shape does not match the forward pass");
  }
  Matrix dstates(frames, config_.encoder.hidden_dim);

  if (config_.kind == ModelKind::encoder_ctc) {
    const Matrix& w = store.value("head.W");
    Matrix& dw = store.grad("head.W");
    Matrix& db = store.grad("head.b");
    for (std::size_t t = 0; t < frames; ++t) {
      outer_acc(dlogits.row(t), states.row(t), dw);
      add_to(as_span(db), dlogits.row(t));
      matvec_transpose_acc(w, dlogits.row(t), dstates.row(t));
    }
    encode_backward(trace.encoder, dstates, config_.encoder, store);
    return;
  }

  const auto& dec = config_.decoder;
  const std::size_t hd = dec.hidden_dim;
  const std::size_t he = config_.encoder.hidden_dim;
  const AttentionParams att_x = att_params(store, "dec.att_x");
  const AttentionParams att_y = att_params(store, "dec.att_y");
  const Matrix& out_w = store.value("dec.out.W");
  const Matrix& state_w = store.value("dec.state.W");
  const Matrix& lstm_w = store.value("dec.lstm.W");
  Matrix& dembed = store.grad("dec.embed");

  Vector ds_carry(hd, 0.0);
  Vector dh_carry(hd, 0.0);
  Vector dc_carry(hd, 0.0);
  for (std::size_t t = frames; t-- > 0;) {
    const DecodeStepCache& cache = trace.steps[t];
    const auto dlog = dlogits.row(t);

    outer_acc(dlog, cache.s, store.grad("dec.out.W"));
    add_to(as_span(store.grad("dec.out.b")), dlog);
    Vector ds = ds_carry;
    matvec_transpose_acc(out_w, dlog, ds);
    for (std::size_t k = 0; k < hd; ++k) ds[k] *= 1.0 - cache.s[k] * cache.s[k];
    outer_acc(ds, cache.merged, store.grad("dec.state.W"));
    add_to(as_span(store.grad("dec.state.b")), ds);
    Vector dmerged(cache.merged.size(), 0.0);
    matvec_transpose_acc(state_w, ds, dmerged);
    const std::span<const double> dctx_x(dmerged.data(), he);
    const std::span<const double> dctx_y(dmerged.data() + he, dmerged.size() - he);

    Vector dbias(dec.location_aware ? frames : 0, 0.0);
    Vector dh = attend_backward(cache.att_x, dctx_x, att_x, att_grads(store, "dec.att_x"), dstates,
                                dbias);
    if (dec.location_aware) {
      double dscale = 0.0;
      for (std::size_t j = 0; j < frames; ++j) dscale += dbias[j] * cache.location[j];
      store.grad("dec.att_x.loc")(0, 0) += dscale;
    }
    Matrix dprevious(cache.history.size(), dec.embed_dim);
    add_to(dh, attend_backward(cache.att_y, dctx_y, att_y, att_grads(store, "dec.att_y"),
                               dprevious));
    for (std::size_t j = 0; j < cache.history.size(); ++j) {
      add_to(dembed.row(static_cast<std::size_t>(cache.history[j])), dprevious.row(j));
    }
    add_to(dh, dh_carry);

    LstmGrads g = lstm_step_backward(cache.lstm, dh, dc_carry, lstm_w, store.grad("dec.lstm.W"),
                                     store.grad("dec.lstm.b"));
    // LSTM_d input was [s_{t-1} ; h_{t-1}].
    ds_carry.assign(g.dx.begin(), g.dx.begin() + static_cast<std::ptrdiff_t>(hd));
    dh_carry.assign(g.dx.begin() + static_cast<std::ptrdiff_t>(hd), g.dx.end());
    add_to(dh_carry, g.dh_prev);
    dc_carry = std::move(g.dc_prev);
  }
  encode_backward(trace.encoder, dstates, config_.encoder, store);
}

double Model::loss_and_grad(const FeatureSequence& features, std::span<const int> target,
                            ParamStore& store) const {
  ForwardTrace trace;
  const Matrix logits = forward(features, store, &trace);
  for (double v : logits.data()) {
    if (!std::isfinite(v)) throw DivergenceError("non-finite logits");
  }
  const CtcResult ctc = ctc_loss_from_logits(logits, target);
  backward(trace, ctc.grad, store);
  return ctc.nll;
}

std::vector<int> Model::greedy_decode(const FeatureSequence& features,
                                      const ParamStore& params) const {
  return ctc_greedy_decode(forward(features, params));
}

}  // namespace slu
