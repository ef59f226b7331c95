#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slu/features.hpp"
#include "slu/numerics.hpp"

namespace slu {

struct EncoderConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 32;
  std::size_t num_layers = 2;
  // The top `pyramid_layers` layers each read concatenated pairs of the frames
  // below them, halving the time axis.
  std::size_t pyramid_layers = 1;

  void validate() const;
  // Number of encoder states produced for a T-frame input.
  std::size_t output_length(std::size_t input_frames) const;
  std::size_t min_input_frames() const { return std::size_t{1} << pyramid_layers; }
  bool is_pyramid(std::size_t layer) const { return layer + pyramid_layers >= num_layers; }
  std::size_t layer_input_dim(std::size_t layer) const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct DecoderConfig {
  // Output labels including the CTC blank at index 0.
  std::size_t label_vocab_size = 0;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t attention_dim = 16;
  // Adds a learned -scale * |j - t| term to the encoder attention scores.
  bool location_aware = true;

  void validate() const;

  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

enum class ModelKind {
  // Encoder with a linear CTC head; used by the encoder pre-training stages.
  encoder_ctc,
  // Encoder plus the attention decoder.
  encoder_decoder,
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ModelConfig {
  ModelKind kind = ModelKind::encoder_decoder;
  EncoderConfig encoder;
  DecoderConfig decoder;

  void validate() const;
  std::size_t vocab_size() const { return decoder.label_vocab_size; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(std::size_t hidden) { return {Vector(hidden, 0.0), Vector(hidden, 0.0)}; }
};

// Everything the LSTM backward pass needs from one step.
struct LstmCache {
  Vector input;  // [x ; h_prev]
  Vector c_prev;
  Vector in_gate, forget_gate, cell_candidate, out_gate;
  Vector tanh_c;
};

struct LstmGrads {
  Vector dx;
  Vector dh_prev;
  Vector dc_prev;
};

// weights: 4H x (in + H), gate blocks ordered input, forget, candidate, output.
// bias: 4H x 1.
LstmState lstm_step(std::span<const double> x, const LstmState& prev, const Matrix& weights,
                    const Matrix& bias, LstmCache* cache = nullptr);

LstmGrads lstm_step_backward(const LstmCache& cache, std::span<const double> dh,
                             std::span<const double> dc, const Matrix& weights,
                             Matrix& dweights, Matrix& dbias);

struct AttentionParams {
  const Matrix& query_proj;  // A x Q
  const Matrix& key_proj;    // A x K
  const Matrix& score;       // 1 x A
};

struct AttentionGrads {
  Matrix& query_proj;
  Matrix& key_proj;
  Matrix& score;
};

struct AttentionResult {
  Vector context;
  Vector weights;
};

struct AttentionCache {
  Vector query;
  Matrix keys;
  std::vector<Vector> hidden;  // tanh(Wq q + Wk k_j) per position
  Vector weights;
};

// Additive attention: score_j = v . tanh(Wq q + Wk k_j) + bias_j, weights = softmax(score),
// context = sum_j weights_j k_j. `keys` holds one key per row; `bias` is empty or has one
// entry per key.
AttentionResult attend(std::span<const double> query, const Matrix& keys,
                       const AttentionParams& params, std::span<const double> bias = {},
                       AttentionCache* cache = nullptr);

// Accumulates parameter gradients and returns d query; key gradients are added to dkeys
// and per-position bias gradients to dbias when it is non-empty.
Vector attend_backward(const AttentionCache& cache, std::span<const double> dcontext,
                       const AttentionParams& params, AttentionGrads grads, Matrix& dkeys,
                       std::span<double> dbias = {});

struct EncoderTrace {
  std::vector<Matrix> layer_inputs;               // rows = time steps of that layer
  std::vector<std::vector<LstmCache>> caches;     // per layer, per step
  std::vector<std::size_t> layer_lengths;
};

// Returns M x hidden_dim encoder states. Throws InputTooShortError when T < 2^pyramid_layers.
Matrix encode(const FeatureSequence& features, const EncoderConfig& cfg, const ParamStore& params,
              EncoderTrace* trace = nullptr);

void encode_backward(const EncoderTrace& trace, const Matrix& dstates, const EncoderConfig& cfg,
                     ParamStore& store);

struct DecodeStepOutput {
  Vector logits;
  Vector s;
  LstmState state;
};

struct DecodeStepCache {
  Vector prev_s;
  LstmCache lstm;
  AttentionCache att_x;
  AttentionCache att_y;
  Vector location;  // -|j - t| per encoder position
  Vector merged;    // [ctx_x ; ctx_y]
  Vector s;
  std::vector<int> history;  // embedding rows attended by Att(y)
};

// One frame-synchronous decoder step. `step` is 0-based; `history` lists the embedding
// rows (beginning-of-sequence row first) that Att(y) attends over.
DecodeStepOutput decode_step(std::size_t step, std::span<const double> prev_s,
                             const LstmState& prev_state, const Matrix& enc_states,
                             std::span<const int> history, const DecoderConfig& cfg,
                             const ParamStore& params, DecodeStepCache* cache = nullptr);

struct ForwardTrace {
  EncoderTrace encoder;
  Matrix enc_states;
  std::vector<DecodeStepCache> steps;
};

class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }

  // Creates every parameter slot with its initial value.
  ParamStore init_params(Rng& rng) const;
  // Slot names that belong to the encoder.
  static bool is_encoder_slot(const std::string& name);

  // M x V pre-softmax scores, one row per encoder state.
  Matrix forward(const FeatureSequence& features, const ParamStore& params,
                 ForwardTrace* trace = nullptr) const;

  // Accumulates d loss / d params given d loss / d logits.
  void backward(const ForwardTrace& trace, const Matrix& dlogits, ParamStore& store) const;

  // CTC loss of `target`; gradients are accumulated into the store.
  double loss_and_grad(const FeatureSequence& features, std::span<const int> target,
                       ParamStore& store) const;

  std::vector<int> greedy_decode(const FeatureSequence& features, const ParamStore& params) const;

  // Beginning-of-sequence embedding row.
  std::size_t bos_row() const noexcept { return config_.decoder.label_vocab_size; }

 private:
  ModelConfig config_;
};

}  // namespace slu
