#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "slu/checkpoint.hpp"
#include "slu/corpus.hpp"
#include "slu/energy.hpp"
#include "slu/metrics.hpp"
#include "slu/model.hpp"

namespace slu {

inline constexpr const char* kBlankLabel = "<blank>";

enum class StageKind {
  encoder_asr,  // encoder + linear CTC head, transcript targets
  encoder_slu,  // encoder + linear CTC head, concept targets
  full_slu,     // encoder + decoder, concept targets
};

std::string to_string(StageKind kind);
StageKind stage_kind_from_string(const std::string& name);
bool uses_transcript(StageKind kind);

struct Hyperparams {
  std::size_t epochs = 30;
  double lr = 0.05;
  // Learning rate is multiplied by lr_decay after `patience` epochs without a dev improvement.
  double lr_decay = 0.5;
  std::size_t patience = 2;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;

  std::size_t encoder_hidden = 32;
  std::size_t encoder_layers = 2;
  std::size_t pyramid_layers = 1;
  std::size_t decoder_hidden = 32;
  std::size_t embed_dim = 16;
  std::size_t attention_dim = 16;
  bool location_aware = true;

  void validate() const;
  ModelConfig model_config(StageKind kind, std::size_t input_dim, std::size_t vocab_size) const;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct StagePlan {
  StageKind kind = StageKind::full_slu;
  std::size_t epochs = 1;
  // 0 runs the epochs without updating any parameter.
  double lr = 0.05;
  // Stages after the first start from their predecessor's best checkpoint.
  bool init_from_previous = false;
  std::shared_ptr<const Checkpoint> init_from;
};

struct StrategyPlan {
  std::string name;
  std::vector<StagePlan> stages;
  std::shared_ptr<const Checkpoint> transfer_source;
  Hyperparams hyper;

  // Strategy label written to the ledger, e.g. "1step+PM" for a transferred run.
  std::string tag() const;
};

// Known names: "3steps", "2steps", "1step". A nonzero input_dim is checked against the
// transfer source.
StrategyPlan plan(const std::string& strategy_name, const Hyperparams& hyper,
                  std::shared_ptr<const Checkpoint> transfer_source = nullptr,
                  std::size_t input_dim = 0);

// Copies source parameters into `target` by slot name. Label-indexed rows (CTC head, output
// layer, label embeddings) are matched by label name; rows of unknown labels keep their
// current values. With encoder_only, only "enc.*" slots are copied.
void transfer_parameters(const Checkpoint& source, const ModelConfig& target_config,
                         const std::vector<std::string>& target_labels, ParamStore& target,
                         bool encoder_only);

// Output vocabulary of a stage: blank followed by the sorted training types.
std::vector<std::string> stage_labels(StageKind kind, const CorpusSplit& train);

// Greedy-decodes every user turn of `split` and aligns it against its references.
AlignmentCounts score_user_turns(const Model& model, const ParamStore& params,
                                 const std::vector<std::string>& labels, const CorpusSplit& split,
                                 StageKind kind);
// Error rate in percent over user turns.
double user_error_rate(const Model& model, const ParamStore& params,
                       const std::vector<std::string>& labels, const CorpusSplit& split,
                       StageKind kind);
double user_error_rate(const Checkpoint& checkpoint, const CorpusSplit& split);

struct EpochEval {
  std::size_t epoch = 0;  // 1-based
  double dev_error = 0.0;
  std::shared_ptr<const Checkpoint> checkpoint;
};

// Lowest dev error; the earliest epoch wins ties.
const EpochEval& select_best(const std::vector<EpochEval>& evals);

struct StageInput {
  StagePlan plan;
  ModelConfig config;
  std::vector<std::string> labels;
  ParamStore init;
  Provenance provenance;
  Hyperparams hyper;
};

struct StageResult {
  Checkpoint best;
  std::size_t best_epoch = 0;
  std::vector<double> dev_errors;
  MeterReading reading;
  ParamStore initial;
};

// Trains one stage on all training turns and selects the epoch with the lowest dev error
// over user turns. Throws DivergenceError on a non-finite loss.
StageResult run_stage(const StageInput& input, const CorpusSplit& train, const CorpusSplit& dev,
                      const EnergyMeter& meter, std::ostream* log = nullptr);

struct StrategyResult {
  RunRecord record;
  Checkpoint final;
  std::vector<StageResult> stages;
};

struct RunOptions {
  std::string run_id;         // derived from strategy, family and seed when empty
  std::string source_corpus;  // provenance tag
  std::string transfer_from;  // provenance tag
  std::ostream* log = nullptr;
};

StrategyResult run_strategy(const StrategyPlan& plan, const Corpus& corpus, const EnergyMeter& meter,
                            const RunOptions& options = {});

// Everything needed to repeat a `train` invocation.
struct RunManifest {
  std::string run_id;
  std::string strategy;
  Hyperparams hyper;
  std::string corpus_dir;
  std::string meter;
  std::string transfer_from;
  std::string out_ckpt;
  std::string ledger;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);

}  // namespace slu
