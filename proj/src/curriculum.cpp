#include "slu/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "json.hpp"
#include "slu/errors.hpp"

namespace slu {

using nlohmann::json;

std::string to_string(StageKind kind) {
  switch (kind) {
    case StageKind::encoder_asr: return "encoder-asr";
    case StageKind::encoder_slu: return "encoder-slu";
    case StageKind::full_slu: return "full-slu";
  }
  throw DomainError("invalid stage kind");
}

StageKind stage_kind_from_string(const std::string& name) {
  if (name == "encoder-asr") return StageKind::encoder_asr;
  if (name == "encoder-slu") return StageKind::encoder_slu;
  if (name == "full-slu") return StageKind::full_slu;
  throw DomainError("unknown stage kind '" + name + "'");
}

bool uses_transcript(StageKind kind) { return kind == StageKind::encoder_asr; }

void Hyperparams::validate() const {
  if (epochs == 0) throw DomainError("epochs must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("learning rate must be >= 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw DomainError("lr_decay must be in (0, 1]");
  if (patience == 0) throw DomainError("patience must be >= 1");
  if (!(clip_norm > 0.0)) throw DomainError("clip_norm must be > 0");
}

ModelConfig Hyperparams::model_config(StageKind kind, std::size_t input_dim,
                                      std::size_t vocab_size) const {
  ModelConfig c;
  c.kind = kind == StageKind::full_slu ? ModelKind::encoder_decoder : ModelKind::encoder_ctc;
  c.encoder.input_dim = input_dim;
  c.encoder.hidden_dim = encoder_hidden;
  c.encoder.num_layers = encoder_layers;
  c.encoder.pyramid_layers = pyramid_layers;
  c.decoder.label_vocab_size = vocab_size;
  c.decoder.embed_dim = embed_dim;
  c.decoder.hidden_dim = decoder_hidden;
  c.decoder.attention_dim = attention_dim;
  c.decoder.location_aware = location_aware;
  c.validate();
  return c;
}

std::string StrategyPlan::tag() const { return transfer_source ? name + "+PM" : name; }

namespace {

void check_feature_dim(const Checkpoint& source, std::size_t input_dim) {
  if (source.config.encoder.input_dim != input_dim) {
    throw IncompatibleTransferError("transfer source expects feature dimension " +
                                    std::to_string(source.config.encoder.input_dim) +
                                    ", corpus has " + std::to_string(input_dim));
  }
}

}  // namespace

StrategyPlan plan(const std::string& strategy_name, const Hyperparams& hyper,
                  std::shared_ptr<const Checkpoint> transfer_source, std::size_t input_dim) {
  hyper.validate();
  std::vector<StageKind> kinds;
  if (strategy_name == "3steps") {
    kinds = {StageKind::encoder_asr, StageKind::encoder_slu, StageKind::full_slu};
  } else if (strategy_name == "2steps") {
    kinds = {StageKind::encoder_slu, StageKind::full_slu};
  } else if (strategy_name == "1step") {
    kinds = {StageKind::full_slu};
  } else {
    throw DomainError("unknown strategy '" + strategy_name + "' (expected 3steps, 2steps or 1step)");
  }
  if (transfer_source) {
    const EncoderConfig& e = transfer_source->config.encoder;
    if (e.hidden_dim != hyper.encoder_hidden || e.num_layers != hyper.encoder_layers ||
        e.pyramid_layers != hyper.pyramid_layers) {
      throw IncompatibleTransferError("transfer source encoder shape differs from the requested one");
    }
    if (input_dim != 0) check_feature_dim(*transfer_source, input_dim);
  }
  StrategyPlan out;
  out.name = strategy_name;
  out.transfer_source = transfer_source;
  out.hyper = hyper;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    StagePlan stage;
    stage.kind = kinds[i];
    stage.epochs = hyper.epochs;
    stage.lr = hyper.lr;
    stage.init_from_previous = i > 0;
    if (i == 0) stage.init_from = transfer_source;
    out.stages.push_back(stage);
  }
  return out;
}

namespace {

// Slots whose rows are indexed by output label. The embedding has one extra BOS row.
bool label_indexed(const std::string& name) {
  return name == "head.W" || name == "head.b" || name == "dec.out.W" || name == "dec.out.b" ||
         name == "dec.embed";
}

}  // namespace

void transfer_parameters(const Checkpoint& source, const ModelConfig& target_config,
                         const std::vector<std::string>& target_labels, ParamStore& target,
                         bool encoder_only) {
  check_feature_dim(source, target_config.encoder.input_dim);
  if (target_labels.size() != target_config.vocab_size()) {
    throw ShapeError("target label list does not match the vocabulary size");
  }
  std::map<std::string, std::size_t> source_rows;
  for (std::size_t i = 0; i < source.labels.size(); ++i) source_rows[source.labels[i]] = i;

  for (auto& [name, slot] : target.slots()) {
    if (encoder_only && !Model::is_encoder_slot(name)) continue;
    if (!source.params.contains(name)) continue;
    const Matrix& src = source.params.value(name);
    Matrix& dst = slot.value;
    if (!label_indexed(name)) {
      if (!src.same_shape(dst)) {
        throw IncompatibleTransferError("parameter '" + name + "' has incompatible shape");
      }
      dst = src;
      continue;
    }
    if (src.cols() != dst.cols()) {
      throw IncompatibleTransferError("parameter '" + name + "' has incompatible width");
    }
    const std::size_t v_dst = target_labels.size();
    const std::size_t v_src = source.labels.size();
    for (std::size_t r = 0; r < dst.rows(); ++r) {
      std::size_t from = 0;
      if (r == v_dst) {
        from = v_src;  // BOS row of the embedding
      } else {
        const auto it = source_rows.find(target_labels[r]);
        if (it == source_rows.end()) continue;
        from = it->second;
      }
      if (from >= src.rows()) continue;
      std::copy(src.row(from).begin(), src.row(from).end(), dst.row(r).begin());
    }
  }
}

std::vector<std::string> stage_labels(StageKind kind, const CorpusSplit& train) {
  const Vocabularies vocab = Vocabularies::of(train);
  std::vector<std::string> labels{kBlankLabel};
  const auto& types = uses_transcript(kind) ? vocab.words : vocab.labels;
  labels.insert(labels.end(), types.begin(), types.end());
  return labels;
}

namespace {

const std::vector<std::string>& references(const Utterance& utt, StageKind kind) {
  return uses_transcript(kind) ? utt.transcript : utt.concepts;
}

}  // namespace

AlignmentCounts score_user_turns(const Model& model, const ParamStore& params,
                                 const std::vector<std::string>& labels, const CorpusSplit& split,
                                 StageKind kind) {
  AlignmentCounts total;
  for (const auto& utt : split.utterances) {
    if (!utt.is_user()) continue;
    const std::vector<int> ids =
        model.greedy_decode(inject_speaker_marker(utt.features, utt.speaker), params);
    std::vector<std::string> hyp;
    hyp.reserve(ids.size());
    for (int id : ids) hyp.push_back(labels.at(static_cast<std::size_t>(id)));
    total += align(references(utt, kind), hyp);
  }
  return total;
}

double user_error_rate(const Model& model, const ParamStore& params,
                       const std::vector<std::string>& labels, const CorpusSplit& split,
                       StageKind kind) {
  return 100.0 * error_rate(score_user_turns(model, params, labels, split, kind));
}

double user_error_rate(const Checkpoint& checkpoint, const CorpusSplit& split) {
  const StageKind kind = checkpoint.provenance.stage_kind.empty()
                             ? StageKind::full_slu
                             : stage_kind_from_string(checkpoint.provenance.stage_kind);
  return user_error_rate(Model(checkpoint.config), checkpoint.params, checkpoint.labels, split, kind);
}

const EpochEval& select_best(const std::vector<EpochEval>& evals) {
  if (evals.empty()) throw DomainError("no epochs to select from");
  const EpochEval* best = &evals.front();
  for (const auto& e : evals) {
    if (e.dev_error < best->dev_error) best = &e;
  }
  return *best;
}

namespace {

struct Example {
  const Utterance* utt;
  FeatureSequence input;
  std::vector<int> target;
};

std::vector<Example> training_examples(const CorpusSplit& train, StageKind kind,
                                       const std::vector<std::string>& labels) {
  std::map<std::string, int> index;
  for (std::size_t i = 1; i < labels.size(); ++i) index[labels[i]] = static_cast<int>(i);
  std::vector<Example> out;
  out.reserve(train.utterances.size());
  for (const auto& utt : train.utterances) {
    Example ex{&utt, inject_speaker_marker(utt.features, utt.speaker), {}};
    for (const auto& token : references(utt, kind)) {
      const auto it = index.find(token);
      if (it == index.end()) throw DomainError("training token '" + token + "' is not in the vocabulary");
      ex.target.push_back(it->second);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void check_dims(const CorpusSplit& split, std::size_t input_dim) {
  for (const auto& utt : split.utterances) {
    if (utt.features.dim() != input_dim) {
      throw ShapeError("utterance '" + utt.id + "' has feature dimension " +
                       std::to_string(utt.features.dim()) + ", model expects " +
                       std::to_string(input_dim));
    }
  }
}

}  // namespace

StageResult run_stage(const StageInput& input, const CorpusSplit& train, const CorpusSplit& dev,
                      const EnergyMeter& meter, std::ostream* log) {
  const StagePlan& stage = input.plan;
  if (stage.epochs == 0) throw DomainError("a stage needs at least one epoch");
  if (!(stage.lr >= 0.0)) throw DomainError("stage learning rate must be >= 0");
  input.config.validate();
  check_dims(train, input.config.encoder.input_dim);
  check_dims(dev, input.config.encoder.input_dim);

  const Model model(input.config);
  StageResult result;
  result.initial = input.init;
  std::vector<EpochEval> evals;

  const auto work = [&] {
    const std::vector<Example> examples = training_examples(train, stage.kind, input.labels);
    ParamStore params = input.init;
    params.zero_grad();
    Rng rng(input.hyper.seed * 7919 + input.provenance.stage_index + 1);
    std::vector<std::size_t> order(examples.size());
    double lr = stage.lr;
    double best_so_far = 0.0;
    std::size_t stale = 0;

    for (std::size_t epoch = 1; epoch <= stage.epochs; ++epoch) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng.engine());
      double total_loss = 0.0;
      for (std::size_t i : order) {
        const Example& ex = examples[i];
        double loss = 0.0;
        try {
          loss = model.loss_and_grad(ex.input, ex.target, params);
        } catch (const InfeasibleAlignmentError& e) {
          throw InfeasibleAlignmentError("utterance '" + ex.utt->id + "': " + e.what());
        } catch (const DivergenceError& e) {
          throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                " on utterance '" + ex.utt->id + "'");
        }
        if (!std::isfinite(loss)) {
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                                " on utterance '" + ex.utt->id + "'");
        }
        total_loss += loss;
        clip_grad_norm(params, input.hyper.clip_norm);
        if (lr > 0.0) {
          sgd_step(params, lr);
        } else {
          params.zero_grad();
        }
      }

      const double dev_error = user_error_rate(model, params, input.labels, dev, stage.kind);
      auto ckpt = std::make_shared<Checkpoint>();
      ckpt->config = input.config;
      ckpt->labels = input.labels;
      ckpt->params = params;
      ckpt->provenance = input.provenance;
      evals.push_back({epoch, dev_error, std::move(ckpt)});
      result.dev_errors.push_back(dev_error);

      if (epoch == 1 || dev_error < best_so_far) {
        best_so_far = dev_error;
        stale = 0;
      } else if (++stale >= input.hyper.patience) {
        lr *= input.hyper.lr_decay;
        stale = 0;
      }
      if (log != nullptr) {
        *log << "stage " << input.provenance.stage_index + 1 << " (" << to_string(stage.kind)
             << ") epoch " << epoch << '/' << stage.epochs << " loss "
             << total_loss / static_cast<double>(std::max<std::size_t>(1, examples.size()))
             << " dev " << dev_error << " lr " << lr << '\n';
      }
    }
  };
  result.reading = meter.session(work);

  const EpochEval& best = select_best(evals);
  result.best = *best.checkpoint;
  result.best.params.zero_grad();
  result.best_epoch = best.epoch;
  return result;
}

StrategyResult run_strategy(const StrategyPlan& plan, const Corpus& corpus, const EnergyMeter& meter,
                            const RunOptions& options) {
  if (plan.stages.empty()) throw DomainError("strategy plan has no stages");
  if (corpus.train.utterances.empty()) throw DomainError("training split is empty");
  const Hyperparams& hyper = plan.hyper;
  hyper.validate();

  const CorpusSplit train = label_wizard_turns(corpus.train);
  const CorpusSplit dev = label_wizard_turns(corpus.dev);
  const CorpusSplit test = label_wizard_turns(corpus.test);
  const std::size_t input_dim = train.utterances.front().features.dim();
  const std::string family = train.utterances.front().feature_family;
  if (plan.transfer_source) check_feature_dim(*plan.transfer_source, input_dim);

  StrategyResult result;
  for (std::size_t k = 0; k < plan.stages.size(); ++k) {
    const StagePlan& stage = plan.stages[k];
    StageInput input;
    input.plan = stage;
    input.hyper = hyper;
    input.labels = stage_labels(stage.kind, train);
    input.config = hyper.model_config(stage.kind, input_dim, input.labels.size());
    Rng init_rng(hyper.seed * 104729 + k);
    input.init = Model(input.config).init_params(init_rng);
    if (stage.init_from) {
      transfer_parameters(*stage.init_from, input.config, input.labels, input.init, false);
    }
    if (stage.init_from_previous) {
      if (k == 0) throw DomainError("first stage cannot start from a predecessor");
      transfer_parameters(result.stages.back().best, input.config, input.labels, input.init, true);
    }
    input.provenance = {plan.tag(), k, to_string(stage.kind), options.source_corpus, hyper.seed,
                        options.transfer_from};
    result.stages.push_back(run_stage(input, train, dev, meter, options.log));
  }

  const StageResult& last = result.stages.back();
  result.final = last.best;
  const StageKind final_kind = plan.stages.back().kind;
  const Model model(result.final.config);

  RunRecord& r = result.record;
  r.strategy = plan.tag();
  r.feature_family = family;
  r.run_id = options.run_id.empty() ? r.strategy + "-" + family + "-seed" + std::to_string(hyper.seed)
                                    : options.run_id;
  for (const auto& s : result.stages) {
    r.wall_time_s += s.reading.wall_time_s;
    r.kwh += s.reading.kwh;
  }
  // A recorded meter reports one figure for the whole run.
  if (!meter.is_simulated()) r.kwh = meter.recorded_kwh();
  r.dev_cer = user_error_rate(model, result.final.params, result.final.labels, dev, final_kind);
  r.test_cer = user_error_rate(model, result.final.params, result.final.labels, test, final_kind);
  return result;
}

namespace {

json hyper_json(const Hyperparams& h) {
  return {{"epochs", h.epochs},
          {"lr", h.lr},
          {"lr_decay", h.lr_decay},
          {"patience", h.patience},
          {"clip_norm", h.clip_norm},
          {"seed", h.seed},
          {"encoder_hidden", h.encoder_hidden},
          {"encoder_layers", h.encoder_layers},
          {"pyramid_layers", h.pyramid_layers},
          {"decoder_hidden", h.decoder_hidden},
          {"embed_dim", h.embed_dim},
          {"attention_dim", h.attention_dim},
          {"location_aware", h.location_aware}};
}

Hyperparams hyper_from_json(const json& j) {
  Hyperparams h;
  h.epochs = j.at("epochs").get<std::size_t>();
  h.lr = j.at("lr").get<double>();
  h.lr_decay = j.at("lr_decay").get<double>();
  h.patience = j.at("patience").get<std::size_t>();
  h.clip_norm = j.at("clip_norm").get<double>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.encoder_hidden = j.at("encoder_hidden").get<std::size_t>();
  h.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  h.pyramid_layers = j.at("pyramid_layers").get<std::size_t>();
  h.decoder_hidden = j.at("decoder_hidden").get<std::size_t>();
  h.embed_dim = j.at("embed_dim").get<std::size_t>();
  h.attention_dim = j.at("attention_dim").get<std::size_t>();
  h.location_aware = j.at("location_aware").get<bool>();
  return h;
}

}  // namespace

std::string manifest_to_json(const RunManifest& m) {
  const json j = {{"run_id", m.run_id},       {"strategy", m.strategy},
                  {"hyperparams", hyper_json(m.hyper)}, {"corpus_dir", m.corpus_dir},
                  {"meter", m.meter},         {"transfer_from", m.transfer_from},
                  {"out_ckpt", m.out_ckpt},   {"ledger", m.ledger}};
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.strategy = j.at("strategy").get<std::string>();
    m.hyper = hyper_from_json(j.at("hyperparams"));
    m.corpus_dir = j.at("corpus_dir").get<std::string>();
    m.meter = j.at("meter").get<std::string>();
    m.transfer_from = j.at("transfer_from").get<std::string>();
    m.out_ckpt = j.at("out_ckpt").get<std::string>();
    m.ledger = j.at("ledger").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("invalid run manifest: ") + e.what());
  }
}

}  // namespace slu
