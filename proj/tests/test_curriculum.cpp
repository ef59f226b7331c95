#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "slu/checkpoint.hpp"
#include "slu/curriculum.hpp"
#include "slu/errors.hpp"

using namespace slu;
namespace fs = std::filesystem;

namespace {

Hyperparams small_hyper(std::size_t epochs = 2) {
  Hyperparams h;
  h.epochs = epochs;
  h.seed = 3;
  h.encoder_hidden = 8;
  h.decoder_hidden = 8;
  h.embed_dim = 4;
  h.attention_dim = 4;
  return h;
}

Corpus small_corpus(std::uint64_t seed = 11, std::size_t utts = 40) {
  SyntheticOptions o;
  o.seed = seed;
  o.n_utts = utts;
  o.n_concepts = 3;
  o.dim = 4;
  return generate_synthetic(o);
}

StageInput stage_input(StageKind kind, const Corpus& corpus, const Hyperparams& hyper, double lr) {
  StageInput in;
  in.plan.kind = kind;
  in.plan.epochs = hyper.epochs;
  in.plan.lr = lr;
  in.hyper = hyper;
  in.labels = stage_labels(kind, label_wizard_turns(corpus.train));
  in.config = hyper.model_config(kind, corpus.train.utterances.front().features.dim(), in.labels.size());
  Rng rng(5);
  in.init = Model(in.config).init_params(rng);
  in.provenance.stage_kind = to_string(kind);
  return in;
}

Checkpoint trained_checkpoint(const Corpus& corpus) {
  const StrategyPlan p = plan("1step", small_hyper(1));
  return run_strategy(p, corpus, EnergyMeter::simulated(100.0)).final;
}

}  // namespace

TEST_CASE("plan builds the stage lists") {
  const Hyperparams h = small_hyper();
  const StrategyPlan three = plan("3steps", h);
  REQUIRE(three.stages.size() == 3);
  CHECK(three.stages[0].kind == StageKind::encoder_asr);
  CHECK(three.stages[1].kind == StageKind::encoder_slu);
  CHECK(three.stages[2].kind == StageKind::full_slu);
  CHECK(!three.stages[0].init_from_previous);
  CHECK(three.stages[1].init_from_previous);
  CHECK(three.stages[2].init_from_previous);

  const StrategyPlan two = plan("2steps", h);
  REQUIRE(two.stages.size() == 2);
  CHECK(two.stages[0].kind == StageKind::encoder_slu);
  CHECK(two.stages[1].kind == StageKind::full_slu);

  const StrategyPlan one = plan("1step", h);
  REQUIRE(one.stages.size() == 1);
  CHECK(one.stages[0].kind == StageKind::full_slu);
  CHECK(one.stages[0].init_from == nullptr);
  CHECK(one.tag() == "1step");
  for (const auto& s : three.stages) {
    CHECK(s.epochs == h.epochs);
    CHECK(s.lr == h.lr);
  }

  CHECK_THROWS_AS(plan("4steps", h), DomainError);
  Hyperparams bad = h;
  bad.epochs = 0;
  CHECK_THROWS_AS(plan("1step", bad), DomainError);
}

TEST_CASE("plan with a transfer source") {
  const Corpus corpus = small_corpus();
  auto source = std::make_shared<const Checkpoint>(trained_checkpoint(corpus));
  const StrategyPlan p = plan("1step", small_hyper(), source, 4);
  CHECK(p.stages[0].init_from == source);
  CHECK(p.tag() == "1step+PM");

  CHECK_THROWS_AS(plan("1step", small_hyper(), source, 6), IncompatibleTransferError);
  Hyperparams wider = small_hyper();
  wider.encoder_hidden = 12;
  CHECK_THROWS_AS(plan("1step", wider, source), IncompatibleTransferError);
}

TEST_CASE("select_best") {
  const auto evals = [](std::vector<double> errors) {
    std::vector<EpochEval> out;
    for (std::size_t i = 0; i < errors.size(); ++i) out.push_back({i + 1, errors[i], nullptr});
    return out;
  };
  CHECK(select_best(evals({30, 20, 25})).epoch == 2);
  CHECK(select_best(evals({20, 20})).epoch == 1);
  CHECK(select_best(evals({5})).epoch == 1);
  CHECK_THROWS_AS(select_best({}), DomainError);
}

TEST_CASE("a stage with lr 0 leaves the parameters unchanged") {
  const Corpus corpus = small_corpus();
  const Hyperparams h = small_hyper(1);
  for (StageKind kind : {StageKind::encoder_slu, StageKind::full_slu}) {
    const StageInput in = stage_input(kind, corpus, h, 0.0);
    const StageResult r = run_stage(in, label_wizard_turns(corpus.train), corpus.dev,
                                    EnergyMeter::simulated(100.0));
    CHECK(r.best.params.same_values(in.init));
    CHECK(r.best_epoch == 1);
    CHECK(r.dev_errors.size() == 1);
  }
}

TEST_CASE("stage metering") {
  const Corpus corpus = small_corpus();
  const Hyperparams h = small_hyper(1);
  const StageInput in = stage_input(StageKind::encoder_slu, corpus, h, 0.05);
  const StageResult r =
      run_stage(in, label_wizard_turns(corpus.train), corpus.dev, EnergyMeter::simulated(100.0));
  CHECK(r.reading.wall_time_s > 0.0);
  CHECK(r.reading.kwh == doctest::Approx(r.reading.wall_time_s * 100.0 / 3.6e6));

  const StageResult fixed =
      run_stage(in, label_wizard_turns(corpus.train), corpus.dev, EnergyMeter::recorded(1.25));
  CHECK(fixed.reading.kwh == 1.25);
}

TEST_CASE("stage input validation") {
  const Corpus corpus = small_corpus();
  StageInput in = stage_input(StageKind::full_slu, corpus, small_hyper(1), 0.05);
  in.config.encoder.input_dim = 5;
  CHECK_THROWS_AS(run_stage(in, label_wizard_turns(corpus.train), corpus.dev, EnergyMeter::simulated(1.0)),
                  ShapeError);
}

TEST_CASE("wizard turns in dev never change the selected epoch") {
  const Corpus corpus = small_corpus(21, 60);
  const Hyperparams h = small_hyper(4);
  const CorpusSplit train = label_wizard_turns(corpus.train);

  CorpusSplit user_only = corpus.dev;
  std::erase_if(user_only.utterances, [](const Utterance& u) { return !u.is_user(); });
  CorpusSplit with_wizards = user_only;
  Rng rng(99);
  for (int i = 0; i < 8; ++i) {
    // Wizard turns whose references the model cannot produce.
    Utterance w = corpus.train.utterances[rng.index(0, corpus.train.utterances.size() - 1)];
    w.id = "wiz" + std::to_string(i);
    w.speaker = Speaker::wizard;
    w.concepts = {"unseen-a", "unseen-b", "unseen-c"};
    w.transcript = {"zz"};
    with_wizards.utterances.insert(with_wizards.utterances.begin() + i, w);
  }

  for (StageKind kind : {StageKind::encoder_slu, StageKind::full_slu}) {
    const StageInput in = stage_input(kind, corpus, h, 0.05);
    const StageResult a = run_stage(in, train, user_only, EnergyMeter::simulated(1.0));
    const StageResult b = run_stage(in, train, with_wizards, EnergyMeter::simulated(1.0));
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.dev_errors == b.dev_errors);
  }
}

TEST_CASE("user_error_rate ignores wizard turns") {
  const Corpus corpus = small_corpus();
  const Checkpoint ckpt = trained_checkpoint(corpus);
  CorpusSplit dev = corpus.dev;
  const double before = user_error_rate(ckpt, dev);
  for (auto& u : dev.utterances) {
    if (!u.is_user()) u.concepts = {"garbage"};
  }
  CHECK(user_error_rate(ckpt, dev) == before);
}

TEST_CASE("run_strategy chains stages and orders energy") {
  const Corpus corpus = small_corpus();
  const Hyperparams h = small_hyper(2);
  const EnergyMeter meter = EnergyMeter::simulated(100.0);
  const StrategyResult three = run_strategy(plan("3steps", h), corpus, meter);
  const StrategyResult two = run_strategy(plan("2steps", h), corpus, meter);
  const StrategyResult one = run_strategy(plan("1step", h), corpus, meter);

  REQUIRE(three.stages.size() == 3);
  for (std::size_t k = 1; k < three.stages.size(); ++k) {
    const ParamStore& init = three.stages[k].initial;
    const ParamStore& prev = three.stages[k - 1].best.params;
    for (const auto& [name, slot] : init.slots()) {
      if (!Model::is_encoder_slot(name)) continue;
      CHECK(slot.value == prev.value(name));
    }
  }
  CHECK(three.final.config.kind == ModelKind::encoder_decoder);
  CHECK(three.final.provenance.stage_index == 2);
  CHECK(three.final.provenance.strategy == "3steps");
  CHECK(three.stages[0].best.labels.front() == kBlankLabel);

  CHECK(three.record.kwh > two.record.kwh);
  CHECK(two.record.kwh > one.record.kwh);
  CHECK(one.record.strategy == "1step");
  CHECK(one.record.feature_family == "synthetic");
  CHECK(one.record.run_id == "1step-synthetic-seed3");
  double stage_sum = 0.0;
  for (const auto& s : three.stages) stage_sum += s.reading.kwh;
  CHECK(three.record.kwh == stage_sum);

  const StrategyResult recorded = run_strategy(plan("2steps", h), corpus, EnergyMeter::recorded(2.5));
  CHECK(recorded.record.kwh == 2.5);
}

TEST_CASE("run_strategy is deterministic") {
  const Corpus corpus = small_corpus();
  const Hyperparams h = small_hyper(2);
  const StrategyResult a = run_strategy(plan("2steps", h), corpus, EnergyMeter::simulated(1.0));
  const StrategyResult b = run_strategy(plan("2steps", h), corpus, EnergyMeter::simulated(1.0));
  CHECK(a.record.dev_cer == b.record.dev_cer);
  CHECK(a.record.test_cer == b.record.test_cer);
  CHECK(a.final.params.same_values(b.final.params));
}

TEST_CASE("transfer remaps shared labels") {
  const Corpus source_corpus = small_corpus(11);
  auto source = std::make_shared<const Checkpoint>(trained_checkpoint(source_corpus));

  // Target corpus: concept C01 is renamed, the others are shared with the source.
  Corpus target = small_corpus(12);
  for (CorpusSplit* split : {&target.train, &target.dev, &target.test}) {
    for (auto& u : split->utterances) {
      for (auto& c : u.concepts) {
        if (c == "C01") c = "Z99";
      }
    }
    split->refresh_vocab();
  }

  const Hyperparams h = small_hyper(1);
  const std::vector<std::string> labels = stage_labels(StageKind::full_slu, label_wizard_turns(target.train));
  const ModelConfig cfg = h.model_config(StageKind::full_slu, 4, labels.size());
  Rng rng(8);
  const ParamStore fresh = Model(cfg).init_params(rng);
  ParamStore moved = fresh;
  transfer_parameters(*source, cfg, labels, moved, false);

  const Matrix& src_out = source->params.value("dec.out.W");
  const Matrix& dst_out = moved.value("dec.out.W");
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto it = std::find(source->labels.begin(), source->labels.end(), labels[r]);
    const auto expected_row = it == source->labels.end()
                                  ? fresh.value("dec.out.W").row(r)
                                  : src_out.row(static_cast<std::size_t>(it - source->labels.begin()));
    CHECK(std::equal(dst_out.row(r).begin(), dst_out.row(r).end(), expected_row.begin()));
  }
  // BOS embedding row follows the label rows in both models.
  const Matrix& src_embed = source->params.value("dec.embed");
  const Matrix& dst_embed = moved.value("dec.embed");
  CHECK(std::equal(dst_embed.row(labels.size()).begin(), dst_embed.row(labels.size()).end(),
                   src_embed.row(source->labels.size()).begin()));
  CHECK(moved.value("enc.l0.W") == source->params.value("enc.l0.W"));
  CHECK(moved.value("dec.lstm.W") == source->params.value("dec.lstm.W"));

  ParamStore encoder_only = fresh;
  transfer_parameters(*source, cfg, labels, encoder_only, true);
  CHECK(encoder_only.value("enc.l1.W") == source->params.value("enc.l1.W"));
  CHECK(encoder_only.value("dec.lstm.W") == fresh.value("dec.lstm.W"));

  const StrategyResult run = run_strategy(plan("1step", h, source, 4), target, EnergyMeter::simulated(1.0));
  CHECK(run.record.strategy == "1step+PM");
  CHECK(run.stages[0].initial.value("dec.lstm.W") == source->params.value("dec.lstm.W"));
}

TEST_CASE("transfer rejects a different feature dimension") {
  auto source = std::make_shared<const Checkpoint>(trained_checkpoint(small_corpus()));
  SyntheticOptions o;
  o.seed = 4;
  o.n_utts = 20;
  o.n_concepts = 3;
  o.dim = 6;
  const Corpus other = generate_synthetic(o);
  StrategyPlan p = plan("1step", small_hyper(1), source);
  CHECK_THROWS_AS(run_strategy(p, other, EnergyMeter::simulated(1.0)), IncompatibleTransferError);
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = fs::temp_directory_path() / "slu_test_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Checkpoint ckpt = trained_checkpoint(small_corpus());
  ckpt.provenance.source_corpus = "synthetic-11";
  save_checkpoint(ckpt, dir / "model.ckpt");
  const Checkpoint back = load_checkpoint(dir / "model.ckpt");
  CHECK(back.config == ckpt.config);
  CHECK(back.labels == ckpt.labels);
  CHECK(back.provenance == ckpt.provenance);
  CHECK(back.params.same_values(ckpt.params));

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), NotFoundError);
  std::ofstream(dir / "bad.ckpt") << "NOT-A-CHECKPOINT 1\n{}\n";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), ParseError);
  std::ofstream(dir / "truncated.ckpt") << kCheckpointMagic << " 1\n{\"config\":\n";
  CHECK_THROWS_AS(load_checkpoint(dir / "truncated.ckpt"), ParseError);
}

TEST_CASE("manifest round trip") {
  RunManifest m;
  m.run_id = "r1";
  m.strategy = "2steps";
  m.hyper = small_hyper(7);
  m.corpus_dir = "data/syn";
  m.meter = "simulated:100";
  m.out_ckpt = "out.ckpt";
  m.ledger = "runs.jsonl";
  CHECK(manifest_from_json(manifest_to_json(m)) == m);
  CHECK_THROWS_AS(manifest_from_json("{}"), ParseError);
}
