#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>

#include "CLI11.hpp"
#include "slu/checkpoint.hpp"
#include "slu/corpus.hpp"
#include "slu/curriculum.hpp"
#include "slu/energy.hpp"
#include "slu/errors.hpp"

namespace slu::cli {

namespace {

struct GenDataArgs {
  SyntheticOptions options;
  std::string out;
};

struct TrainArgs {
  std::string strategy;
  std::string transfer_from;
  std::string corpus;
  std::string meter = "simulated:100";
  std::string out_ckpt;
  std::string ledger;
  std::string run_id;
  Hyperparams hyper;
  bool verbose = false;
};

struct EvalArgs {
  std::string ckpt;
  std::string corpus;
  std::string split = "dev";
};

struct ReportArgs {
  std::string ledger;
  std::string format = "table";
};

int gen_data(const GenDataArgs& args, std::ostream& out) {
  args.options.validate();
  const Corpus corpus = generate_synthetic(args.options);
  save_corpus(corpus, args.out);
  out << "wrote " << corpus.train.utterances.size() << '/' << corpus.dev.utterances.size() << '/'
      << corpus.test.utterances.size() << " utterances to " << args.out << '\n';
  return kOk;
}

int stats(const std::string& dir, std::ostream& out) {
  const Corpus corpus = load_corpus(dir);
  const Vocabularies vocab = Vocabularies::of(corpus.train);
  out << format_stats_table(compute_stats(corpus.train, vocab), compute_stats(corpus.dev, vocab),
                            compute_stats(corpus.test, vocab));
  return kOk;
}

int train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(args.corpus);
  if (corpus.train.utterances.empty()) throw DomainError("training split is empty");
  const EnergyMeter meter = EnergyMeter::parse(args.meter);
  std::shared_ptr<const Checkpoint> source;
  if (!args.transfer_from.empty()) {
    source = std::make_shared<const Checkpoint>(load_checkpoint(args.transfer_from));
  }
  const std::size_t input_dim = corpus.train.utterances.front().features.dim();
  const StrategyPlan p = plan(args.strategy, args.hyper, source, input_dim);

  RunOptions options;
  options.run_id = args.run_id;
  options.source_corpus = args.corpus;
  options.transfer_from = args.transfer_from;
  options.log = args.verbose ? &err : nullptr;
  const StrategyResult result = run_strategy(p, corpus, meter, options);

  save_checkpoint(result.final, args.out_ckpt);
  RunManifest manifest;
  manifest.run_id = result.record.run_id;
  manifest.strategy = args.strategy;
  manifest.hyper = args.hyper;
  manifest.corpus_dir = args.corpus;
  manifest.meter = meter.to_string();
  manifest.transfer_from = args.transfer_from;
  manifest.out_ckpt = args.out_ckpt;
  manifest.ledger = args.ledger;
  std::ofstream manifest_file(args.out_ckpt + ".manifest.json", std::ios::trunc);
  manifest_file << manifest_to_json(manifest);
  if (!manifest_file) throw Error("cannot write the run manifest next to " + args.out_ckpt);
  append_ledger(args.ledger, result.record);
  out << record_to_line(result.record) << '\n';
  return kOk;
}

int eval(const EvalArgs& args, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(args.ckpt);
  const SplitName name = split_from_string(args.split);
  const CorpusSplit split = load_split(split_path(args.corpus, name), name);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", user_error_rate(ckpt, split));
  out << buf << '\n';
  return kOk;
}

int report(const ReportArgs& args, std::ostream& out) {
  const EnergyReport r = build_report(load_ledger(args.ledger));
  out << (args.format == "records" ? render_records(r) : render_table(r));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spoken language understanding training and energy accounting"};
  app.name("slu");
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic train/dev/test corpus");
  gen_cmd->add_option("--seed", gen.options.seed, "Random seed");
  gen_cmd->add_option("--utts", gen.options.n_utts, "Number of utterances")->capture_default_str();
  gen_cmd->add_option("--concepts", gen.options.n_concepts, "Number of concept types")->capture_default_str();
  gen_cmd->add_option("--dim", gen.options.dim, "Feature dimension")->capture_default_str();
  gen_cmd->add_option("--noise", gen.options.noise, "Gaussian noise std")->capture_default_str();
  gen_cmd->add_option("--wizard-fraction", gen.options.wizard_fraction, "Share of wizard turns")
      ->capture_default_str();
  gen_cmd->add_option("--family", gen.options.feature_family, "Feature family tag")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  std::string stats_corpus;
  auto* stats_cmd = app.add_subcommand("stats", "Print corpus statistics");
  stats_cmd->add_option("--corpus", stats_corpus, "Corpus directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Run a training strategy");
  train_cmd->add_option("--strategy", tr.strategy, "3steps, 2steps or 1step")
      ->required()
      ->check(CLI::IsMember({"3steps", "2steps", "1step"}));
  train_cmd->add_option("--transfer-from", tr.transfer_from, "Checkpoint used to initialize stage 1");
  train_cmd->add_option("--corpus", tr.corpus, "Corpus directory")->required();
  train_cmd->add_option("--meter", tr.meter, "simulated:WATTS or recorded:KWH")->capture_default_str();
  train_cmd->add_option("--seed", tr.hyper.seed, "Random seed");
  train_cmd->add_option("--out-ckpt", tr.out_ckpt, "Final checkpoint path")->required();
  train_cmd->add_option("--ledger", tr.ledger, "Run ledger to append to")->required();
  train_cmd->add_option("--run-id", tr.run_id, "Ledger run id");
  train_cmd->add_option("--epochs", tr.hyper.epochs, "Epochs per stage")->capture_default_str();
  train_cmd->add_option("--lr", tr.hyper.lr, "Initial learning rate")->capture_default_str();
  train_cmd->add_option("--hidden", tr.hyper.encoder_hidden, "Encoder hidden size")->capture_default_str();
  train_cmd->add_option("--decoder-hidden", tr.hyper.decoder_hidden, "Decoder hidden size")
      ->capture_default_str();
  train_cmd->add_flag("--verbose", tr.verbose, "Log every epoch to stderr");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Print the CER of a checkpoint over user turns");
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--corpus", ev.corpus, "Corpus directory")->required();
  eval_cmd->add_option("--split", ev.split, "dev or test")
      ->capture_default_str()
      ->check(CLI::IsMember({"dev", "test"}));

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "Print the energy report of a ledger");
  report_cmd->add_option("--ledger", rep.ledger, "Run ledger")->required();
  report_cmd->add_option("--format", rep.format, "table or records")
      ->capture_default_str()
      ->check(CLI::IsMember({"table", "records"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return gen_data(gen, out);
    if (*stats_cmd) return stats(stats_corpus, out);
    if (*train_cmd) return train(tr, out, err);
    if (*eval_cmd) return eval(ev, out);
    if (*report_cmd) return report(rep, out);
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace slu::cli
