#include "slu/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slu/errors.hpp"

namespace slu {

using nlohmann::json;

namespace {

json config_json(const ModelConfig& c) {
  return {
      {"kind", to_string(c.kind)},
      {"encoder",
       {{"input_dim", c.encoder.input_dim},
        {"hidden_dim", c.encoder.hidden_dim},
        {"num_layers", c.encoder.num_layers},
        {"pyramid_layers", c.encoder.pyramid_layers},
        {"reduction_mode", "concat-pairs"}}},
      {"decoder",
       {{"label_vocab_size", c.decoder.label_vocab_size},
        {"embed_dim", c.decoder.embed_dim},
        {"hidden_dim", c.decoder.hidden_dim},
        {"attention_dim", c.decoder.attention_dim},
        {"location_aware", c.decoder.location_aware}}},
  };
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  const json& e = j.at("encoder");
  c.encoder.input_dim = e.at("input_dim").get<std::size_t>();
  c.encoder.hidden_dim = e.at("hidden_dim").get<std::size_t>();
  c.encoder.num_layers = e.at("num_layers").get<std::size_t>();
  c.encoder.pyramid_layers = e.at("pyramid_layers").get<std::size_t>();
  if (e.at("reduction_mode").get<std::string>() != "concat-pairs") {
    throw DomainError("unsupported pyramid reduction mode");
  }
  const json& d = j.at("decoder");
  c.decoder.label_vocab_size = d.at("label_vocab_size").get<std::size_t>();
  c.decoder.embed_dim = d.at("embed_dim").get<std::size_t>();
  c.decoder.hidden_dim = d.at("hidden_dim").get<std::size_t>();
  c.decoder.attention_dim = d.at("attention_dim").get<std::size_t>();
  c.decoder.location_aware = d.at("location_aware").get<bool>();
  c.validate();
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  json params = json::object();
  for (const auto& [name, slot] : checkpoint.params.slots()) {
    params[name] = {{"rows", slot.value.rows()}, {"cols", slot.value.cols()}, {"data", slot.value.data()}};
  }
  const Provenance& p = checkpoint.provenance;
  const json doc = {
      {"config", config_json(checkpoint.config)},
      {"labels", checkpoint.labels},
      {"provenance",
       {{"strategy", p.strategy},
        {"stage_index", p.stage_index},
        {"stage_kind", p.stage_kind},
        {"source_corpus", p.source_corpus},
        {"seed", p.seed},
        {"transfer_from", p.transfer_from}}},
      {"params", std::move(params)},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n' << doc.dump() << '\n';
  out.flush();
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open checkpoint " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  hs >> magic >> version;
  if (magic != kCheckpointMagic) throw ParseError(1, path.string() + " is not a checkpoint");
  if (version != kCheckpointVersion) {
    throw ParseError(1, "unsupported checkpoint version " + std::to_string(version));
  }
  std::string body;
  std::getline(in, body);
  try {
    const json doc = json::parse(body);
    Checkpoint ckpt;
    ckpt.config = config_from_json(doc.at("config"));
    ckpt.labels = doc.at("labels").get<std::vector<std::string>>();
    if (ckpt.labels.size() != ckpt.config.vocab_size()) {
      throw DomainError("label list does not match the vocabulary size");
    }
    const json& p = doc.at("provenance");
    ckpt.provenance.strategy = p.at("strategy").get<std::string>();
    ckpt.provenance.stage_index = p.at("stage_index").get<std::size_t>();
    ckpt.provenance.stage_kind = p.at("stage_kind").get<std::string>();
    ckpt.provenance.source_corpus = p.at("source_corpus").get<std::string>();
    ckpt.provenance.seed = p.at("seed").get<std::uint64_t>();
    ckpt.provenance.transfer_from = p.at("transfer_from").get<std::string>();
    for (const auto& [name, tensor] : doc.at("params").items()) {
      ckpt.params.add(name, Matrix(tensor.at("rows").get<std::size_t>(), tensor.at("cols").get<std::size_t>(),
                                   tensor.at("data").get<std::vector<double>>()));
    }
    // The stored tensors must be exactly the slots this configuration creates.
    Rng rng(0);
    const ParamStore expected = Model(ckpt.config).init_params(rng);
    for (const auto& [name, slot] : expected.slots()) {
      if (!ckpt.params.contains(name) || !ckpt.params.value(name).same_shape(slot.value)) {
        throw ShapeError("checkpoint slot '" + name + "' is missing or has the wrong shape");
      }
    }
    if (ckpt.params.slots().size() != expected.slots().size()) {
      throw ShapeError("checkpoint has unexpected parameter slots");
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw ParseError(2, std::string("invalid checkpoint body: ") + e.what());
  }
}

}  // namespace slu
