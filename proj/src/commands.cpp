#include "swcap/commands.hpp"

#include <fstream>
#include <map>

#include "swcap/checkpoint.hpp"

namespace swcap {

namespace {

SplitPart parse_split_part(const std::string& name, const char* flag) {
  if (name == "all") return SplitPart::kAll;
  if (name == "primary") return SplitPart::kPrimary;
  if (name == "held-out") return SplitPart::kHeldOut;
  throw ConfigError(std::string(flag) + " must be all, primary or held-out, got '" + name + "'");
}

std::vector<CaptionRecord> require_dataset(const std::string& dir, const char* what) {
  if (dir.empty()) throw ConfigError(std::string(what) + " is not set");
  return load_dataset(dir);
}

void write_text(const std::filesystem::path& path, const std::string& text) { write_file_bytes(path, text); }

struct LoadedMembers {
  std::vector<LoadedModel> models;
  std::vector<const CaptionModel*> pointers;
  Vocabulary vocab;
};

LoadedMembers load_members(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("at least one --checkpoint is required");
  LoadedMembers out;
  for (const auto& p : paths) out.models.push_back(load_model(p));
  const auto& first = out.models.front();
  for (const auto& m : out.models) {
    if (m.vocab != first.vocab) throw ConfigError("ensemble checkpoints use different vocabularies");
    if (m.model.config().grid_h != first.model.config().grid_h ||
        m.model.config().grid_w != first.model.config().grid_w ||
        m.model.config().input != first.model.config().input) {
      throw ConfigError("ensemble checkpoints disagree on grid shape or input kind");
    }
  }
  out.vocab = Vocabulary::from_tokens(first.vocab);
  for (const auto& m : out.models) out.pointers.push_back(&m.model);
  return out;
}

DecodeOptions decode_options(const RunConfig& config) {
  DecodeOptions d;
  d.beam = config.decode.beam;
  d.norm = config.decode.norm;
  return d;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  return f;
}

}  // namespace

Vocabulary build_vocabulary(const std::vector<std::string>& dataset_dirs, std::size_t min_count) {
  std::vector<Tokens> corpus;
  for (const auto& dir : dataset_dirs) {
    for (const auto& r : load_dataset(dir))
      for (const auto& c : r.captions) corpus.push_back(metric_tokenize(c));
  }
  return Vocabulary::build(corpus, min_count);
}

int run_gen_synthetic(const GenSyntheticOptions& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("--out is required");
  if (o.count == 0) throw ConfigError("--count must be positive");
  if (!(o.pair_fraction >= 0 && o.pair_fraction <= 1)) throw ConfigError("--pair-fraction must lie in [0, 1]");
  SyntheticOptions s;
  s.count = o.count;
  s.seed = o.seed;
  if (o.style == "standard") {
    s.style = CaptionTemplate::kStandard;
  } else if (o.style == "alternate") {
    s.style = CaptionTemplate::kAlternate;
  } else {
    throw ConfigError("--style must be standard or alternate, got '" + o.style + "'");
  }
  s.layouts = parse_split_part(o.layouts, "--layouts");
  s.compositions = parse_split_part(o.compositions, "--compositions");
  s.pair_fraction = o.pair_fraction;
  const auto examples = generate_synthetic(s);
  write_synthetic_dataset(o.out, examples);
  out << "wrote " << examples.size() << " scenes to " << o.out << "\n";
  return 0;
}

int run_train_xe(const ConfigOptions& options, std::ostream& out) {
  RunConfig config = options.resolve();
  const auto records = require_dataset(config.data.train, "data.train");
  std::vector<std::string> sources{config.data.train};
  sources.insert(sources.end(), config.data.vocab_sources.begin(), config.data.vocab_sources.end());
  const Vocabulary vocab = build_vocabulary(sources, config.data.min_count);
  config.model.vocab_size = vocab.size();
  config.validate();
  const auto examples = make_training_examples(records, vocab);

  const std::filesystem::path dir = config.output;
  std::filesystem::create_directories(dir);
  const std::string hash = config_hash(config);
  write_text(dir / "config.json", to_json(config).dump(2) + "\n");
  std::ofstream log_file = open_output((dir / "xe_log.jsonl").string());
  TrainLog log(&log_file, hash, config.train.log_elapsed);
  log.write({{"phase", "xe"}, {"event", "start"}, {"examples", examples.size()}, {"vocab_size", vocab.size()}});

  const CaptionModel model = CaptionModel::create(config.model, config.train.seed);
  const auto result = train_xe(model, examples, vocab, config.train, log, dir);
  out << "config " << hash << ": " << result.curve.size() << " XE steps, final loss "
      << (result.curve.empty() ? 0.0 : result.curve.back()) << ", checkpoints in " << dir.string() << "\n";
  return 0;
}

int run_train_scst(const ConfigOptions& options, const std::string& init_checkpoint, std::ostream& out) {
  if (init_checkpoint.empty()) throw ConfigError("--init checkpoint is required");
  RunConfig config = options.resolve();
  LoadedModel loaded = load_model(init_checkpoint);
  config.model = loaded.model.config();
  const Vocabulary vocab = Vocabulary::from_tokens(loaded.vocab);
  const std::string source = config.data.scst.empty() ? config.data.train : config.data.scst;
  const auto examples = make_training_examples(require_dataset(source, "data.scst / data.train"), vocab);

  const std::filesystem::path dir = config.output;
  std::filesystem::create_directories(dir);
  const std::string hash = config_hash(config);
  write_text(dir / "scst_config.json", to_json(config).dump(2) + "\n");
  std::ofstream log_file = open_output((dir / "scst_log.jsonl").string());
  TrainLog log(&log_file, hash, config.train.log_elapsed);
  log.write({{"phase", "scst"}, {"event", "start"}, {"examples", examples.size()}, {"init", init_checkpoint}});
  const auto result = train_scst(loaded.model, examples, vocab, config.train, log, dir);
  out << "config " << hash << ": " << result.curve.size() << " SCST steps, final mean reward "
      << (result.curve.empty() ? 0.0 : result.curve.back()) << ", checkpoints in " << dir.string() << "\n";
  return 0;
}

nlohmann::json attention_document(const CaptionModel& model, const Vocabulary& vocab, const ModelInput& input,
                                  const std::string& image_id, const DecodeOptions& decode) {
  const CaptionResult result = caption_input(model, input, decode);
  std::vector<int> prefix{kBos};
  prefix.insert(prefix.end(), result.best.tokens.begin(), result.best.tokens.end());
  NoGradGuard guard;
  const RefinedFeatures f = model.encode(input);
  // Row t of the cross weights belongs to the word generated at step t.
  const DecodeOutputs outs = model.decode(std::span<const int>(prefix.data(), prefix.size() - 1), f, {}, true);
  const std::size_t m = model.config().cells();
  nlohmann::json steps = nlohmann::json::array();
  const auto w = outs.cross_weights.data();
  for (std::size_t t = 0; t < result.best.tokens.size(); ++t) {
    const int id = result.best.tokens[t];
    steps.push_back({{"token", vocab.token(id)},
                     {"id", id},
                     {"weights", std::vector<double>(w.begin() + t * m, w.begin() + (t + 1) * m)}});
  }
  return {{"image_id", image_id},
          {"caption", vocab.decode(result.best.tokens)},
          {"grid", {model.config().grid_h, model.config().grid_w}},
          {"steps", steps}};
}

int run_caption(const CaptionOptions& o, std::ostream& out) {
  const RunConfig config = o.config.resolve();
  const LoadedMembers members = load_members(o.checkpoints);
  std::vector<std::pair<std::string, std::filesystem::path>> inputs;
  for (const auto& p : o.inputs) inputs.emplace_back(std::filesystem::path(p).stem().string(), p);
  if (!o.data.empty()) {
    for (const auto& r : load_dataset(o.data)) inputs.emplace_back(r.id, r.source);
  }
  if (inputs.empty()) throw ConfigError("no inputs: pass image/feature files or --data");
  const DecodeOptions decode = decode_options(config);
  std::vector<nlohmann::json> records(inputs.size());
  if (!o.attn_dir.empty()) std::filesystem::create_directories(o.attn_dir);
  parallel_for(inputs.size(), thread_count_from_env(), [&](std::size_t i) {
    const ModelInput input = load_model_input(inputs[i].second);
    const CaptionResult r = caption_input(members.pointers, input, decode);
    nlohmann::json rec = {{"image_id", inputs[i].first},
                          {"caption", members.vocab.decode(r.best.tokens)},
                          {"tokens", r.best.tokens},
                          {"log_prob", r.best.log_prob}};
    if (!o.attn_dir.empty()) {
      const auto path = std::filesystem::path(o.attn_dir) / (inputs[i].first + ".attn.json");
      write_text(path, attention_document(*members.pointers.front(), members.vocab, input, inputs[i].first, decode)
                               .dump() + "\n");
      rec["heatmap"] = path.string();
    } else {
      rec["heatmap"] = nullptr;
    }
    records[i] = std::move(rec);
  });
  std::string text;
  for (const auto& r : records) text += r.dump() + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    write_text(o.out, text);
  }
  return 0;
}

int run_eval(const EvalOptions& o, std::ostream& out) {
  const RunConfig config = o.config.resolve();
  const LoadedMembers members = load_members(o.checkpoints);
  const std::string dir = o.data.empty() ? config.data.eval : o.data;
  const auto examples = make_training_examples(require_dataset(dir, "data.eval"), members.vocab);
  const auto hyps = caption_examples(members.pointers, examples, decode_options(config), thread_count_from_env());
  const MetricTable table = score_corpus(make_scored_corpus(examples, hyps, members.vocab));
  out << format_metric_table(table);
  if (!o.out.empty()) {
    nlohmann::json j = {{"bleu", table.bleu}, {"rouge_l", table.rouge_l}, {"cider_d", table.cider},
                        {"images", examples.size()}, {"config_hash", config_hash(config)}};
    write_text(o.out, j.dump(2) + "\n");
  }
  return 0;
}

int run_dump_attn(const DumpAttnOptions& o, std::ostream& out) {
  const RunConfig config = o.config.resolve();
  if (o.input.empty()) throw ConfigError("an input image or feature file is required");
  const LoadedModel loaded = load_model(o.checkpoint);
  const Vocabulary vocab = Vocabulary::from_tokens(loaded.vocab);
  const auto doc = attention_document(loaded.model, vocab, load_model_input(o.input),
                                      std::filesystem::path(o.input).stem().string(), decode_options(config));
  if (o.out.empty()) {
    out << doc.dump(2) << "\n";
  } else {
    write_text(o.out, doc.dump(2) + "\n");
  }
  return 0;
}

std::vector<std::pair<std::string, std::vector<std::string>>> read_caption_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + " line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("image_id")) throw FormatError(where + ": record lacks image_id");
    std::string id = j.at("image_id").is_string() ? j.at("image_id").get<std::string>() : j.at("image_id").dump();
    std::vector<std::string> caps;
    if (j.contains("captions") && j.at("captions").is_array()) {
      for (const auto& c : j.at("captions")) {
        if (!c.is_string()) throw FormatError(where + ": captions must be strings");
        caps.push_back(c.get<std::string>());
      }
    } else if (j.contains("caption") && j.at("caption").is_string()) {
      caps.push_back(j.at("caption").get<std::string>());
    } else {
      throw FormatError(where + ": record needs a caption string or captions array");
    }
    out.emplace_back(std::move(id), std::move(caps));
  }
  return out;
}

int run_score(const ScoreOptions& o, std::ostream& out) {
  if (o.candidates.empty() || o.references.empty()) throw ConfigError("--candidates and --references are required");
  std::map<std::string, std::vector<Tokens>> refs;
  for (auto& [id, caps] : read_caption_lines(o.references)) {
    for (const auto& c : caps) refs[id].push_back(metric_tokenize(c));
  }
  ScoredCorpus corpus;
  for (auto& [id, caps] : read_caption_lines(o.candidates)) {
    const auto it = refs.find(id);
    if (it == refs.end()) throw FormatError("candidate '" + id + "' has no references");
    if (caps.size() != 1) throw FormatError("candidate '" + id + "' must carry exactly one caption");
    corpus.push_back({id, metric_tokenize(caps.front()), it->second});
  }
  out << format_metric_table(score_corpus(corpus));
  return 0;
}

}  // namespace swcap
