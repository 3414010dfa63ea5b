#include "swcap/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "swcap/checkpoint.hpp"

namespace swcap {

namespace {

const char* const kReserved[kNumReserved] = {"<bos>", "<eos>", "<pad>", "<unk>"};

}  // namespace

Vocabulary Vocabulary::build(const std::vector<Tokens>& corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, cnt] : counts) {
    if (cnt >= min_count) kept.emplace_back(tok, cnt);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens(kReserved, kReserved + kNumReserved);
  for (auto& [tok, cnt] : kept) tokens.push_back(tok);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> id_to_token) {
  if (id_to_token.size() < static_cast<std::size_t>(kNumReserved)) {
    throw FormatError("vocabulary lacks the reserved tokens");
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (id_to_token[i] != kReserved[i]) {
      throw FormatError("vocabulary id " + std::to_string(i) + " must be '" + kReserved[i] + "', found '" +
                        id_to_token[i] + "'");
    }
  }
  Vocabulary v;
  v.tokens_ = std::move(id_to_token);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
      throw FormatError("vocabulary token '" + v.tokens_[i] + "' appears twice");
    }
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::vector<int> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(kBos);
  for (const auto& t : tokens) ids.push_back(id(t));
  ids.push_back(kEos);
  return ids;
}

Tokens Vocabulary::decode_tokens(const std::vector<int>& ids) const {
  Tokens out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kBos || id == kPad) continue;
    out.push_back(token(id));
  }
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const { return join_tokens(decode_tokens(ids)); }

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

// ---- synthetic scenes -------------------------------------------------------

const std::vector<NamedColor>& synthetic_colors() {
  static const std::vector<NamedColor> colors = {
      {"red", 1, 0, 0},    {"green", 0, 0.8, 0},    {"blue", 0, 0, 1},
      {"yellow", 1, 1, 0}, {"purple", 0.6, 0, 0.8}, {"white", 1, 1, 1},
  };
  return colors;
}

const char* shape_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kSquare: return "square";
    case ShapeKind::kCircle: return "circle";
    case ShapeKind::kTriangle: return "triangle";
    case ShapeKind::kCross: return "cross";
  }
  return "?";
}

namespace {

constexpr std::size_t kQuadrant = kSceneSize / 2;

// Local coordinates inside an 8x8 quadrant.
bool shape_covers(ShapeKind kind, std::size_t y, std::size_t x) {
  const double cy = static_cast<double>(y) - 3.5, cx = static_cast<double>(x) - 3.5;
  switch (kind) {
    case ShapeKind::kSquare: return y >= 1 && y <= 6 && x >= 1 && x <= 6;
    case ShapeKind::kCircle: return cy * cy + cx * cx <= 9.0;
    case ShapeKind::kTriangle: return y >= 1 && y <= 6 && std::abs(cx) <= 0.6 * static_cast<double>(y);
    case ShapeKind::kCross:
      return (y >= 3 && y <= 4 && x >= 1 && x <= 6) || (x >= 3 && x <= 4 && y >= 1 && y <= 6);
  }
  return false;
}

std::string object_phrase(const SceneObject& o) {
  return std::string("a ") + synthetic_colors().at(o.color).name + " " + shape_name(o.shape);
}

std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

}  // namespace

ImageTensor render_scene(const SceneSpec& scene) {
  ImageTensor img;
  img.height = img.width = kSceneSize;
  img.channels = 3;
  img.pixels.assign(kSceneSize * kSceneSize * 3, 0);
  for (const auto& o : scene.objects) {
    if (o.quadrant > 3) throw ConfigError("scene quadrant must be 0..3");
    const auto& c = synthetic_colors().at(o.color);
    const std::size_t oy = (o.quadrant / 2) * kQuadrant, ox = (o.quadrant % 2) * kQuadrant;
    for (std::size_t y = 0; y < kQuadrant; ++y)
      for (std::size_t x = 0; x < kQuadrant; ++x) {
        if (!shape_covers(o.shape, y, x)) continue;
        Real* px = &img.pixels[((oy + y) * kSceneSize + ox + x) * 3];
        px[0] = c.r;
        px[1] = c.g;
        px[2] = c.b;
      }
  }
  return img;
}

std::string scene_caption(const SceneSpec& scene, CaptionTemplate style) {
  if (scene.objects.empty()) throw ConfigError("scene has no objects");
  if (scene.relation == Relation::kNone || scene.objects.size() == 1) return object_phrase(scene.objects[0]);
  const std::string first = object_phrase(scene.objects[0]);
  const std::string second = object_phrase(scene.objects[1]);
  if (style == CaptionTemplate::kStandard) {
    return first + (scene.relation == Relation::kAbove ? " above " : " to the left of ") + second;
  }
  return second + (scene.relation == Relation::kAbove ? " below " : " to the right of ") + first;
}

std::vector<SyntheticExample> generate_synthetic(const SyntheticOptions& options) {
  std::mt19937_64 rng(options.seed);
  const std::size_t colors = synthetic_colors().size();
  auto object = [&](std::size_t quadrant) {
    SceneObject o;
    o.color = draw(rng, colors);
    std::size_t shape = draw(rng, 4);
    if (options.compositions != SplitPart::kAll) {
      const std::size_t parity = options.compositions == SplitPart::kPrimary ? 0 : 1;
      if ((o.color + shape) % 2 != parity) shape ^= 1;
    }
    o.shape = static_cast<ShapeKind>(shape);
    o.quadrant = quadrant;
    return o;
  };
  std::vector<SyntheticExample> out;
  out.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    SceneSpec scene;
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u < options.pair_fraction) {
      scene.relation = draw(rng, 2) == 0 ? Relation::kAbove : Relation::kLeftOf;
      std::size_t lane = draw(rng, 2);
      if (options.layouts != SplitPart::kAll) lane = options.layouts == SplitPart::kPrimary ? 0 : 1;
      if (scene.relation == Relation::kAbove) {
        scene.objects = {object(lane), object(lane + 2)};
      } else {
        scene.objects = {object(2 * lane), object(2 * lane + 1)};
      }
    } else {
      std::size_t quadrant = draw(rng, 4);
      if (options.layouts == SplitPart::kPrimary) quadrant = quadrant % 2 == 0 ? 0 : 3;
      if (options.layouts == SplitPart::kHeldOut) quadrant = quadrant % 2 == 0 ? 1 : 2;
      scene.objects = {object(quadrant)};
    }
    SyntheticExample ex;
    char id[32];
    std::snprintf(id, sizeof id, "scene%05zu", i);
    ex.id = id;
    ex.image = render_scene(scene);
    ex.caption = scene_caption(scene, options.style);
    ex.scene = std::move(scene);
    out.push_back(std::move(ex));
  }
  return out;
}

// ---- datasets ---------------------------------------------------------------

namespace {

std::vector<CaptionRecord> load_karpathy_records(const std::string& spec) {
  const auto at = spec.rfind('@');
  const std::filesystem::path file = spec.substr(0, at);
  const std::string split = at == std::string::npos ? "train" : spec.substr(at + 1);
  const KarpathySplits splits = load_karpathy_json(file);
  const std::vector<KarpathyImage>* images = nullptr;
  if (split == "train") images = &splits.train;
  if (split == "val") images = &splits.val;
  if (split == "test") images = &splits.test;
  if (!images) throw ConfigError("split must be train, val or test, got '" + split + "'");
  std::vector<CaptionRecord> out;
  for (const auto& img : *images) {
    CaptionRecord r;
    r.id = img.id;
    r.source = file.parent_path() / img.filepath / std::filesystem::path(img.filename).replace_extension(".feat");
    for (const auto& s : img.sentences) r.captions.push_back(join_tokens(s));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<CaptionRecord> load_dataset(const std::filesystem::path& dir) {
  const std::string spec = dir.string();
  const auto at = spec.rfind('@');
  if (std::filesystem::path(spec.substr(0, at)).extension() == ".json") return load_karpathy_records(spec);
  const auto index = dir / "captions.jsonl";
  std::ifstream in(index);
  if (!in) throw FormatError("cannot open dataset index '" + index.string() + "'");
  std::vector<CaptionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = index.string() + " line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    CaptionRecord r;
    try {
      r.id = j.at("image_id").get<std::string>();
      r.source = dir / j.at("file").get<std::string>();
      r.captions = j.at("captions").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
      throw FormatError(where + ": record needs string image_id, string file and a captions array");
    }
    if (r.captions.empty()) throw FormatError(where + ": record '" + r.id + "' has no captions");
    out.push_back(std::move(r));
  }
  return out;
}

void write_synthetic_dataset(const std::filesystem::path& dir, const std::vector<SyntheticExample>& examples) {
  std::filesystem::create_directories(dir / "images");
  std::string index;
  for (const auto& ex : examples) {
    const std::string rel = "images/" + ex.id + ".rti";
    save_image(dir / rel, ex.image);
    index += nlohmann::json{{"image_id", ex.id}, {"file", rel}, {"captions", {ex.caption}}}.dump() + "\n";
  }
  write_file_bytes(dir / "captions.jsonl", index);
}

KarpathySplits parse_karpathy_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("split file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("images") || !j.at("images").is_array()) {
    throw FormatError("split file needs a top-level 'images' array");
  }
  KarpathySplits out;
  const auto& images = j.at("images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& rec = images[i];
    const std::string where = "image record " + std::to_string(i);
    if (!rec.is_object()) throw FormatError(where + " is not an object");
    if (!rec.contains("split") || !rec.at("split").is_string()) throw FormatError(where + " lacks a 'split' string");
    if (!rec.contains("sentences") || !rec.at("sentences").is_array()) {
      throw FormatError(where + " lacks a 'sentences' array");
    }
    KarpathyImage img;
    img.filename = rec.value("filename", std::string());
    img.filepath = rec.value("filepath", std::string());
    if (rec.contains("cocoid")) {
      img.id = rec.at("cocoid").dump();
    } else if (rec.contains("imgid")) {
      img.id = rec.at("imgid").dump();
    } else if (!img.filename.empty()) {
      img.id = img.filename;
    } else {
      throw FormatError(where + " has no cocoid, imgid or filename");
    }
    const auto& sentences = rec.at("sentences");
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      const auto& sent = sentences[s];
      Tokens toks;
      if (sent.contains("tokens") && sent.at("tokens").is_array()) {
        for (const auto& t : sent.at("tokens")) {
          if (!t.is_string()) throw FormatError(where + " sentence " + std::to_string(s) + " has a non-string token");
          for (auto& piece : metric_tokenize(t.get<std::string>())) toks.push_back(std::move(piece));
        }
      } else if (sent.contains("raw") && sent.at("raw").is_string()) {
        toks = metric_tokenize(sent.at("raw").get<std::string>());
      } else {
        throw FormatError(where + " sentence " + std::to_string(s) + " has neither tokens nor raw text");
      }
      img.sentences.push_back(std::move(toks));
    }
    const std::string split = rec.at("split").get<std::string>();
    if (split == "train" || split == "restval") {
      out.train.push_back(std::move(img));
    } else if (split == "val") {
      out.val.push_back(std::move(img));
    } else if (split == "test") {
      out.test.push_back(std::move(img));
    } else {
      throw FormatError(where + " has unknown split '" + split + "'");
    }
  }
  return out;
}

KarpathySplits load_karpathy_json(const std::filesystem::path& path) {
  try {
    return parse_karpathy_json(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ModelInput load_model_input(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".feat") return load_features(path);
  return load_image(path);
}

std::vector<TrainingExample> make_training_examples(const std::vector<CaptionRecord>& records,
                                                    const Vocabulary& vocab) {
  std::vector<TrainingExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    TrainingExample ex{r.id, load_model_input(r.source), {}, {}};
    for (const auto& c : r.captions) {
      Tokens toks = metric_tokenize(c);
      ex.targets.push_back(vocab.encode(toks));
      ex.references.push_back(std::move(toks));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<std::vector<int>> pad_batch(const std::vector<std::vector<int>>& sequences) {
  std::size_t longest = 0;
  for (const auto& s : sequences) longest = std::max(longest, s.size());
  std::vector<std::vector<int>> out = sequences;
  for (auto& s : out) s.resize(longest, kPad);
  return out;
}

}  // namespace swcap
