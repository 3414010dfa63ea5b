#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "swcap/backbone.hpp"
#include "swcap/decoder.hpp"
#include "swcap/metrics.hpp"

namespace swcap {

class Vocabulary {
 public:
  // Ids 0..3 hold the reserved tokens; the rest follow count descending, then
  // lexicographic order, keeping only tokens seen at least `min_count` times.
  static Vocabulary build(const std::vector<Tokens>& corpus, std::size_t min_count);
  static Vocabulary from_tokens(std::vector<std::string> id_to_token);

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;  // UNK when absent
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // BOS, ids..., EOS.
  std::vector<int> encode(const Tokens& tokens) const;
  std::vector<int> encode(std::string_view text) const { return encode(metric_tokenize(text)); }
  // Stops at EOS; skips BOS and PAD.
  Tokens decode_tokens(const std::vector<int>& ids) const;
  std::string decode(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

std::string join_tokens(const Tokens& tokens);

// ---- synthetic scenes -------------------------------------------------------

enum class ShapeKind { kSquare, kCircle, kTriangle, kCross };
enum class Relation { kNone, kAbove, kLeftOf };
enum class CaptionTemplate { kStandard, kAlternate };
// Restricts a generator to one side of a fixed split.
//   layouts: kPrimary keeps pairs in the left column / top row and singles in
//     quadrants 0 and 3; kHeldOut uses the remaining placements.
//   compositions: kPrimary keeps (color + shape) even, kHeldOut odd.
enum class SplitPart { kAll, kPrimary, kHeldOut };

struct SceneObject {
  std::size_t color = 0;  // index into synthetic_colors()
  ShapeKind shape = ShapeKind::kSquare;
  std::size_t quadrant = 0;  // 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right
};

// With a relation, objects[0] is above / left of objects[1].
struct SceneSpec {
  std::vector<SceneObject> objects;
  Relation relation = Relation::kNone;
};

struct NamedColor {
  const char* name;
  Real r, g, b;
};

const std::vector<NamedColor>& synthetic_colors();
const char* shape_name(ShapeKind kind);

inline constexpr std::size_t kSceneSize = 16;

ImageTensor render_scene(const SceneSpec& scene);
// Standard: "a red circle above a blue square", "... to the left of ...".
// Alternate names the second object first: "... below ...", "... to the right of ...".
std::string scene_caption(const SceneSpec& scene, CaptionTemplate style = CaptionTemplate::kStandard);

struct SyntheticOptions {
  std::size_t count = 50;
  std::uint64_t seed = 1;
  CaptionTemplate style = CaptionTemplate::kStandard;
  SplitPart layouts = SplitPart::kAll;
  SplitPart compositions = SplitPart::kAll;
  // Probability of a two-object scene.
  double pair_fraction = 0.8;
};

struct SyntheticExample {
  std::string id;
  SceneSpec scene;
  ImageTensor image;
  std::string caption;
};

std::vector<SyntheticExample> generate_synthetic(const SyntheticOptions& options);

// ---- datasets ---------------------------------------------------------------

struct CaptionRecord {
  std::string id;
  std::filesystem::path source;  // raw image, pixmap or feature file
  std::vector<std::string> captions;
};

// Layout: <dir>/captions.jsonl with one {"image_id", "file", "captions"} object
// per line; "file" is relative to <dir>. A path naming a Karpathy split file,
// optionally suffixed "@train", "@val" or "@test" (default train), reads that
// split instead; each image maps to <json dir>/<filepath>/<stem>.feat.
std::vector<CaptionRecord> load_dataset(const std::filesystem::path& dir);
void write_synthetic_dataset(const std::filesystem::path& dir, const std::vector<SyntheticExample>& examples);

struct KarpathyImage {
  std::string id;
  std::string filepath;
  std::string filename;
  std::vector<Tokens> sentences;
};

struct KarpathySplits {
  std::vector<KarpathyImage> train;  // includes restval
  std::vector<KarpathyImage> val;
  std::vector<KarpathyImage> test;
};

KarpathySplits parse_karpathy_json(const std::string& text);
KarpathySplits load_karpathy_json(const std::filesystem::path& path);

// One image with its encoded references, ready for training.
struct TrainingExample {
  std::string id;
  ModelInput input;
  std::vector<std::vector<int>> targets;  // BOS ... EOS
  std::vector<Tokens> references;         // metric tokens
};

// Loads every record's source and encodes captions with `vocab`.
std::vector<TrainingExample> make_training_examples(const std::vector<CaptionRecord>& records,
                                                    const Vocabulary& vocab);
ModelInput load_model_input(const std::filesystem::path& path);

// Pads to the longest sequence with PAD.
std::vector<std::vector<int>> pad_batch(const std::vector<std::vector<int>>& sequences);

}  // namespace swcap
