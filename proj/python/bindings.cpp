#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "swcap/attention.hpp"
#include "swcap/data.hpp"
#include "swcap/error.hpp"
#include "swcap/inference.hpp"
#include "swcap/metrics.hpp"
#include "swcap/model.hpp"

namespace py = pybind11;
using namespace swcap;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor::from(std::move(shape), std::vector<Real>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

ImageTensor to_image(const Array& a) {
  if (a.ndim() != 3) throw DimensionError("image arrays are height x width x channels");
  ImageTensor img;
  img.height = a.shape(0);
  img.width = a.shape(1);
  img.channels = a.shape(2);
  img.pixels.assign(a.data(), a.data() + a.size());
  return img;
}

Array image_array(const ImageTensor& img) {
  Array out({img.height, img.width, img.channels});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

// (candidate, [references...]) pairs, tokenized like the metric tools.
ScoredCorpus to_corpus(const std::vector<std::pair<std::string, std::vector<std::string>>>& docs) {
  ScoredCorpus corpus;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    ScoredDocument d{std::to_string(i), metric_tokenize(docs[i].first), {}};
    for (const auto& r : docs[i].second) d.references.push_back(metric_tokenize(r));
    corpus.push_back(std::move(d));
  }
  return corpus;
}

SplitPart parse_part(const std::string& s) {
  if (s == "all") return SplitPart::kAll;
  if (s == "primary") return SplitPart::kPrimary;
  if (s == "held_out") return SplitPart::kHeldOut;
  throw ConfigError("split part must be all, primary or held_out, got '" + s + "'");
}

class Captioner {
 public:
  explicit Captioner(const std::vector<std::filesystem::path>& checkpoints) {
    if (checkpoints.empty()) throw ConfigError("at least one checkpoint is required");
    for (const auto& p : checkpoints) loaded_.push_back(load_model(p));
    for (const auto& m : loaded_) {
      if (m.vocab != loaded_.front().vocab) throw ContractError("ensemble members must share a vocabulary");
      members_.push_back(&m.model);
    }
    vocab_ = Vocabulary::from_tokens(loaded_.front().vocab);
  }

  py::dict caption(const py::array& input, std::size_t beam, const std::string& norm, std::size_t max_len) const {
    const Array a = Array::ensure(input);
    const ModelConfig& c = loaded_.front().model.config();
    ModelInput in;
    if (c.input == InputKind::kPixels) {
      in = to_image(a);
    } else {
      if (a.ndim() != 3) throw DimensionError("feature arrays are grid_h x grid_w x dim");
      const std::size_t gh = a.shape(0), gw = a.shape(1), d = a.shape(2);
      in = GridFeatures::from_grid(Tensor::from({gh * gw, d}, std::vector<Real>(a.data(), a.data() + a.size())), gh, gw);
    }
    CaptionResult r;
    {
      py::gil_scoped_release release;
      r = caption_input(members_, in, {beam, parse_length_norm(norm), max_len});
    }
    py::dict out;
    out["caption"] = vocab_.decode(r.best.tokens);
    out["tokens"] = r.best.tokens;
    out["log_prob"] = r.best.log_prob;
    return out;
  }

  const ModelConfig& config() const { return loaded_.front().model.config(); }
  const std::vector<std::string>& vocab() const { return vocab_.tokens(); }

 private:
  std::vector<LoadedModel> loaded_;
  std::vector<const CaptionModel*> members_;
  Vocabulary vocab_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Windowed-attention captioner core";

  py::register_exception<Error>(m, "SwcapError", PyExc_RuntimeError);

  m.def("tokenize", [](const std::string& s) { return metric_tokenize(s); });
  m.def(
      "bleu", [](const std::vector<std::pair<std::string, std::vector<std::string>>>& docs, int max_n) {
        return bleu(to_corpus(docs), max_n);
      },
      py::arg("docs"), py::arg("max_n") = kMaxNgram);
  m.def("rouge_l", [](const std::vector<std::pair<std::string, std::vector<std::string>>>& docs) {
    return rouge_l(to_corpus(docs));
  });
  m.def("cider_d", [](const std::vector<std::pair<std::string, std::vector<std::string>>>& docs) {
    const CiderResult r = cider_d(to_corpus(docs));
    return py::make_tuple(r.score, r.per_document);
  });
  m.def("score", [](const std::vector<std::pair<std::string, std::vector<std::string>>>& docs) {
    const MetricTable t = score_corpus(to_corpus(docs));
    py::dict out;
    for (int n = 0; n < kMaxNgram; ++n) out[py::str("bleu" + std::to_string(n + 1))] = t.bleu[n];
    out["rouge_l"] = t.rouge_l;
    out["cider"] = t.cider;
    return out;
  });

  m.def("window_partition", [](const Array& grid, std::size_t ws) { return to_array(window_partition(to_tensor(grid), ws)); });
  m.def("window_merge", [](const Array& windows, std::size_t h, std::size_t w) {
    return to_array(window_merge(to_tensor(windows), h, w));
  });
  m.def("cyclic_shift", [](const Array& grid, long dy, long dx) { return to_array(cyclic_shift(to_tensor(grid), dy, dx)); });

  m.def(
      "generate_synthetic",
      [](std::size_t count, std::uint64_t seed, bool alternate, const std::string& layouts,
         const std::string& compositions, double pair_fraction) {
        SyntheticOptions o;
        o.count = count;
        o.seed = seed;
        o.style = alternate ? CaptionTemplate::kAlternate : CaptionTemplate::kStandard;
        o.layouts = parse_part(layouts);
        o.compositions = parse_part(compositions);
        o.pair_fraction = pair_fraction;
        py::list out;
        for (const auto& e : generate_synthetic(o)) {
          py::dict d;
          d["id"] = e.id;
          d["caption"] = e.caption;
          d["image"] = image_array(e.image);
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("count") = 50, py::arg("seed") = 1, py::arg("alternate") = false, py::arg("layouts") = "all",
      py::arg("compositions") = "all", py::arg("pair_fraction") = 0.8);

  m.def(
      "init_checkpoint",
      [](const std::filesystem::path& path, const std::vector<std::string>& vocab, const std::string& config,
         std::uint64_t seed) {
        ModelConfig c = nlohmann::json::parse(config).get<ModelConfig>();
        c.vocab_size = Vocabulary::from_tokens(vocab).size();
        save_model(path, CaptionModel::create(c, seed), vocab);
      },
      py::arg("path"), py::arg("vocab"), py::arg("config") = "{}", py::arg("seed") = 1,
      "Writes an untrained model; `config` is a JSON object of model fields.");

  py::class_<Captioner>(m, "Captioner")
      .def(py::init<const std::vector<std::filesystem::path>&>(), py::arg("checkpoints"))
      .def("caption", &Captioner::caption, py::arg("input"), py::arg("beam") = 1, py::arg("norm") = "mean",
           py::arg("max_len") = 0)
      .def_property_readonly("vocab", &Captioner::vocab)
      .def_property_readonly("config", [](const Captioner& c) {
        nlohmann::json j = c.config();
        return j.dump();
      });
}
