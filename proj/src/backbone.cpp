#include "swcap/backbone.hpp"

#include <cmath>
#include <sstream>

#include "swcap/checkpoint.hpp"
#include "swcap/ops.hpp"

namespace swcap {

namespace {

constexpr char kFeatureMagic[8] = {'S', 'W', 'C', 'F', 'E', 'A', 'T', '\0'};
constexpr char kImageMagic[8] = {'S', 'W', 'C', 'I', 'M', 'G', '\0', '\0'};
constexpr std::uint32_t kFileVersion = 1;

ImageTensor parse_ppm(const std::string& bytes, const std::filesystem::path& path) {
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    const std::size_t start = pos;
    std::size_t value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("bad pixmap ") + what + " in '" + path.string() + "'", start);
    return value;
  };
  ImageTensor img;
  img.width = read_int("width");
  img.height = read_int("height");
  const std::size_t maxval = read_int("maxval");
  if (maxval == 0 || maxval > 255) throw FormatError("unsupported pixmap maxval " + std::to_string(maxval), pos);
  ++pos;  // single whitespace before the raster
  img.channels = 3;
  const std::size_t n = img.width * img.height * 3;
  if (bytes.size() < pos + n) throw FormatError("truncated pixmap raster in '" + path.string() + "'", bytes.size());
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.pixels[i] = static_cast<Real>(static_cast<unsigned char>(bytes[pos + i])) / static_cast<Real>(maxval);
  }
  return img;
}

}  // namespace

void ImageTensor::validate() const {
  if (height == 0 || width == 0 || channels == 0) throw ConfigError("image extents must be positive");
  if (pixels.size() != height * width * channels) {
    throw DimensionError("image holds " + std::to_string(pixels.size()) + " values for " + std::to_string(height) +
                         "x" + std::to_string(width) + "x" + std::to_string(channels));
  }
}

GridFeatures GridFeatures::from_grid(Tensor grid, std::size_t grid_h, std::size_t grid_w) {
  if (grid.ndim() != 2 || grid.dim(0) != grid_h * grid_w) {
    throw DimensionError("grid features " + shape_str(grid.shape()) + " do not match a " + std::to_string(grid_h) +
                         "x" + std::to_string(grid_w) + " grid");
  }
  GridFeatures f;
  f.global = mean_pool(grid);
  f.grid = std::move(grid);
  f.grid_h = grid_h;
  f.grid_w = grid_w;
  return f;
}

Tensor patch_embed(const ImageTensor& image, const Linear& proj, std::size_t patch) {
  image.validate();
  if (patch == 0 || image.height % patch != 0 || image.width % patch != 0) {
    throw ConfigError("patch size " + std::to_string(patch) + " does not divide image " +
                      std::to_string(image.height) + "x" + std::to_string(image.width));
  }
  const std::size_t gh = image.height / patch, gw = image.width / patch;
  const std::size_t flat = patch * patch * image.channels;
  if (proj.in_features() != flat) {
    throw DimensionError("patch projection expects " + std::to_string(proj.in_features()) +
                         " inputs, patches have " + std::to_string(flat));
  }
  std::vector<Real> unfolded;
  unfolded.reserve(gh * gw * flat);
  for (std::size_t gy = 0; gy < gh; ++gy)
    for (std::size_t gx = 0; gx < gw; ++gx)
      for (std::size_t dy = 0; dy < patch; ++dy)
        for (std::size_t dx = 0; dx < patch; ++dx)
          for (std::size_t c = 0; c < image.channels; ++c)
            unfolded.push_back(image.at(gy * patch + dy, gx * patch + dx, c));
  return proj(Tensor::from({gh * gw, flat}, std::move(unfolded)));
}

SwinBlockWeights SwinBlockWeights::create(std::size_t d, std::size_t hidden, std::mt19937_64& rng) {
  SwinBlockWeights b;
  b.attn = MsaWeights::create(d, rng);
  b.ff = FeedForward::create(d, hidden, rng);
  b.attn_norm = LayerNormParams::create(d);
  b.ff_norm = LayerNormParams::create(d);
  return b;
}

void SwinBlockWeights::collect(const std::string& prefix, ParameterList& out) const {
  attn.collect(prefix + ".attn", out);
  ff.collect(prefix + ".ff", out);
  attn_norm.collect(prefix + ".attn_norm", out);
  ff_norm.collect(prefix + ".ff_norm", out);
}

Backbone Backbone::create(const ModelConfig& config, std::mt19937_64& rng) {
  Backbone b;
  b.config_ = config;
  b.proj_ = Linear::create(config.patch * config.patch * config.channels, config.d_model, true, rng);
  for (std::size_t i = 0; i < config.backbone_blocks; ++i) {
    b.blocks_.push_back(SwinBlockWeights::create(config.d_model, config.ff_mult * config.d_model, rng));
  }
  return b;
}

GridFeatures Backbone::extract(const ImageTensor& image, const DropoutContext& dropout) const {
  if (image.height != config_.image_h || image.width != config_.image_w || image.channels != config_.channels) {
    throw DimensionError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) + "x" +
                         std::to_string(image.channels) + " does not match configured input " +
                         std::to_string(config_.image_h) + "x" + std::to_string(config_.image_w) + "x" +
                         std::to_string(config_.channels));
  }
  Tensor x = patch_embed(image, proj_, config_.patch);
  const WindowSpec spec = config_.backbone_window_spec();
  const AttentionConfig attn = config_.attention();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::size_t shift = i % 2 == 1 ? spec.shift : 0;
    x = b.attn_norm(add(x, dropout(windowed_msa(x, Tensor(), b.attn, attn, spec, shift))));
    x = b.ff_norm(add(x, dropout(b.ff(x))));
  }
  return GridFeatures::from_grid(std::move(x), config_.grid_h, config_.grid_w);
}

void Backbone::collect(const std::string& prefix, ParameterList& out) const {
  proj_.collect(prefix + ".patch_embed", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
}

GridFeatures load_features(const std::filesystem::path& path) {
  ByteReader in(read_file_bytes(path));
  if (in.remaining() < sizeof kFeatureMagic ||
      in.raw(sizeof kFeatureMagic, "magic") != std::string(kFeatureMagic, sizeof kFeatureMagic)) {
    throw FormatError("'" + path.string() + "' is not a feature file", 0);
  }
  const auto version = in.u32("version");
  if (version != kFileVersion) throw FormatError("unsupported feature file version " + std::to_string(version), 8);
  const auto gh = in.u32("grid height");
  const auto gw = in.u32("grid width");
  const auto d = in.u32("feature width");
  if (gh == 0 || gw == 0 || d == 0) throw FormatError("feature header has a zero extent", in.offset() - 12);
  const std::uint64_t n = std::uint64_t(gh) * gw * d;
  if (in.remaining() != n * 8) {
    throw FormatError("feature payload holds " + std::to_string(in.remaining()) + " bytes, header implies " +
                          std::to_string(n * 8),
                      in.offset() + std::min<std::uint64_t>(in.remaining(), n * 8));
  }
  std::vector<Real> values(n);
  for (auto& v : values) v = static_cast<Real>(in.f64("feature value"));
  return GridFeatures::from_grid(Tensor::from({std::size_t(gh) * gw, d}, std::move(values)), gh, gw);
}

void save_features(const std::filesystem::path& path, const GridFeatures& features) {
  std::string out(kFeatureMagic, sizeof kFeatureMagic);
  le::put_u32(out, kFileVersion);
  le::put_u32(out, static_cast<std::uint32_t>(features.grid_h));
  le::put_u32(out, static_cast<std::uint32_t>(features.grid_w));
  le::put_u32(out, static_cast<std::uint32_t>(features.grid.dim(1)));
  for (auto v : features.grid.data()) le::put_f64(out, static_cast<double>(v));
  write_file_bytes(path, out);
}

ImageTensor load_image(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return parse_ppm(bytes, path);
  ByteReader in(bytes);
  if (in.remaining() < sizeof kImageMagic ||
      in.raw(sizeof kImageMagic, "magic") != std::string(kImageMagic, sizeof kImageMagic)) {
    throw FormatError("'" + path.string() + "' is neither a raw image tensor nor a P6 pixmap", 0);
  }
  const auto version = in.u32("version");
  if (version != kFileVersion) throw FormatError("unsupported image file version " + std::to_string(version), 8);
  ImageTensor img;
  img.height = in.u32("height");
  img.width = in.u32("width");
  img.channels = in.u32("channels");
  const std::size_t n = img.height * img.width * img.channels;
  if (in.remaining() != n * 8) {
    throw FormatError("image payload holds " + std::to_string(in.remaining()) + " bytes, header implies " +
                          std::to_string(n * 8),
                      in.offset());
  }
  img.pixels.resize(n);
  for (auto& v : img.pixels) v = static_cast<Real>(in.f64("pixel"));
  return img;
}

void save_image(const std::filesystem::path& path, const ImageTensor& image) {
  image.validate();
  std::string out(kImageMagic, sizeof kImageMagic);
  le::put_u32(out, kFileVersion);
  le::put_u32(out, static_cast<std::uint32_t>(image.height));
  le::put_u32(out, static_cast<std::uint32_t>(image.width));
  le::put_u32(out, static_cast<std::uint32_t>(image.channels));
  for (auto v : image.pixels) le::put_f64(out, static_cast<double>(v));
  write_file_bytes(path, out);
}

void save_ppm(const std::filesystem::path& path, const ImageTensor& image) {
  image.validate();
  if (image.channels != 3) throw ConfigError("pixmaps need 3 channels");
  std::ostringstream os;
  os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::string out = os.str();
  for (auto v : image.pixels) {
    const Real clamped = std::min<Real>(1, std::max<Real>(0, v));
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255))));
  }
  write_file_bytes(path, out);
}

}  // namespace swcap
