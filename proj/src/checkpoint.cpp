#include "imfvqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "imfvqa/errors.hpp"

namespace imfvqa::training {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'I', 'M', 'F', 'V', 'Q', 'A', 'C', 'K'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CorruptFileError(std::string("checkpoint truncated while reading ") + what);
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ordered_json to_json(const imf::ImfConfig& c) {
  return ordered_json{{"image_dim", c.image_dim},     {"point_dim", c.point_dim},
                      {"image_hidden", c.image_hidden}, {"point_hidden", c.point_hidden},
                      {"image_embed", c.image_embed},   {"point_embed", c.point_embed},
                      {"head_hidden", c.head_hidden},   {"latent_dim", c.latent_dim}};
}

ordered_json to_json(const decoder::DecoderConfig& c) {
  return ordered_json{{"model_dim", c.model_dim},
                      {"vision_token_count", c.vision_token_count},
                      {"max_question_len", c.max_question_len},
                      {"max_answer_len", c.max_answer_len},
                      {"ff_dim", c.ff_dim},
                      {"projector_hidden", c.projector_hidden}};
}

ordered_json to_json(const TrainConfig& c) {
  return ordered_json{{"lr", c.lr},
                      {"weight_decay", c.weight_decay},
                      {"batch_size", c.batch_size},
                      {"kl_weight", c.kl_weight},
                      {"modality_dropout_p", c.modality_dropout_p},
                      {"epochs", c.epochs},
                      {"seed", c.seed},
                      {"imf", to_json(c.imf)},
                      {"decoder", to_json(c.decoder)}};
}

ordered_json to_json(const synthetic::SyntheticTaskSpec& s) {
  return ordered_json{{"point_levels", s.point_levels}, {"image_levels", s.image_levels},
                      {"image_dim", s.image_dim},       {"point_dim", s.point_dim},
                      {"train_count", s.train_count},   {"test_count", s.test_count},
                      {"noise", s.noise},               {"offset", s.offset},
                      {"cross_signal", s.cross_signal}};
}

void apply_json(const json& j, imf::ImfConfig& c, const std::string& path) {
  FieldReader r(j, path);
  r.read("image_dim", c.image_dim);
  r.read("point_dim", c.point_dim);
  r.read("image_hidden", c.image_hidden);
  r.read("point_hidden", c.point_hidden);
  r.read("image_embed", c.image_embed);
  r.read("point_embed", c.point_embed);
  r.read("head_hidden", c.head_hidden);
  r.read("latent_dim", c.latent_dim);
  r.finish();
}

void apply_json(const json& j, decoder::DecoderConfig& c, const std::string& path) {
  FieldReader r(j, path);
  r.read("model_dim", c.model_dim);
  r.read("vision_token_count", c.vision_token_count);
  r.read("max_question_len", c.max_question_len);
  r.read("max_answer_len", c.max_answer_len);
  r.read("ff_dim", c.ff_dim);
  r.read("projector_hidden", c.projector_hidden);
  r.finish();
}

void apply_json(const json& j, TrainConfig& c, const std::string& path) {
  FieldReader r(j, path);
  r.read("lr", c.lr);
  r.read("weight_decay", c.weight_decay);
  r.read("batch_size", c.batch_size);
  r.read("kl_weight", c.kl_weight);
  r.read("modality_dropout_p", c.modality_dropout_p);
  r.read("epochs", c.epochs);
  r.read("seed", c.seed);
  if (const json* sub = r.object("imf")) apply_json(*sub, c.imf, r.field_path("imf"));
  if (const json* sub = r.object("decoder")) apply_json(*sub, c.decoder, r.field_path("decoder"));
  r.finish();
}

void apply_json(const json& j, synthetic::SyntheticTaskSpec& s, const std::string& path) {
  FieldReader r(j, path);
  r.read("point_levels", s.point_levels);
  r.read("image_levels", s.image_levels);
  r.read("image_dim", s.image_dim);
  r.read("point_dim", s.point_dim);
  r.read("train_count", s.train_count);
  r.read("test_count", s.test_count);
  r.read("noise", s.noise);
  r.read("offset", s.offset);
  r.read("cross_signal", s.cross_signal);
  r.finish();
}

std::string encode_checkpoint(Checkpoint& c) {
  ordered_json header;
  header["config"] = to_json(c.config);
  header["vocab"] = c.model.vocab.tokens();
  header["rng_state"] = c.rng_state;
  ordered_json params = ordered_json::array();
  const auto named = c.model.named_parameters();
  for (const auto& [name, p] : named) {
    params.push_back(ordered_json{{"name", name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  header["params"] = std::move(params);
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, Checkpoint::kFormatVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& [name, p] : named) {
    const auto data = p->value.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  }
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  ByteReader in(bytes);
  const std::string magic = in.take(sizeof kMagic, "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) {
    throw CorruptFileError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>("format version");
  if (version != Checkpoint::kFormatVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(Checkpoint::kFormatVersion) + ")");
  }
  if (bytes.size() < sizeof kMagic + 4 + 8 + 8) throw CorruptFileError("checkpoint truncated");
  const std::size_t body_size = bytes.size() - 8;
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, bytes.data() + body_size, sizeof stored_sum);

  const auto header_len = in.get<std::uint64_t>("header length");
  if (header_len > in.remaining()) throw CorruptFileError("checkpoint truncated while reading header");
  json header;
  try {
    header = json::parse(in.take(header_len, "header"));
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  Checkpoint c;
  try {
    apply_json(header.at("config"), c.config, "config");
    c.rng_state = header.at("rng_state").get<std::string>();
    auto vocab = decoder::Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    Rng scratch(0);
    c.model = make_model(c.config, std::move(vocab), scratch);
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("checkpoint header is malformed: ") + e.what());
  }

  std::map<std::string, std::pair<std::size_t, std::size_t>> shapes;
  std::vector<std::string> order;
  try {
    for (const auto& entry : header.at("params")) {
      const auto name = entry.at("name").get<std::string>();
      if (!shapes.emplace(name, std::pair{entry.at("rows").get<std::size_t>(), entry.at("cols").get<std::size_t>()})
               .second) {
        throw CorruptFileError("checkpoint lists parameter '" + name + "' twice");
      }
      order.push_back(name);
    }
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("checkpoint parameter table is malformed: ") + e.what());
  }
  std::map<std::string, std::vector<double>> blobs;
  for (const auto& name : order) {
    const auto [rows, cols] = shapes[name];
    const std::size_t n = rows * cols;
    if (n > in.remaining() / sizeof(double)) throw CorruptFileError("checkpoint truncated in parameter " + name);
    const std::string raw = in.take(n * sizeof(double), "parameter data");
    std::vector<double> values(n);
    std::memcpy(values.data(), raw.data(), raw.size());
    blobs[name] = std::move(values);
  }
  if (in.pos() != body_size) {
    throw CorruptFileError("checkpoint size mismatch: " + std::to_string(body_size - in.pos()) +
                           " unexpected bytes before checksum");
  }
  if (fnv1a(std::string_view(bytes).substr(0, body_size)) != stored_sum) {
    throw CorruptFileError("checkpoint checksum mismatch");
  }

  for (auto& [name, p] : c.model.named_parameters()) {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw ValidationError("checkpoint is missing parameter '" + name + "'");
    const auto [rows, cols] = shapes[name];
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw ShapeError("checkpoint parameter '" + name + "' has shape (" + std::to_string(rows) + "x" +
                       std::to_string(cols) + "), model expects " + p->value.shape_string());
    }
    p->value = num::Matrix(rows, cols, std::move(it->second));
    p->grad = num::Matrix(rows, cols);
  }
  return c;
}

void save_checkpoint(Checkpoint& c, const std::string& path) {
  const std::string bytes = encode_checkpoint(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace imfvqa::training
