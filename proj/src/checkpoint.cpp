#include "adtext/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "adtext/errors.hpp"
#include "json.hpp"

namespace adtext {

namespace {

nlohmann::json config_json(const ModelConfig& c) {
  return {{"hidden_size", c.hidden_size},   {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},       {"max_seq", c.max_seq},
          {"vocab_size", c.vocab_size},     {"intermediate_size", c.intermediate_size},
          {"num_classes", c.num_classes},   {"dropout_rate", c.dropout_rate}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.max_seq = j.at("max_seq").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.intermediate_size = j.at("intermediate_size").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  return c;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw InputError(std::string("checkpoint truncated: missing ") + what);
  return line;
}

}  // namespace

void Checkpoint::write(std::ostream& out) const {
  nlohmann::json header = {
      {"model", config_json(config)},
      {"labels", labels.names()},
      {"normalization", {{"turkish_lowercase", turkish_lowercase}}},
  };
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  out << "vocab " << vocab.size() << '\n';
  vocab.write(out);

  std::vector<char> bytes;
  for (const auto* p : params.parameters()) {
    out << p->name << '\n';
    for (std::size_t i = 0; i < p->value.rank(); ++i) out << (i ? " " : "") << p->value.dim(i);
    out << '\n';
    bytes.resize(p->value.size() * 4);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const std::uint32_t le = to_little_endian(std::bit_cast<std::uint32_t>(p->value[i]));
      std::memcpy(bytes.data() + 4 * i, &le, 4);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
}

Checkpoint Checkpoint::read(std::istream& in) {
  if (read_line(in, "header") != kCheckpointMagic) throw InputError("not a checkpoint: bad magic line");

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(read_line(in, "config"));
    ck.config = config_from_json(header.at("model"));
    ck.labels = LabelMap(header.at("labels").get<std::vector<std::string>>());
    ck.turkish_lowercase = header.at("normalization").at("turkish_lowercase").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint config: ") + e.what());
  }
  ck.config.validate();

  std::istringstream vocab_line(read_line(in, "vocabulary block"));
  std::string tag;
  std::size_t count = 0;
  if (!(vocab_line >> tag >> count) || tag != "vocab") throw InputError("checkpoint: bad vocabulary block");
  ck.vocab = Vocabulary::read(in, count);
  if (static_cast<std::size_t>(ck.vocab.size()) != ck.config.vocab_size) {
    throw InputError("checkpoint: vocabulary has " + std::to_string(ck.vocab.size()) +
                     " tokens, config says " + std::to_string(ck.config.vocab_size));
  }

  ck.params = ModelParams<float>(ck.config);
  std::vector<char> bytes;
  for (auto* p : ck.params.parameters()) {
    const std::string name = read_line(in, "weight block");
    if (name != p->name) throw InputError("checkpoint: expected weight '" + p->name + "', found '" + name + "'");
    std::istringstream shape_line(read_line(in, "weight shape"));
    Shape shape;
    std::size_t d;
    while (shape_line >> d) shape.push_back(d);
    if (shape != p->value.shape()) {
      throw InputError("checkpoint: weight '" + name + "' has shape " + shape_string(shape) +
                       ", expected " + shape_string(p->value.shape()));
    }
    bytes.resize(p->value.size() * 4);
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
      throw InputError("checkpoint truncated inside weight '" + name + "'");
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      std::uint32_t le;
      std::memcpy(&le, bytes.data() + 4 * i, 4);
      p->value[i] = std::bit_cast<float>(to_little_endian(le));
    }
    if (!p->value.all_finite()) throw InputError("checkpoint: non-finite values in weight '" + name + "'");
  }
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint: " + path.string());
  write(out);
  if (!out) throw InputError("failed writing checkpoint: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path.string());
  return read(in);
}

}  // namespace adtext
