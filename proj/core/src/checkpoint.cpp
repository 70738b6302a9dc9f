#include "stsreg/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stsreg/error.hpp"

namespace stsreg {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kFormat = "stsreg-checkpoint";
constexpr int kVersion = 1;

Json matrix_to_json(const Matrix& m) {
  Json doc;
  doc["rows"] = m.rows();
  doc["cols"] = m.cols();
  doc["values"] = std::vector<double>(m.values().begin(), m.values().end());
  return doc;
}

Matrix matrix_from_json(const Json& doc, const char* what) {
  const auto rows = doc.at("rows").get<std::size_t>();
  const auto cols = doc.at("cols").get<std::size_t>();
  const auto values = doc.at("values").get<std::vector<double>>();
  if (values.size() != rows * cols) {
    throw InvalidInput(std::string("checkpoint: ") + what + " has " + std::to_string(values.size()) +
                       " values, expected " + std::to_string(rows * cols));
  }
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.values().begin());
  return m;
}

Json payload(const Model& model) {
  Json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["vocab"] = model.vocab.tokens();
  doc["max_tokens"] = model.max_tokens;
  doc["dim"] = model.params.dim();
  doc["mode"] = std::string(to_string(model.params.mode));
  doc["head"] = std::string(to_string(model.params.head));
  doc["mapping"] = model.mapping ? Json::parse(model.mapping->to_json()) : Json(nullptr);
  doc["embeddings"] = matrix_to_json(model.params.embeddings);
  doc["head_weights"] = matrix_to_json(model.params.head_weights);
  doc["head_bias"] = model.params.head_bias;
  return doc;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex_digest(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string serialize_model(const Model& model) {
  model.params.validate();
  if (model.params.vocab_size() != model.vocab.size()) {
    throw ShapeError("model vocabulary has " + std::to_string(model.vocab.size()) + " ids but the embedding table has " +
                     std::to_string(model.params.vocab_size()) + " rows");
  }
  Json doc = payload(model);
  doc["checksum"] = hex_digest(doc.dump());
  return doc.dump() + "\n";
}

Model deserialize_model(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", std::string{}) != kFormat) {
      throw InvalidInput("not an stsreg checkpoint");
    }
    if (doc.at("version").get<int>() != kVersion) {
      throw InvalidInput("unsupported checkpoint version " + doc.at("version").dump());
    }
    const auto stored = doc.at("checksum").get<std::string>();
    doc.erase("checksum");
    if (hex_digest(doc.dump()) != stored) {
      throw InvalidInput("checkpoint checksum mismatch (file corrupted or edited)");
    }

    Model model;
    const auto tokens = doc.at("vocab").get<std::vector<std::string>>();
    model.vocab = Vocabulary(tokens);
    if (model.vocab.known_size() != tokens.size()) {
      throw InvalidInput("checkpoint vocabulary contains duplicate tokens");
    }
    model.max_tokens = doc.at("max_tokens").get<std::size_t>();
    model.params.mode = parse_feature_mode(doc.at("mode").get<std::string>());
    model.params.head = parse_head_kind(doc.at("head").get<std::string>());
    model.params.embeddings = matrix_from_json(doc.at("embeddings"), "embeddings");
    model.params.head_weights = matrix_from_json(doc.at("head_weights"), "head_weights");
    model.params.head_bias = doc.at("head_bias").get<std::vector<double>>();
    if (!doc.at("mapping").is_null()) {
      model.mapping = LabelMapping::from_json(doc.at("mapping").dump());
    }
    if (doc.at("dim").get<std::size_t>() != model.params.dim()) {
      throw ShapeError("checkpoint dim does not match its embedding table");
    }
    if (model.params.vocab_size() != model.vocab.size()) {
      throw ShapeError("checkpoint vocabulary (" + std::to_string(model.vocab.size()) +
                       " ids) does not match its embedding table (" + std::to_string(model.params.vocab_size()) +
                       " rows)");
    }
    if (model.max_tokens == 0) {
      throw InvalidInput("checkpoint max_tokens must be positive");
    }
    model.params.validate();
    return model;
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const std::string text = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write checkpoint '" + path.string() + "'");
  }
  out << text;
  if (!out) {
    throw IoError("write failed on '" + path.string() + "'");
  }
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_model(buf.str());
  } catch (const Error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

}  // namespace stsreg
