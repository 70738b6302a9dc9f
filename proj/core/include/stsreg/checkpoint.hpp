#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "stsreg/encoder.hpp"

namespace stsreg {

/// JSON checkpoint holding the vocabulary, max_tokens, feature mode, head kind,
/// optional label mapping and every parameter. Doubles are written in shortest
/// round-trip form, so save -> load reproduces the model bit for bit. A
/// trailing FNV-1a checksum of the payload detects corruption.
std::string serialize_model(const Model& model);
Model deserialize_model(std::string_view text);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex_digest(std::string_view bytes);

}  // namespace stsreg
