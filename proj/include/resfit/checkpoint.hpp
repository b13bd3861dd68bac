// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "resfit/mlp.hpp"

namespace resfit {

/// Checkpoint byte format: magic "RFT1", then the MlpSpec descriptor, then the
/// raw little-endian parameter arrays in layer order (weight, bias, layernorm
/// gain/offset where present). Round trips are bit exact.
std::vector<std::uint8_t> serialize_params(const MlpParams& params, const MlpSpec& spec);

/// Inverse of serialize_params. Throws VersionMismatchError on a bad magic and
/// TruncatedStreamError (naming the layer) on short streams.
std::pair<MlpParams, MlpSpec> deserialize_params(const std::vector<std::uint8_t>& bytes);

/// Atomic file write: write to a temp sibling, fsync, rename into place.
/// A concurrent reader sees either the old complete file or the new one.
void atomic_write_file(const std::filesystem::path& path,
                       const void* data, std::size_t len);
void atomic_write_file(const std::filesystem::path& path, const std::string& text);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

void save_params_file(const std::filesystem::path& path, const MlpParams& params,
                      const MlpSpec& spec);
std::pair<MlpParams, MlpSpec> load_params_file(const std::filesystem::path& path);

/// Content hash of an arbitrary byte buffer, rendered as "fnv1a:<hex>".
std::string content_hash(const void* data, std::size_t len);
std::string content_hash(const std::vector<std::uint8_t>& bytes);
std::string file_content_hash(const std::filesystem::path& path);

}  // namespace resfit
