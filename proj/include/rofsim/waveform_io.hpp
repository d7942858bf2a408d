#pragma once

#include <filesystem>
#include <string>

#include "rofsim/sample_buffer.hpp"

namespace rofsim {

/// Writes `buf` as little-endian interleaved float64 I/Q (sample-major, modes
/// interleaved within a sample) plus a `<path>.hdr` key=value sidecar.
void export_waveform(const std::filesystem::path& path, const Buffer& buf);

/// Reads a waveform written by export_waveform.
Buffer import_waveform(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& data_path);

/// Writes `contents` to a temporary sibling then renames it over `path`.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace rofsim
