#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "funcodec/codec.hpp"
#include "json.hpp"

namespace funcodec {

// Runs fn(0..count-1) on up to `workers` threads. The first exception thrown
// by any call is rethrown after all threads join.
void parallel_for(size_t count, size_t workers, const std::function<void(size_t)>& fn);

// Expands files and directories into a sorted list of files. Directories
// contribute their entries ending in `extension`. Missing paths and two inputs
// sharing a stem (which would collide in the output directory) raise ConfigError.
std::vector<std::filesystem::path> collect_inputs(const std::vector<std::filesystem::path>& paths,
                                                  const std::string& extension);

struct FileOutcome {
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::string> error;
  nlohmann::json info = nlohmann::json::object();
};

struct BatchReport {
  std::string command;
  std::vector<FileOutcome> files;

  size_t failures() const;
  // 0 when every file succeeded, 1 otherwise.
  int exit_code() const;
  nlohmann::json to_json() const;
};

// Each input is handled independently; one bad file does not stop the rest.
// Output is byte-identical for any worker count.
BatchReport encode_files(const Codec& codec, const std::vector<std::filesystem::path>& inputs,
                         const std::filesystem::path& out_dir, size_t n_q, size_t workers);
BatchReport decode_files(const Codec& codec, const std::vector<std::filesystem::path>& inputs,
                         const std::filesystem::path& out_dir, std::optional<size_t> n_q, size_t workers);

std::vector<uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const uint8_t> bytes);

}  // namespace funcodec
