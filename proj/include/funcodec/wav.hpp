#pragma once

#include <filesystem>

#include "funcodec/audio.hpp"

namespace funcodec {

// Reads 16-bit PCM WAV. Multi-channel input is downmixed by averaging.
// Throws FormatError on anything else.
AudioBuffer read_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono, clipping to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

}  // namespace funcodec
