#include "funcodec/batch.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "funcodec/error.hpp"
#include "funcodec/wav.hpp"

namespace funcodec {

namespace fs = std::filesystem;

void parallel_for(size_t count, size_t workers, const std::function<void(size_t)>& fn) {
  if (count == 0) return;
  workers = std::clamp<size_t>(workers, 1, count);
  if (workers == 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto run = [&] {
    for (size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::vector<fs::path> collect_inputs(const std::vector<fs::path>& paths, const std::string& extension) {
  if (paths.empty()) throw ConfigError("no input paths given");
  std::vector<fs::path> files;
  for (const auto& p : paths) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) files.push_back(entry.path());
      }
    } else if (fs::is_regular_file(p, ec)) {
      files.push_back(p);
    } else {
      throw ConfigError("input not found: " + p.string());
    }
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  std::map<std::string, fs::path> stems;
  for (const auto& f : files) {
    auto [it, inserted] = stems.emplace(f.stem().string(), f);
    if (!inserted) {
      throw ConfigError("inputs " + it->second.string() + " and " + f.string() + " share the output name " +
                        it->first);
    }
  }
  return files;
}

size_t BatchReport::failures() const {
  return static_cast<size_t>(std::count_if(files.begin(), files.end(), [](const auto& f) { return f.error; }));
}

int BatchReport::exit_code() const { return failures() == 0 ? 0 : 1; }

nlohmann::json BatchReport::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["failures"] = failures();
  auto& list = j["files"] = nlohmann::json::array();
  for (const auto& f : files) {
    nlohmann::json e = f.info;
    e["input"] = f.input.string();
    if (f.error) {
      e["error"] = *f.error;
    } else {
      e["output"] = f.output.string();
    }
    list.push_back(std::move(e));
  }
  return j;
}

std::vector<uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("write failed: " + path.string());
}

namespace {

BatchReport run_batch(const std::string& command, const std::vector<fs::path>& inputs, const fs::path& out_dir,
                      const std::string& out_ext, size_t workers,
                      const std::function<nlohmann::json(const fs::path&, const fs::path&)>& job) {
  fs::create_directories(out_dir);
  BatchReport report;
  report.command = command;
  report.files.resize(inputs.size());
  parallel_for(inputs.size(), workers, [&](size_t i) {
    auto& f = report.files[i];
    f.input = inputs[i];
    f.output = out_dir / (inputs[i].stem().string() + out_ext);
    try {
      f.info = job(f.input, f.output);
    } catch (const std::exception& e) {
      f.error = e.what();
    }
  });
  return report;
}

}  // namespace

BatchReport encode_files(const Codec& codec, const std::vector<fs::path>& inputs, const fs::path& out_dir,
                         size_t n_q, size_t workers) {
  return run_batch("encode", inputs, out_dir, ".fcs", workers, [&](const fs::path& in, const fs::path& out) {
    const auto encoded = codec.encode(read_wav(in), n_q);
    write_bytes(out, encoded.bytes);
    const auto& h = encoded.header;
    const double tkr = bitstream::compute_tkr(static_cast<int>(h.sample_rate), h.stride, h.n_q);
    return nlohmann::json{{"samples", h.num_samples},
                          {"frames", h.frames},
                          {"n_q", h.n_q},
                          {"bytes", encoded.bytes.size()},
                          {"gain", h.gain},
                          {"tkr", tkr},
                          {"bps", bitstream::bits_per_second(tkr, h.codebook_size)}};
  });
}

BatchReport decode_files(const Codec& codec, const std::vector<fs::path>& inputs, const fs::path& out_dir,
                         std::optional<size_t> n_q, size_t workers) {
  return run_batch("decode", inputs, out_dir, ".wav", workers, [&](const fs::path& in, const fs::path& out) {
    const auto audio = codec.decode(read_bytes(in), n_q);
    write_wav(out, audio);
    return nlohmann::json{{"samples", audio.size()}, {"sample_rate", audio.sample_rate}};
  });
}

}  // namespace funcodec
