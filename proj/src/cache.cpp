#include "martinbench/cache.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>

#include "martinbench/extension.hpp"

namespace martinbench {

namespace {

std::mutex g_dir_mutex;
std::optional<std::string> g_dir;

constexpr char kMagic[8] = {'M', 'B', 'G', 'R', 'E', 'E', 'N', '1'};

std::string path_for(const std::string& dir, std::uint64_t key) {
  char name[40];
  std::snprintf(name, sizeof name, "green-%016llx.bin", static_cast<unsigned long long>(key));
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

void set_cache_dir(const std::string& dir) {
  std::lock_guard lock(g_dir_mutex);
  g_dir = dir;
}

std::string cache_dir() {
  std::lock_guard lock(g_dir_mutex);
  if (g_dir) return *g_dir;
  const char* env = std::getenv("MARTINBENCH_CACHE");
  return env ? std::string(env) : std::string();
}

std::optional<GreenResult> cache_load(std::uint64_t key) {
  std::string dir = cache_dir();
  if (dir.empty()) return std::nullopt;
  std::ifstream in(path_for(dir, key), std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  std::uint64_t stored_key = 0, count = 0;
  GreenResult g;
  std::int32_t iters = 0, acc = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&stored_key), 8);
  in.read(reinterpret_cast<char*>(&g.r), 8);
  in.read(reinterpret_cast<char*>(&iters), 4);
  in.read(reinterpret_cast<char*>(&acc), 4);
  double c[6];
  in.read(reinterpret_cast<char*>(c), sizeof c);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0 || stored_key != key || count > (1ull << 32)) {
    return std::nullopt;
  }
  g.values.resize(count);
  in.read(reinterpret_cast<char*>(g.values.data()), static_cast<std::streamsize>(count * 8));
  if (!in) return std::nullopt;
  g.cert.iterations = iters;
  g.cert.accelerated = acc != 0;
  g.cert.last_increment = c[0];
  g.cert.contraction = c[1];
  g.cert.series_tail = c[2];
  g.cert.accelerated_change = c[3];
  g.cert.exit_bound = c[4];
  g.cert.exit_rate = c[5];
  return g;
}

void cache_store(std::uint64_t key, const GreenResult& g) {
  std::string dir = cache_dir();
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::string final_path = path_for(dir, key);
  std::string tmp = final_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return;
    std::int32_t iters = g.cert.iterations, acc = g.cert.accelerated ? 1 : 0;
    std::uint64_t count = g.values.size();
    double c[6] = {g.cert.last_increment,     g.cert.contraction, g.cert.series_tail,
                   g.cert.accelerated_change, g.cert.exit_bound,  g.cert.exit_rate};
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&key), 8);
    out.write(reinterpret_cast<const char*>(&g.r), 8);
    out.write(reinterpret_cast<const char*>(&iters), 4);
    out.write(reinterpret_cast<const char*>(&acc), 4);
    out.write(reinterpret_cast<const char*>(c), sizeof c);
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(g.values.data()), static_cast<std::streamsize>(count * 8));
  }
  std::filesystem::rename(tmp, final_path, ec);
}

}  // namespace martinbench
