#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "minrec/dataset.hpp"

namespace testutil {

// Fresh directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("minrec_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Compact profile builder: {{item, value, timestamp}, ...}
struct Rated {
  std::string item;
  double value;
  std::int64_t timestamp = 0;
};

inline minrec::Profile make_profile(const std::vector<Rated>& items) {
  minrec::Profile p;
  for (const auto& r : items) p[r.item] = {r.value, r.timestamp};
  return p;
}

// Random dataset on the default 0.5..5.0 scale.
inline minrec::RatingsDataset random_dataset(std::size_t users, std::size_t items,
                                             std::size_t ratings_per_user,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<minrec::Rating> ratings;
  for (std::size_t u = 0; u < users; ++u) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < items; ++i) ids.push_back("i" + std::to_string(i));
    minrec::fisher_yates(ids, rng);
    for (std::size_t r = 0; r < std::min(ratings_per_user, items); ++r) {
      const double value = 0.5 + 0.5 * static_cast<double>(minrec::uniform_below(rng, 10));
      ratings.push_back({"u" + std::to_string(u), ids[r], value,
                         static_cast<std::int64_t>(minrec::uniform_below(rng, 1000000))});
    }
  }
  return minrec::RatingsDataset(std::move(ratings), {0.5, 5.0, 0.5});
}

}  // namespace testutil
