#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "minrec/core.hpp"

namespace minrec {

// Supported rating file formats:
//   movielens_csv  header `userId,movieId,rating,timestamp`, comma separated
//   tsv            headerless `user<TAB>item<TAB>rating<TAB>timestamp`
//   jsonl          one object per line: {"user": "1", "item": "32",
//                  "rating": 3.5, "timestamp": 851866250}; ids may be
//                  JSON strings or integers
enum class DataFormat { movielens_csv, tsv, jsonl };

inline std::string to_string(DataFormat f) {
  switch (f) {
    case DataFormat::movielens_csv: return "movielens_csv";
    case DataFormat::tsv: return "tsv";
    case DataFormat::jsonl: return "jsonl";
  }
  throw ConfigError("unknown data format");
}

inline DataFormat parse_format(std::string_view s) {
  if (s == "movielens_csv" || s == "csv") return DataFormat::movielens_csv;
  if (s == "tsv") return DataFormat::tsv;
  if (s == "jsonl") return DataFormat::jsonl;
  throw ConfigError("unknown data format: " + std::string(s));
}

struct Rating {
  UserId user;
  ItemId item;
  double value{};
  std::int64_t timestamp{};

  bool operator==(const Rating&) const = default;
};

// Immutable collection of ratings plus optional item -> genre metadata.
// Construction validates the scale, resolves duplicate (user, item) pairs by
// keeping the latest timestamp (last occurrence on ties), and drops genre
// entries for unknown items; both counts are kept for reporting.
class RatingsDataset {
 public:
  RatingsDataset(std::vector<Rating> ratings, RatingScale scale,
                 GenreMap genres = {}, bool has_genres = false)
      : scale_(scale), has_genres_(has_genres || !genres.empty()) {
    if (ratings.empty()) throw DataError("dataset has no ratings");
    std::stable_sort(ratings.begin(), ratings.end(),
                     [](const Rating& a, const Rating& b) {
                       return std::tie(a.user, a.item) < std::tie(b.user, b.item);
                     });
    for (Rating& r : ratings) {
      if (!scale_.contains(r.value)) {
        throw DataError("rating " + format_value(r.value) + " for (" + r.user +
                        ", " + r.item + ") is outside the scale [" +
                        format_value(scale_.min_value) + ", " +
                        format_value(scale_.max_value) + "]");
      }
      auto& profile = profiles_[r.user];
      auto [it, inserted] = profile.try_emplace(r.item, RatedItem{r.value, r.timestamp});
      if (!inserted) {
        ++duplicate_count_;
        if (r.timestamp >= it->second.timestamp) it->second = {r.value, r.timestamp};
      }
    }
    for (auto& [item, labels] : genres) {
      std::sort(labels.begin(), labels.end());
      labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
      if (rated_items_.empty()) index_items();
      if (rated_items_.count(item)) {
        genres_.emplace(item, std::move(labels));
      } else {
        ++dropped_genre_count_;
      }
    }
  }

  const RatingScale& scale() const { return scale_; }
  const std::map<UserId, Profile>& profiles() const { return profiles_; }
  const GenreMap& genres() const { return genres_; }
  bool has_genres() const { return has_genres_; }
  std::size_t duplicate_count() const { return duplicate_count_; }
  std::size_t dropped_genre_count() const { return dropped_genre_count_; }

  std::size_t num_users() const { return profiles_.size(); }

  std::size_t num_ratings() const {
    std::size_t n = 0;
    for (const auto& [_, p] : profiles_) n += p.size();
    return n;
  }

  std::vector<UserId> user_ids() const {
    std::vector<UserId> ids;
    ids.reserve(profiles_.size());
    for (const auto& [u, _] : profiles_) ids.push_back(u);
    return ids;
  }

  // Ratings in canonical (user, item) order.
  std::vector<Rating> ratings() const {
    std::vector<Rating> out;
    for (const auto& [u, profile] : profiles_)
      for (const auto& [i, r] : profile) out.push_back({u, i, r.value, r.timestamp});
    return out;
  }

  bool operator==(const RatingsDataset& other) const {
    return scale_ == other.scale_ && profiles_ == other.profiles_ &&
           genres_ == other.genres_;
  }

  static std::string format_value(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
  }

 private:
  void index_items() {
    for (const auto& [_, p] : profiles_)
      for (const auto& [i, __] : p) rated_items_.insert(i);
  }

  RatingScale scale_;
  std::map<UserId, Profile> profiles_;
  GenreMap genres_;
  bool has_genres_{false};
  std::set<ItemId> rated_items_;
  std::size_t duplicate_count_{0};
  std::size_t dropped_genre_count_{0};
};

namespace detail {

// RFC 4180 field splitting for a single line (quoted fields, doubled quote
// escapes; embedded newlines are rejected upstream by line-based reading).
inline std::vector<std::string> split_csv_line(const std::string& line, char sep = ',') {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == sep) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
  double v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError("line " + std::to_string(line_no) + ": bad number '" +
                    std::string(s) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view s, std::size_t line_no) {
  std::int64_t v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError("line " + std::to_string(line_no) + ": bad integer '" +
                    std::string(s) + "'");
  return v;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::string json_id(const nlohmann::json& j, const char* key, std::size_t line_no) {
  if (!j.contains(key))
    throw DataError("line " + std::to_string(line_no) + ": missing key '" + key + "'");
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw DataError("line " + std::to_string(line_no) + ": key '" + key +
                  "' must be a string or integer");
}

}  // namespace detail

// Loads a ratings file. Duplicate (user, item) pairs keep the latest
// timestamp; the retained dataset reports how many were resolved.
inline RatingsDataset load_ratings(const std::string& path, DataFormat format,
                                   RatingScale scale = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ratings file: " + path);

  std::vector<Rating> ratings;
  std::string line;
  std::size_t line_no = 0;

  if (format == DataFormat::movielens_csv) {
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    ++line_no;
    detail::strip_cr(line);
    if (line != "userId,movieId,rating,timestamp")
      throw DataError(path + ": line 1: expected header "
                      "'userId,movieId,rating,timestamp', got '" + line + "'");
  }

  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    switch (format) {
      case DataFormat::movielens_csv:
      case DataFormat::tsv: {
        const char sep = format == DataFormat::tsv ? '\t' : ',';
        auto f = detail::split_csv_line(line, sep);
        if (f.size() != 4)
          throw DataError(path + ": line " + std::to_string(line_no) +
                          ": expected 4 fields, got " + std::to_string(f.size()));
        const double value = detail::parse_double(f[2], line_no);
        if (!scale.contains(value))
          throw DataError(path + ": line " + std::to_string(line_no) + ": rating " +
                          RatingsDataset::format_value(value) +
                          " is outside the scale [" +
                          RatingsDataset::format_value(scale.min_value) + ", " +
                          RatingsDataset::format_value(scale.max_value) + "]");
        ratings.push_back({f[0], f[1], value, detail::parse_int(f[3], line_no)});
        break;
      }
      case DataFormat::jsonl: {
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
          throw DataError(path + ": line " + std::to_string(line_no) +
                          ": invalid JSON");
        Rating r;
        r.user = detail::json_id(j, "user", line_no);
        r.item = detail::json_id(j, "item", line_no);
        if (!j.contains("rating") || !j.at("rating").is_number())
          throw DataError(path + ": line " + std::to_string(line_no) +
                          ": missing numeric 'rating'");
        r.value = j.at("rating").get<double>();
        if (!scale.contains(r.value))
          throw DataError(path + ": line " + std::to_string(line_no) + ": rating " +
                          RatingsDataset::format_value(r.value) +
                          " is outside the scale [" +
                          RatingsDataset::format_value(scale.min_value) + ", " +
                          RatingsDataset::format_value(scale.max_value) + "]");
        r.timestamp = j.value("timestamp", std::int64_t{0});
        ratings.push_back(std::move(r));
        break;
      }
    }
  }
  if (ratings.empty()) throw DataError(path + ": empty file");
  try {
    return RatingsDataset(std::move(ratings), scale);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

// Loads a MovieLens-style genre file: `movieId,title,genres` with
// '|'-separated genre labels; "(no genres listed)" means none.
inline GenreMap load_genres(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open genre file: " + path);
  GenreMap genres;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("movieId,", 0) == 0) continue;  // header
    }
    auto f = detail::split_csv_line(line);
    if (f.size() < 3)
      throw DataError(path + ": line " + std::to_string(line_no) +
                      ": expected 3 fields, got " + std::to_string(f.size()));
    std::vector<std::string> labels;
    std::stringstream ss(f.back());
    std::string label;
    while (std::getline(ss, label, '|'))
      if (!label.empty() && label != "(no genres listed)") labels.push_back(label);
    genres[f[0]] = std::move(labels);
  }
  if (genres.empty()) throw DataError(path + ": empty genre file");
  return genres;
}

inline RatingsDataset with_genres(const RatingsDataset& ds, GenreMap genres) {
  return RatingsDataset(ds.ratings(), ds.scale(), std::move(genres), true);
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

// Writes ratings in canonical (user, item) order; reloading yields an equal
// dataset.
inline void save_ratings(const RatingsDataset& ds, const std::string& path,
                         DataFormat format) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write ratings file: " + path);
  if (format == DataFormat::movielens_csv) out << "userId,movieId,rating,timestamp\n";
  for (const Rating& r : ds.ratings()) {
    switch (format) {
      case DataFormat::movielens_csv:
        out << detail::csv_escape(r.user) << ',' << detail::csv_escape(r.item)
            << ',' << RatingsDataset::format_value(r.value) << ','
            << r.timestamp << '\n';
        break;
      case DataFormat::tsv:
        out << r.user << '\t' << r.item << '\t'
            << RatingsDataset::format_value(r.value) << '\t' << r.timestamp << '\n';
        break;
      case DataFormat::jsonl: {
        nlohmann::json j{{"user", r.user},
                         {"item", r.item},
                         {"rating", r.value},
                         {"timestamp", r.timestamp}};
        out << j.dump() << '\n';
        break;
      }
    }
  }
}

inline void save_genres(const RatingsDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write genre file: " + path);
  out << "movieId,title,genres\n";
  for (const auto& [item, labels] : ds.genres()) {
    std::string joined;
    for (const auto& l : labels) {
      if (!joined.empty()) joined += '|';
      joined += l;
    }
    if (joined.empty()) joined = "(no genres listed)";
    out << detail::csv_escape(item) << ',' << detail::csv_escape("Item " + item)
        << ',' << detail::csv_escape(joined) << '\n';
  }
}

// Keeps only users with at least `min_ratings` ratings.
inline RatingsDataset filter_min_profile(const RatingsDataset& ds,
                                         std::size_t min_ratings) {
  if (min_ratings < 1) throw ConfigError("min_ratings must be >= 1");
  std::vector<Rating> kept;
  for (const auto& [u, profile] : ds.profiles()) {
    if (profile.size() < min_ratings) continue;
    for (const auto& [i, r] : profile) kept.push_back({u, i, r.value, r.timestamp});
  }
  if (kept.empty())
    throw DataError("no users with at least " + std::to_string(min_ratings) +
                    " ratings; lower the threshold");
  return RatingsDataset(std::move(kept), ds.scale(), ds.genres(), ds.has_genres());
}

// Deterministic subsample to at most `cap` users (0 = no cap).
inline RatingsDataset cap_users(const RatingsDataset& ds, std::size_t cap,
                                std::uint64_t seed) {
  if (cap == 0 || ds.num_users() <= cap) return ds;
  std::vector<UserId> ids = ds.user_ids();  // sorted
  std::mt19937_64 rng(mix_seed(seed, fnv1a64("user_cap")));
  fisher_yates(ids, rng);
  ids.resize(cap);
  std::set<UserId> keep(ids.begin(), ids.end());
  std::vector<Rating> kept;
  for (const auto& [u, profile] : ds.profiles()) {
    if (!keep.count(u)) continue;
    for (const auto& [i, r] : profile) kept.push_back({u, i, r.value, r.timestamp});
  }
  return RatingsDataset(std::move(kept), ds.scale(), ds.genres(), ds.has_genres());
}

namespace detail {

// floor(fraction * count), clamped so both sides keep at least one element.
inline std::size_t split_size(std::size_t count, double fraction) {
  auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count)));
  if (n < 1) n = 1;
  if (n > count - 1) n = count - 1;
  return n;
}

}  // namespace detail

struct UserPartition {
  std::vector<UserId> system_users;      // sorted
  std::vector<UserId> minimizing_users;  // sorted
};

// Randomly assigns users to the system or minimizing group. The assignment
// is a pure function of (seed, sorted user ids): the sorted id list is
// shuffled with a seeded mt19937_64 and the first floor(fraction * N) users
// (at least 1, at most N-1) become system users.
inline UserPartition split_users(const RatingsDataset& ds, double system_fraction,
                                 std::uint64_t seed) {
  if (system_fraction <= 0.0 || system_fraction >= 1.0)
    throw ConfigError("system_fraction must be in (0, 1)");
  std::vector<UserId> ids = ds.user_ids();
  if (ids.size() < 2) throw DataError("need at least 2 users to split");
  std::mt19937_64 rng(mix_seed(seed, fnv1a64("user_split")));
  fisher_yates(ids, rng);
  const std::size_t n_system = detail::split_size(ids.size(), system_fraction);
  UserPartition part;
  part.system_users.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_system));
  part.minimizing_users.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_system), ids.end());
  std::sort(part.system_users.begin(), part.system_users.end());
  std::sort(part.minimizing_users.begin(), part.minimizing_users.end());
  return part;
}

// Splits one user's profile into candidate and test pools, deterministic in
// (seed, user id, sorted item ids). floor(fraction * size) items (at least
// 1, leaving at least 1 for the test pool) go to the candidate pool.
inline std::pair<Profile, Profile> split_candidate_test(const Profile& profile,
                                                        const UserId& user,
                                                        double candidate_fraction,
                                                        std::uint64_t seed) {
  if (candidate_fraction <= 0.0 || candidate_fraction >= 1.0)
    throw ConfigError("candidate_fraction must be in (0, 1)");
  if (profile.empty()) throw DataError("user " + user + " has an empty profile");
  if (profile.size() < 2)
    throw DataError("user " + user + " has a single rating; cannot form candidate and test pools");
  std::vector<ItemId> items = profile_items(profile);  // sorted
  std::mt19937_64 rng(mix_seed(seed, fnv1a64(user)));
  fisher_yates(items, rng);
  const std::size_t n_candidate = detail::split_size(items.size(), candidate_fraction);
  Profile candidate, test;
  for (std::size_t i = 0; i < items.size(); ++i) {
    (i < n_candidate ? candidate : test).emplace(items[i], profile.at(items[i]));
  }
  return {std::move(candidate), std::move(test)};
}

struct UserSplit {
  Profile candidate;
  Profile test;
};

// Full experimental split: system users with full profiles, minimizing
// users with candidate/test pools. Immutable after construction.
struct ExperimentSplit {
  std::map<UserId, Profile> system_users;
  std::map<UserId, UserSplit> minimizing_users;
  std::uint64_t seed{};
  double system_fraction{};
  double candidate_fraction{};
};

inline ExperimentSplit make_split(const RatingsDataset& ds, double system_fraction,
                                  double candidate_fraction, std::uint64_t seed) {
  const UserPartition part = split_users(ds, system_fraction, seed);
  ExperimentSplit split;
  split.seed = seed;
  split.system_fraction = system_fraction;
  split.candidate_fraction = candidate_fraction;
  for (const UserId& u : part.system_users) split.system_users[u] = ds.profiles().at(u);
  for (const UserId& u : part.minimizing_users) {
    auto [candidate, test] =
        split_candidate_test(ds.profiles().at(u), u, candidate_fraction, seed);
    split.minimizing_users[u] = UserSplit{std::move(candidate), std::move(test)};
  }
  return split;
}

}  // namespace minrec
