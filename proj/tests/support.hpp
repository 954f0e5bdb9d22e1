#pragma once

// Fixture generators and brute-force reference implementations shared by the
// unit and acceptance tests. Nothing here calls into the code under test
// except for plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pubot/dataset.hpp"
#include "pubot/pu_models.hpp"
#include "pubot/sessionizer.hpp"

namespace testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("pubot-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Records shaped like the intrusion-detection files: a protocol column, a
// service column and `numeric` numeric columns, then label and difficulty.
// Legitimate and attack rows differ in distribution but overlap.
inline std::vector<pubot::RawRecord> synthetic_records(std::size_t n, std::uint64_t seed,
                                                       std::size_t numeric = 6,
                                                       double positive_share = 0.55) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution is_normal(positive_share);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::vector<std::string> protocols{"tcp", "udp", "icmp"};
  const std::vector<std::string> services{"http", "ftp", "smtp", "private", "domain"};
  const std::vector<std::string> attacks{"neptune", "smurf", "satan", "portsweep"};

  std::vector<pubot::RawRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool normal = is_normal(rng);
    pubot::RawRecord r;
    const std::size_t proto = normal ? (rng() % 10 < 8 ? 0 : 1) : rng() % 3;
    const std::size_t service = normal ? rng() % 3 : 2 + rng() % 3;
    r.attributes.push_back(std::to_string(static_cast<int>(rng() % 5)));
    r.attributes.push_back(protocols[proto]);
    r.attributes.push_back(services[service]);
    for (std::size_t k = 0; k < numeric; ++k) {
      const double shift = normal ? 0.0 : (k % 2 ? 1.2 : -0.9);
      std::ostringstream cell;
      cell << std::round((shift + noise(rng)) * 1000.0) / 1000.0;
      r.attributes.push_back(cell.str());
    }
    r.class_label = normal ? "normal" : attacks[rng() % attacks.size()];
    r.difficulty = static_cast<int>(rng() % 22);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string to_csv(const std::vector<pubot::RawRecord>& records) {
  std::string s;
  for (const auto& r : records) {
    for (const auto& a : r.attributes) s += a + ",";
    s += r.class_label;
    if (r.difficulty) s += "," + std::to_string(*r.difficulty);
    s += "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Reference implementations

// Mann-Whitney by counting every (positive, negative) pair.
inline double pairwise_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Exhaustive nearest-unlabeled scan, ties to the lower row index.
inline std::vector<std::size_t> brute_force_mining(const pubot::PUSet& set, std::size_t per_positive) {
  std::vector<std::uint8_t> chosen(set.rows(), 0);
  for (std::size_t p = 0; p < set.rows(); ++p) {
    if (!set.s[p]) continue;
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t u = 0; u < set.rows(); ++u) {
      if (set.s[u]) continue;
      double acc = 0.0;
      for (std::size_t k = 0; k < set.x.cols(); ++k) {
        const double diff = set.x(p, k) - set.x(u, k);
        acc += diff * diff;
      }
      d.emplace_back(acc, u);
    }
    std::sort(d.begin(), d.end());
    for (std::size_t k = 0; k < std::min(per_positive, d.size()); ++k) chosen[d[k].second] = 1;
  }
  std::vector<std::size_t> ids;
  for (std::size_t r = 0; r < set.rows(); ++r) {
    if (chosen[r]) ids.push_back(r);
  }
  return ids;
}

// Groups hits per visitor with a plain sort-and-scan, returning for each
// visitor the list of session sizes in time order.
inline std::map<std::string, std::vector<std::size_t>> reference_sessions(
    std::vector<pubot::Hit> hits, double timeout) {
  std::map<std::string, std::vector<double>> times;
  for (const auto& h : hits) times[h.visitor_id].push_back(h.timestamp);
  std::map<std::string, std::vector<std::size_t>> out;
  for (auto& [visitor, ts] : times) {
    std::sort(ts.begin(), ts.end());
    std::size_t current = 1;
    for (std::size_t i = 1; i < ts.size(); ++i) {
      if (ts[i] - ts[i - 1] >= timeout) {
        out[visitor].push_back(current);
        current = 0;
      }
      ++current;
    }
    out[visitor].push_back(current);
  }
  return out;
}

// Random hit log: bursts of activity separated by idle periods that are
// sometimes just below, at, or above the session timeout.
inline std::vector<pubot::Hit> synthetic_hits(std::size_t n, std::size_t visitors,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> agents{
      "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 Chrome/120.0",
      "Mozilla/5.0 (iPhone; CPU iPhone OS 17_0 like Mac OS X) Mobile/15E148 Safari/604.1",
      "python-requests/2.31", "curl/8.4.0", "Googlebot/2.1 (+http://www.google.com/bot.html)"};
  const std::vector<double> idle{1799.0, 1800.0, 1800.5, 3600.0, 60.0, 5.0};
  std::vector<double> clock(visitors, 1.7e9);
  std::vector<pubot::Hit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t v = rng() % visitors;
    if (rng() % 12 == 0) {
      clock[v] += idle[rng() % idle.size()];
    } else {
      clock[v] += static_cast<double>(rng() % 300);
    }
    pubot::Hit h;
    h.visitor_id = "visitor-" + std::to_string(v);
    h.timestamp = clock[v];
    h.url = "/page/" + std::to_string(rng() % 40);
    h.user_agent = agents[v % agents.size()];
    h.ip = "10.0." + std::to_string(v % 256) + "." + std::to_string(1 + rng() % 250);
    h.purchase = rng() % 200 == 0;
    hits.push_back(std::move(h));
  }
  std::shuffle(hits.begin(), hits.end(), rng);
  return hits;
}

// Two Gaussian clouds in d dimensions, label 1 centered at +shift.
inline void gaussian_blobs(std::size_t n, std::size_t d, double shift, std::uint64_t seed,
                           pubot::Matrix& x, std::vector<std::uint8_t>& y) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  x = pubot::Matrix(n, d);
  y.assign(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    y[r] = static_cast<std::uint8_t>(r % 2);
    for (std::size_t k = 0; k < d; ++k) x(r, k) = noise(rng) + (y[r] ? shift : -shift);
  }
}

}  // namespace testing

namespace testing {

// Storefront traffic: browsing humans (some of whom purchase) and scripted
// bots from cloud ranges. Humans read pages for tens of seconds, bots fire
// requests every second or two over many distinct urls.
struct StoreLog {
  std::vector<pubot::Hit> hits;
  std::vector<std::string> cloud_ranges{"52.0.0.0/8", "2600:1f00::/24"};
};

inline StoreLog synthetic_store_log(std::size_t humans, std::size_t bots, double purchaser_share,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  StoreLog log;
  auto add_sessions = [&](const std::string& visitor, bool human, bool purchaser, std::size_t idx) {
    double t = 1.7e9 + static_cast<double>(rng() % 86400);
    const std::size_t n_sessions = 1 + rng() % 3;
    for (std::size_t s = 0; s < n_sessions; ++s) {
      const std::size_t n_hits = human ? 3 + rng() % 15 : 20 + rng() % 80;
      for (std::size_t h = 0; h < n_hits; ++h) {
        pubot::Hit hit;
        hit.visitor_id = visitor;
        hit.timestamp = t;
        hit.url = human ? "/item/" + std::to_string(rng() % 12) : "/item/" + std::to_string(rng() % 5000);
        hit.user_agent = human ? (idx % 3 ? "Mozilla/5.0 (Windows NT 10.0) Chrome/120.0"
                                          : "Mozilla/5.0 (Linux; Android 14) Mobile Safari/537.36")
                               : (idx % 2 ? "python-requests/2.31" : "Mozilla/5.0 HeadlessChrome/120.0");
        hit.ip = human ? "81.2." + std::to_string(idx % 250) + ".7"
                       : (idx % 2 ? "52.10." + std::to_string(idx % 250) + ".3"
                                  : "2600:1f00::" + std::to_string(idx % 999));
        hit.purchase = purchaser && h + 1 == n_hits && s == 0;
        log.hits.push_back(std::move(hit));
        t += human ? 10.0 + 80.0 * u(rng) : 0.5 + 1.5 * u(rng);
      }
      t += 3600.0 + static_cast<double>(rng() % 40000);
    }
  };
  for (std::size_t i = 0; i < humans; ++i) {
    add_sessions("h" + std::to_string(i), true, u(rng) < purchaser_share, i);
  }
  for (std::size_t i = 0; i < bots; ++i) add_sessions("b" + std::to_string(i), false, false, i);
  std::shuffle(log.hits.begin(), log.hits.end(), rng);
  return log;
}

}  // namespace testing
