#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_set>
#include <vector>

#include "pubot/common.hpp"

namespace pubot {

struct Hit {
  std::string visitor_id;
  double timestamp = 0.0;  // epoch seconds
  std::string url;
  std::string user_agent;
  std::string ip;
  bool purchase = false;
};

struct HitLog {
  std::vector<Hit> hits;
  std::size_t skipped = 0;  // malformed lines
};

// One JSON object per line:
//   {"visitor_id": str, "timestamp": number, "url": str, "user_agent": str,
//    "ip": str, "purchase": bool}
// Lines that are not JSON objects, lack a visitor id, or carry a missing or
// non-finite timestamp are skipped and counted.
HitLog read_hit_log(std::istream& in);
HitLog read_hit_log(const std::filesystem::path& path);

enum class UserAgentClass { desktop_browser, mobile_browser, script, other };

UserAgentClass classify_user_agent(std::string_view user_agent);

struct SessionFeatures {
  double session_length_seconds = 0.0;
  double hit_count = 0.0;
  double hits_per_second = 0.0;  // 0 when the session has zero length
  double mean_gap_seconds = 0.0;
  double min_gap_seconds = 0.0;
  double unique_url_count = 0.0;
  double hour_of_day = 0.0;  // UTC hour of the first hit
  UserAgentClass user_agent = UserAgentClass::other;

  // Numeric vector in the order of session_feature_names(); the user-agent
  // class is one-hot encoded.
  std::vector<double> to_vector() const;
};

const std::vector<std::string>& session_feature_names();

struct Session {
  std::string visitor_id;
  std::string ip;  // of the first hit
  double start = 0.0;
  double end = 0.0;
  bool purchase = false;
  std::vector<Hit> hits;  // time-ordered
  SessionFeatures features;
};

inline constexpr double kSessionTimeoutSeconds = 1800.0;

struct SessionizeOptions {
  double timeout_seconds = kSessionTimeoutSeconds;
  // Hits for which this returns true are dropped (e.g. self-declared crawlers).
  std::function<bool(const Hit&)> drop_hit;
  std::size_t workers = 1;
};

// Sorts each visitor's hits by time and starts a new session whenever the gap
// to the previous hit is >= the timeout. Output is ordered by (visitor, start).
std::vector<Session> sessionize(std::vector<Hit> hits, const SessionizeOptions& options = {});

// Matches user agents that announce themselves as crawlers.
bool is_declared_bot(const Hit& hit);

SessionFeatures compute_features(const std::vector<Hit>& hits);

class CidrBlock {
 public:
  // "a.b.c.d/n" or an IPv6 prefix; a bare address means a full-length prefix.
  // Throws ConfigError on malformed input.
  static CidrBlock parse(std::string_view text);

  bool contains(std::string_view ip) const;

 private:
  bool v6_ = false;
  std::array<std::uint8_t, 16> bytes_{};
  int prefix_ = 0;
};

// One block per line; blank lines and '#' comments are ignored.
std::vector<CidrBlock> read_cidr_list(const std::filesystem::path& path);

std::unordered_set<std::string> purchaser_visitors(const std::vector<Session>& sessions);

struct SessionTags {
  std::vector<std::uint8_t> s;              // 1 = session of a known purchaser
  std::vector<std::uint8_t> eval_negative;  // 1 = cloud-hosted origin; evaluation only
  std::size_t conflicts = 0;                // both purchaser and cloud; resolved to s = 1
};

SessionTags tag_pu_labels(const std::vector<Session>& sessions,
                          const std::unordered_set<std::string>& purchasers,
                          const std::vector<CidrBlock>& cloud_ranges);

// Flat, model-ready view of sessions as read back from a session file.
struct SessionTable {
  std::vector<std::string> session_ids;
  std::vector<std::string> visitor_ids;
  Matrix features;
  std::vector<std::uint8_t> s;
  std::vector<std::uint8_t> eval_negative;

  std::size_t rows() const { return session_ids.size(); }
};

SessionTable make_session_table(const std::vector<Session>& sessions, const SessionTags& tags);

// CSV: session_id,visitor_id,<feature names>,s,eval_negative
void write_session_table(const std::filesystem::path& path, const SessionTable& table);
SessionTable read_session_table(const std::filesystem::path& path);

}  // namespace pubot
