#include "pubot/sessionizer.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace pubot {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

bool contains_any(std::string_view haystack, std::initializer_list<std::string_view> needles) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](auto n) { return haystack.find(n) != std::string_view::npos; });
}

}  // namespace

HitLog read_hit_log(std::istream& in) {
  HitLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (!j.is_object()) {
      ++log.skipped;
      continue;
    }
    auto ts = j.find("timestamp");
    auto vid = j.find("visitor_id");
    if (ts == j.end() || !ts->is_number() || !std::isfinite(ts->get<double>()) ||
        vid == j.end() || !vid->is_string() || vid->get<std::string>().empty()) {
      ++log.skipped;
      continue;
    }
    Hit hit;
    hit.visitor_id = vid->get<std::string>();
    hit.timestamp = ts->get<double>();
    hit.url = j.value("url", "");
    hit.user_agent = j.value("user_agent", "");
    hit.ip = j.value("ip", "");
    hit.purchase = j.value("purchase", false);
    log.hits.push_back(std::move(hit));
  }
  return log;
}

HitLog read_hit_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return read_hit_log(in);
}

UserAgentClass classify_user_agent(std::string_view user_agent) {
  const auto ua = lowercase(user_agent);
  if (ua.empty()) return UserAgentClass::other;
  if (contains_any(ua, {"bot", "spider", "crawl", "curl", "wget", "python", "java/", "go-http",
                        "headless", "phantomjs", "scrapy"})) {
    return UserAgentClass::script;
  }
  if (ua.find("mozilla/") == std::string::npos) return UserAgentClass::other;
  if (contains_any(ua, {"mobile", "android", "iphone", "ipad"})) return UserAgentClass::mobile_browser;
  return UserAgentClass::desktop_browser;
}

bool is_declared_bot(const Hit& hit) {
  return contains_any(lowercase(hit.user_agent), {"bot", "spider", "crawl"});
}

const std::vector<std::string>& session_feature_names() {
  static const std::vector<std::string> names{
      "session_length_seconds", "hit_count",   "hits_per_second", "mean_gap_seconds",
      "min_gap_seconds",        "unique_url_count", "hour_of_day", "ua_desktop_browser",
      "ua_mobile_browser",      "ua_script",   "ua_other"};
  return names;
}

std::vector<double> SessionFeatures::to_vector() const {
  std::vector<double> v{session_length_seconds, hit_count,        hits_per_second, mean_gap_seconds,
                        min_gap_seconds,        unique_url_count, hour_of_day,     0.0,
                        0.0,                    0.0,              0.0};
  v[7 + static_cast<std::size_t>(user_agent)] = 1.0;
  return v;
}

SessionFeatures compute_features(const std::vector<Hit>& hits) {
  SessionFeatures f;
  if (hits.empty()) return f;
  const double start = hits.front().timestamp;
  const double end = hits.back().timestamp;
  f.session_length_seconds = end - start;
  f.hit_count = static_cast<double>(hits.size());
  f.hits_per_second = f.session_length_seconds > 0.0 ? f.hit_count / f.session_length_seconds : 0.0;
  if (hits.size() > 1) {
    double min_gap = hits[1].timestamp - hits[0].timestamp;
    for (std::size_t i = 2; i < hits.size(); ++i) {
      min_gap = std::min(min_gap, hits[i].timestamp - hits[i - 1].timestamp);
    }
    f.mean_gap_seconds = f.session_length_seconds / (f.hit_count - 1.0);
    f.min_gap_seconds = min_gap;
  }
  std::unordered_set<std::string_view> urls;
  for (const auto& h : hits) urls.insert(h.url);
  f.unique_url_count = static_cast<double>(urls.size());
  const double day_seconds = std::fmod(start, 86400.0);
  f.hour_of_day = std::floor((day_seconds < 0 ? day_seconds + 86400.0 : day_seconds) / 3600.0);
  f.user_agent = classify_user_agent(hits.front().user_agent);
  return f;
}

std::vector<Session> sessionize(std::vector<Hit> hits, const SessionizeOptions& options) {
  if (!(options.timeout_seconds > 0.0)) throw ConfigError("session timeout must be > 0");

  std::map<std::string, std::vector<Hit>> by_visitor;
  for (auto& h : hits) {
    if (options.drop_hit && options.drop_hit(h)) continue;
    by_visitor[h.visitor_id].push_back(std::move(h));
  }
  std::vector<std::vector<Hit>*> shards;
  for (auto& [visitor, list] : by_visitor) shards.push_back(&list);

  std::vector<std::vector<Session>> per_visitor(shards.size());
  parallel_for(shards.size(), options.workers, [&](std::size_t k) {
    auto& list = *shards[k];
    std::stable_sort(list.begin(), list.end(),
                     [](const Hit& a, const Hit& b) { return a.timestamp < b.timestamp; });
    auto& out = per_visitor[k];
    std::vector<Hit> current;
    auto flush = [&] {
      if (current.empty()) return;
      Session s;
      s.visitor_id = current.front().visitor_id;
      s.ip = current.front().ip;
      s.start = current.front().timestamp;
      s.end = current.back().timestamp;
      s.purchase = std::any_of(current.begin(), current.end(), [](const Hit& h) { return h.purchase; });
      s.features = compute_features(current);
      s.hits = std::move(current);
      current.clear();
      out.push_back(std::move(s));
    };
    for (auto& h : list) {
      if (!current.empty() && h.timestamp - current.back().timestamp >= options.timeout_seconds) flush();
      current.push_back(std::move(h));
    }
    flush();
  });

  std::vector<Session> sessions;
  for (auto& v : per_visitor) {
    sessions.insert(sessions.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  return sessions;
}

namespace {

bool parse_address(std::string_view text, bool& v6, std::array<std::uint8_t, 16>& bytes) {
  const std::string s(text);
  bytes.fill(0);
  if (inet_pton(AF_INET, s.c_str(), bytes.data()) == 1) {
    v6 = false;
    return true;
  }
  if (inet_pton(AF_INET6, s.c_str(), bytes.data()) == 1) {
    v6 = true;
    return true;
  }
  return false;
}

}  // namespace

CidrBlock CidrBlock::parse(std::string_view text) {
  auto b = text.find_first_not_of(" \t\r");
  auto e = text.find_last_not_of(" \t\r");
  if (b == std::string_view::npos) throw ConfigError("empty CIDR block");
  text = text.substr(b, e - b + 1);

  CidrBlock block;
  const auto slash = text.find('/');
  if (!parse_address(text.substr(0, slash), block.v6_, block.bytes_)) {
    throw ConfigError("invalid CIDR address '" + std::string(text) + "'");
  }
  const int max_prefix = block.v6_ ? 128 : 32;
  block.prefix_ = max_prefix;
  if (slash != std::string_view::npos) {
    auto digits = text.substr(slash + 1);
    int prefix = -1;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), prefix);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || prefix < 0 || prefix > max_prefix) {
      throw ConfigError("invalid CIDR prefix in '" + std::string(text) + "'");
    }
    block.prefix_ = prefix;
  }
  return block;
}

bool CidrBlock::contains(std::string_view ip) const {
  bool v6 = false;
  std::array<std::uint8_t, 16> addr{};
  if (!parse_address(ip, v6, addr) || v6 != v6_) return false;
  int remaining = prefix_;
  for (std::size_t i = 0; remaining > 0; ++i, remaining -= 8) {
    const auto mask = static_cast<std::uint8_t>(remaining >= 8 ? 0xff : (0xff << (8 - remaining)) & 0xff);
    if ((addr[i] & mask) != (bytes_[i] & mask)) return false;
  }
  return true;
}

std::vector<CidrBlock> read_cidr_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<CidrBlock> blocks;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    blocks.push_back(CidrBlock::parse(line));
  }
  return blocks;
}

std::unordered_set<std::string> purchaser_visitors(const std::vector<Session>& sessions) {
  std::unordered_set<std::string> out;
  for (const auto& s : sessions) {
    if (s.purchase) out.insert(s.visitor_id);
  }
  return out;
}

SessionTags tag_pu_labels(const std::vector<Session>& sessions,
                          const std::unordered_set<std::string>& purchasers,
                          const std::vector<CidrBlock>& cloud_ranges) {
  SessionTags tags;
  tags.s.resize(sessions.size(), 0);
  tags.eval_negative.resize(sessions.size(), 0);
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const bool purchaser = purchasers.contains(sessions[i].visitor_id);
    const bool cloud = std::any_of(cloud_ranges.begin(), cloud_ranges.end(),
                                   [&](const CidrBlock& c) { return c.contains(sessions[i].ip); });
    tags.s[i] = purchaser;
    tags.eval_negative[i] = cloud && !purchaser;
    tags.conflicts += cloud && purchaser;
  }
  return tags;
}

SessionTable make_session_table(const std::vector<Session>& sessions, const SessionTags& tags) {
  if (tags.s.size() != sessions.size() || tags.eval_negative.size() != sessions.size()) {
    throw Error("session tags do not match the session list");
  }
  SessionTable t;
  const auto dims = session_feature_names().size();
  t.features = Matrix(sessions.size(), dims);
  std::map<std::string, std::size_t> ordinal;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& s = sessions[i];
    t.session_ids.push_back(s.visitor_id + "#" + std::to_string(ordinal[s.visitor_id]++));
    t.visitor_ids.push_back(s.visitor_id);
    auto v = s.features.to_vector();
    std::copy(v.begin(), v.end(), t.features.row(i).begin());
  }
  t.s = tags.s;
  t.eval_negative = tags.eval_negative;
  return t;
}

void write_session_table(const std::filesystem::path& path, const SessionTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "session_id,visitor_id";
  for (const auto& n : session_feature_names()) out << ',' << n;
  out << ",s,eval_negative\n";
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << table.session_ids[r] << ',' << table.visitor_ids[r];
    for (double v : table.features.row(r)) out << ',' << v;
    out << ',' << int(table.s[r]) << ',' << int(table.eval_negative[r]) << '\n';
  }
}

SessionTable read_session_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  SessionTable t;
  std::string line;
  if (!std::getline(in, line)) {
    t.features = Matrix(0, session_feature_names().size());
    return t;
  }
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 4 || header[0] != "session_id" || header[1] != "visitor_id" ||
      header[header.size() - 2] != "s" || header.back() != "eval_negative") {
    throw ParseError(path.string() + ": not a session file");
  }
  const std::size_t dims = header.size() - 4;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " columns");
    }
    t.session_ids.push_back(cells[0]);
    t.visitor_ids.push_back(cells[1]);
    for (std::size_t c = 0; c < dims; ++c) {
      double v = 0.0;
      const auto& text = cells[2 + c];
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + text + "'");
      }
      values.push_back(v);
    }
    t.s.push_back(cells[cells.size() - 2] == "1");
    t.eval_negative.push_back(cells.back() == "1" || cells.back() == "1\r");
  }
  t.features = Matrix(t.session_ids.size(), dims, std::move(values));
  return t;
}

}  // namespace pubot
