#include "pubot/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace pubot {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    // trim surrounding whitespace
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

std::vector<RawRecord> read_records(const std::filesystem::path& path, bool has_difficulty) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());

  const std::size_t trailing = has_difficulty ? 2 : 1;
  std::vector<RawRecord> records;
  std::size_t expected_fields = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv_line(line);
    if (expected_fields == 0) {
      if (fields.size() <= trailing) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": too few columns (" +
                         std::to_string(fields.size()) + ")");
      }
      expected_fields = fields.size();
    } else if (fields.size() != expected_fields) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(expected_fields) + " columns, found " +
                       std::to_string(fields.size()));
    }

    RawRecord rec;
    const std::size_t label_col = fields.size() - trailing;
    rec.class_label = fields[label_col];
    if (rec.class_label.empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": empty class label");
    }
    if (has_difficulty) {
      auto d = parse_number(fields.back());
      if (!d) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": difficulty is not a number");
      }
      rec.difficulty = static_cast<int>(*d);
    }
    fields.resize(label_col);
    rec.attributes = std::move(fields);
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ParseError("no records in " + path.string());
  return records;
}

std::vector<RawRecord> load_nslkdd(const std::filesystem::path& train_path,
                                   const std::filesystem::path& test_path) {
  auto records = read_records(train_path);
  auto test = read_records(test_path);
  if (test.front().attributes.size() != records.front().attributes.size()) {
    throw ParseError(test_path.string() + ": attribute count " +
                     std::to_string(test.front().attributes.size()) + " differs from " +
                     train_path.string() + " (" +
                     std::to_string(records.front().attributes.size()) + ")");
  }
  records.insert(records.end(), std::make_move_iterator(test.begin()),
                 std::make_move_iterator(test.end()));
  return records;
}

BinaryLabels binarize_labels(std::span<const RawRecord> records) {
  BinaryLabels out;
  out.y.reserve(records.size());
  out.ids.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const bool legit = records[i].class_label == kNormalLabel;
    out.y.push_back(legit ? 1 : 0);
    out.ids.push_back(i);
    (legit ? out.positives : out.negatives) += 1;
  }
  return out;
}

std::size_t EncodingSpec::dims() const {
  std::size_t d = numeric_columns.size();
  for (const auto& [col, vocab] : category_vocab) d += vocab.size();
  return d;
}

EncodingSpec build_encoding(std::span<const RawRecord> records, std::span<const std::size_t> rows) {
  if (rows.empty()) throw Error("build_encoding: no training records");
  EncodingSpec spec;
  spec.attribute_count = records[rows.front()].attributes.size();

  for (std::size_t col = 0; col < spec.attribute_count; ++col) {
    bool numeric = true;
    for (auto r : rows) {
      if (!parse_number(records[r].attributes[col])) {
        numeric = false;
        break;
      }
    }
    if (numeric) {
      spec.numeric_columns.push_back(col);
      continue;
    }
    spec.categorical_columns.push_back(col);
    auto& vocab = spec.category_vocab[col];
    std::unordered_map<std::string, std::size_t> seen;
    for (auto r : rows) {
      const auto& v = records[r].attributes[col];
      if (seen.emplace(v, vocab.size()).second) vocab.push_back(v);
    }
  }
  return spec;
}

EncodingSpec build_encoding(std::span<const RawRecord> records) {
  auto rows = all_rows(records.size());
  return build_encoding(records, rows);
}

FeatureMatrix encode(std::span<const RawRecord> records, std::span<const std::size_t> rows,
                     const EncodingSpec& spec) {
  // Output offset of every attribute column, plus a lookup table per categorical column.
  std::vector<std::size_t> offset(spec.attribute_count, 0);
  std::vector<const std::unordered_map<std::string, std::size_t>*> lookup(spec.attribute_count,
                                                                          nullptr);
  std::vector<std::unordered_map<std::string, std::size_t>> tables;
  tables.reserve(spec.categorical_columns.size());
  std::size_t next = 0;
  for (std::size_t col = 0; col < spec.attribute_count; ++col) {
    offset[col] = next;
    auto it = spec.category_vocab.find(col);
    if (it == spec.category_vocab.end()) {
      next += 1;
      continue;
    }
    auto& table = tables.emplace_back();
    for (std::size_t k = 0; k < it->second.size(); ++k) table.emplace(it->second[k], k);
    lookup[col] = &table;
    next += it->second.size();
  }

  FeatureMatrix out;
  out.values = Matrix(rows.size(), next, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& rec = records[rows[i]];
    if (rec.attributes.size() != spec.attribute_count) {
      throw ParseError("encode: row " + std::to_string(rows[i]) + " has " +
                       std::to_string(rec.attributes.size()) + " attributes, expected " +
                       std::to_string(spec.attribute_count));
    }
    auto dst = out.values.row(i);
    for (std::size_t col = 0; col < spec.attribute_count; ++col) {
      const auto& cell = rec.attributes[col];
      if (lookup[col]) {
        auto hit = lookup[col]->find(cell);
        if (hit != lookup[col]->end()) dst[offset[col] + hit->second] = 1.0;
        continue;
      }
      auto v = parse_number(cell);
      if (!v) {
        throw ParseError("encode: row " + std::to_string(rows[i]) + ", column " +
                         std::to_string(col) + ": cannot parse '" + cell + "' as a number");
      }
      dst[offset[col]] = *v;
    }
  }
  return out;
}

FeatureMatrix encode(std::span<const RawRecord> records, const EncodingSpec& spec) {
  auto rows = all_rows(records.size());
  return encode(records, rows, spec);
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.features.values = features.values.select_rows(rows);
  out.features.standardization = features.standardization;
  out.y.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (auto r : rows) {
    out.y.push_back(y[r]);
    out.ids.push_back(ids[r]);
  }
  return out;
}

void SplitSpec::validate() const {
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(test_frac > 0.0)) {
    throw ConfigError("split fractions must all be > 0");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n == 0) throw Error("split: empty dataset");
  auto order = all_rows(n);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = std::min<std::size_t>(n, std::llround(spec.train_frac * n));
  const auto n_val = std::min<std::size_t>(n - n_train, std::llround(spec.val_frac * n));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test.assign(order.begin() + n_train + n_val, order.end());
  return out;
}

std::array<LabeledDataset, 3> split(const LabeledDataset& dataset, const SplitSpec& spec) {
  auto idx = split_indices(dataset.rows(), spec);
  return {dataset.subset(idx.train), dataset.subset(idx.val), dataset.subset(idx.test)};
}

std::vector<ColumnStats> fit_standardization(const Matrix& m) {
  std::vector<ColumnStats> stats(m.cols());
  if (m.rows() == 0) return stats;
  std::vector<double> sum(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) sum[c] += row[c];
  }
  const double n = static_cast<double>(m.rows());
  std::vector<double> sq(m.cols(), 0.0);
  for (std::size_t c = 0; c < m.cols(); ++c) stats[c].mean = sum[c] / n;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double d = row[c] - stats[c].mean;
      sq[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < m.cols(); ++c) {
    stats[c].stddev = std::sqrt(sq[c] / n);
    stats[c].constant = stats[c].stddev < 1e-12;
    if (stats[c].constant) stats[c].stddev = 1.0;
  }
  return stats;
}

void apply_standardization(Matrix& m, std::span<const ColumnStats> stats) {
  if (stats.size() != m.cols()) {
    throw Error("standardization has " + std::to_string(stats.size()) + " columns, matrix has " +
                std::to_string(m.cols()));
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      row[c] = stats[c].constant ? 0.0 : (row[c] - stats[c].mean) / stats[c].stddev;
    }
  }
}

void standardize(FeatureMatrix& train, std::span<FeatureMatrix* const> others) {
  auto stats = fit_standardization(train.values);
  apply_standardization(train.values, stats);
  train.standardization = stats;
  for (auto* other : others) {
    apply_standardization(other->values, stats);
    other->standardization = stats;
  }
}

PreparedData prepare_dataset(std::span<const RawRecord> records, const SplitSpec& spec) {
  auto labels = binarize_labels(records);
  auto idx = split_indices(records.size(), spec);

  PreparedData out;
  out.encoding = build_encoding(records, idx.train);
  auto make = [&](const std::vector<std::size_t>& rows) {
    LabeledDataset d;
    d.features = encode(records, rows, out.encoding);
    for (auto r : rows) {
      d.y.push_back(labels.y[r]);
      d.ids.push_back(labels.ids[r]);
    }
    return d;
  };
  out.train = make(idx.train);
  out.val = make(idx.val);
  out.test = make(idx.test);
  FeatureMatrix* others[] = {&out.val.features, &out.test.features};
  standardize(out.train.features, others);
  return out;
}

void write_labeled_csv(const std::filesystem::path& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "id,y";
  for (std::size_t c = 0; c < data.features.dims(); ++c) out << ",f" << c;
  out << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    out << data.ids[r] << ',' << int(data.y[r]);
    for (double v : data.features.values.row(r)) out << ',' << v;
    out << '\n';
  }
}

}  // namespace pubot
