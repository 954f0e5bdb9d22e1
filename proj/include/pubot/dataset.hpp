#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pubot/common.hpp"

namespace pubot {

// One row of a comma-separated intrusion-detection file.
struct RawRecord {
  std::vector<std::string> attributes;
  std::string class_label;
  std::optional<int> difficulty;
};

// Reads one headerless CSV file. With `has_difficulty` the last column is the
// difficulty score and the one before it the class label; otherwise the last
// column is the label. Throws ParseError on ragged rows (naming the line) and
// on an empty file.
std::vector<RawRecord> read_records(const std::filesystem::path& path, bool has_difficulty = true);

// Concatenates the train and test files in file order.
std::vector<RawRecord> load_nslkdd(const std::filesystem::path& train_path,
                                   const std::filesystem::path& test_path);

// Label that marks a legitimate (human) record; everything else is an attack.
inline constexpr std::string_view kNormalLabel = "normal";

struct BinaryLabels {
  std::vector<std::uint8_t> y;    // 1 = legitimate, 0 = intrusion
  std::vector<std::uint64_t> ids;  // record position in the loaded list
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

BinaryLabels binarize_labels(std::span<const RawRecord> records);

struct EncodingSpec {
  std::size_t attribute_count = 0;
  std::vector<std::size_t> numeric_columns;
  std::vector<std::size_t> categorical_columns;
  // Category strings per categorical column, in order of first appearance.
  std::map<std::size_t, std::vector<std::string>> category_vocab;

  std::size_t dims() const;
};

// A column is categorical when any of its training values is not a number.
EncodingSpec build_encoding(std::span<const RawRecord> records, std::span<const std::size_t> rows);
EncodingSpec build_encoding(std::span<const RawRecord> records);

struct ColumnStats {
  double mean = 0.0;
  double stddev = 1.0;
  bool constant = false;
};

struct FeatureMatrix {
  Matrix values;
  std::vector<ColumnStats> standardization;  // empty until standardized

  std::size_t rows() const { return values.rows(); }
  std::size_t dims() const { return values.cols(); }
};

// One-hot encodes categorical columns over the encoding vocabulary (unseen values
// give an all-zero block) and parses numeric columns. Attribute order is kept.
FeatureMatrix encode(std::span<const RawRecord> records, std::span<const std::size_t> rows,
                     const EncodingSpec& spec);
FeatureMatrix encode(std::span<const RawRecord> records, const EncodingSpec& spec);

struct LabeledDataset {
  FeatureMatrix features;
  std::vector<std::uint8_t> y;
  std::vector<std::uint64_t> ids;

  std::size_t rows() const { return y.size(); }
  LabeledDataset subset(std::span<const std::size_t> rows) const;
};

struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded shuffle followed by contiguous cuts. Train and validation sizes are
// rounded to the nearest row; the test part takes the remainder.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);
std::array<LabeledDataset, 3> split(const LabeledDataset& dataset, const SplitSpec& spec);

// Population mean/stddev per column. Columns with stddev below 1e-12 are constant.
std::vector<ColumnStats> fit_standardization(const Matrix& m);
void apply_standardization(Matrix& m, std::span<const ColumnStats> stats);

// Standardizes train in place with its own statistics and every other matrix
// with the train statistics.
void standardize(FeatureMatrix& train, std::span<FeatureMatrix* const> others);

// Output of the full load -> binarize -> split -> encode -> standardize pipeline.
struct PreparedData {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
  EncodingSpec encoding;
};

PreparedData prepare_dataset(std::span<const RawRecord> records, const SplitSpec& spec);

// Writes id,y,f0..fN with full precision.
void write_labeled_csv(const std::filesystem::path& path, const LabeledDataset& data);

}  // namespace pubot
