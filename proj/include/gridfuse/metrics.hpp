#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gridfuse {

// Counts (ground truth g, prediction p). Pairs whose ground truth is the
// ignore label are skipped; a prediction of the ignore label on a labelled
// point is an abstention and counts as a false negative for g.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes = 0, std::uint8_t ignore = 255);

  int classes() const { return classes_; }
  std::uint8_t ignore_label() const { return ignore_; }
  std::uint64_t at(int gt, int pred) const { return counts_[index(gt, pred)]; }
  std::uint64_t abstained(int gt) const { return abstained_[static_cast<std::size_t>(gt)]; }
  std::uint64_t total() const;

  std::uint64_t true_positives(int k) const { return at(k, k); }
  std::uint64_t false_positives(int k) const;
  std::uint64_t false_negatives(int k) const;  // includes abstentions

  // Throws DataError on labels outside {0..K-1, ignore} or unequal lengths.
  void add(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t index(int gt, int pred) const {
    return static_cast<std::size_t>(gt) * static_cast<std::size_t>(classes_) + static_cast<std::size_t>(pred);
  }

  int classes_;
  std::uint8_t ignore_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> abstained_;
};

// Shards the input across threads and merges the partial matrices.
ConfusionMatrix confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, int classes,
                          std::uint8_t ignore = 255, unsigned threads = 1);

struct IoUReport {
  std::vector<double> iou;     // NaN where the class is excluded
  std::vector<bool> included;  // present in ground truth or predictions
  double mean = 0.0;
  std::vector<int> excluded;
  std::string note;  // describes the exclusion rule applied
};

// IoU_k = TP / (TP + FP + FN), averaged over classes present in ground
// truth or predictions. Throws std::invalid_argument on an empty matrix.
IoUReport miou(const ConfusionMatrix& cm);

// Percent with one decimal, rounded half up, computed in integers.
std::string percent_1dp(std::uint64_t part, std::uint64_t whole);

// zone -> subset ("train", "val", "test").
class ZoneAssignment {
 public:
  // The GridNet-HD zone split.
  static ZoneAssignment gridnet();
  // Lines "zone subset"; '#' comments.
  static ZoneAssignment parse(const std::string& text);
  static ZoneAssignment load(const std::filesystem::path& path);

  void assign(const std::string& zone, const std::string& subset);
  const std::map<std::string, std::string>& zones() const { return zones_; }
  std::vector<std::string> zones_in(const std::string& subset) const;
  // Throws DataError for an unassigned zone.
  const std::string& subset_of(const std::string& zone) const;
  std::string to_text() const;

 private:
  std::map<std::string, std::string> zones_;
};

struct SplitTable {
  int classes = 0;
  std::vector<std::string> subsets;                 // column order
  std::vector<std::vector<std::uint64_t>> counts;   // [subset][class]
  std::vector<std::uint64_t> ignored;               // [subset] points labelled 255

  std::uint64_t class_total(int k) const;
  std::uint64_t subset_total(std::size_t s) const;
  std::uint64_t grand_total() const;
  std::string percent_of_class(std::size_t s, int k) const;  // subset / total for class k
  std::string percent_of_subset_total(std::size_t s) const;  // subset / grand total
  std::string distribution(std::size_t s, int k) const;      // class share within subset
  std::string to_text() const;
};

// Subsets appear in the order train, val, test (those that occur).
SplitTable split_statistics(const std::map<std::string, std::vector<std::uint8_t>>& zone_labels,
                            const ZoneAssignment& assignment, int classes = 11);
// Same from per-zone class histograms (index 255 may be present at the end
// as an extra entry, see load_histogram()).
SplitTable split_statistics_from_counts(const std::map<std::string, std::vector<std::uint64_t>>& zone_counts,
                                        const ZoneAssignment& assignment, int classes = 11);

}  // namespace gridfuse
