#include "gridfuse/metrics.hpp"

#include "gridfuse/errors.hpp"
#include "gridfuse/npy.hpp"
#include "gridfuse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gridfuse {

ConfusionMatrix::ConfusionMatrix(int classes, std::uint8_t ignore) : classes_(classes), ignore_(ignore) {
  if (classes < 0 || classes > 255) throw std::invalid_argument("class count must be in 0..255");
  if (ignore < classes) throw std::invalid_argument("ignore label collides with a class id");
  counts_.assign(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0);
  abstained_.assign(static_cast<std::size_t>(classes), 0);
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  for (auto a : abstained_) t += a;
  return t;
}

std::uint64_t ConfusionMatrix::false_positives(int k) const {
  std::uint64_t s = 0;
  for (int g = 0; g < classes_; ++g)
    if (g != k) s += at(g, k);
  return s;
}

std::uint64_t ConfusionMatrix::false_negatives(int k) const {
  std::uint64_t s = abstained(k);
  for (int p = 0; p < classes_; ++p)
    if (p != k) s += at(k, p);
  return s;
}

void ConfusionMatrix::add(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size())
    throw DataError("prediction has " + std::to_string(pred.size()) + " labels, ground truth has " +
                    std::to_string(gt.size()));
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt[i], p = pred[i];
    if (g != ignore_ && g >= classes_)
      throw DataError("ground-truth label " + std::to_string(g) + " at index " + std::to_string(i) + " out of range");
    if (p != ignore_ && p >= classes_)
      throw DataError("predicted label " + std::to_string(p) + " at index " + std::to_string(i) + " out of range");
    if (g == ignore_) continue;
    if (p == ignore_)
      ++abstained_[static_cast<std::size_t>(g)];
    else
      ++counts_[index(g, p)];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_ || other.ignore_ != ignore_)
    throw std::invalid_argument("cannot merge confusion matrices of different shape");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  for (std::size_t i = 0; i < abstained_.size(); ++i) abstained_[i] += other.abstained_[i];
}

ConfusionMatrix confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, int classes,
                          std::uint8_t ignore, unsigned threads) {
  if (pred.size() != gt.size())
    throw DataError("prediction has " + std::to_string(pred.size()) + " labels, ground truth has " +
                    std::to_string(gt.size()));
  const unsigned workers = resolve_threads(threads);
  std::vector<ConfusionMatrix> shards(workers, ConfusionMatrix(classes, ignore));
  parallel_chunks(gt.size(), workers, [&](std::size_t b, std::size_t e, unsigned w) {
    shards[w].add(pred.subspan(b, e - b), gt.subspan(b, e - b));
  });
  ConfusionMatrix cm(classes, ignore);
  for (const auto& s : shards) cm.merge(s);
  return cm;
}

IoUReport miou(const ConfusionMatrix& cm) {
  if (cm.classes() == 0 || cm.total() == 0) throw std::invalid_argument("miou: confusion matrix is empty");
  IoUReport r;
  const int k = cm.classes();
  r.iou.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
  r.included.assign(static_cast<std::size_t>(k), false);
  double sum = 0.0;
  int used = 0;
  for (int c = 0; c < k; ++c) {
    const double tp = static_cast<double>(cm.true_positives(c));
    const double denom = tp + static_cast<double>(cm.false_positives(c)) + static_cast<double>(cm.false_negatives(c));
    if (denom == 0.0) {
      r.excluded.push_back(c);
      continue;
    }
    r.iou[static_cast<std::size_t>(c)] = tp / denom;
    r.included[static_cast<std::size_t>(c)] = true;
    sum += tp / denom;
    ++used;
  }
  r.mean = sum / used;
  if (r.excluded.empty()) {
    r.note = "all " + std::to_string(k) + " classes included in the mean";
  } else {
    std::ostringstream ss;
    ss << "classes absent from ground truth and predictions excluded from the mean:";
    for (int c : r.excluded) ss << ' ' << c;
    r.note = ss.str();
  }
  return r;
}

std::string percent_1dp(std::uint64_t part, std::uint64_t whole) {
  if (whole == 0) return "0.0";
  using u128 = unsigned __int128;
  const u128 tenths = (u128(part) * 2000u + whole) / (u128(whole) * 2u);
  const auto t = static_cast<std::uint64_t>(tenths);
  return std::to_string(t / 10) + "." + std::to_string(t % 10);
}

namespace {

constexpr const char* kGridnetZones = R"(# zone  subset
t1z6a train
t1z6b train
t2z5  train
t3z3  train
t3z6  train
t3z7  train
t5a1  train
t5a3  train
t5a4  train
t5a5  train
t5b2  train
t5b3  train
t5b4  train
t5b6  train
t5c1  train
t5c2  train
t5c3  train
t6z2  train
t6z3  train
t6z4  train
t6z6  train
t1z5b val
t1z8  val
t3z4  val
t4z1  val
t5b1  val
t5b5  val
t1z4  test
t1z5a test
t1z7  test
t3z1  test
t3z2  test
t3z5  test
t5a2  test
t6z1  test
t6z5  test
)";

const std::vector<std::string> kSubsetOrder{"train", "val", "test"};

}  // namespace

ZoneAssignment ZoneAssignment::gridnet() { return parse(kGridnetZones); }

ZoneAssignment ZoneAssignment::parse(const std::string& text) {
  ZoneAssignment z;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string zone, subset, extra;
    if (!(ls >> zone)) continue;
    if (!(ls >> subset) || (ls >> extra))
      throw DataError("split file line " + std::to_string(line_no) + ": expected 'zone subset'");
    if (subset == "validation") subset = "val";
    if (std::find(kSubsetOrder.begin(), kSubsetOrder.end(), subset) == kSubsetOrder.end())
      throw DataError("split file line " + std::to_string(line_no) + ": unknown subset '" + subset + "'");
    if (z.zones_.count(zone))
      throw DataError("split file line " + std::to_string(line_no) + ": zone '" + zone + "' assigned twice");
    z.assign(zone, subset);
  }
  return z;
}

ZoneAssignment ZoneAssignment::load(const std::filesystem::path& path) {
  try {
    return parse(npy::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void ZoneAssignment::assign(const std::string& zone, const std::string& subset) { zones_[zone] = subset; }

std::vector<std::string> ZoneAssignment::zones_in(const std::string& subset) const {
  std::vector<std::string> out;
  for (const auto& [zone, s] : zones_)
    if (s == subset) out.push_back(zone);
  return out;
}

const std::string& ZoneAssignment::subset_of(const std::string& zone) const {
  const auto it = zones_.find(zone);
  if (it == zones_.end()) throw DataError("zone '" + zone + "' has no split assignment");
  return it->second;
}

std::string ZoneAssignment::to_text() const {
  std::string out;
  for (const auto& subset : kSubsetOrder)
    for (const auto& zone : zones_in(subset)) out += zone + " " + subset + "\n";
  return out;
}

std::uint64_t SplitTable::class_total(int k) const {
  std::uint64_t t = 0;
  for (const auto& c : counts) t += c[static_cast<std::size_t>(k)];
  return t;
}

std::uint64_t SplitTable::subset_total(std::size_t s) const {
  std::uint64_t t = 0;
  for (auto c : counts[s]) t += c;
  return t;
}

std::uint64_t SplitTable::grand_total() const {
  std::uint64_t t = 0;
  for (std::size_t s = 0; s < counts.size(); ++s) t += subset_total(s);
  return t;
}

std::string SplitTable::percent_of_class(std::size_t s, int k) const {
  return percent_1dp(counts[s][static_cast<std::size_t>(k)], class_total(k));
}

std::string SplitTable::percent_of_subset_total(std::size_t s) const {
  return percent_1dp(subset_total(s), grand_total());
}

std::string SplitTable::distribution(std::size_t s, int k) const {
  return percent_1dp(counts[s][static_cast<std::size_t>(k)], subset_total(s));
}

std::string SplitTable::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(8) << "class";
  for (const auto& s : subsets) os << std::right << std::setw(16) << s;
  os << std::setw(16) << "total";
  for (const auto& s : subsets) os << std::setw(12) << ("%" + s);
  for (const auto& s : subsets) os << std::setw(12) << ("dist_" + s);
  os << '\n';
  auto row = [&](const std::string& name, auto count_of, auto total, auto pct, auto dist) {
    os << std::left << std::setw(8) << name;
    for (std::size_t s = 0; s < subsets.size(); ++s) os << std::right << std::setw(16) << count_of(s);
    os << std::setw(16) << total;
    for (std::size_t s = 0; s < subsets.size(); ++s) os << std::setw(12) << pct(s);
    for (std::size_t s = 0; s < subsets.size(); ++s) os << std::setw(12) << dist(s);
    os << '\n';
  };
  for (int k = 0; k < classes; ++k)
    row(std::to_string(k), [&](std::size_t s) { return counts[s][static_cast<std::size_t>(k)]; }, class_total(k),
        [&](std::size_t s) { return percent_of_class(s, k); }, [&](std::size_t s) { return distribution(s, k); });
  row("TOTAL", [&](std::size_t s) { return subset_total(s); }, grand_total(),
      [&](std::size_t s) { return percent_of_subset_total(s); }, [&](std::size_t) { return std::string("100.0"); });
  return os.str();
}

SplitTable split_statistics_from_counts(const std::map<std::string, std::vector<std::uint64_t>>& zone_counts,
                                        const ZoneAssignment& assignment, int classes) {
  std::map<std::string, std::vector<std::uint64_t>> per_subset;
  std::map<std::string, std::uint64_t> ignored;
  for (const auto& [zone, hist] : zone_counts) {
    const std::string& subset = assignment.subset_of(zone);
    auto& acc = per_subset[subset];
    acc.resize(static_cast<std::size_t>(classes), 0);
    if (hist.size() < static_cast<std::size_t>(classes) || hist.size() > static_cast<std::size_t>(classes) + 1)
      throw DataError("zone '" + zone + "': histogram must have " + std::to_string(classes) + " (+1 ignored) entries");
    for (int k = 0; k < classes; ++k) acc[static_cast<std::size_t>(k)] += hist[static_cast<std::size_t>(k)];
    if (hist.size() > static_cast<std::size_t>(classes)) ignored[subset] += hist.back();
  }
  SplitTable t;
  t.classes = classes;
  for (const auto& s : kSubsetOrder) {
    if (!per_subset.count(s)) continue;
    t.subsets.push_back(s);
    t.counts.push_back(per_subset[s]);
    t.ignored.push_back(ignored[s]);
  }
  return t;
}

SplitTable split_statistics(const std::map<std::string, std::vector<std::uint8_t>>& zone_labels,
                            const ZoneAssignment& assignment, int classes) {
  std::map<std::string, std::vector<std::uint64_t>> hist;
  for (const auto& [zone, labels] : zone_labels) {
    std::vector<std::uint64_t> h(static_cast<std::size_t>(classes) + 1, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto y = labels[i];
      if (y == 255)
        ++h.back();
      else if (y < classes)
        ++h[y];
      else
        throw DataError("zone '" + zone + "': label " + std::to_string(y) + " at index " + std::to_string(i) +
                        " is not a training class");
    }
    hist.emplace(zone, std::move(h));
  }
  return split_statistics_from_counts(hist, assignment, classes);
}

}  // namespace gridfuse
