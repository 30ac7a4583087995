#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adtext {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t num_classes, std::vector<std::string> class_names = {});

  std::size_t num_classes() const { return n_; }
  const std::vector<std::string>& class_names() const { return names_; }
  std::uint64_t count(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t times = 1);

  std::uint64_t total() const;
  std::uint64_t support(std::size_t c) const;  // row sum
  std::uint64_t predicted_count(std::size_t c) const;  // column sum
  std::uint64_t true_positives(std::size_t c) const { return count(c, c); }
  std::uint64_t false_positives(std::size_t c) const { return predicted_count(c) - count(c, c); }
  std::uint64_t false_negatives(std::size_t c) const { return support(c) - count(c, c); }
  std::uint64_t true_negatives(std::size_t c) const;

  // Header of class names, one row per true class.
  std::string to_csv() const;
  static ConfusionMatrix from_csv(std::string_view csv);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::string> names_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::size_t num_classes, std::vector<std::string> class_names = {});

// trace / total.
double accuracy(const ConfusionMatrix& cm);

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool zero_division = false;  // some denominator was 0 and the value was set to 0
};

// Harmonic mean; 0 when p + r == 0.
double f1_score(double precision, double recall);
Scores precision_recall_f1(const ConfusionMatrix& cm, std::size_t c);

struct ClassRow {
  std::string id;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

// Support-weighted mean of each column.
Scores weighted_average(std::span<const ClassRow> rows);

struct ClassReport {
  std::vector<ClassRow> rows;
  double accuracy = 0.0;
  Scores weighted;
  std::uint64_t total_support = 0;
  bool zero_division = false;
};

ClassReport class_report(const ConfusionMatrix& cm);

enum class ReportFormat { text, markdown, csv };
ReportFormat parse_report_format(std::string_view name);
std::string_view report_extension(ReportFormat format);

// ID / precision / recall / F1 / support rows with two decimals, then the
// accuracy row and the weighted-average row.
std::string render_report(const ClassReport& report, ReportFormat format);

}  // namespace adtext
