#include "adtext/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numeric>

#include "adtext/corpus.hpp"
#include "adtext/errors.hpp"

namespace adtext {

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string pad_left(std::string_view s, std::size_t width) {
  return std::string(width > s.size() ? width - s.size() : 0, ' ') + std::string(s);
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::string> class_names)
    : n_(num_classes), names_(std::move(class_names)), counts_(num_classes * num_classes, 0) {
  if (names_.empty()) {
    for (std::size_t c = 0; c < n_; ++c) names_.push_back(std::to_string(c));
  }
  if (names_.size() != n_) {
    throw InputError("confusion matrix: " + std::to_string(names_.size()) + " names for " +
                     std::to_string(n_) + " classes");
  }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t times) {
  if (truth >= n_ || predicted >= n_) {
    throw InputError("confusion matrix: label pair (" + std::to_string(truth) + ", " +
                     std::to_string(predicted) + ") outside [0, " + std::to_string(n_) + ")");
  }
  counts_[truth * n_ + predicted] += times;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::support(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += count(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::predicted_count(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < n_; ++t) s += count(t, c);
  return s;
}

std::uint64_t ConfusionMatrix::true_negatives(std::size_t c) const {
  return total() - true_positives(c) - false_positives(c) - false_negatives(c);
}

std::string ConfusionMatrix::to_csv() const {
  std::string out = "true\\predicted";
  for (const auto& n : names_) out += "," + csv_escape(n);
  out += '\n';
  for (std::size_t t = 0; t < n_; ++t) {
    out += csv_escape(names_[t]);
    for (std::size_t p = 0; p < n_; ++p) out += "," + std::to_string(count(t, p));
    out += '\n';
  }
  return out;
}

ConfusionMatrix ConfusionMatrix::from_csv(std::string_view csv) {
  const auto rows = split_csv(csv);
  if (rows.empty() || rows.front().size() < 2) throw InputError("confusion CSV: missing header");
  const std::size_t n = rows.front().size() - 1;
  if (rows.size() != n + 1) {
    throw InputError("confusion CSV: expected " + std::to_string(n) + " class rows, got " +
                     std::to_string(rows.size() - 1));
  }
  ConfusionMatrix cm(n, std::vector<std::string>(rows.front().begin() + 1, rows.front().end()));
  for (std::size_t t = 0; t < n; ++t) {
    const auto& row = rows[t + 1];
    if (row.size() != n + 1) throw InputError("confusion CSV: row " + std::to_string(t + 2) + " has wrong width");
    for (std::size_t p = 0; p < n; ++p) {
      const std::string& field = row[p + 1];
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw InputError("confusion CSV: bad count '" + field + "' in row " + std::to_string(t + 2));
      }
      cm.add(t, p, v);
    }
  }
  return cm;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::size_t num_classes, std::vector<std::string> class_names) {
  if (truth.size() != predicted.size()) {
    throw InputError("confusion: " + std::to_string(truth.size()) + " true labels vs " +
                     std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm(num_classes, std::move(class_names));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0) throw InputError("confusion: negative label");
    cm.add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw UndefinedMetricError("accuracy of an empty confusion matrix");
  std::uint64_t correct = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) correct += cm.count(c, c);
  return static_cast<double>(correct) / static_cast<double>(total);
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Scores precision_recall_f1(const ConfusionMatrix& cm, std::size_t c) {
  if (c >= cm.num_classes()) throw InputError("class id " + std::to_string(c) + " out of range");
  Scores s;
  const auto tp = static_cast<double>(cm.true_positives(c));
  const std::uint64_t predicted = cm.predicted_count(c);
  const std::uint64_t actual = cm.support(c);
  if (predicted > 0) {
    s.precision = tp / static_cast<double>(predicted);
  } else {
    s.zero_division = true;
  }
  if (actual > 0) {
    s.recall = tp / static_cast<double>(actual);
  } else {
    s.zero_division = true;
  }
  if (s.precision + s.recall > 0.0) {
    s.f1 = f1_score(s.precision, s.recall);
  } else {
    s.zero_division = true;
  }
  return s;
}

Scores weighted_average(std::span<const ClassRow> rows) {
  std::uint64_t total = 0;
  for (const auto& r : rows) total += r.support;
  if (total == 0) throw UndefinedMetricError("weighted average over zero total support");
  Scores s;
  for (const auto& r : rows) {
    const double w = static_cast<double>(r.support) / static_cast<double>(total);
    s.precision += w * r.precision;
    s.recall += w * r.recall;
    s.f1 += w * r.f1;
  }
  return s;
}

ClassReport class_report(const ConfusionMatrix& cm) {
  ClassReport report;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const Scores s = precision_recall_f1(cm, c);
    report.rows.push_back({std::to_string(c), s.precision, s.recall, s.f1, cm.support(c)});
    report.zero_division = report.zero_division || s.zero_division;
  }
  report.accuracy = accuracy(cm);
  report.weighted = weighted_average(report.rows);
  report.total_support = cm.total();
  return report;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "text" || name == "txt") return ReportFormat::text;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  if (name == "csv") return ReportFormat::csv;
  throw ConfigError("unknown report format '" + std::string(name) + "' (text|markdown|csv)");
}

std::string_view report_extension(ReportFormat format) {
  switch (format) {
    case ReportFormat::markdown:
      return "md";
    case ReportFormat::csv:
      return "csv";
    case ReportFormat::text:
      break;
  }
  return "txt";
}

std::string render_report(const ClassReport& r, ReportFormat format) {
  std::string out;
  const std::string total = std::to_string(r.total_support);
  switch (format) {
    case ReportFormat::csv:
      out = "id,precision,recall,f1,support\n";
      for (const auto& row : r.rows) {
        out += csv_escape(row.id) + "," + fixed2(row.precision) + "," + fixed2(row.recall) + "," +
               fixed2(row.f1) + "," + std::to_string(row.support) + "\n";
      }
      out += "accuracy,,," + fixed2(r.accuracy) + "," + total + "\n";
      out += "weighted_avg," + fixed2(r.weighted.precision) + "," + fixed2(r.weighted.recall) + "," +
             fixed2(r.weighted.f1) + "," + total + "\n";
      break;
    case ReportFormat::markdown:
      out = "| ID | Precision | Recall | F1 | Support |\n|---:|---:|---:|---:|---:|\n";
      for (const auto& row : r.rows) {
        out += "| " + row.id + " | " + fixed2(row.precision) + " | " + fixed2(row.recall) + " | " +
               fixed2(row.f1) + " | " + std::to_string(row.support) + " |\n";
      }
      out += "| Accuracy | | | " + fixed2(r.accuracy) + " | " + total + " |\n";
      out += "| Weighted avg | " + fixed2(r.weighted.precision) + " | " + fixed2(r.weighted.recall) +
             " | " + fixed2(r.weighted.f1) + " | " + total + " |\n";
      break;
    case ReportFormat::text: {
      std::size_t w = std::string_view("weighted avg").size();
      for (const auto& row : r.rows) w = std::max(w, row.id.size());
      out = std::string(w, ' ') + "  precision     recall   f1-score    support\n\n";
      for (const auto& row : r.rows) {
        out += pad_left(row.id, w) + pad_left(fixed2(row.precision), 11) + pad_left(fixed2(row.recall), 11) +
               pad_left(fixed2(row.f1), 11) + pad_left(std::to_string(row.support), 11) + "\n";
      }
      out += "\n" + pad_left("accuracy", w) + std::string(22, ' ') + pad_left(fixed2(r.accuracy), 11) +
             pad_left(total, 11) + "\n";
      out += pad_left("weighted avg", w) + pad_left(fixed2(r.weighted.precision), 11) +
             pad_left(fixed2(r.weighted.recall), 11) + pad_left(fixed2(r.weighted.f1), 11) +
             pad_left(total, 11) + "\n";
      break;
    }
  }
  if (r.zero_division && format == ReportFormat::text) {
    out += "\nwarning: some metrics had a zero denominator and were set to 0\n";
  }
  return out;
}

}  // namespace adtext
