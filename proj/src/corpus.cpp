#include "adtext/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <unicode/locid.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "adtext/errors.hpp"
#include "adtext/random.hpp"
#include "json.hpp"

namespace adtext {

namespace {

void append_utf8(std::string& out, UChar32 cp) {
  const auto c = static_cast<std::uint32_t>(cp);
  if (c < 0x80) {
    out += static_cast<char>(c);
  } else if (c < 0x800) {
    out += static_cast<char>(0xC0 | (c >> 6));
    out += static_cast<char>(0x80 | (c & 0x3F));
  } else if (c < 0x10000) {
    out += static_cast<char>(0xE0 | (c >> 12));
    out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (c & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (c >> 18));
    out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (c & 0x3F));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

std::string_view strip_bom(std::string_view s) {
  if (s.starts_with("\xEF\xBB\xBF")) s.remove_prefix(3);
  return s;
}

std::string field_as_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw InputError("malformed record at line " + std::to_string(line) + ": missing field '" +
                     key + "'");
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw InputError("malformed record at line " + std::to_string(line) + ": field '" + key +
                   "' is not a string");
}

void check_record(const RawRecord& r, std::size_t line) {
  if (r.category_name.empty()) {
    throw InputError("malformed record at line " + std::to_string(line) + ": empty category");
  }
  if (r.text.empty()) {
    throw InputError("malformed record at line " + std::to_string(line) + ": empty text");
  }
}

}  // namespace

LabelMap::LabelMap(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  names_ = std::move(names);
  for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], static_cast<int>(i));
}

LabelMap LabelMap::from_records(std::span<const RawRecord> records) {
  std::vector<std::string> names;
  names.reserve(records.size());
  for (const auto& r : records) names.push_back(r.category_name);
  return LabelMap(std::move(names));
}

int LabelMap::index(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("unknown label: " + std::string(name));
  return it->second;
}

bool LabelMap::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

CorpusFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
}

std::vector<RawRecord> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw InputError("corpus file not found: " + path.string());
  const std::string content = read_file(path);
  return format == CorpusFormat::csv ? parse_csv(content) : parse_jsonl(content);
}

std::vector<RawRecord> parse_jsonl(std::string_view content) {
  content = strip_bom(content);
  std::vector<RawRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError("malformed record at line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw InputError("malformed record at line " + std::to_string(line_no) +
                       ": expected a JSON object");
    }
    RawRecord r{field_as_string(obj, "id", line_no), field_as_string(obj, "category", line_no),
                field_as_string(obj, "text", line_no)};
    check_record(r, line_no);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw EmptyCorpusError("empty corpus");
  return records;
}

std::vector<std::vector<std::string>> split_csv(std::string_view content,
                                                std::vector<std::size_t>* start_lines) {
  content = strip_bom(content);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t row_line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) {
      rows.push_back(std::move(row));
      if (start_lines) start_lines->push_back(row_line);
    }
    row.clear();
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) {
          throw InputError("malformed CSV at line " + std::to_string(line) +
                           ": quote inside unquoted field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        row_line = line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw InputError("malformed CSV: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<RawRecord> parse_csv(std::string_view content) {
  std::vector<std::size_t> lines;
  auto rows = split_csv(content, &lines);
  if (rows.empty()) throw EmptyCorpusError("empty corpus");

  const auto& header = rows.front();
  auto column = [&](const char* name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw InputError(std::string("malformed CSV header at line 1: missing column '") + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = column("id");
  const std::size_t cat_col = column("category");
  const std::size_t text_col = column("text");

  std::vector<RawRecord> records;
  records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw InputError("malformed record at line " + std::to_string(lines[r]) + ": expected " +
                       std::to_string(header.size()) + " fields, got " + std::to_string(row.size()));
    }
    RawRecord rec{row[id_col], row[cat_col], row[text_col]};
    check_record(rec, lines[r]);
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw EmptyCorpusError("empty corpus");
  return records;
}

std::string normalize(std::string_view text, bool turkish_lowercase) {
  icu::UnicodeString u =
      icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (turkish_lowercase) {
    u.toLower(icu::Locale("tr"));
  } else {
    u.toLower(icu::Locale::getRoot());
  }

  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    const UChar32 cp = u.char32At(i);
    const auto mask = U_GET_GC_MASK(cp);
    if ((mask & (U_GC_P_MASK | U_GC_S_MASK)) != 0 || u_isUWhiteSpace(cp)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    append_utf8(out, cp);
  }
  return out;
}

std::vector<RawRecord> dedup(std::span<const RawRecord> records) {
  std::set<std::pair<std::string_view, std::string_view>> seen;
  std::vector<RawRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (seen.emplace(r.text, r.category_name).second) out.push_back(r);
  }
  return out;
}

std::vector<RawRecord> preprocess(std::span<const RawRecord> records, bool turkish_lowercase) {
  std::vector<RawRecord> normalized;
  normalized.reserve(records.size());
  for (const auto& r : records) {
    RawRecord n{r.id, r.category_name, normalize(r.text, turkish_lowercase)};
    if (!n.text.empty()) normalized.push_back(std::move(n));
  }
  return dedup(normalized);
}

std::vector<LabeledExample> label_examples(std::span<const RawRecord> records,
                                           const LabelMap& labels) {
  std::vector<LabeledExample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.id, r.text, labels.index(r.category_name)});
  return out;
}

DatasetSplit stratified_split(std::span<const LabeledExample> examples, double train_fraction,
                              std::uint64_t seed, std::span<const std::string> class_names) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1), got " + std::to_string(train_fraction));
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].label < 0) throw InputError("negative label in example " + examples[i].id);
    by_class[examples[i].label].push_back(i);
  }

  std::vector<char> in_train(examples.size(), 0);
  for (auto& [label, members] : by_class) {
    if (members.size() < 2) {
      std::string name = static_cast<std::size_t>(label) < class_names.size()
                             ? class_names[static_cast<std::size_t>(label)]
                             : std::to_string(label);
      throw InputError("insufficient class size: class '" + name + "' has " +
                       std::to_string(members.size()) + " example(s), need at least 2");
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
    rng.shuffle(std::span<std::size_t>(members));
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(members.size()) + 0.5));
    for (std::size_t k = 0; k < n_train; ++k) in_train[members[k]] = 1;
  }

  DatasetSplit split;
  split.seed = seed;
  split.train_fraction = train_fraction;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    (in_train[i] ? split.train : split.test).push_back(examples[i]);
  }
  return split;
}

std::size_t word_count(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

}  // namespace adtext
