#include "adtext/synthetic.hpp"

#include <set>

#include <unicode/locid.h>
#include <unicode/unistr.h>

#include "adtext/random.hpp"
#include "json.hpp"

namespace adtext {

namespace {

const std::vector<std::vector<std::string>>& class_keywords() {
  static const std::vector<std::vector<std::string>> keywords = {
      {"çiçek", "çikolata", "buket", "gül", "orkide", "saksı", "aranjman", "papatya", "lale", "sevgililer"},
      {"köpek", "kedi", "mama", "petshop", "tasma", "akvaryum", "muhabbet", "vitamin", "kum", "veteriner"},
      {"bileklik", "kolye", "yüzük", "küpe", "saat", "pırlanta", "altın", "gümüş", "taşlı", "mücevher"},
      {"nakliye", "kargo", "taşıma", "depolama", "evden", "paketleme", "asansörlü", "kamyon", "lojistik", "gönderi"},
      {"jant", "hidrolik", "motor", "yağı", "lastik", "fren", "akü", "far", "egzoz", "yedek"},
      {"oyun", "konsol", "korku", "joystick", "gamepad", "kulaklık", "turnuva", "oyuncu", "playstation", "kaçış"},
      {"terapi", "psikolog", "öfke", "danışmanlık", "kaygı", "depresyon", "seans", "klinik", "aile", "stres"},
      {"temizlik", "halı", "yıkama", "perde", "deterjan", "leke", "buharlı", "dezenfeksiyon", "süpürge", "cam"},
      {"tur", "otel", "tatil", "konaklama", "yurtdışı", "gezi", "kapadokya", "cruise", "rezervasyon", "acente"},
      {"vize", "pasaport", "schengen", "konsolosluk", "evraksız", "randevu", "başvuru", "rusya", "amerika", "oturum"},
      {"ingilizce", "almanca", "dil", "kurs", "konuşma", "drama", "gramer", "öğretmen", "müfredat", "ielts"},
      {"yurt", "öğrenci", "oda", "wireless", "kız", "erkek", "pansiyon", "yemekhane", "etüt", "sıcak"},
  };
  return keywords;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> fillers = {
      "en",     "uygun",    "fiyat",    "fiyatlarla", "hızlı",   "kolay",     "özel",      "profesyonel",
      "fırsat", "hemen",    "şimdi",    "kaliteli",   "güvenilir", "indirim", "kampanya",  "ücretsiz",
      "yeni",   "ucuz",     "hizmet",   "türkiye",    "bize",    "ulaşın",    "için",      "ve",
      "ile",    "garantili", "avantajlı", "uzman",    "burada",  "doğru",     "adresi",    "eşsiz",
  };
  return fillers;
}

std::string title_case(const std::string& word) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(word);
  if (u.isEmpty()) return word;
  icu::UnicodeString head = u.tempSubString(0, u.moveIndex32(0, 1));
  icu::UnicodeString tail = u.tempSubString(u.moveIndex32(0, 1));
  head.toUpper(icu::Locale("tr"));
  std::string out;
  (head + tail).toUTF8String(out);
  return out;
}

}  // namespace

const std::vector<std::string>& synthetic_categories() {
  static const std::vector<std::string> names = {
      "Çiçek Siparişi",
      "Evcil Hayvan Ürünleri",
      "Mücevher, Takı & Aksesuar",
      "Nakliyat, Kargo",
      "Oto Aksesuar & Yedek Parça",
      "Oyunlar, Oyun Konsolları & Ekipmanları",
      "Psikolojik Danışmanlık",
      "Temizlik & Halı Yıkama",
      "Tur Acenteleri",
      "Vize İşlemleri",
      "Yabancı Dil Eğitimi",
      "Yurtlar",
  };
  return names;
}

std::vector<RawRecord> synthetic_ad_corpus(const SyntheticOptions& options) {
  Rng rng(options.seed);
  const auto& names = synthetic_categories();
  const auto& fillers = filler_words();
  std::vector<RawRecord> records;
  records.reserve(names.size() * options.texts_per_class);
  std::set<std::string> seen;
  std::size_t next_id = 0;

  auto pick_count = [&](std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); };

  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& keys = class_keywords()[c];
    std::size_t made = 0;
    while (made < options.texts_per_class) {
      std::vector<std::string> words;
      const std::size_t nk = pick_count(options.min_keywords, options.max_keywords);
      const std::size_t nf = pick_count(options.min_fillers, options.max_fillers);
      for (std::size_t i = 0; i < nk; ++i) words.push_back(keys[rng.below(keys.size())]);
      for (std::size_t i = 0; i < nf; ++i) words.push_back(fillers[rng.below(fillers.size())]);
      rng.shuffle(std::span<std::string>(words));

      std::string normalized;
      for (const auto& w : words) normalized += (normalized.empty() ? "" : " ") + w;
      if (!seen.insert(normalized).second) continue;

      std::string text;
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) text += rng.uniform() < 0.1 ? " & " : " ";
        text += title_case(words[i]);
      }
      if (rng.uniform() < 0.3) text += "!";
      records.push_back({std::to_string(next_id++), names[c], std::move(text)});
      ++made;
    }
  }
  return records;
}

std::vector<std::string> repetitive_corpus(std::size_t repeats) {
  static const std::vector<std::string> sentences = {
      "çiçek ve çikolata hediyeleri burada",
      "özel günlerinize özel çiçekler",
      "köpek maması ve vitaminleri uygun fiyatlarla",
      "en ucuz ve en yeni kolye modelleri",
      "nakliye ve depolamada öncü firma",
      "son teknoloji hidrolik yağlar",
      "oyunlarda uygun fiyatlar sizi bekliyor",
      "kişiye özel klinik terapi yöntemleri",
      "profesyonel halı yıkama hizmetleri",
      "avantajlı otel ve tatil fırsatı",
      "hızlı ve kolay vize işlemleri",
      "erken yaşta ingilizce dil eğitimi",
      "ücretsiz wireless ve çalışma odaları",
      "sıcak su ve güvenlik hizmeti",
  };
  std::vector<std::string> out;
  out.reserve(sentences.size() * repeats);
  for (std::size_t r = 0; r < repeats; ++r) out.insert(out.end(), sentences.begin(), sentences.end());
  return out;
}

std::string to_jsonl(std::span<const RawRecord> records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j = {{"id", r.id}, {"category", r.category_name}, {"text", r.text}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace adtext
