// Writes a synthetic labeled ad corpus as JSONL to stdout or --out.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "adtext/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic 12-class ad text corpus", "adtext-synth"};
  adtext::SyntheticOptions options;
  std::string out;
  app.add_option("--per-class", options.texts_per_class, "texts per category")->capture_default_str();
  app.add_option("--seed", options.seed, "generator seed")->capture_default_str();
  app.add_option("--out", out, "output file (default: stdout)");
  CLI11_PARSE(app, argc, argv);

  const std::string jsonl = adtext::to_jsonl(adtext::synthetic_ad_corpus(options));
  if (out.empty()) {
    std::cout << jsonl;
    return 0;
  }
  std::ofstream file(out, std::ios::binary);
  if (!file) {
    std::cerr << "cannot write " << out << "\n";
    return 2;
  }
  file << jsonl;
  return 0;
}
