#include "hoigen/prompts.h"

#include <cctype>
#include <map>

namespace hoigen {

namespace {

bool IsVowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::string GerundWord(const std::string& w) {
  static const std::map<std::string, std::string> kIrregular = {
      {"lie", "lying"}, {"tie", "tying"}, {"die", "dying"},
      {"open", "opening"}, {"exit", "exiting"}, {"control", "controlling"},
      {"be", "being"}, {"see", "seeing"}};
  if (auto it = kIrregular.find(w); it != kIrregular.end()) return it->second;
  if (w.size() >= 2 && w.back() == 'e' && !IsVowel(w[w.size() - 2])) {
    return w.substr(0, w.size() - 1) + "ing";
  }
  // Short consonant-vowel-consonant words double the final consonant.
  if (w.size() >= 3 && w.size() <= 4) {
    const char a = w[w.size() - 3], b = w[w.size() - 2], c = w.back();
    if (!IsVowel(a) && IsVowel(b) && !IsVowel(c) && c != 'w' && c != 'x' && c != 'y') {
      return w + c + "ing";
    }
  }
  return w + "ing";
}

}  // namespace

std::string VerbGerund(const std::string& verb) {
  if (verb == "no_interaction") return "not interacting with";
  std::string out;
  std::size_t start = 0;
  bool first = true;
  while (start <= verb.size()) {
    const auto end = verb.find('_', start);
    const std::string part = verb.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!part.empty()) {
      if (!out.empty()) out += ' ';
      out += first ? GerundWord(part) : part;
      first = false;
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

std::string ObjectPhrase(const std::string& object) {
  std::string out = object;
  for (char& c : out) {
    if (c == '_') c = ' ';
  }
  return out;
}

std::string Article(const std::string& noun_phrase) {
  if (noun_phrase.empty()) return "a";
  return IsVowel(static_cast<char>(std::tolower(static_cast<unsigned char>(noun_phrase[0])))) ? "an" : "a";
}

std::string UnionPrompt(const HoiTaxonomy& tax, int hoi) {
  const HoiPair p = tax.hois.at(hoi);
  const std::string obj = ObjectPhrase(tax.objects[p.object]);
  return "a photo of a person " + VerbGerund(tax.verbs[p.verb]) + " " + Article(obj) + " " + obj;
}

std::string HumanPrompt(const HoiTaxonomy& tax, int object) {
  return "person who interacts with " + ObjectPhrase(tax.objects.at(object));
}

std::string ObjectPrompt(const HoiTaxonomy& tax, int object) {
  const std::string obj = ObjectPhrase(tax.objects.at(object));
  return "a photo of " + Article(obj) + " " + obj;
}

std::string InteractionPrompt(const HoiTaxonomy& tax, int hoi) {
  const HoiPair p = tax.hois.at(hoi);
  const std::string obj = ObjectPhrase(tax.objects[p.object]);
  return "a photo of a person is " + VerbGerund(tax.verbs[p.verb]) + " " + Article(obj) + " " + obj;
}

std::vector<std::string> Tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

}  // namespace hoigen
