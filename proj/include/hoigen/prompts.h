#ifndef HOIGEN_PROMPTS_H_
#define HOIGEN_PROMPTS_H_

#include <string>
#include <vector>

#include "hoigen/taxonomy.h"

namespace hoigen {

// Progressive form of a verb name: "ride" -> "riding", "sit_on" -> "sitting on".
std::string VerbGerund(const std::string& verb);
// Object name with underscores replaced: "baseball_bat" -> "baseball bat".
std::string ObjectPhrase(const std::string& object);
// Indefinite article for a noun phrase ("a" or "an").
std::string Article(const std::string& noun_phrase);

// Generator prompts, one per branch.
std::string UnionPrompt(const HoiTaxonomy& tax, int hoi);         // "a photo of a person riding a horse"
std::string HumanPrompt(const HoiTaxonomy& tax, int object);      // "person who interacts with horse"
std::string ObjectPrompt(const HoiTaxonomy& tax, int object);     // "a photo of a horse"
// Manual interaction prompt used for the text prototypes.
std::string InteractionPrompt(const HoiTaxonomy& tax, int hoi);   // "a photo of a person is riding a horse"

// Lower-cased alphanumeric tokens.
std::vector<std::string> Tokenize(const std::string& text);

}  // namespace hoigen

#endif  // HOIGEN_PROMPTS_H_
