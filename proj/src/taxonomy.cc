#include "hoigen/taxonomy.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "hoigen/error.h"
#include "hoigen/kvdoc.h"
#include "hoigen/rng.h"

namespace hoigen {

namespace {

constexpr int kMaxUcAttempts = 200000;

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

long long ParseInt(const std::string& tok, int lineno) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("line " + std::to_string(lineno) + ": not an integer: '" + tok + "'");
  }
  return v;
}

// Per-verb and per-object counts of seen HOIs.
struct Coverage {
  std::vector<int> verb;
  std::vector<int> object;

  Coverage(const HoiTaxonomy& tax, const std::vector<bool>& unseen)
      : verb(tax.num_verbs(), 0), object(tax.num_objects(), 0) {
    for (int h = 0; h < tax.num_hois(); ++h) {
      if (unseen[h]) continue;
      ++verb[tax.hois[h].verb];
      ++object[tax.hois[h].object];
    }
  }
};

// Set of verbs/objects that occur in at least one HOI.
std::set<int> UsedVerbs(const HoiTaxonomy& tax) {
  std::set<int> s;
  for (const auto& p : tax.hois) s.insert(p.verb);
  return s;
}
std::set<int> UsedObjects(const HoiTaxonomy& tax) {
  std::set<int> s;
  for (const auto& p : tax.hois) s.insert(p.object);
  return s;
}

ZeroShotSplit Finish(const HoiTaxonomy& tax, SplitSetting setting, int unseen_count,
                     std::uint64_t seed, const std::vector<bool>& unseen) {
  ZeroShotSplit split;
  split.setting = setting;
  split.seed = seed;
  split.unseen_count = unseen_count;
  split.num_hois = tax.num_hois();
  for (int h = 0; h < tax.num_hois(); ++h) {
    if (unseen[h]) {
      split.unseen_hois.push_back(h);
    } else {
      split.seen_hois.push_back(h);
      split.seen_objects.insert(tax.hois[h].object);
      split.seen_verbs.insert(tax.hois[h].verb);
    }
  }
  return split;
}

// Greedy count-ordered selection that never orphans a verb or an object.
ZeroShotSplit CountOrderedSplit(const HoiTaxonomy& tax, SplitSetting setting,
                                int unseen_count, std::uint64_t seed) {
  if (!tax.has_counts()) {
    throw MissingCounts("RF/NF splits need training instance counts for every HOI");
  }
  std::vector<int> order(tax.num_hois());
  std::iota(order.begin(), order.end(), 0);
  const bool rare_first = setting == SplitSetting::kRfUc;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const long long ca = tax.train_instance_counts[a];
    const long long cb = tax.train_instance_counts[b];
    return rare_first ? ca < cb : ca > cb;
  });
  std::vector<bool> unseen(tax.num_hois(), false);
  Coverage cov(tax, unseen);
  int taken = 0;
  for (int h : order) {
    if (taken == unseen_count) break;
    const HoiPair p = tax.hois[h];
    if (cov.verb[p.verb] <= 1 || cov.object[p.object] <= 1) continue;
    unseen[h] = true;
    --cov.verb[p.verb];
    --cov.object[p.object];
    ++taken;
  }
  if (taken < unseen_count) {
    throw InfeasibleSplit("cannot hold out " + std::to_string(unseen_count) +
                          " HOIs while keeping every verb and object seen");
  }
  return Finish(tax, setting, unseen_count, seed, unseen);
}

ZeroShotSplit RandomCombinationSplit(const HoiTaxonomy& tax, int unseen_count,
                                     std::uint64_t seed) {
  // A split must keep at least max(|V|, |O|) HOIs seen.
  const int lower_bound = std::max(static_cast<int>(UsedVerbs(tax).size()),
                                   static_cast<int>(UsedObjects(tax).size()));
  if (tax.num_hois() - unseen_count < lower_bound) {
    throw InfeasibleSplit("unseen_count too large to keep every verb and object seen");
  }
  Rng rng(DeriveSeed(seed, "split/UC"));
  for (int attempt = 0; attempt < kMaxUcAttempts; ++attempt) {
    std::vector<bool> unseen(tax.num_hois(), false);
    for (std::size_t h : rng.SampleWithoutReplacement(tax.num_hois(), unseen_count)) {
      unseen[h] = true;
    }
    Coverage cov(tax, unseen);
    bool ok = true;
    for (const auto& p : tax.hois) {
      if (cov.verb[p.verb] == 0 || cov.object[p.object] == 0) {
        ok = false;
        break;
      }
    }
    if (ok) return Finish(tax, SplitSetting::kUC, unseen_count, seed, unseen);
  }
  throw InfeasibleSplit("no valid UC split found after " +
                        std::to_string(kMaxUcAttempts) + " draws");
}

ZeroShotSplit ColumnSplit(const HoiTaxonomy& tax, SplitSetting setting,
                          int held_out, std::uint64_t seed) {
  const bool by_object = setting == SplitSetting::kUO;
  const std::set<int> used = by_object ? UsedObjects(tax) : UsedVerbs(tax);
  const std::vector<int> pool(used.begin(), used.end());
  if (held_out >= static_cast<int>(pool.size())) {
    throw InfeasibleSplit(std::string("cannot hold out ") + std::to_string(held_out) +
                          (by_object ? " of " : " of ") + std::to_string(pool.size()) +
                          (by_object ? " objects" : " verbs"));
  }
  Rng rng(DeriveSeed(seed, by_object ? "split/UO" : "split/UV"));
  std::set<int> removed;
  for (std::size_t i : rng.SampleWithoutReplacement(pool.size(), held_out)) {
    removed.insert(pool[i]);
  }
  std::vector<bool> unseen(tax.num_hois(), false);
  for (int h = 0; h < tax.num_hois(); ++h) {
    const int key = by_object ? tax.hois[h].object : tax.hois[h].verb;
    unseen[h] = removed.count(key) > 0;
  }
  return Finish(tax, setting, held_out, seed, unseen);
}

}  // namespace

bool HoiTaxonomy::has_counts() const {
  if (train_instance_counts.size() != hois.size()) return false;
  return std::none_of(train_instance_counts.begin(), train_instance_counts.end(),
                      [](long long c) { return c == kUnknownCount; });
}

std::optional<int> HoiTaxonomy::Find(int verb, int object) const {
  for (int h = 0; h < num_hois(); ++h) {
    if (hois[h].verb == verb && hois[h].object == object) return h;
  }
  return std::nullopt;
}

std::string HoiTaxonomy::HoiName(int hoi) const {
  if (hoi < 0 || hoi >= num_hois()) throw IndexError("HOI id out of range");
  return verbs[hois[hoi].verb] + " " + objects[hois[hoi].object];
}

void HoiTaxonomy::Validate() const {
  if (objects.empty() || verbs.empty() || hois.empty()) {
    throw ValidationError("taxonomy needs objects, verbs and hois");
  }
  if (train_instance_counts.size() != hois.size()) {
    throw ValidationError("one training count per HOI is required");
  }
  std::set<std::pair<int, int>> seen;
  for (int h = 0; h < num_hois(); ++h) {
    const HoiPair p = hois[h];
    if (p.verb < 0 || p.verb >= num_verbs()) {
      throw ValidationError("HOI " + std::to_string(h) + ": verb id out of range");
    }
    if (p.object < 0 || p.object >= num_objects()) {
      throw ValidationError("HOI " + std::to_string(h) + ": object id out of range");
    }
    if (!seen.insert({p.verb, p.object}).second) {
      throw ValidationError("duplicate HOI pair (" + std::to_string(p.verb) + ", " +
                            std::to_string(p.object) + ")");
    }
    const long long c = train_instance_counts[h];
    if (c < 0 && c != kUnknownCount) {
      throw ValidationError("HOI " + std::to_string(h) + ": negative count");
    }
  }
}

HoiTaxonomy ParseTaxonomy(const std::string& text) {
  enum class Section { kNone, kObjects, kVerbs, kHois } section = Section::kNone;
  HoiTaxonomy tax;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = Trim(raw);
    if (line.empty()) continue;
    if (line == "#objects") {
      section = Section::kObjects;
      continue;
    }
    if (line == "#verbs") {
      section = Section::kVerbs;
      continue;
    }
    if (line == "#hois") {
      section = Section::kHois;
      continue;
    }
    if (line[0] == '#') continue;  // comment
    switch (section) {
      case Section::kNone:
        throw ParseError("line " + std::to_string(lineno) + ": entry before any section header");
      case Section::kObjects:
        tax.objects.push_back(line);
        break;
      case Section::kVerbs:
        tax.verbs.push_back(line);
        break;
      case Section::kHois: {
        std::istringstream fields(line);
        std::string v, o, c, extra;
        if (!(fields >> v >> o >> c) || (fields >> extra)) {
          throw ParseError("line " + std::to_string(lineno) +
                           ": expected 'verb_id object_id count'");
        }
        HoiPair p;
        p.verb = static_cast<int>(ParseInt(v, lineno));
        p.object = static_cast<int>(ParseInt(o, lineno));
        tax.hois.push_back(p);
        tax.train_instance_counts.push_back(c == "-" ? kUnknownCount : ParseInt(c, lineno));
        break;
      }
    }
  }
  tax.Validate();
  return tax;
}

HoiTaxonomy LoadTaxonomy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open taxonomy file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseTaxonomy(ss.str());
}

std::string FormatTaxonomy(const HoiTaxonomy& tax) {
  std::ostringstream out;
  out << "#objects\n";
  for (const auto& o : tax.objects) out << o << '\n';
  out << "#verbs\n";
  for (const auto& v : tax.verbs) out << v << '\n';
  out << "#hois\n";
  for (int h = 0; h < tax.num_hois(); ++h) {
    out << tax.hois[h].verb << ' ' << tax.hois[h].object << ' ';
    const long long c = tax.train_instance_counts[h];
    if (c == kUnknownCount) {
      out << '-';
    } else {
      out << c;
    }
    out << '\n';
  }
  return out.str();
}

void SaveTaxonomy(const HoiTaxonomy& tax, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << FormatTaxonomy(tax);
}

RarityPartition PartitionByRarity(const HoiTaxonomy& tax) {
  if (!tax.has_counts()) {
    throw MissingCounts("rarity needs training instance counts for every HOI");
  }
  RarityPartition part;
  for (int h = 0; h < tax.num_hois(); ++h) {
    (tax.train_instance_counts[h] < kRareThreshold ? part.rare : part.nonrare).push_back(h);
  }
  return part;
}

std::string SettingName(SplitSetting s) {
  switch (s) {
    case SplitSetting::kUC:
      return "UC";
    case SplitSetting::kRfUc:
      return "RF_UC";
    case SplitSetting::kNfUc:
      return "NF_UC";
    case SplitSetting::kUV:
      return "UV";
    case SplitSetting::kUO:
      return "UO";
  }
  return "?";
}

SplitSetting ParseSetting(const std::string& name) {
  std::string n;
  for (char c : name) n += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (SplitSetting s : AllSettings()) {
    if (SettingName(s) == n) return s;
  }
  throw ConfigError("unknown zero-shot setting '" + name + "'");
}

const std::vector<SplitSetting>& AllSettings() {
  static const std::vector<SplitSetting> all = {SplitSetting::kUC, SplitSetting::kRfUc,
                                                SplitSetting::kNfUc, SplitSetting::kUV,
                                                SplitSetting::kUO};
  return all;
}

bool ZeroShotSplit::IsSeen(int hoi) const {
  return std::binary_search(seen_hois.begin(), seen_hois.end(), hoi);
}

ZeroShotSplit BuildSplit(const HoiTaxonomy& tax, SplitSetting setting, int unseen_count,
                         std::uint64_t seed) {
  if (unseen_count < 0) throw InfeasibleSplit("unseen_count must be non-negative");
  switch (setting) {
    case SplitSetting::kUO:
    case SplitSetting::kUV:
      return ColumnSplit(tax, setting, unseen_count, seed);
    default:
      break;
  }
  if (unseen_count >= tax.num_hois()) {
    throw InfeasibleSplit("unseen_count must be smaller than the number of HOIs");
  }
  if (setting == SplitSetting::kUC) return RandomCombinationSplit(tax, unseen_count, seed);
  return CountOrderedSplit(tax, setting, unseen_count, seed);
}

std::vector<std::string> CheckSplit(const HoiTaxonomy& tax, const ZeroShotSplit& split) {
  std::vector<std::string> issues;
  std::vector<int> membership(tax.num_hois(), 0);
  for (int h : split.seen_hois) {
    if (h < 0 || h >= tax.num_hois()) {
      issues.push_back("seen HOI id out of range: " + std::to_string(h));
      continue;
    }
    membership[h] |= 1;
  }
  for (int h : split.unseen_hois) {
    if (h < 0 || h >= tax.num_hois()) {
      issues.push_back("unseen HOI id out of range: " + std::to_string(h));
      continue;
    }
    if (membership[h] & 1) issues.push_back("HOI " + std::to_string(h) + " is both seen and unseen");
    membership[h] |= 2;
  }
  for (int h = 0; h < tax.num_hois(); ++h) {
    if (membership[h] == 0) issues.push_back("HOI " + std::to_string(h) + " is in neither set");
  }
  std::set<int> seen_objects, seen_verbs;
  for (int h : split.seen_hois) {
    if (h < 0 || h >= tax.num_hois()) continue;
    seen_objects.insert(tax.hois[h].object);
    seen_verbs.insert(tax.hois[h].verb);
  }
  if (seen_objects != split.seen_objects) issues.push_back("seen_objects is not derived from seen_hois");
  if (seen_verbs != split.seen_verbs) issues.push_back("seen_verbs is not derived from seen_hois");

  switch (split.setting) {
    case SplitSetting::kUC:
    case SplitSetting::kRfUc:
    case SplitSetting::kNfUc:
      for (int v : UsedVerbs(tax)) {
        if (!seen_verbs.count(v)) issues.push_back("verb " + tax.verbs[v] + " is never seen");
      }
      for (int o : UsedObjects(tax)) {
        if (!seen_objects.count(o)) issues.push_back("object " + tax.objects[o] + " is never seen");
      }
      break;
    case SplitSetting::kUO:
      for (int h : split.unseen_hois) {
        if (h >= 0 && h < tax.num_hois() && seen_objects.count(tax.hois[h].object)) {
          issues.push_back("unseen HOI " + std::to_string(h) + " has a seen object");
        }
      }
      break;
    case SplitSetting::kUV:
      for (int h : split.unseen_hois) {
        if (h >= 0 && h < tax.num_hois() && seen_verbs.count(tax.hois[h].verb)) {
          issues.push_back("unseen HOI " + std::to_string(h) + " has a seen verb");
        }
      }
      break;
  }
  return issues;
}

void SaveSplit(const ZeroShotSplit& split, const std::filesystem::path& path) {
  KvDoc doc;
  doc.Set("setting", SettingName(split.setting));
  doc.Set("seed", static_cast<long long>(split.seed));
  doc.Set("unseen_count", split.unseen_count);
  doc.Set("num_hois", split.num_hois);
  std::string ids;
  for (std::size_t i = 0; i < split.unseen_hois.size(); ++i) {
    if (i) ids += ',';
    ids += std::to_string(split.unseen_hois[i]);
  }
  doc.Set("unseen_hois", ids);
  doc.Save(path);
}

ZeroShotSplit LoadSplit(const HoiTaxonomy& tax, const std::filesystem::path& path) {
  const KvDoc doc = KvDoc::Load(path);
  if (doc.GetInt("num_hois") != tax.num_hois()) {
    throw ValidationError("split was built for a different taxonomy");
  }
  std::vector<bool> unseen(tax.num_hois(), false);
  std::istringstream ids(doc.GetString("unseen_hois"));
  std::string tok;
  while (std::getline(ids, tok, ',')) {
    tok = Trim(tok);
    if (tok.empty()) continue;
    const long long h = ParseInt(tok, 0);
    if (h < 0 || h >= tax.num_hois()) throw ValidationError("unseen HOI id out of range");
    unseen[h] = true;
  }
  ZeroShotSplit split =
      Finish(tax, ParseSetting(doc.GetString("setting")),
             static_cast<int>(doc.GetInt("unseen_count")),
             static_cast<std::uint64_t>(doc.GetInt("seed")), unseen);
  return split;
}

Vec MultiHot(const std::vector<int>& labels, int num_classes) {
  Vec out(num_classes, 0.0);
  for (int l : labels) {
    if (l < 0 || l >= num_classes) {
      throw IndexError("class id " + std::to_string(l) + " out of range for C=" +
                       std::to_string(num_classes));
    }
    out[l] = 1.0;
  }
  return out;
}

}  // namespace hoigen
