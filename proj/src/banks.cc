#include "hoigen/banks.h"

#include <algorithm>

#include "hoigen/archive.h"
#include "hoigen/error.h"
#include "hoigen/prompts.h"
#include "hoigen/rng.h"

namespace hoigen {

namespace {

const Matrix& Pool(const FeaturePools& pools, Branch b, int hoi) {
  auto it = pools.find(b);
  if (it == pools.end() || hoi >= static_cast<int>(it->second.size())) {
    throw InsufficientFeatures("no " + BranchName(b) + " features for HOI " + std::to_string(hoi));
  }
  return it->second[hoi];
}

std::vector<Vec> Sample(const Matrix& pool, int n, Rng& rng, const std::string& what) {
  if (static_cast<int>(pool.rows()) < n) {
    throw InsufficientFeatures(what + ": " + std::to_string(pool.rows()) + " features, need " +
                               std::to_string(n));
  }
  std::vector<Vec> rows;
  for (std::size_t i : rng.SampleWithoutReplacement(pool.rows(), n)) {
    rows.emplace_back(pool.row(i).begin(), pool.row(i).end());
  }
  return rows;
}

}  // namespace

void PrototypeBank::Validate() const {
  if (keys.rows() != values.rows()) throw ValidationError("bank keys and values differ in rows");
  for (std::size_t r = 0; r < values.rows(); ++r) {
    bool any = false;
    for (double v : values.row(r)) {
      if (v != 0.0 && v != 1.0) throw ValidationError("bank values must be binary");
      any = any || v == 1.0;
    }
    if (!any) throw ValidationError("bank row " + std::to_string(r) + " labels no class");
  }
}

std::vector<int> PrototypeBank::CoveredClasses() const {
  std::vector<int> out;
  for (std::size_t c = 0; c < values.cols(); ++c) {
    for (std::size_t r = 0; r < values.rows(); ++r) {
      if (values(r, c) != 0.0) {
        out.push_back(static_cast<int>(c));
        break;
      }
    }
  }
  return out;
}

std::string ConstructionName(Construction c) {
  switch (c) {
    case Construction::kG:
      return "G";
    case Construction::kR:
      return "R";
    case Construction::kRPlusG:
      return "R_plus_G";
    case Construction::kRConcatG:
      return "R_concat_G";
  }
  return "?";
}

Construction ParseConstruction(const std::string& name) {
  if (name == "G") return Construction::kG;
  if (name == "R") return Construction::kR;
  if (name == "R_plus_G" || name == "R+G") return Construction::kRPlusG;
  if (name == "R_concat_G" || name == "R(+)G" || name == "RconcatG") return Construction::kRConcatG;
  throw ParseError("unknown bank construction '" + name + "'");
}

std::map<Branch, PrototypeBank> BuildGenerativeBanks(const FeaturePools* generated,
                                                     const FeaturePools* realistic,
                                                     const ZeroShotSplit& split, int n_size,
                                                     Construction construction,
                                                     std::uint64_t seed) {
  if (n_size < 1) throw ConfigError("N_size must be >= 1");
  const bool use_g = construction != Construction::kR;
  const bool use_r = construction != Construction::kG;
  if (use_g && !generated) throw InsufficientFeatures("construction needs generated features");
  if (use_r && !realistic) throw InsufficientFeatures("construction needs realistic features");
  const int c = split.num_hois;
  std::map<Branch, PrototypeBank> banks;
  for (Branch b : kRegionBranches) {
    Rng rng(DeriveSeed(seed, "bank/" + BranchName(b)));
    PrototypeBank bank;
    bank.kind = b;
    for (int h = 0; h < c; ++h) {
      const std::string what = BranchName(b) + " HOI " + std::to_string(h);
      const bool seen = split.IsSeen(h);
      std::vector<Vec> rows;
      auto gen = [&] { return Sample(Pool(*generated, b, h), n_size, rng, what); };
      auto real = [&] { return Sample(Pool(*realistic, b, h), n_size, rng, what); };
      if (!seen) {
        // Seen-only realistic data cannot describe unseen categories.
        if (construction != Construction::kR) rows = gen();
      } else if (construction == Construction::kG) {
        rows = gen();
      } else if (construction == Construction::kR) {
        rows = real();
      } else if (construction == Construction::kRPlusG) {
        rows = real();
        const auto g = gen();
        for (int i = 0; i < n_size; ++i) {
          for (std::size_t k = 0; k < rows[i].size(); ++k) rows[i][k] = 0.5 * (rows[i][k] + g[i][k]);
        }
      } else {
        rows = real();
        for (auto& g : gen()) rows.push_back(std::move(g));
      }
      const Vec label = MultiHot({h}, c);
      for (const auto& r : rows) {
        if (bank.keys.empty()) {
          bank.keys = Matrix(0, r.size());
          bank.values = Matrix(0, c);
        }
        bank.keys.AppendRow(r);
        bank.values.AppendRow(label);
      }
    }
    if (bank.keys.empty()) throw InsufficientFeatures("generative bank would be empty");
    banks[b] = std::move(bank);
  }
  return banks;
}

KnowledgeBanks BuildMultiKnowledgeBanks(const std::vector<Scene>& images, const Backend& backend,
                                        int num_classes) {
  if (images.empty()) throw EmptyDataset("multi-knowledge bank needs training images");
  KnowledgeBanks kb;
  kb.clip.kind = Branch::kGlobalClip;
  kb.dino.kind = Branch::kGlobalDino;
  kb.clip.keys = Matrix(0, backend.dim());
  kb.dino.keys = Matrix(0, backend.dim());
  kb.clip.values = Matrix(0, num_classes);
  kb.dino.values = Matrix(0, num_classes);
  for (const Scene& s : images) {
    const auto labels = s.Labels();
    if (labels.empty()) throw EmptyDataset("training image " + s.id + " has no HOI label");
    const Vec mh = MultiHot(labels, num_classes);
    const GlobalFeatures g = backend.EncodeGlobal(s.id);
    kb.clip.keys.AppendRow(g.clip.values);
    kb.dino.keys.AppendRow(g.dino.values);
    kb.clip.values.AppendRow(mh);
    kb.dino.values.AppendRow(mh);
  }
  return kb;
}

TextPrototypes BuildTextPrototypes(const HoiTaxonomy& tax, const Backend& backend) {
  TextPrototypes t;
  t.keys = Matrix(0, backend.dim());
  for (int h = 0; h < tax.num_hois(); ++h) {
    t.keys.AppendRow(Normalized(backend.EncodeText(InteractionPrompt(tax, h)).values));
  }
  return t;
}

void SaveBanks(const std::filesystem::path& dir, const BankSet& banks,
               const std::map<std::string, std::string>& metadata) {
  Archive ar;
  auto put = [&](const PrototypeBank& b) {
    const std::string name = BranchName(b.kind);
    ar.Put(name + "/keys", b.keys, name);
    ar.Put(name + "/values", b.values, name);
  };
  for (const auto& [branch, bank] : banks.region) put(bank);
  put(banks.knowledge.clip);
  put(banks.knowledge.dino);
  ar.Put("text/keys", banks.text.keys, "union");
  ar.metadata() = metadata;
  ar.metadata()["kind"] = "banks";
  ar.Save(dir);
}

BankSet LoadBanks(const std::filesystem::path& dir) {
  const Archive ar = Archive::Load(dir);
  if (ar.metadata().count("kind") == 0 || ar.Meta("kind") != "banks") {
    throw ValidationError("not a bank archive: " + dir.string());
  }
  auto get = [&](Branch b) {
    PrototypeBank bank;
    bank.kind = b;
    bank.keys = ar.Get(BranchName(b) + "/keys");
    bank.values = ar.Get(BranchName(b) + "/values");
    bank.Validate();
    return bank;
  };
  BankSet set;
  for (Branch b : kRegionBranches) set.region[b] = get(b);
  set.knowledge.clip = get(Branch::kGlobalClip);
  set.knowledge.dino = get(Branch::kGlobalDino);
  set.text.keys = ar.Get("text/keys");
  return set;
}

}  // namespace hoigen
