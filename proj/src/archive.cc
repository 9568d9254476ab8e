#include "hoigen/archive.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "hoigen/error.h"
#include "json.hpp"

namespace hoigen {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little,
              "archive payloads are written in host order");

const char* TypeName(ElementType t) {
  return t == ElementType::kFloat32 ? "float32" : "float64";
}

ElementType ParseType(const std::string& s) {
  if (s == "float32") return ElementType::kFloat32;
  if (s == "float64") return ElementType::kFloat64;
  throw ParseError("unknown element type '" + s + "'");
}

std::string PayloadName(const std::string& name, ElementType t) {
  std::string file;
  for (char c : name) file += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
  return file + (t == ElementType::kFloat32 ? ".f32" : ".f64");
}

}  // namespace

void Archive::Put(const std::string& name, Matrix data, const std::string& branch,
                  ElementType type) {
  for (auto& e : entries_) {
    if (e.name == name) {
      e = ArchiveEntry{name, std::move(data), branch, type};
      return;
    }
  }
  entries_.push_back(ArchiveEntry{name, std::move(data), branch, type});
}

bool Archive::Contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

const ArchiveEntry& Archive::Entry(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw ParseError("archive has no array named '" + name + "'");
}

std::string Archive::Meta(const std::string& key) const {
  auto it = metadata_.find(key);
  if (it == metadata_.end()) throw ParseError("archive metadata missing '" + key + "'");
  return it->second;
}

void Archive::Save(const fs::path& dir) const {
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = "hoigen-archive";
  manifest["version"] = 1;
  manifest["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metadata_) manifest["metadata"][k] = v;
  manifest["arrays"] = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    const std::string file = PayloadName(e.name, e.type);
    nlohmann::ordered_json a;
    a["name"] = e.name;
    a["shape"] = {e.data.rows(), e.data.cols()};
    a["dtype"] = TypeName(e.type);
    a["branch"] = e.branch;
    a["file"] = file;
    manifest["arrays"].push_back(a);

    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / file).string());
    if (e.type == ElementType::kFloat32) {
      std::vector<float> buf(e.data.values().begin(), e.data.values().end());
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    } else {
      out.write(reinterpret_cast<const char*>(e.data.data()),
                static_cast<std::streamsize>(e.data.size() * sizeof(double)));
    }
  }
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw Error("cannot write manifest in " + dir.string());
  mf << manifest.dump(2) << '\n';
}

Archive Archive::Load(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ParseError("no manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "hoigen-archive") {
    throw ParseError("not a hoigen archive: " + dir.string());
  }
  Archive archive;
  try {
    for (const auto& [k, v] : manifest.at("metadata").items()) {
      archive.metadata_[k] = v.get<std::string>();
    }
    for (const auto& a : manifest.at("arrays")) {
      const std::string name = a.at("name").get<std::string>();
      const auto shape = a.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw ParseError("array '" + name + "' is not 2-D");
      const ElementType type = ParseType(a.at("dtype").get<std::string>());
      const fs::path file = dir / a.at("file").get<std::string>();
      const std::size_t count = shape[0] * shape[1];
      const std::size_t width = type == ElementType::kFloat32 ? 4 : 8;
      std::ifstream in(file, std::ios::binary);
      if (!in) throw ParseError("missing payload " + file.string());
      std::vector<char> bytes(count * width);
      in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
        throw ParseError("truncated payload " + file.string());
      }
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i) {
        if (type == ElementType::kFloat32) {
          float f;
          std::memcpy(&f, bytes.data() + i * 4, 4);
          values[i] = f;
        } else {
          std::memcpy(&values[i], bytes.data() + i * 8, 8);
        }
      }
      archive.Put(name, Matrix(shape[0], shape[1], std::move(values)),
                  a.value("branch", ""), type);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what());
  }
  return archive;
}

}  // namespace hoigen
