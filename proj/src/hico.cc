#include "hoigen/hico.h"

#include <fstream>
#include <map>

#include "hoigen/error.h"
#include "json.hpp"

namespace hoigen {

std::string CocoCategoryName(int coco_id) {
  static const std::map<int, std::string> names = {
      {1, "person"},          {2, "bicycle"},       {3, "car"},           {4, "motorcycle"},
      {5, "airplane"},        {6, "bus"},           {7, "train"},         {8, "truck"},
      {9, "boat"},            {10, "traffic light"}, {11, "fire hydrant"}, {13, "stop sign"},
      {14, "parking meter"},  {15, "bench"},        {16, "bird"},         {17, "cat"},
      {18, "dog"},            {19, "horse"},        {20, "sheep"},        {21, "cow"},
      {22, "elephant"},       {23, "bear"},         {24, "zebra"},        {25, "giraffe"},
      {27, "backpack"},       {28, "umbrella"},     {31, "handbag"},      {32, "tie"},
      {33, "suitcase"},       {34, "frisbee"},      {35, "skis"},         {36, "snowboard"},
      {37, "sports ball"},    {38, "kite"},         {39, "baseball bat"}, {40, "baseball glove"},
      {41, "skateboard"},     {42, "surfboard"},    {43, "tennis racket"}, {44, "bottle"},
      {46, "wine glass"},     {47, "cup"},          {48, "fork"},         {49, "knife"},
      {50, "spoon"},          {51, "bowl"},         {52, "banana"},       {53, "apple"},
      {54, "sandwich"},       {55, "orange"},       {56, "broccoli"},     {57, "carrot"},
      {58, "hot dog"},        {59, "pizza"},        {60, "donut"},        {61, "cake"},
      {62, "chair"},          {63, "couch"},        {64, "potted plant"}, {65, "bed"},
      {67, "dining table"},   {70, "toilet"},       {72, "tv"},           {73, "laptop"},
      {74, "mouse"},          {75, "remote"},       {76, "keyboard"},     {77, "cell phone"},
      {78, "microwave"},      {79, "oven"},         {80, "toaster"},      {81, "sink"},
      {82, "refrigerator"},   {84, "book"},         {85, "clock"},        {86, "vase"},
      {87, "scissors"},       {88, "teddy bear"},   {89, "hair drier"},   {90, "toothbrush"},
  };
  auto it = names.find(coco_id);
  return it == names.end() ? "" : it->second;
}

HoiTaxonomy ImportHicoCounts(const HoiTaxonomy& base, const std::filesystem::path& annotations) {
  std::ifstream in(annotations);
  if (!in) throw ParseError("cannot open " + annotations.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(annotations.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError("expected a list of image records");

  std::map<std::string, int> object_ids;
  for (int o = 0; o < base.num_objects(); ++o) {
    std::string name = base.objects[o];
    for (char& c : name) {
      if (c == '_') c = ' ';
    }
    object_ids[name] = o;
  }
  HoiTaxonomy out = base;
  out.train_instance_counts.assign(base.num_hois(), 0);
  try {
    for (const auto& image : doc) {
      const auto& boxes = image.at("annotations");
      if (!image.contains("hoi_annotation")) continue;
      for (const auto& hoi : image.at("hoi_annotation")) {
        const int verb = hoi.at("category_id").get<int>() - 1;
        const auto& obj = boxes.at(hoi.at("object_id").get<std::size_t>());
        const std::string name = CocoCategoryName(obj.at("category_id").get<int>());
        auto it = object_ids.find(name);
        if (verb < 0 || verb >= base.num_verbs() || it == object_ids.end()) {
          throw UnknownCategory("annotation outside the taxonomy (verb " + std::to_string(verb + 1) +
                                ", object '" + name + "')");
        }
        const auto id = base.Find(verb, it->second);
        if (!id) {
          throw UnknownCategory("pair (" + base.verbs[verb] + ", " + base.objects[it->second] +
                                ") is not a taxonomy HOI");
        }
        ++out.train_instance_counts[*id];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(annotations.string() + ": " + e.what());
  }
  out.Validate();
  return out;
}

}  // namespace hoigen
