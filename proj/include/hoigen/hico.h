#ifndef HOIGEN_HICO_H_
#define HOIGEN_HICO_H_

#include <filesystem>
#include <string>

#include "hoigen/taxonomy.h"

namespace hoigen {

// COCO category name ("sports ball") for a COCO category id, or "" when the
// id is unused.
std::string CocoCategoryName(int coco_id);

// Fills `base`'s training instance counts from a HICO-DET training annotation
// file in the JSON layout used by common two-stage and query-based HOI
// codebases (a list of images, each with `annotations` carrying COCO
// `category_id`s and `hoi_annotation` entries with `subject_id`,
// `object_id` and a 1-based verb `category_id`). Each hoi_annotation entry
// is one instance. Throws ParseError or UnknownCategory.
HoiTaxonomy ImportHicoCounts(const HoiTaxonomy& base, const std::filesystem::path& annotations);

}  // namespace hoigen

#endif  // HOIGEN_HICO_H_
