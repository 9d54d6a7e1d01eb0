#pragma once

#include <string>
#include <vector>

#include "fundus/datapipe.hpp"

namespace fundus {

// Directory layout: images/<id>.ppm, masks/<id>.pgm (when the sample has a
// mask), labels.csv with header id,glaucoma,cdr; glaucoma and cdr fields are
// empty when unknown.

void write_dataset(const std::string& dir, const std::vector<Sample>& samples);

// Samples sorted by id; every id listed in labels.csv must have an image,
// masks are attached when present on disk.
std::vector<Sample> read_dataset(const std::string& dir);

} // namespace fundus
