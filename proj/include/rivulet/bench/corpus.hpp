#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rivulet/bytes.hpp"

namespace rivulet::bench {

// Slices a text file into fixed-size records; the final record keeps the
// remainder, so concatenating the records reproduces the file byte for byte.
std::shared_ptr<const std::vector<Bytes>> load_corpus(const std::string& path,
                                                      std::size_t record_bytes = 2048);

std::shared_ptr<const std::vector<Bytes>> slice_corpus(const Bytes& text,
                                                       std::size_t record_bytes);

}  // namespace rivulet::bench
