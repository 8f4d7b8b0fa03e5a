#include "rivulet/bench/corpus.hpp"

#include <fstream>
#include <stdexcept>

namespace rivulet::bench {

std::shared_ptr<const std::vector<Bytes>> slice_corpus(const Bytes& text,
                                                       std::size_t record_bytes) {
  if (record_bytes == 0) throw std::invalid_argument("record_bytes must be positive");
  if (text.empty()) throw std::invalid_argument("corpus is empty");
  auto records = std::make_shared<std::vector<Bytes>>();
  records->reserve(text.size() / record_bytes + 1);
  for (std::size_t pos = 0; pos < text.size(); pos += record_bytes) {
    const std::size_t len = std::min(record_bytes, text.size() - pos);
    records->emplace_back(text.begin() + static_cast<std::ptrdiff_t>(pos),
                          text.begin() + static_cast<std::ptrdiff_t>(pos + len));
  }
  return records;
}

std::shared_ptr<const std::vector<Bytes>> load_corpus(const std::string& path,
                                                      std::size_t record_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus: " + path);
  Bytes text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return slice_corpus(text, record_bytes);
}

}  // namespace rivulet::bench
