#pragma once

#include <cstdint>
#include <functional>

#include "rivulet/record.hpp"

namespace rivulet::client {

// Pull and push sources deliver records through the same signature, so a
// pipeline can swap one for the other without changes downstream.
using RecordEmit =
    std::function<void(std::uint32_t partition, std::uint64_t offset, const RecordView& record)>;

}  // namespace rivulet::client
