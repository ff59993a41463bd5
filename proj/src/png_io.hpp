#ifndef HFID_PNG_IO_HPP
#define HFID_PNG_IO_HPP

#include <string>

#include "tensor.hpp"

namespace hfid {

// 8-bit PNG round trips for image tensors in [0,1]. RGB maps to 3-channel
// PNG; 4-channel CMYK ground truth is stored as RGBA bytes.
void write_png(const Tensor& image, const std::string& path);

// Reads an 8-bit PNG into (1,c,h,w) with c = 3 (RGB) or 4 (RGBA).
Tensor read_png(const std::string& path);

} // namespace hfid

#endif
