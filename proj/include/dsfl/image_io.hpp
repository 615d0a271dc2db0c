#pragma once

#include <string>
#include <vector>

#include "dsfl/tensor.hpp"

namespace dsfl {

/// Write a [3,H,W] or [1,H,W] tensor in [0,1] as an 8-bit PNG.
void write_png(const std::string& path, const Tensor& image);

/// Read an 8-bit PNG as a [3,H,W] tensor scaled to [0,1]. Grayscale files are
/// replicated across channels. target_size 0 keeps the native resolution;
/// otherwise the image is bilinearly resized to target_size x target_size.
Tensor read_png(const std::string& path, int target_size = 0);

/// Compose equally-sized [3,H,W] images into one row, with a 2px separator.
Tensor image_grid(const std::vector<Tensor>& images);

}  // namespace dsfl
