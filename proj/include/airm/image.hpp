#pragma once

#include <string>

#include "airm/tensor.hpp"

namespace airm::img {

// Planes are float tensors with values in [0,1]:
//   masks  [H,W]
//   images [3,H,W]
// PNG interchange is 8-bit, so a save/load round trip quantizes each channel
// to the nearest 1/255 step.

void save_png(const TensorF& plane, const std::string& path);

// Grayscale files load as [H,W]; color files as [3,H,W]. Alpha is dropped,
// 16-bit depth is reduced to 8.
TensorF load_png(const std::string& path);

TensorF resize_bilinear(const TensorF& t, int H2, int W2);
TensorF resize_nearest(const TensorF& t, int H2, int W2);

// Binarize a soft mask at the given threshold.
TensorF binarize(const TensorF& mask, float threshold = 0.5f);

}  // namespace airm::img
