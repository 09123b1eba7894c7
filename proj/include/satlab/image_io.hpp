#pragma once

#include <filesystem>

#include "satlab/tensor.hpp"

namespace satlab {

/// Reads a binary PPM (P6, 3 channels) or PGM (P5, 1 channel) with maxval <= 255 into a
/// normalized 1 x C x H x W tensor.
Tensor<double> read_image(const std::filesystem::path& path);

/// Writes sample 0 of a normalized 1- or 3-channel tensor as PGM/PPM, rounding to bytes.
void write_image(const Tensor<double>& image, const std::filesystem::path& path);

}  // namespace satlab
