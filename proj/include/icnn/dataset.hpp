#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "icnn/tensor.hpp"

namespace icnn {

/// Labeled image set. Pixel values live in [0,1] unless mean-subtracted.
struct Dataset {
    Tensor images;  // [n, C, H, W]
    std::vector<int> labels;
    int num_classes = 0;
    std::string split;  // informational tag: train / val / test

    int size() const { return static_cast<int>(labels.size()); }
    int channels() const { return images.dim(1); }
    int height() const { return images.dim(2); }
    int width() const { return images.dim(3); }

    Tensor sample(int index) const;
    int label(int index) const { return labels[static_cast<std::size_t>(index)]; }

    Dataset subset(const std::vector<int>& indices, std::string split_tag) const;
    Dataset take(int n, std::string split_tag) const;
};

/// IDX loader (the MNIST distribution format). Accepts unsigned-byte
/// (type 0x08, scaled by 1/255) and float32 (type 0x0D) image payloads,
/// 3-dim [n,H,W] or 4-dim [n,C,H,W]; labels are 1-dim unsigned bytes.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Writer for the same format; float payloads round-trip bit-exactly.
void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path,
              bool float_payload = true);

/// Stratified split: per class, floor(count * fraction) samples move to the
/// validation set, selected by a seeded shuffle.
std::pair<Dataset, Dataset> split_validation(const Dataset& ds, double fraction,
                                             std::uint64_t seed);

/// Class-conditional Gaussian blobs with additive noise, clamped to [0,1].
/// center_jitter > 0 moves each sample's blob center by up to that fraction
/// of the image extent, which makes the classes genuinely hard to separate.
Dataset synth_dataset(int classes, int per_class, int height, int width, std::uint64_t seed,
                      double noise_sigma = 0.1, double center_jitter = 0.0);

/// Subtracts the per-pixel mean image in place.
void mean_subtract(Dataset& ds);

}  // namespace icnn
