#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace xnor_rram {

/// Images normalized to [0, 1], channel-major, plus integer labels.
struct Dataset {
    std::array<int, 3> shape{1, 28, 28};  // C, H, W
    std::vector<float> pixels;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t image_size() const {
        return static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1]) *
               static_cast<std::size_t>(shape[2]);
    }
    std::span<const float> image(std::size_t i) const {
        return std::span(pixels).subspan(i * image_size(), image_size());
    }
};

/// MNIST-style IDX pair (ubyte images, magic 0x803; ubyte labels, magic 0x801).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR-10 binary batches: 1 label byte followed by 3072 channel-major pixel bytes.
Dataset load_cifar10(std::span<const std::filesystem::path> batches);

void write_idx_images(const std::filesystem::path& path, int count, int rows, int cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

}  // namespace xnor_rram
