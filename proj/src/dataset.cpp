#include "xnor_rram/dataset.hpp"

#include <fstream>
#include <iterator>
#include <string>

#include "xnor_rram/common.hpp"

namespace xnor_rram {

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& buf, std::size_t at) {
    if (at + 4 > buf.size()) throw IoError("truncated IDX header");
    return (std::uint32_t{buf[at]} << 24) | (std::uint32_t{buf[at + 1]} << 16) | (std::uint32_t{buf[at + 2]} << 8) |
           std::uint32_t{buf[at + 3]};
}

void put_be32(std::ofstream& os, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                       static_cast<char>(v)};
    os.write(b, 4);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img = read_all(images);
    const auto lab = read_all(labels);
    if (be32(img, 0) != 0x00000803U) throw IoError(images.string() + " is not an IDX image file");
    if (be32(lab, 0) != 0x00000801U) throw IoError(labels.string() + " is not an IDX label file");

    const auto n = be32(img, 4);
    const auto rows = be32(img, 8);
    const auto cols = be32(img, 12);
    if (be32(lab, 4) != n) throw IoError("IDX image and label counts differ");
    const std::size_t per = static_cast<std::size_t>(rows) * cols;
    if (img.size() != 16 + per * n) throw IoError("IDX image payload size mismatch");
    if (lab.size() != 8 + static_cast<std::size_t>(n)) throw IoError("IDX label payload size mismatch");

    Dataset ds;
    ds.shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
    ds.pixels.reserve(per * n);
    for (std::size_t i = 16; i < img.size(); ++i) ds.pixels.push_back(static_cast<float>(img[i]) / 255.0F);
    ds.labels.assign(lab.begin() + 8, lab.end());
    return ds;
}

Dataset load_cifar10(std::span<const std::filesystem::path> batches) {
    constexpr std::size_t kPixels = 3 * 32 * 32;
    constexpr std::size_t kRecord = kPixels + 1;
    Dataset ds;
    ds.shape = {3, 32, 32};
    for (const auto& path : batches) {
        const auto buf = read_all(path);
        if (buf.size() % kRecord != 0) throw IoError(path.string() + " is not a CIFAR-10 binary batch");
        for (std::size_t off = 0; off < buf.size(); off += kRecord) {
            if (buf[off] > 9) throw IoError("CIFAR-10 label out of range in " + path.string());
            ds.labels.push_back(buf[off]);
            for (std::size_t i = 1; i <= kPixels; ++i) ds.pixels.push_back(static_cast<float>(buf[off + i]) / 255.0F);
        }
    }
    return ds;
}

void write_idx_images(const std::filesystem::path& path, int count, int rows, int cols,
                      std::span<const std::uint8_t> pixels) {
    if (pixels.size() != static_cast<std::size_t>(count) * rows * cols) {
        throw std::invalid_argument("pixel buffer does not match the image shape");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    put_be32(os, 0x00000803U);
    put_be32(os, static_cast<std::uint32_t>(count));
    put_be32(os, static_cast<std::uint32_t>(rows));
    put_be32(os, static_cast<std::uint32_t>(cols));
    os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!os) throw IoError("failed writing " + path.string());
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    put_be32(os, 0x00000801U);
    put_be32(os, static_cast<std::uint32_t>(labels.size()));
    os.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
    if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace xnor_rram
