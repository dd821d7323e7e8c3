#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xnor_rram/common.hpp"
#include "xnor_rram/macro.hpp"

namespace xnor_rram {

/// Dense +/-1 matrix, row-major; rows are layer inputs, columns are outputs.
class BinaryMatrix {
public:
    BinaryMatrix() = default;
    BinaryMatrix(int rows, int cols, Bit fill = 1);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    Bit operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    Bit& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    std::span<const Bit> data() const { return data_; }

    static BinaryMatrix random(int rows, int cols, Rng& rng);

    bool operator==(const BinaryMatrix&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<Bit> data_;
};

enum class LayerKind : std::uint8_t { fc, conv };
enum class Activation : std::uint8_t { sign_binarize, none };

struct LayerSpec {
    LayerKind kind = LayerKind::fc;
    int in_dim = 0;
    int out_dim = 0;
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 1;
    int kernel_w = 1;
    int stride = 1;
    int padding = 0;
    bool has_batchnorm = false;
    Activation activation = Activation::sign_binarize;
    std::optional<int> pool;

    /// Inputs per kernel position (in_dim or in_channels).
    int rows() const { return kind == LayerKind::fc ? in_dim : in_channels; }
    /// Outputs (out_dim or out_channels).
    int cols() const { return kind == LayerKind::fc ? out_dim : out_channels; }
    int kernel_positions() const { return kind == LayerKind::fc ? 1 : kernel_h * kernel_w; }

    static LayerSpec fc(int in_dim, int out_dim);
    static LayerSpec conv(int in_channels, int out_channels, int kernel_h, int kernel_w, int stride = 1,
                          int padding = 0);
};

void validate(const LayerSpec& spec);

/// Where pad rows go when the input dimension is not a multiple of 64.
enum class PadPolicy : std::uint8_t { spread, last };

PadPolicy parse_pad_policy(std::string_view s);
std::string_view to_string(PadPolicy p);

/// One 64x64 weight sub-matrix. Logical input rows [real_lo, real_hi) sit in slots
/// 0..n-1 of the tile; the remaining slots are pad rows (activation +1, weight +1).
struct Tile {
    int macro_id = 0;
    int kpos = 0;
    int row_tile = 0;
    int col_tile = 0;
    int row_lo = 0;  // padded input dimension
    int row_hi = 0;
    int col_lo = 0;  // padded output dimension
    int col_hi = 0;
    int real_lo = 0;
    int real_hi = 0;
    int used_cols = 0;

    int real_rows() const { return real_hi - real_lo; }
    int pad_rows() const { return kRows - real_rows(); }
};

struct TilingPlan {
    std::string layer;
    std::vector<Tile> tiles;  // ordered kpos, row_tile, col_tile
    int kernel_positions = 1;
    int row_tiles = 0;
    int col_tiles = 0;
    int logical_rows = 0;
    int outputs = 0;
    int padded_in_dim = 0;
    int pad_rows = 0;         // per kernel position
    int pad_correction = 0;   // bitcount contributed by pad rows to every output

    const Tile& tile(int kpos, int row_tile, int col_tile) const;
};

TilingPlan tile_fc(int in_dim, int out_dim, PadPolicy policy = PadPolicy::spread);
TilingPlan tile_conv(const LayerSpec& spec, PadPolicy policy = PadPolicy::spread);
TilingPlan plan_layer(const LayerSpec& spec, PadPolicy policy = PadPolicy::spread);

/// 64-entry wordline vector for a tile from the logical activations of its kernel position.
InputVector tile_input(const Tile& tile, std::span<const Bit> logical);

/// 64x64 tile weights cut out of a rows x cols matrix, with pad rows and unused columns at +1.
WeightTile tile_weights(const Tile& tile, const BinaryMatrix& weights);

struct ScheduleEntry {
    int tile = 0;
    int column = 0;
};

/// For every output, the tile columns whose dequantized outputs are summed, in order.
struct AccumulationSchedule {
    std::vector<std::vector<ScheduleEntry>> per_output;
    int pad_correction = 0;
};

AccumulationSchedule make_schedule(const TilingPlan& plan);

/// Per-tile column outputs (dequantized, bitcount units) with presence tracking.
class TileOutputs {
public:
    explicit TileOutputs(std::size_t tiles = 0);

    void set(int tile, int column, int value);
    std::optional<int> get(int tile, int column) const;
    void clear();

private:
    std::vector<std::int16_t> values_;
    std::vector<std::uint8_t> present_;
};

/// Fixed-point (int16) sum over each output's schedule minus the pad correction and
/// any per-output extra correction. Throws on a missing tile output or overflow.
std::vector<std::int16_t> accumulate(const AccumulationSchedule& schedule, const TileOutputs& outputs,
                                     std::span<const int> extra_correction = {});

/// Binary feature map, channel-major [c][y][x].
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<Bit> data;

    FeatureMap() = default;
    FeatureMap(int c, int h, int w, Bit fill = -1)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    Bit at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    Bit& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

int conv_output_size(int in, int kernel, int stride, int padding);

/// Gathered convolution inputs: for each output location and kernel position the
/// in_channels activations routed to that kernel position's tiles.
struct Im2Col {
    int out_h = 0;
    int out_w = 0;
    int kernel_positions = 0;
    int channels = 0;
    std::vector<Bit> data;             // [loc][kpos][c]
    std::vector<std::uint8_t> outside; // [loc][kpos], 1 if the tap fell in spatial padding

    int locations() const { return out_h * out_w; }
    std::span<const Bit> gather(int loc, int kpos) const {
        return std::span(data).subspan((static_cast<std::size_t>(loc) * kernel_positions + kpos) * channels,
                                       static_cast<std::size_t>(channels));
    }
    bool is_outside(int loc, int kpos) const {
        return outside[static_cast<std::size_t>(loc) * kernel_positions + kpos] != 0;
    }
};

/// Out-of-bounds taps take `pad_activation`; their contribution is removed digitally.
Im2Col im2col_inputs(const FeatureMap& input, const LayerSpec& spec, Bit pad_activation = 1);

}  // namespace xnor_rram
