#include "xnor_rram/mapper.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace xnor_rram {

BinaryMatrix::BinaryMatrix(int rows, int cols, Bit fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("matrix dimensions must be non-negative");
    if (!is_binary(fill)) throw std::invalid_argument("binary matrix fill must be +1 or -1");
}

BinaryMatrix BinaryMatrix::random(int rows, int cols, Rng& rng) {
    BinaryMatrix m(rows, cols);
    for (auto& v : m.data_) v = (rng() & 1U) ? Bit{1} : Bit{-1};
    return m;
}

LayerSpec LayerSpec::fc(int in_dim, int out_dim) {
    LayerSpec s;
    s.kind = LayerKind::fc;
    s.in_dim = in_dim;
    s.out_dim = out_dim;
    return s;
}

LayerSpec LayerSpec::conv(int in_channels, int out_channels, int kernel_h, int kernel_w, int stride, int padding) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.in_channels = in_channels;
    s.out_channels = out_channels;
    s.kernel_h = kernel_h;
    s.kernel_w = kernel_w;
    s.stride = stride;
    s.padding = padding;
    return s;
}

void validate(const LayerSpec& spec) {
    if (spec.kind == LayerKind::fc) {
        if (spec.in_dim < 1 || spec.out_dim < 1) throw std::invalid_argument("FC dimensions must be >= 1");
    } else {
        if (spec.in_channels < 1 || spec.out_channels < 1 || spec.kernel_h < 1 || spec.kernel_w < 1 ||
            spec.stride < 1) {
            throw std::invalid_argument("CONV dimensions must be >= 1");
        }
        if (spec.padding < 0) throw std::invalid_argument("CONV padding must be >= 0");
    }
    if (spec.pool && *spec.pool < 1) throw std::invalid_argument("pool size must be >= 1");
}

PadPolicy parse_pad_policy(std::string_view s) {
    if (s == "spread") return PadPolicy::spread;
    if (s == "last") return PadPolicy::last;
    throw ConfigError("unknown pad policy '" + std::string(s) + "'");
}

std::string_view to_string(PadPolicy p) { return p == PadPolicy::spread ? "spread" : "last"; }

const Tile& TilingPlan::tile(int kpos, int row_tile, int col_tile) const {
    const auto idx = (static_cast<std::size_t>(kpos) * row_tiles + row_tile) * col_tiles + col_tile;
    return tiles.at(idx);
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

TilingPlan plan_matrix(int rows, int cols, int kernel_positions, PadPolicy policy) {
    TilingPlan plan;
    plan.kernel_positions = kernel_positions;
    plan.row_tiles = ceil_div(rows, kRows);
    plan.col_tiles = ceil_div(cols, kCols);
    plan.logical_rows = rows;
    plan.outputs = cols;
    plan.padded_in_dim = plan.row_tiles * kRows;
    plan.pad_rows = plan.padded_in_dim - rows;
    plan.pad_correction = plan.pad_rows * kernel_positions;

    // Logical rows held by each row tile.
    std::vector<int> counts(static_cast<std::size_t>(plan.row_tiles));
    for (int t = 0; t < plan.row_tiles; ++t) {
        if (policy == PadPolicy::spread) {
            counts[static_cast<std::size_t>(t)] = rows / plan.row_tiles + (t < rows % plan.row_tiles ? 1 : 0);
        } else {
            counts[static_cast<std::size_t>(t)] = std::min(kRows, rows - t * kRows);
        }
    }

    int macro_id = 0;
    for (int k = 0; k < kernel_positions; ++k) {
        int real = 0;
        for (int rt = 0; rt < plan.row_tiles; ++rt) {
            const int n = counts[static_cast<std::size_t>(rt)];
            for (int ct = 0; ct < plan.col_tiles; ++ct) {
                Tile t;
                t.macro_id = macro_id++;
                t.kpos = k;
                t.row_tile = rt;
                t.col_tile = ct;
                t.row_lo = rt * kRows;
                t.row_hi = t.row_lo + kRows;
                t.col_lo = ct * kCols;
                t.col_hi = t.col_lo + kCols;
                t.real_lo = real;
                t.real_hi = real + n;
                t.used_cols = std::min(kCols, cols - t.col_lo);
                plan.tiles.push_back(t);
            }
            real += n;
        }
    }
    return plan;
}

}  // namespace

TilingPlan tile_fc(int in_dim, int out_dim, PadPolicy policy) {
    validate(LayerSpec::fc(in_dim, out_dim));
    return plan_matrix(in_dim, out_dim, 1, policy);
}

TilingPlan tile_conv(const LayerSpec& spec, PadPolicy policy) {
    if (spec.kind != LayerKind::conv) throw std::invalid_argument("tile_conv needs a CONV layer");
    validate(spec);
    return plan_matrix(spec.in_channels, spec.out_channels, spec.kernel_positions(), policy);
}

TilingPlan plan_layer(const LayerSpec& spec, PadPolicy policy) {
    return spec.kind == LayerKind::fc ? tile_fc(spec.in_dim, spec.out_dim, policy) : tile_conv(spec, policy);
}

InputVector tile_input(const Tile& tile, std::span<const Bit> logical) {
    if (static_cast<int>(logical.size()) < tile.real_hi) {
        throw std::invalid_argument("logical activation vector is shorter than the tile's rows");
    }
    InputVector in{};
    in.fill(1);
    for (int i = 0; i < tile.real_rows(); ++i) {
        in[static_cast<std::size_t>(i)] = logical[static_cast<std::size_t>(tile.real_lo + i)];
    }
    return in;
}

WeightTile tile_weights(const Tile& tile, const BinaryMatrix& weights) {
    if (weights.rows() < tile.real_hi || weights.cols() < tile.col_lo + tile.used_cols) {
        throw std::invalid_argument("weight matrix does not cover the tile");
    }
    WeightTile w;
    for (int i = 0; i < tile.real_rows(); ++i) {
        for (int c = 0; c < tile.used_cols; ++c) {
            w(i, c) = weights(tile.real_lo + i, tile.col_lo + c);
        }
    }
    return w;
}

AccumulationSchedule make_schedule(const TilingPlan& plan) {
    AccumulationSchedule s;
    s.pad_correction = plan.pad_correction;
    s.per_output.resize(static_cast<std::size_t>(plan.outputs));
    for (std::size_t t = 0; t < plan.tiles.size(); ++t) {
        const auto& tile = plan.tiles[t];
        for (int c = 0; c < tile.used_cols; ++c) {
            s.per_output[static_cast<std::size_t>(tile.col_lo + c)].push_back({static_cast<int>(t), c});
        }
    }
    return s;
}

TileOutputs::TileOutputs(std::size_t tiles)
    : values_(tiles * kCols, 0), present_(tiles * kCols, 0) {}

void TileOutputs::set(int tile, int column, int value) {
    const auto i = static_cast<std::size_t>(tile) * kCols + static_cast<std::size_t>(column);
    if (i >= values_.size() || column < 0 || column >= kCols) throw std::out_of_range("tile output index out of range");
    if (value < std::numeric_limits<std::int16_t>::min() || value > std::numeric_limits<std::int16_t>::max()) {
        throw std::overflow_error("tile output does not fit the 16-bit accumulator");
    }
    values_[i] = static_cast<std::int16_t>(value);
    present_[i] = 1;
}

std::optional<int> TileOutputs::get(int tile, int column) const {
    const auto i = static_cast<std::size_t>(tile) * kCols + static_cast<std::size_t>(column);
    if (i >= values_.size() || !present_[i]) return std::nullopt;
    return values_[i];
}

void TileOutputs::clear() { std::fill(present_.begin(), present_.end(), std::uint8_t{0}); }

std::vector<std::int16_t> accumulate(const AccumulationSchedule& schedule, const TileOutputs& outputs,
                                     std::span<const int> extra_correction) {
    if (!extra_correction.empty() && extra_correction.size() != schedule.per_output.size()) {
        throw std::invalid_argument("extra correction must have one entry per output");
    }
    std::vector<std::int16_t> result(schedule.per_output.size());
    for (std::size_t o = 0; o < schedule.per_output.size(); ++o) {
        std::int32_t acc = 0;
        for (const auto& e : schedule.per_output[o]) {
            const auto v = outputs.get(e.tile, e.column);
            if (!v) {
                throw std::invalid_argument("missing output for tile " + std::to_string(e.tile) + " column " +
                                            std::to_string(e.column));
            }
            acc += *v;
        }
        acc -= schedule.pad_correction;
        if (!extra_correction.empty()) acc -= extra_correction[o];
        if (acc < std::numeric_limits<std::int16_t>::min() || acc > std::numeric_limits<std::int16_t>::max()) {
            throw std::overflow_error("accumulated partial sum overflows 16 bits");
        }
        result[o] = static_cast<std::int16_t>(acc);
    }
    return result;
}

int conv_output_size(int in, int kernel, int stride, int padding) {
    const int span = in + 2 * padding - kernel;
    if (span < 0) throw std::invalid_argument("kernel larger than padded input");
    return span / stride + 1;
}

Im2Col im2col_inputs(const FeatureMap& input, const LayerSpec& spec, Bit pad_activation) {
    if (spec.kind != LayerKind::conv) throw std::invalid_argument("im2col needs a CONV layer");
    validate(spec);
    if (input.channels != spec.in_channels) {
        throw std::invalid_argument("feature map has " + std::to_string(input.channels) + " channels, layer expects " +
                                    std::to_string(spec.in_channels));
    }
    if (input.data.size() != static_cast<std::size_t>(input.channels) * input.height * input.width) {
        throw std::invalid_argument("feature map data size does not match its shape");
    }
    Im2Col out;
    out.out_h = conv_output_size(input.height, spec.kernel_h, spec.stride, spec.padding);
    out.out_w = conv_output_size(input.width, spec.kernel_w, spec.stride, spec.padding);
    out.kernel_positions = spec.kernel_positions();
    out.channels = spec.in_channels;
    out.data.resize(static_cast<std::size_t>(out.locations()) * out.kernel_positions * out.channels);
    out.outside.resize(static_cast<std::size_t>(out.locations()) * out.kernel_positions);

    std::size_t d = 0;
    std::size_t o = 0;
    for (int oy = 0; oy < out.out_h; ++oy) {
        for (int ox = 0; ox < out.out_w; ++ox) {
            for (int ky = 0; ky < spec.kernel_h; ++ky) {
                for (int kx = 0; kx < spec.kernel_w; ++kx) {
                    const int y = oy * spec.stride - spec.padding + ky;
                    const int x = ox * spec.stride - spec.padding + kx;
                    const bool inside = y >= 0 && y < input.height && x >= 0 && x < input.width;
                    out.outside[o++] = inside ? 0 : 1;
                    for (int c = 0; c < out.channels; ++c) {
                        out.data[d++] = inside ? input.at(c, y, x) : pad_activation;
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace xnor_rram
