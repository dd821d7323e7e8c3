#include "xnor_rram/device.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace xnor_rram {

double standard_normal(Rng& rng) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string_view to_string(CellState s) {
    switch (s) {
        case CellState::pristine: return "PRISTINE";
        case CellState::lrs: return "LRS";
        case CellState::hrs: return "HRS";
    }
    return "?";
}

std::string_view to_string(PulseKind k) {
    switch (k) {
        case PulseKind::form: return "FORM";
        case PulseKind::set: return "SET";
        case PulseKind::reset: return "RESET";
    }
    return "?";
}

void validate(const PulseSpec& p) {
    if (!(p.width_ns > 0.0) || !(p.amplitude_v > 0.0) || !(p.gate_v > 0.0)) {
        throw std::invalid_argument("pulse width, amplitude and gate voltage must be positive");
    }
}

void validate(const DeviceModelParams& p) {
    if (!(p.lrs_slope < 0.0)) {
        throw std::invalid_argument("LRS slope must be negative");
    }
    if (p.lrs_sigma_rel < 0.0 || p.hrs_log_sigma < 0.0) {
        throw std::invalid_argument("device sigmas must be non-negative");
    }
    if (!(p.hrs_log_median > 0.0) || !(p.hrs_floor > 0.0)) {
        throw std::invalid_argument("HRS median and floor must be positive");
    }
    if (!(p.lrs_min > 0.0) || !(p.lrs_min < p.lrs_max)) {
        throw std::invalid_argument("LRS support must satisfy 0 < min < max");
    }
    if (!(p.gate_min > 0.0) || !(p.gate_min < p.gate_max)) {
        throw std::invalid_argument("gate range must satisfy 0 < min < max");
    }
    if (!(p.gate_step > 0.0)) {
        throw std::invalid_argument("gate step must be positive");
    }
}

void validate(const LrsTarget& t) {
    if (!(t.lo < t.hi) || !(t.lo > 0.0)) {
        throw std::invalid_argument("LRS target window must satisfy 0 < lo < hi");
    }
    if (t.max_iter < 1) {
        throw std::invalid_argument("max_iter must be >= 1");
    }
}

void validate(const HrsTarget& t) {
    if (!(t.threshold > 0.0)) {
        throw std::invalid_argument("HRS threshold must be positive");
    }
    if (t.max_iter < 1) {
        throw std::invalid_argument("max_iter must be >= 1");
    }
}

namespace {

double draw_hrs(const DeviceModelParams& params, Rng& rng) {
    const double z = standard_normal(rng);
    const double r = params.hrs_log_median * std::exp(params.hrs_log_sigma * z);
    return std::max(r, params.hrs_floor);
}

bool in_window(double r, const LrsTarget& t) { return r >= t.lo && r <= t.hi; }

}  // namespace

DeviceState form(const DeviceState& cell, const DeviceModelParams& params, Rng& rng) {
    if (cell.state != CellState::pristine) {
        return cell;
    }
    return {CellState::hrs, draw_hrs(params, rng)};
}

DeviceState apply_set(const DeviceState& /*cell*/, double gate_v, const DeviceModelParams& params,
                      Rng& rng) {
    if (!(gate_v >= params.gate_min && gate_v <= params.gate_max)) {
        throw std::invalid_argument("SET gate voltage " + std::to_string(gate_v) +
                                    " V outside the physical range");
    }
    const double mean = params.lrs_mean(gate_v);
    // Lognormal with the requested mean and coefficient of variation.
    const double s2 = std::log1p(params.lrs_sigma_rel * params.lrs_sigma_rel);
    double r = mean;
    if (s2 > 0.0) {
        const double z = standard_normal(rng);
        r = std::exp(std::log(mean) - 0.5 * s2 + std::sqrt(s2) * z);
    }
    return {CellState::lrs, std::clamp(r, params.lrs_min, params.lrs_max)};
}

DeviceState apply_reset(const DeviceState& /*cell*/, const DeviceModelParams& params, Rng& rng) {
    return {CellState::hrs, draw_hrs(params, rng)};
}

double read_resistance(const DeviceState& cell) {
    if (cell.state == CellState::pristine) {
        throw UnprogrammedError("read of an unprogrammed (pristine) cell");
    }
    return cell.resistance;
}

WriteVerifyReport write_verify_lrs(DeviceState& cell, const LrsTarget& target,
                                   const DeviceModelParams& params, Rng& rng) {
    validate(target);
    WriteVerifyReport report;
    if (cell.state == CellState::pristine) {
        cell = form(cell, params, rng);
        report.trace.push_back({PulseSpec::form_pulse(), cell.resistance});
    }

    double gate = std::clamp(target.initial_gate_v, params.gate_min, params.gate_max);
    for (int it = 1; it <= target.max_iter; ++it) {
        if (it > 1) {
            cell = apply_reset(cell, params, rng);
            report.trace.push_back({PulseSpec::reset_pulse(), cell.resistance});
        }
        cell = apply_set(cell, gate, params, rng);
        report.trace.push_back({PulseSpec::set_pulse(gate), cell.resistance});
        report.iterations_used = it;
        report.final_gate_v = gate;

        const double r = read_resistance(cell);
        if (in_window(r, target)) {
            report.converged = true;
            break;
        }
        // Lower gate -> higher SET resistance.
        gate += (r < target.lo) ? -params.gate_step : params.gate_step;
        gate = std::clamp(gate, params.gate_min, params.gate_max);
    }
    report.final_resistance = cell.resistance;
    return report;
}

WriteVerifyReport write_verify_hrs(DeviceState& cell, const HrsTarget& target,
                                   const DeviceModelParams& params, Rng& rng) {
    validate(target);
    WriteVerifyReport report;
    if (cell.state == CellState::pristine) {
        cell = form(cell, params, rng);
        report.trace.push_back({PulseSpec::form_pulse(), cell.resistance});
    }
    for (int it = 1; it <= target.max_iter; ++it) {
        cell = apply_reset(cell, params, rng);
        report.trace.push_back({PulseSpec::reset_pulse(), cell.resistance});
        report.iterations_used = it;
        if (cell.resistance > target.threshold) {
            report.converged = true;
            break;
        }
    }
    report.final_resistance = cell.resistance;
    return report;
}

WriteVerifyReport refresh_lrs(DeviceState& cell, const LrsTarget& target,
                              const DeviceModelParams& params, Rng& rng) {
    validate(target);
    if (cell.state == CellState::lrs && in_window(cell.resistance, target)) {
        WriteVerifyReport report;
        report.converged = true;
        report.final_resistance = cell.resistance;
        return report;
    }
    return write_verify_lrs(cell, target, params, rng);
}

WriteVerifyReport refresh_hrs(DeviceState& cell, const HrsTarget& target,
                              const DeviceModelParams& params, Rng& rng) {
    validate(target);
    if (cell.state == CellState::hrs && cell.resistance > target.threshold) {
        WriteVerifyReport report;
        report.converged = true;
        report.final_resistance = cell.resistance;
        return report;
    }
    return write_verify_hrs(cell, target, params, rng);
}

}  // namespace xnor_rram
