#pragma once

#include <string_view>
#include <vector>

#include "xnor_rram/common.hpp"

namespace xnor_rram {

enum class CellState : std::uint8_t { pristine, lrs, hrs };

std::string_view to_string(CellState s);

/// Resistance of an unformed cell. Never read back; only keeps the positivity invariant.
inline constexpr double kPristineResistance = 1e9;

struct DeviceState {
    CellState state = CellState::pristine;
    double resistance = kPristineResistance;  // ohms, > 0
};

enum class PulseKind : std::uint8_t { form, set, reset };

std::string_view to_string(PulseKind k);

/// Programming pulse. Width, amplitude and gate are recorded in traces; only the
/// SET gate voltage enters the stochastic response.
struct PulseSpec {
    PulseKind kind = PulseKind::set;
    double width_ns = 100.0;
    double amplitude_v = 2.1;
    double gate_v = 2.3;

    static PulseSpec set_pulse(double gate_v) { return {PulseKind::set, 100.0, 2.1, gate_v}; }
    static PulseSpec reset_pulse() { return {PulseKind::reset, 200.0, 4.0, 3.8}; }
    static PulseSpec form_pulse() { return {PulseKind::form, 20000.0, 3.8, 1.9}; }
};

void validate(const PulseSpec& p);

/// Stochastic RRAM cell model.
///
/// SET: lognormal resistance whose mean is affine in the gate voltage and whose
/// coefficient of variation is `lrs_sigma_rel`, clamped to the LRS support.
/// RESET: lognormal with median `hrs_log_median` and log-sigma `hrs_log_sigma`,
/// clamped below at `hrs_floor`.
struct DeviceModelParams {
    double lrs_intercept = 9000.0;  // ohms at 0 V gate
    double lrs_slope = -1300.0;     // ohms per volt, must be negative
    double lrs_sigma_rel = 0.02;
    double hrs_log_median = 3e6;
    double hrs_log_sigma = 0.6;
    double gate_step = 0.05;
    double gate_min = 1.5;
    double gate_max = 3.5;
    double lrs_min = 3e3;
    double lrs_max = 20e3;
    double hrs_floor = 100e3;
    std::uint64_t seed = 1;

    double lrs_mean(double gate_v) const { return lrs_intercept + lrs_slope * gate_v; }
};

void validate(const DeviceModelParams& p);

DeviceState form(const DeviceState& cell, const DeviceModelParams& params, Rng& rng);
DeviceState apply_set(const DeviceState& cell, double gate_v, const DeviceModelParams& params, Rng& rng);
DeviceState apply_reset(const DeviceState& cell, const DeviceModelParams& params, Rng& rng);

/// Ideal, disturb-free read. Throws UnprogrammedError on a pristine cell.
double read_resistance(const DeviceState& cell);

struct TraceEntry {
    PulseSpec pulse;
    double resistance = 0.0;
};

struct WriteVerifyReport {
    int iterations_used = 0;
    bool converged = false;
    double final_resistance = 0.0;
    double final_gate_v = 0.0;  // last SET gate voltage (LRS loop only)
    std::vector<TraceEntry> trace;
};

struct LrsTarget {
    double lo = 5900.0;
    double hi = 6100.0;
    int max_iter = 10;
    double initial_gate_v = 2.3;
};

struct HrsTarget {
    double threshold = 1e6;
    int max_iter = 10;
};

void validate(const LrsTarget& t);
void validate(const HrsTarget& t);

/// SET at the initial gate; while out of window, RESET and SET again with the gate
/// stepped down (resistance too low) or up (too high). Non-convergence is reported.
WriteVerifyReport write_verify_lrs(DeviceState& cell, const LrsTarget& target,
                                   const DeviceModelParams& params, Rng& rng);

/// RESET until the resistance exceeds the threshold or the pulse budget runs out.
WriteVerifyReport write_verify_hrs(DeviceState& cell, const HrsTarget& target,
                                   const DeviceModelParams& params, Rng& rng);

/// Verify-first LRS refresh used when re-programming an array that already holds
/// the same weights: cells already inside the window are left untouched.
WriteVerifyReport refresh_lrs(DeviceState& cell, const LrsTarget& target,
                              const DeviceModelParams& params, Rng& rng);

/// Verify-first HRS refresh.
WriteVerifyReport refresh_hrs(DeviceState& cell, const HrsTarget& target,
                              const DeviceModelParams& params, Rng& rng);

}  // namespace xnor_rram
