#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace lmkan {

/// Four-phase fitting schedule.
///
///   Phase I   pure MLP: gamma = 0, lambda = lambda_init.
///   Phase II  gamma ramps linearly to gamma_target over gamma_ramp_steps,
///             then holds; lambda stays at lambda_init.
///   Phase III lambda decays geometrically from lambda_init to lambda_target.
///   Phase IV  gamma and lambda flat; the learning rate is constant until
///             the terminal window, where it decays exponentially by
///             lr_terminal_factor.
struct PhaseConfig {
    long phase1_steps = 0;
    long phase2_steps = 0;
    long phase3_steps = 0;
    long phase4_steps = 0;
    long gamma_ramp_steps = -1;  // default: half of phase II
    double gamma_target = 0.3;
    double lambda_init = 1.0;
    double lambda_target = 1e-20;
    double lr = 1e-3;
    long lr_terminal_steps = 0;        // tail of phase IV
    double lr_terminal_factor = 1e-2;  // lr multiplier reached at the last step
    long batch_size = 256;
    std::uint64_t seed = 0;

    long total_steps() const { return phase1_steps + phase2_steps + phase3_steps + phase4_steps; }

    void validate() const {
        if (phase1_steps < 0 || phase2_steps < 0 || phase3_steps < 0 || phase4_steps < 0)
            throw std::invalid_argument("phases: step counts must be >= 0");
        if (!(gamma_target >= 0.0 && gamma_target <= 1.0))
            throw std::invalid_argument("phases.gamma_target must lie in [0, 1]");
        if (!(lambda_init >= lambda_target) || !(lambda_target >= 0.0))
            throw std::invalid_argument("phases: need lambda_init >= lambda_target >= 0");
        if (batch_size < 2) throw std::invalid_argument("optimizer.batch_size must be >= 2");
        if (lr_terminal_steps > phase4_steps)
            throw std::invalid_argument("optimizer.lr_terminal_steps exceeds phase IV length");
    }
};

struct ScheduleState {
    int phase = 1;  // 1..4
    double gamma = 0.0;
    double lambda = 0.0;
    double lr = 0.0;
};

inline ScheduleState phase_schedule(long step, const PhaseConfig& cfg) {
    if (step < 0) throw std::invalid_argument("phase_schedule: step must be >= 0");
    ScheduleState s;
    s.lr = cfg.lr;
    const long p1 = cfg.phase1_steps;
    const long p2 = p1 + cfg.phase2_steps;
    const long p3 = p2 + cfg.phase3_steps;
    const long total = p3 + cfg.phase4_steps;
    const long ramp = cfg.gamma_ramp_steps >= 0 ? cfg.gamma_ramp_steps : cfg.phase2_steps / 2;
    if (step < p1) {
        s.phase = 1;
        s.gamma = 0.0;
        s.lambda = cfg.lambda_init;
    } else if (step < p2) {
        s.phase = 2;
        const long into = step - p1;
        s.gamma = ramp > 0 && into < ramp
                      ? cfg.gamma_target * static_cast<double>(into) / static_cast<double>(ramp)
                      : cfg.gamma_target;
        s.lambda = cfg.lambda_init;
    } else if (step < p3) {
        s.phase = 3;
        s.gamma = cfg.gamma_target;
        if (cfg.lambda_init <= 0.0) {
            s.lambda = cfg.lambda_target;
        } else {
            // geometric interpolation reaching lambda_target at the phase end
            const double u = static_cast<double>(step - p2 + 1) / static_cast<double>(cfg.phase3_steps);
            const double ratio = cfg.lambda_target > 0.0 ? cfg.lambda_target / cfg.lambda_init : 1e-300;
            s.lambda = cfg.lambda_init * std::pow(ratio, u);
        }
    } else {
        s.phase = 4;
        s.gamma = cfg.gamma_target;
        s.lambda = cfg.lambda_target;
        const long tail_start = total - cfg.lr_terminal_steps;
        if (cfg.lr_terminal_steps > 0 && step >= tail_start) {
            const double u =
                static_cast<double>(step - tail_start + 1) / static_cast<double>(cfg.lr_terminal_steps);
            s.lr = cfg.lr * std::pow(cfg.lr_terminal_factor, u);
        }
    }
    return s;
}

}  // namespace lmkan
