#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "biresnet/errors.hpp"
#include "biresnet/rng.hpp"

namespace biresnet {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Machine description. The constants are configuration, not ground truth;
// every dataset manifest embeds them. Defaults are tuned so that the no-fault
// trajectory synchronizes to the grid within 1% and the flux-current map is
// invertible (beta > 0).
// ---------------------------------------------------------------------------
struct MachineParams {
  double R_a = 1.6;     // armature resistance [ohm]
  double R_f = 1.0;     // field winding resistance [ohm]
  double L_d = 0.14;    // direct-axis inductance [H]
  double L_q = 0.08;    // quadrature-axis inductance [H]
  double L_0 = 0.01;    // zero-sequence inductance [H]
  double L_ff = 0.45;   // field self-inductance [H]
  double L_af = 0.18;   // stator-rotor mutual inductance [H]
  double J = 0.011;     // inertia [kg m^2]
  double D = 0.001;     // damping coefficient
  int P = 4;            // pole count
  double P_ref = 0.05;  // reference power, per unit
  double f = 50.0;      // grid frequency [Hz]
  double V = 70.0;      // stator phase voltage amplitude [V] (125 V DC link)
  double v_f_nom = 10.0;  // nominal field voltage [V]

  double omega_s() const { return 2.0 * kPi * f; }
  double sigma() const {
    return (P / 2.0) * (P / 2.0) / (J * omega_s());
  }
  double beta() const { return 2.0 * L_d * L_ff - 3.0 * L_af * L_af; }
  void validate() const;
};

// Label ids follow this order.
enum class FaultClass : std::uint8_t {
  REVD = 0,   // rotor excitation voltage disconnection
  OP = 1,     // opened phase
  VREC = 2,   // variation of rotor excitation current
  TWO_PSC = 3,   // two phases short circuit
  ONE_PSC = 4,   // one phase-to-neutral short circuit
  NF = 5,     // no fault
};
inline constexpr std::size_t kNumFaultClasses = 6;

const char* fault_name(FaultClass cls);
FaultClass fault_from_name(const std::string& name);

struct FaultSpec {
  FaultClass cls = FaultClass::NF;
  double t_f = 0.0;       // onset [s]; unused for NF
  double magnitude = 0.0; // class-specific (VREC relative field change)
};

struct MotorState {
  double theta = 0.0;     // rotor angle [rad]
  double w = 0.0;         // rotor electrical speed [rad/s]
  double lambda_d = 0.0;  // flux linkages [Wb]
  double lambda_q = 0.0;
  double lambda_0 = 0.0;
  double lambda_f = 0.0;

  MotorState operator+(const MotorState& o) const {
    return {theta + o.theta, w + o.w, lambda_d + o.lambda_d,
            lambda_q + o.lambda_q, lambda_0 + o.lambda_0,
            lambda_f + o.lambda_f};
  }
  MotorState operator*(double s) const {
    return {theta * s, w * s, lambda_d * s, lambda_q * s, lambda_0 * s,
            lambda_f * s};
  }
  bool finite() const {
    return std::isfinite(theta) && std::isfinite(w) && std::isfinite(lambda_d) &&
           std::isfinite(lambda_q) && std::isfinite(lambda_0) &&
           std::isfinite(lambda_f);
  }
  std::string dump() const;
};

struct DqInputs {
  double v_d = 0.0, v_q = 0.0, v_0 = 0.0, v_f = 0.0;
};

struct DqCurrents {
  double i_d = 0.0, i_q = 0.0, i_0 = 0.0, i_f = 0.0;
};

// Park transform, d-axis cosine-aligned, 2/3 scaling, v_0 = mean.
std::array<double, 3> park(const std::array<double, 3>& v_abc, double theta);
std::array<double, 3> inverse_park(double x_d, double x_q, double x_0,
                                   double theta);

DqCurrents currents_from_flux(const MotorState& state,
                              const MachineParams& params);

// Full dq0 state derivative. The zero-sequence equation uses lambda_0;
// `eq6_literal` switches to the lambda_q variant for comparison.
MotorState derivative(const MotorState& state, const DqInputs& inputs,
                      const MachineParams& params, bool eq6_literal = false);

// Classical 4th-order Runge-Kutta, generic over the state type.
template <typename State, typename F>
State rk4_step(F&& f, double t, const State& y, double h) {
  const State k1 = f(t, y);
  const State k2 = f(t + h / 2.0, y + k1 * (h / 2.0));
  const State k3 = f(t + h / 2.0, y + k2 * (h / 2.0));
  const State k4 = f(t + h, y + k3 * h);
  return y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

// Source-side fault injection; active for t >= t_f only.
void apply_fault(double t, const FaultSpec& fault,
                 std::array<double, 3>& v_abc, double& v_f);
// Measurement-side override: an opened phase carries no current.
void apply_fault_measurement(double t, const FaultSpec& fault,
                             std::array<double, 3>& i_abc);

// ---------------------------------------------------------------------------
// One simulated run: 8 channels x T samples plus label metadata. The fault
// onset is metadata only and is never fed to the classifier.
// ---------------------------------------------------------------------------
inline constexpr std::array<const char*, 8> kChannelNames = {
    "v_a", "v_b", "v_c", "i_a", "i_b", "i_c", "speed", "i_f"};

struct ExperimentRecord {
  std::size_t channels = 8;
  std::size_t samples = 0;
  double sample_period = 1e-3;
  FaultClass label = FaultClass::NF;
  float t_f = 0.0f;                // metadata; 0 for NF
  std::vector<double> data;        // [channels][samples], channel-major

  double& at(std::size_t c, std::size_t t) { return data[c * samples + t]; }
  double at(std::size_t c, std::size_t t) const { return data[c * samples + t]; }
};

struct SimOptions {
  double duration = 1.0;        // [s]
  double step = 1e-4;           // internal RK4 step [s]
  double record_period = 1e-3;  // base resolution (1000 samples); a 0.1 ms
                                // setting yields the 10,000-sample variant
  bool eq6_literal = false;
  std::optional<double> fixed_phase;      // otherwise drawn from the seed
  std::optional<MotorState> initial_state;
};

// Pure function of (params, fault, seed): identical inputs reproduce the
// record bit-exactly.
ExperimentRecord simulate_experiment(const MachineParams& params,
                                     const FaultSpec& fault,
                                     std::uint64_t seed,
                                     const SimOptions& opts = {});

// per_class records per label with seeded jitter: t_f ~ U[0.2,0.8] s,
// P_ref +-10%, initial phase U[0,2pi), VREC magnitude sign*U[0.2,0.5].
std::vector<ExperimentRecord> generate_dataset(const MachineParams& params,
                                               int per_class,
                                               std::uint64_t seed,
                                               const SimOptions& opts = {});

}  // namespace biresnet
