#include "biresnet/motorsim.hpp"

#include <sstream>

namespace biresnet {

void MachineParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) {
      throw DataError(std::string("machine parameter ") + name +
                      " must be positive");
    }
  };
  positive(R_a, "R_a");
  positive(R_f, "R_f");
  positive(L_d, "L_d");
  positive(L_q, "L_q");
  positive(L_0, "L_0");
  positive(L_ff, "L_ff");
  positive(J, "J");
  positive(D, "D");
  positive(f, "f");
  positive(V, "V");
  if (P <= 0) throw DataError("machine parameter P must be positive");
  if (!(beta() > 0.0)) {
    throw DataError("machine parameters give beta = 2*L_d*L_ff - 3*L_af^2 = " +
                    std::to_string(beta()) +
                    "; flux-current map is not invertible");
  }
}

const char* fault_name(FaultClass cls) {
  switch (cls) {
    case FaultClass::REVD: return "REVD";
    case FaultClass::OP: return "OP";
    case FaultClass::VREC: return "VREC";
    case FaultClass::TWO_PSC: return "2PSC";
    case FaultClass::ONE_PSC: return "1PSC";
    case FaultClass::NF: return "NF";
  }
  throw DataError("unknown fault class id " +
                  std::to_string(static_cast<int>(cls)));
}

FaultClass fault_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kNumFaultClasses; ++i) {
    const auto cls = static_cast<FaultClass>(i);
    if (name == fault_name(cls)) return cls;
  }
  throw DataError("unknown fault class '" + name + "'");
}

std::string MotorState::dump() const {
  std::ostringstream os;
  os << "theta=" << theta << " w=" << w << " lambda_d=" << lambda_d
     << " lambda_q=" << lambda_q << " lambda_0=" << lambda_0
     << " lambda_f=" << lambda_f;
  return os.str();
}

std::array<double, 3> park(const std::array<double, 3>& v_abc, double theta) {
  const double a = theta;
  const double b = theta - 2.0 * kPi / 3.0;
  const double c = theta + 2.0 * kPi / 3.0;
  const double k = 2.0 / 3.0;
  return {
      k * (v_abc[0] * std::cos(a) + v_abc[1] * std::cos(b) +
           v_abc[2] * std::cos(c)),
      -k * (v_abc[0] * std::sin(a) + v_abc[1] * std::sin(b) +
            v_abc[2] * std::sin(c)),
      (v_abc[0] + v_abc[1] + v_abc[2]) / 3.0,
  };
}

std::array<double, 3> inverse_park(double x_d, double x_q, double x_0,
                                   double theta) {
  const double a = theta;
  const double b = theta - 2.0 * kPi / 3.0;
  const double c = theta + 2.0 * kPi / 3.0;
  return {
      x_d * std::cos(a) - x_q * std::sin(a) + x_0,
      x_d * std::cos(b) - x_q * std::sin(b) + x_0,
      x_d * std::cos(c) - x_q * std::sin(c) + x_0,
  };
}

DqCurrents currents_from_flux(const MotorState& state,
                              const MachineParams& p) {
  const double beta = p.beta();
  if (!(beta > 0.0)) {
    throw DataError("currents_from_flux requires beta > 0, got " +
                    std::to_string(beta));
  }
  DqCurrents c;
  c.i_d = (2.0 * p.L_ff * state.lambda_d - 2.0 * p.L_af * state.lambda_f) / beta;
  c.i_f = (2.0 * p.L_d * state.lambda_f - 3.0 * p.L_af * state.lambda_d) / beta;
  c.i_q = state.lambda_q / p.L_q;
  c.i_0 = state.lambda_0 / p.L_0;
  return c;
}

MotorState derivative(const MotorState& s, const DqInputs& in,
                      const MachineParams& p, bool eq6_literal) {
  if (!s.finite()) {
    throw NumericalError("non-finite motor state: " + s.dump());
  }
  const double beta = p.beta();
  const double w_s = p.omega_s();
  const double sigma = p.sigma();
  const double w_m = s.w;

  MotorState d;
  d.theta = s.w;
  d.w = sigma * (3.0 * p.P_ref - (1.0 / p.D) * (w_m - w_s) +
                 (3.0 * beta * w_s - 6.0 * p.L_ff * p.L_q * w_s) /
                     (2.0 * beta * p.L_q) * s.lambda_d * s.lambda_q +
                 (3.0 * p.L_af * w_s / beta) * s.lambda_q * s.lambda_f);
  d.lambda_d = -(2.0 * p.R_a * p.L_ff / beta) * s.lambda_d +
               w_m * s.lambda_q + (2.0 * p.R_a * p.L_af / beta) * s.lambda_f +
               in.v_d;
  d.lambda_q = -w_m * s.lambda_d - (p.R_a / p.L_q) * s.lambda_q + in.v_q;
  d.lambda_0 = -(p.R_a / p.L_0) * (eq6_literal ? s.lambda_q : s.lambda_0) +
               in.v_0;
  d.lambda_f = (3.0 * p.R_f * p.L_af / beta) * s.lambda_d -
               (2.0 * p.R_f * p.L_d / beta) * s.lambda_f + in.v_f;
  return d;
}

void apply_fault(double t, const FaultSpec& fault,
                 std::array<double, 3>& v_abc, double& v_f) {
  if (fault.cls == FaultClass::NF || t < fault.t_f) return;
  switch (fault.cls) {
    case FaultClass::REVD:
      v_f = 0.0;
      break;
    case FaultClass::VREC:
      v_f *= 1.0 + fault.magnitude;
      break;
    case FaultClass::ONE_PSC:
      v_abc[0] = 0.0;  // phase a shorted to neutral; currents follow the ODE
      break;
    case FaultClass::TWO_PSC: {
      const double tied = 0.5 * (v_abc[0] + v_abc[1]);
      v_abc[0] = tied;
      v_abc[1] = tied;
      break;
    }
    case FaultClass::OP:
      v_abc[0] = 0.0;  // measured i_a forced to zero separately
      break;
    case FaultClass::NF:
      break;
  }
}

void apply_fault_measurement(double t, const FaultSpec& fault,
                             std::array<double, 3>& i_abc) {
  if (fault.cls == FaultClass::OP && t >= fault.t_f) {
    i_abc[0] = 0.0;
  }
}

ExperimentRecord simulate_experiment(const MachineParams& params,
                                     const FaultSpec& fault,
                                     std::uint64_t seed,
                                     const SimOptions& opts) {
  params.validate();
  const double w_s = params.omega_s();
  const double phase = opts.fixed_phase
                           ? *opts.fixed_phase
                           : SeededRng(seed, "sim/phase").uniform(0.0, 2.0 * kPi);

  auto grid_voltages = [&](double t) -> std::array<double, 3> {
    const double a = w_s * t + phase;
    return {params.V * std::cos(a), params.V * std::cos(a - 2.0 * kPi / 3.0),
            params.V * std::cos(a + 2.0 * kPi / 3.0)};
  };

  auto deriv = [&](double t, const MotorState& s) -> MotorState {
    std::array<double, 3> v_abc = grid_voltages(t);
    double v_f = params.v_f_nom;
    apply_fault(t, fault, v_abc, v_f);
    const auto dq = park(v_abc, s.theta);
    return derivative(s, {dq[0], dq[1], dq[2], v_f}, params,
                      opts.eq6_literal);
  };

  MotorState state;
  if (opts.initial_state) {
    state = *opts.initial_state;
  } else {
    state.theta = phase;
    state.w = w_s;
  }

  const auto n_samples =
      static_cast<std::size_t>(std::llround(opts.duration / opts.record_period));
  const auto steps_per_sample =
      static_cast<std::size_t>(std::llround(opts.record_period / opts.step));
  if (!(opts.step > 0.0) || steps_per_sample == 0) {
    throw UsageError("simulate_experiment: invalid step/record_period");
  }

  ExperimentRecord rec;
  rec.samples = n_samples;
  rec.sample_period = opts.record_period;
  rec.label = fault.cls;
  rec.t_f = fault.cls == FaultClass::NF ? 0.0f : static_cast<float>(fault.t_f);
  rec.data.assign(rec.channels * n_samples, 0.0);

  double t = 0.0;
  for (std::size_t m = 0; m < n_samples; ++m) {
    std::array<double, 3> v_abc = grid_voltages(t);
    double v_f = params.v_f_nom;
    apply_fault(t, fault, v_abc, v_f);
    const DqCurrents cur = currents_from_flux(state, params);
    std::array<double, 3> i_abc =
        inverse_park(cur.i_d, cur.i_q, cur.i_0, state.theta);
    apply_fault_measurement(t, fault, i_abc);

    rec.at(0, m) = v_abc[0];
    rec.at(1, m) = v_abc[1];
    rec.at(2, m) = v_abc[2];
    rec.at(3, m) = i_abc[0];
    rec.at(4, m) = i_abc[1];
    rec.at(5, m) = i_abc[2];
    rec.at(6, m) = state.w;
    rec.at(7, m) = cur.i_f;

    for (std::size_t k = 0; k < steps_per_sample; ++k) {
      state = rk4_step(deriv, t, state, opts.step);
      t += opts.step;
      if (!state.finite()) {
        throw NumericalError("integrator diverged at t=" + std::to_string(t) +
                             " (" + fault_name(fault.cls) +
                             "): " + state.dump());
      }
    }
    // keep t exact at sample boundaries
    t = static_cast<double>(m + 1) * opts.record_period;
  }
  return rec;
}

std::vector<ExperimentRecord> generate_dataset(const MachineParams& params,
                                               int per_class,
                                               std::uint64_t seed,
                                               const SimOptions& opts) {
  if (per_class < 1) throw UsageError("generate_dataset: per_class must be >= 1");
  std::vector<ExperimentRecord> records;
  records.reserve(static_cast<std::size_t>(per_class) * kNumFaultClasses);
  for (std::size_t c = 0; c < kNumFaultClasses; ++c) {
    const auto cls = static_cast<FaultClass>(c);
    for (int i = 0; i < per_class; ++i) {
      const std::string tag = std::string("dataset/") + fault_name(cls) + "/" +
                              std::to_string(i);
      SeededRng rng(seed, tag);
      FaultSpec fault;
      fault.cls = cls;
      if (cls != FaultClass::NF) {
        fault.t_f = rng.uniform(0.2, 0.8);
      }
      if (cls == FaultClass::VREC) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        fault.magnitude = sign * rng.uniform(0.2, 0.5);
      }
      MachineParams jittered = params;
      jittered.P_ref *= 1.0 + rng.uniform(-0.1, 0.1);
      records.push_back(
          simulate_experiment(jittered, fault, rng.next_u64(), opts));
    }
  }
  return records;
}

}  // namespace biresnet
