"""Satellite detumbling toolkit.

Rigid-body attitude simulation on a Keplerian orbit with a dipole
geomagnetic field, driven by either a B-dot law or a continuation/GMRES
model-predictive controller commanding a single-axis magnetorquer.
"""

from .accel import USING_NUMBA
from .bdot import bdot_command_full, bdot_command_single_axis
from .cgmres import (ContinuationParams, ControlStage, HorizonConfig,
                     HorizonContext, InitializationError, MpcController,
                     WeightSchedule, backward_costates, continuation_step,
                     forward_rollout, gmres_solve, hamiltonian,
                     hamiltonian_grad_u, hamiltonian_grad_w,
                     initialize_solution, kkt_residual, mpc_command,
                     select_weights, stage_cost, terminal_cost)
from .config import ConfigError, ScenarioConfig, baseline_path, load_config, parse_config
from .dynamics import (InertiaTensor, angular_momentum, euler_rates,
                       lyapunov_rate, lyapunov_value, magnetic_torque,
                       quaternion_normalize, quaternion_rate)
from .orbit import (DipoleModelConfig, OrbitalElements, bdot_estimate,
                    dipole_field_inertial, field_in_body, propagate_position,
                    solve_kepler)
from .simulate import (BodyState, DetumbleMetrics, SimulationAborted, Trace,
                       compute_metrics, rk4_step, run_scenario)

__version__ = "0.1.0"
