"""Numerical bench for a multimode-fiber + SLM programmable linear optical processor."""

__version__ = "0.1.0"

from .bench import (BenchConfig, InputPort, PhaseMask, VirtualDevice, apply_drift,
                    build_device, measure, modes_per_input, pack_inputs)
from .calibration import (EstimatedTM, ProbeBasis, measure_tm, phase_step_coefficient,
                          probe_basis, row_correlation)
from .errors import FiberLabError
from .fieldcore import (CircuitSpec, LossBudget, MeasuredCircuit, budget_total, haar_unitary,
                        normalize_rows, statistical_fidelity, to_db, trace_fidelity)
from .optimizer import DEParams, de_maximize
from .synthesis import (SynthesisObjective, conjugate_mask, fine_tune, focus_intensities,
                        implement_circuit,
                        tuning_params)
from .benchlab import CampaignConfig, loss_report, run_campaign, run_stability
