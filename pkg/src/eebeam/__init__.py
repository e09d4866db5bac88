"""Energy-efficient coordinated multicell MISO beamforming with rate-dependent processing power."""
from .baselines import BaselineConfig, run_scheme
from .engine import Problem, SolverConfig, run_engine
from .harness import ExperimentSpec, load_spec, oracle_1d_power, run_experiment, fairness_index
from .metrics import evaluate, jain_index
from .pilots import allocate, allocate_greedy, group_sizes
from .power import PowerModelParams, network_circuit_power
from .report import RunReport
from .scenario import ScenarioConfig, contaminate, make_drop
from .solvers import run, run_netee

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig", "ExperimentSpec", "PowerModelParams", "Problem", "RunReport",
    "ScenarioConfig", "SolverConfig", "allocate", "allocate_greedy", "contaminate", "evaluate",
    "fairness_index", "group_sizes", "jain_index", "load_spec", "make_drop",
    "network_circuit_power", "oracle_1d_power", "run", "run_engine", "run_experiment",
    "run_netee", "run_scheme",
]
