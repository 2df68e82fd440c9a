from .config import ConfigError, ScenarioConfig, load_scenario, shipped_scenarios
from .runners import (CertifyResult, SimulationResult, commutator_table, run_certify, run_decay,
                      run_identities, run_simulate)
