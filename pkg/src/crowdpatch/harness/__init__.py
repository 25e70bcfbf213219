from .config import ConfigInvalid, ScenarioConfig, load_config
from .lemmas import (
    LemmaReport,
    check_lemma_always_paid,
    check_lemma_max_one_payment,
    check_lemma_payment_only_if_proof,
    check_lemmas,
)
from .runner import RunResult, build_simulation, run_scenario
from .scanner import scan_confinement

__all__ = [
    "ConfigInvalid",
    "LemmaReport",
    "RunResult",
    "ScenarioConfig",
    "build_simulation",
    "check_lemma_always_paid",
    "check_lemma_max_one_payment",
    "check_lemma_payment_only_if_proof",
    "check_lemmas",
    "load_config",
    "run_scenario",
    "scan_confinement",
]
