from .config import DESK, ConfigError, ScenarioConfig, load_config
from .metrics import LengthMismatch, accuracy, bucketed, exact_match
from .scenarios import (LOOKUPADAPT, ORACLE_DISCRIM, PRETRAIN_ENC, SEQ2SEQ, EvalReport, OverlapError,
                        ScenarioSpec, domain_bundle, run_extension, run_transfer)
