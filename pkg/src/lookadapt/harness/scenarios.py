"""Extension and transfer experiments."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..baseline import Seq2SeqConfig, seq2seq_decode, seq2seq_train
from ..encoders import EmbeddingTable, load_word_vectors
from ..model import Memory, Oracle, Parser
from ..scfg import DOMAINS, DatasetBundle, DatasetConfig, Example, build_dataset, load_builtin
from ..training import load_encoders, pretrain_encoders, train
from .config import ScenarioConfig
from .metrics import bucketed

LOOKUPADAPT = "LOOKUPADAPT"
SEQ2SEQ = "SEQ2SEQ"
ORACLE_DISCRIM = "ORACLE-DISCRIM"
PRETRAIN_ENC = "PRETRAIN-ENC"
VARIANTS = (LOOKUPADAPT, SEQ2SEQ, ORACLE_DISCRIM, PRETRAIN_ENC)


class OverlapError(AssertionError):
    """An evaluation pair also appears in the training data."""


@dataclass
class ScenarioSpec:
    kind: str                 # "extension" or "transfer"
    target: str
    train_domains: Tuple[str, ...]
    variants: Tuple[str, ...]

    def __post_init__(self):
        if self.kind not in ("extension", "transfer"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.kind == "transfer" and self.target in self.train_domains:
            raise ValueError("transfer training domains must exclude the target")
        if self.kind == "extension" and self.train_domains != (self.target,):
            raise ValueError("extension trains on the target domain only")
        bad = set(self.variants) - set(VARIANTS)
        if bad:
            raise ValueError(f"unknown variants: {sorted(bad)}")


@dataclass
class EvalReport:
    kind: str
    domain: str
    train_domains: List[str]
    results: Dict[str, dict]      # variant -> {"E_new": buckets, "E_old": buckets}
    audit: Dict[str, object]
    fingerprint: str
    config: Dict[str, object]
    runtime: Dict[str, float] = field(default_factory=dict)

    def accuracy(self, variant: str, split: str = "E_new") -> float:
        return self.results[variant][split]["full"]

    def to_dict(self, with_runtime: bool = False) -> dict:
        out = {"kind": self.kind, "domain": self.domain, "train_domains": list(self.train_domains),
               "results": _rounded(self.results), "audit": self.audit,
               "fingerprint": self.fingerprint, "config": self.config}
        if with_runtime:
            out["runtime"] = _rounded(self.runtime, 3)
        return out

    def to_json(self) -> str:
        # runtime is kept out so that the report is a pure function of its inputs
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def write(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        with open(path + ".timing", "w", encoding="utf-8") as fh:
            fh.write(json.dumps(_rounded(self.runtime, 3), sort_keys=True) + "\n")


def _rounded(obj, digits: int = 6):
    if isinstance(obj, float):
        return round(obj, digits)
    if isinstance(obj, dict):
        return {k: _rounded(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v, digits) for v in obj]
    return obj


# -- shared resources ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _bundle(domain: str, dcfg: Tuple) -> DatasetBundle:
    g_old, g_new = load_builtin(domain)
    return build_dataset(g_old, g_new, DatasetConfig(*dcfg))


def domain_bundle(domain: str, cfg: ScenarioConfig) -> DatasetBundle:
    d = cfg.dataset()
    return _bundle(domain, (d.d_old, d.e_old, d.e_new, d.max_depth, d.min_depth, d.seed,
                            d.unambiguous, d.attempts_per_example))


def union_grammars(domains: Sequence[str] = DOMAINS) -> Dict[str, object]:
    """Domain -> G extended with G' (derivations of every split resolve against it)."""
    out = {}
    for d in domains:
        g_old, g_new = load_builtin(d)
        out[d] = g_old.extend(g_new)
    return out


@lru_cache(maxsize=4)
def _table(path: str) -> EmbeddingTable:
    return load_word_vectors(path or None)


def _audit(train: Sequence[Example], evals: Dict[str, Sequence[Example]],
           train_domains: Sequence[str], target: str, kind: str) -> Dict[str, object]:
    keys = {e.key for e in train}
    overlap = {name: sum(e.key in keys for e in exs) for name, exs in evals.items()}
    if any(overlap.values()):
        raise OverlapError(f"evaluation pairs seen in training: {overlap}")
    domains = sorted({e.domain for e in train})
    if kind == "transfer" and target in domains:
        raise OverlapError(f"transfer training data contains {target} examples")
    if not set(domains) <= set(train_domains):
        raise OverlapError(f"training data from unexpected domains: {domains}")
    return {"train_examples": len(train), "train_domain_tags": domains,
            "overlap": overlap}


def _evaluate(predict: Callable[[Example], object], examples: Sequence[Example]) -> dict:
    preds = [predict(e) for e in examples]
    return bucketed(preds, [e.logical_form for e in examples])


def _parser_eval(parser: Parser, memory: Memory, examples, grammars=None, oracle_discrim=False):
    if oracle_discrim:
        return _evaluate(lambda e: parser.predict(
            memory, e.utterance, Oracle.for_example(memory, e, grammars, lookup=False, discrim=True)),
            examples)
    return _evaluate(lambda e: parser.predict(memory, e.utterance), examples)


# -- extension --------------------------------------------------------------------------

def run_extension(domain: str, cfg: Optional[ScenarioConfig] = None,
                  variants: Sequence[str] = (LOOKUPADAPT, SEQ2SEQ),
                  log: Optional[Callable[[dict], None]] = None) -> EvalReport:
    """Train on D_old with M_old; test with M_old plus the one-shot exemplars of the new rules."""
    cfg = cfg or ScenarioConfig()
    spec = ScenarioSpec("extension", domain, (domain,), tuple(variants))
    clock = {}
    t0 = time.perf_counter()
    b = domain_bundle(domain, cfg)
    grammars = union_grammars([domain])
    table = _table(cfg.vectors)
    train_set = b.d_old[:cfg.train_size]
    one_shot = [e for _, e in b.m_new_prime]
    evals = {"E_new": b.e_new_test, "E_old": b.e_old_test}
    clock["data"] = time.perf_counter() - t0
    results = {}
    if LOOKUPADAPT in spec.variants or ORACLE_DISCRIM in spec.variants:
        t = time.perf_counter()
        parser = Parser(cfg.model(), table)
        m_new = Memory(b.m_new)
        train(parser, train_set, Memory(b.m_old), grammars, cfg.training(select=True),
              dev=(m_new, b.e_new_dev), log=_tag(log, domain, LOOKUPADAPT))
        for v in (LOOKUPADAPT, ORACLE_DISCRIM):
            if v in spec.variants:
                results[v] = {k: _parser_eval(parser, m_new, exs, grammars, v == ORACLE_DISCRIM)
                              for k, exs in evals.items()}
        clock[LOOKUPADAPT] = time.perf_counter() - t
    if SEQ2SEQ in spec.variants:
        t = time.perf_counter()
        # no memory: the one-shot exemplars join the training data, once per epoch
        model = seq2seq_train(train_set + one_shot, cfg.training(cfg.s2s_epochs, select=True),
                              Seq2SeqConfig(hidden=cfg.hidden, seed=cfg.seed), table,
                              log=_tag(log, domain, SEQ2SEQ), dev=b.e_new_dev)
        results[SEQ2SEQ] = {k: _evaluate(lambda e: seq2seq_decode(model, e.utterance), exs)
                            for k, exs in evals.items()}
        clock[SEQ2SEQ] = time.perf_counter() - t
    if PRETRAIN_ENC in spec.variants:
        raise ValueError("PRETRAIN-ENC is a transfer variant")
    audit = _audit(train_set + one_shot, evals, spec.train_domains, domain, "extension")
    audit["dataset"] = b.fingerprint()
    clock["total"] = time.perf_counter() - t0
    return EvalReport("extension", domain, [domain], results, audit, cfg.fingerprint(),
                      _config_view(cfg), clock)


# -- transfer -----------------------------------------------------------------------------

def _transfer_sources(target: str, cfg: ScenarioConfig):
    sources = tuple(d for d in DOMAINS if d != target)
    examples, memory = [], []
    for d in sources:
        b = domain_bundle(d, cfg)
        examples += b.d_old[:cfg.transfer_size]
        memory += b.m_old
    return sources, examples, memory


@lru_cache(maxsize=2)
def _pretrained(cfg_text: str):
    """Encoder weights trained on every domain (shared by all transfer targets)."""
    from .config import apply_overrides, parse_config_text
    cfg = apply_overrides(ScenarioConfig(), parse_config_text(cfg_text))
    examples, memory = [], []
    for d in DOMAINS:
        b = domain_bundle(d, cfg)
        examples += b.d_old[:cfg.transfer_size]
        memory += b.m_old
    parser = Parser(cfg.model(), _table(cfg.vectors))
    snap = pretrain_encoders(parser, examples, Memory(memory), union_grammars(),
                             cfg.training(cfg.pretrain_epochs))
    return snap, examples


def run_transfer(domain: str, cfg: Optional[ScenarioConfig] = None,
                 variants: Sequence[str] = (LOOKUPADAPT, ORACLE_DISCRIM, PRETRAIN_ENC),
                 log: Optional[Callable[[dict], None]] = None) -> EvalReport:
    """Train on the other domains; test on ``domain`` with its own memory M_new."""
    cfg = cfg or ScenarioConfig()
    sources, train_set, source_memory = _transfer_sources(domain, cfg)
    spec = ScenarioSpec("transfer", domain, sources, tuple(variants))
    if SEQ2SEQ in spec.variants:
        raise ValueError("SEQ2SEQ is an extension variant")
    clock = {}
    t0 = time.perf_counter()
    b = domain_bundle(domain, cfg)
    grammars = union_grammars()
    table = _table(cfg.vectors)
    target_memory = Memory(b.m_new)
    evals = {"E_new": b.e_new_test, "E_old": b.e_old_test}
    results = {}
    audit = _audit(train_set, evals, sources, domain, "transfer")
    if LOOKUPADAPT in spec.variants or ORACLE_DISCRIM in spec.variants:
        t = time.perf_counter()
        parser = Parser(cfg.model(), table)
        train(parser, train_set, Memory(source_memory), grammars, cfg.training(cfg.transfer_epochs, select=True),
              dev=(target_memory, b.e_new_dev), log=_tag(log, domain, LOOKUPADAPT))
        for v in (LOOKUPADAPT, ORACLE_DISCRIM):
            if v in spec.variants:
                results[v] = {k: _parser_eval(parser, target_memory, exs, grammars, v == ORACLE_DISCRIM)
                              for k, exs in evals.items()}
        clock[LOOKUPADAPT] = time.perf_counter() - t
    if PRETRAIN_ENC in spec.variants:
        t = time.perf_counter()
        snap, pre_examples = _pretrained(cfg.to_text())
        # the encoders saw the target's D_old during pretraining, never its test pairs
        audit["pretrain"] = _audit(pre_examples, evals, DOMAINS, domain, "pretrain")
        parser = Parser(cfg.model(), table)
        load_encoders(parser, snap, freeze=True)
        train(parser, train_set, Memory(source_memory), grammars, cfg.training(cfg.transfer_epochs, select=True),
              dev=(target_memory, b.e_new_dev), log=_tag(log, domain, PRETRAIN_ENC))
        results[PRETRAIN_ENC] = {k: _parser_eval(parser, target_memory, exs) for k, exs in evals.items()}
        clock[PRETRAIN_ENC] = time.perf_counter() - t
    audit["dataset"] = b.fingerprint()
    clock["total"] = time.perf_counter() - t0
    return EvalReport("transfer", domain, list(sources), results, audit, cfg.fingerprint(),
                      _config_view(cfg), clock)


def _config_view(cfg: ScenarioConfig) -> Dict[str, object]:
    return {k: v for k, v in cfg.items().items() if k != "out_dir"}


def _tag(log, domain, variant):
    if log is None:
        return None
    return lambda rec: log(dict(rec, domain=domain, variant=variant))
