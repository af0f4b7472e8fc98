"""Command line entry point."""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from ..baseline import Seq2Seq, Seq2SeqConfig, seq2seq_decode, seq2seq_train
from ..model import Memory, Oracle, ParseFailure, Parser, RecursionLimitExceeded
from ..nncore import CheckpointError
from ..scfg import DOMAINS, build_dataset, example_record, load_builtin, sample_grammar, tokenize_utterance
from ..sexpr import MalformedExpression, parse_sexpr, render_sexpr
from ..training import history_jsonl, train
from . import sample
from .config import DESK, ConfigError, ScenarioConfig, load_config
from .metrics import bucketed
from .scenarios import domain_bundle, run_extension, run_transfer, union_grammars


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config(args) -> ScenarioConfig:
    return load_config(args.config, args.set or (), DESK if getattr(args, "desk", False) else None)


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _domains(name: str):
    if name == "all":
        return list(DOMAINS)
    if name not in DOMAINS:
        raise UsageError(f"unknown domain {name!r}; choose from all, {', '.join(DOMAINS)}")
    return [name]


# -- subcommands --------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    cfg = _config(args)
    os.makedirs(args.out, exist_ok=True)
    for d in _domains(args.domain):
        g_old, g_new = load_builtin(d)
        b = build_dataset(g_old, g_new, cfg.dataset())
        path = os.path.join(args.out, f"{d}.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(b.to_jsonl())
        print(f"{d}: {len(b.d_old)} D_old, {len(b.e_old)} E_old, {len(b.e_new)} E_new -> {path}")
    return 0


def cmd_build_memory(args) -> int:
    if args.sample:
        mem = sample.sample_memory()
    else:
        [d] = _domains(args.domain)
        b = domain_bundle(d, _config(args))
        mem = Memory(b.m_new if args.extended else b.m_old)
    lines = []
    for rule_id, e in mem.items():
        rec = example_record(e)
        rec["rule"] = rule_id
        lines.append(json.dumps(rec, sort_keys=True) + "\n")
    _emit("".join(lines), args.out)
    return 0


def _training_data(args, cfg):
    if args.sample:
        g = sample_grammar()
        return sample.sample_examples(), sample.sample_memory(), g
    [d] = _domains(args.domain)
    b = domain_bundle(d, cfg)
    return b.d_old[:cfg.train_size], Memory(b.m_old), union_grammars([d])


def cmd_train(args) -> int:
    cfg = _config(args)
    examples, memory, grammars = _training_data(args, cfg)
    tcfg = cfg.training()
    if args.system == "seq2seq":
        model = seq2seq_train(examples, cfg.training(cfg.s2s_epochs), Seq2SeqConfig(cfg.hidden, cfg.seed),
                              log=lambda r: print(json.dumps(r, sort_keys=True), flush=True))
        model.save(args.out)
        return 0
    if args.stop_at is not None:
        tcfg.dev_every, tcfg.stop_at = 1, args.stop_at
    parser = Parser(cfg.model())
    history = train(parser, examples, memory, grammars, tcfg,
                    log=lambda r: print(json.dumps(r, sort_keys=True), flush=True))
    parser.save(args.out, {"system": "lookadapt"})
    if args.history:
        with open(args.history, "w", encoding="utf-8") as fh:
            fh.write(history_jsonl(history))
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    if args.sample:
        memory, examples = sample.sample_memory(), sample.sample_examples()
    else:
        [d] = _domains(args.domain)
        b = domain_bundle(d, cfg)
        memory = Memory(b.m_new)
        try:
            examples = b.split(args.split)
        except KeyError:
            raise UsageError(f"unknown split {args.split!r}") from None
    if args.system == "seq2seq":
        model = Seq2Seq.load(args.model)
        preds = [seq2seq_decode(model, e.utterance) for e in examples]
    else:
        parser = Parser.load(args.model)
        preds = [parser.predict(memory, e.utterance) for e in examples]
    _emit(json.dumps(bucketed(preds, [e.logical_form for e in examples]), sort_keys=True) + "\n", args.out)
    return 0


def cmd_parse(args) -> int:
    text = args.utterance_opt or args.utterance
    if not text:
        raise UsageError("parse: an utterance is required")
    words = tokenize_utterance(text)
    parser = Parser.load(args.model) if args.model else Parser()
    kind = args.memory or ("full" if args.model else "trace")
    memory = sample.trace_memory() if kind == "trace" else sample.sample_memory()
    policy = None
    if args.oracle:
        g = sample_grammar()
        if args.gold:
            policy = Oracle(memory, parse_sexpr(args.gold))
        else:
            policy = Oracle.for_example(memory, sample.gold_example(words, g), g)
    elif not args.model:
        raise UsageError("parse: give --model, or --oracle for an untrained parser")
    trace = [] if args.trace else None
    out = parser.parse(memory, words, policy, trace)
    if trace is not None:
        for ev in trace:
            print(json.dumps(ev.to_dict(), sort_keys=True))
    else:
        print(render_sexpr(out))
    return 0


def cmd_gradcheck(args) -> int:
    from .checks import run_gradchecks
    reports = run_gradchecks(tolerance=args.tolerance)
    ok = True
    for name, rep in reports:
        print(f"{'PASS' if rep.passed else 'FAIL'} {name}: max relative error {rep.max_rel_error:.2e}"
              f" ({rep.worst_param})")
        ok = ok and rep.passed
    return 0 if ok else 1


def cmd_scenario(args) -> int:
    cfg = _config(args)
    os.makedirs(args.out, exist_ok=True)
    run = run_extension if args.kind == "extension" else run_transfer
    log = (lambda r: print(json.dumps(r, sort_keys=True), file=sys.stderr, flush=True)) if args.verbose else None
    for d in _domains(args.domain):
        rep = run(d, cfg, log=log)
        path = os.path.join(args.out, f"{args.kind}-{d}.json")
        rep.write(path)
        summary = ", ".join(f"{v} {r['E_new']['full']:.3f}" for v, r in sorted(rep.results.items()))
        print(f"{args.kind} {d}: {summary} -> {path}")
    return 0


# -- argument parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lookadapt", description="One-shot semantic parsing by look-up and adapt.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help="key=value configuration file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting")
        sp.add_argument("--desk", action="store_true", help="start from the desk-scale preset")
        return sp

    sp = with_config(sub.add_parser("gen-data", help="write the dataset splits as JSON lines"))
    sp.add_argument("--domain", default="all")
    sp.add_argument("--out", default="data")
    sp.set_defaults(func=cmd_gen_data)

    sp = with_config(sub.add_parser("build-memory", help="print the one-exemplar-per-rule memory"))
    sp.add_argument("--domain", default="person")
    sp.add_argument("--sample", action="store_true", help="use the small person grammar")
    sp.add_argument("--extended", action="store_true", help="include the new rules' exemplars")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_build_memory)

    sp = with_config(sub.add_parser("train", help="train a parser and save a checkpoint"))
    sp.add_argument("--domain", default="person")
    sp.add_argument("--sample", action="store_true")
    sp.add_argument("--system", choices=("lookadapt", "seq2seq"), default="lookadapt")
    sp.add_argument("--stop-at", type=float, help="stop once training accuracy reaches this value")
    sp.add_argument("--history", help="write per-epoch records here")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = with_config(sub.add_parser("eval", help="exact-match accuracy of a checkpoint"))
    sp.add_argument("--model", required=True)
    sp.add_argument("--system", choices=("lookadapt", "seq2seq"), default="lookadapt")
    sp.add_argument("--domain", default="person")
    sp.add_argument("--sample", action="store_true")
    sp.add_argument("--split", default="E_new_test")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("parse", help="parse one utterance with the small person grammar's memory")
    sp.add_argument("utterance", nargs="?")
    sp.add_argument("--utterance", dest="utterance_opt")
    sp.add_argument("--model", help="checkpoint (default: untrained weights)")
    sp.add_argument("--memory", choices=("trace", "full"),
                    help="three-entry trace memory or one exemplar per rule"
                         " (default: full with --model, trace without)")
    sp.add_argument("--oracle", action="store_true", help="take look-ups and decisions from the gold form")
    sp.add_argument("--gold", help="gold logical form (default: derived from the grammar)")
    sp.add_argument("--trace", action="store_true", help="print every look-up and decision")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("gradcheck", help="finite-difference checks of every operation and loss")
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.set_defaults(func=cmd_gradcheck)

    sp = with_config(sub.add_parser("scenario", help="run the extension or transfer experiment"))
    sp.add_argument("kind", choices=("extension", "transfer"))
    sp.add_argument("--domain", default="all")
    sp.add_argument("--out", default="runs")
    sp.add_argument("--verbose", action="store_true")
    sp.set_defaults(func=cmd_scenario)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("lookadapt: a subcommand is required")
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(exc, file=sys.stderr)
        return 2
    except (ParseFailure, RecursionLimitExceeded, MalformedExpression, CheckpointError, OSError,
            ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
