from .grammar import (Deriv, Grammar, GrammarParseError, Rule, Slot, UnproducibleNonterminal,
                      derivation_paths, fill_template, load_domain, load_grammar, make_rule, realize)
from .generate import (BudgetExceeded, DepthUnsatisfiable, Example, contains, enumerate_derivations,
                       enumerate_domain, is_ambiguous, make_example, parse_source, sample_derivation,
                       sample_example, tokenize_utterance)
from .dataset import (DatasetBundle, DatasetConfig, InsufficientNovelExamples, UncoverableRule,
                      build_dataset, build_memory, bundle_from_jsonl, example_from_record,
                      example_record, memory_pool, read_examples, write_examples)
from .builtin import DOMAINS, builtin_grammars, load_builtin, sample_grammar
