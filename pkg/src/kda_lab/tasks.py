"""Synthetic sequence tasks: palindrome copying, associative recall, stacks.

Each generator produces a TaskInstance whose supervision pattern follows the
task's table convention: unsupervised positions carry the ignore marker and
an independent replay oracle (reverser / dictionary / stack simulator) can
reproduce every target from the tokens alone.

Token-id layout conventions (documented, not configurable):
  palindrome: 0 = separator, payload tokens from [1, vocab)
  mqar:       0 = separator, keys and values from [1, vocab)
  stack:      0 = <push>, 1 = <pop>, stack ids 2 .. 2+n_stacks-1,
              elements from 2+n_stacks .. vocab-1
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractError

IGNORE = -1

SEP = 0
PUSH = 0
POP = 1


@dataclass
class TaskInstance:
    """Token ids with per-position targets; IGNORE marks unsupervised slots."""

    tokens: np.ndarray
    targets: np.ndarray
    vocab_size: int

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if self.tokens.shape != self.targets.shape or self.tokens.ndim != 1:
            raise ContractError("tokens/targets must be equal-length 1-D arrays")
        if np.any(self.tokens < 0) or np.any(self.tokens >= self.vocab_size):
            raise ContractError("token ids must lie in [0, vocab_size)")
        bad = (self.targets != IGNORE) & (
            (self.targets < 0) | (self.targets >= self.vocab_size))
        if np.any(bad):
            raise ContractError("targets must be IGNORE or valid token ids")

    @property
    def L(self) -> int:
        return self.tokens.shape[0]

    def supervised(self) -> np.ndarray:
        return self.targets != IGNORE


def palindrome_instance(prefix, vocab: int) -> TaskInstance:
    """Layout prefix + <sep> + reversed prefix; each post-separator position
    predicts the next reversed token, the last one is unsupervised.  With a
    single payload token the separator itself predicts it (otherwise nothing
    would be supervised)."""
    prefix = list(int(t) for t in prefix)
    n = len(prefix)
    if n < 1:
        raise ContractError("palindrome needs at least one token")
    if vocab <= SEP or any(t <= SEP or t >= vocab for t in prefix):
        raise ContractError("payload tokens must lie in (separator, vocab)")
    rev = prefix[::-1]
    tokens = prefix + [SEP] + rev
    targets = [IGNORE] * len(tokens)
    if n == 1:
        targets[n] = rev[0]  # supervise the separator position
    else:
        for i in range(n - 1):
            targets[n + 1 + i] = rev[i + 1]
    return TaskInstance(np.array(tokens), np.array(targets), vocab)


def gen_palindrome(n_tokens: int, vocab: int, seed: int) -> TaskInstance:
    if n_tokens < 1:
        raise ContractError("n_tokens must be >= 1")
    if vocab < 2:
        raise ContractError("vocab must exceed the separator id")
    rng = np.random.default_rng(seed)
    prefix = rng.integers(1, vocab, size=n_tokens)
    return palindrome_instance(prefix, vocab)


def replay_palindrome(inst: TaskInstance) -> np.ndarray:
    """Reverse-replay oracle: recompute targets from the tokens alone."""
    sep_positions = np.flatnonzero(inst.tokens == SEP)
    if sep_positions.shape[0] != 1:
        raise ContractError("expected exactly one separator")
    n = int(sep_positions[0])
    rev = inst.tokens[:n][::-1]
    targets = np.full(inst.L, IGNORE, dtype=np.int64)
    if n == 1:
        targets[n] = rev[0]
    else:
        targets[n + 1:n + n] = rev[1:]
    return targets


def mqar_instance(pairs, queries, vocab: int) -> TaskInstance:
    """Key-value pairs, <sep>, queried keys; each query position is
    supervised with its bound value."""
    keys = [int(k) for k, _ in pairs]
    if len(set(keys)) != len(keys):
        raise ContractError("keys must be distinct")
    binding = {int(k): int(v) for k, v in pairs}
    tokens = []
    for k, v in pairs:
        tokens += [int(k), int(v)]
    tokens.append(SEP)
    targets = [IGNORE] * len(tokens)
    for q in queries:
        q = int(q)
        if q not in binding:
            raise ContractError(f"query {q} was never bound")
        tokens.append(q)
        targets.append(binding[q])
    if any(t <= SEP or t >= vocab for t in tokens if t != SEP):
        raise ContractError("pair/query tokens must lie in (separator, vocab)")
    return TaskInstance(np.array(tokens), np.array(targets), vocab)


def gen_mqar(n_pairs: int, n_queries: int, vocab: int, seed: int) -> TaskInstance:
    if n_queries > n_pairs:
        raise ContractError("n_queries must not exceed n_pairs")
    if vocab - 1 < n_pairs:
        raise ContractError("vocab too small for distinct keys")
    rng = np.random.default_rng(seed)
    keys = rng.choice(np.arange(1, vocab), size=n_pairs, replace=False)
    values = rng.integers(1, vocab, size=n_pairs)
    queried = rng.choice(keys, size=n_queries, replace=False)
    return mqar_instance(list(zip(keys, values)), queried, vocab)


def replay_mqar(inst: TaskInstance) -> np.ndarray:
    """Dictionary oracle: rebuild the binding, answer the queries."""
    sep_positions = np.flatnonzero(inst.tokens == SEP)
    if sep_positions.shape[0] != 1:
        raise ContractError("expected exactly one separator")
    sep = int(sep_positions[0])
    if sep % 2 != 0:
        raise ContractError("pair region must have even length")
    binding = {}
    for i in range(0, sep, 2):
        binding[int(inst.tokens[i])] = int(inst.tokens[i + 1])
    targets = np.full(inst.L, IGNORE, dtype=np.int64)
    for pos in range(sep + 1, inst.L):
        targets[pos] = binding[int(inst.tokens[pos])]
    return targets


def stack_instance(ops, n_stacks: int, vocab: int) -> TaskInstance:
    """Encode (op, stack_id, element) triples.

    Pushes are unsupervised.  A pop triple's element token is what was most
    recently pushed; the stack-id position predicts it (next-token style),
    and the element position itself is unsupervised.
    """
    elem_base = 2 + n_stacks
    if vocab <= elem_base:
        raise ContractError("vocab too small for stack ids plus elements")
    tokens, targets = [], []
    stacks = [[] for _ in range(n_stacks)]
    for op, sid, elem in ops:
        sid, elem = int(sid), int(elem)
        if not (0 <= sid < n_stacks):
            raise ContractError(f"stack id {sid} out of range")
        if not (elem_base <= elem < vocab):
            raise ContractError(f"element {elem} outside the element range")
        if op == "push":
            stacks[sid].append(elem)
            tokens += [PUSH, 2 + sid, elem]
            targets += [IGNORE, IGNORE, IGNORE]
        elif op == "pop":
            if not stacks[sid]:
                raise ContractError(f"pop on empty stack {sid}")
            top = stacks[sid].pop()
            if top != elem:
                raise ContractError("pop element does not match stack top")
            tokens += [POP, 2 + sid, elem]
            targets += [IGNORE, elem, IGNORE]
        else:
            raise ContractError(f"unknown stack op {op!r}")
    return TaskInstance(np.array(tokens), np.array(targets), vocab)


def gen_stack(n_stacks: int, n_ops: int, vocab: int, seed: int) -> TaskInstance:
    """Random valid push/pop stream; pops only target non-empty stacks."""
    elem_base = 2 + n_stacks
    if vocab <= elem_base:
        raise ContractError("vocab too small for stack ids plus elements")
    rng = np.random.default_rng(seed)
    stacks = [[] for _ in range(n_stacks)]
    ops = []
    for _ in range(n_ops):
        non_empty = [i for i, s in enumerate(stacks) if s]
        do_pop = bool(non_empty) and rng.random() < 0.5
        if do_pop:
            sid = int(rng.choice(non_empty))
            ops.append(("pop", sid, stacks[sid].pop()))
        else:
            sid = int(rng.integers(0, n_stacks))
            elem = int(rng.integers(elem_base, vocab))
            stacks[sid].append(elem)
            ops.append(("push", sid, elem))
    # rebuild through stack_instance for its own validity checks
    return stack_instance(ops, n_stacks, vocab)


def replay_stack(inst: TaskInstance, n_stacks: int) -> np.ndarray:
    """Stack-simulator oracle over the encoded triples."""
    if inst.L % 3 != 0:
        raise ContractError("stack stream must be triples")
    stacks = [[] for _ in range(n_stacks)]
    targets = np.full(inst.L, IGNORE, dtype=np.int64)
    for p in range(0, inst.L, 3):
        op, sid = int(inst.tokens[p]), int(inst.tokens[p + 1]) - 2
        elem = int(inst.tokens[p + 2])
        if op == PUSH:
            stacks[sid].append(elem)
        else:
            targets[p + 1] = stacks[sid].pop()
    return targets


def oracle_targets(inst: TaskInstance, task: str, n_stacks: int = 0) -> np.ndarray:
    if task == "palindrome":
        return replay_palindrome(inst)
    if task == "mqar":
        return replay_mqar(inst)
    if task == "stack":
        return replay_stack(inst, n_stacks)
    raise ContractError(f"unknown task {task!r}")


def write_jsonl(instances, path):
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps({
                "tokens": inst.tokens.tolist(),
                "targets": inst.targets.tolist(),
                "vocab_size": inst.vocab_size,
            }) + "\n")


def read_jsonl(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(TaskInstance(np.array(obj["tokens"]),
                                    np.array(obj["targets"]),
                                    obj["vocab_size"]))
    return out
