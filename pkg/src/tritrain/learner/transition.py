"""Arc-standard transition system with a single-root constraint.

Token 0 is the artificial root at the bottom of the stack. The arc from the
root may only be built once the buffer is empty and a single real token is
left on the stack, which makes every terminal configuration a valid tree.
"""
from __future__ import annotations

from typing import Sequence

SHIFT = "SHIFT"
LEFT = "LEFT"
RIGHT = "RIGHT"
ROOT = "ROOT"


class NonProjectiveError(ValueError):
    pass


class State:
    __slots__ = ("n", "stack", "b", "heads", "deprels", "lefts", "rights")

    def __init__(self, n: int):
        self.n = n
        self.stack = [0]
        self.b = 1  # next buffer token (1-based)
        self.heads = [-1] * (n + 1)
        self.deprels = [""] * (n + 1)
        self.lefts: list[list[int]] = [[] for _ in range(n + 1)]
        self.rights: list[list[int]] = [[] for _ in range(n + 1)]

    def copy(self) -> "State":
        new = State.__new__(State)
        new.n = self.n
        new.stack = self.stack[:]
        new.b = self.b
        new.heads = self.heads[:]
        new.deprels = self.deprels[:]
        new.lefts = [c[:] for c in self.lefts]
        new.rights = [c[:] for c in self.rights]
        return new

    @property
    def terminal(self) -> bool:
        return self.b > self.n and len(self.stack) == 1

    def can_shift(self) -> bool:
        return self.b <= self.n

    def can_left(self) -> bool:
        return len(self.stack) > 2

    def can_right(self) -> bool:
        return len(self.stack) > 2

    def can_root(self) -> bool:
        return len(self.stack) == 2 and self.b > self.n

    def _attach(self, head: int, dep: int, label: str) -> None:
        self.heads[dep] = head
        self.deprels[dep] = label
        if dep < head:
            self.lefts[head].append(dep)
        else:
            self.rights[head].append(dep)

    def apply(self, move: str, label: str = "") -> None:
        if move == SHIFT:
            self.stack.append(self.b)
            self.b += 1
        elif move == LEFT:
            s0 = self.stack.pop()
            s1 = self.stack.pop()
            self._attach(s0, s1, label)
            self.stack.append(s0)
        elif move == RIGHT or move == ROOT:
            s0 = self.stack.pop()
            self._attach(self.stack[-1], s0, label)
        else:
            raise ValueError(f"unknown transition {move!r}")


def oracle_step(state: State, gold_heads: Sequence[int], gold_deprels: Sequence[str],
                pending: list[int], root_label: str = "root") -> tuple[str, str]:
    """Next gold transition; ``pending[h]`` counts unattached gold dependents of h."""
    stack = state.stack
    if len(stack) >= 2:
        s0, s1 = stack[-1], stack[-2]
        if s1 != 0 and gold_heads[s1 - 1] == s0:
            return LEFT, gold_deprels[s1 - 1]
        if gold_heads[s0 - 1] == s1 and pending[s0] == 0:
            if s1 == 0:
                if state.can_root():
                    return ROOT, root_label
            else:
                return RIGHT, gold_deprels[s0 - 1]
    if state.can_shift():
        return SHIFT, ""
    raise NonProjectiveError("no gold transition available; tree is not projective")


def static_oracle(heads: Sequence[int], deprels: Sequence[str] | None = None,
                  root_label: str = "root") -> list[tuple[str, str]]:
    """Gold transition sequence for a projective single-rooted tree."""
    from ..conllu import is_projective, tree_errors

    n = len(heads)
    if deprels is None:
        deprels = ["_"] * n
    err = tree_errors(heads)
    if err:
        raise ValueError(f"not a valid tree: {err}")
    if not is_projective(heads):
        raise NonProjectiveError("tree is not projective")
    pending = [0] * (n + 1)
    for h in heads:
        pending[h] += 1
    state = State(n)
    seq = []
    while not state.terminal:
        move, label = oracle_step(state, heads, deprels, pending, root_label)
        if move in (LEFT, RIGHT, ROOT):
            dep = state.stack[-2] if move == LEFT else state.stack[-1]
            pending[gold_head_of(heads, dep)] -= 1
        state.apply(move, label)
        seq.append((move, label))
    return seq


def gold_head_of(heads: Sequence[int], dep: int) -> int:
    return heads[dep - 1]


def replay(n: int, transitions: Sequence[tuple[str, str]]) -> tuple[list[int], list[str]]:
    """Run transitions from the initial state; returns (heads, deprels)."""
    state = State(n)
    for move, label in transitions:
        state.apply(move, label)
    if not state.terminal:
        raise ValueError("transition sequence does not reach a terminal state")
    return state.heads[1:], state.deprels[1:]
