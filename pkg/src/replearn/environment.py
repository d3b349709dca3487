"""The translation-invariant Boolean "retina" environment and (n, m)-sampling.

Inputs are binary vectors of length ``R`` whose active pixels form a single
cyclic run of length ``1..L``.  The run length is the *object class*; every
task is a Boolean function of the class alone, so it is invariant under
cyclic shifts of the retina.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvalidInputError(ValueError):
    """A retina vector that is not a single cyclic run of active pixels."""


def enumerate_inputs(R: int = 10, L_max: int = 4) -> list[tuple[int, ...]]:
    """All retina vectors with one cyclic run of length ``1..L_max``.

    Ordered by run length, then by the position where the run starts.
    """
    if R < 2:
        raise ValueError(f"retina size must be at least 2, got {R}")
    if not 1 <= L_max < R:
        raise ValueError(f"need 1 <= L_max < R, got L_max={L_max}, R={R}")
    out = []
    for length in range(1, L_max + 1):
        for start in range(R):
            bits = [0] * R
            for j in range(length):
                bits[(start + j) % R] = 1
            out.append(tuple(bits))
    return out


def enumerate_tasks(L_max: int = 4) -> list[tuple[int, ...]]:
    """Every non-constant Boolean table over the classes ``1..L_max``.

    ``table[k - 1]`` is the label of class ``k``.  Tables are ordered by the
    integer ``sum(table[k - 1] << (k - 1))``.
    """
    if L_max < 1:
        raise ValueError("L_max must be at least 1")
    return [
        tuple((v >> k) & 1 for k in range(L_max)) for v in range(1, 2**L_max - 1)
    ]


def object_class(x: Sequence[int], L_max: int | None = None) -> int:
    """Length of the single cyclic run of ones in ``x``."""
    bits = [int(b) for b in x]
    if any(b not in (0, 1) for b in bits):
        raise InvalidInputError(f"retina vector must be binary: {bits}")
    R = len(bits)
    ones = sum(bits)
    starts = sum(1 for i in range(R) if bits[i] == 1 and bits[i - 1] == 0)
    if ones == 0 or starts != 1:
        raise InvalidInputError(f"expected exactly one cyclic run of ones: {bits}")
    if L_max is not None and ones > L_max:
        raise InvalidInputError(f"run of length {ones} exceeds L_max={L_max}")
    return ones


def label(task: Sequence[int], x: Sequence[int]) -> int:
    return int(task[object_class(x, len(task)) - 1])


def cyclic_shift(x: Sequence[int], s: int) -> tuple[int, ...]:
    R = len(x)
    return tuple(int(x[(i - s) % R]) for i in range(R))


@dataclass(frozen=True)
class Environment:
    """Uniform task measure over all tables, uniform input marginal over all runs."""

    retina_size: int = 10
    max_run: int = 4
    tasks: tuple[tuple[int, ...], ...] = field(init=False)
    input_list: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "input_list", tuple(enumerate_inputs(self.retina_size, self.max_run)))
        object.__setattr__(self, "tasks", tuple(enumerate_tasks(self.max_run)))
        X = np.array(self.input_list, dtype=float)
        classes = X.sum(axis=1).astype(int)
        T = np.array(self.tasks, dtype=float).reshape(len(self.tasks), self.max_run)
        object.__setattr__(self, "_X", X)
        object.__setattr__(self, "_classes", classes)
        object.__setattr__(self, "_labels", T[:, classes - 1])

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_inputs(self) -> int:
        return len(self.input_list)

    @property
    def inputs(self) -> np.ndarray:
        """``(N, R)`` float matrix of all inputs, in enumeration order."""
        return self._X

    @property
    def classes(self) -> np.ndarray:
        return self._classes

    @property
    def label_matrix(self) -> np.ndarray:
        """``(T, N)`` labels of every task on every input."""
        return self._labels


@dataclass(frozen=True)
class NMSample:
    """An ``n x m`` training matrix; row ``i`` is labelled by task ``task_ids[i]``."""

    task_ids: np.ndarray
    inputs: np.ndarray
    labels: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        tid = np.asarray(self.task_ids, dtype=int)
        X = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 3 or y.shape != X.shape[:2] or tid.shape != (X.shape[0],):
            raise ValueError(
                f"inconsistent sample shapes: task_ids {tid.shape}, inputs {X.shape}, labels {y.shape}"
            )
        if X.shape[1] < 1:
            raise ValueError("rows must contain at least one example")
        object.__setattr__(self, "task_ids", tid)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    def row(self, i: int) -> list[tuple[np.ndarray, float]]:
        return list(zip(self.inputs[i], self.labels[i]))

    def to_text(self) -> str:
        seed = -1 if self.seed is None else self.seed
        lines = [f"{self.n} {self.m} {seed}"]
        for i in range(self.n):
            for j in range(self.m):
                bits = "".join(str(int(b)) for b in self.inputs[i, j])
                lines.append(f"{self.task_ids[i]} {bits} {int(self.labels[i, j])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NMSample":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty sample file")
        try:
            n, m, seed = (int(v) for v in lines[0].split())
        except ValueError as exc:
            raise ValueError(f"line 1: bad header {lines[0]!r}") from exc
        if len(lines) != 1 + n * m:
            raise ValueError(f"expected {n * m} example lines, found {len(lines) - 1}")
        task_ids = np.zeros(n, dtype=int)
        X, y = [], []
        for k, ln in enumerate(lines[1:]):
            parts = ln.split()
            if len(parts) != 3:
                raise ValueError(f"line {k + 2}: expected 'task bits label', got {ln!r}")
            i = k // m
            t = int(parts[0])
            if k % m == 0:
                task_ids[i] = t
            elif task_ids[i] != t:
                raise ValueError(f"line {k + 2}: task index changes within row {i}")
            X.append([int(c) for c in parts[1]])
            y.append(int(parts[2]))
        R = len(X[0])
        return cls(
            task_ids,
            np.array(X, dtype=float).reshape(n, m, R),
            np.array(y, dtype=float).reshape(n, m),
            None if seed < 0 else seed,
        )


def sample_nm(env: Environment, n: int, m: int, seed: int) -> NMSample:
    """Draw ``n`` tasks and then ``m`` inputs per task, all with replacement."""
    if n < 1 or m < 1:
        raise ValueError(f"n and m must be positive, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    task_ids = rng.integers(0, env.n_tasks, size=n)
    input_ids = rng.integers(0, env.n_inputs, size=(n, m))
    labels = env.label_matrix[task_ids[:, None], input_ids]
    return NMSample(task_ids, env.inputs[input_ids], labels, seed)


def sample_task_row(env: Environment, task_id: int, m: int, seed: int) -> NMSample:
    """An ``(1, m)`` sample for a fixed task."""
    rng = np.random.default_rng(seed)
    input_ids = rng.integers(0, env.n_inputs, size=(1, m))
    labels = env.label_matrix[task_id, input_ids]
    return NMSample(np.array([task_id]), env.inputs[input_ids], labels, seed)


def full_table(env: Environment, task_id: int) -> NMSample:
    """The task's complete truth table over every input, as a ``(1, N)`` sample."""
    return NMSample(
        np.array([task_id]), env.inputs[None, :, :], env.label_matrix[task_id][None, :]
    )
