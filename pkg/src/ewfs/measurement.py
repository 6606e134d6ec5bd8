"""Projective measurements and their unitary dilations.

A measurement is described once (labeled orthonormal outcome vectors on a
set of target registers) and can then be realized two ways:

* ``measure_collapse`` samples an outcome and projects the state, leaving a
  classical record with the caller, or
* ``build_dilation`` turns the same description into a controlled unitary
  that writes the outcome into a memory register instead of collapsing.

The two realizations produce identical outcome statistics (deferred
measurement); the protocol layer relies on that equivalence to switch
between the collapse and the fully unitary picture of the experiment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .qcore import (
    DEFAULT_ATOL,
    IMPOSSIBLE_MASS,
    DensityMatrix,
    Operator,
    SpaceLayout,
    StateVector,
    basis_state,
    born_probability,
    embed,
    project_component,
    projector,
    tensor,
)

POLICY_AUTO = "auto-complete"
POLICY_ERROR = "error"


class ImpossibleOutcomeError(RuntimeError):
    """A sampled outcome carries (numerically) zero probability: RNG misuse."""


@dataclass(frozen=True, eq=False)
class MeasurementSpec:
    """Labeled orthonormal basis on a set of target registers.

    The listed outcomes need not span the target space; completion is
    governed by ``completion_policy``:  ``auto-complete`` appends
    deterministic ``other_k`` outcomes, ``error`` refuses incomplete use.
    """

    target: tuple[str, ...]
    outcomes: tuple[tuple[str, StateVector], ...]
    completion_policy: str = POLICY_AUTO

    def __post_init__(self) -> None:
        object.__setattr__(self, "target", tuple(self.target))
        object.__setattr__(self, "outcomes", tuple((str(l), v) for l, v in self.outcomes))
        if self.completion_policy not in (POLICY_AUTO, POLICY_ERROR):
            raise ValueError(f"unknown completion policy {self.completion_policy!r}")
        if not self.outcomes:
            raise ValueError("measurement needs at least one outcome")
        labels = [l for l, _ in self.outcomes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate outcome labels: {labels}")
        first = self.outcomes[0][1].layout
        if first.names != self.target:
            raise ValueError(
                f"outcome vectors live on {first.names}, spec targets {self.target}"
            )
        rows = np.array([v.amplitudes for _, v in self.outcomes])
        for _, v in self.outcomes:
            if v.layout.subsystems != first.subsystems:
                raise ValueError("outcome vectors live on different layouts")
        gram = rows.conj() @ rows.T
        dev = float(np.max(np.abs(gram - np.eye(len(rows)))))
        if dev > DEFAULT_ATOL:
            raise ValueError(f"listed outcomes are not orthonormal (Gram deviation {dev:.3e})")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.outcomes)

    @property
    def target_layout(self) -> SpaceLayout:
        return self.outcomes[0][1].layout

    def is_complete(self) -> bool:
        return len(self.outcomes) == self.target_layout.total_dim


def complete_basis(spec: MeasurementSpec) -> MeasurementSpec:
    """Append orthonormal ``other_k`` outcomes spanning the orthogonal complement.

    Completion runs Gram-Schmidt against the computational basis in fixed
    index order, so the result is deterministic given the input order.
    """
    if spec.is_complete():
        return spec
    sub = spec.target_layout
    d = sub.total_dim
    basis_rows = [v.amplitudes.copy() for _, v in spec.outcomes]
    added: list[np.ndarray] = []
    for k in range(d):
        cand = np.zeros(d, dtype=np.complex128)
        cand[k] = 1.0
        for _ in range(2):  # repeated classical GS for orthogonality ~1e-15
            for row in basis_rows:
                cand = cand - row * np.vdot(row, cand)
        norm = float(np.linalg.norm(cand))
        if norm > 1e-8:
            cand = cand / norm
            basis_rows.append(cand)
            added.append(cand)
        if len(basis_rows) == d:
            break
    if len(basis_rows) != d:
        raise ValueError("basis completion failed to span the target space")
    extra = tuple(
        (f"other_{i}", StateVector(sub, vec)) for i, vec in enumerate(added)
    )
    return MeasurementSpec(spec.target, spec.outcomes + extra, spec.completion_policy)


def _completed(spec: MeasurementSpec) -> MeasurementSpec:
    if spec.is_complete():
        return spec
    if spec.completion_policy == POLICY_ERROR:
        raise ValueError("measurement spec is incomplete and its policy forbids auto-completion")
    return complete_basis(spec)


def outcome_distribution(state, spec: MeasurementSpec) -> dict[str, float]:
    """Born-rule probabilities of every (completed) outcome; sums to one."""
    spec = _completed(spec)
    _check_target(state.layout, spec)
    probs: dict[str, float] = {}
    if isinstance(state, StateVector):
        for label, vec in spec.outcomes:
            p, _, _ = project_component(state, spec.target, vec.amplitudes)
            probs[label] = p
    elif isinstance(state, DensityMatrix):
        for label, vec in spec.outcomes:
            probs[label] = max(born_probability(state, spec.target, vec.amplitudes), 0.0)
    else:
        raise TypeError("outcome_distribution expects a StateVector or DensityMatrix")
    total = sum(probs.values())
    if abs(total - 1.0) > DEFAULT_ATOL:
        raise ValueError(f"outcome probabilities sum to {total!r}, expected 1")
    return probs


def measure_collapse(
    state: StateVector, spec: MeasurementSpec, rng: np.random.Generator
) -> tuple[str, StateVector]:
    """Sample one outcome and return (label, renormalized post-measurement state)."""
    spec = _completed(spec)
    _check_target(state.layout, spec)
    results = []
    for label, vec in spec.outcomes:
        p, _, post = project_component(state, spec.target, vec.amplitudes)
        results.append((label, p, post))
    total = sum(p for _, p, _ in results)
    if abs(total - 1.0) > DEFAULT_ATOL:
        raise ValueError(f"outcome probabilities sum to {total!r}, expected 1")
    u = float(rng.random())
    acc = 0.0
    pick = len(results) - 1
    for i, (_, p, _) in enumerate(results):
        acc += p
        if u < acc:
            pick = i
            break
    label, p, post = results[pick]
    if p < IMPOSSIBLE_MASS:
        raise ImpossibleOutcomeError(
            f"sampled outcome {label!r} has probability {p!r}"
        )
    return label, StateVector(state.layout, post / np.sqrt(p))


@dataclass(frozen=True, eq=False)
class DilationSpec:
    """Recipe for realizing a measurement as a unitary onto a memory register.

    ``pointer_map`` sends each outcome label to a memory basis index; index 0
    is reserved for the ready state the memory starts in.  An outcome may
    additionally trigger a conditional unitary preparation on a downstream
    register (``preparations``), which is how a measure-and-prepare step is
    expressed as a single interaction.
    """

    measurement: MeasurementSpec
    memory: str
    pointer_map: tuple[tuple[str, int], ...]
    preparations: tuple[tuple[str, Operator], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pointer_map", tuple((str(l), int(s)) for l, s in self.pointer_map))
        object.__setattr__(self, "preparations", tuple(self.preparations))
        slots = [s for _, s in self.pointer_map]
        if len(set(slots)) != len(slots):
            raise ValueError("pointer map is not injective")
        if any(s < 1 for s in slots):
            raise ValueError("pointer slots start at 1; slot 0 is the ready state")
        if self.memory in self.measurement.target:
            raise ValueError("memory register cannot be part of the measured target")

    def slot_of(self, label: str) -> int:
        for l, s in self.pointer_map:
            if l == label:
                return s
        raise ValueError(f"outcome {label!r} has no pointer slot")

    def pointer_labels(self, memory_dim: int, ready: str = "init") -> tuple[str, ...]:
        """Basis labels of the memory register: ready slot, then mapped outcomes."""
        out = [f"unused_{i}" for i in range(memory_dim)]
        out[0] = ready
        for label, slot in self.pointer_map:
            if slot >= memory_dim:
                raise ValueError(f"pointer slot {slot} exceeds memory dimension {memory_dim}")
            out[slot] = label
        return tuple(out)


def build_dilation(dspec: DilationSpec, layout: SpaceLayout) -> Operator:
    """Controlled unitary sum_k |b_k><b_k| (x) (memory shift) (x) (preparation).

    The memory shift is the transposition taking the ready slot to the
    outcome's pointer slot; any unitary extension off the ready state leaves
    the reachable statistics unchanged, and the transposition is the
    deterministic choice.
    """
    spec = _completed(dspec.measurement)
    mem_axis = layout.axis(dspec.memory)
    mem_dim = layout.dims[mem_axis]
    if mem_dim < len(spec.outcomes) + 1:
        raise ValueError(
            f"memory {dspec.memory!r} has dimension {mem_dim}, "
            f"needs at least {len(spec.outcomes) + 1}"
        )
    preparations = dict(dspec.preparations)
    for label in preparations:
        if label not in spec.labels:
            raise ValueError(f"preparation for unknown outcome {label!r}")
    d = layout.total_dim
    acc = np.zeros((d, d), dtype=np.complex128)
    mem_layout = layout.sub((dspec.memory,))
    for label, vec in spec.outcomes:
        slot = dspec.slot_of(label)
        if slot >= mem_dim:
            raise ValueError(f"pointer slot {slot} exceeds memory dimension {mem_dim}")
        shift = np.eye(mem_dim, dtype=np.complex128)
        shift[[0, slot]] = shift[[slot, 0]]
        term = embed(projector(vec), layout).matrix
        term = term @ embed(Operator(mem_layout, shift, kind="unitary"), layout).matrix
        prep = preparations.get(label)
        if prep is not None:
            overlap = set(prep.layout.names) & (set(spec.target) | {dspec.memory})
            if overlap:
                raise ValueError(f"preparation acts on measured/memory registers {sorted(overlap)}")
            term = term @ embed(prep, layout).matrix
        acc += term
    return Operator(layout, acc, kind="unitary")


def readout_memory(
    state: StateVector,
    memory: str,
    rng: np.random.Generator,
    labels: Sequence[str] | None = None,
) -> tuple[str, StateVector]:
    """Collapse measurement of a memory register in its pointer (computational) basis."""
    spec = pointer_readout_spec(state.layout, memory, labels)
    return measure_collapse(state, spec, rng)


def pointer_readout_spec(
    layout: SpaceLayout, memory: str, labels: Sequence[str] | None = None
) -> MeasurementSpec:
    """Computational-basis readout spec for one register."""
    sub = layout.sub((memory,))
    dim = sub.total_dim
    if labels is None:
        labels = ("init",) + tuple(f"slot_{i}" for i in range(1, dim))
    labels = tuple(labels)
    if len(labels) != dim:
        raise ValueError(f"need {dim} labels for register {memory!r}, got {len(labels)}")
    outcomes = tuple((labels[i], basis_state(sub, (i,))) for i in range(dim))
    return MeasurementSpec((memory,), outcomes, POLICY_ERROR)


def product_spec(a: MeasurementSpec, b: MeasurementSpec, sep: str = "&") -> MeasurementSpec:
    """Joint measurement of two specs on disjoint targets; labels join with ``sep``."""
    a = _completed(a)
    b = _completed(b)
    if set(a.target) & set(b.target):
        raise ValueError("product spec requires disjoint targets")
    outcomes = []
    for la, va in a.outcomes:
        for lb, vb in b.outcomes:
            outcomes.append((f"{la}{sep}{lb}", tensor(va, vb)))
    return MeasurementSpec(a.target + b.target, tuple(outcomes), POLICY_ERROR)


def _check_target(layout: SpaceLayout, spec: MeasurementSpec) -> None:
    sub = layout.sub(spec.target)
    if sub.subsystems != spec.target_layout.subsystems:
        raise ValueError(
            f"measurement targets {spec.target_layout.subsystems}, "
            f"state provides {sub.subsystems}"
        )


def distributions_match(a: Mapping[str, float], b: Mapping[str, float], atol: float = DEFAULT_ATOL) -> bool:
    """True when two labeled distributions agree within atol on the union of labels."""
    keys = set(a) | set(b)
    return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= atol for k in keys)
