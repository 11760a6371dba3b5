"""Inequality constraints on treatment effects.

A constraint is a strict ordering chain over groups of effect indices,
written like ``"b1<b2<b3"`` or ``"{b1,b4}<{b2,b3,b5}"``. Every member of a
group must lie strictly below every member of the next group; members of
the same group are unordered among themselves.

Indices are 1-based in the text form (``b1`` is the first effect) and
0-based in the parsed representation.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Iterator

import numpy as np

from .errors import ConstraintError, ValidationError
from .rngtools import substream

__all__ = [
    "ConstraintSet",
    "parse_constraints",
    "render_constraints",
    "indicator",
    "indicator_matrix",
    "exact_prior_proportion",
    "mc_prior_proportion",
]


@dataclass(frozen=True)
class ConstraintSet:
    """An ordering chain over disjoint groups of effect indices.

    Attributes
    ----------
    k : int
        Number of treatment effects the constraint refers to.
    chain : tuple of frozenset of int
        Groups of 0-based effect indices, ordered from smallest to largest.
    """

    k: int
    chain: tuple[frozenset[int], ...]

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k!r}")
        seen: set[int] = set()
        for group in self.chain:
            if not group:
                raise ValidationError("constraint groups must be nonempty")
            for idx in group:
                if not isinstance(idx, int) or not (0 <= idx < self.k):
                    raise ValidationError(
                        f"effect index {idx!r} out of range for k={self.k}"
                    )
                if idx in seen:
                    raise ValidationError(f"effect index {idx} appears twice")
                seen.add(idx)

    @property
    def mentioned(self) -> frozenset[int]:
        """All effect indices that appear in the chain."""
        return frozenset().union(*self.chain) if self.chain else frozenset()

    def indicator(self, beta: np.ndarray) -> bool:
        """True when ``beta`` satisfies every strict ordering in the chain."""
        return indicator(self, beta)


def _tokenize(text: str) -> Iterator[tuple[str, int, int]]:
    """Yield (kind, position, value) tokens; kind is one of b < { } , $."""
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t":
            i += 1
            continue
        if ch in "<{},":
            yield ch, i, 0
            i += 1
            continue
        if ch == "b":
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            if j == i + 1:
                raise ConstraintError(
                    f"expected digits after 'b' at position {i}", position=i
                )
            yield "b", i, int(text[i + 1 : j])
            i = j
            continue
        raise ConstraintError(
            f"unexpected character {ch!r} at position {i}", position=i
        )
    yield "$", n, 0


def parse_constraints(text: str, k: int) -> ConstraintSet:
    """Parse a constraint chain such as ``"{b1,b4}<{b2,b3,b5}"``.

    Raises
    ------
    ConstraintError
        On malformed syntax (with the character position), an index outside
        ``1..k``, or an index used twice.
    """
    if not isinstance(k, int) or k < 1:
        raise ValidationError(f"k must be a positive integer, got {k!r}")
    tokens = list(_tokenize(text))
    pos = 0

    def peek() -> tuple[str, int, int]:
        return tokens[pos]

    def take(kind: str) -> tuple[str, int, int]:
        nonlocal pos
        tok = tokens[pos]
        if tok[0] != kind:
            raise ConstraintError(
                f"expected {kind!r} at position {tok[1]}", position=tok[1]
            )
        pos += 1
        return tok

    def take_id() -> int:
        tok = take("b")
        value = tok[2]
        if not (1 <= value <= k):
            raise ConstraintError(
                f"effect b{value} at position {tok[1]} out of range 1..{k}",
                position=tok[1],
            )
        return value - 1

    def parse_term() -> frozenset[int]:
        if peek()[0] == "{":
            take("{")
            ids = [take_id()]
            while peek()[0] == ",":
                take(",")
                ids.append(take_id())
            take("}")
            return frozenset(ids)
        return frozenset([take_id()])

    if peek()[0] == "$":
        raise ConstraintError("empty constraint text", position=0)
    groups = [parse_term()]
    while peek()[0] == "<":
        take("<")
        groups.append(parse_term())
    tok = peek()
    if tok[0] != "$":
        raise ConstraintError(
            f"unexpected token at position {tok[1]}", position=tok[1]
        )

    seen: set[int] = set()
    for group in groups:
        dup = seen & group
        if dup:
            idx = min(dup) + 1
            raise ConstraintError(f"effect b{idx} appears twice in the chain")
        seen |= group
    return ConstraintSet(k=k, chain=tuple(groups))


def render_constraints(cs: ConstraintSet) -> str:
    """Canonical text form; ``parse_constraints(render_constraints(cs), cs.k)``
    recovers ``cs``."""
    parts = []
    for group in cs.chain:
        ids = [f"b{i + 1}" for i in sorted(group)]
        parts.append(ids[0] if len(ids) == 1 else "{" + ",".join(ids) + "}")
    return "<".join(parts)


def indicator(cs: ConstraintSet, beta: np.ndarray) -> bool:
    """True when every member of each group lies strictly below every
    member of the next group. Ties violate the constraint."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (cs.k,):
        raise ValidationError(
            f"beta must have shape ({cs.k},), got {beta.shape}"
        )
    for left, right in zip(cs.chain[:-1], cs.chain[1:]):
        if beta[sorted(left)].max() >= beta[sorted(right)].min():
            return False
    return True


def indicator_matrix(cs: ConstraintSet, beta: np.ndarray) -> np.ndarray:
    """Vectorized indicator over rows of an (m, k) array of effect draws."""
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 2 or beta.shape[1] != cs.k:
        raise ValidationError(
            f"beta must have shape (m, {cs.k}), got {beta.shape}"
        )
    ok = np.ones(beta.shape[0], dtype=bool)
    for left, right in zip(cs.chain[:-1], cs.chain[1:]):
        left_max = beta[:, sorted(left)].max(axis=1)
        right_min = beta[:, sorted(right)].min(axis=1)
        ok &= left_max < right_min
    return ok


def exact_prior_proportion(cs: ConstraintSet) -> Fraction:
    """Prior probability of the constraint under any prior that is
    exchangeable and ties-free across effects, as an exact rational.

    Only the ``m`` mentioned effects matter: each of their ``m!`` orderings
    is equally likely, and the chain admits those orderings that keep each
    group contiguous, in any internal order.
    """
    m = len(cs.mentioned)
    num = 1
    for group in cs.chain:
        num *= factorial(len(group))
    return Fraction(num, factorial(m)) if m else Fraction(1)


def mc_prior_proportion(
    cs: ConstraintSet, prior, n: int, seed: int
) -> tuple[float, float]:
    """Monte Carlo estimate of the prior proportion and its standard error.

    Draws ``n`` effect vectors from the encompassing prior (iid normal with
    ``prior.beta_mean`` and ``prior.beta_var``; the residual variance does
    not enter the indicator) on the stream ``(seed, "prior-proportion")``.
    """
    if not isinstance(n, int) or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    if not cs.chain or len(cs.chain) == 1:
        return 1.0, 0.0
    rng = substream(seed, "prior-proportion")
    sd = float(np.sqrt(prior.beta_var))
    mean = float(prior.beta_mean)
    hits = 0
    done = 0
    chunk = 1_000_000
    while done < n:
        m = min(chunk, n - done)
        beta = rng.normal(mean, sd, size=(m, cs.k))
        hits += int(indicator_matrix(cs, beta).sum())
        done += m
    p = hits / n
    se = float(np.sqrt(p * (1.0 - p) / n))
    return p, se
