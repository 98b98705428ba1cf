"""Deterministic bit-flip injection for silent-data-corruption studies.

Faults are modelled per matrix-vector call: with probability ``rate`` one
output element gets ``flips_per_event`` random bits XOR-flipped inside a
chosen region of the IEEE-754 double layout.  By default results that
would become NaN or +/-Inf are redrawn, keeping the corruption silent.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .linalg import as_vector

__all__ = [
    "BIT_DOMAINS",
    "FaultPolicy",
    "FaultEvent",
    "FaultInjector",
    "float_to_bits",
    "bits_to_float",
    "flip_bits",
    "events_to_jsonl",
]

# IEEE-754 binary64 layout: bit 63 sign, bits 62..52 exponent, bits 51..0 mantissa.
SIGN_BIT = 63
EXPONENT_BITS = tuple(range(52, 63))
MANTISSA_BITS = tuple(range(52))

BIT_DOMAINS: dict[str, tuple[int, ...]] = {
    "sign": (SIGN_BIT,),
    "mantissa": MANTISSA_BITS,
    "sign_mantissa": MANTISSA_BITS + (SIGN_BIT,),
    "exponent": EXPONENT_BITS,
    "any": tuple(range(64)),
}

# Redraw budget before falling back to the sign/mantissa domain, which can
# never turn a finite value non-finite.
_MAX_REDRAWS = 32


def float_to_bits(value: float) -> int:
    (bits,) = struct.unpack("<Q", struct.pack("<d", value))
    return bits


def bits_to_float(bits: int) -> float:
    (value,) = struct.unpack("<d", struct.pack("<Q", bits))
    return value


def flip_bits(value: float, positions) -> float:
    """XOR the 64-bit pattern of ``value`` at the given bit positions."""
    pos = list(positions)
    if len(set(pos)) != len(pos):
        raise ValueError(f"bit positions must be distinct, got {pos}")
    bits = float_to_bits(value)
    for p in pos:
        if not 0 <= p <= 63:
            raise ValueError(f"bit position out of range 0..63: {p}")
        bits ^= 1 << p
    return bits_to_float(bits)


@dataclass
class FaultPolicy:
    """Parameters of the per-call corruption model.

    rate: probability that a given injectable call suffers a fault event.
    flips_per_event: distinct bits flipped in the affected element.
    bit_domain: one of ``BIT_DOMAINS`` keys.
    seed: RNG seed; the stream fully determines all injection decisions.
    allow_nonfinite: permit NaN/Inf results instead of redrawing.
    """

    rate: float
    flips_per_event: int = 1
    bit_domain: str = "sign_mantissa"
    seed: int = 0
    allow_nonfinite: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate must lie in [0, 1], got {self.rate}")
        if self.flips_per_event < 1:
            raise ValueError(f"flips_per_event must be >= 1, got {self.flips_per_event}")
        if self.bit_domain not in BIT_DOMAINS:
            raise ValueError(
                f"unknown bit domain {self.bit_domain!r}; "
                f"choose from {sorted(BIT_DOMAINS)}"
            )
        if self.flips_per_event > len(BIT_DOMAINS[self.bit_domain]):
            raise ValueError(
                f"flips_per_event={self.flips_per_event} exceeds the "
                f"{len(BIT_DOMAINS[self.bit_domain])} bits of domain {self.bit_domain!r}"
            )


@dataclass
class FaultEvent:
    """Record of one injected corruption, replayable from its bit patterns."""

    call_index: int
    element_index: int
    bit_positions: list[int]
    before: int
    after: int
    iteration: int | None = None

    @property
    def before_value(self) -> float:
        return bits_to_float(self.before)

    @property
    def after_value(self) -> float:
        return bits_to_float(self.after)

    def to_dict(self) -> dict:
        return {
            "call_index": self.call_index,
            "element_index": self.element_index,
            "bit_positions": list(self.bit_positions),
            "before": f"0x{self.before:016x}",
            "after": f"0x{self.after:016x}",
            "before_value": self.before_value,
            "after_value": self.after_value,
            "iteration": self.iteration,
        }


def events_to_jsonl(events) -> str:
    """Serialize fault events as JSON lines for post-mortem analysis."""
    return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in events)


class FaultInjector:
    """Stateful, seedable injector; one instance per solve.

    The RNG is numpy's PCG64 (exposed as :attr:`algorithm` so reports can
    record how to replay a run).  The Bernoulli draw advances the stream on
    every call whether or not a fault fires.
    """

    algorithm = "pcg64"

    def __init__(self, policy: FaultPolicy):
        self.policy = policy
        self.rng = np.random.default_rng(policy.seed)
        self.call_index = 0
        self.events: list[FaultEvent] = []

    def _draw_positions(self, domain: tuple[int, ...], count: int) -> list[int]:
        picks = self.rng.choice(len(domain), size=count, replace=False)
        return [domain[int(i)] for i in picks]

    def inject(self, v) -> tuple[np.ndarray, list[FaultEvent]]:
        """Return a possibly-corrupted copy of ``v`` and the events applied."""
        vec = as_vector(v)
        self.call_index += 1
        if self.rng.random() >= self.policy.rate:
            return vec, []

        out = vec.copy()
        idx = int(self.rng.integers(0, out.size))
        domain = BIT_DOMAINS[self.policy.bit_domain]
        positions = self._draw_positions(domain, self.policy.flips_per_event)
        new = flip_bits(out[idx], positions)
        if not self.policy.allow_nonfinite and not np.isfinite(new):
            for _ in range(_MAX_REDRAWS):
                positions = self._draw_positions(domain, self.policy.flips_per_event)
                new = flip_bits(out[idx], positions)
                if np.isfinite(new):
                    break
            else:
                fallback = BIT_DOMAINS["sign_mantissa"]
                positions = self._draw_positions(
                    fallback, min(self.policy.flips_per_event, len(fallback))
                )
                new = flip_bits(out[idx], positions)

        event = FaultEvent(
            call_index=self.call_index,
            element_index=idx,
            bit_positions=sorted(positions),
            before=float_to_bits(out[idx]),
            after=float_to_bits(new),
        )
        out[idx] = new
        self.events.append(event)
        return out, [event]
