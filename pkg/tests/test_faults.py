import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from isocg import (
    BIT_DOMAINS,
    FaultInjector,
    FaultPolicy,
    bits_to_float,
    events_to_jsonl,
    flip_bits,
    float_to_bits,
)


class TestFlipBits:
    def test_sign_bit(self):
        assert flip_bits(1.0, [63]) == -1.0

    def test_exponent_lsb(self):
        # 0x3FF0... ^ (1 << 52) = 0x3FE0... which is 0.5
        assert flip_bits(1.0, [52]) == 0.5

    def test_mantissa_lsb(self):
        assert flip_bits(1.0, [0]) == 1.0000000000000002

    def test_exhaustive_single_bit_sweep_of_one(self):
        base = oracles.pack_double(1.0)
        for k in range(64):
            expected_bits = base ^ (1 << k)
            got = flip_bits(1.0, [k])
            assert float_to_bits(got) == expected_bits

    def test_multi_bit(self):
        got = flip_bits(1.0, [0, 52, 63])
        expected = oracles.pack_double(1.0) ^ 1 ^ (1 << 52) ^ (1 << 63)
        assert float_to_bits(got) == expected

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            flip_bits(1.0, [3, 3])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            flip_bits(1.0, [64])

    @settings(max_examples=200, deadline=None)
    @given(
        value=st.floats(allow_nan=False, allow_infinity=False),
        positions=st.lists(st.integers(0, 63), min_size=1, max_size=6, unique=True),
    )
    def test_involution(self, value, positions):
        once = flip_bits(value, positions)
        twice = flip_bits(once, positions)
        assert float_to_bits(twice) == float_to_bits(value)

    def test_bits_roundtrip(self):
        for v in [0.0, -0.0, 1.5, -3.25, 1e-308, 1.7976931348623157e308]:
            assert bits_to_float(float_to_bits(v)) == v


class TestFaultPolicy:
    @pytest.mark.parametrize("rate", [-0.1, 1.1])
    def test_rate_range(self, rate):
        with pytest.raises(ValueError):
            FaultPolicy(rate=rate)

    def test_flips_positive(self):
        with pytest.raises(ValueError):
            FaultPolicy(rate=0.5, flips_per_event=0)

    def test_unknown_domain(self):
        with pytest.raises(ValueError):
            FaultPolicy(rate=0.5, bit_domain="nibble")

    def test_flips_exceed_domain(self):
        with pytest.raises(ValueError):
            FaultPolicy(rate=0.5, bit_domain="sign", flips_per_event=2)


class TestInjector:
    def test_rate_zero_is_identity(self, rng):
        inj = FaultInjector(FaultPolicy(rate=0.0, seed=1))
        for _ in range(50):
            v = rng.standard_normal(16)
            out, events = inj.inject(v)
            assert events == []
            assert np.array_equal(out, v)
        assert inj.events == []
        assert inj.call_index == 50

    def test_rate_one_sign_negates_one_element(self, rng):
        inj = FaultInjector(FaultPolicy(rate=1.0, bit_domain="sign", seed=2))
        for _ in range(20):
            v = rng.standard_normal(8) + 1.0
            out, events = inj.inject(v)
            assert len(events) == 1
            changed = np.nonzero(out != v)[0]
            assert changed.size == 1
            idx = changed[0]
            assert out[idx] == -v[idx]
            assert events[0].element_index == idx
            assert events[0].bit_positions == [63]

    def test_event_count_binomial(self):
        inj = FaultInjector(FaultPolicy(rate=0.25, seed=123))
        v = np.ones(4)
        fired = 0
        for _ in range(10_000):
            _, events = inj.inject(v)
            fired += len(events)
        sigma = math.sqrt(10_000 * 0.25 * 0.75)
        assert abs(fired - 2500) <= 3 * sigma

    @pytest.mark.parametrize("domain", sorted(BIT_DOMAINS))
    def test_events_stay_in_domain(self, domain, rng):
        flips = min(3, len(BIT_DOMAINS[domain]))
        inj = FaultInjector(FaultPolicy(rate=1.0, bit_domain=domain, flips_per_event=flips, seed=5))
        v = rng.standard_normal(16)
        for _ in range(200):
            _, events = inj.inject(v)
            for e in events:
                assert set(e.bit_positions) <= set(BIT_DOMAINS[domain])
                assert len(e.bit_positions) == flips

    def test_never_emits_nonfinite(self):
        # near the overflow edge, exponent flips frequently produce Inf
        inj = FaultInjector(FaultPolicy(rate=1.0, bit_domain="exponent", seed=7))
        v = np.full(8, 1.7976931348623157e308)
        for _ in range(300):
            out, _ = inj.inject(v)
            assert np.all(np.isfinite(out))

    def test_fallback_domain_when_redraws_cannot_help(self):
        # from 0.0, flipping all 11 exponent bits always lands on Inf, so the
        # injector must fall back to sign/mantissa flips
        inj = FaultInjector(FaultPolicy(rate=1.0, bit_domain="exponent", flips_per_event=11, seed=9))
        out, events = inj.inject(np.zeros(4))
        assert np.all(np.isfinite(out))
        assert set(events[0].bit_positions) <= set(BIT_DOMAINS["sign_mantissa"])

    def test_allow_nonfinite_passthrough(self):
        inj = FaultInjector(
            FaultPolicy(rate=1.0, bit_domain="exponent", flips_per_event=11, seed=9,
                        allow_nonfinite=True)
        )
        out, events = inj.inject(np.zeros(4))
        assert not np.all(np.isfinite(out))
        assert len(events) == 1

    def test_deterministic_replay(self, rng):
        v = rng.standard_normal(32)
        runs = []
        for _ in range(2):
            inj = FaultInjector(FaultPolicy(rate=0.5, bit_domain="any", flips_per_event=2, seed=42))
            outs = [inj.inject(v) for _ in range(25)]
            runs.append(outs)
        for (out_a, ev_a), (out_b, ev_b) in zip(*runs):
            assert np.array_equal(out_a, out_b)
            assert ev_a == ev_b

    def test_event_records_patterns(self):
        inj = FaultInjector(FaultPolicy(rate=1.0, bit_domain="sign", seed=3))
        v = np.array([2.5, -4.0, 8.0])
        out, (event,) = inj.inject(v)
        assert event.before == float_to_bits(v[event.element_index])
        assert event.after == float_to_bits(out[event.element_index])
        assert event.call_index == 1
        assert event.iteration is None
        assert event.before_value == v[event.element_index]

    def test_algorithm_identifier(self):
        assert FaultInjector(FaultPolicy(rate=0.0)).algorithm == "pcg64"


class TestSerialization:
    def test_jsonl(self):
        inj = FaultInjector(FaultPolicy(rate=1.0, bit_domain="sign_mantissa", seed=11))
        events = []
        for _ in range(5):
            _, evs = inj.inject(np.ones(6))
            events.extend(evs)
        lines = events_to_jsonl(events).strip().split("\n")
        assert len(lines) == 5
        for line, event in zip(lines, events):
            doc = json.loads(line)
            assert doc["call_index"] == event.call_index
            assert doc["element_index"] == event.element_index
            assert doc["bit_positions"] == event.bit_positions
            assert int(doc["before"], 16) == event.before
            assert int(doc["after"], 16) == event.after
