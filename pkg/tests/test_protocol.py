import json
import math

import numpy as np
import pytest

from holevo_qkd.attacks import ancilla_swap, exact_eve_stats, intercept_resend, local_measure_qubit2
from holevo_qkd.basisclass import BASIS_202, BASIS_400, BELL_BASIS
from holevo_qkd.protocol import (
    ClassicalChannel,
    ConfigError,
    ProtocolConfig,
    SequentialAccessViolation,
    TimingParams,
    config_from_dict,
    config_to_dict,
    detection_curve,
    load_config,
    run_protocol,
    select_tests,
    simulate_steps,
    timing_schedule,
    transcript_lines,
)
from holevo_qkd.rng import derive_rng


class TestTiming:
    def test_default(self):
        s = timing_schedule(TimingParams(100, 60))
        assert s.arrival == 160
        assert s.eve_holds_qubit1 == (0, 100)
        assert s.eve_holds_qubit2 == (60, 160)

    def test_reports_overlap_and_sorted_events(self):
        s = timing_schedule(TimingParams(100, 60))
        assert s.eve_holds_qubit2[0] < s.eve_holds_qubit1[1]
        assert [t for t, _ in s.events] == sorted(t for t, _ in s.events)

    @pytest.mark.parametrize("l", [50, 40, 1])
    def test_short_ring_rejected(self, l):
        with pytest.raises(SequentialAccessViolation):
            timing_schedule(TimingParams(100, l))

    def test_ring_equal_to_path(self):
        assert timing_schedule(TimingParams(100, 100)).arrival == 200

    def test_speed_scales_times(self):
        assert timing_schedule(TimingParams(100, 60, speed=2)).arrival == pytest.approx(80)

    def test_nonpositive_rejected(self):
        with pytest.raises(ConfigError):
            TimingParams(0, 60)


class TestNoAttack:
    @pytest.mark.parametrize("seed", [0, 1, 42, 2**63 + 5])
    def test_invariants(self, seed):
        r = run_protocol(ProtocolConfig(steps=400, seed=seed)).summary
        assert r.mismatches == 0
        assert not r.detected
        assert r.alice_key == r.bob_key
        assert r.efficiency == 1.0
        assert r.bob_path == "optics"
        assert r.rejected == 0
        assert r.tested == 200
        assert len(r.alice_key) == 2 * (400 - 200)

    def test_projective_path(self):
        r = run_protocol(ProtocolConfig(steps=200, bob="projective")).summary
        assert r.mismatches == 0 and r.bob_path == "projective"

    def test_auto_falls_back_for_bell_basis(self):
        r = run_protocol(ProtocolConfig(steps=200, basis=BELL_BASIS)).summary
        assert r.bob_path == "projective"
        assert r.mismatches == 0


class TestReproducibility:
    def test_same_seed_same_run(self):
        cfg = ProtocolConfig(steps=300, attack=ancilla_swap(), seed=3)
        a, b = run_protocol(cfg), run_protocol(cfg)
        assert a.summary == b.summary
        assert transcript_lines(a.records) == transcript_lines(b.records)

    def test_different_seed_differs(self):
        a = run_protocol(ProtocolConfig(steps=300, seed=1)).summary
        b = run_protocol(ProtocolConfig(steps=300, seed=2)).summary
        assert a.alice_key != b.alice_key

    def test_any_subset_in_any_order(self):
        cfg = ProtocolConfig(steps=500, attack=intercept_resend(30.0, 60.0), seed=11)
        full = simulate_steps(cfg)
        idx = derive_rng(5).permutation(500)[:137]
        part = simulate_steps(cfg, idx)
        for key in full:
            assert np.array_equal(part[key], full[key][idx])

    def test_test_selection_size(self):
        cfg = ProtocolConfig(steps=101, test_fraction=0.3)
        assert len(select_tests(cfg)) == math.ceil(0.3 * 101)
        assert len(set(select_tests(cfg).tolist())) == len(select_tests(cfg))


class TestAttackedRuns:
    def test_ancilla_swap_mismatch_rate(self):
        n = 100_000
        r = run_protocol(ProtocolConfig(steps=n, attack=ancilla_swap(), test_fraction=1.0, seed=17)).summary
        p = exact_eve_stats(BASIS_202, ancilla_swap()).detect_prob
        assert r.detected
        assert abs(r.mismatch_rate - p) <= 3 * math.sqrt(p * (1 - p) / n)

    def test_400_local_measurement_is_silent(self):
        r = run_protocol(ProtocolConfig(steps=10_000, basis=BASIS_400, attack=local_measure_qubit2())).summary
        assert r.mismatches == 0
        assert r.eve_guess_rate > 0.45

    def test_bell_ancilla_swap_is_silent_and_total(self):
        r = run_protocol(ProtocolConfig(steps=5_000, basis=BELL_BASIS, attack=ancilla_swap())).summary
        assert r.mismatches == 0
        assert r.eve_guess_rate == 1.0


class TestDetectionCurve:
    def test_quarter(self):
        assert detection_curve(0.25, 64) == [1 - 0.75**n for n in range(1, 65)]

    def test_three_quarter_pairs(self):
        curve = detection_curve(0.75, 64)
        assert [curve[n - 1] for n in range(1, 65)] == [1 - 0.5 ** (2 * n) for n in range(1, 65)]

    def test_monotone_and_bounded(self):
        for p in (0.0, 0.1, 0.25, 0.625, 1.0):
            c = detection_curve(p, 50)
            assert all(a <= b for a, b in zip(c, c[1:]))
            assert all(0 <= v <= 1 for v in c)

    def test_invalid(self):
        with pytest.raises(ValueError):
            detection_curve(1.5, 3)
        assert detection_curve(0.5, 0) == []


class TestConfig:
    def test_round_trip(self):
        d = {
            "steps": 50,
            "basis": "400",
            "attack": "intercept-resend,theta1=off,theta2=0",
            "test_fraction": 0.25,
            "seed": 9,
            "timing": {"L": 10.0, "l": 7.0, "speed": 1.0},
            "bob": "projective",
        }
        assert config_to_dict(config_from_dict(d)) == d

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            config_from_dict({"stepz": 3})

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            config_from_dict({"test_fraction": 1.5})
        with pytest.raises(ConfigError):
            config_from_dict({"bob": "telepathy"})

    def test_load_with_relative_basis_file(self, tmp_path):
        (tmp_path / "b.txt").write_text("1 0 0 0 0 0 0 0\n0 0 1 0 1 0 0 0\n0 0 1 0 -1 0 0 0\n0 0 0 0 0 0 1 0\n")
        (tmp_path / "run.json").write_text(json.dumps({"steps": 20, "basis": "b.txt"}))
        cfg = load_config(tmp_path / "run.json")
        assert cfg.steps == 20
        assert run_protocol(cfg).summary.mismatches == 0

    def test_inline_rows(self):
        rows = [[1, 0, 0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 1, 0, 0, 0], [0, 0, 0, 0, 0, 0, 1, 0], [0, 0, 1, 0, 0, 0, 0, 0]]
        cfg = config_from_dict({"basis": rows})
        assert cfg.basis.states[1].fidelity(BASIS_400.states[1]) == pytest.approx(1.0)


class TestTranscript:
    def test_channel_is_append_only(self):
        ch = ClassicalChannel()
        ch.announce("a", 1)
        snapshot = ch.entries
        ch.announce("b", 2)
        assert snapshot == (("a", 1),)
        assert ch.entries[:1] == snapshot
        with pytest.raises((TypeError, AttributeError)):
            ch.entries[0] = ("x",)

    def test_run_channel_contents(self):
        res = run_protocol(ProtocolConfig(steps=20))
        kinds = [e[0] for e in res.channel]
        assert kinds[0] == "timing" and kinds[1] == "test-steps"
        assert kinds.count("compare") == 10
        assert res.channel[0][1] == res.schedule.arrival

    def test_csv_lines(self):
        res = run_protocol(ProtocolConfig(steps=12))
        lines = transcript_lines(res.records)
        assert lines[0] == "step,letter_bits,pattern,inferred_bits,tested,mismatch"
        assert len(lines) == 13
        assert all(len(line.split(",")) == 6 for line in lines)
