import itertools

import numpy as np
import pytest

from holevo_qkd.basisclass import (
    ANCILLA_SWAP,
    BASIS_040,
    BASIS_202,
    BASIS_400,
    BELL_BASIS,
    CANDIDATE,
    LOCAL_MEASUREMENT,
    BasisError,
    LetterBasis,
    PnmSignature,
    classify_pnm,
    format_basis,
    load_basis,
    mor_condition,
    mor_pair,
    parse_basis,
    screen_basis,
)
from holevo_qkd.qstate import PureState, random_unitary
from holevo_qkd.rng import derive_rng


def locally_rotated(b: LetterBasis, seed: int) -> LetterBasis:
    rng = derive_rng(seed)
    u = np.kron(random_unitary(2, rng).matrix, random_unitary(2, rng).matrix)
    return LetterBasis(tuple(PureState(u @ s.amplitudes) for s in b.states), b.labels)


class TestLetterBasis:
    def test_rejects_non_orthogonal(self):
        s = BASIS_202.states
        with pytest.raises(BasisError):
            LetterBasis((s[0], s[0], s[2], s[3]))

    def test_rejects_bad_labels(self):
        with pytest.raises(BasisError):
            LetterBasis(BASIS_202.states, ("00", "00", "10", "11"))

    def test_rejects_wrong_count(self):
        with pytest.raises(BasisError):
            LetterBasis(BASIS_202.states[:3])


class TestClassify:
    def test_202(self):
        assert classify_pnm(BASIS_202).as_tuple() == (2, 0, 2)

    def test_400(self):
        assert classify_pnm(BASIS_400).as_tuple() == (4, 0, 0)

    def test_bell(self):
        assert classify_pnm(BELL_BASIS).as_tuple() == (0, 0, 4)

    def test_040(self):
        assert classify_pnm(BASIS_040).as_tuple() == (0, 4, 0)

    def test_signature_invariant(self):
        with pytest.raises(ValueError):
            PnmSignature(2, 2, 1)

    @pytest.mark.parametrize("basis", [BASIS_202, BASIS_400, BELL_BASIS, BASIS_040])
    def test_permutation_invariance(self, basis):
        ref = classify_pnm(basis)
        for order in itertools.permutations(range(4)):
            assert classify_pnm(basis.permuted(order)) == ref

    @pytest.mark.parametrize("basis", [BASIS_202, BASIS_400, BELL_BASIS, BASIS_040])
    def test_local_unitary_invariance(self, basis):
        for seed in range(25):
            assert classify_pnm(locally_rotated(basis, seed)) == classify_pnm(basis)

    def test_borderline_flag(self):
        eps = 1e-5
        c, s = np.cos(eps), np.sin(eps)
        b = LetterBasis(
            (
                PureState([c, 0, 0, s]),
                PureState([s, 0, 0, -c]),
                PureState([0, 1, 0, 0]),
                PureState([0, 0, 1, 0]),
            )
        )
        sig = classify_pnm(b)
        assert sig.as_tuple() == (2, 2, 0)
        assert sig.borderline == (0, 1)


class TestMor:
    def test_202_pair_0_1(self):
        pair = mor_condition(BASIS_202).pair(0, 1)
        assert pair.first_nonorthogonal and pair.first_nonidentical and pair.second_nonorthogonal
        assert pair.satisfied

    def test_202_pair_0_3_fails(self):
        pair = mor_condition(BASIS_202).pair(0, 3)
        assert not pair.first_nonorthogonal
        assert not pair.satisfied

    def test_202_satisfied_pairs(self):
        assert len(mor_condition(BASIS_202).satisfied_pairs) >= 2
        assert mor_condition(BASIS_202).satisfied_pairs == [(0, 1), (0, 2), (1, 3), (2, 3)]

    def test_202_identical_reductions(self):
        assert not mor_condition(BASIS_202).pair(1, 2).first_nonidentical

    @pytest.mark.parametrize("basis", [BASIS_202, BASIS_400, BELL_BASIS, BASIS_040])
    def test_pair_symmetry(self, basis):
        for i, j in itertools.combinations(range(4), 2):
            a = mor_pair(basis.states[i], basis.states[j])
            b = mor_pair(basis.states[j], basis.states[i])
            assert a.satisfied == b.satisfied
            assert (a.first_nonorthogonal, a.first_nonidentical, a.second_nonorthogonal) == (
                b.first_nonorthogonal,
                b.first_nonidentical,
                b.second_nonorthogonal,
            )


class TestScreen:
    def test_400(self):
        assert screen_basis(BASIS_400).verdict == LOCAL_MEASUREMENT

    def test_bell(self):
        assert screen_basis(BELL_BASIS).verdict == ANCILLA_SWAP

    def test_202(self):
        report = screen_basis(BASIS_202)
        assert report.verdict == CANDIDATE
        assert not report.vulnerable
        assert report.attack_stats["ancilla-swap"].detect_prob > 0

    @pytest.mark.parametrize("seed", range(10))
    def test_verdict_tracks_signature(self, seed):
        for basis in (BASIS_202, BASIS_400, BELL_BASIS, BASIS_040):
            rotated = locally_rotated(basis, seed)
            sig = classify_pnm(rotated).as_tuple()
            verdict = screen_basis(rotated, with_attacks=False).verdict
            assert (verdict == LOCAL_MEASUREMENT) == (sig == (4, 0, 0))
            assert (verdict == ANCILLA_SWAP) == (sig == (0, 0, 4))


class TestParse:
    def test_round_trip(self):
        for basis in (BASIS_202, BASIS_400, BELL_BASIS, BASIS_040):
            back = parse_basis(format_basis(basis))
            for a, b in zip(basis.states, back.states):
                assert a.fidelity(b) == pytest.approx(1.0, abs=1e-12)
            assert back.labels == basis.labels

    def test_unnormalized_rows_are_normalized(self):
        text = """
        # HH, (HV+VH), (HV-VH), VV
        1 0 0 0 0 0 0 0
        0 0 1 0 1 0 0 0
        0 0 1 0 -1 0 0 0
        0,0, 0,0, 0,0, 1,0
        """
        b = parse_basis(text)
        assert classify_pnm(b).as_tuple() == (2, 0, 2)

    def test_bad_row_length(self):
        with pytest.raises(BasisError, match="expected 8"):
            parse_basis("1 0 0 0\n" * 4)

    def test_wrong_row_count(self):
        with pytest.raises(BasisError, match="4 basis rows"):
            parse_basis("1 0 0 0 0 0 0 0\n")

    def test_load_preset_and_file(self, tmp_path):
        assert load_basis("202") is BASIS_202
        path = tmp_path / "mine.txt"
        path.write_text(format_basis(BASIS_400))
        assert classify_pnm(load_basis(str(path))).as_tuple() == (4, 0, 0)
        with pytest.raises(BasisError):
            load_basis(str(tmp_path / "missing.txt"))
