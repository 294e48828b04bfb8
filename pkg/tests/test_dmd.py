import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dmdmodal import synth
from dmdmodal.dmd import (
    DmdOptions,
    continuous_eigs,
    discrete_to_continuous,
    dmd_decompose,
    reconstruct,
    result_from_dict,
    result_to_dict,
)
from dmdmodal.errors import InvalidInputError, NoSignalError, SingularEigenvalueError
from dmdmodal.modal import CLUSTER_TOLERANCE, oscillatory
from dmdmodal.numkit import FULL_RANK, TruncationPolicy
from dmdmodal.snapshots import SnapshotMatrix, SnapshotPair, build_pair

FULL = DmdOptions(FULL_RANK)


def decompose(snap, options=FULL):
    return dmd_decompose(build_pair(snap, options.augment), options)


class TestSdofBenchmark:
    def test_eigenvalues(self, sdof_snap):
        r = decompose(sdof_snap)
        assert r.retained_rank == 2
        upper = r.discrete_eigs[r.discrete_eigs.imag > 0][0]
        assert round(upper.real, 4) == 0.9503
        assert round(upper.imag, 4) == 0.3014
        assert round(abs(upper), 4) == 0.9969

    def test_modal_parameters(self, sdof_snap):
        r = decompose(sdof_snap)
        p = synth.SDOF_PAPER
        np.testing.assert_allclose(r.frequencies_hz, p.natural_frequency / (2 * math.pi), rtol=1e-8)
        np.testing.assert_allclose(r.damping_ratios, p.damping_ratio, rtol=1e-8)

    def test_reconstruct_sample_512(self, sdof_snap):
        r = decompose(sdof_snap)
        x, residue = reconstruct(r, 512, return_residue=True)
        exact = synth.sdof_response(synth.SDOF_PAPER, [512 * sdof_snap.dt])[0]
        assert x[0] == pytest.approx(exact, rel=1e-6)
        assert residue <= 1e-6 * abs(exact)

    def test_reconstruct_first_column(self, sdof_snap):
        r = decompose(sdof_snap)
        assert reconstruct(r, 0)[0] == pytest.approx(sdof_snap.data[0, 0], rel=1e-10)


class TestSyntheticOperators:
    def test_constant_series(self):
        v = np.array([1.5, -2.0])
        snap = SnapshotMatrix(np.tile(v[:, None], (1, 20)), 0.1)
        r = decompose(snap)
        assert r.retained_rank == 1
        assert r.discrete_eigs[0] == pytest.approx(1.0, abs=1e-12)
        assert r.frequencies_hz[0] == pytest.approx(0.0, abs=1e-9)
        mode = r.modes[:, 0]
        assert abs(np.vdot(mode, v)) == pytest.approx(np.linalg.norm(v), rel=1e-12)

    def test_iterated_matrix(self, rng):
        a = rng.standard_normal((3, 3))
        a /= 1.1 * np.max(np.abs(np.linalg.eigvals(a)))
        x = np.empty((3, 30))
        x[:, 0] = rng.standard_normal(3)
        for k in range(29):
            x[:, k + 1] = a @ x[:, k]
        r = decompose(SnapshotMatrix(x, 1.0), DmdOptions(FULL_RANK, augment=False))
        oracle = np.linalg.eigvals(a)
        assert r.retained_rank == 3
        for mu in oracle:
            assert np.min(np.abs(r.discrete_eigs - mu)) < 1e-8

    def test_zero_signal(self):
        with pytest.raises(NoSignalError):
            decompose(SnapshotMatrix(np.zeros((2, 10)), 1.0))

    def test_needs_two_columns(self):
        pair = SnapshotPair(np.ones((1, 1)), np.ones((1, 1)), 1.0)
        with pytest.raises(InvalidInputError):
            dmd_decompose(pair)

    def test_bad_sort(self):
        with pytest.raises(InvalidInputError):
            DmdOptions(sort="size")


class TestContinuousConversion:
    def test_rounded_benchmark_value(self):
        # mu rounded to 4 decimals moves s by at most fs * 7.1e-5 ~ 0.073 rad/s
        pole = discrete_to_continuous(0.9503 + 0.3014j, 1 / 1023)
        assert pole.frequency_hz == pytest.approx(50.0, abs=0.0116)
        assert pole.damping_ratio == pytest.approx(0.01, abs=2.4e-4)

    def test_unit_eigenvalue(self):
        pole = discrete_to_continuous(1.0, 0.5)
        assert pole.s == 0 and pole.frequency_hz == 0
        assert math.isnan(pole.damping_ratio)

    def test_pure_decay(self):
        pole = discrete_to_continuous(math.exp(-1), 1.0)
        assert pole.s == pytest.approx(-1.0)
        assert pole.frequency_hz == pytest.approx(1 / (2 * math.pi))
        assert pole.damping_ratio == pytest.approx(1.0)

    def test_zero(self):
        with pytest.raises(SingularEigenvalueError):
            discrete_to_continuous(0.0, 1.0)
        with pytest.raises(SingularEigenvalueError):
            continuous_eigs([1.0, 0.0], 1.0)

    def test_bad_dt(self):
        with pytest.raises(InvalidInputError):
            discrete_to_continuous(0.5, 0.0)

    def test_negative_real_axis_flagged(self):
        assert discrete_to_continuous(-0.9, 1.0).nyquist_ambiguous
        assert not discrete_to_continuous(0.9j, 1.0).nyquist_ambiguous

    @given(st.floats(0.01, 2.0), st.floats(-3.1, 3.1), st.floats(1e-4, 10.0))
    def test_principal_branch(self, modulus, angle, dt):
        mu = modulus * complex(math.cos(angle), math.sin(angle))
        pole = discrete_to_continuous(mu, dt)
        assert -math.pi < pole.s.imag * dt <= math.pi
        assert pole.frequency_hz == pytest.approx(abs(pole.s) / (2 * math.pi))
        if abs(pole.s) > 0:
            assert pole.damping_ratio == pytest.approx(-pole.s.real / abs(pole.s))
            assert -1 <= pole.damping_ratio <= 1


class TestChain6:
    def test_invariants(self, chain6_free_decay):
        r = decompose(chain6_free_decay)
        assert r.discrete_eigs.size == r.retained_rank == 12
        np.testing.assert_allclose(np.log(r.discrete_eigs) / r.dt, r.continuous_eigs, rtol=1e-14)
        np.testing.assert_allclose(np.linalg.norm(r.modes, axis=0), 1.0, atol=1e-12)
        assert np.all(np.abs(r.discrete_eigs) <= 1 + 1e-6)
        for i, mu in enumerate(r.discrete_eigs):
            j = np.argmin(np.abs(r.discrete_eigs - mu.conjugate()))
            assert abs(r.discrete_eigs[j] - mu.conjugate()) <= 1e-10
            np.testing.assert_allclose(r.modes[:, j], r.modes[:, i].conj(), atol=1e-10)

    def test_matches_direct_operator(self, chain6_free_decay):
        pair = build_pair(chain6_free_decay, True)
        direct = np.linalg.eigvals(pair.y @ np.linalg.pinv(pair.x))
        r = dmd_decompose(pair, FULL)
        for mu in direct:
            assert np.min(np.abs(r.discrete_eigs - mu)) < 1e-8

    def test_reconstruction_every_sample(self, chain6_free_decay):
        r = decompose(chain6_free_decay)
        data = chain6_free_decay.data
        for k in range(0, chain6_free_decay.n_samples, 50):
            x = reconstruct(r, k)
            assert np.linalg.norm(x - data[:, k]) <= 1e-6 * np.linalg.norm(data[:, k])

    def test_mode_shapes(self, chain6_free_decay, chain6_truth):
        from dmdmodal.modal import mac, match_modes
        r = decompose(chain6_free_decay)
        idx = oscillatory(r)
        picks = idx[match_modes(r.frequencies_hz[idx], chain6_truth.frequencies_hz)]
        for i, k in enumerate(picks):
            assert mac(r.modes[:, k], chain6_truth.mode_matrix[:, i]) >= 0.9999

    def test_amplitude_sort(self, chain6_free_decay):
        r = decompose(chain6_free_decay, DmdOptions(FULL_RANK, sort="amplitude"))
        assert np.all(np.diff(r.amplitudes) <= 1e-12)

    def test_truncation_containment(self, chain6_master, chain6_truth):
        from dmdmodal.snapshots import remove_mean
        noisy = remove_mean(synth.inject_noise(chain6_master, 1e-4, seed=5))
        loose = decompose(noisy, DmdOptions(TruncationPolicy("rel", 1e-3)))
        tight = decompose(noisy, DmdOptions(TruncationPolicy("rel", 1e-4)))
        for f in chain6_truth.frequencies_hz:
            hits = loose.frequencies_hz[np.abs(loose.frequencies_hz - f) <= CLUSTER_TOLERANCE * f]
            for h in hits:
                assert np.min(np.abs(tight.frequencies_hz - h)) <= CLUSTER_TOLERANCE * h


def test_json_round_trip(sdof_snap):
    r = decompose(sdof_snap)
    text = json.dumps(result_to_dict(r), allow_nan=False)
    back = result_from_dict(json.loads(text))
    np.testing.assert_array_equal(back.discrete_eigs, r.discrete_eigs)
    np.testing.assert_array_equal(back.modes, r.modes)
    np.testing.assert_array_equal(back.initial_amplitudes, r.initial_amplitudes)
    assert back.options == {"truncation": "full", "augment": True, "sort": "frequency"}


def test_json_nan_becomes_null():
    snap = SnapshotMatrix(np.ones((1, 10)), 1.0)
    d = result_to_dict(decompose(snap))
    assert d["damping_ratios"] == [None]
    assert math.isnan(result_from_dict(d).damping_ratios[0])
