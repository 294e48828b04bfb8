import math

import numpy as np
import pytest

from dmdmodal import synth
from dmdmodal.errors import (
    IllConditionedFitError,
    IncompatibleRecordsError,
    InvalidDataError,
    InvalidInputError,
    SegmentationError,
)
from dmdmodal.lscf import (
    MAX_ROOT_MODULUS,
    FrfSet,
    SegmentSpec,
    estimate_frf,
    lscf_fit,
    read_frf_csv,
    stabilization_diagram,
)
from dmdmodal.modal import percentage_error
from dmdmodal.snapshots import SnapshotMatrix


@pytest.fixture(scope="module")
def single_pole_frf():
    f = np.linspace(0.0, 100.0, 401)
    h = synth.sdof_receptance(synth.SDOF_PAPER, f)[None, :]
    return FrfSet(f, h, np.ones(h.shape), 1 / 200)


@pytest.fixture(scope="module")
def chain6_frf():
    return synth.chain6_paper_frf()


@pytest.fixture(scope="module")
def noise_frf():
    rng = np.random.default_rng(2024)
    f = np.linspace(0.0, 1.0, 2001)
    h = rng.standard_normal((1, f.size)) + 1j * rng.standard_normal((1, f.size))
    return FrfSet(f, h, np.ones(h.shape), 0.5)


class TestEstimateFrf:
    def sine_records(self, gain=3.0, lag=math.pi / 4, n=1024, fs=128.0):
        t = np.arange(n) / fs
        f0 = 8.0  # exactly on a frequency line
        force = SnapshotMatrix(np.sin(2 * np.pi * f0 * t)[None], 1 / fs)
        resp = SnapshotMatrix(gain * np.sin(2 * np.pi * f0 * t - lag)[None], 1 / fs)
        return force, resp, f0

    def test_single_sine(self):
        force, resp, f0 = self.sine_records()
        frf = estimate_frf(force, resp)
        k = np.argmin(np.abs(frf.frequencies_hz - f0))
        assert abs(frf.responses[0, k]) == pytest.approx(3.0, rel=1e-9)
        assert np.angle(frf.responses[0, k]) == pytest.approx(-math.pi / 4, abs=1e-9)

    def test_single_segment_weights_are_one(self):
        force, resp, _ = self.sine_records()
        frf = estimate_frf(force, resp)
        np.testing.assert_array_equal(frf.weights, 1.0)

    def test_linearity(self):
        # broadband force: a sine leaves S_ff at rounding level off the tone
        rng = np.random.default_rng(1)
        force = SnapshotMatrix(rng.standard_normal((1, 2048)), 0.01)
        resp = SnapshotMatrix(np.vstack([np.roll(force.data[0], 3), np.cumsum(force.data[0])]), 0.01)
        base = estimate_frf(force, resp, SegmentSpec(length=256))
        scaled = estimate_frf(force, resp.replace(data=2.5 * resp.data), SegmentSpec(length=256))
        np.testing.assert_allclose(np.abs(scaled.responses), 2.5 * np.abs(base.responses), rtol=1e-12)

    def test_coherence_weights_with_averaging(self):
        rng = np.random.default_rng(0)
        n, fs = 4096, 64.0
        force = rng.standard_normal(n)
        resp = np.convolve(force, [0.5, 0.3, 0.1])[:n]
        frf = estimate_frf(SnapshotMatrix(force[None], 1 / fs), SnapshotMatrix(resp[None], 1 / fs),
                           SegmentSpec(length=256))
        assert np.all((frf.weights >= 0) & (frf.weights <= 1 + 1e-12))
        assert np.median(frf.weights) > 0.99

    def test_sdof_impulse_response(self):
        wn = 2 * np.pi * 5.0
        p = synth.SdofParams(1.0, 2 * 0.02 * wn, wn**2)
        fs, n = 200.0, 4000
        t = np.arange(n) / fs
        h = np.exp(-p.damping_ratio * wn * t) * np.sin(p.damped_frequency * t) / (p.mass * p.damped_frequency)
        impulse = np.zeros(n)
        impulse[0] = fs
        frf = estimate_frf(SnapshotMatrix(impulse[None], 1 / fs), SnapshotMatrix(h[None], 1 / fs),
                           SegmentSpec(window="boxcar"))
        band = (frf.frequencies_hz >= 0.2 * 5.0) & (frf.frequencies_hz <= 0.8 * 5.0)
        exact = synth.sdof_receptance(p, frf.frequencies_hz[band])
        np.testing.assert_allclose(np.abs(frf.responses[0, band]), np.abs(exact), rtol=0.01)

    def test_mismatched_dt(self):
        force, resp, _ = self.sine_records()
        with pytest.raises(IncompatibleRecordsError):
            estimate_frf(force, resp.replace(dt=resp.dt * 2))

    def test_mismatched_length(self):
        force, resp, _ = self.sine_records()
        with pytest.raises(IncompatibleRecordsError):
            estimate_frf(force, resp.replace(data=resp.data[:, :-1]))

    def test_segment_too_long(self):
        force, resp, _ = self.sine_records()
        with pytest.raises(SegmentationError):
            estimate_frf(force, resp, SegmentSpec(length=5000))


class TestFrfSet:
    def test_validation(self):
        with pytest.raises(InvalidDataError):
            FrfSet([0.0, 0.0], np.ones((1, 2)), np.ones((1, 2)), 1.0)
        with pytest.raises(InvalidDataError):
            FrfSet([0.0, 1.0], np.ones((1, 2)), np.ones((1, 3)), 1.0)
        with pytest.raises(InvalidInputError):
            FrfSet([0.0, 1.0], np.ones((1, 2)), np.ones((1, 2)), 0.0)

    def test_csv_round_trip(self, tmp_path, chain6_frf):
        path = tmp_path / "frf.csv"
        chain6_frf.write_csv(path, preamble=["config: {}"])
        back = read_frf_csv(path)
        np.testing.assert_array_equal(back.responses, chain6_frf.responses)
        np.testing.assert_array_equal(back.weights, chain6_frf.weights)
        assert back.sampling_period == chain6_frf.sampling_period
        assert back.channel_labels == chain6_frf.channel_labels

    def test_band(self, chain6_frf):
        sub = chain6_frf.band(0.1, 0.2)
        assert sub.frequencies_hz[0] >= 0.1 and sub.frequencies_hz[-1] <= 0.2


class TestLscfFit:
    def test_single_pole(self, single_pole_frf):
        poles = lscf_fit(single_pole_frf, 4).poles
        assert len(poles) == 1
        assert percentage_error(poles[0].frequency_hz, 50.0) <= 0.1
        assert percentage_error(poles[0].damping_ratio, 0.01) <= 5

    def test_overfit_keeps_physical_pole(self, single_pole_frf):
        poles = lscf_fit(single_pole_frf, 20).poles
        assert min(percentage_error(p.frequency_hz, 50.0) for p in poles) <= 0.1

    def test_chain6_order_60(self, chain6_frf, chain6_truth):
        poles = lscf_fit(chain6_frf, 60).poles
        f = np.array([p.frequency_hz for p in poles])
        z = np.array([p.damping_ratio for p in poles])
        for fn, zn in zip(chain6_truth.frequencies_hz, chain6_truth.damping_ratios):
            k = np.argmin(np.abs(f - fn))
            assert percentage_error(f[k], fn) <= 3e-2
            assert percentage_error(z[k], zn) <= 2.6

    def test_physical_filter(self, noise_frf):
        for keep in (False, True):
            for p in lscf_fit(noise_frf, 30, keep_unstable=keep).poles:
                assert p.s.imag > 0
                assert p.damping_ratio <= 0.5
                assert p.frequency_hz <= noise_frf.frequencies_hz[-1]
                if p.stable:
                    assert p.s.real <= 0 or abs(math.exp(p.s.real * noise_frf.sampling_period)) <= MAX_ROOT_MODULUS
                else:
                    assert keep and p.s.real > 0

    def test_too_few_lines(self, single_pole_frf):
        with pytest.raises(InvalidInputError):
            lscf_fit(single_pole_frf, 200)
        with pytest.raises(InvalidInputError):
            lscf_fit(single_pole_frf, 0)

    def test_zero_weights_are_ill_conditioned(self, single_pole_frf):
        dead = FrfSet(single_pole_frf.frequencies_hz, single_pole_frf.responses,
                      np.zeros(single_pole_frf.weights.shape), single_pole_frf.sampling_period)
        with pytest.raises(IllConditionedFitError, match="lower the order"):
            lscf_fit(dead, 4)


class TestStabilization:
    def test_chain6(self, chain6_frf, chain6_truth):
        sweep = stabilization_diagram(chain6_frf, 60, threshold=0.01)
        stable = sweep.stable_clusters
        assert len(stable) == 6
        for c, fn in zip(stable, chain6_truth.frequencies_hz):
            assert percentage_error(c.mean_frequency, fn) <= 1.0
        assert sweep.axis_name == "polynomial_order"
        assert len(sweep.poles_per_step) == 60

    def test_single_pole(self, single_pole_frf):
        assert len(stabilization_diagram(single_pole_frf, 30).stable_clusters) == 1

    def test_pure_noise(self, noise_frf):
        assert stabilization_diagram(noise_frf, 40).stable_clusters == []

    def test_order_insensitive(self, chain6_frf):
        a = stabilization_diagram(chain6_frf, 50).stable_clusters
        b = stabilization_diagram(chain6_frf, 60).stable_clusters
        assert len(a) == len(b)
        for ca, cb in zip(a, b):
            assert abs(ca.mean_frequency - cb.mean_frequency) < 0.01 * ca.mean_frequency

    def test_stability_labels(self, chain6_frf):
        sweep = stabilization_diagram(chain6_frf, 20)
        assert not any(p.stable for p in sweep.poles_per_step[0])
        for prev, step in zip(sweep.poles_per_step, sweep.poles_per_step[1:]):
            pf = np.array([p.frequency_hz for p in prev])
            for p in step:
                near = pf.size > 0 and np.min(np.abs(pf - p.frequency_hz) / pf) <= 0.01
                assert p.stable == near

    def test_max_order(self, chain6_frf):
        with pytest.raises(InvalidInputError):
            stabilization_diagram(chain6_frf, 1)

    def test_csv(self, tmp_path, single_pole_frf):
        path = tmp_path / "stab.csv"
        stabilization_diagram(single_pole_frf, 10).write_csv(path, "order")
        header = path.read_text().splitlines()[0]
        assert header == "order,frequency_hz,zeta,stable_flag,cluster_id"
