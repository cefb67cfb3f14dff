import warnings
from dataclasses import replace

import numpy as np
import pytest

from wdmtwin import autodiff as ad
from wdmtwin.errors import InvalidArgument, NumericalFailure
from wdmtwin.field_sim import NetworkSim
from wdmtwin.grid import ChannelGrid, PowerProfile, flat_profile
from wdmtwin.link import run_cascade
from wdmtwin.train import TrainConfig, generate_probes, probe_profiles, train_twin, validate_twin

from .conftest import make_topology


def test_degenerate_probe_ranges_give_flat_profiles(grid48):
    cfg = TrainConfig(total_range_dbm=(18.0, 18.0), offset_db=0.0)
    for p in probe_profiles(grid48, cfg, count=5):
        assert np.allclose(p, flat_profile(grid48, 18.0).p, rtol=1e-12)


def test_probe_ids_and_reproducibility(sim):
    cfg = TrainConfig(seed=3)
    a = generate_probes(sim, "train", cfg, count=250)
    b = generate_probes(sim, "train", cfg, count=250)
    assert len({p.probe_id for p in a}) == 250
    assert all(np.array_equal(x.p_out_dbm, y.p_out_dbm) for x, y in zip(a, b))


def test_probe_totals_span_range(grid48):
    p = probe_profiles(grid48, TrainConfig(), count=250)
    totals = 10 * np.log10(p.sum(axis=1))
    assert totals.min() == pytest.approx(12.0, abs=0.1)
    assert totals.max() == pytest.approx(21.0, abs=0.1)
    offsets = 10 * np.log10(p / p.mean(axis=1, keepdims=True))
    assert np.ptp(offsets, axis=1).max() <= 18.0


def test_config_validation():
    with pytest.raises(InvalidArgument):
        TrainConfig(n_train=0)
    with pytest.raises(InvalidArgument):
        TrainConfig(total_range_dbm=(21.0, 12.0))


def test_realizable_target_is_fit_exactly():
    sim = NetworkSim(make_topology(osa_sigma_db=0.0),
                     truth_kwargs={"kappa_t": 0.0, "ripple_amp_db": (0.0, 0.0, 0.0)})
    cfg = TrainConfig(n_train=40, n_val=10, epochs=200)
    probes = generate_probes(sim, "train", cfg)
    link = sim.link("train")
    model, _ = train_twin(probes, sim.grid, link, cfg)
    rep = validate_twin(model, probes[40:], link)
    assert rep.gain_rms_db < 0.02


def test_training_curve_descends(trained):
    curve = np.array(trained[1])
    assert curve.shape == (500, 3)
    assert curve[-1, 1] <= curve[0, 1]
    assert curve[-50:, 1].mean() <= curve[:50, 1].mean()
    assert np.all(np.isfinite(curve[:, 2]))


def test_training_is_deterministic(sim):
    cfg = TrainConfig(n_train=32, n_val=8, epochs=3, seed=11)
    probes = generate_probes(sim, "train", cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a, ca = train_twin(probes, sim.grid, sim.link("train"), cfg)
        b, cb = train_twin(probes, sim.grid, sim.link("train"), cfg)
    assert a.dumps() == b.dumps() and ca == cb
    assert a.metadata["trained"] and a.metadata["probe_count"] == 32


def test_perfect_model_has_zero_error():
    sim = NetworkSim(make_topology(osa_sigma_db=0.0))
    probes = generate_probes(sim, "train", TrainConfig(), count=5)
    truth = sim.devices["RDG/0"]
    rep = validate_twin(truth, probes, sim.link("train"))
    assert rep.gain_max_db < 1e-9 and rep.ase_max_db < 1e-9


def test_grid_mismatch_is_rejected(sim, trained):
    probes = generate_probes(sim, "train", TrainConfig(), count=2)
    other = ChannelGrid.uniform(n_ch=48, f0_thz=191.4)
    with pytest.raises(InvalidArgument):
        train_twin(probes, other, sim.link("train"), TrainConfig(n_train=2, n_val=0))
    model = trained[0]
    foreign = [replace(p, grid_fingerprint=other.fingerprint) for p in probes]
    with pytest.raises(InvalidArgument):
        validate_twin(model, foreign, sim.link("train"))


def test_nan_measurement_aborts_training(sim):
    probes = generate_probes(sim, "train", TrainConfig(), count=4)
    probes[1] = replace(probes[1], p_out_dbm=np.full(48, np.nan))
    with pytest.raises(NumericalFailure):
        train_twin(probes, sim.grid, sim.link("train"), TrainConfig(n_train=4, n_val=0, epochs=1))


def test_every_weight_receives_gradient(sim, trained):
    model, _, probes, _ = trained
    x = np.array([10 ** (p.p_in_dbm / 10) for p in probes[:16]])
    tape = ad.Tape()
    leaves = {k: tape.var(v) for k, v in model.params().items()}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        state = run_cascade(sim.link("train").with_device(model.with_params(leaves)), x)
    y_out = np.array([p.p_out_dbm for p in probes[:16]])
    y_ase = np.array([p.p_ase_dbm for p in probes[:16]])
    d1 = 10 * ad.log10(state.signal) - y_out
    d2 = 10 * ad.log10(state.ase) - y_ase
    g = tape.backward(ad.mean(d1 * d1 + d2 * d2))
    for k, v in leaves.items():
        assert np.any(g[v] != 0), k


def test_trained_twin_meets_fidelity_bounds(sim, trained):
    model, _, probes, cfg = trained
    rep = validate_twin(model, probes[cfg.n_train:], sim.link("train"))
    assert rep.gain_rms_db <= 0.2 and rep.ase_rms_db <= 0.3
    assert len(rep.rows()) == 48


def test_probe_profile_validation(grid48, sim):
    with pytest.raises(InvalidArgument):
        sim.measure_probe("train", PowerProfile(ChannelGrid.uniform(n_ch=4), np.ones(4)))
