import csv
import dataclasses
import math

import numpy as np
import pytest

from nonlipobs.observers import ObserverConfig, Variant, default_highgain_k
from nonlipobs.plant import integrator_chain, linear_chain
from nonlipobs.sim import (
    DivergenceError,
    InputSignal,
    NoiseConfig,
    SampledSignal,
    Scenario,
    fmt,
    gen_noise,
    metrics,
    run,
    simulate_plant,
    sweep,
    write_sweep_csv,
    write_trajectory_csv,
)

K4 = (5.0, 8.77, 4.44, 1.1)


def hom(L=3.0, **kw):
    return ObserverConfig(Variant.HOMOGENEOUS, 4, L=L, k=K4, d0=-1.0, **kw)


def hg(L=3.0, **kw):
    return ObserverConfig(Variant.HIGH_GAIN, 4, L=L, k=(14.0, 99.0, 408.0, 833.0), **kw)


def test_input_signals():
    t = np.array([0.0, 0.1, 0.2])
    assert np.allclose(InputSignal("sine").sample(t), 5 * np.sin(10 * t))
    assert InputSignal("constant", value=2.0)(3.0) == 2.0
    s = InputSignal("series", values=(1.0, 2.0, 3.0), dt=0.1)
    assert list(s.sample(np.array([0.0, 0.15, 0.2, 5.0]))) == [1.0, 2.0, 3.0, 3.0]
    with pytest.raises(ValueError):
        InputSignal("square")
    with pytest.raises(ValueError):
        InputSignal("series")
    z = SampledSignal([1.0, 2.0, 3.0], 0.5)
    assert (z(0.0), z(0.5), z(0.74), z(9.0)) == (1.0, 2.0, 2.0, 3.0)


def test_noise_recurrence_and_scaling():
    cfg = NoiseConfig(sigma=0.03, filter_a=50.0, seed=3, scale="source")
    dt = 1e-3
    v, n = gen_noise(1000, dt, cfg, return_source=True)
    assert v[0] == 0.0
    ref = np.zeros(1000)
    for k in range(999):
        ref[k + 1] = ref[k] + dt * 50.0 * (n[k] - ref[k])
    assert np.allclose(v, ref, rtol=0, atol=1e-15)
    assert np.std(n) == pytest.approx(0.03, rel=0.1)


def test_noise_output_std():
    v = gen_noise(2_000_000, 1e-5, NoiseConfig(sigma=0.03, seed=1))
    # long correlation time (1/a = 0.02 s) over 20 s leaves a few % sampling error
    assert np.std(v[100_000:]) == pytest.approx(0.03, rel=0.05)


def test_noise_is_seeded():
    a = gen_noise(1000, 1e-4, NoiseConfig(seed=5))
    b = gen_noise(1000, 1e-4, NoiseConfig(seed=5))
    c = gen_noise(1000, 1e-4, NoiseConfig(seed=6))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    with pytest.raises(ValueError):
        gen_noise(10, 1.0, NoiseConfig())
    with pytest.raises(ValueError):
        NoiseConfig(scale="both")


def test_metrics_windows():
    t = np.linspace(0, 10, 101)
    e = np.exp(-t)[:, None] * np.array([1.0, 2.0])
    final, peak, conv = metrics(t, e, tail_fraction=0.1, conv_threshold=1e-2)
    assert np.allclose(final, np.exp(-9.0) * np.array([1.0, 2.0]))
    assert peak == 2.0
    # 2 exp(-t) <= 1e-2 from t = ln(200) ~ 5.298 on, i.e. the grid point 5.3
    assert conv == pytest.approx(5.3)
    f2, _, _ = metrics(t, e, tail_fraction=0.5)
    assert np.allclose(f2, np.exp(-5.0) * np.array([1.0, 2.0]))
    _, _, never = metrics(t, np.ones((101, 1)))
    assert never is None
    with pytest.raises(ValueError):
        metrics(t, e, tail_fraction=1.0)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(dt=0.0)
    with pytest.raises(ValueError):
        Scenario(dt=1e-3, T=1e-4)
    with pytest.raises(ValueError):
        Scenario(system=integrator_chain(2))
    with pytest.raises(ValueError):
        Scenario(observers=(ObserverConfig(Variant.HIGH_GAIN, 3, L=1.0, k=(1.0, 1.0, 1.0)),))


def test_determinism():
    sc = Scenario(observers=(hom(),), noise=NoiseConfig(seed=4), T=0.2, dt=1e-4)
    a, b = run(sc), run(sc)
    assert np.array_equal(a.z, b.z)
    assert np.array_equal(a.traces[0].zhat, b.traces[0].zhat)


def _plant_end(dt, T=1.0):
    sc = Scenario(u=InputSignal("constant", value=0.0), dt=dt, T=T, record_every=1)
    return simulate_plant(sc).x_rec[-1]


def test_euler_first_order():
    dt = 1e-3
    e1 = np.linalg.norm(_plant_end(dt) - _plant_end(dt / 2))
    e2 = np.linalg.norm(_plant_end(dt / 2) - _plant_end(dt / 4))
    assert e1 / e2 == pytest.approx(2.0, rel=0.2)


def test_triangular_plant_and_recording():
    sys_ = linear_chain(2, -1.0)
    sc = Scenario(system=sys_, z0=(1.0, 0.0), dt=1e-3, T=0.1, record_every=7, u=InputSignal("constant"))
    p = simulate_plant(sc)
    assert p.t_rec[-1] == pytest.approx(0.1)
    assert p.t_rec[1] == pytest.approx(7e-3)
    assert p.rates_rec.shape == p.z_rec.shape
    assert np.allclose(p.rates_rec[0], sys_.rhs([1.0, 0.0], 0.0))
    assert len(p.y) == sc.n_steps + 1


def test_noise_free_linear_chain_converges():
    sc = Scenario(
        system=integrator_chain(4),
        z0=(1.0, -1.0, 0.5, 0.2),
        observers=(hg(L=2.0, phi_hat=integrator_chain(4).phi_hat()),),
        u=InputSignal("constant"),
        dt=1e-4,
        T=8.0,
    )
    tr = run(sc).traces[0]
    assert tr.converged and np.all(tr.final_errors < 1e-3)


@pytest.mark.parametrize("scale, expect_bounded", [(1.0, True), (100.0, False)])
def test_iss_with_restriction(scale, expect_bounded):
    # d0 = -1 observer on a chain with an unknown bounded last-line disturbance
    w4 = (0.0, 0.0, 0.0, lambda t: scale * math.sin(2.0 * t))
    sc = Scenario(
        system=integrator_chain(4),
        z0=(0.5, 0.0, 0.0, 0.0),
        w=w4,
        observers=(hom(L=1.5),),
        u=InputSignal("constant"),
        dt=1e-4,
        T=6.0,
    )
    rows = sweep(sc, [1.5])
    row = rows[0]
    if expect_bounded:
        assert not row.diverged and row.final_errors[3] < 1e-2
    else:
        # above the threshold the error must be reported large (or as a divergence), not crash
        assert row.diverged or row.final_errors[3] > 1.0


def test_divergence_is_reported():
    # the plant rests at 0; dt is far beyond the observer's Euler stability limit
    sc = Scenario(
        system=integrator_chain(4),
        z0=(0.0, 0.0, 0.0, 0.0),
        zhat0=([1.0, 0.0, 0.0, 0.0],),
        observers=(hg(L=10.0),),
        u=InputSignal("constant"),
        dt=0.05,
        T=500.0,
    )
    with pytest.raises(DivergenceError):
        run(sc)
    row = sweep(sc, [10.0])[0]
    assert row.diverged and row.blowup_time is not None and row.final_errors is None


def test_sweep_shares_plant_and_matches_single_runs():
    sc = Scenario(observers=(hg(),), noise=NoiseConfig(seed=2), T=0.3, dt=1e-4)
    rows = sweep(sc, [2.0, 4.0])
    single = run(dataclasses.replace(sc, observers=(hg(L=4.0),))).traces[0]
    assert np.array_equal(rows[1].final_errors, single.final_errors)
    assert rows[0].seed == 2


def test_sweep_independent_of_worker_count():
    sc = Scenario(observers=(hom(),), T=0.05, dt=1e-4)
    a = sweep(sc, [2.0, 3.0], workers=1)
    b = sweep(sc, [2.0, 3.0], workers=2)
    for ra, rb in zip(a, b):
        assert np.array_equal(ra.final_errors, rb.final_errors) and ra.peaking == rb.peaking


def test_cascade_runs_and_reports_first_block():
    cfg = ObserverConfig(
        Variant.CASCADE_HIGH_GAIN, 4, L_blocks=(3.0,) * 4,
        k_blocks=tuple(default_highgain_k(d) for d in (1, 2, 3, 4)),
    )
    tr = run(Scenario(observers=(cfg,), T=0.05, dt=1e-4)).traces[0]
    assert tr.zhat.shape[1] == 10
    assert np.array_equal(tr.errors[:, 0], tr.all_errors[:, 0])
    assert tr.peaking == pytest.approx(np.abs(tr.all_errors).max())


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_csv_round_trip(tmp_path):
    res = run(Scenario(observers=(hom(),), T=0.01, dt=1e-4, record_every=1))
    p = tmp_path / "traj.csv"
    write_trajectory_csv(res, p)
    rows = _read(p)
    assert rows[0][:5] == ["t", "z1", "z2", "z3", "z4"] and rows[0][-1] == "e_z4"
    back = np.array([[float(v) for v in r] for r in rows[1:]])
    assert np.array_equal(back[:, 0], res.t)
    assert np.array_equal(back[:, 1:5], res.z)
    assert np.array_equal(back[:, -4:], res.traces[0].errors)

    sw = tmp_path / "sweep.csv"
    sc = Scenario(observers=(hom(),), T=0.01, dt=1e-4)
    rows = sweep(sc, [2.0, 3.0])
    write_sweep_csv(rows, sw)
    got = _read(sw)
    assert got[0] == ["L", "e_z1", "e_z2", "e_z3", "e_z4", "peaking", "converged", "conv_time", "seed"]
    assert float(got[2][4]) == rows[1].final_errors[3]
    assert fmt(None) == "" and float(fmt(0.1)) == 0.1
